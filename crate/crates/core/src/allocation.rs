//! Sample-count planning for plain and projected multilevel Monte Carlo.
//!
//! For the projected estimator the error is bounded by
//!
//! ```text
//! g(N) = |u - u_1| + 2 sum_{l>=2} |u - u_l| + sum_l b_l N_l^{-1/2},
//! b_1 = |u - u_1| + |u|,   b_l = 2 (|u - u_l| + |u - u_{l-1}| + |u|),
//! ```
//!
//! and minimizing `sum_l N_l C_l` subject to `g(N) = eps` gives
//! `N_l = eta^2 eps~^-2 b_l^{2/3} C_l^{-2/3}` with `eta = sum_l b_l^{2/3} C_l^{1/3}`.
//! Levels here are numbered from 1 as in the bound; index 0 of every slice
//! is level 1 (the coarsest).

use alloc::vec::Vec;

use crate::darcy::DarcySampler;
use crate::error::{Error, Result};
use crate::estimators::{DrawKind, Executor, LevelSampler};
use crate::random_field::draw_amplitudes;
use crate::rng::{RngKey, Role};

/// `ceil(|u|^2 / eps^2)`.
pub fn mc_sample_count(eps: f64, norm_u: f64) -> Result<u64> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid("eps", "must be positive"));
    }
    if !(norm_u >= 0.0) || !norm_u.is_finite() {
        return Err(Error::invalid("norm_u", "must be non-negative"));
    }
    let n = libm::ceil(norm_u * norm_u / (eps * eps) * (1.0 - 4.0 * f64::EPSILON));
    Ok((n as u64).max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    pub norm_u: f64,
    /// `|u - u_l|` for `l = 1..L`.
    pub errors: Vec<f64>,
    /// Mean operation count of one level-`l` sample.
    pub costs: Vec<f64>,
}

impl ErrorModel {
    pub fn new(norm_u: f64, errors: Vec<f64>, costs: Vec<f64>) -> Result<Self> {
        let m = ErrorModel { norm_u, errors, costs };
        m.validate()?;
        Ok(m)
    }

    pub fn levels(&self) -> usize {
        self.errors.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.errors.is_empty() {
            return Err(Error::invalid("errors", "need at least one level"));
        }
        if self.errors.len() != self.costs.len() {
            return Err(Error::DimensionMismatch { expected: self.errors.len(), found: self.costs.len() });
        }
        if !(self.norm_u > 0.0) || !self.norm_u.is_finite() {
            return Err(Error::invalid("norm_u", "must be positive"));
        }
        if self.errors.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(Error::invalid("errors", "must be finite and non-negative"));
        }
        if self.costs.iter().any(|c| !(*c > 0.0) || !c.is_finite()) {
            return Err(Error::invalid("costs", "must be finite and positive"));
        }
        Ok(())
    }

    /// Whether errors decrease and costs increase with the level.
    pub fn is_monotone(&self) -> bool {
        self.errors.windows(2).all(|w| w[1] <= w[0]) && self.costs.windows(2).all(|w| w[1] >= w[0])
    }

    /// The coefficients `b_l` of `N_l^{-1/2}` in the error bound.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.levels())
            .map(|l| {
                if l == 0 {
                    self.errors[0] + self.norm_u
                } else {
                    2.0 * (self.errors[l] + self.errors[l - 1] + self.norm_u)
                }
            })
            .collect()
    }

    /// The sample-independent part of the bound.
    pub fn floor(&self) -> f64 {
        self.errors[0] + 2.0 * self.errors[1..].iter().sum::<f64>()
    }

    /// Error bound for real-valued counts.
    pub fn bound(&self, counts: &[f64]) -> Result<f64> {
        if counts.len() != self.levels() {
            return Err(Error::DimensionMismatch { expected: self.levels(), found: counts.len() });
        }
        Ok(self.floor() + self.weights().iter().zip(counts).map(|(b, n)| b / libm::sqrt(*n)).sum::<f64>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPlan {
    pub eps: f64,
    pub eps_tilde: f64,
    pub eta: f64,
    /// Optimal real-valued counts.
    pub real_counts: Vec<f64>,
    /// Counts rounded up.
    pub counts: Vec<u64>,
    /// `eta^3 eps~^-2`.
    pub predicted_cost: f64,
}

impl AllocationPlan {
    /// Optimal counts when `budget` is left for the sampling part of the bound.
    pub fn from_budget(model: &ErrorModel, eps: f64, budget: f64) -> Result<Self> {
        model.validate()?;
        if !(budget > 0.0) || !budget.is_finite() {
            return Err(Error::InfeasibleTarget { eps, eps_tilde: budget, floor: model.floor() });
        }
        let b = model.weights();
        let eta: f64 = b.iter().zip(&model.costs).map(|(b, c)| libm::cbrt(b * b * c)).sum();
        let scale = eta * eta / (budget * budget);
        let real_counts: Vec<f64> =
            b.iter().zip(&model.costs).map(|(b, c)| scale * libm::cbrt(b * b / (c * c))).collect();
        let counts = real_counts.iter().map(|n| (libm::ceil(*n) as u64).max(1)).collect();
        Ok(AllocationPlan {
            eps,
            eps_tilde: budget,
            eta,
            real_counts,
            counts,
            predicted_cost: eta * eta * eta / (budget * budget),
        })
    }

    /// `sum_l N_l C_l` for the real-valued counts.
    pub fn real_cost(&self, model: &ErrorModel) -> f64 {
        self.real_counts.iter().zip(&model.costs).map(|(n, c)| n * c).sum()
    }
}

/// Cost-optimal counts for a target error `eps`.
pub fn pmlmc_allocation(eps: f64, model: &ErrorModel) -> Result<AllocationPlan> {
    model.validate()?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid("eps", "must be positive"));
    }
    let floor = model.floor();
    let eps_tilde = eps - floor;
    if !(eps_tilde > 0.0) {
        return Err(Error::InfeasibleTarget { eps, eps_tilde, floor });
    }
    AllocationPlan::from_budget(model, eps, eps_tilde)
}

/// Cost bound when `|u - u_l| <= C h_l`, `C_l <= C' h_l^{-2d}` and
/// `h_l = 2^-l eps / C`:
///
/// ```text
/// 4^{1+d} eps^{-2(1+d)} C^{2d} C' [ (eps/2 + |u|)^{2/3}
///     + sum_{l=2}^L (3 eps / 2^l + |u|)^{2/3} 2^{2(1+ld)/3} ]^3
/// ```
pub fn complexity_bound(eps: f64, d: usize, c: f64, c_prime: f64, norm_u: f64, levels: usize) -> Result<f64> {
    if !(d == 1 || d == 2) {
        return Err(Error::Precondition(alloc::format!("dimension {d} is not 1 or 2")));
    }
    if !(eps > 0.0 && c > 0.0 && c_prime > 0.0 && norm_u >= 0.0) || levels == 0 {
        return Err(Error::Precondition(alloc::string::String::from(
            "eps, C and C' must be positive, |u| non-negative and L >= 1",
        )));
    }
    let df = d as f64;
    let mut bracket = libm::pow(eps / 2.0 + norm_u, 2.0 / 3.0);
    for l in 2..=levels {
        let lf = l as f64;
        bracket += libm::pow(3.0 * eps / libm::exp2(lf) + norm_u, 2.0 / 3.0) * libm::exp2(2.0 * (1.0 + lf * df) / 3.0);
    }
    Ok(libm::pow(4.0, 1.0 + df)
        * libm::pow(eps, -2.0 * (1.0 + df))
        * libm::pow(c, 2.0 * df)
        * c_prime
        * bracket
        * bracket
        * bracket)
}

/// The error model `|u - u_l| = C h_l`, `C_l = C' h_l^{-2d}` on
/// `h_l = 2^-l eps / C`.
pub fn corollary_model(eps: f64, d: usize, c: f64, c_prime: f64, norm_u: f64, levels: usize) -> Result<ErrorModel> {
    let h: Vec<f64> = (1..=levels).map(|l| eps / (c * libm::exp2(l as f64))).collect();
    ErrorModel::new(
        norm_u,
        h.iter().map(|h| c * h).collect(),
        h.iter().map(|h| c_prime * libm::pow(*h, -2.0 * d as f64)).collect(),
    )
}

/// Estimates an [`ErrorModel`] for sampler levels `0..pilots.len()` from
/// pilot realizations solved both on their level and on `reference_level`.
///
/// Errors and `|u|` are root-mean-square H1 norms; costs are mean operation
/// counts of one projected-estimator sample on each level.
pub fn estimate_error_model<E: Executor>(
    sampler: &DarcySampler,
    exec: &E,
    seed: u64,
    pilots: &[u64],
    reference_level: usize,
) -> Result<ErrorModel> {
    if let Some(&n) = pilots.iter().find(|&&n| n < 10) {
        return Err(Error::InsufficientSamples { needed: 10, got: n as usize });
    }
    if pilots.is_empty() || reference_level < pilots.len() || reference_level >= sampler.levels() {
        return Err(Error::invalid("reference_level", "must be finer than every pilot level and exist"));
    }
    let fem = &sampler.fem;
    let mut errors = Vec::with_capacity(pilots.len());
    let mut costs = Vec::with_capacity(pilots.len());
    let mut norm2 = 0.0;
    let mut norm_count = 0u64;
    for (l, &n) in pilots.iter().enumerate() {
        let kind = if l == 0 { DrawKind::Plain } else { DrawKind::Detail };
        let rows = exec.map(0..n, |i| -> Result<(f64, f64, f64)> {
            let key = RngKey::new(seed, l, i, Role::Auxiliary);
            let xi = draw_amplitudes(&sampler.basis, key);
            let (u, _) = sampler.solve_xi(l, &xi, i)?;
            let (r, _) = sampler.solve_xi(reference_level, &xi, i)?;
            let err = fem.h1_error(&u, &r)?;
            let norm = fem.space(reference_level).h1_norm(&r)?;
            let cost = sampler.draw(l, key, kind)?.ops.flops() as f64;
            Ok((err, norm, cost))
        });
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        let nf = n as f64;
        errors.push(libm::sqrt(rows.iter().map(|r| r.0 * r.0).sum::<f64>() / nf));
        costs.push(rows.iter().map(|r| r.2).sum::<f64>() / nf);
        norm2 += rows.iter().map(|r| r.1 * r.1).sum::<f64>();
        norm_count += n;
    }
    ErrorModel::new(libm::sqrt(norm2 / norm_count as f64), errors, costs)
}
