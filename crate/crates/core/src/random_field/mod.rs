//! Lognormal coefficient fields `k = exp(g)` where `g` is Gaussian with
//! exponential covariance `sigma^2 exp(-|x - y|_1 / lambda)` on `(0, 1)^d`,
//! represented by a truncated Karhunen-Loeve expansion
//!
//! ```text
//!     g(x) = mean + sum_n sqrt(theta_n) xi_n phi_n(x),   xi_n iid N(0, 1).
//! ```
//!
//! The 1D eigenpairs come from a Nystrom discretization of the covariance
//! operator with trapezoid weights on a uniform generation grid. On a uniform
//! grid the exponential kernel matrix is a Kac-Murdock-Szego matrix whose
//! inverse is tridiagonal, so the symmetrized Nystrom problem
//! `W^1/2 C W^1/2 psi = theta psi` is solved as the lowest part of the
//! spectrum of the tridiagonal matrix `W^-1/2 C^-1 W^-1/2`. 2D eigenpairs are
//! tensor products of the 1D ones (the l1 kernel factorizes).

mod tridiagonal;

use alloc::vec;
use alloc::vec::Vec;

pub use self::tridiagonal::SymTridiagonal;
use crate::error::{Error, Result};
use crate::rng::{draw_xi, RngKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dimension {
    One = 1,
    Two = 2,
}

impl Dimension {
    pub fn from_usize(d: usize) -> Result<Self> {
        match d {
            1 => Ok(Dimension::One),
            2 => Ok(Dimension::Two),
            _ => Err(Error::invalid("dimension", alloc::format!("{d} is not 1 or 2"))),
        }
    }

    pub fn as_usize(self) -> usize {
        self as usize
    }

    /// Euclidean diameter of the unit cube in this dimension.
    pub fn domain_diameter(self) -> f64 {
        match self {
            Dimension::One => 1.0,
            Dimension::Two => core::f64::consts::SQRT_2,
        }
    }
}

/// Parameters of the log-conductivity field. The norm in the covariance is
/// always the l1 norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomFieldSpec {
    pub variance: f64,
    pub correlation_length: f64,
    /// Constant mean of `log k`.
    pub mean_log: f64,
    /// Number of KL modes kept. Zero gives the deterministic field `k = exp(mean_log)`.
    pub truncation: usize,
    pub dimension: Dimension,
}

impl RandomFieldSpec {
    pub fn new(variance: f64, correlation_length: f64, truncation: usize, dimension: Dimension) -> Self {
        RandomFieldSpec { variance, correlation_length, mean_log: 0.0, truncation, dimension }
    }

    /// Checks the Holder-regularity regime `sigma^2 >= 1`, `lambda <= diam D`.
    pub fn validate(&self) -> Result<()> {
        if !(self.variance >= 1.0) || !self.variance.is_finite() {
            return Err(Error::invalid("variance", alloc::format!("{} < 1", self.variance)));
        }
        let diam = self.dimension.domain_diameter();
        if !(self.correlation_length > 0.0 && self.correlation_length <= diam) {
            return Err(Error::invalid(
                "correlation_length",
                alloc::format!("{} not in (0, {diam}]", self.correlation_length),
            ));
        }
        if !self.mean_log.is_finite() {
            return Err(Error::invalid("mean_log", "not finite"));
        }
        Ok(())
    }
}

/// `sigma^2 exp(-|x - y|_1 / lambda)`.
pub fn covariance(x: &[f64], y: &[f64], spec: &RandomFieldSpec) -> f64 {
    let dist: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
    spec.variance * libm::exp(-dist / spec.correlation_length)
}

/// Nystrom eigenpairs of the unit-variance 1D exponential kernel on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KlBasis1d {
    pub correlation_length: f64,
    /// Number of generation intervals; the grid has `intervals + 1` points.
    pub intervals: usize,
    /// Nonincreasing eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Eigenfunctions sampled on the generation grid, one vector per mode,
    /// normalized in the trapezoid-weighted L2 inner product.
    pub eigenfunctions: Vec<Vec<f64>>,
}

impl KlBasis1d {
    pub fn build(correlation_length: f64, intervals: usize, modes: usize) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::invalid("generation grid", "needs at least one interval"));
        }
        if !(correlation_length > 0.0) {
            return Err(Error::invalid("correlation_length", "must be positive"));
        }
        let n = intervals + 1;
        if modes > n {
            return Err(Error::TooManyModes { requested: modes, available: n });
        }
        let dx = 1.0 / intervals as f64;
        let rho = libm::exp(-dx / correlation_length);
        // Unit-variance KMS inverse: tridiag(-rho; 1, 1+rho^2, ..., 1+rho^2, 1) / (1 - rho^2).
        let scale = 1.0 / (1.0 - rho * rho);
        let weights: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * dx } else { dx }).collect();
        let diag: Vec<f64> = (0..n)
            .map(|i| {
                let d = if i == 0 || i == n - 1 { 1.0 } else { 1.0 + rho * rho };
                scale * d / weights[i]
            })
            .collect();
        let off: Vec<f64> = (0..n - 1).map(|i| -scale * rho / libm::sqrt(weights[i] * weights[i + 1])).collect();
        let t = SymTridiagonal::new(diag, off);
        let (mus, psis) = t.lowest_eigenpairs(modes);
        let eigenvalues = mus.iter().map(|mu| 1.0 / mu).collect();
        let eigenfunctions = psis
            .into_iter()
            .map(|psi| {
                let mut phi: Vec<f64> = psi.iter().zip(&weights).map(|(p, w)| p / libm::sqrt(*w)).collect();
                // Sign convention: positive value at x = 0.
                if phi[0] < 0.0 {
                    phi.iter_mut().for_each(|v| *v = -*v);
                }
                phi
            })
            .collect();
        Ok(KlBasis1d { correlation_length, intervals, eigenvalues, eigenfunctions })
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.intervals as f64
    }

    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Trapezoid quadrature weights of the generation grid.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.intervals + 1;
        let dx = self.dx();
        (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * dx } else { dx }).collect()
    }

    /// Interpolation stencil `(left index, weight of right node)` at `x`.
    fn locate(&self, x: f64) -> (usize, f64) {
        let s = (x.clamp(0.0, 1.0)) * self.intervals as f64;
        let i = (libm::floor(s) as usize).min(self.intervals - 1);
        (i, s - i as f64)
    }

    /// Piecewise-linear interpolation of mode `n` at `x`.
    pub fn eval(&self, n: usize, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        let phi = &self.eigenfunctions[n];
        (1.0 - t) * phi[i] + t * phi[i + 1]
    }

    /// Largest deviation of the discrete Gram matrix from the identity.
    pub fn orthonormality_residual(&self) -> f64 {
        let w = self.weights();
        let mut worst = 0.0f64;
        for (a, pa) in self.eigenfunctions.iter().enumerate() {
            for (b, pb) in self.eigenfunctions.iter().enumerate().skip(a) {
                let dot: f64 = pa.iter().zip(pb).zip(&w).map(|((x, y), w)| x * y * w).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Truncated KL basis of the field described by `spec`.
#[derive(Debug, Clone, PartialEq)]
pub struct KlBasis {
    pub spec: RandomFieldSpec,
    /// `theta_n` including the variance factor, nonincreasing.
    pub eigenvalues: Vec<f64>,
    pub basis_1d: KlBasis1d,
    /// For each mode, the 1D mode index per coordinate direction. In 1D the
    /// second index is unused and equal to zero.
    pub mode_indices: Vec<(usize, usize)>,
}

impl KlBasis {
    /// Builds the basis on a uniform generation grid with `intervals`
    /// intervals per direction.
    pub fn build(spec: &RandomFieldSpec, intervals: usize) -> Result<Self> {
        spec.validate()?;
        let m = spec.truncation;
        match spec.dimension {
            Dimension::One => {
                let basis_1d = KlBasis1d::build(spec.correlation_length, intervals, m)?;
                Ok(Self::from_parts_1d(*spec, basis_1d))
            }
            Dimension::Two => {
                let available = (intervals + 1) * (intervals + 1);
                if m > available {
                    return Err(Error::TooManyModes { requested: m, available });
                }
                // Any of the top-m products uses 1D indices below m.
                let m1 = m.min(intervals + 1);
                let basis_1d = KlBasis1d::build(spec.correlation_length, intervals, m1)?;
                Ok(Self::from_parts_2d(*spec, basis_1d))
            }
        }
    }

    pub(crate) fn from_parts_1d(spec: RandomFieldSpec, mut basis_1d: KlBasis1d) -> Self {
        basis_1d.eigenvalues.truncate(spec.truncation);
        basis_1d.eigenfunctions.truncate(spec.truncation);
        let eigenvalues = basis_1d.eigenvalues.iter().map(|t| spec.variance * t).collect();
        let mode_indices = (0..spec.truncation).map(|n| (n, 0)).collect();
        KlBasis { spec, eigenvalues, basis_1d, mode_indices }
    }

    pub(crate) fn from_parts_2d(spec: RandomFieldSpec, basis_1d: KlBasis1d) -> Self {
        let theta = &basis_1d.eigenvalues;
        let m1 = theta.len();
        let mut products: Vec<(f64, usize, usize)> = Vec::with_capacity(m1 * m1);
        for i in 0..m1 {
            for j in 0..m1 {
                products.push((theta[i] * theta[j], i, j));
            }
        }
        products.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        products.truncate(spec.truncation);
        KlBasis {
            spec,
            eigenvalues: products.iter().map(|p| spec.variance * p.0).collect(),
            mode_indices: products.iter().map(|p| (p.1, p.2)).collect(),
            basis_1d,
        }
    }

    /// Reassembles a basis from cached 1D data (as read from a KL cache file).
    pub fn from_cached(spec: RandomFieldSpec, basis_1d: KlBasis1d) -> Result<Self> {
        spec.validate()?;
        match spec.dimension {
            Dimension::One => {
                if basis_1d.modes() < spec.truncation {
                    return Err(Error::TooManyModes { requested: spec.truncation, available: basis_1d.modes() });
                }
                Ok(Self::from_parts_1d(spec, basis_1d))
            }
            Dimension::Two => {
                let needed = spec.truncation.min(basis_1d.intervals + 1);
                if basis_1d.modes() < needed {
                    return Err(Error::TooManyModes {
                        requested: spec.truncation,
                        available: basis_1d.modes() * basis_1d.modes(),
                    });
                }
                Ok(Self::from_parts_2d(spec, basis_1d))
            }
        }
    }

    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `phi_n(x)`, interpolated from the generation grid.
    pub fn eigenfunction(&self, n: usize, x: &[f64]) -> f64 {
        let (i, j) = self.mode_indices[n];
        match self.spec.dimension {
            Dimension::One => self.basis_1d.eval(i, x[0]),
            Dimension::Two => self.basis_1d.eval(i, x[0]) * self.basis_1d.eval(j, x[1]),
        }
    }

    /// Truncated covariance `sum_n theta_n phi_n(x) phi_n(y)`.
    pub fn reconstructed_covariance(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.modes()).map(|n| self.eigenvalues[n] * self.eigenfunction(n, x) * self.eigenfunction(n, y)).sum()
    }

    /// Pointwise variance of the truncated field, `sum_n theta_n phi_n(x)^2`.
    pub fn pointwise_variance(&self, x: &[f64]) -> f64 {
        self.reconstructed_covariance(x, x)
    }

    /// Precomputes `sqrt(theta_n) phi_n` at a fixed set of query points.
    pub fn evaluator(&self, points: &[[f64; 2]]) -> FieldEvaluator {
        let m = self.modes();
        let mut table = Vec::with_capacity(points.len() * m);
        let scales: Vec<f64> = self.eigenvalues.iter().map(|t| libm::sqrt(*t)).collect();
        for p in points {
            for n in 0..m {
                table.push(scales[n] * self.eigenfunction(n, &p[..self.spec.dimension.as_usize()]));
            }
        }
        FieldEvaluator { modes: m, points: points.len(), mean_log: self.spec.mean_log, table }
    }
}

/// Dense `points x modes` table of scaled eigenfunction values.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEvaluator {
    modes: usize,
    points: usize,
    mean_log: f64,
    table: Vec<f64>,
}

impl FieldEvaluator {
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// `log k` at the query points for amplitudes `xi`.
    pub fn log_k(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.modes {
            return Err(Error::DimensionMismatch { expected: self.modes, found: xi.len() });
        }
        if self.modes == 0 {
            return Ok(vec![self.mean_log; self.points]);
        }
        Ok(self
            .table
            .chunks_exact(self.modes)
            .map(|row| self.mean_log + row.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }

    /// Flop estimate of one [`log_k`](Self::log_k) plus exponentiation.
    pub fn flops(&self) -> u64 {
        (self.points * (2 * self.modes + 1)) as u64
    }
}

/// One realization of the coefficient at a set of query points.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRealization {
    pub sample_id: u64,
    pub xi: Vec<f64>,
    pub log_k: Vec<f64>,
}

impl FieldRealization {
    pub fn k(&self) -> impl Iterator<Item = f64> + '_ {
        self.log_k.iter().map(|g| libm::exp(*g))
    }
}

/// `log k = mean + sum_n sqrt(theta_n) xi_n phi_n` at `points`.
pub fn sample_log_field(basis: &KlBasis, xi: &[f64], points: &[[f64; 2]], sample_id: u64) -> Result<FieldRealization> {
    let log_k = basis.evaluator(points).log_k(xi)?;
    Ok(FieldRealization { sample_id, xi: xi.to_vec(), log_k })
}

/// Draws the KL amplitudes for one realization.
pub fn draw_amplitudes(basis: &KlBasis, key: RngKey) -> Vec<f64> {
    draw_xi(key, basis.modes())
}
