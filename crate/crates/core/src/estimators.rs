//! Single-level, multilevel and projected multilevel Monte Carlo estimators
//! of the mean of a field-valued random variable.
//!
//! A [`LevelSampler`] turns an [`RngKey`] into a realization on a level, a
//! same-realization difference `u_l - u_{l-1}` or a detail
//! `(I - P_l) u_l`. Estimators only see nodal vectors, the V inner product
//! and prolongation, so the same code drives the Darcy problem and the
//! scalar toy model used for unbiasedness checks.
//!
//! Sample `i` on level `l` always uses the key `(seed, l, i)`. Levels
//! therefore never share realizations, and the fine-level keys of an MLMC
//! run and a PMLMC run with the same seed and counts are identical.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;
use core::str::FromStr;

use crate::cost::OpCount;
use crate::error::{Error, Result};
use crate::fem::{FemHierarchy, FemSolution};
use crate::rng::{draw_xi, RngKey};
use crate::transfer::{TransferMode, TransferSet};

/// Samples processed between two reductions. Fixed so that results do not
/// depend on how an executor schedules work.
pub const CHUNK: u64 = 64;

/// Redraws allowed for one sample before the failure is reported.
pub const MAX_ATTEMPTS: u8 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Mc,
    Slmc,
    Mlmc,
    Pmlmc,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Mc, Method::Slmc, Method::Mlmc, Method::Pmlmc];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::Slmc => "slmc",
            Method::Mlmc => "mlmc",
            Method::Pmlmc => "pmlmc",
        }
    }

    pub fn is_multilevel(self) -> bool {
        matches!(self, Method::Mlmc | Method::Pmlmc)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid("method", alloc::format!("unknown method `{s}`")))
    }
}

/// What one sample on a level computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrawKind {
    /// `u_l`.
    Plain,
    /// `u_l - u_{l-1}` with one realization solved on both grids.
    Difference,
    /// `(I - P_l) u_l` from a single solve.
    Detail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub values: Vec<f64>,
    pub ops: OpCount,
    /// Key of the accepted realization.
    pub key: RngKey,
    pub rejected: u32,
}

pub trait LevelSampler: Sync {
    fn levels(&self) -> usize;

    fn dofs(&self, level: usize) -> usize;

    fn draw(&self, level: usize, key: RngKey, kind: DrawKind) -> Result<Draw>;

    /// V inner product on `level`.
    fn inner(&self, level: usize, a: &[f64], b: &[f64]) -> f64;

    /// Prolongs nodal values from `level` to `level + 1`.
    fn prolong(&self, level: usize, values: &[f64]) -> Vec<f64>;
}

/// Evaluates `f` on every index of a range and returns the results in
/// index order.
pub trait Executor: Sync {
    fn map<T, F>(&self, range: Range<u64>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, range: Range<u64>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        range.map(f).collect()
    }
}

/// Per-level output of an estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelStats {
    pub level: usize,
    pub kind: DrawKind,
    pub samples: u64,
    /// Sample mean of the level term, on this level.
    pub mean: Vec<f64>,
    /// `E||w - E w||_V^2` estimated with the `n - 1` correction.
    pub variance: f64,
    pub ops: OpCount,
    pub rejected: u64,
    pub keys: Vec<RngKey>,
}

impl LevelStats {
    /// Mean operation count per sample.
    pub fn cost_per_sample(&self) -> f64 {
        self.ops.flops() as f64 / self.samples as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    pub method: Method,
    pub seed: u64,
    pub transfer: Option<TransferMode>,
    /// Estimated mean on the finest level used.
    pub mean: FemSolution,
    pub levels: Vec<LevelStats>,
}

impl EstimatorResult {
    pub fn samples(&self) -> Vec<u64> {
        self.levels.iter().map(|l| l.samples).collect()
    }

    pub fn total_samples(&self) -> u64 {
        self.levels.iter().map(|l| l.samples).sum()
    }

    pub fn ops(&self) -> OpCount {
        self.levels.iter().map(|l| l.ops).sum()
    }

    /// `sum_l Var[w_l] / N_l`.
    pub fn estimator_variance(&self) -> f64 {
        self.levels.iter().map(|l| l.variance / l.samples as f64).sum()
    }

    pub fn finest_level(&self) -> usize {
        self.mean.level
    }
}

struct Accumulator {
    n: u64,
    mean: Vec<f64>,
    m2: f64,
    ops: OpCount,
    rejected: u64,
    keys: Vec<RngKey>,
}

/// Draws `n` samples of `kind` on `level` and reduces them chunk by chunk in
/// index order.
pub fn level_pass<S: LevelSampler, E: Executor>(
    sampler: &S,
    exec: &E,
    seed: u64,
    level: usize,
    n: u64,
    kind: DrawKind,
) -> Result<LevelStats> {
    if n == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if level >= sampler.levels() {
        return Err(Error::LevelMismatch { expected: sampler.levels() - 1, found: level });
    }
    if kind != DrawKind::Plain && level == 0 {
        return Err(Error::invalid("level", "corrections need a coarser level"));
    }
    let dofs = sampler.dofs(level);
    let mut acc = Accumulator {
        n: 0,
        mean: vec![0.0; dofs],
        m2: 0.0,
        ops: OpCount::default(),
        rejected: 0,
        keys: Vec::with_capacity(n as usize),
    };
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let draws = exec.map(start..end, |i| sampler.draw(level, RngKey::field(seed, level, i), kind));
        let draws = draws.into_iter().collect::<Result<Vec<_>>>()?;
        let cn = draws.len() as f64;
        let mut cmean = vec![0.0; dofs];
        for d in &draws {
            for (m, v) in cmean.iter_mut().zip(&d.values) {
                *m += v;
            }
        }
        cmean.iter_mut().for_each(|m| *m /= cn);
        let mut cm2 = 0.0;
        let mut dev = vec![0.0; dofs];
        for d in &draws {
            for ((x, v), m) in dev.iter_mut().zip(&d.values).zip(&cmean) {
                *x = v - m;
            }
            cm2 += sampler.inner(level, &dev, &dev);
            acc.ops += d.ops;
            acc.rejected += d.rejected as u64;
            acc.keys.push(d.key);
        }
        // Chan et al. pairwise merge of (n, mean, m2).
        let na = acc.n as f64;
        let total = na + cn;
        for ((x, a), b) in dev.iter_mut().zip(&acc.mean).zip(&cmean) {
            *x = b - a;
        }
        let delta2 = sampler.inner(level, &dev, &dev);
        for (a, x) in acc.mean.iter_mut().zip(&dev) {
            *a += x * cn / total;
        }
        acc.m2 += cm2 + delta2 * na * cn / total;
        acc.n += draws.len() as u64;
        start = end;
    }
    let variance = if acc.n > 1 { (acc.m2 / (acc.n - 1) as f64).max(0.0) } else { 0.0 };
    Ok(LevelStats {
        level,
        kind,
        samples: acc.n,
        mean: acc.mean,
        variance,
        ops: acc.ops,
        rejected: acc.rejected,
        keys: acc.keys,
    })
}

fn assemble_result<S: LevelSampler>(
    sampler: &S,
    method: Method,
    seed: u64,
    transfer: Option<TransferMode>,
    levels: Vec<LevelStats>,
) -> EstimatorResult {
    let top = levels.last().map_or(0, |l| l.level);
    let mut mean: Vec<f64> = Vec::new();
    for (i, stats) in levels.iter().enumerate() {
        if i == 0 {
            mean = stats.mean.clone();
        } else {
            mean = sampler.prolong(stats.level - 1, &mean);
            for (m, v) in mean.iter_mut().zip(&stats.mean) {
                *m += v;
            }
        }
    }
    EstimatorResult { method, seed, transfer, mean: FemSolution::new(top, mean), levels }
}

/// Plain Monte Carlo with `n` samples on `level`. `method` must be
/// [`Method::Mc`] or [`Method::Slmc`]; the two only differ in their tag.
pub fn mc_estimate<S: LevelSampler, E: Executor>(
    sampler: &S,
    exec: &E,
    method: Method,
    seed: u64,
    level: usize,
    n: u64,
) -> Result<EstimatorResult> {
    if method.is_multilevel() {
        return Err(Error::invalid("method", "mc_estimate takes mc or slmc"));
    }
    let stats = level_pass(sampler, exec, seed, level, n, DrawKind::Plain)?;
    Ok(assemble_result(sampler, method, seed, None, vec![stats]))
}

fn multilevel<S: LevelSampler, E: Executor>(
    sampler: &S,
    exec: &E,
    method: Method,
    seed: u64,
    counts: &[u64],
    kind: DrawKind,
    transfer: Option<TransferMode>,
) -> Result<EstimatorResult> {
    if counts.is_empty() {
        return Err(Error::invalid("samples", "need at least one level"));
    }
    if counts.len() > sampler.levels() {
        return Err(Error::LevelMismatch { expected: sampler.levels(), found: counts.len() });
    }
    if let Some(l) = counts.iter().position(|&n| n == 0) {
        return Err(Error::invalid("samples", alloc::format!("level {l} has no samples")));
    }
    let levels = counts
        .iter()
        .enumerate()
        .map(|(l, &n)| level_pass(sampler, exec, seed, l, n, if l == 0 { DrawKind::Plain } else { kind }))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_result(sampler, method, seed, transfer, levels))
}

/// `sum_l E_{N_l}[u_l - u_{l-1}]` over levels `0..counts.len()`.
pub fn mlmc_estimate<S: LevelSampler, E: Executor>(
    sampler: &S,
    exec: &E,
    seed: u64,
    counts: &[u64],
) -> Result<EstimatorResult> {
    multilevel(sampler, exec, Method::Mlmc, seed, counts, DrawKind::Difference, None)
}

/// `sum_l E_{N_l}[(I - P_l) u_l]` over levels `0..counts.len()`. `mode` is
/// recorded in the result; the sampler decides which transfer it applies.
pub fn pmlmc_estimate<S: LevelSampler, E: Executor>(
    sampler: &S,
    exec: &E,
    seed: u64,
    counts: &[u64],
    mode: TransferMode,
) -> Result<EstimatorResult> {
    multilevel(sampler, exec, Method::Pmlmc, seed, counts, DrawKind::Detail, Some(mode))
}

/// H1 norm of the estimator mean minus a reference on an equal or finer level.
pub fn error_vs_reference(fem: &FemHierarchy, result: &EstimatorResult, reference: &FemSolution) -> Result<f64> {
    if reference.level < result.mean.level {
        return Err(Error::LevelMismatch { expected: result.mean.level, found: reference.level });
    }
    fem.h1_error(&result.mean, reference)
}

/// Standardized deviation of `repetitions` independent estimates of a
/// scalar functional from its known value. Repetition `r` uses seed
/// `base_seed + r`.
pub fn unbiasedness_check(
    repetitions: u64,
    base_seed: u64,
    truth: f64,
    mut estimate: impl FnMut(u64) -> Result<f64>,
) -> Result<f64> {
    if repetitions < 30 {
        return Err(Error::InsufficientSamples { needed: 30, got: repetitions as usize });
    }
    let values = (0..repetitions).map(|r| estimate(base_seed.wrapping_add(r))).collect::<Result<Vec<_>>>()?;
    crate::stats::z_statistic(&values, truth)
}

/// Scalar toy model on a 1D hierarchy: `u_l` is the nodal interpolant of
/// `exp(xi x)` with `xi ~ N(0, 1)`. Interpolation maps `u_l` to `u_{l-1}`
/// exactly, so every estimator targets the interpolant of `exp(x^2 / 2)`.
#[derive(Debug, Clone)]
pub struct ToySampler {
    pub fem: FemHierarchy,
    pub transfers: TransferSet,
}

impl ToySampler {
    pub fn new(fem: FemHierarchy, mode: TransferMode) -> Result<Self> {
        let transfers = TransferSet::new(&fem, mode)?;
        Ok(ToySampler { fem, transfers })
    }

    fn interpolant(&self, level: usize, xi: f64) -> Vec<f64> {
        self.fem.space(level).mesh.vertices.iter().map(|p| libm::exp(xi * p[0])).collect()
    }

    /// Nodal values of `E u_l`.
    pub fn exact_mean(&self, level: usize) -> Vec<f64> {
        self.fem.space(level).mesh.vertices.iter().map(|p| libm::exp(0.5 * p[0] * p[0])).collect()
    }
}

impl LevelSampler for ToySampler {
    fn levels(&self) -> usize {
        self.fem.len()
    }

    fn dofs(&self, level: usize) -> usize {
        self.fem.space(level).dofs()
    }

    fn draw(&self, level: usize, key: RngKey, kind: DrawKind) -> Result<Draw> {
        let xi = draw_xi(key, 1)[0];
        let u = self.interpolant(level, xi);
        let n = u.len() as u64;
        let mut ops = OpCount { field: 3 * n, solves: 1, ..OpCount::default() };
        let values = match kind {
            DrawKind::Plain => u,
            DrawKind::Difference => {
                let c = self.fem.prolong_once(level, &self.interpolant(level - 1, xi))?;
                ops.field += 3 * c.len() as u64 / 2;
                ops.solves += 1;
                ops.transfer += 2 * n;
                u.iter().zip(&c).map(|(a, b)| a - b).collect()
            }
            DrawKind::Detail => {
                let t = self.transfers.get(level)?;
                ops.transfer += t.detail_flops();
                t.detail(&FemSolution::new(level, u))?.values
            }
        };
        Ok(Draw { values, ops, key, rejected: 0 })
    }

    fn inner(&self, level: usize, a: &[f64], b: &[f64]) -> f64 {
        self.fem.space(level).gram.bilinear(a, b)
    }

    fn prolong(&self, level: usize, values: &[f64]) -> Vec<f64> {
        self.fem.prolong_once(level + 1, values).expect("prolongation between levels of one hierarchy")
    }
}
