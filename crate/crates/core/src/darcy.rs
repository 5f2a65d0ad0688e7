//! The Darcy problem as a [`LevelSampler`]: KL amplitudes from the key,
//! `k = exp(log k)` at element centroids, one P1 solve per grid.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::cost::OpCount;
use crate::error::{Error, Result};
use crate::estimators::{Draw, DrawKind, LevelSampler, MAX_ATTEMPTS};
use crate::fem::{FemHierarchy, FemSolution};
use crate::mesh::{barycentric, HierMesh};
use crate::random_field::{draw_amplitudes, FieldEvaluator, KlBasis};
use crate::rng::RngKey;
use crate::transfer::{TransferMode, TransferSet};

#[derive(Debug, Clone)]
pub struct DarcySampler {
    pub basis: Arc<KlBasis>,
    pub fem: FemHierarchy,
    pub transfers: TransferSet,
    evaluators: Vec<FieldEvaluator>,
}

impl DarcySampler {
    pub fn new(basis: Arc<KlBasis>, mesh: &HierMesh, mode: TransferMode) -> Result<Self> {
        let dim = basis.spec.dimension;
        if let Some(l) = mesh.levels.iter().position(|m| m.dimension != dim) {
            return Err(Error::invalid("mesh", alloc::format!("level {l} does not match the field dimension")));
        }
        let fem = FemHierarchy::new(mesh)?;
        let transfers = TransferSet::new(&fem, mode)?;
        let evaluators = mesh.levels.iter().map(|m| basis.evaluator(&m.centroids())).collect();
        Ok(DarcySampler { basis, fem, transfers, evaluators })
    }

    pub fn mode(&self) -> TransferMode {
        self.transfers.mode
    }

    /// Solves the realization with amplitudes `xi` on `level`.
    pub fn solve_xi(&self, level: usize, xi: &[f64], sample: u64) -> Result<(FemSolution, OpCount)> {
        let ev = &self.evaluators[level];
        let k: Vec<f64> = ev.log_k(xi)?.into_iter().map(libm::exp).collect();
        let space = self.fem.space(level);
        let system = space.assemble_with_k(&k)?;
        let (u, solve_ops) = space.solve(&system, sample)?;
        let ops = OpCount { field: ev.flops(), ..system.ops } + solve_ops;
        Ok((u, ops))
    }

    fn attempt(&self, level: usize, key: RngKey, kind: DrawKind) -> Result<(Vec<f64>, OpCount)> {
        let xi = draw_amplitudes(&self.basis, key);
        let (u, mut ops) = self.solve_xi(level, &xi, key.index)?;
        let values = match kind {
            DrawKind::Plain => u.values,
            DrawKind::Difference => {
                let (c, cops) = self.solve_xi(level - 1, &xi, key.index)?;
                ops += cops;
                let p = self.fem.prolong_once(level, &c.values)?;
                let midpoints = p.len() - c.values.len();
                ops.transfer += 2 * midpoints as u64 + p.len() as u64;
                u.values.iter().zip(&p).map(|(a, b)| a - b).collect()
            }
            DrawKind::Detail => {
                let t = self.transfers.get(level)?;
                ops.transfer += t.detail_flops();
                t.detail(&u)?.values
            }
        };
        Ok((values, ops))
    }
}

impl LevelSampler for DarcySampler {
    fn levels(&self) -> usize {
        self.fem.len()
    }

    fn dofs(&self, level: usize) -> usize {
        self.fem.space(level).dofs()
    }

    /// Rejected realizations (non-positive coefficient or failed solve) are
    /// redrawn with the next attempt of the key; their work is still counted.
    fn draw(&self, level: usize, key: RngKey, kind: DrawKind) -> Result<Draw> {
        let mut key = key;
        let mut wasted = OpCount::default();
        let mut rejected = 0;
        loop {
            match self.attempt(level, key, kind) {
                Ok((values, ops)) => {
                    return Ok(Draw { values, ops: ops + wasted, key, rejected });
                }
                Err(e @ (Error::NonPositiveCoefficient { .. } | Error::SolverFailure { .. })) => {
                    if key.attempt + 1 >= MAX_ATTEMPTS {
                        return Err(e);
                    }
                    wasted.field += self.evaluators[level].flops();
                    rejected += 1;
                    key = key.next_attempt();
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn inner(&self, level: usize, a: &[f64], b: &[f64]) -> f64 {
        self.fem.space(level).gram.bilinear(a, b)
    }

    fn prolong(&self, level: usize, values: &[f64]) -> Vec<f64> {
        self.fem.prolong_once(level + 1, values).expect("prolongation between levels of one hierarchy")
    }
}

/// Value of a P1 function at `x`.
pub fn probe_value(fem: &FemHierarchy, u: &FemSolution, x: [f64; 2]) -> Result<f64> {
    let mesh = &fem.space(u.level).mesh;
    for e in 0..mesh.num_elements() {
        let c = mesh.element(e);
        let w: Vec<f64> = match mesh.dimension {
            crate::random_field::Dimension::One => {
                let (a, b) = (mesh.vertices[c[0]][0], mesh.vertices[c[1]][0]);
                let t = (x[0] - a) / (b - a);
                if !(-1e-12..=1.0 + 1e-12).contains(&t) {
                    continue;
                }
                alloc::vec![1.0 - t, t]
            }
            crate::random_field::Dimension::Two => match barycentric(&mesh.triangle(e), x) {
                Ok(w) => w.to_vec(),
                Err(_) => continue,
            },
        };
        return Ok(c.iter().zip(&w).map(|(&i, wi)| wi * u.values[i]).sum());
    }
    Err(Error::invalid("probe", alloc::format!("point {x:?} is outside the domain")))
}

/// `int_D u dx`.
pub fn mean_value(fem: &FemHierarchy, u: &FemSolution) -> f64 {
    fem.space(u.level).integral(&u.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{mc_estimate, mlmc_estimate, pmlmc_estimate, Method, Sequential};
    use crate::mesh::{structured_mesh_2d, uniform_mesh_1d};
    use crate::random_field::{Dimension, RandomFieldSpec};

    fn sampler_1d(modes: usize, mode: TransferMode) -> DarcySampler {
        let spec = RandomFieldSpec::new(1.0, 0.1, modes, Dimension::One);
        let basis = Arc::new(KlBasis::build(&spec, 256).unwrap());
        let mesh = HierMesh::new(uniform_mesh_1d(1.0 / 16.0).unwrap(), 3).unwrap();
        DarcySampler::new(basis, &mesh, mode).unwrap()
    }

    #[test]
    fn deterministic_field_gives_linear_solution() {
        let s = sampler_1d(0, TransferMode::Interpolation);
        let r = mlmc_estimate(&s, &Sequential, 1, &[3, 2, 2]).unwrap();
        for (v, p) in r.mean.values.iter().zip(&s.fem.space(2).mesh.vertices) {
            assert!((v - (1.0 - p[0])).abs() < 1e-13);
        }
        assert!(r.levels.iter().all(|l| l.variance < 1e-26));
        let p = pmlmc_estimate(&s, &Sequential, 1, &[3, 2, 2], TransferMode::Interpolation).unwrap();
        assert!(p.levels[1..].iter().all(|l| l.mean.iter().all(|v| v.abs() < 1e-13)));
    }

    #[test]
    fn mlmc_correction_solves_one_realization_twice() {
        let s = sampler_1d(20, TransferMode::Interpolation);
        let key = RngKey::field(9, 2, 5);
        let d = s.draw(2, key, DrawKind::Difference).unwrap();
        let xi = draw_amplitudes(&s.basis, key);
        let (f, _) = s.solve_xi(2, &xi, 5).unwrap();
        let (c, _) = s.solve_xi(1, &xi, 5).unwrap();
        let p = s.fem.prolong_once(2, &c.values).unwrap();
        for i in 0..f.values.len() {
            assert_eq!(d.values[i], f.values[i] - p[i]);
        }
        assert_eq!(d.ops.solves, 2);
        let q = s.draw(2, key, DrawKind::Detail).unwrap();
        assert_eq!(q.ops.solves, 1);
        assert!(q.ops.flops() < d.ops.flops());
    }

    #[test]
    fn fine_keys_match_between_multilevel_methods() {
        let s = sampler_1d(10, TransferMode::H1);
        let a = mlmc_estimate(&s, &Sequential, 4, &[20, 7, 3]).unwrap();
        let b = pmlmc_estimate(&s, &Sequential, 4, &[20, 7, 3], TransferMode::H1).unwrap();
        for (x, y) in a.levels.iter().zip(&b.levels) {
            assert_eq!(x.keys, y.keys);
        }
        assert_eq!(a.levels[0].mean, b.levels[0].mean);
        let single = mc_estimate(&s, &Sequential, Method::Slmc, 4, 0, 20).unwrap();
        let one = mlmc_estimate(&s, &Sequential, 4, &[20]).unwrap();
        assert_eq!(single.mean, one.mean);
        assert_eq!(single.levels[0].variance, one.levels[0].variance);
    }

    #[test]
    fn correction_variance_decays_1d() {
        let s = sampler_1d(50, TransferMode::Interpolation);
        let plain = crate::estimators::level_pass(&s, &Sequential, 2, 2, 200, DrawKind::Plain).unwrap();
        let diff = crate::estimators::level_pass(&s, &Sequential, 2, 2, 200, DrawKind::Difference).unwrap();
        assert!(diff.variance < plain.variance, "{} {}", diff.variance, plain.variance);
    }

    #[test]
    fn probes_and_means() {
        let s = sampler_1d(0, TransferMode::Interpolation);
        let (u, _) = s.solve_xi(1, &[], 0).unwrap();
        assert!((probe_value(&s.fem, &u, [0.3, 0.0]).unwrap() - 0.7).abs() < 1e-13);
        assert!((mean_value(&s.fem, &u) - 0.5).abs() < 1e-13);
        assert!(probe_value(&s.fem, &u, [1.5, 0.0]).is_err());

        let spec = RandomFieldSpec::new(1.0, 0.3, 0, Dimension::Two);
        let basis = Arc::new(KlBasis::build(&spec, 16).unwrap());
        let mesh = HierMesh::new(structured_mesh_2d(4).unwrap(), 2).unwrap();
        let s2 = DarcySampler::new(basis, &mesh, TransferMode::Interpolation).unwrap();
        let (u, _) = s2.solve_xi(1, &[], 0).unwrap();
        assert!((probe_value(&s2.fem, &u, [0.37, 0.81]).unwrap() - 0.63).abs() < 1e-10);
        assert!((mean_value(&s2.fem, &u) - 0.5).abs() < 1e-10);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let spec = RandomFieldSpec::new(1.0, 0.3, 2, Dimension::Two);
        let basis = Arc::new(KlBasis::build(&spec, 16).unwrap());
        let mesh = HierMesh::new(uniform_mesh_1d(0.25).unwrap(), 2).unwrap();
        assert!(DarcySampler::new(basis, &mesh, TransferMode::Interpolation).is_err());
    }
}
