use std::sync::Arc;

use pmlmc_core::darcy::{mean_value, DarcySampler};
use pmlmc_core::estimators::{mc_estimate, mlmc_estimate, pmlmc_estimate, LevelSampler, Method, Sequential};
use pmlmc_core::mesh::{structured_mesh_2d, uniform_mesh_1d, HierMesh};
use pmlmc_core::random_field::{Dimension, KlBasis, RandomFieldSpec};
use pmlmc_core::transfer::TransferMode;
use pmlmc_core::RngKey;

fn sampler(dim: Dimension, mode: TransferMode) -> DarcySampler {
    let spec = RandomFieldSpec::new(1.0, 0.2, 20, dim);
    let basis = Arc::new(KlBasis::build(&spec, 64).unwrap());
    let base = match dim {
        Dimension::One => uniform_mesh_1d(1.0 / 8.0).unwrap(),
        Dimension::Two => structured_mesh_2d(4).unwrap(),
    };
    DarcySampler::new(basis, &HierMesh::new(base, 3).unwrap(), mode).unwrap()
}

#[test]
fn all_estimators_run_in_both_dimensions() {
    for dim in [Dimension::One, Dimension::Two] {
        for mode in [TransferMode::Interpolation, TransferMode::H1] {
            let s = sampler(dim, mode);
            let mc = mc_estimate(&s, &Sequential, Method::Mc, 1, 2, 30).unwrap();
            let ml = mlmc_estimate(&s, &Sequential, 1, &[30, 10, 5]).unwrap();
            let pml = pmlmc_estimate(&s, &Sequential, 1, &[30, 10, 5], mode).unwrap();
            for r in [&mc, &ml, &pml] {
                assert_eq!(r.finest_level(), 2);
                assert_eq!(r.mean.values.len(), s.dofs(2));
                // Boundary data and the symmetry of the law keep the mean flux near 1/2.
                let m = mean_value(&s.fem, &r.mean);
                assert!((m - 0.5).abs() < 0.15, "{dim:?} {mode:?} {m}");
            }
            assert!(pml.ops().flops() < ml.ops().flops());
            assert_eq!(pml.ops().solves, 45);
            assert_eq!(ml.ops().solves, 30 + 2 * 15);
        }
    }
}

#[test]
fn results_do_not_depend_on_previous_calls() {
    let s = sampler(Dimension::One, TransferMode::Interpolation);
    let a = pmlmc_estimate(&s, &Sequential, 7, &[20, 6], TransferMode::Interpolation).unwrap();
    mlmc_estimate(&s, &Sequential, 3, &[11, 4, 2]).unwrap();
    let b = pmlmc_estimate(&s, &Sequential, 7, &[20, 6], TransferMode::Interpolation).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.levels[1].keys[0], RngKey::field(7, 1, 0));
}
