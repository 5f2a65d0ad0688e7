//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::process::ExitCode;
use std::time::Instant;

use pmlmc_core::allocation::{pmlmc_allocation, ErrorModel};
use pmlmc_core::estimators::{
    error_vs_reference, level_pass, mc_estimate, mlmc_estimate, pmlmc_estimate, unbiasedness_check, DrawKind,
    LevelSampler, Method, Sequential, ToySampler,
};
use pmlmc_core::fem::{FemHierarchy, FemSolution};
use pmlmc_core::mesh::{barycentric, uniform_mesh_1d, HierMesh, TriangleGeometry};
use pmlmc_core::random_field::{draw_amplitudes, Dimension, KlBasis, KlBasis1d, RandomFieldSpec};
use pmlmc_core::stats::{loglog_slope, median};
use pmlmc_core::transfer::{
    lemma_constant, midpoint_variance_bound, subtriangle_gradient_integral, subtriangle_square_integral,
    SubTriangleWeights, Transfer, TransferMode,
};
use pmlmc_core::{RngKey, Role};
use pmlmc_harness::exec::Rayon;
use pmlmc_harness::experiment::{self, strip_wall_column, Problem};
use pmlmc_harness::{ExperimentConfig, PartialConfig};
use rand::Rng;

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

/// N, MLMC error, PMLMC error, MLMC and PMLMC correction cost, coarse solve cost.
type SweepRow = (u64, f64, f64, f64, f64, f64);
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn desk_1d() -> ExperimentConfig {
    ExperimentConfig::resolve(PartialConfig {
        dimension: Some(1),
        modes: Some(200),
        kl_intervals: Some(2048),
        base_intervals: Some(256),
        levels: Some(2),
        reference_samples: Some(20000),
        ..Default::default()
    })
    .unwrap()
}

fn desk_2d() -> ExperimentConfig {
    ExperimentConfig::resolve(PartialConfig {
        dimension: Some(2),
        modes: Some(1000),
        kl_intervals: Some(128),
        base_intervals: Some(16),
        levels: Some(2),
        ..Default::default()
    })
    .unwrap()
}

struct Desk1d {
    problem: Problem,
    reference: FemSolution,
}

fn mc_order(d: &Desk1d, exec: &Rayon) -> Outcome {
    let ns = [100u64, 400, 1600, 6400];
    let mut slopes = Vec::new();
    for seed in 1..=5 {
        let errs = ns
            .iter()
            .map(|&n| {
                let r = mc_estimate(&d.problem.sampler, exec, Method::Mc, seed, 1, n)?;
                error_vs_reference(&d.problem.sampler.fem, &r, &d.reference)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        slopes.push(loglog_slope(&x, &errs)?);
    }
    let m = median(&slopes);
    Ok(((m + 0.5).abs() <= 0.15, format!("median slope {m:.4} (seeds {slopes:.3?})")))
}

fn sweep(d: &Desk1d, exec: &Rayon) -> Result<Vec<SweepRow>, Box<dyn std::error::Error>> {
    let s = &d.problem.sampler;
    let mut rows = Vec::new();
    for n in [100u64, 250, 850, 3250] {
        let counts = [n - 50, 50];
        let a = mlmc_estimate(s, exec, 1, &counts)?;
        let b = pmlmc_estimate(s, exec, 1, &counts, TransferMode::Interpolation)?;
        let ea = error_vs_reference(&s.fem, &a, &d.reference)?;
        let eb = error_vs_reference(&s.fem, &b, &d.reference)?;
        let coarse = a.levels[0].ops;
        let coarse_solve = (coarse.assembly + coarse.factorization + coarse.solve) as f64 / a.levels[0].samples as f64;
        rows.push((n, ea, eb, a.levels[1].cost_per_sample(), b.levels[1].cost_per_sample(), coarse_solve));
    }
    Ok(rows)
}

fn agreement(rows: &[SweepRow]) -> Outcome {
    let rel: Vec<f64> = rows.iter().map(|r| (r.2 - r.1).abs() / r.1).collect();
    let worst = rel.iter().cloned().fold(0.0, f64::max);
    let detail: Vec<String> =
        rows.iter().zip(&rel).map(|(r, q)| format!("N={} {:.4e}/{:.4e} rel {q:.2e}", r.0, r.1, r.2)).collect();
    Ok((worst <= 2e-2, format!("max rel diff {worst:.3e}; {}", detail.join(", "))))
}

fn cost_saving(rows: &[SweepRow], exec: &Rayon) -> Outcome {
    let (_, _, _, ml, pml, coarse_solve) = rows[0];
    let r1 = pml / ml;
    let below = pml <= ml - coarse_solve;
    let p2 = Problem::build(&desk_2d())?;
    let s = &p2.sampler;
    let ml2 = level_pass(s, exec, 3, 1, 20, DrawKind::Difference)?;
    let pml2 = level_pass(s, exec, 3, 1, 20, DrawKind::Detail)?;
    let c0 = level_pass(s, exec, 3, 0, 20, DrawKind::Plain)?.ops;
    let coarse2 = (c0.assembly + c0.factorization + c0.solve) as f64 / 20.0;
    let (m2, q2) = (ml2.cost_per_sample(), pml2.cost_per_sample());
    let r2 = q2 / m2;
    let ok = r1 < 0.95 && r2 < 0.9 && below && q2 <= m2 - coarse2;
    Ok((
        ok,
        format!(
            "1D ratio {r1:.4} (h=1/512), 2D ratio {r2:.4} (16->32, M=1000); saving covers coarse solve: {}",
            below && q2 <= m2 - coarse2
        ),
    ))
}

fn transfer_identities() -> Outcome {
    let mut worst = [0.0f64; 3];
    for config in [desk_1d(), desk_2d()] {
        let p = Problem::build(&config)?;
        let s = &p.sampler;
        let fem = &s.fem;
        let (fs, cs) = (fem.space(1), fem.space(0));
        let interp = Transfer::new(fem, 1, TransferMode::Interpolation)?;
        let h1 = Transfer::new(fem, 1, TransferMode::H1)?;
        for i in 0..100 {
            let xi = draw_amplitudes(&s.basis, RngKey::new(11, 1, i, Role::Auxiliary));
            let (u, _) = s.solve_xi(1, &xi, i)?;
            let (c, _) = s.solve_xi(0, &xi, i)?;
            for t in [&interp, &h1] {
                let back = t.apply(&t.prolong(&c)?)?;
                let e = back.values.iter().zip(&c.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                worst[0] = worst[0].max(e);
            }
            let pu = h1.apply(&u)?;
            let d = h1.detail(&u)?;
            let nu = fs.h1_inner(&u, &u)?;
            let pyth = (nu - cs.h1_inner(&pu, &pu)? - fs.h1_inner(&d, &d)?).abs() / nu;
            worst[1] = worst[1].max(pyth);
            let r = h1.restrict(&fs.gram.mul_vec(&d.values));
            for (j, rj) in r.iter().enumerate() {
                worst[2] = worst[2].max(rj.abs() / (nu.sqrt() * cs.gram.get(j, j).sqrt()));
            }
        }
    }
    let ok = worst[0] < 1e-12 && worst[1] < 1e-10 && worst[2] < 1e-10;
    Ok((
        ok,
        format!(
            "P u = u {:.1e}, Pythagoras {:.1e}, orthogonality {:.1e} (1D and 2D, 100 each)",
            worst[0], worst[1], worst[2]
        ),
    ))
}

fn gauss7() -> [([f64; 3], f64); 7] {
    let r = 15f64.sqrt();
    let (a1, a2) = ((6.0 - r) / 21.0, (6.0 + r) / 21.0);
    let (w1, w2) = ((155.0 - r) / 1200.0, (155.0 + r) / 1200.0);
    let (b1, b2) = (1.0 - 2.0 * a1, 1.0 - 2.0 * a2);
    [
        ([1.0 / 3.0; 3], 0.225),
        ([a1, a1, b1], w1),
        ([a1, b1, a1], w1),
        ([b1, a1, a1], w1),
        ([a2, a2, b2], w2),
        ([a2, b2, a2], w2),
        ([b2, a2, a2], w2),
    ]
}

fn point(t: &TriangleGeometry, w: [f64; 3]) -> [f64; 2] {
    let v = t.vertices;
    [0, 1].map(|c| w[0] * v[0][c] + w[1] * v[1][c] + w[2] * v[2][c])
}

fn closed_forms() -> Outcome {
    let mut rng = RngKey::new(5, 0, 0, Role::Auxiliary).rng();
    let (mut sq, mut gr, mut violations) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..10_000 {
        let k = loop {
            let mut p = || [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let t = TriangleGeometry::new(p(), p(), p());
            if t.area > 1e-3 {
                break t;
            }
        };
        let y: [f64; 3] = [0; 3].map(|_| rng.random_range(-1.0..1.0));
        let sy: f64 = y.iter().map(|v| v * v).sum();
        let (parts, total) = subtriangle_square_integral(y, &k)?;
        let subs = k.subtriangles();
        let mut quad = [0.0; 4];
        let mut grad = 0.0;
        for (s, sub) in subs.iter().enumerate() {
            for (w, wt) in gauss7() {
                let v = SubTriangleWeights::midpoint_function(barycentric(&k, point(sub, w))?, y);
                quad[s] += sub.area * wt * v * v;
            }
            let mut vals = [0.0; 3];
            for (v, x) in vals.iter_mut().zip(sub.vertices) {
                *v = SubTriangleWeights::midpoint_function(barycentric(&k, x)?, y);
            }
            let g = sub.barycentric_gradients();
            let gx: f64 = (0..3).map(|i| vals[i] * g[i][0]).sum();
            let gy: f64 = (0..3).map(|i| vals[i] * g[i][1]).sum();
            grad += sub.area * (gx * gx + gy * gy);
        }
        for (a, b) in parts.iter().zip(&quad) {
            sq = sq.max((a - b).abs() / (k.area * sy));
        }
        let g = subtriangle_gradient_integral(y, &k)?;
        gr = gr.max((g - grad).abs() / grad);
        let e2: f64 = k.edges.iter().map(|e| e * e).sum();
        if total > 5.0 / 24.0 * k.area * sy * (1.0 + 1e-12) || g > e2 * sy / k.area * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    let ok = sq <= 1e-12 && gr <= 1e-12 && violations == 0;
    Ok((ok, format!("square {sq:.1e}, gradient {gr:.1e}, bound violations {violations} (10^4 pairs)")))
}

fn lemma(exec: &Rayon) -> Outcome {
    let p = Problem::build(&desk_2d())?;
    let s = &p.sampler;
    let c = lemma_constant(&s.fem.space(0).mesh)?;
    let mut worst = 0.0f64;
    for e in 0..20u64 {
        let details = exec.map_draws(s, 1000 + e, 100)?.into_iter().map(|v| FemSolution::new(1, v)).collect::<Vec<_>>();
        let (lhs, rhs) = midpoint_variance_bound(&s.fem, 1, &details, c)?;
        worst = worst.max(lhs / rhs);
    }
    Ok((worst <= 1.0, format!("max lhs/rhs {worst:.3e} over 20 ensembles, C_reg {c:.3}")))
}

trait DrawMany {
    fn map_draws(&self, s: &pmlmc_core::darcy::DarcySampler, seed: u64, n: u64) -> pmlmc_core::Result<Vec<Vec<f64>>>;
}

impl DrawMany for Rayon {
    fn map_draws(&self, s: &pmlmc_core::darcy::DarcySampler, seed: u64, n: u64) -> pmlmc_core::Result<Vec<Vec<f64>>> {
        use pmlmc_core::estimators::Executor;
        self.map(0..n, |i| s.draw(1, RngKey::field(seed, 1, i), DrawKind::Detail).map(|d| d.values))
            .into_iter()
            .collect()
    }
}

/// Pairwise golden-section exchange on the error shares of each level.
fn numeric_minimizer(model: &ErrorModel, budget: f64) -> Vec<f64> {
    let b = model.weights();
    let a: Vec<f64> = b.iter().zip(&model.costs).map(|(b, c)| c * b * b / (budget * budget)).collect();
    let n = a.len();
    let mut t = vec![1.0 / n as f64; n];
    let f = |i: usize, x: f64| a[i] / (x * x);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        for i in 0..n {
            for j in i + 1..n {
                let s = t[i] + t[j];
                let (mut lo, mut hi) = (s * 1e-9, s * (1.0 - 1e-9));
                for _ in 0..200 {
                    let x1 = hi - g * (hi - lo);
                    let x2 = lo + g * (hi - lo);
                    if f(i, x1) + f(j, s - x1) < f(i, x2) + f(j, s - x2) {
                        hi = x2;
                    } else {
                        lo = x1;
                    }
                }
                t[i] = 0.5 * (lo + hi);
                t[j] = s - t[i];
            }
        }
    }
    t.iter().zip(&b).map(|(t, b)| (b / (t * budget)).powi(2)).collect()
}

fn allocation() -> Outcome {
    let mut rng = RngKey::new(7, 0, 0, Role::Auxiliary).rng();
    let (mut dev, mut tight, mut cost) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let levels = rng.random_range(1..=5);
        let norm_u = rng.random_range(0.2..3.0);
        let (mut e, mut c) = (rng.random_range(0.01..0.2), rng.random_range(0.5..5.0));
        let (mut errors, mut costs) = (Vec::new(), Vec::new());
        for _ in 0..levels {
            errors.push(e);
            costs.push(c);
            e *= rng.random_range(0.3..0.7);
            c *= rng.random_range(2.0..16.0);
        }
        let model = ErrorModel::new(norm_u, errors, costs)?;
        let eps = model.floor() * rng.random_range(1.1..4.0) + 1e-3;
        let plan = pmlmc_allocation(eps, &model)?;
        for (a, b) in plan.real_counts.iter().zip(numeric_minimizer(&model, plan.eps_tilde)) {
            dev = dev.max((a - b).abs() / b);
        }
        tight = tight.max((model.bound(&plan.real_counts)? - eps).abs() / eps);
        cost = cost.max((plan.real_cost(&model) - plan.predicted_cost).abs() / plan.predicted_cost);
    }
    let ok = dev <= 1e-2 && tight <= 1e-10 && cost <= 1e-10;
    Ok((ok, format!("max rel dev from minimizer {dev:.1e}, tightness {tight:.1e}, cost identity {cost:.1e}")))
}

/// Roots of `(w^2 - c^2) sin w = 2 c w cos w`, `theta = 2c / (w^2 + c^2)`.
fn analytic_eigenvalues(lambda: f64, count: usize) -> Vec<f64> {
    let c = 1.0 / lambda;
    let f = |w: f64| (w * w - c * c) * w.sin() - 2.0 * c * w * w.cos();
    (0..count)
        .map(|n| {
            let (mut lo, mut hi) =
                (n as f64 * std::f64::consts::PI + 1e-12, (n + 1) as f64 * std::f64::consts::PI - 1e-12);
            let flo = f(lo);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) * flo > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let w = 0.5 * (lo + hi);
            2.0 * c / (w * w + c * c)
        })
        .collect()
}

fn kl() -> Outcome {
    let b = KlBasis1d::build(0.1, 2048, 10)?;
    let exact = analytic_eigenvalues(0.1, 10);
    let rel = b.eigenvalues.iter().zip(&exact).map(|(a, e)| (a - e).abs() / e).fold(0.0, f64::max);
    let one = KlBasis1d::build(0.1, 256, 50)?;
    let mut products: Vec<f64> =
        one.eigenvalues.iter().flat_map(|a| one.eigenvalues.iter().map(move |b| a * b)).collect();
    products.sort_by(|a, b| b.total_cmp(a));
    let mut exact2d = true;
    for m in [1usize, 10, 25, 50] {
        let two = KlBasis::build(&RandomFieldSpec::new(1.0, 0.1, m, Dimension::Two), 256)?;
        exact2d &= two.eigenvalues[..] == products[..m];
    }
    Ok((
        rel <= 1e-3 && exact2d,
        format!("1D max rel err {rel:.2e} (10 modes, dx=1/2048); 2D products exact: {exact2d}"),
    ))
}

fn unbiasedness() -> Outcome {
    let mesh = HierMesh::new(uniform_mesh_1d(0.25)?, 3)?;
    let s = ToySampler::new(FemHierarchy::new(&mesh)?, TransferMode::Interpolation)?;
    let probe = s.fem.space(2).mesh.vertices.iter().position(|p| p[0] == 0.75).unwrap();
    let truth = s.exact_mean(2)[probe];
    let counts = [40, 10, 5];
    let z = [
        unbiasedness_check(200, 1000, truth, |seed| {
            Ok(mc_estimate(&s, &Sequential, Method::Mc, seed, 2, 40)?.mean.values[probe])
        })?,
        unbiasedness_check(200, 2000, truth, |seed| {
            Ok(mlmc_estimate(&s, &Sequential, seed, &counts)?.mean.values[probe])
        })?,
        unbiasedness_check(200, 3000, truth, |seed| {
            Ok(pmlmc_estimate(&s, &Sequential, seed, &counts, TransferMode::Interpolation)?.mean.values[probe])
        })?,
    ];
    Ok((
        z.iter().all(|z| z.abs() < 4.0),
        format!("z mc {:.3}, mlmc {:.3}, pmlmc {:.3} (200 repetitions)", z[0], z[1], z[2]),
    ))
}

fn determinism() -> Outcome {
    let dirs = [tempfile::tempdir()?, tempfile::tempdir()?];
    let mut outputs = Vec::new();
    for (dir, threads) in dirs.iter().zip([4, 1]) {
        let mut files = Vec::new();
        for method in ["mlmc", "pmlmc"] {
            let config = ExperimentConfig::resolve(PartialConfig {
                modes: Some(50),
                kl_intervals: Some(512),
                base_intervals: Some(64),
                reference_levels: Some(3),
                reference_samples: Some(1000),
                method: Some(method.into()),
                samples: Some(vec![100, 50]),
                sweep: Some(vec![150, 400]),
                out: Some(dir.path().to_path_buf()),
                threads: Some(threads),
                ..Default::default()
            })?;
            let exec = Rayon::new(threads)?;
            let p = Problem::build(&config)?;
            let r = experiment::build_reference(&p, &exec)?;
            experiment::write_reference(&p, &r)?;
            experiment::run_experiment(&p, &exec)?;
            for name in
                ["results.csv", "costs.csv", "table.csv", "reference.csv", "mean_pmlmc_N400.csv", "mean_mlmc_N400.csv"]
            {
                if let Ok(text) = std::fs::read_to_string(dir.path().join(name)) {
                    let text =
                        if matches!(name, "results.csv" | "table.csv") { strip_wall_column(&text) } else { text };
                    files.push((format!("{method}/{name}"), text));
                }
            }
        }
        outputs.push(files);
    }
    let same = outputs[0] == outputs[1];
    Ok((
        same && outputs[0].len() >= 10,
        format!("{} CSV files identical across two runs (4 vs 1 threads): {same}", outputs[0].len()),
    ))
}

fn main() -> ExitCode {
    let exec = Rayon::new(0).expect("thread pool");
    let start = Instant::now();
    let desk = Problem::build(&desk_1d()).and_then(|problem| {
        let r = experiment::build_reference(&problem, &exec)?;
        Ok(Desk1d { problem, reference: r.mean })
    });
    let desk = match desk {
        Ok(d) => d,
        Err(e) => {
            println!("acceptance setup failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    let rows = sweep(&desk, &exec);
    let rows_ref = rows.as_ref().map_err(|e| e.to_string());
    let criteria: Vec<(&str, Check)> = vec![
        ("MC order 1/2", Box::new(|| mc_order(&desk, &exec))),
        ("MLMC/PMLMC error agreement", Box::new(|| agreement(rows_ref.clone()?))),
        ("cost saving", Box::new(|| cost_saving(rows_ref.clone()?, &exec))),
        ("transfer identities", Box::new(transfer_identities)),
        ("closed forms", Box::new(closed_forms)),
        ("midpoint variance lemma", Box::new(|| lemma(&exec))),
        ("allocation optimality", Box::new(allocation)),
        ("KL eigenvalues", Box::new(kl)),
        ("unbiasedness", Box::new(unbiasedness)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (ok, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        failed += usize::from(!ok);
        println!(
            "criterion {:>2} {:<28} {}  {detail} [{:.1}s]",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
