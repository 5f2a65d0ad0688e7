//! Experiment driver: problem setup, reference generation, estimator runs,
//! allocation plans and report tables.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use pmlmc_core::allocation::{estimate_error_model, mc_sample_count, pmlmc_allocation, AllocationPlan, ErrorModel};
use pmlmc_core::darcy::DarcySampler;
use pmlmc_core::estimators::{
    error_vs_reference, mc_estimate, mlmc_estimate, pmlmc_estimate, EstimatorResult, Executor, Method,
};
use pmlmc_core::mesh::{structured_mesh_2d, uniform_mesh_1d, HierMesh, MeshLevel};
use pmlmc_core::random_field::{Dimension, KlBasis, RandomFieldSpec};
use pmlmc_core::OpCount;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::io;

/// Everything frozen before sampling starts.
#[derive(Debug, Clone)]
pub struct Problem {
    pub config: ExperimentConfig,
    pub spec: RandomFieldSpec,
    pub basis: Arc<KlBasis>,
    pub mesh: HierMesh,
    pub sampler: DarcySampler,
    /// Fingerprint of the field, the KL grid and the reference mesh.
    pub hash: String,
}

pub fn base_mesh(config: &ExperimentConfig) -> Result<MeshLevel> {
    let mesh = match &config.mesh_file {
        Some(path) => io::read_mesh(path)?,
        None => match config.dimension {
            Dimension::One => uniform_mesh_1d(1.0 / config.base_intervals as f64)?,
            Dimension::Two => structured_mesh_2d(config.base_intervals)?,
        },
    };
    if mesh.dimension != config.dimension {
        return Err(HarnessError::config("mesh_file dimension differs from `dimension`"));
    }
    Ok(mesh)
}

/// Builds the KL basis, reading the cache when it exists and writing it
/// when it is configured but absent.
pub fn kl_basis(config: &ExperimentConfig) -> Result<KlBasis> {
    let spec = config.field_spec();
    match &config.kl_cache {
        Some(path) if path.exists() => {
            let b1 = io::read_kl_cache(path, &spec, config.kl_intervals)?;
            Ok(KlBasis::from_cached(spec, b1)?)
        }
        Some(path) => {
            let basis = KlBasis::build(&spec, config.kl_intervals)?;
            io::write_kl_cache(path, &spec, &basis.basis_1d)?;
            Ok(basis)
        }
        None => Ok(KlBasis::build(&spec, config.kl_intervals)?),
    }
}

impl Problem {
    pub fn build(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let spec = config.field_spec();
        let basis = Arc::new(kl_basis(config)?);
        let base = base_mesh(config)?;
        let hash = io::problem_hash(&spec, config.kl_intervals, &base, config.reference_levels - 1);
        let mesh = HierMesh::new(base, config.reference_levels)?;
        let sampler = DarcySampler::new(basis.clone(), &mesh, config.transfer)?;
        Ok(Problem { config: config.clone(), spec, basis, mesh, sampler, hash })
    }

    pub fn reference_level(&self) -> usize {
        self.config.reference_levels - 1
    }

    /// Loads the reference. `Ok(None)` only when it is missing and not required.
    pub fn load_reference(&self) -> Result<Option<io::Reference>> {
        match io::read_reference(&self.config.reference_path(), &self.hash) {
            Ok(r) => Ok(Some(r)),
            Err(HarnessError::MissingReference { .. }) if !self.config.require_reference => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Plain MC mean with `reference_samples` samples on the reference level.
pub fn build_reference<E: Executor>(problem: &Problem, exec: &E) -> Result<io::Reference> {
    let c = &problem.config;
    let r = mc_estimate(
        &problem.sampler,
        exec,
        Method::Mc,
        c.reference_seed,
        problem.reference_level(),
        c.reference_samples,
    )?;
    Ok(io::Reference { hash: problem.hash.clone(), seed: c.reference_seed, samples: c.reference_samples, mean: r.mean })
}

pub fn write_reference(problem: &Problem, r: &io::Reference) -> Result<PathBuf> {
    let path = problem.config.reference_path();
    io::write_reference(&path, problem.mesh.level(r.mean.level), r)?;
    Ok(path)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OpRecord {
    pub field: u64,
    pub assembly: u64,
    pub factorization: u64,
    pub solve: u64,
    pub transfer: u64,
    pub solves: u64,
    pub factorizations: u64,
}

impl From<OpCount> for OpRecord {
    fn from(o: OpCount) -> Self {
        OpRecord {
            field: o.field,
            assembly: o.assembly,
            factorization: o.factorization,
            solve: o.solve,
            transfer: o.transfer,
            solves: o.solves,
            factorizations: o.factorizations,
        }
    }
}

impl OpRecord {
    pub fn flops(&self) -> u64 {
        self.field + self.assembly + self.factorization + self.solve + self.transfer
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    pub samples: u64,
    pub variance: f64,
    pub ops: OpRecord,
    pub rejected: u64,
}

/// Serializable summary of one estimator run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub seed: u64,
    pub transfer: Option<String>,
    pub samples: Vec<u64>,
    pub h1_error: Option<f64>,
    pub estimator_variance: f64,
    pub levels: Vec<LevelRecord>,
    pub wall_s: f64,
}

impl RunRecord {
    pub fn new(r: &EstimatorResult, h1_error: Option<f64>, wall_s: f64) -> Self {
        RunRecord {
            method: r.method.to_string(),
            seed: r.seed,
            transfer: r.transfer.map(|t| t.to_string()),
            samples: r.samples(),
            h1_error,
            estimator_variance: r.estimator_variance(),
            levels: r
                .levels
                .iter()
                .map(|l| LevelRecord {
                    level: l.level,
                    samples: l.samples,
                    variance: l.variance,
                    ops: l.ops.into(),
                    rejected: l.rejected,
                })
                .collect(),
            wall_s,
        }
    }

    pub fn total_samples(&self) -> u64 {
        self.samples.iter().sum()
    }

    /// Second-level count, for multilevel runs with at least two levels.
    pub fn n2(&self) -> Option<u64> {
        (self.samples.len() >= 2).then(|| self.samples[1])
    }

    pub fn op_count(&self) -> u64 {
        self.levels.iter().map(|l| l.ops.flops()).sum()
    }

    pub fn solver_flops(&self) -> u64 {
        self.levels.iter().map(|l| l.ops.factorization + l.ops.solve).sum()
    }

    pub fn solves(&self) -> u64 {
        self.levels.iter().map(|l| l.ops.solves).sum()
    }

    /// Mean operations per sample over the correction levels.
    pub fn correction_cost(&self) -> Option<f64> {
        let corr = self.levels.get(1..).filter(|c| !c.is_empty())?;
        let ops: u64 = corr.iter().map(|l| l.ops.flops()).sum();
        let n: u64 = corr.iter().map(|l| l.samples).sum();
        Some(ops as f64 / n as f64)
    }
}

/// The per-level counts each run of the experiment uses.
pub fn run_counts(config: &ExperimentConfig, plan: Option<&[u64]>) -> Vec<Vec<u64>> {
    if let Some(p) = plan {
        return vec![p.to_vec()];
    }
    if config.sweep.is_empty() {
        return vec![config.samples.clone()];
    }
    config
        .sweep
        .iter()
        .map(|&n| {
            if config.method.is_multilevel() {
                let mut c = config.samples.clone();
                c[0] = n - c[1..].iter().sum::<u64>();
                c
            } else {
                vec![n]
            }
        })
        .collect()
}

pub fn estimate<E: Executor>(problem: &Problem, exec: &E, counts: &[u64]) -> Result<EstimatorResult> {
    let c = &problem.config;
    let s = &problem.sampler;
    Ok(match c.method {
        Method::Mc | Method::Slmc => mc_estimate(s, exec, c.method, c.seed, c.finest_level(), counts[0])?,
        Method::Mlmc => mlmc_estimate(s, exec, c.seed, counts)?,
        Method::Pmlmc => pmlmc_estimate(s, exec, c.seed, counts, c.transfer)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub eps: f64,
    pub eps_tilde: f64,
    pub eta: f64,
    pub real_counts: Vec<f64>,
    pub counts: Vec<u64>,
    pub predicted_cost: f64,
    pub norm_u: f64,
    pub errors: Vec<f64>,
    pub costs: Vec<f64>,
}

impl PlanRecord {
    fn new(plan: &AllocationPlan, model: &ErrorModel) -> Self {
        PlanRecord {
            eps: plan.eps,
            eps_tilde: plan.eps_tilde,
            eta: plan.eta,
            real_counts: plan.real_counts.clone(),
            counts: plan.counts.clone(),
            predicted_cost: plan.predicted_cost,
            norm_u: model.norm_u,
            errors: model.errors.clone(),
            costs: model.costs.clone(),
        }
    }
}

/// Pilot error model on the estimator levels, measured against the
/// reference level.
pub fn error_model<E: Executor>(problem: &Problem, exec: &E) -> Result<ErrorModel> {
    let c = &problem.config;
    if c.reference_levels <= c.levels {
        return Err(HarnessError::config("allocation needs reference_levels > levels"));
    }
    let pilots = vec![c.pilot_samples; c.levels];
    Ok(estimate_error_model(&problem.sampler, exec, c.seed, &pilots, problem.reference_level())?)
}

/// Sample counts for target error `eps`. Multilevel methods use the
/// projected-estimator allocation; single-level ones `ceil(|u|^2 / eps^2)`.
pub fn allocate<E: Executor>(problem: &Problem, exec: &E, eps: f64) -> Result<PlanRecord> {
    let model = error_model(problem, exec)?;
    if problem.config.method.is_multilevel() {
        let plan = pmlmc_allocation(eps, &model)?;
        Ok(PlanRecord::new(&plan, &model))
    } else {
        let n = mc_sample_count(eps, model.norm_u)?;
        let cost = *model.costs.last().expect("validated model");
        Ok(PlanRecord {
            eps,
            eps_tilde: eps,
            eta: 0.0,
            real_counts: vec![n as f64],
            counts: vec![n],
            predicted_cost: n as f64 * cost,
            norm_u: model.norm_u,
            errors: model.errors,
            costs: model.costs,
        })
    }
}

pub fn write_plan(dir: &Path, plan: &PlanRecord) -> Result<PathBuf> {
    let path = dir.join("plan.json");
    let text = serde_json::to_string_pretty(plan).expect("plan serializes");
    io::write_text(&path, &(text + "\n"))?;
    Ok(path)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<RunRecord>,
    pub results: Vec<EstimatorResult>,
    pub plan: Option<PlanRecord>,
}

/// Runs every configured estimator and writes `results.csv`,
/// `results.json`, `costs.csv`, `table.csv`, `config.toml` and one
/// `mean_<method>_N<n>.csv` per run into the output directory.
pub fn run_experiment<E: Executor>(problem: &Problem, exec: &E) -> Result<RunOutput> {
    let c = &problem.config;
    let reference = problem.load_reference()?;
    let plan = c.eps.map(|eps| allocate(problem, exec, eps)).transpose()?;
    let mut records = Vec::new();
    let mut results = Vec::new();
    for counts in run_counts(c, plan.as_ref().map(|p| &p.counts[..])) {
        let start = Instant::now();
        let r = estimate(problem, exec, &counts)?;
        let wall = start.elapsed().as_secs_f64();
        let err = reference.as_ref().map(|re| error_vs_reference(&problem.sampler.fem, &r, &re.mean)).transpose()?;
        let mesh = problem.mesh.level(r.finest_level());
        io::write_text(
            &c.out.join(format!("mean_{}_N{}.csv", r.method, r.total_samples())),
            &io::solution_csv(mesh, &r.mean),
        )?;
        records.push(RunRecord::new(&r, err, wall));
        results.push(r);
    }
    write_run_files(&c.out, c, &records)?;
    if let Some(p) = &plan {
        write_plan(&c.out, p)?;
    }
    Ok(RunOutput { records, results, plan })
}

fn write_run_files(dir: &Path, config: &ExperimentConfig, records: &[RunRecord]) -> Result<()> {
    io::write_text(&dir.join("results.csv"), &results_csv(records))?;
    let json = serde_json::to_string_pretty(records).expect("records serialize");
    io::write_text(&dir.join("results.json"), &(json + "\n"))?;
    io::write_text(&dir.join("costs.csv"), &costs_csv(records))?;
    io::write_text(&dir.join("table.csv"), &report_tables(records))?;
    io::write_text(&dir.join("config.toml"), &config.to_toml())
}

fn csv_string(rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per run; `wall_s` is the last column.
pub fn results_csv(records: &[RunRecord]) -> String {
    let head = [
        "method",
        "N",
        "samples",
        "h1_error",
        "estimator_variance",
        "op_count",
        "solver_flops",
        "solves",
        "rejected",
        "wall_s",
    ];
    let rows = records.iter().map(|r| {
        vec![
            r.method.clone(),
            r.total_samples().to_string(),
            r.samples.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
            opt(r.h1_error),
            r.estimator_variance.to_string(),
            r.op_count().to_string(),
            r.solver_flops().to_string(),
            r.solves().to_string(),
            r.levels.iter().map(|l| l.rejected).sum::<u64>().to_string(),
            r.wall_s.to_string(),
        ]
    });
    csv_string(std::iter::once(head.map(String::from).to_vec()).chain(rows))
}

/// Per-level operation counts of every run.
pub fn costs_csv(records: &[RunRecord]) -> String {
    let head = [
        "method",
        "N",
        "level",
        "samples",
        "variance",
        "ops_per_sample",
        "field",
        "assembly",
        "factorization",
        "solve",
        "transfer",
        "solves",
        "factorizations",
    ];
    let rows = records.iter().flat_map(|r| {
        r.levels.iter().map(move |l| {
            vec![
                r.method.clone(),
                r.total_samples().to_string(),
                l.level.to_string(),
                l.samples.to_string(),
                l.variance.to_string(),
                (l.ops.flops() as f64 / l.samples as f64).to_string(),
                l.ops.field.to_string(),
                l.ops.assembly.to_string(),
                l.ops.factorization.to_string(),
                l.ops.solve.to_string(),
                l.ops.transfer.to_string(),
                l.ops.solves.to_string(),
                l.ops.factorizations.to_string(),
            ]
        })
    });
    csv_string(std::iter::once(head.map(String::from).to_vec()).chain(rows))
}

/// Long-format table sorted by (method, N). `cost_ratio` is the PMLMC/MLMC
/// ratio of correction operations per sample at equal `N2`, filled on PMLMC
/// rows that have an MLMC partner. Without errors for every run the
/// `h1_error` column is dropped and a header comment says so.
pub fn report_tables(records: &[RunRecord]) -> String {
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| (&a.method, a.total_samples()).cmp(&(&b.method, b.total_samples())));
    let with_error = records.iter().all(|r| r.h1_error.is_some());
    let ratio = |r: &RunRecord| -> Option<f64> {
        if r.method != Method::Pmlmc.as_str() {
            return None;
        }
        let partner = records.iter().find(|m| m.method == Method::Mlmc.as_str() && m.n2() == r.n2())?;
        Some(r.correction_cost()? / partner.correction_cost()?)
    };
    let mut head = vec!["method", "N", "N2"];
    if with_error {
        head.push("h1_error");
    }
    head.extend(["op_count", "cost_ratio", "wall_s"]);
    let rows = sorted.iter().map(|r| {
        let mut row =
            vec![r.method.clone(), r.total_samples().to_string(), r.n2().map(|n| n.to_string()).unwrap_or_default()];
        if with_error {
            row.push(opt(r.h1_error));
        }
        row.extend([r.op_count().to_string(), opt(ratio(r)), r.wall_s.to_string()]);
        row
    });
    let body = csv_string(std::iter::once(head.into_iter().map(String::from).collect()).chain(rows));
    if with_error {
        body
    } else {
        format!("# h1_error omitted: no reference for at least one run\n{body}")
    }
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Format { path: path.to_path_buf(), reason: e.to_string() })
}

/// Drops the last column (`wall_s`) of every CSV row.
pub fn strip_wall_column(csv: &str) -> String {
    csv.lines()
        .map(|l| if l.starts_with('#') { l } else { l.rsplit_once(',').map_or(l, |(a, _)| a) })
        .collect::<Vec<_>>()
        .join("\n")
}
