//! Experiment configuration: a flat TOML file of documented keys, overridden
//! by command-line flags, over built-in defaults.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `dimension` | 1 | spatial dimension, 1 or 2 |
//! | `variance` | 1.0 | variance of `log k` |
//! | `correlation_length` | 0.1 | exponential covariance length |
//! | `modes` | 200 | KL truncation |
//! | `kl_intervals` | 2048 | intervals of the KL generation grid (`dx = 1 / kl_intervals`) |
//! | `base_intervals` | 256 | intervals per side of the coarsest mesh |
//! | `mesh_file` | none | coarsest mesh in the text format instead of a generated one |
//! | `levels` | 2 | estimator levels `L` |
//! | `reference_levels` | `levels` | mesh levels built for the reference |
//! | `method` | `pmlmc` | `mc`, `slmc`, `mlmc` or `pmlmc` |
//! | `transfer` | `interp` | `interp` or `h1` |
//! | `samples` | `[100, 50]` | per-level counts, coarsest first |
//! | `sweep` | `[]` | total sample counts to sweep; the coarsest count absorbs the change |
//! | `eps` | none | target error; counts come from an allocation plan |
//! | `pilot_samples` | 20 | pilots per level for the allocation error model |
//! | `seed` | 1 | master seed of estimator runs |
//! | `reference_samples` | 20000 | samples of the reference MC mean |
//! | `reference_seed` | 1000003 | master seed of the reference |
//! | `reference` | `<out>/reference.csv` | reference file |
//! | `require_reference` | true | fail `run` when the reference is missing; otherwise errors are left empty |
//! | `kl_cache` | none | KL basis cache file |
//! | `out` | `out` | output directory |
//! | `threads` | 0 | worker threads (0: all cores) |

use std::path::{Path, PathBuf};

use pmlmc_core::estimators::Method;
use pmlmc_core::random_field::{Dimension, RandomFieldSpec};
use pmlmc_core::transfer::TransferMode;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Every key optional; used for both the file and the flag layer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub dimension: Option<usize>,
    pub variance: Option<f64>,
    pub correlation_length: Option<f64>,
    pub modes: Option<usize>,
    pub kl_intervals: Option<usize>,
    pub base_intervals: Option<usize>,
    pub mesh_file: Option<PathBuf>,
    pub levels: Option<usize>,
    pub reference_levels: Option<usize>,
    pub method: Option<String>,
    pub transfer: Option<String>,
    pub samples: Option<Vec<u64>>,
    pub sweep: Option<Vec<u64>>,
    pub eps: Option<f64>,
    pub pilot_samples: Option<u64>,
    pub seed: Option<u64>,
    pub reference_samples: Option<u64>,
    pub reference_seed: Option<u64>,
    pub reference: Option<PathBuf>,
    pub require_reference: Option<bool>,
    pub kl_cache: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr; $($f:ident),*) => {
        PartialConfig { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl PartialConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
        Self::from_toml(&text).map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))
    }

    /// Keys of `self` win over keys of `lower`.
    pub fn over(self, lower: PartialConfig) -> PartialConfig {
        overlay!(self, lower; dimension, variance, correlation_length, modes, kl_intervals,
            base_intervals, mesh_file, levels, reference_levels, method, transfer, samples, sweep,
            eps, pilot_samples, seed, reference_samples, reference_seed, reference, require_reference, kl_cache, out,
            threads)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dimension: Dimension,
    pub variance: f64,
    pub correlation_length: f64,
    pub modes: usize,
    pub kl_intervals: usize,
    pub base_intervals: usize,
    pub mesh_file: Option<PathBuf>,
    pub levels: usize,
    pub reference_levels: usize,
    pub method: Method,
    pub transfer: TransferMode,
    pub samples: Vec<u64>,
    pub sweep: Vec<u64>,
    pub eps: Option<f64>,
    pub pilot_samples: u64,
    pub seed: u64,
    pub reference_samples: u64,
    pub reference_seed: u64,
    pub reference: Option<PathBuf>,
    pub require_reference: bool,
    pub kl_cache: Option<PathBuf>,
    pub out: PathBuf,
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::resolve(PartialConfig::default()).expect("defaults are valid")
    }
}

impl ExperimentConfig {
    /// Fills unset keys with defaults and validates the result.
    pub fn resolve(p: PartialConfig) -> Result<Self> {
        let levels = p.levels.unwrap_or(2);
        let method: Method = p
            .method
            .as_deref()
            .unwrap_or("pmlmc")
            .parse()
            .map_err(|e: pmlmc_core::Error| HarnessError::config(e.to_string()))?;
        let transfer: TransferMode = p
            .transfer
            .as_deref()
            .unwrap_or("interp")
            .parse()
            .map_err(|e: pmlmc_core::Error| HarnessError::config(e.to_string()))?;
        let dimension = Dimension::from_usize(p.dimension.unwrap_or(1))
            .map_err(|_| HarnessError::config("dimension must be 1 or 2"))?;
        let c = ExperimentConfig {
            dimension,
            variance: p.variance.unwrap_or(1.0),
            correlation_length: p.correlation_length.unwrap_or(0.1),
            modes: p.modes.unwrap_or(200),
            kl_intervals: p.kl_intervals.unwrap_or(2048),
            base_intervals: p.base_intervals.unwrap_or(256),
            mesh_file: p.mesh_file,
            levels,
            reference_levels: p.reference_levels.unwrap_or(levels),
            method,
            transfer,
            samples: p.samples.unwrap_or_else(|| vec![100, 50]),
            sweep: p.sweep.unwrap_or_default(),
            eps: p.eps,
            pilot_samples: p.pilot_samples.unwrap_or(20),
            seed: p.seed.unwrap_or(1),
            reference_samples: p.reference_samples.unwrap_or(20000),
            reference_seed: p.reference_seed.unwrap_or(1_000_003),
            reference: p.reference,
            require_reference: p.require_reference.unwrap_or(true),
            kl_cache: p.kl_cache,
            out: p.out.unwrap_or_else(|| PathBuf::from("out")),
            threads: p.threads.unwrap_or(0),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if let Err(e) = self.field_spec().validate() {
            return bad(e.to_string());
        }
        if self.kl_intervals == 0 || self.base_intervals == 0 {
            return bad("kl_intervals and base_intervals must be positive".into());
        }
        if self.levels == 0 {
            return bad("levels must be at least 1".into());
        }
        if self.reference_levels < self.levels {
            return bad(format!("reference_levels ({}) must be >= levels ({})", self.reference_levels, self.levels));
        }
        if self.eps.is_none() {
            let expect = if self.method.is_multilevel() { self.levels } else { 1 };
            if self.samples.len() != expect {
                return bad(format!(
                    "method {} with {} levels needs {expect} sample count(s), got {}",
                    self.method,
                    self.levels,
                    self.samples.len()
                ));
            }
        }
        if self.samples.contains(&0) {
            return bad("sample counts must be positive".into());
        }
        let tail: u64 = if self.method.is_multilevel() { self.samples.iter().skip(1).sum() } else { 0 };
        if let Some(n) = self.sweep.iter().find(|&&n| n <= tail) {
            return bad(format!("sweep value {n} leaves no samples on the coarsest level"));
        }
        if let Some(e) = self.eps {
            if e.is_nan() || e <= 0.0 {
                return bad("eps must be positive".into());
            }
            if !self.sweep.is_empty() {
                return bad("eps and sweep are mutually exclusive".into());
            }
        }
        if self.pilot_samples < 10 {
            return bad("pilot_samples must be at least 10".into());
        }
        if self.reference_samples == 0 {
            return bad("reference_samples must be positive".into());
        }
        Ok(())
    }

    pub fn field_spec(&self) -> RandomFieldSpec {
        RandomFieldSpec::new(self.variance, self.correlation_length, self.modes, self.dimension)
    }

    pub fn reference_path(&self) -> PathBuf {
        self.reference.clone().unwrap_or_else(|| self.out.join("reference.csv"))
    }

    /// Level of the estimator's finest mesh.
    pub fn finest_level(&self) -> usize {
        self.levels - 1
    }

    pub fn to_partial(&self) -> PartialConfig {
        PartialConfig {
            dimension: Some(self.dimension.as_usize()),
            variance: Some(self.variance),
            correlation_length: Some(self.correlation_length),
            modes: Some(self.modes),
            kl_intervals: Some(self.kl_intervals),
            base_intervals: Some(self.base_intervals),
            mesh_file: self.mesh_file.clone(),
            levels: Some(self.levels),
            reference_levels: Some(self.reference_levels),
            method: Some(self.method.to_string()),
            transfer: Some(self.transfer.to_string()),
            samples: Some(self.samples.clone()),
            sweep: Some(self.sweep.clone()),
            eps: self.eps,
            pilot_samples: Some(self.pilot_samples),
            seed: Some(self.seed),
            reference_samples: Some(self.reference_samples),
            reference_seed: Some(self.reference_seed),
            reference: self.reference.clone(),
            require_reference: Some(self.require_reference),
            kl_cache: self.kl_cache.clone(),
            out: Some(self.out.clone()),
            threads: Some(self.threads),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_partial()).expect("flat config serializes")
    }
}

/// Parses `"100,50"` into per-level counts.
pub fn parse_counts(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|t| t.trim().parse::<u64>().map_err(|_| HarnessError::config(format!("`{t}` is not a sample count"))))
        .collect()
}
