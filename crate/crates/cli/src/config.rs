//! Declarative experiment configuration: per-experiment defaults, a TOML
//! file layered on top, then command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cart_core::knn::{DEFAULT_FOLDS, DEFAULT_K_GRID};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Fig1aSparsitySweep,
    Fig1bBostonSweep,
    Fig1cRhoVsD0,
    Theorem1Montecarlo,
    PopulationSuite,
    IdentitySuite,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Fig1aSparsitySweep,
        ExperimentKind::Fig1bBostonSweep,
        ExperimentKind::Fig1cRhoVsD0,
        ExperimentKind::Theorem1Montecarlo,
        ExperimentKind::PopulationSuite,
        ExperimentKind::IdentitySuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Fig1aSparsitySweep => "fig1a_sparsity_sweep",
            ExperimentKind::Fig1bBostonSweep => "fig1b_boston_sweep",
            ExperimentKind::Fig1cRhoVsD0 => "fig1c_rho_vs_d0",
            ExperimentKind::Theorem1Montecarlo => "theorem1_montecarlo",
            ExperimentKind::PopulationSuite => "population_suite",
            ExperimentKind::IdentitySuite => "identity_suite",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|k| k.name()).collect();
            HarnessError::Config(format!("unknown experiment '{s}'; expected one of {}", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteSize {
    Full,
    Smoke,
}

/// Every knob of every experiment. Fields an experiment does not use are
/// ignored by it but still echoed into its output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Training sample size.
    pub n: usize,
    /// Held-out sample size for test error.
    pub test_n: usize,
    /// Ambient dimensions swept by the prediction-error experiments.
    pub d_range: Vec<usize>,
    /// Fixed ambient dimension (correlation sweep and Monte-Carlo).
    pub d: usize,
    /// Number of signal coordinates.
    pub d0: usize,
    pub d0_range: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    /// Depth limit of the grown tree; `ceil(log2 n)` when absent.
    pub depth: Option<usize>,
    /// Multiplier of the pruning temperature.
    pub alpha_scale: f64,
    pub k_grid: Vec<usize>,
    pub folds: usize,
    /// Failure probability of the oracle inequality.
    pub delta: f64,
    /// Bound on `|Y|` used by the oracle-inequality temperature.
    pub response_bound: f64,
    pub boston_csv: Option<PathBuf>,
    pub boston_response: String,
    /// Share of rows held out as test set for real data.
    pub test_fraction: f64,
    pub suite: SuiteSize,
    pub output: PathBuf,
}

/// Temperature multiplier for the `(d/n) ln(n/d)` rate used by the sweeps.
pub const DEFAULT_RATE_SCALE: f64 = 0.01;

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut cfg = Self {
            experiment: kind,
            n: 1000,
            test_n: 10_000,
            d_range: vec![5, 10, 20, 50, 100],
            d: 20,
            d0: 5,
            d0_range: vec![1, 2, 4, 8],
            replications: 10,
            seed: 0,
            depth: None,
            alpha_scale: DEFAULT_RATE_SCALE,
            k_grid: DEFAULT_K_GRID.to_vec(),
            folds: DEFAULT_FOLDS,
            delta: 0.05,
            response_bound: 1.0,
            boston_csv: None,
            boston_response: "MEDV".to_string(),
            test_fraction: 0.2,
            suite: SuiteSize::Full,
            output: PathBuf::from("results"),
        };
        match kind {
            ExperimentKind::Fig1bBostonSweep => {
                cfg.d0 = 13;
                cfg.d_range = vec![13, 20, 50, 100];
            }
            ExperimentKind::Theorem1Montecarlo => {
                cfg.n = 50;
                cfg.d = 1;
                cfg.replications = 200;
                cfg.alpha_scale = 1.01;
            }
            _ => {}
        }
        cfg
    }

    /// Defaults for `kind`, overlaid with the keys of a TOML document. The
    /// document may name the experiment itself; `kind` wins when given.
    pub fn from_toml(text: &str, kind: Option<ExperimentKind>) -> Result<Self, HarnessError> {
        let file: toml::Table = text.parse().map_err(|e| HarnessError::Config(format!("invalid TOML: {e}")))?;
        let named = match file.get("experiment") {
            Some(toml::Value::String(s)) => Some(s.parse::<ExperimentKind>()?),
            Some(other) => return Err(HarnessError::Config(format!("experiment must be a string, got {other}"))),
            None => None,
        };
        let kind = kind.or(named).ok_or_else(|| HarnessError::Config("no experiment named".into()))?;
        let mut merged = toml::Table::try_from(Self::defaults(kind))
            .map_err(|e| HarnessError::Config(format!("cannot encode defaults: {e}")))?;
        for (k, v) in file {
            merged.insert(k, v);
        }
        merged.insert("experiment".into(), toml::Value::String(kind.name().into()));
        let cfg: Self = merged.try_into().map_err(|e| HarnessError::Config(format!("invalid configuration: {e}")))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path, kind: Option<ExperimentKind>) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, kind)
    }

    pub fn depth_for(&self, n: usize) -> usize {
        self.depth.unwrap_or_else(|| crate::models::default_depth(n))
    }

    /// One-line JSON echo of the configuration for output headers.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("configuration serialises")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.replications == 0 {
            return fail("replications must be at least 1".into());
        }
        if self.n == 0 || self.test_n == 0 {
            return fail("n and test_n must be positive".into());
        }
        if !(self.alpha_scale > 0.0 && self.alpha_scale.is_finite()) {
            return fail(format!("alpha_scale must be positive, got {}", self.alpha_scale));
        }
        if self.folds < 2 {
            return fail("folds must be at least 2".into());
        }
        if self.k_grid.is_empty() || self.k_grid.contains(&0) {
            return fail("k_grid must be non-empty and positive".into());
        }
        if self.depth == Some(0) && self.experiment != ExperimentKind::Theorem1Montecarlo {
            return fail("depth 0 leaves nothing to prune".into());
        }
        match self.experiment {
            ExperimentKind::Fig1aSparsitySweep | ExperimentKind::Fig1bBostonSweep => {
                let Some(&min_d) = self.d_range.iter().min() else {
                    return fail("d_range must not be empty".into());
                };
                if self.experiment == ExperimentKind::Fig1aSparsitySweep && (self.d0 == 0 || self.d0 > min_d) {
                    return fail(format!("d0 = {} must lie in 1..={min_d} (smallest d)", self.d0));
                }
                if self.experiment == ExperimentKind::Fig1aSparsitySweep && self.d_range.iter().any(|&d| d >= self.n) {
                    return fail("every d must be below n for the pruning temperature".into());
                }
                if self.experiment == ExperimentKind::Fig1bBostonSweep {
                    if self.boston_csv.is_none() {
                        return fail("fig1b_boston_sweep needs boston_csv".into());
                    }
                    if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
                        return fail(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction));
                    }
                }
            }
            ExperimentKind::Fig1cRhoVsD0 => {
                if self.d0_range.is_empty() || self.d0_range.iter().any(|&k| k == 0 || k > self.d) {
                    return fail(format!("d0_range must be a non-empty subset of 1..={}", self.d));
                }
                if self.d >= self.n {
                    return fail("d must be below n for the pruning temperature".into());
                }
            }
            ExperimentKind::Theorem1Montecarlo => {
                if self.d == 0 || 2 * self.n <= self.d + 1 {
                    return fail(format!("need d >= 1 and n > (d + 1) / 2, got n = {}, d = {}", self.n, self.d));
                }
                if !(self.alpha_scale > 1.0) {
                    return fail(format!("the oracle inequality needs alpha_scale > 1, got {}", self.alpha_scale));
                }
                if !(self.delta > 0.0 && self.delta <= 1.0) {
                    return fail(format!("delta must lie in (0, 1], got {}", self.delta));
                }
                if !(self.response_bound > 0.0) {
                    return fail("response_bound must be positive".into());
                }
            }
            ExperimentKind::PopulationSuite | ExperimentKind::IdentitySuite => {}
        }
        Ok(())
    }
}
