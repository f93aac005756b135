use std::path::{Path, PathBuf};

use kcut_core::continuum::SubordinatorConfig;
use kcut_core::gwtree::{make_offspring_law, LawSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Cut counts on conditioned Galton-Watson trees.
    Discrete,
    /// Samples of the limit functional X_k.
    Continuum,
    /// Discrete scaled cut counts against continuum samples, per n.
    Convergence,
    /// Conditional first (and higher) moments given sampled excursions.
    Moments,
    /// Gamma order statistics against the Poisson limit.
    GammaCheck,
    /// The pathwise bound between X_k and X_1.
    BoundCheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Discrete => "discrete",
            Self::Continuum => "continuum",
            Self::Convergence => "convergence",
            Self::Moments => "moments",
            Self::GammaCheck => "gamma-check",
            Self::BoundCheck => "bound-check",
        }
    }
}

fn default_law() -> LawSpec {
    LawSpec::Binary
}
fn default_grid_size() -> usize {
    10_000
}
fn default_workers() -> usize {
    1
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_label() -> String {
    "run".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub k: f64,
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default = "default_law")]
    pub law: LawSpec,
    pub sims: usize,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default)]
    pub subordinator: SubordinatorConfig,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_label")]
    pub label: String,
    /// Continuum samples in convergence mode (default: `sims`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuum_sims: Option<usize>,
    /// Discrete sims per n in moments mode (default: `sims`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete_sims: Option<usize>,
    /// Monte Carlo s-samples per excursion in moments mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    /// Highest moment order estimated in moments mode (1..=3).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_tolerance: Option<f64>,
}

pub const DEFAULT_MC_SAMPLES: usize = 1000;
pub const DEFAULT_GAMMA_M: u64 = 100_000;
pub const DEFAULT_BOUND_TOLERANCE: f64 = 1e-6;

impl ExperimentConfig {
    pub fn continuum_sims(&self) -> usize {
        self.continuum_sims.unwrap_or(self.sims)
    }

    pub fn discrete_sims(&self) -> usize {
        self.discrete_sims.unwrap_or(self.sims)
    }

    pub fn mc_samples(&self) -> usize {
        self.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES)
    }

    pub fn q_max(&self) -> usize {
        self.q_max.unwrap_or(1)
    }

    pub fn m(&self) -> u64 {
        self.m.unwrap_or(DEFAULT_GAMMA_M)
    }

    pub fn a(&self) -> f64 {
        self.a.unwrap_or(1.0)
    }

    pub fn t_grid(&self) -> Vec<f64> {
        self.t_grid.clone().unwrap_or_else(|| vec![1.0, 2.0])
    }

    /// The k values of bound-check mode, always including 1.
    pub fn k_list(&self) -> Vec<f64> {
        let mut ks = self
            .k_list
            .clone()
            .unwrap_or_else(|| vec![1.0, 2.0, 3.0, 4.0]);
        if !ks.contains(&1.0) {
            ks.insert(0, 1.0);
        }
        ks
    }

    pub fn bound_tolerance(&self) -> f64 {
        self.bound_tolerance.unwrap_or(DEFAULT_BOUND_TOLERANCE)
    }

    /// The integer clock index, for modes that cut discrete trees.
    pub fn k_integer(&self) -> usize {
        self.k as usize
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |path: &str, message: String| {
            Err(CliError::Config {
                path: path.into(),
                message,
            })
        };
        if !(self.k.is_finite() && self.k >= 1.0) {
            return bad("k", format!("must be >= 1, got {}", self.k));
        }
        let integer_k = matches!(
            self.experiment,
            Experiment::Discrete | Experiment::Convergence | Experiment::GammaCheck
        ) || (self.experiment == Experiment::Moments && !self.n_list.is_empty());
        if integer_k && self.k.fract() != 0.0 {
            return bad(
                "k",
                format!("must be an integer in {} mode", self.experiment.name()),
            );
        }
        if self.sims == 0 {
            return bad("sims", "must be >= 1".into());
        }
        if self.workers == 0 {
            return bad("workers", "must be >= 1".into());
        }
        if self.label.is_empty() || self.label.contains(['/', '\\']) || self.label.starts_with('.')
        {
            return bad(
                "label",
                format!("{:?} is not a plain directory name", self.label),
            );
        }
        if let Some(i) = self.n_list.iter().position(|&n| n == 0) {
            return bad(&format!("nList[{i}]"), "must be >= 1".into());
        }
        if matches!(
            self.experiment,
            Experiment::Discrete | Experiment::Convergence
        ) && self.n_list.is_empty()
        {
            return bad(
                "nList",
                format!("must be non-empty in {} mode", self.experiment.name()),
            );
        }
        if let Err(e) = make_offspring_law(&self.law) {
            return bad("law", e.to_string());
        }
        if self.grid_size < 2 {
            return bad("gridSize", "must be >= 2".into());
        }
        let sub = &self.subordinator;
        if sub.step_count == 0 {
            return bad("subordinator.stepCount", "must be >= 1".into());
        }
        if !(sub.horizon.is_finite() && sub.horizon > 0.0) {
            return bad("subordinator.horizon", "must be positive".into());
        }
        if !(sub.tail_threshold > 0.0 && sub.tail_threshold < 1.0) {
            return bad("subordinator.tailThreshold", "must lie in (0, 1)".into());
        }
        for (path, value) in [
            ("continuumSims", self.continuum_sims),
            ("discreteSims", self.discrete_sims),
            ("mcSamples", self.mc_samples),
        ] {
            if value == Some(0) {
                return bad(path, "must be >= 1".into());
            }
        }
        if !(1..=kcut_core::moments::MAX_MOMENT_ORDER).contains(&self.q_max()) {
            return bad("qMax", "must lie in 1..=3".into());
        }
        if self.m == Some(0) {
            return bad("m", "must be >= 1".into());
        }
        if !(self.a().is_finite() && self.a() > 0.0) {
            return bad("a", "must be positive".into());
        }
        let grid = self.t_grid();
        if grid.is_empty() {
            return bad("tGrid", "must be non-empty".into());
        }
        for (i, t) in grid.iter().enumerate() {
            if !(t.is_finite() && *t >= 0.0) || (i > 0 && grid[i - 1] > *t) {
                return bad(
                    &format!("tGrid[{i}]"),
                    "grid must be sorted and non-negative".into(),
                );
            }
        }
        if let Some(ks) = &self.k_list {
            if let Some(i) = ks.iter().position(|k| !(k.is_finite() && *k >= 1.0)) {
                return bad(&format!("kList[{i}]"), "must be >= 1".into());
            }
        }
        if !(self.bound_tolerance() >= 0.0) {
            return bad("boundTolerance", "must be non-negative".into());
        }
        Ok(())
    }
}

/// Parses a config document, reporting the field path of any type error.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_config(&text)
}
