//! JSON run configuration.
//!
//! One document describes a study: the model, initial conditions, per-name
//! parameter treatment (fixed value or prior distribution), observables,
//! the data source (CSV file or an embedded synthetic-data recipe), the
//! noise treatment, and per-command blocks. Validation reports field paths.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    /// Simulation horizon in days (default 150).
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Points of the dense output grid over [0, horizon] (default 301).
    #[serde(default)]
    pub grid_points: Option<usize>,
    pub initial_conditions: BTreeMap<String, f64>,
    pub parameters: BTreeMap<String, ParamConfig>,
    #[serde(default)]
    pub observables: Vec<ObservableConfig>,
    #[serde(default)]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub sampling: Option<SamplingConfig>,
    /// Times at which state pdfs are requested by `forward`.
    #[serde(default)]
    pub qoi_times: Vec<f64>,
    #[serde(default)]
    pub fit: Option<FitConfig>,
    #[serde(default)]
    pub profile: Option<ProfileConfig>,
    #[serde(default)]
    pub bootstrap: Option<BootstrapConfig>,
    #[serde(default)]
    pub structural: Option<StructuralConfig>,
    #[serde(default)]
    pub sobol: Option<SobolConfig>,
    #[serde(default)]
    pub workflow: Option<WorkflowConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// One of: sir, seird, seirdz.
    pub name: String,
    #[serde(default = "one")]
    pub n_pop: f64,
    /// Lockdown time, required by seirdz.
    #[serde(default)]
    pub t_lock: Option<f64>,
}

fn one() -> f64 {
    1.0
}

/// A parameter is either pinned or given a prior distribution (which also
/// serves as its fit box).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamConfig {
    #[serde(default)]
    pub fixed: Option<f64>,
    #[serde(default)]
    pub prior: Option<DistConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistConfig {
    /// [a, b]
    Uniform([f64; 2]),
    Gaussian {
        mu: f64,
        sigma: f64,
    },
    TruncatedGaussian {
        mu: f64,
        sigma: f64,
        lo: f64,
        hi: f64,
    },
    Lognormal {
        mu_log: f64,
        sigma_log: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableConfig {
    #[serde(default)]
    pub name: Option<String>,
    /// scaled_state | incidence | state_at_time | peak_time | peak_value |
    /// cumulative_incidence_peak
    pub kind: String,
    #[serde(default)]
    pub state: Option<String>,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub window: Option<f64>,
    /// Fixed per-operator under-reporting factor; a "K" entry in
    /// `parameters` overrides this for every operator.
    #[serde(default)]
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    /// True values for every non-fixed parameter (fixed ones default to
    /// their configured value).
    #[serde(default)]
    pub theta_true: BTreeMap<String, f64>,
    /// One noise standard deviation per observable.
    pub sigmas: Vec<f64>,
    pub times: TimesConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TimesConfig {
    Range { start: f64, stop: f64, step: f64 },
    List(Vec<f64>),
}

impl TimesConfig {
    pub fn expand(&self) -> CliResult<Vec<f64>> {
        match self {
            TimesConfig::List(v) => Ok(v.clone()),
            TimesConfig::Range { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    return Err(CliError::config(
                        "data.synthetic.times: step must be > 0 and stop >= start",
                    ));
                }
                let n = ((stop - start) / step).round() as usize;
                Ok((0..=n).map(|j| start + j as f64 * step).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "mode", rename_all = "snake_case")]
pub enum NoiseConfig {
    Known { sigmas: Vec<f64> },
    ProfiledCommon,
    ProfiledTwo { lambda_grid: TimesConfig },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    /// monte_carlo | lhs | halton
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default = "default_n_forward")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Sample count for QoI pdf estimation (default 10_000).
    #[serde(default)]
    pub n_pdf: Option<usize>,
}

fn default_scheme() -> String {
    "monte_carlo".into()
}
fn default_n_forward() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Gaussian prior penalty (Tikhonov): per-name mean and sd. Requires
    /// known sigmas.
    #[serde(default)]
    pub gaussian_prior: Option<GaussianPriorConfig>,
}

fn default_restarts() -> usize {
    20
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianPriorConfig {
    pub means: BTreeMap<String, f64>,
    pub sds: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    /// Parameters to profile; defaults to every free parameter.
    #[serde(default)]
    pub params: Vec<String>,
    #[serde(default = "default_profile_points")]
    pub points: usize,
    /// "posterior" (mle +- sigmas * sd) or "bounds".
    #[serde(default = "default_span")]
    pub span: String,
    #[serde(default = "default_sigmas")]
    pub sigmas: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_profile_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_profile_points() -> usize {
    25
}
fn default_span() -> String {
    "posterior".into()
}
fn default_sigmas() -> f64 {
    4.0
}
fn default_alpha() -> f64 {
    0.95
}
fn default_profile_restarts() -> usize {
    5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    pub noise_levels: Vec<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// How many of the free parameters are estimated jointly (the rest stay
    /// at truth); defaults to all of them.
    #[serde(default)]
    pub jointly: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bootstrap_restarts")]
    pub restarts: usize,
}

fn default_replicates() -> usize {
    100
}
fn default_bootstrap_restarts() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuralConfig {
    /// sir_I_only | sir_I_and_R | seird_IRD
    pub case: String,
    /// Subset of ["K", "N_pop"] treated as known.
    #[serde(default)]
    pub knowns: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SobolConfig {
    #[serde(default = "default_sobol_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Evaluation times (defaults to the dense output grid, thinned).
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    /// Total-index floor below which a parameter is reported hard to infer.
    #[serde(default = "default_floor")]
    pub screening_floor: f64,
}

fn default_sobol_n() -> usize {
    1024
}
fn default_floor() -> f64 {
    0.01
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkflowConfig {
    /// On practical non-identifiability, refit the weak parameters with the
    /// well-determined ones pinned at their first-pass estimates.
    #[serde(default = "default_true")]
    pub hierarchical: bool,
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    pub fn from_path(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or(150.0)
    }
    pub fn grid_points(&self) -> usize {
        self.grid_points.unwrap_or(301).max(2)
    }

    /// Structural checks with field paths; model-aware checks live in
    /// `assemble`.
    pub fn validate(&self) -> CliResult<()> {
        for (name, p) in &self.parameters {
            match (&p.fixed, &p.prior) {
                (None, None) => {
                    return Err(CliError::Config(format!(
                        "parameters.{name}: either 'fixed' or 'prior' is required"
                    )))
                }
                (Some(_), Some(_)) => {
                    return Err(CliError::Config(format!(
                        "parameters.{name}: 'fixed' and 'prior' are mutually exclusive"
                    )))
                }
                _ => {}
            }
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0) {
                return Err(CliError::config("horizon: must be positive"));
            }
        }
        if let Some(d) = &self.data {
            match (&d.csv, &d.synthetic) {
                (None, None) => {
                    return Err(CliError::config(
                        "data: one of 'csv' or 'synthetic' is required",
                    ))
                }
                (Some(_), Some(_)) => {
                    return Err(CliError::config(
                        "data: 'csv' and 'synthetic' are exclusive",
                    ))
                }
                _ => {}
            }
            if let Some(s) = &d.synthetic {
                if s.sigmas.len() != self.observables.len() {
                    return Err(CliError::Config(format!(
                        "data.synthetic.sigmas: {} entries for {} observables",
                        s.sigmas.len(),
                        self.observables.len()
                    )));
                }
            }
        }
        if let Some(s) = &self.structural {
            for k in &s.knowns {
                if k != "K" && k != "N_pop" {
                    return Err(CliError::Config(format!(
                        "structural.knowns: '{k}' is not one of K, N_pop"
                    )));
                }
            }
        }
        Ok(())
    }
}
