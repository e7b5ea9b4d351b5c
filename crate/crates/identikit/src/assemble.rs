//! Bridge from the JSON configuration to core study objects.

use identikit_core::fit::{FitOptions, FreeParam, LikelihoodSpec, PriorKind, SigmaMode};
use identikit_core::model::{ModelSpec, ParameterVector};
use identikit_core::observe::{synthesize, Dataset, NoiseModel, ObservationOperator, K_PARAM};
use identikit_core::sample::{Distribution, Scheme};

use crate::config::{DistConfig, NoiseConfig, RunConfig};
use crate::error::{CliError, CliResult};

/// A run configuration resolved against the model registry.
#[derive(Debug, Clone)]
pub struct Study {
    pub model: ModelSpec,
    /// Full theta baseline: fixed values, prior baselines for free entries.
    pub base: ParameterVector,
    /// Concrete observation operators (baseline K substituted).
    pub ops: Vec<ObservationOperator>,
    /// Display names, one per observable.
    pub obs_names: Vec<String>,
    /// Free parameters (those with priors), K included when applicable.
    pub free: Vec<FreeParam>,
    /// Prior distribution per free parameter.
    pub priors: Vec<Distribution>,
}

impl Study {
    pub fn free_names(&self) -> Vec<String> {
        self.free.iter().map(|p| p.name.clone()).collect()
    }

    /// Indices of the series-valued observables (the ones data can pair
    /// with).
    pub fn series_ops(&self) -> Vec<ObservationOperator> {
        self.ops
            .iter()
            .filter(|op| op.is_series())
            .cloned()
            .collect()
    }

    pub fn series_names(&self) -> Vec<String> {
        self.ops
            .iter()
            .zip(&self.obs_names)
            .filter(|(op, _)| op.is_series())
            .map(|(_, n)| n.clone())
            .collect()
    }
}

fn dist_from_config(d: &DistConfig) -> Distribution {
    match *d {
        DistConfig::Uniform([a, b]) => Distribution::Uniform { a, b },
        DistConfig::Gaussian { mu, sigma } => Distribution::Gaussian { mu, sigma },
        DistConfig::TruncatedGaussian { mu, sigma, lo, hi } => {
            Distribution::TruncatedGaussian { mu, sigma, lo, hi }
        }
        DistConfig::Lognormal { mu_log, sigma_log } => {
            Distribution::LogNormal { mu_log, sigma_log }
        }
    }
}

/// Central value used as the baseline for a free parameter.
fn baseline(d: &Distribution) -> f64 {
    match *d {
        Distribution::Uniform { a, b } => 0.5 * (a + b),
        Distribution::Gaussian { mu, .. } => mu,
        Distribution::TruncatedGaussian { mu, lo, hi, .. } => mu.clamp(lo, hi),
        Distribution::LogNormal { mu_log, .. } => mu_log.exp(),
    }
}

/// Finite fit box of a prior.
fn fit_bounds(d: &Distribution) -> (f64, f64) {
    match *d {
        Distribution::Uniform { a, b } => (a, b),
        Distribution::Gaussian { mu, sigma } => (mu - 6.0 * sigma, mu + 6.0 * sigma),
        Distribution::TruncatedGaussian { lo, hi, .. } => (lo, hi),
        Distribution::LogNormal { .. } => (d.inv_cdf(1e-9), d.inv_cdf(1.0 - 1e-9)),
    }
}

pub fn study(cfg: &RunConfig) -> CliResult<Study> {
    let model = ModelSpec::by_name(&cfg.model.name, cfg.model.n_pop, cfg.model.t_lock)
        .map_err(|e| CliError::Config(format!("model: {e}")))?;

    // every configured parameter must be a model coefficient or K
    for name in cfg.parameters.keys() {
        if name != K_PARAM && !model.param_names().contains(name) {
            return Err(CliError::Config(format!(
                "parameters.{name}: model '{}' has no such coefficient (expected one of {:?} or K)",
                model.name(),
                model.param_names()
            )));
        }
    }

    // full theta baseline: coefficients then initial conditions
    let mut pairs: Vec<(String, f64)> = Vec::new();
    let mut free = Vec::new();
    let mut priors = Vec::new();
    for name in model.param_names() {
        let p = cfg.parameters.get(name).ok_or_else(|| {
            CliError::Config(format!(
                "parameters.{name}: required by model '{}'",
                model.name()
            ))
        })?;
        let value = if let Some(v) = p.fixed {
            v
        } else {
            let d = dist_from_config(p.prior.as_ref().unwrap());
            d.validate()
                .map_err(|e| CliError::Config(format!("parameters.{name}: {e}")))?;
            let (lo, hi) = fit_bounds(&d);
            free.push(FreeParam::new(name.clone(), lo, hi));
            priors.push(d.clone());
            baseline(&d)
        };
        pairs.push((name.clone(), value));
    }
    for state in model.state_names() {
        let v = cfg.initial_conditions.get(state).ok_or_else(|| {
            CliError::Config(format!(
                "initial_conditions.{state}: missing value for state '{state}'"
            ))
        })?;
        pairs.push((format!("{state}0"), *v));
    }
    let pair_refs: Vec<(&str, f64)> = pairs.iter().map(|(n, v)| (n.as_str(), *v)).collect();
    let base = model
        .full_theta(&pair_refs)
        .map_err(|e| CliError::Config(e.to_string()))?;

    // the shared under-reporting factor
    let k_cfg = cfg.parameters.get(K_PARAM);
    let k_base = match k_cfg {
        Some(p) => {
            if let Some(v) = p.fixed {
                Some(v)
            } else {
                let d = dist_from_config(p.prior.as_ref().unwrap());
                d.validate()
                    .map_err(|e| CliError::Config(format!("parameters.K: {e}")))?;
                let (lo, hi) = fit_bounds(&d);
                free.push(FreeParam::new(K_PARAM, lo.max(1.0), hi));
                priors.push(d.clone());
                Some(baseline(&d).max(1.0))
            }
        }
        None => None,
    };

    if cfg.observables.is_empty() {
        // observables default to plain views of every compartment
        let mut ops = Vec::new();
        let mut obs_names = Vec::new();
        for s in model.state_names() {
            ops.push(ObservationOperator::ScaledState {
                state: s.clone(),
                k: k_base.unwrap_or(1.0),
            });
            obs_names.push(format!("{s}_obs"));
        }
        return Ok(Study {
            model,
            base,
            ops,
            obs_names,
            free,
            priors,
        });
    }

    let mut ops = Vec::new();
    let mut obs_names = Vec::new();
    for (i, o) in cfg.observables.iter().enumerate() {
        let field = format!("observables[{i}]");
        let need_state = || {
            o.state
                .clone()
                .ok_or_else(|| CliError::Config(format!("{field}.state: required for {}", o.kind)))
        };
        let k = k_base.or(o.k).unwrap_or(1.0);
        let op = match o.kind.as_str() {
            "scaled_state" => ObservationOperator::ScaledState {
                state: need_state()?,
                k,
            },
            "incidence" => ObservationOperator::Incidence { k },
            "state_at_time" => ObservationOperator::StateAtTime {
                state: need_state()?,
                t: o.t
                    .ok_or_else(|| CliError::Config(format!("{field}.t: required")))?,
            },
            "peak_time" => ObservationOperator::PeakTime {
                state: need_state()?,
            },
            "peak_value" => ObservationOperator::PeakValue {
                state: need_state()?,
            },
            "cumulative_incidence_peak" => ObservationOperator::CumulativeIncidencePeak {
                window: o
                    .window
                    .ok_or_else(|| CliError::Config(format!("{field}.window: required")))?,
            },
            other => {
                return Err(CliError::Config(format!(
                    "{field}.kind: unknown kind '{other}'"
                )))
            }
        };
        obs_names.push(o.name.clone().unwrap_or_else(|| op.label()));
        ops.push(op);
    }
    Ok(Study {
        model,
        base,
        ops,
        obs_names,
        free,
        priors,
    })
}

/// Fully fixed theta for simulation; errors name the first free parameter.
pub fn fixed_theta(cfg: &RunConfig, study: &Study) -> CliResult<ParameterVector> {
    if let Some(p) = study.free.first() {
        return Err(CliError::Config(format!(
            "parameters.{}: must be fixed for this command (found a prior)",
            p.name
        )));
    }
    let _ = cfg;
    Ok(study.base.clone())
}

/// Dense output grid over [0, horizon].
pub fn dense_grid(cfg: &RunConfig) -> Vec<f64> {
    let n = cfg.grid_points();
    let h = cfg.horizon();
    (0..n).map(|j| h * j as f64 / (n - 1) as f64).collect()
}

/// The dataset: read from CSV or synthesized from the embedded recipe.
pub fn dataset(cfg: &RunConfig, study: &Study, seed: Option<u64>) -> CliResult<Dataset> {
    let data_cfg = cfg
        .data
        .as_ref()
        .ok_or_else(|| CliError::config("data: required for this command"))?;
    if let Some(path) = &data_cfg.csv {
        let mut data = crate::dataio::read_dataset_csv(path)?;
        // pair by position with the series observables
        let expected = study.series_names();
        if data.series.len() != expected.len() {
            return Err(CliError::Config(format!(
                "data.csv: {} series for {} series observables",
                data.series.len(),
                expected.len()
            )));
        }
        if let Some(NoiseConfig::Known { sigmas }) = &cfg.noise {
            if sigmas.len() == data.noise.len() {
                data.noise = sigmas.iter().map(|&s| NoiseModel::Known(s)).collect();
            }
        }
        return Ok(data);
    }

    let synth = data_cfg.synthetic.as_ref().unwrap();
    let times = synth.times.expand()?;
    let seed = seed.unwrap_or(synth.seed);

    // true assignment: baseline overridden by theta_true entries
    let mut theta_true = study.base.clone();
    let mut ops_true = study.series_ops();
    for (name, &value) in &synth.theta_true {
        if name == K_PARAM {
            for op in ops_true.iter_mut() {
                if op.k().is_some() {
                    *op = op.with_k(value);
                }
            }
        } else {
            theta_true.set(name, value).map_err(|_| {
                CliError::Config(format!(
                    "data.synthetic.theta_true.{name}: unknown parameter"
                ))
            })?;
        }
    }
    for p in &study.free {
        if p.name != K_PARAM && !synth.theta_true.contains_key(&p.name) {
            return Err(CliError::Config(format!(
                "data.synthetic.theta_true.{}: required (parameter is free)",
                p.name
            )));
        }
    }

    let mut data = synthesize(
        &study.model,
        &theta_true,
        &ops_true,
        &times,
        &synth.sigmas,
        seed,
    )
    .map_err(CliError::from)?;
    for (s, name) in data.series.iter_mut().zip(study.series_names()) {
        s.name = name;
    }
    Ok(data)
}

/// Likelihood spec for the fit family of commands.
pub fn likelihood_spec(cfg: &RunConfig, study: &Study, data: Dataset) -> CliResult<LikelihoodSpec> {
    if study.free.is_empty() {
        return Err(CliError::config(
            "parameters: at least one prior is required for fitting",
        ));
    }
    let sigma_mode = match &cfg.noise {
        None | Some(NoiseConfig::ProfiledCommon) => SigmaMode::ProfiledCommon,
        Some(NoiseConfig::Known { sigmas }) => SigmaMode::Known(sigmas.clone()),
        Some(NoiseConfig::ProfiledTwo { lambda_grid }) => SigmaMode::ProfiledTwo {
            lambda_grid: lambda_grid.expand()?,
        },
    };
    let prior = match cfg.fit.as_ref().and_then(|f| f.gaussian_prior.as_ref()) {
        None => PriorKind::UniformBox,
        Some(gp) => {
            let mut means = Vec::new();
            let mut sds = Vec::new();
            for p in &study.free {
                let m = gp.means.get(&p.name).ok_or_else(|| {
                    CliError::Config(format!("fit.gaussian_prior.means.{}: required", p.name))
                })?;
                let s = gp.sds.get(&p.name).ok_or_else(|| {
                    CliError::Config(format!("fit.gaussian_prior.sds.{}: required", p.name))
                })?;
                means.push(*m);
                sds.push(*s);
            }
            PriorKind::Gaussian { means, sds }
        }
    };
    LikelihoodSpec::new(
        study.model.clone(),
        study.base.clone(),
        study.series_ops(),
        data,
        study.free.clone(),
        sigma_mode,
        prior,
    )
    .map_err(CliError::from)
}

pub fn fit_options(cfg: &RunConfig, seed: Option<u64>) -> FitOptions {
    let restarts = cfg.fit.as_ref().map(|f| f.restarts).unwrap_or(20);
    let cfg_seed = cfg.fit.as_ref().map(|f| f.seed).unwrap_or(0);
    FitOptions {
        restarts,
        seed: seed
            .map(|s| identikit_core::derive_seed(s, 2))
            .unwrap_or(cfg_seed),
        ..Default::default()
    }
}

pub fn scheme(cfg: &RunConfig) -> CliResult<Scheme> {
    let name = cfg
        .sampling
        .as_ref()
        .map(|s| s.scheme.as_str())
        .unwrap_or("monte_carlo");
    match name {
        "monte_carlo" => Ok(Scheme::MonteCarlo),
        "lhs" => Ok(Scheme::Lhs),
        "halton" => Ok(Scheme::Halton),
        other => Err(CliError::Config(format!(
            "sampling.scheme: unknown scheme '{other}'"
        ))),
    }
}
