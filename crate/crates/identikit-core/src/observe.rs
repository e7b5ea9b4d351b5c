//! Observation operators, synthetic data and misfits.
//!
//! An operator G maps a trajectory to observed quantities: a per-time series
//! (prevalence divided by an under-reporting factor K, or incidence) or a
//! scalar quantity of interest (state at a time, peak time/value, window of
//! maximal cumulative incidence). Synthetic datasets realize the additive
//! Gaussian data model on top of G.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::parabola_vertex;
use crate::model::{integrate, ModelSpec, ParameterVector, Trajectory};
use crate::rng::counter_gaussian;

#[allow(unused_imports)]
use num_traits::Float;

/// How a trajectory is turned into an observable.
///
/// `k` is the under-reporting factor: only a fraction 1/K of the compartment
/// (or flux) is seen. It must be >= 1.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationOperator {
    /// state / K at each trajectory time.
    ScaledState { state: String, k: f64 },
    /// New-case flux beta(t)/N_pop * I * S / K at each trajectory time.
    Incidence { k: f64 },
    /// State value at one fixed time (linear interpolation on the grid).
    StateAtTime { state: String, t: f64 },
    /// Time of the maximum of a state, with quadratic refinement around the
    /// discrete argmax.
    PeakTime { state: String },
    /// Value of the maximum of a state, with quadratic refinement.
    PeakValue { state: String },
    /// Start of the window of length `window` with maximal cumulative
    /// incidence (trapezoid quadrature of the transmission flux).
    CumulativeIncidencePeak { window: f64 },
}

impl ObservationOperator {
    /// True when the operator yields one value per trajectory time.
    pub fn is_series(&self) -> bool {
        matches!(
            self,
            ObservationOperator::ScaledState { .. } | ObservationOperator::Incidence { .. }
        )
    }

    /// Under-reporting factor, if the operator carries one.
    pub fn k(&self) -> Option<f64> {
        match self {
            ObservationOperator::ScaledState { k, .. } | ObservationOperator::Incidence { k } => {
                Some(*k)
            }
            _ => None,
        }
    }

    /// Replace the under-reporting factor (used when K is a fit parameter).
    pub fn with_k(&self, k: f64) -> Self {
        match self {
            ObservationOperator::ScaledState { state, .. } => ObservationOperator::ScaledState {
                state: state.clone(),
                k,
            },
            ObservationOperator::Incidence { .. } => ObservationOperator::Incidence { k },
            other => other.clone(),
        }
    }

    /// Default series/QoI label.
    pub fn label(&self) -> String {
        match self {
            ObservationOperator::ScaledState { state, .. } => format!("{state}_obs"),
            ObservationOperator::Incidence { .. } => "incidence".to_string(),
            ObservationOperator::StateAtTime { state, t } => format!("{state}_at_{t}"),
            ObservationOperator::PeakTime { state } => format!("peak_time_{state}"),
            ObservationOperator::PeakValue { state } => format!("peak_value_{state}"),
            ObservationOperator::CumulativeIncidencePeak { .. } => {
                "cumulative_incidence_peak".to_string()
            }
        }
    }

    fn validate(&self, model: &ModelSpec) -> Result<()> {
        if let Some(k) = self.k() {
            if !(k >= 1.0) {
                return Err(Error::Validation(format!(
                    "under-reporting factor K must be >= 1, got {k}"
                )));
            }
        }
        match self {
            ObservationOperator::ScaledState { state, .. }
            | ObservationOperator::StateAtTime { state, .. }
            | ObservationOperator::PeakTime { state }
            | ObservationOperator::PeakValue { state } => model.state_index(state).map(|_| ()),
            ObservationOperator::CumulativeIncidencePeak { window } => {
                if *window > 0.0 {
                    Ok(())
                } else {
                    Err(Error::validation(
                        "cumulative-incidence window must be positive",
                    ))
                }
            }
            ObservationOperator::Incidence { .. } => Ok(()),
        }
    }
}

/// Result of applying one operator.
#[derive(Debug, Clone, PartialEq)]
pub enum Observed {
    /// One value per trajectory time.
    Series(Vec<f64>),
    Scalar(f64),
}

impl Observed {
    pub fn into_series(self) -> Result<Vec<f64>> {
        match self {
            Observed::Series(v) => Ok(v),
            Observed::Scalar(_) => Err(Error::validation("expected a series observable")),
        }
    }
    pub fn into_scalar(self) -> Result<f64> {
        match self {
            Observed::Scalar(v) => Ok(v),
            Observed::Series(_) => Err(Error::validation("expected a scalar observable")),
        }
    }
}

/// Apply an observation operator to a trajectory.
///
/// Incidence needs the model (for the active contact rate) and the
/// coefficients inside `theta`; peak quantities are refined by a quadratic
/// fit through the three grid points around the discrete argmax.
pub fn observe(
    model: &ModelSpec,
    traj: &Trajectory,
    op: &ObservationOperator,
    theta: &ParameterVector,
) -> Result<Observed> {
    if traj.model_ref() != model.name() {
        return Err(Error::Validation(format!(
            "trajectory was produced by '{}', not '{}'",
            traj.model_ref(),
            model.name()
        )));
    }
    op.validate(model)?;
    let (coefs, _) = theta.split(model)?;
    match op {
        ObservationOperator::ScaledState { state, k } => {
            let idx = traj.state_index(state)?;
            Ok(Observed::Series(
                traj.states().iter().map(|row| row[idx] / k).collect(),
            ))
        }
        ObservationOperator::Incidence { k } => {
            let flux: Vec<f64> = traj
                .times()
                .iter()
                .zip(traj.states())
                .map(|(&t, row)| model.transmission_flux(t, row, coefs) / k)
                .collect();
            Ok(Observed::Series(flux))
        }
        ObservationOperator::StateAtTime { state, t } => {
            Ok(Observed::Scalar(traj.state_at(state, *t)?))
        }
        ObservationOperator::PeakTime { state } => {
            let idx = traj.state_index(state)?;
            let col = traj.column(idx);
            let (t, _) = refined_peak(traj.times(), &col);
            Ok(Observed::Scalar(t))
        }
        ObservationOperator::PeakValue { state } => {
            let idx = traj.state_index(state)?;
            let col = traj.column(idx);
            let (_, v) = refined_peak(traj.times(), &col);
            Ok(Observed::Scalar(v))
        }
        ObservationOperator::CumulativeIncidencePeak { window } => {
            let times = traj.times();
            let horizon = *times.last().unwrap() - times[0];
            if *window > horizon {
                return Err(Error::Validation(format!(
                    "window {window} exceeds the trajectory horizon {horizon}"
                )));
            }
            let flux: Vec<f64> = times
                .iter()
                .zip(traj.states())
                .map(|(&t, row)| model.transmission_flux(t, row, coefs))
                .collect();
            // cumulative trapezoid of the flux
            let mut cum = vec![0.0; times.len()];
            for j in 1..times.len() {
                cum[j] = cum[j - 1] + 0.5 * (flux[j] + flux[j - 1]) * (times[j] - times[j - 1]);
            }
            let cum_at = |t: f64| -> f64 {
                match times.binary_search_by(|x| x.total_cmp(&t)) {
                    Ok(j) => cum[j],
                    Err(j) => {
                        let w = (t - times[j - 1]) / (times[j] - times[j - 1]);
                        cum[j - 1] * (1.0 - w) + cum[j] * w
                    }
                }
            };
            let last = *times.last().unwrap();
            let starts: Vec<f64> = times
                .iter()
                .copied()
                .filter(|&t| t + window <= last)
                .collect();
            let windowed: Vec<f64> = starts
                .iter()
                .map(|&t| cum_at(t + window) - cum_at(t))
                .collect();
            let (t, _) = refined_peak(&starts, &windowed);
            Ok(Observed::Scalar(t))
        }
    }
}

fn refined_peak(times: &[f64], values: &[f64]) -> (f64, f64) {
    let arg = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap();
    if arg == 0 || arg + 1 == values.len() {
        return (times[arg], values[arg]);
    }
    parabola_vertex(
        (times[arg - 1], values[arg - 1]),
        (times[arg], values[arg]),
        (times[arg + 1], values[arg + 1]),
    )
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

/// Per-series noise description.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// Gaussian standard deviation, same units as the observable.
    Known(f64),
    Unknown,
}

/// One observed time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    /// (time, value) pairs with strictly increasing, finite times.
    pub points: Vec<(f64, f64)>,
}

/// Origin of a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    pub theta_true: Vec<f64>,
}

/// A collection of observed series with noise metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub series: Vec<Series>,
    pub noise: Vec<NoiseModel>,
    pub provenance: Option<Provenance>,
}

impl Dataset {
    pub fn new(series: Vec<Series>, noise: Vec<NoiseModel>) -> Result<Self> {
        if series.len() != noise.len() {
            return Err(Error::validation("one noise model per series is required"));
        }
        for s in &series {
            for w in s.points.windows(2) {
                if w[1].0 <= w[0].0 {
                    return Err(Error::Validation(format!(
                        "series '{}' times must be strictly increasing",
                        s.name
                    )));
                }
            }
            if s.points
                .iter()
                .any(|(t, v)| !t.is_finite() || !v.is_finite())
            {
                return Err(Error::Validation(format!(
                    "series '{}' contains non-finite entries",
                    s.name
                )));
            }
        }
        Ok(Dataset {
            series,
            noise,
            provenance: None,
        })
    }

    /// Total number of data points across series.
    pub fn n_points(&self) -> usize {
        self.series.iter().map(|s| s.points.len()).sum()
    }

    /// Sorted union of all observation times.
    pub fn time_union(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|(t, _)| *t))
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }
}

/// Generate a synthetic dataset: G(X(theta_true, t_i)) + eps_i with
/// independent Gaussian noise of per-operator standard deviation.
///
/// Noise is drawn from a counter-based stream keyed on (seed, series index,
/// point index), so the result does not depend on generation order. Values
/// near zero states may go negative; they are not clipped.
pub fn synthesize(
    model: &ModelSpec,
    theta_true: &ParameterVector,
    ops: &[ObservationOperator],
    times: &[f64],
    sigmas: &[f64],
    seed: u64,
) -> Result<Dataset> {
    if ops.is_empty() {
        return Err(Error::validation(
            "at least one observation operator is required",
        ));
    }
    if sigmas.len() != ops.len() {
        return Err(Error::validation("one sigma per operator is required"));
    }
    if sigmas.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::validation("sigmas must be >= 0"));
    }
    if ops.iter().any(|op| !op.is_series()) {
        return Err(Error::validation("synthesize requires series operators"));
    }
    let traj = integrate(
        model,
        theta_true,
        times,
        crate::model::DEFAULT_RTOL,
        crate::model::DEFAULT_ATOL,
    )?;
    let mut series = Vec::with_capacity(ops.len());
    let mut noise = Vec::with_capacity(ops.len());
    for (si, (op, &sigma)) in ops.iter().zip(sigmas).enumerate() {
        let clean = observe(model, &traj, op, theta_true)?.into_series()?;
        let points: Vec<(f64, f64)> = times
            .iter()
            .zip(clean)
            .enumerate()
            .map(|(pi, (&t, v))| {
                let eps = if sigma == 0.0 {
                    0.0
                } else {
                    sigma * counter_gaussian(seed, si as u64, pi as u64)
                };
                (t, v + eps)
            })
            .collect();
        series.push(Series {
            name: op.label(),
            points,
        });
        noise.push(NoiseModel::Known(sigma));
    }
    let mut data = Dataset::new(series, noise)?;
    data.provenance = Some(Provenance {
        seed,
        theta_true: theta_true.values().to_vec(),
    });
    Ok(data)
}

/// Misfits data_i - G(X(theta, t_i)) for every point of every series,
/// concatenated in series order. `ops` pairs with `data.series` by position.
pub fn misfits(
    data: &Dataset,
    model: &ModelSpec,
    theta: &ParameterVector,
    ops: &[ObservationOperator],
) -> Result<Vec<f64>> {
    let preds = predictions(data, model, theta, ops)?;
    let mut out = Vec::with_capacity(data.n_points());
    for (s, p) in data.series.iter().zip(&preds) {
        for ((_, value), pred) in s.points.iter().zip(p) {
            out.push(value - pred);
        }
    }
    Ok(out)
}

/// Model predictions G(X(theta, t_i)) aligned with each series' own times.
/// One integration over the union grid serves all series.
pub fn predictions(
    data: &Dataset,
    model: &ModelSpec,
    theta: &ParameterVector,
    ops: &[ObservationOperator],
) -> Result<Vec<Vec<f64>>> {
    if ops.len() != data.series.len() {
        return Err(Error::Validation(format!(
            "{} operators for {} series",
            ops.len(),
            data.series.len()
        )));
    }
    if ops.iter().any(|op| !op.is_series()) {
        return Err(Error::validation("misfits require series operators"));
    }
    let union = data.time_union();
    if union.is_empty() {
        return Err(Error::Degenerate("dataset has no points".into()));
    }
    let traj = integrate(
        model,
        theta,
        &union,
        crate::model::DEFAULT_RTOL,
        crate::model::DEFAULT_ATOL,
    )?;
    let mut out = Vec::with_capacity(ops.len());
    for (s, op) in data.series.iter().zip(ops) {
        let full = observe(model, &traj, op, theta)?.into_series()?;
        let series_pred: Vec<f64> = s
            .points
            .iter()
            .map(|(t, _)| {
                let j = union
                    .binary_search_by(|x| x.total_cmp(t))
                    .expect("series time missing from union grid");
                full[j]
            })
            .collect();
        out.push(series_pred);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Free-parameter mapping
// ---------------------------------------------------------------------------

/// Reserved name for a shared under-reporting factor treated as a free
/// parameter: it overrides the K of every operator that carries one.
pub const K_PARAM: &str = "K";

/// Maps a vector of free-parameter values onto a full model assignment and a
/// concrete operator set.
///
/// Free names refer to entries of the model's theta (coefficients or initial
/// conditions) or to the shared hyper-parameter [`K_PARAM`]. Everything not
/// listed stays at its baseline value.
#[derive(Debug, Clone)]
pub struct ParamMap {
    model: ModelSpec,
    base: ParameterVector,
    ops: Vec<ObservationOperator>,
    free_names: Vec<String>,
}

impl ParamMap {
    pub fn new(
        model: ModelSpec,
        base: ParameterVector,
        ops: Vec<ObservationOperator>,
        free_names: Vec<String>,
    ) -> Result<Self> {
        base.split(&model)?;
        let theta_names = model.theta_names();
        for name in &free_names {
            if name != K_PARAM && !theta_names.contains(name) {
                return Err(Error::Validation(format!(
                    "free parameter '{name}' is neither a model parameter nor '{K_PARAM}'"
                )));
            }
        }
        for (i, a) in free_names.iter().enumerate() {
            if free_names[..i].contains(a) {
                return Err(Error::Validation(format!("duplicate free parameter '{a}'")));
            }
        }
        Ok(ParamMap {
            model,
            base,
            ops,
            free_names,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }
    pub fn base(&self) -> &ParameterVector {
        &self.base
    }
    pub fn ops(&self) -> &[ObservationOperator] {
        &self.ops
    }
    pub fn free_names(&self) -> &[String] {
        &self.free_names
    }
    pub fn n_free(&self) -> usize {
        self.free_names.len()
    }

    /// Baseline value of one free parameter (for K: the first operator K).
    pub fn base_value(&self, name: &str) -> Option<f64> {
        if name == K_PARAM {
            self.ops.iter().find_map(|op| op.k())
        } else {
            self.base.get(name)
        }
    }

    /// Substitute free values into the baseline; returns the full model
    /// theta and the concrete operators.
    pub fn resolve(
        &self,
        free_values: &[f64],
    ) -> Result<(ParameterVector, Vec<ObservationOperator>)> {
        if free_values.len() != self.free_names.len() {
            return Err(Error::Validation(format!(
                "{} values for {} free parameters",
                free_values.len(),
                self.free_names.len()
            )));
        }
        let mut theta = self.base.clone();
        let mut ops = self.ops.clone();
        for (name, &value) in self.free_names.iter().zip(free_values) {
            if name == K_PARAM {
                for op in ops.iter_mut() {
                    if op.k().is_some() {
                        *op = op.with_k(value);
                    }
                }
            } else {
                theta.set(name, value)?;
            }
        }
        Ok((theta, ops))
    }

    /// Fix one free parameter at a value, producing the reduced map used by
    /// profile likelihood.
    pub fn fix(&self, name: &str, value: f64) -> Result<ParamMap> {
        let pos = self
            .free_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Validation(format!("'{name}' is not a free parameter")))?;
        let mut base = self.base.clone();
        let mut ops = self.ops.clone();
        if name == K_PARAM {
            for op in ops.iter_mut() {
                if op.k().is_some() {
                    *op = op.with_k(value);
                }
            }
        } else {
            base.set(name, value)?;
        }
        let mut free_names = self.free_names.clone();
        free_names.remove(pos);
        Ok(ParamMap {
            model: self.model.clone(),
            base,
            ops,
            free_names,
        })
    }
}
