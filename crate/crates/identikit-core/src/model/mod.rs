//! Compartmental ODE models and their integration.
//!
//! The model registry is closed: SIR, SEIRD, and SEIRDz (SEIRD with a
//! piecewise-constant contact rate that drops by `z` at a lockdown time).
//! New vector fields are added as enum variants in code, not via
//! configuration.

mod solver;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Default relative tolerance for integration: tight enough that
/// finite-difference Hessians of the likelihood are not dominated by
/// integration noise.
pub const DEFAULT_RTOL: f64 = 1e-6;
/// Default absolute tolerance for integration.
pub const DEFAULT_ATOL: f64 = 1e-9;

/// Builtin vector fields.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    /// Susceptible / Infected / Removed; coefficients `[beta, r]`.
    Sir,
    /// SIR with Exposed and a split of Removed into Recovered and Dead;
    /// coefficients `[beta, r, d, i]`.
    Seird,
    /// SEIRD whose contact rate switches from `beta1` to `beta1 - z` at
    /// `t_lock`; coefficients `[beta1, r, d, i, z]`.
    Seirdz { t_lock: f64 },
}

/// A compartmental model: compartment labels, coefficient labels, total
/// population, vector field and its switch times. Immutable after
/// construction and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    name: String,
    kind: ModelKind,
    state_names: Vec<String>,
    param_names: Vec<String>,
    n_pop: f64,
    switch_times: Vec<f64>,
}

impl ModelSpec {
    pub fn sir(n_pop: f64) -> Self {
        ModelSpec {
            name: "sir".to_string(),
            kind: ModelKind::Sir,
            state_names: names(&["S", "I", "R"]),
            param_names: names(&["beta", "r"]),
            n_pop,
            switch_times: vec![],
        }
    }

    pub fn seird(n_pop: f64) -> Self {
        ModelSpec {
            name: "seird".to_string(),
            kind: ModelKind::Seird,
            state_names: names(&["S", "E", "I", "R", "D"]),
            param_names: names(&["beta", "r", "d", "i"]),
            n_pop,
            switch_times: vec![],
        }
    }

    pub fn seirdz(n_pop: f64, t_lock: f64) -> Self {
        ModelSpec {
            name: "seirdz".to_string(),
            kind: ModelKind::Seirdz { t_lock },
            state_names: names(&["S", "E", "I", "R", "D"]),
            param_names: names(&["beta1", "r", "d", "i", "z"]),
            n_pop,
            switch_times: vec![t_lock],
        }
    }

    /// Look up a builtin by name. SEIRDz requires a lockdown time.
    pub fn by_name(name: &str, n_pop: f64, t_lock: Option<f64>) -> Result<Self> {
        match name {
            "sir" => Ok(Self::sir(n_pop)),
            "seird" => Ok(Self::seird(n_pop)),
            "seirdz" => {
                let t = t_lock.ok_or_else(|| {
                    Error::validation("model 'seirdz' requires a lockdown time (t_lock)")
                })?;
                Ok(Self::seirdz(n_pop, t))
            }
            other => Err(Error::Validation(format!(
                "unknown model '{other}': the registry holds sir, seird, seirdz"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }
    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }
    pub fn param_names(&self) -> &[String] {
        &self.param_names
    }
    pub fn n_pop(&self) -> f64 {
        self.n_pop
    }
    pub fn switch_times(&self) -> &[f64] {
        &self.switch_times
    }
    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }
    pub fn n_params(&self) -> usize {
        self.param_names.len()
    }

    pub fn state_index(&self, label: &str) -> Result<usize> {
        self.state_names
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| {
                Error::Validation(format!("model '{}' has no state '{label}'", self.name))
            })
    }

    /// Initial-condition names, one per state: "S0", "I0", ...
    pub fn ic_names(&self) -> Vec<String> {
        self.state_names.iter().map(|s| format!("{s}0")).collect()
    }

    /// Full parameter-vector names: coefficients then initial conditions.
    pub fn theta_names(&self) -> Vec<String> {
        let mut out = self.param_names.clone();
        out.extend(self.ic_names());
        out
    }

    /// Assemble a full [`ParameterVector`] from per-name values. Every
    /// coefficient and initial condition must be present.
    pub fn full_theta(&self, values: &[(&str, f64)]) -> Result<ParameterVector> {
        let names = self.theta_names();
        let mut vals = Vec::with_capacity(names.len());
        for n in &names {
            let v = values
                .iter()
                .find(|(k, _)| k == n)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Validation(format!("missing value for '{n}'")))?;
            vals.push(v);
        }
        ParameterVector::new(names, vals)
    }

    /// Active branch of the vector field at time t: the number of switch
    /// times strictly before t (the field at a switch time itself still
    /// belongs to the earlier branch).
    pub(crate) fn branch_at(&self, t: f64) -> usize {
        self.switch_times.iter().filter(|&&s| s < t).count()
    }

    /// Effective contact rate on a given branch.
    fn beta_on_branch(&self, coefs: &[f64], branch: usize) -> f64 {
        match self.kind {
            ModelKind::Sir | ModelKind::Seird => coefs[0],
            ModelKind::Seirdz { .. } => {
                if branch == 0 {
                    coefs[0]
                } else {
                    coefs[0] - coefs[4]
                }
            }
        }
    }

    /// Vector field on an explicit branch. `coefs` holds the model
    /// coefficients only (no initial conditions).
    pub(crate) fn rhs_branch(&self, branch: usize, state: &[f64], coefs: &[f64], out: &mut [f64]) {
        let beta = self.beta_on_branch(coefs, branch);
        match self.kind {
            ModelKind::Sir => {
                let (s, i) = (state[0], state[1]);
                let infection = beta / self.n_pop * i * s;
                let recovery = coefs[1] * i;
                out[0] = -infection;
                out[1] = infection - recovery;
                out[2] = recovery;
            }
            ModelKind::Seird | ModelKind::Seirdz { .. } => {
                let (s, e, i) = (state[0], state[1], state[2]);
                let (r, d, inc) = (coefs[1], coefs[2], coefs[3]);
                let infection = beta / self.n_pop * i * s;
                let incubation = inc * e;
                let recovery = r * i;
                let death = d * i;
                out[0] = -infection;
                out[1] = infection - incubation;
                out[2] = incubation - recovery - death;
                out[3] = recovery;
                out[4] = death;
            }
        }
    }

    /// New-infection flux beta(t)/N_pop * I * S at time t (the incidence
    /// integrand), honoring the active branch.
    pub fn transmission_flux(&self, t: f64, state: &[f64], coefs: &[f64]) -> f64 {
        let beta = self.beta_on_branch(coefs, self.branch_at(t));
        let i_idx = match self.kind {
            ModelKind::Sir => 1,
            _ => 2,
        };
        beta / self.n_pop * state[i_idx] * state[0]
    }
}

fn names(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

// ---------------------------------------------------------------------------
// Parameter vectors
// ---------------------------------------------------------------------------

/// A named vector of scalars with optional per-entry bounds.
///
/// For a full model assignment the entries are the coefficients followed by
/// the initial conditions (theta = [p, q]); fitting code also uses the same
/// type for its free-parameter subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    names: Vec<String>,
    values: Vec<f64>,
    bounds: Vec<(f64, f64)>,
}

impl ParameterVector {
    /// Unbounded construction; names must be unique.
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); values.len()];
        Self::with_bounds(names, values, bounds)
    }

    /// Construction with per-entry closed bounds; every value must lie
    /// inside its interval.
    pub fn with_bounds(
        names: Vec<String>,
        values: Vec<f64>,
        bounds: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if names.len() != values.len() || names.len() != bounds.len() {
            return Err(Error::validation(
                "names, values and bounds must have equal length",
            ));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(Error::Validation(format!("duplicate parameter name '{a}'")));
            }
        }
        for ((n, &v), &(lo, hi)) in names.iter().zip(&values).zip(&bounds) {
            if !(lo <= v && v <= hi) {
                return Err(Error::Validation(format!(
                    "value {v} of '{n}' outside bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(ParameterVector {
            names,
            values,
            bounds,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    /// Overwrite an entry by name.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match self.names.iter().position(|n| n == name) {
            Some(i) => {
                self.values[i] = value;
                Ok(())
            }
            None => Err(Error::Validation(format!("no parameter named '{name}'"))),
        }
    }

    /// Split a full model assignment into (coefficients, initial conditions).
    pub fn split(&self, model: &ModelSpec) -> Result<(&[f64], &[f64])> {
        let (np, ns) = (model.n_params(), model.n_states());
        if self.len() != np + ns {
            return Err(Error::Validation(format!(
                "theta has {} entries, model '{}' needs {} coefficients + {} initial conditions",
                self.len(),
                model.name(),
                np,
                ns
            )));
        }
        let expected = model.theta_names();
        if self.names != expected {
            return Err(Error::Validation(format!(
                "theta names {:?} do not match model order {:?}",
                self.names, expected
            )));
        }
        Ok((&self.values[..np], &self.values[np..]))
    }
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

/// States on a time grid produced by [`integrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    /// One row per time, one column per compartment.
    states: Vec<Vec<f64>>,
    state_names: Vec<String>,
    model_ref: String,
    n_pop: f64,
    warnings: Vec<String>,
}

impl Trajectory {
    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }
    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }
    pub fn model_ref(&self) -> &str {
        &self.model_ref
    }
    pub fn n_pop(&self) -> f64 {
        self.n_pop
    }
    /// Diagnostic warnings collected during integration (states outside the
    /// admissible band). Never fatal.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn state_index(&self, label: &str) -> Result<usize> {
        self.state_names
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| Error::Validation(format!("trajectory has no state '{label}'")))
    }

    /// Copy of one compartment's values over the grid.
    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.states.iter().map(|row| row[idx]).collect()
    }

    /// Linear interpolation of the state at an interior time.
    pub fn state_at(&self, label: &str, t: f64) -> Result<f64> {
        let idx = self.state_index(label)?;
        let times = &self.times;
        if t < times[0] || t > *times.last().unwrap() {
            return Err(Error::Validation(format!(
                "time {t} outside trajectory range [{}, {}]",
                times[0],
                times.last().unwrap()
            )));
        }
        let j = match times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(j) => return Ok(self.states[j][idx]),
            Err(j) => j,
        };
        let (t0, t1) = (times[j - 1], times[j]);
        let w = (t - t0) / (t1 - t0);
        Ok(self.states[j - 1][idx] * (1.0 - w) + self.states[j][idx] * w)
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Evaluate the vector field f(X, p) at one point, using the branch active
/// at time t (for SEIRDz, beta(t) = beta1 for t <= t_lock and beta1 - z
/// after).
pub fn evaluate_rhs(
    model: &ModelSpec,
    state: &[f64],
    t: f64,
    theta: &ParameterVector,
) -> Result<Vec<f64>> {
    if state.len() != model.n_states() {
        return Err(Error::Validation(format!(
            "state has {} entries, model '{}' has {} compartments",
            state.len(),
            model.name(),
            model.n_states()
        )));
    }
    let (coefs, _) = theta.split(model)?;
    let mut out = vec![0.0; state.len()];
    model.rhs_branch(model.branch_at(t), state, coefs, &mut out);
    Ok(out)
}

/// Integrate the model on a requested output grid with an adaptive embedded
/// Runge–Kutta 4(5) pair (Dormand–Prince) and dense output.
///
/// Integration starts at t = 0 from the initial conditions in `theta` and
/// restarts exactly at each switch time so branch changes are never smoothed
/// over. Output times must be strictly increasing and nonnegative.
pub fn integrate(
    model: &ModelSpec,
    theta: &ParameterVector,
    t_out: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Trajectory> {
    if !(rtol > 0.0) || !(atol > 0.0) {
        return Err(Error::validation("rtol and atol must be positive"));
    }
    if t_out.is_empty() {
        return Err(Error::validation("output grid is empty"));
    }
    if t_out[0] < 0.0 {
        return Err(Error::validation(
            "output times must be >= 0 (integration starts at t = 0)",
        ));
    }
    for w in t_out.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::validation(
                "output times must be strictly increasing",
            ));
        }
    }
    let (coefs, ics) = theta.split(model)?;
    let (states, warnings) = solver::solve(model, coefs, ics, t_out, rtol, atol)?;
    Ok(Trajectory {
        times: t_out.to_vec(),
        states,
        state_names: model.state_names.clone(),
        model_ref: model.name.clone(),
        n_pop: model.n_pop,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sir_theta(beta: f64, r: f64, ics: [f64; 3]) -> (ModelSpec, ParameterVector) {
        let model = ModelSpec::sir(1.0);
        let theta = model
            .full_theta(&[
                ("beta", beta),
                ("r", r),
                ("S0", ics[0]),
                ("I0", ics[1]),
                ("R0", ics[2]),
            ])
            .unwrap();
        (model, theta)
    }

    #[test]
    fn sir_rhs_matches_hand_arithmetic() {
        let (model, theta) = sir_theta(0.3, 0.1, [0.95, 0.05, 0.0]);
        let f = evaluate_rhs(&model, &[0.95, 0.05, 0.0], 0.0, &theta).unwrap();
        assert!((f[0] - (-0.01425)).abs() < 1e-15);
        assert!((f[1] - 0.00925).abs() < 1e-15);
        assert!((f[2] - 0.005).abs() < 1e-15);
    }

    #[test]
    fn disease_free_equilibrium_is_stationary() {
        let (model, theta) = sir_theta(0.3, 0.1, [1.0, 0.0, 0.0]);
        let f = evaluate_rhs(&model, &[1.0, 0.0, 0.0], 5.0, &theta).unwrap();
        assert_eq!(f, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn rhs_components_sum_to_zero() {
        // flux-difference form conserves the population up to rounding of
        // the component entries; a few ulps at most
        let (model, theta) = sir_theta(0.29, 0.09, [0.95, 0.05, 0.0]);
        let f = evaluate_rhs(&model, &[0.6, 0.3, 0.1], 0.0, &theta).unwrap();
        let sum: f64 = f.iter().sum();
        let scale = f.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        assert!(sum.abs() <= 4.0 * f64::EPSILON * scale, "sum {sum:e}");
    }

    #[test]
    fn seirdz_switches_at_lockdown() {
        let model = ModelSpec::seirdz(1.0, 15.0);
        let theta = model
            .full_theta(&[
                ("beta1", 0.28),
                ("r", 0.11),
                ("d", 0.018),
                ("i", 0.18),
                ("z", 0.18),
                ("S0", 0.95),
                ("E0", 0.04),
                ("I0", 0.01),
                ("R0", 0.0),
                ("D0", 0.0),
            ])
            .unwrap();
        let state = [0.9, 0.05, 0.03, 0.01, 0.01];
        let before = evaluate_rhs(&model, &state, 15.0, &theta).unwrap();
        let after = evaluate_rhs(&model, &state, 16.0, &theta).unwrap();
        // dS = -beta(t) * I * S; effective beta drops from 0.28 to 0.10
        assert!((before[0] - (-0.28 * 0.03 * 0.9)).abs() < 1e-15);
        assert!((after[0] - (-0.10 * 0.03 * 0.9)).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (model, theta) = sir_theta(0.3, 0.1, [0.95, 0.05, 0.0]);
        assert!(matches!(
            evaluate_rhs(&model, &[1.0, 0.0], 0.0, &theta),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn unknown_model_name_is_rejected() {
        assert!(matches!(
            ModelSpec::by_name("sis", 1.0, None),
            Err(Error::Validation(_))
        ));
        assert!(ModelSpec::by_name("seirdz", 1.0, None).is_err());
    }

    #[test]
    fn linear_decay_matches_closed_form() {
        // beta = 0 decouples I: I(t) = I0 exp(-r t)
        let (model, theta) = sir_theta(0.0, 0.1, [0.95, 0.05, 0.0]);
        let t_out: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let traj = integrate(&model, &theta, &t_out, DEFAULT_RTOL, DEFAULT_ATOL).unwrap();
        let i10 = traj.states()[9][1];
        assert!(
            (i10 - 0.05 * (-1.0_f64).exp()).abs() < 1e-7,
            "I(10) = {i10}"
        );
    }

    #[test]
    fn population_is_conserved_along_the_trajectory() {
        let (model, theta) = sir_theta(0.29, 0.09, [0.95, 0.05, 0.0]);
        let t_out: Vec<f64> = (0..=150).map(|k| k as f64).collect();
        let traj = integrate(&model, &theta, &t_out, DEFAULT_RTOL, DEFAULT_ATOL).unwrap();
        for row in traj.states() {
            let total: f64 = row.iter().sum();
            assert!((total - 1.0).abs() <= 1e-8, "sum = {total}");
        }
    }

    #[test]
    fn integration_is_deterministic() {
        let (model, theta) = sir_theta(0.29, 0.09, [0.95, 0.05, 0.0]);
        let t_out: Vec<f64> = (0..=60).map(|k| k as f64 * 2.5).collect();
        let a = integrate(&model, &theta, &t_out, DEFAULT_RTOL, DEFAULT_ATOL).unwrap();
        let b = integrate(&model, &theta, &t_out, DEFAULT_RTOL, DEFAULT_ATOL).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn halving_tolerances_moves_solution_less_than_coarse_tolerance() {
        let (model, theta) = sir_theta(0.29, 0.09, [0.95, 0.05, 0.0]);
        let t_out: Vec<f64> = (1..=30).map(|k| k as f64 * 5.0).collect();
        let coarse = integrate(&model, &theta, &t_out, 1e-6, 1e-9).unwrap();
        let fine = integrate(&model, &theta, &t_out, 5e-7, 5e-10).unwrap();
        for (a, b) in coarse.states().iter().zip(fine.states()) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn peak_time_agrees_with_fixed_step_reference() {
        // independent oracle: classical RK4 with step 1e-3
        let (model, theta) = sir_theta(0.29, 0.09, [0.95, 0.05, 0.0]);
        let mut y = [0.95_f64, 0.05, 0.0];
        let h = 1e-3;
        let mut best = (0.0, y[1]);
        let rhs = |y: &[f64; 3]| {
            let inf = 0.29 * y[1] * y[0];
            [-inf, inf - 0.09 * y[1], 0.09 * y[1]]
        };
        let mut t = 0.0;
        while t < 100.0 {
            let k1 = rhs(&y);
            let y2 = [
                y[0] + 0.5 * h * k1[0],
                y[1] + 0.5 * h * k1[1],
                y[2] + 0.5 * h * k1[2],
            ];
            let k2 = rhs(&y2);
            let y3 = [
                y[0] + 0.5 * h * k2[0],
                y[1] + 0.5 * h * k2[1],
                y[2] + 0.5 * h * k2[2],
            ];
            let k3 = rhs(&y3);
            let y4 = [y[0] + h * k3[0], y[1] + h * k3[1], y[2] + h * k3[2]];
            let k4 = rhs(&y4);
            for j in 0..3 {
                y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            t += h;
            if y[1] > best.1 {
                best = (t, y[1]);
            }
        }

        let t_out: Vec<f64> = (0..=400).map(|k| k as f64 * 0.25).collect();
        let traj = integrate(&model, &theta, &t_out, DEFAULT_RTOL, DEFAULT_ATOL).unwrap();
        let i_col = traj.column(1);
        let arg = i_col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap();
        let (tp, _) = crate::math::parabola_vertex(
            (t_out[arg - 1], i_col[arg - 1]),
            (t_out[arg], i_col[arg]),
            (t_out[arg + 1], i_col[arg + 1]),
        );
        assert!(
            (tp - best.0).abs() < 0.05,
            "peak {tp} vs reference {}",
            best.0
        );
    }

    #[test]
    fn seirdz_integration_restarts_at_lockdown() {
        let model = ModelSpec::seirdz(1.0, 15.0);
        let theta = model
            .full_theta(&[
                ("beta1", 0.28),
                ("r", 0.11),
                ("d", 0.018),
                ("i", 0.18),
                ("z", 0.18),
                ("S0", 0.95),
                ("E0", 0.04),
                ("I0", 0.01),
                ("R0", 0.0),
                ("D0", 0.0),
            ])
            .unwrap();
        let t_out: Vec<f64> = (0..=100).map(|k| k as f64).collect();
        let traj = integrate(&model, &theta, &t_out, DEFAULT_RTOL, DEFAULT_ATOL).unwrap();
        for row in traj.states() {
            let total: f64 = row.iter().sum();
            assert!((total - 1.0).abs() <= 1e-8);
        }
        // S declines faster before lockdown than after it given the beta drop
        let s = traj.column(0);
        let drop_before = s[14] - s[15];
        let drop_after = s[20] - s[21];
        assert!(drop_before > drop_after);
    }
}
