//! Likelihood construction and maximum-likelihood / MAP estimation.
//!
//! The negative log-likelihood follows the -2 log L convention with all
//! constants retained, so values are comparable across different noise
//! plug-ins (the lambda sweep depends on this). Optimization minimizes the
//! equivalent sum-of-squares form by Nelder–Mead from multiple seeded
//! starts, with bounds handled by a coordinate-wise logit map onto the
//! prior box.
//!
//! The reported Fisher matrix H is the curvature of -log L (half of the
//! -2 log L curvature): this is the convention under which the
//! finite-difference route and the Jacobian-Gram route H ~ (1/sigma^2) J^T J
//! agree, and under which Sigma_G = H^{-1} is the classical asymptotic
//! covariance sigma^2 (J^T J)^{-1}.

pub mod nelder_mead;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::math::{linalg, pairwise_sum};
use crate::model::{ModelSpec, ParameterVector};
use crate::observe::{Dataset, ObservationOperator, ParamMap};
use crate::par::par_map_idx;
use crate::rng::{mix_seed, DetRng};
use crate::sample::GaussianPosterior;

use nelder_mead::{minimize, NmOptions};

#[allow(unused_imports)]
use num_traits::Float;

/// Relative eigenvalue floor for inverting the Fisher matrix.
pub const EIGENVALUE_FLOOR: f64 = 1e-10;

/// One free parameter of a fit, with its prior-box bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeParam {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl FreeParam {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        FreeParam {
            name: name.into(),
            lo,
            hi,
        }
    }
}

/// Treatment of the observation-noise standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaMode {
    /// Per-series known sigma.
    Known(Vec<f64>),
    /// One common sigma, profiled out as the sample variance of the misfits.
    ProfiledCommon,
    /// Two series with unknown variance ratio, resolved by a lambda sweep.
    ProfiledTwo { lambda_grid: Vec<f64> },
}

/// Prior over the free parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorKind {
    UniformBox,
    /// Independent Gaussians, one (mean, sd) per free parameter. Requires a
    /// known sigma mode (the Tikhonov weight is sigma^2 / s_i^2).
    Gaussian {
        means: Vec<f64>,
        sds: Vec<f64>,
    },
}

/// Everything needed to evaluate the likelihood of a model against data.
#[derive(Debug, Clone)]
pub struct LikelihoodSpec {
    map: ParamMap,
    pub data: Dataset,
    pub free: Vec<FreeParam>,
    pub sigma_mode: SigmaMode,
    pub prior: PriorKind,
    rtol: f64,
    atol: f64,
    /// NLL contribution of parameters fixed by profiling (their Gaussian
    /// prior penalty, when present).
    nll_offset: f64,
}

impl LikelihoodSpec {
    pub fn new(
        model: ModelSpec,
        base: ParameterVector,
        ops: Vec<ObservationOperator>,
        data: Dataset,
        free: Vec<FreeParam>,
        sigma_mode: SigmaMode,
        prior: PriorKind,
    ) -> Result<Self> {
        if ops.len() != data.series.len() {
            return Err(Error::Validation(format!(
                "{} operators for {} data series",
                ops.len(),
                data.series.len()
            )));
        }
        for p in &free {
            if !(p.lo.is_finite() && p.hi.is_finite() && p.lo < p.hi) {
                return Err(Error::Validation(format!(
                    "free parameter '{}' needs finite bounds with lo < hi",
                    p.name
                )));
            }
        }
        match &sigma_mode {
            SigmaMode::Known(sigmas) => {
                if sigmas.len() != data.series.len() {
                    return Err(Error::validation("one known sigma per series is required"));
                }
                if sigmas.iter().any(|s| !(*s > 0.0)) {
                    return Err(Error::validation("known sigmas must be positive"));
                }
            }
            SigmaMode::ProfiledCommon => {}
            SigmaMode::ProfiledTwo { lambda_grid } => {
                if data.series.len() != 2 {
                    return Err(Error::validation(
                        "profiled_two requires exactly two series",
                    ));
                }
                if lambda_grid.is_empty() {
                    return Err(Error::validation("lambda grid is empty"));
                }
                let mut prev = 0.0;
                for &l in lambda_grid {
                    if !(l > prev) {
                        return Err(Error::validation(
                            "lambda grid must be positive and increasing",
                        ));
                    }
                    prev = l;
                }
            }
        }
        if let PriorKind::Gaussian { means, sds } = &prior {
            if means.len() != free.len() || sds.len() != free.len() {
                return Err(Error::validation(
                    "gaussian prior needs one (mean, sd) per free parameter",
                ));
            }
            if sds.iter().any(|s| !(*s > 0.0)) {
                return Err(Error::validation("gaussian prior sds must be positive"));
            }
            if !matches!(sigma_mode, SigmaMode::Known(_)) {
                return Err(Error::validation(
                    "gaussian prior requires known sigmas (the penalty weight is sigma^2/s^2)",
                ));
            }
        }
        let free_names = free.iter().map(|p| p.name.clone()).collect();
        let map = ParamMap::new(model, base, ops, free_names)?;
        Ok(LikelihoodSpec {
            map,
            data,
            free,
            sigma_mode,
            prior,
            rtol: crate::model::DEFAULT_RTOL,
            atol: crate::model::DEFAULT_ATOL,
            nll_offset: 0.0,
        })
    }

    pub fn map(&self) -> &ParamMap {
        &self.map
    }
    pub fn model(&self) -> &ModelSpec {
        self.map.model()
    }
    pub fn n_series(&self) -> usize {
        self.data.series.len()
    }
    pub fn n_points(&self) -> usize {
        self.data.n_points()
    }
    pub fn free_names(&self) -> Vec<String> {
        self.free.iter().map(|p| p.name.clone()).collect()
    }
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.free.iter().map(|p| (p.lo, p.hi)).collect()
    }

    /// Integration tolerances used for likelihood evaluations.
    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    /// Per-series sums of squared misfits at the given free values.
    pub fn ss_per_series(&self, free_values: &[f64]) -> Result<Vec<f64>> {
        let (theta, ops) = self.map.resolve(free_values)?;
        let union = self.data.time_union();
        if union.is_empty() {
            return Ok(vec![0.0; self.n_series()]);
        }
        let traj = crate::model::integrate(self.model(), &theta, &union, self.rtol, self.atol)?;
        let mut out = Vec::with_capacity(self.n_series());
        for (s, op) in self.data.series.iter().zip(&ops) {
            let full = crate::observe::observe(self.model(), &traj, op, &theta)?.into_series()?;
            let sq: Vec<f64> = s
                .points
                .iter()
                .map(|(t, v)| {
                    let j = union
                        .binary_search_by(|x| x.total_cmp(t))
                        .expect("series time missing from union grid");
                    let m = v - full[j];
                    m * m
                })
                .collect();
            out.push(pairwise_sum(&sq));
        }
        Ok(out)
    }

    /// Gaussian-prior penalty sum((x_i - mean_i)^2 / sd_i^2); zero for the
    /// uniform box.
    fn prior_penalty(&self, free_values: &[f64]) -> f64 {
        match &self.prior {
            PriorKind::UniformBox => 0.0,
            PriorKind::Gaussian { means, sds } => {
                let mut p = 0.0;
                for ((x, m), s) in free_values.iter().zip(means).zip(sds) {
                    let z = (x - m) / s;
                    p += z * z;
                }
                p
            }
        }
    }

    /// Full negative log-likelihood (-2 log L convention, constants kept):
    /// sum over series of N_s log(2 pi sigma_s^2) + SS_s / sigma_s^2, plus
    /// the Gaussian-prior penalty when one is configured.
    pub fn nll_with_sigmas(&self, free_values: &[f64], sigmas: &[f64]) -> Result<f64> {
        if sigmas.len() != self.n_series() {
            return Err(Error::validation("one sigma per series is required"));
        }
        let ss = self.ss_per_series(free_values)?;
        let mut total = self.nll_offset + self.prior_penalty(free_values);
        for ((s, &sigma), series) in ss.iter().zip(sigmas).zip(&self.data.series) {
            if !(sigma > 0.0) {
                return Err(Error::validation("sigmas must be positive"));
            }
            let n = series.points.len() as f64;
            total += n * (2.0 * core::f64::consts::PI * sigma * sigma).ln() + s / (sigma * sigma);
        }
        Ok(total)
    }

    /// Full NLL using the spec's own sigma treatment: known sigmas directly,
    /// or the profiled-common plug-in sigma at these free values.
    pub fn nll(&self, free_values: &[f64]) -> Result<f64> {
        match &self.sigma_mode {
            SigmaMode::Known(sigmas) => self.nll_with_sigmas(free_values, &sigmas.clone()),
            SigmaMode::ProfiledCommon => {
                let sig = sigma_mle(self, free_values)?;
                self.nll_with_sigmas(free_values, &sig)
            }
            SigmaMode::ProfiledTwo { .. } => Err(Error::validation(
                "profiled_two sigma mode is resolved by lambda_sweep, not nll",
            )),
        }
    }

    /// Optimization objective (monotone in the likelihood for fixed sigma
    /// treatment): weighted sum of squares plus any prior penalty.
    /// Integration failures map to +inf so the optimizer can move away.
    pub(crate) fn objective(&self, free_values: &[f64]) -> f64 {
        let ss = match self.ss_per_series(free_values) {
            Ok(v) => v,
            Err(_) => return f64::INFINITY,
        };
        match &self.sigma_mode {
            SigmaMode::Known(sigmas) => {
                let mut total = self.prior_penalty(free_values);
                for (s, sigma) in ss.iter().zip(sigmas) {
                    total += s / (sigma * sigma);
                }
                total
            }
            SigmaMode::ProfiledCommon => pairwise_sum(&ss),
            SigmaMode::ProfiledTwo { .. } => f64::INFINITY,
        }
    }

    /// Weighted two-series objective T = SS_0 + lambda SS_1 for the sweep.
    fn objective_lambda(&self, free_values: &[f64], lambda: f64) -> f64 {
        match self.ss_per_series(free_values) {
            Ok(ss) => ss[0] + lambda * ss[1],
            Err(_) => f64::INFINITY,
        }
    }

    fn objective_to_nll(&self, free_values: &[f64]) -> f64 {
        self.nll(free_values).unwrap_or(f64::INFINITY)
    }

    /// Spec with one free parameter pinned at a value; any Gaussian-prior
    /// penalty of the pinned parameter is kept as a constant NLL offset so
    /// profile curves remain on the same scale.
    pub fn reduced(&self, name: &str, value: f64) -> Result<LikelihoodSpec> {
        let pos = self
            .free
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| Error::Validation(format!("'{name}' is not a free parameter")))?;
        let map = self.map.fix(name, value)?;
        let mut free = self.free.clone();
        free.remove(pos);
        let mut offset = self.nll_offset;
        let prior = match &self.prior {
            PriorKind::UniformBox => PriorKind::UniformBox,
            PriorKind::Gaussian { means, sds } => {
                let z = (value - means[pos]) / sds[pos];
                offset += z * z;
                let mut means = means.clone();
                let mut sds = sds.clone();
                means.remove(pos);
                sds.remove(pos);
                PriorKind::Gaussian { means, sds }
            }
        };
        Ok(LikelihoodSpec {
            map,
            data: self.data.clone(),
            free,
            sigma_mode: self.sigma_mode.clone(),
            prior,
            rtol: self.rtol,
            atol: self.atol,
            nll_offset: offset,
        })
    }
}

// ---------------------------------------------------------------------------
// Bounds reparameterization
// ---------------------------------------------------------------------------

fn stable_sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn to_bounded(u: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    u.iter()
        .zip(bounds)
        .map(|(&ui, &(lo, hi))| lo + (hi - lo) * stable_sigmoid(ui))
        .collect()
}

pub(crate) fn to_unbounded(x: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    x.iter()
        .zip(bounds)
        .map(|(&xi, &(lo, hi))| {
            let f = ((xi - lo) / (hi - lo)).clamp(1e-12, 1.0 - 1e-12);
            (f / (1.0 - f)).ln()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Fit results
// ---------------------------------------------------------------------------

/// One optimizer restart: where it started, where it ended, the full NLL of
/// the end point.
#[derive(Debug, Clone)]
pub struct Restart {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub nll: f64,
    pub converged: bool,
    pub iters: usize,
}

/// Which curvature route produced the stored Fisher matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianRoute {
    FiniteDifference,
    JacobianGram,
}

/// Maximum-likelihood estimation output.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub names: Vec<String>,
    pub theta_mle: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
    /// Full NLL (-2 log L, constants kept) at the optimum.
    pub nll_value: f64,
    /// Per-series noise estimate (known values echoed back in known mode).
    pub sigma_hat: Vec<f64>,
    /// Fisher matrix: curvature of -log L at the optimum.
    pub hessian: DMatrix<f64>,
    /// Regularized inverse of the Fisher matrix.
    pub covariance: DMatrix<f64>,
    pub hessian_route: HessianRoute,
    pub restart_log: Vec<Restart>,
    pub flags: Vec<String>,
    /// Near-null curvature eigenvectors, filled when flagged.
    pub weak_directions: Vec<Vec<f64>>,
    /// Selected variance ratio, for lambda-sweep fits.
    pub lambda: Option<f64>,
}

/// Optimizer and derivative-step options.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub f_tol: f64,
    pub x_tol: f64,
    pub hessian_rel_step: f64,
    pub jacobian_rel_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 20,
            seed: 0,
            max_iters: 2000,
            f_tol: 1e-10,
            x_tol: 1e-8,
            hessian_rel_step: 1e-4,
            jacobian_rel_step: 1e-5,
        }
    }
}

impl FitOptions {
    fn nm(&self) -> NmOptions {
        NmOptions {
            max_iters: self.max_iters,
            f_tol: self.f_tol,
            x_tol: self.x_tol,
        }
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Multi-restart maximum-likelihood (or MAP, with a Gaussian prior).
///
/// Starts are drawn uniformly in the prior box from the seed; each restart
/// minimizes the sum-of-squares form by Nelder–Mead in logit coordinates.
/// The best final (ties broken by lowest restart index) is polished into a
/// full [`FitResult`]: profiled sigmas, finite-difference Fisher matrix at
/// tightened integration tolerances, and its regularized inverse.
pub fn mle(spec: &LikelihoodSpec, opts: &FitOptions) -> Result<FitResult> {
    if let SigmaMode::ProfiledTwo { .. } = spec.sigma_mode {
        return Ok(lambda_sweep(spec, opts)?.fit);
    }
    if opts.restarts == 0 {
        return Err(Error::validation("at least one restart is required"));
    }
    let k = spec.free.len();
    if k == 0 {
        return Err(Error::validation("no free parameters to fit"));
    }
    let bounds = spec.bounds();

    let mut rng = DetRng::with_stream(opts.seed, 0xF17);
    let starts: Vec<Vec<f64>> = (0..opts.restarts)
        .map(|_| {
            bounds
                .iter()
                .map(|&(lo, hi)| rng.uniform_in(lo, hi))
                .collect()
        })
        .collect();

    let restarts: Vec<Restart> = par_map_idx(opts.restarts, |i| {
        let u0 = to_unbounded(&starts[i], &bounds);
        let res = minimize(|u| spec.objective(&to_bounded(u, &bounds)), &u0, &opts.nm());
        let end = to_bounded(&res.x, &bounds);
        let nll = spec.objective_to_nll(&end);
        Restart {
            start: starts[i].clone(),
            end,
            nll,
            converged: res.converged,
            iters: res.iters,
        }
    });

    if restarts.iter().all(|r| !r.nll.is_finite()) {
        return Err(Error::Optimization(
            "every restart failed (non-finite NLL everywhere)".into(),
        ));
    }
    let best = restarts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.nll.total_cmp(&b.1.nll))
        .map(|(i, _)| i)
        .unwrap();
    let theta = restarts[best].end.clone();

    let sigma_hat = sigma_mle(spec, &theta)?;
    finalize_fit(spec, theta, sigma_hat, restarts, None, opts)
}

/// MAP estimation with a Gaussian prior (Tikhonov-regularized least
/// squares). Thin wrapper over [`mle`] that insists on the prior.
pub fn map_gaussian_prior(spec: &LikelihoodSpec, opts: &FitOptions) -> Result<FitResult> {
    match spec.prior {
        PriorKind::Gaussian { .. } => mle(spec, opts),
        PriorKind::UniformBox => Err(Error::validation(
            "map_gaussian_prior requires a gaussian prior",
        )),
    }
}

/// Plug-in noise estimate at a parameter point.
///
/// Known mode echoes the configured sigmas. Profiled-common pools every
/// series: sigma^2 = SS_total / N_total, replicated per series.
pub fn sigma_mle(spec: &LikelihoodSpec, free_values: &[f64]) -> Result<Vec<f64>> {
    if spec.n_points() == 0 {
        return Err(Error::Degenerate("no data points".into()));
    }
    match &spec.sigma_mode {
        SigmaMode::Known(sigmas) => Ok(sigmas.clone()),
        SigmaMode::ProfiledCommon => {
            let ss = spec.ss_per_series(free_values)?;
            let sigma = (pairwise_sum(&ss) / spec.n_points() as f64).sqrt();
            Ok(vec![sigma; spec.n_series()])
        }
        SigmaMode::ProfiledTwo { .. } => Err(Error::validation(
            "profiled_two sigmas come from lambda_sweep",
        )),
    }
}

fn finalize_fit(
    spec: &LikelihoodSpec,
    theta: Vec<f64>,
    sigma_hat: Vec<f64>,
    restart_log: Vec<Restart>,
    lambda: Option<f64>,
    opts: &FitOptions,
) -> Result<FitResult> {
    // tightened tolerances keep integrator noise out of the second
    // differences
    let tight = spec
        .clone()
        .with_tolerances(spec.rtol * 1e-3, spec.atol * 1e-3);
    let sig = sigma_hat.clone();
    let half_nll = |x: &[f64]| -> f64 { 0.5 * tight.nll_with_sigmas(x, &sig).unwrap_or(f64::NAN) };
    let hessian = fd_hessian(half_nll, &theta, opts.hessian_rel_step)?;
    let reg = linalg::regularized_inverse(&hessian, EIGENVALUE_FLOOR)?;

    let mut flags = Vec::new();
    if !reg.floored.is_empty() {
        flags.push(format!(
            "ill-conditioned: possible non-identifiability ({} near-null curvature direction(s))",
            reg.floored.len()
        ));
    }
    let nll_value = spec.nll_with_sigmas(&theta, &sigma_hat)?;

    Ok(FitResult {
        names: spec.free_names(),
        theta_mle: theta,
        bounds: spec.bounds(),
        nll_value,
        sigma_hat,
        hessian,
        covariance: reg.inverse,
        hessian_route: HessianRoute::FiniteDifference,
        restart_log,
        flags,
        weak_directions: reg.weak_directions,
        lambda,
    })
}

/// Centered-finite-difference Hessian of a scalar function, symmetrized.
///
/// Step per coordinate: max(rel_step |x_i|, rel_step * 1e-2).
pub fn fd_hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], rel_step: f64) -> Result<DMatrix<f64>> {
    let n = x.len();
    let h: Vec<f64> = x
        .iter()
        .map(|v| (rel_step * v.abs()).max(rel_step * 1e-2))
        .collect();
    let f0 = f(x);
    if !f0.is_finite() {
        return Err(Error::Degenerate(
            "objective not finite at the expansion point".into(),
        ));
    }
    let eval = |p: &[f64]| -> Result<f64> {
        let v = f(p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Degenerate(
                "objective not finite within the difference stencil".into(),
            ))
        }
    };
    let mut m = DMatrix::zeros(n, n);
    let mut p = x.to_vec();
    for i in 0..n {
        p[i] = x[i] + h[i];
        let fp = eval(&p)?;
        p[i] = x[i] - h[i];
        let fm = eval(&p)?;
        p[i] = x[i];
        m[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in (i + 1)..n {
            p[i] = x[i] + h[i];
            p[j] = x[j] + h[j];
            let fpp = eval(&p)?;
            p[j] = x[j] - h[j];
            let fpm = eval(&p)?;
            p[i] = x[i] - h[i];
            let fmm = eval(&p)?;
            p[j] = x[j] + h[j];
            let fmp = eval(&p)?;
            p[i] = x[i];
            p[j] = x[j];
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(0.5 * (&m + m.transpose()))
}

/// Jacobian-Gram Fisher matrix: H ~ sum_s (1/sigma_s^2) J_s^T J_s with J the
/// centered differences of the scaled model predictions. Always symmetric
/// positive semidefinite.
pub fn fisher_jacobian(
    spec: &LikelihoodSpec,
    theta: &[f64],
    sigma_hat: &[f64],
    rel_step: f64,
) -> Result<DMatrix<f64>> {
    if sigma_hat.len() != spec.n_series() {
        return Err(Error::validation("one sigma per series is required"));
    }
    let tight = spec
        .clone()
        .with_tolerances(spec.rtol * 1e-3, spec.atol * 1e-3);
    let k = theta.len();
    let h: Vec<f64> = theta
        .iter()
        .map(|v| (rel_step * v.abs()).max(rel_step * 1e-2))
        .collect();

    // predictions per series, aligned with data times
    let predict = |x: &[f64]| -> Result<Vec<Vec<f64>>> {
        let (full_theta, ops) = tight.map.resolve(x)?;
        let union = tight.data.time_union();
        let traj =
            crate::model::integrate(tight.model(), &full_theta, &union, tight.rtol, tight.atol)?;
        tight
            .data
            .series
            .iter()
            .zip(&ops)
            .map(|(s, op)| {
                let full = crate::observe::observe(tight.model(), &traj, op, &full_theta)?
                    .into_series()?;
                Ok(s.points
                    .iter()
                    .map(|(t, _)| {
                        let j = union
                            .binary_search_by(|x| x.total_cmp(t))
                            .expect("series time in union");
                        full[j]
                    })
                    .collect())
            })
            .collect()
    };

    // J columns by centered differences
    let mut columns = Vec::with_capacity(k);
    let mut p = theta.to_vec();
    for i in 0..k {
        p[i] = theta[i] + h[i];
        let plus = predict(&p)?;
        p[i] = theta[i] - h[i];
        let minus = predict(&p)?;
        p[i] = theta[i];
        let col: Vec<Vec<f64>> = plus
            .iter()
            .zip(&minus)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) / (2.0 * h[i]))
                    .collect()
            })
            .collect();
        columns.push(col);
    }

    let mut m = DMatrix::zeros(k, k);
    for (si, sigma) in sigma_hat.iter().enumerate() {
        if !(*sigma > 0.0) {
            return Err(Error::validation("sigmas must be positive"));
        }
        let w = 1.0 / (sigma * sigma);
        let n_pts = columns[0][si].len();
        for a in 0..k {
            for b in a..k {
                let mut acc = 0.0;
                for pt in 0..n_pts {
                    acc += columns[a][si][pt] * columns[b][si][pt];
                }
                m[(a, b)] += w * acc;
                if a != b {
                    m[(b, a)] = m[(a, b)];
                }
            }
        }
    }
    Ok(m)
}

/// Gaussian (Fisher) approximation of the posterior from a fit.
///
/// The mean is the MLE and the covariance the regularized inverse Fisher
/// matrix; ill-conditioning is carried over as a flag with the offending
/// directions rather than an error.
pub fn gaussian_posterior(fit: &FitResult, bounds: &[(f64, f64)]) -> Result<GaussianPosterior> {
    if bounds.len() != fit.theta_mle.len() {
        return Err(Error::validation(
            "one bound pair per parameter is required",
        ));
    }
    Ok(GaussianPosterior {
        mean: fit.theta_mle.clone(),
        covariance: fit.covariance.clone(),
        bounds: bounds.to_vec(),
        names: fit.names.clone(),
        flags: fit.flags.clone(),
        weak_directions: fit.weak_directions.clone(),
    })
}

// ---------------------------------------------------------------------------
// Lambda sweep (two series with unknown variance ratio)
// ---------------------------------------------------------------------------

/// Per-lambda record of the sweep.
#[derive(Debug, Clone)]
pub struct LambdaPoint {
    pub lambda: f64,
    pub t_min: f64,
    pub nll: f64,
    pub theta: Vec<f64>,
    pub sigma_first: f64,
    pub sigma_second: f64,
}

/// Result of [`lambda_sweep`].
#[derive(Debug, Clone)]
pub struct LambdaSweep {
    pub lambda_min: f64,
    pub fit: FitResult,
    /// Plug-in noise of the first series at lambda_min.
    pub sigma_first: f64,
    /// Plug-in noise of the second series: sqrt(sigma_first^2 / lambda_min).
    pub sigma_second: f64,
    pub curve: Vec<LambdaPoint>,
}

/// Weighted least-squares scan over the variance ratio lambda =
/// sigma_1^2 / sigma_2^2 of two data series.
///
/// For each lambda the objective T = SS_1 + lambda SS_2 is minimized by
/// multi-restart Nelder–Mead; the plug-ins sigma_1^2 = T_min / N_total and
/// sigma_2^2 = sigma_1^2 / lambda are then scored by the full NLL, and the
/// lambda with the smallest NLL wins. Grid points are independent (parallel
/// safe); restarts are re-seeded per lambda.
pub fn lambda_sweep(spec: &LikelihoodSpec, opts: &FitOptions) -> Result<LambdaSweep> {
    let grid = match &spec.sigma_mode {
        SigmaMode::ProfiledTwo { lambda_grid } => lambda_grid.clone(),
        _ => {
            return Err(Error::validation(
                "lambda_sweep requires the profiled_two sigma mode",
            ))
        }
    };
    if opts.restarts == 0 {
        return Err(Error::validation("at least one restart is required"));
    }
    let bounds = spec.bounds();
    let n_tot = spec.n_points() as f64;

    struct PerLambda {
        point: LambdaPoint,
        restarts: Vec<Restart>,
    }

    let evaluated: Vec<Result<PerLambda>> = par_map_idx(grid.len(), |gi| {
        let lambda = grid[gi];
        let mut rng = DetRng::with_stream(mix_seed(opts.seed, gi as u64), 0x1AB);
        let starts: Vec<Vec<f64>> = (0..opts.restarts)
            .map(|_| {
                bounds
                    .iter()
                    .map(|&(lo, hi)| rng.uniform_in(lo, hi))
                    .collect()
            })
            .collect();
        let mut restarts = Vec::with_capacity(opts.restarts);
        for s in &starts {
            let u0 = to_unbounded(s, &bounds);
            let res = minimize(
                |u| spec.objective_lambda(&to_bounded(u, &bounds), lambda),
                &u0,
                &opts.nm(),
            );
            let end = to_bounded(&res.x, &bounds);
            restarts.push(Restart {
                start: s.clone(),
                end,
                nll: res.fx, // T value here; rescored below
                converged: res.converged,
                iters: res.iters,
            });
        }
        let best = restarts
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.nll.total_cmp(&b.1.nll))
            .map(|(i, _)| i)
            .unwrap();
        let t_min = restarts[best].nll;
        if !t_min.is_finite() {
            return Err(Error::Optimization(format!(
                "every restart failed at lambda = {lambda}"
            )));
        }
        let theta = restarts[best].end.clone();
        let sigma1 = (t_min / n_tot).sqrt();
        let sigma2 = (sigma1 * sigma1 / lambda).sqrt();
        let nll = spec.nll_with_sigmas(&theta, &[sigma1, sigma2])?;
        // restart log on the NLL scale of this lambda's plug-ins
        for r in restarts.iter_mut() {
            if r.nll.is_finite() {
                let s1 = (r.nll / n_tot).sqrt();
                let s2 = (s1 * s1 / lambda).sqrt();
                r.nll = spec
                    .nll_with_sigmas(&r.end, &[s1, s2])
                    .unwrap_or(f64::INFINITY);
            }
        }
        Ok(PerLambda {
            point: LambdaPoint {
                lambda,
                t_min,
                nll,
                theta,
                sigma_first: sigma1,
                sigma_second: sigma2,
            },
            restarts,
        })
    });

    let mut curve = Vec::with_capacity(grid.len());
    let mut per_lambda = Vec::with_capacity(grid.len());
    let mut n_failed = 0usize;
    for e in evaluated {
        match e {
            Ok(p) => {
                curve.push(p.point.clone());
                per_lambda.push(p);
            }
            Err(_) => n_failed += 1,
        }
    }
    if per_lambda.is_empty() {
        return Err(Error::Optimization(format!(
            "all {n_failed} lambda values failed"
        )));
    }

    let best = per_lambda
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.point.nll.total_cmp(&b.1.point.nll))
        .map(|(i, _)| i)
        .unwrap();
    let winner = &per_lambda[best];
    let (sigma1, sigma2) = (winner.point.sigma_first, winner.point.sigma_second);

    let mut fit = finalize_fit(
        spec,
        winner.point.theta.clone(),
        vec![sigma1, sigma2],
        winner.restarts.clone(),
        Some(winner.point.lambda),
        opts,
    )?;
    fit.nll_value = winner.point.nll;
    Ok(LambdaSweep {
        lambda_min: winner.point.lambda,
        fit,
        sigma_first: sigma1,
        sigma_second: sigma2,
        curve,
    })
}

// ---------------------------------------------------------------------------
// Goodness of fit
// ---------------------------------------------------------------------------

/// Goodness-of-fit metrics between one series of data and predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct GofMetrics {
    /// (1/N) sqrt(sum (pred - datum)^2) — the 1/N prefactor sits outside
    /// the square root.
    pub rmse: f64,
    pub mae: f64,
    /// Signed mean of (pred - datum) / datum over nonzero data.
    pub mape: f64,
    /// Data points skipped in the MAPE because the datum was zero.
    pub mape_skipped: usize,
}

pub fn goodness_of_fit(data: &[f64], predictions: &[f64]) -> Result<GofMetrics> {
    if data.len() != predictions.len() {
        return Err(Error::validation("data and prediction lengths differ"));
    }
    if data.is_empty() {
        return Err(Error::Degenerate("no data points".into()));
    }
    let n = data.len() as f64;
    let sq: Vec<f64> = data
        .iter()
        .zip(predictions)
        .map(|(d, p)| (p - d) * (p - d))
        .collect();
    let rmse = pairwise_sum(&sq).sqrt() / n;
    let abs: Vec<f64> = data
        .iter()
        .zip(predictions)
        .map(|(d, p)| (p - d).abs())
        .collect();
    let mae = pairwise_sum(&abs) / n;
    let mut mape_terms = Vec::new();
    let mut skipped = 0usize;
    for (d, p) in data.iter().zip(predictions) {
        if *d == 0.0 {
            skipped += 1;
        } else {
            mape_terms.push((p - d) / d);
        }
    }
    let mape = if mape_terms.is_empty() {
        f64::NAN
    } else {
        pairwise_sum(&mape_terms) / mape_terms.len() as f64
    };
    Ok(GofMetrics {
        rmse,
        mae,
        mape,
        mape_skipped: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;
    use crate::observe::{synthesize, ObservationOperator};

    fn sir_model() -> (ModelSpec, ParameterVector) {
        let model = ModelSpec::sir(1.0);
        let theta = model
            .full_theta(&[
                ("beta", 0.29),
                ("r", 0.09),
                ("S0", 0.95),
                ("I0", 0.05),
                ("R0", 0.0),
            ])
            .unwrap();
        (model, theta)
    }

    fn ir_ops(k: f64) -> Vec<ObservationOperator> {
        vec![
            ObservationOperator::ScaledState {
                state: "I".into(),
                k,
            },
            ObservationOperator::ScaledState {
                state: "R".into(),
                k,
            },
        ]
    }

    fn example_spec(sigma: f64, seed: u64) -> LikelihoodSpec {
        let (model, theta) = sir_model();
        let times: Vec<f64> = (1..=30).map(|j| j as f64).collect();
        let data = synthesize(&model, &theta, &ir_ops(3.0), &times, &[sigma, sigma], seed).unwrap();
        LikelihoodSpec::new(
            model,
            theta,
            ir_ops(3.0),
            data,
            vec![
                FreeParam::new("beta", 0.25, 0.35),
                FreeParam::new("r", 0.06, 0.18),
            ],
            SigmaMode::ProfiledCommon,
            PriorKind::UniformBox,
        )
        .unwrap()
    }

    #[test]
    fn nll_closed_forms() {
        // zero misfits: N log(2 pi sigma^2) per series
        let spec = example_spec(0.0, 1);
        let nll = spec.nll_with_sigmas(&[0.29, 0.09], &[0.1, 0.1]).unwrap();
        let expected = 60.0 * (2.0 * core::f64::consts::PI * 0.01).ln();
        assert!((nll - expected).abs() < 1e-4, "nll {nll} vs {expected}");
    }

    #[test]
    fn nll_single_point_definition() {
        let (model, theta) = sir_model();
        let data = crate::observe::Dataset::new(
            vec![crate::observe::Series {
                name: "I_obs".into(),
                points: vec![(0.0, 0.06)],
            }],
            vec![crate::observe::NoiseModel::Unknown],
        )
        .unwrap();
        let spec = LikelihoodSpec::new(
            model,
            theta,
            vec![ObservationOperator::ScaledState {
                state: "I".into(),
                k: 1.0,
            }],
            data,
            vec![FreeParam::new("beta", 0.25, 0.35)],
            SigmaMode::Known(vec![0.02]),
            PriorKind::UniformBox,
        )
        .unwrap();
        // prediction at t = 0 is I0 = 0.05 exactly; misfit m = 0.01
        let nll = spec.nll(&[0.29]).unwrap();
        let sigma2: f64 = 0.0004;
        let expected = (2.0 * core::f64::consts::PI * sigma2).ln() + 0.0001 / sigma2;
        assert!((nll - expected).abs() < 1e-9, "nll {nll} vs {expected}");
    }

    #[test]
    fn argmin_is_invariant_under_common_sigma_rescaling() {
        let (model, theta) = sir_model();
        let times: Vec<f64> = (1..=20).map(|j| j as f64).collect();
        let data = synthesize(&model, &theta, &ir_ops(1.0), &times, &[0.01, 0.01], 42).unwrap();
        let free = vec![
            FreeParam::new("beta", 0.25, 0.35),
            FreeParam::new("r", 0.06, 0.18),
        ];
        let opts = FitOptions {
            restarts: 6,
            seed: 1,
            ..Default::default()
        };
        let mut results = Vec::new();
        for sigma in [0.01, 0.5] {
            let spec = LikelihoodSpec::new(
                model.clone(),
                theta.clone(),
                ir_ops(1.0),
                data.clone(),
                free.clone(),
                SigmaMode::Known(vec![sigma, sigma]),
                PriorKind::UniformBox,
            )
            .unwrap();
            results.push(mle(&spec, &opts).unwrap().theta_mle);
        }
        for (a, b) in results[0].iter().zip(&results[1]) {
            assert!((a - b).abs() < 1e-5, "{results:?}");
        }
    }

    #[test]
    fn noise_free_data_recovers_truth() {
        let spec = example_spec(0.0, 3);
        let opts = FitOptions {
            restarts: 8,
            seed: 2,
            ..Default::default()
        };
        let fit = mle(&spec, &opts).unwrap();
        assert!(
            (fit.theta_mle[0] - 0.29).abs() < 1e-3,
            "beta {}",
            fit.theta_mle[0]
        );
        assert!(
            (fit.theta_mle[1] - 0.09).abs() < 1e-3,
            "r {}",
            fit.theta_mle[1]
        );
        // sigma_mle of an exact fit is ~0
        assert!(fit.sigma_hat[0] < 1e-5);
    }

    #[test]
    fn fits_are_deterministic() {
        let spec = example_spec(0.025, 7);
        let opts = FitOptions {
            restarts: 4,
            seed: 5,
            ..Default::default()
        };
        let a = mle(&spec, &opts).unwrap();
        let b = mle(&spec, &opts).unwrap();
        assert_eq!(a.theta_mle, b.theta_mle);
        assert_eq!(a.nll_value, b.nll_value);
        assert_eq!(a.covariance, b.covariance);
    }

    #[test]
    fn nll_value_is_min_over_restart_log() {
        let spec = example_spec(0.025, 9);
        let opts = FitOptions {
            restarts: 5,
            seed: 3,
            ..Default::default()
        };
        let fit = mle(&spec, &opts).unwrap();
        let min_restart = fit
            .restart_log
            .iter()
            .map(|r| r.nll)
            .fold(f64::INFINITY, f64::min);
        assert!((fit.nll_value - min_restart).abs() < 1e-9);
    }

    #[test]
    fn fd_hessian_is_exact_on_quadratics() {
        // f = x^T A x with symmetric A has Hessian exactly 2A
        let a = [[2.0, 0.3, -0.1], [0.3, 1.0, 0.4], [-0.1, 0.4, 3.0]];
        let f = |x: &[f64]| {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += x[i] * a[i][j] * x[j];
                }
            }
            s
        };
        let h = fd_hessian(f, &[0.5, -0.2, 1.0], 1e-4).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (h[(i, j)] - 2.0 * a[i][j]).abs() < 1e-6 * (1.0 + 2.0 * a[i][j].abs()),
                    "H[{i}{j}] = {}",
                    h[(i, j)]
                );
            }
        }

        let zero = fd_hessian(|_| 3.0, &[1.0, 2.0], 1e-4).unwrap();
        assert_eq!(zero, DMatrix::zeros(2, 2));
    }

    #[test]
    fn fd_hessian_rejects_non_finite_stencils() {
        let f = |x: &[f64]| if x[0] > 1.0 { f64::NAN } else { x[0] * x[0] };
        assert!(fd_hessian(f, &[1.0], 1e-1).is_err());
    }

    #[test]
    fn quadratic_oracle_normal_equations() {
        // beta = 0 makes predictions linear in the initial conditions:
        // I(t) = I0 e^{-rt}, R(t) = R0 + I0 (1 - e^{-rt}); the MLE and its
        // covariance then have closed forms
        let model = ModelSpec::sir(1.0);
        let truth = model
            .full_theta(&[
                ("beta", 0.0),
                ("r", 0.1),
                ("S0", 0.85),
                ("I0", 0.05),
                ("R0", 0.1),
            ])
            .unwrap();
        let times: Vec<f64> = (1..=20).map(|j| j as f64).collect();
        let sigma = 0.01;
        let ops = ir_ops(1.0);
        let data = synthesize(&model, &truth, &ops, &times, &[sigma, sigma], 13).unwrap();

        let spec = LikelihoodSpec::new(
            model,
            truth,
            ops,
            data.clone(),
            vec![
                FreeParam::new("I0", 0.001, 0.5),
                FreeParam::new("R0", 0.0001, 0.5),
            ],
            SigmaMode::Known(vec![sigma, sigma]),
            PriorKind::UniformBox,
        )
        .unwrap();
        let opts = FitOptions {
            restarts: 6,
            seed: 11,
            ..Default::default()
        };
        let fit = mle(&spec, &opts).unwrap();

        // normal equations: theta_hat = (J^T J)^{-1} J^T y over both series
        let r = 0.1;
        let mut jtj = [[0.0f64; 2]; 2];
        let mut jty = [0.0f64; 2];
        let mut push = |row: [f64; 2], y: f64| {
            for a in 0..2 {
                for b in 0..2 {
                    jtj[a][b] += row[a] * row[b];
                }
                jty[a] += row[a] * y;
            }
        };
        for (j, &t) in times.iter().enumerate() {
            let e = (-r * t).exp();
            push([e, 0.0], data.series[0].points[j].1);
            push([1.0 - e, 1.0], data.series[1].points[j].1);
        }
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        let inv = [
            [jtj[1][1] / det, -jtj[0][1] / det],
            [-jtj[1][0] / det, jtj[0][0] / det],
        ];
        let closed = [
            inv[0][0] * jty[0] + inv[0][1] * jty[1],
            inv[1][0] * jty[0] + inv[1][1] * jty[1],
        ];
        assert!(
            (fit.theta_mle[0] - closed[0]).abs() < 1e-6,
            "I0 {} vs {}",
            fit.theta_mle[0],
            closed[0]
        );
        assert!(
            (fit.theta_mle[1] - closed[1]).abs() < 1e-6,
            "R0 {} vs {}",
            fit.theta_mle[1],
            closed[1]
        );

        // Sigma_G matches sigma^2 (J^T J)^{-1}
        for a in 0..2 {
            for b in 0..2 {
                let expected = sigma * sigma * inv[a][b];
                let got = fit.covariance[(a, b)];
                assert!(
                    (got - expected).abs() <= 1e-4 * expected.abs().max(1e-12),
                    "cov[{a}{b}] {got} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn fisher_jacobian_matches_fd_on_linear_predictions() {
        let model = ModelSpec::sir(1.0);
        let truth = model
            .full_theta(&[
                ("beta", 0.0),
                ("r", 0.1),
                ("S0", 0.85),
                ("I0", 0.05),
                ("R0", 0.1),
            ])
            .unwrap();
        let times: Vec<f64> = (1..=10).map(|j| j as f64).collect();
        let sigma = 0.02;
        let ops = ir_ops(1.0);
        let data = synthesize(&model, &truth, &ops, &times, &[sigma, sigma], 17).unwrap();
        let spec = LikelihoodSpec::new(
            model,
            truth,
            ops,
            data,
            vec![
                FreeParam::new("I0", 0.001, 0.5),
                FreeParam::new("R0", 0.0001, 0.5),
            ],
            SigmaMode::Known(vec![sigma, sigma]),
            PriorKind::UniformBox,
        )
        .unwrap();
        let x = [0.06, 0.12];
        let jac = fisher_jacobian(&spec, &x, &[sigma, sigma], 1e-5).unwrap();
        let tight = spec.clone().with_tolerances(1e-9, 1e-12);
        let fd = fd_hessian(
            |p| {
                0.5 * tight
                    .nll_with_sigmas(p, &[sigma, sigma])
                    .unwrap_or(f64::NAN)
            },
            &x,
            1e-4,
        )
        .unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let scale = jac[(a, a)].max(jac[(b, b)]);
                assert!(
                    (jac[(a, b)] - fd[(a, b)]).abs() < 1e-4 * scale,
                    "[{a}{b}] jac {} vs fd {}",
                    jac[(a, b)],
                    fd[(a, b)]
                );
            }
        }
        // Gram matrix is PSD
        let (vals, _) = linalg::sym_eigen(&jac);
        assert!(vals.iter().all(|&v| v > -1e-12));
    }

    #[test]
    fn map_with_huge_prior_sd_matches_mle_and_prior_only_returns_prior_mean() {
        let (model, theta) = sir_model();
        let times: Vec<f64> = (1..=25).map(|j| j as f64).collect();
        let ops = ir_ops(3.0);
        let data = synthesize(&model, &theta, &ops, &times, &[0.02, 0.02], 21).unwrap();
        let free = vec![
            FreeParam::new("beta", 0.25, 0.35),
            FreeParam::new("r", 0.06, 0.18),
        ];
        let opts = FitOptions {
            restarts: 6,
            seed: 4,
            ..Default::default()
        };

        let spec_mle = LikelihoodSpec::new(
            model.clone(),
            theta.clone(),
            ops.clone(),
            data.clone(),
            free.clone(),
            SigmaMode::Known(vec![0.02, 0.02]),
            PriorKind::UniformBox,
        )
        .unwrap();
        let plain = mle(&spec_mle, &opts).unwrap();

        let spec_map = LikelihoodSpec::new(
            model.clone(),
            theta.clone(),
            ops.clone(),
            data.clone(),
            free.clone(),
            SigmaMode::Known(vec![0.02, 0.02]),
            PriorKind::Gaussian {
                means: vec![0.30, 0.12],
                sds: vec![1e12, 1e12],
            },
        )
        .unwrap();
        let loose = map_gaussian_prior(&spec_map, &opts).unwrap();
        for (a, b) in plain.theta_mle.iter().zip(&loose.theta_mle) {
            assert!((a - b).abs() < 1e-5);
        }

        // no data: the optimum is the prior mean
        let empty = crate::observe::Dataset::new(
            vec![
                crate::observe::Series {
                    name: "I_obs".into(),
                    points: vec![],
                },
                crate::observe::Series {
                    name: "R_obs".into(),
                    points: vec![],
                },
            ],
            vec![
                crate::observe::NoiseModel::Unknown,
                crate::observe::NoiseModel::Unknown,
            ],
        )
        .unwrap();
        let spec_prior_only = LikelihoodSpec::new(
            model,
            theta,
            ops,
            empty,
            free,
            SigmaMode::Known(vec![0.02, 0.02]),
            PriorKind::Gaussian {
                means: vec![0.31, 0.13],
                sds: vec![0.01, 0.01],
            },
        )
        .unwrap();
        let bounds = spec_prior_only.bounds();
        let u0 = to_unbounded(&[0.27, 0.08], &bounds);
        let res = minimize(
            |u| spec_prior_only.objective(&to_bounded(u, &bounds)),
            &u0,
            &NmOptions::default(),
        );
        let prior_only = to_bounded(&res.x, &bounds);
        assert!((prior_only[0] - 0.31).abs() < 1e-6);
        assert!((prior_only[1] - 0.13).abs() < 1e-6);
    }

    #[test]
    fn gof_formulas_as_printed() {
        let g = goodness_of_fit(&[2.0], &[1.0]).unwrap();
        assert_eq!(g.rmse, 1.0);
        assert_eq!(g.mae, 1.0);
        assert_eq!(g.mape, -0.5);
        assert_eq!(g.mape_skipped, 0);

        let perfect = goodness_of_fit(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((perfect.rmse, perfect.mae, perfect.mape), (0.0, 0.0, 0.0));

        let skip = goodness_of_fit(&[0.0, 2.0], &[0.1, 1.0]).unwrap();
        assert_eq!(skip.mape_skipped, 1);
        assert_eq!(skip.mape, -0.5);
    }

    #[test]
    fn gaussian_posterior_carries_fit_quantities() {
        let spec = example_spec(0.01, 31);
        let opts = FitOptions {
            restarts: 4,
            seed: 6,
            ..Default::default()
        };
        let fit = mle(&spec, &opts).unwrap();
        let post = gaussian_posterior(&fit, &fit.bounds.clone()).unwrap();
        assert_eq!(post.mean, fit.theta_mle);
        assert_eq!(post.names, fit.names);
    }
}
