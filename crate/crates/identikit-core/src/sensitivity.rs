//! Variance-based global sensitivity: principal and total Sobol indices.
//!
//! Pick-freeze estimation with two independent Monte Carlo matrices A and B
//! and the k hybrid matrices A_B^(i): the principal index uses the
//! Saltelli-2010 estimator, the total index the Jansen estimator, both
//! normalized by the variance of the pooled A and B evaluations. Standard
//! errors come from a row bootstrap. Evaluations are centered by the pooled
//! mean, which makes the indices exactly invariant under affine rescaling of
//! the quantity of interest (up to round-off).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::pairwise_sum;
use crate::model::integrate;
use crate::observe::{observe, ParamMap};
use crate::par::par_map_idx;
use crate::rng::{mix_seed, DetRng};
use crate::sample::{draw, Distribution, Scheme};

#[allow(unused_imports)]
use num_traits::Float;

const BOOTSTRAP_RESAMPLES: usize = 200;

/// Per-parameter Sobol indices with bootstrap standard errors.
///
/// When the output variance vanishes the indices are undefined: `defined`
/// is false and every entry is NaN.
#[derive(Debug, Clone)]
pub struct SobolIndices {
    pub principal: Vec<f64>,
    pub principal_se: Vec<f64>,
    pub total: Vec<f64>,
    pub total_se: Vec<f64>,
    /// Pooled-sample estimate of the total output variance.
    pub variance: f64,
    pub defined: bool,
}

impl SobolIndices {
    fn undefined(k: usize, variance: f64) -> Self {
        SobolIndices {
            principal: vec![f64::NAN; k],
            principal_se: vec![f64::NAN; k],
            total: vec![f64::NAN; k],
            total_se: vec![f64::NAN; k],
            variance,
            defined: false,
        }
    }
}

/// Result of [`sobol_indices`] on a scalar quantity of interest.
#[derive(Debug, Clone)]
pub struct SobolResult {
    pub indices: SobolIndices,
    /// Base sample count n (the design evaluates (2 + k) n points).
    pub n: usize,
    pub seed: u64,
}

/// Time-resolved indices for one observable.
#[derive(Debug, Clone)]
pub struct SobolSeries {
    pub observable: String,
    pub times: Vec<f64>,
    pub per_time: Vec<SobolIndices>,
    pub n: usize,
    pub seed: u64,
}

struct Design {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

fn build_design(priors: &[Distribution], n: usize, seed: u64) -> Result<Design> {
    let both = draw(priors, 2 * n, Scheme::MonteCarlo, seed)?;
    let a = both.points[..n].to_vec();
    let b = both.points[n..].to_vec();
    Ok(Design { a, b })
}

/// Estimate principal and total Sobol indices of a scalar QoI.
///
/// `n` is the base sample count (at least 64); the QoI is evaluated
/// (2 + k) n times. Constant QoIs produce a flagged result with undefined
/// indices rather than an error.
pub fn sobol_indices<F>(qoi: F, priors: &[Distribution], n: usize, seed: u64) -> Result<SobolResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n < 64 {
        return Err(Error::validation(
            "sobol estimation needs a base count n >= 64",
        ));
    }
    let k = priors.len();
    let design = build_design(priors, n, seed)?;

    let f_a: Vec<f64> = par_map_idx(n, |j| qoi(&design.a[j]));
    let f_b: Vec<f64> = par_map_idx(n, |j| qoi(&design.b[j]));
    let mut f_ab = Vec::with_capacity(k);
    for i in 0..k {
        let col: Vec<f64> = par_map_idx(n, |j| {
            let mut row = design.a[j].clone();
            row[i] = design.b[j][i];
            qoi(&row)
        });
        f_ab.push(col);
    }
    for v in f_a.iter().chain(&f_b).chain(f_ab.iter().flatten()) {
        if !v.is_finite() {
            return Err(Error::Degenerate("QoI produced a non-finite value".into()));
        }
    }

    let indices = estimate(&f_a, &f_b, &f_ab, seed);
    Ok(SobolResult { indices, n, seed })
}

/// Time-resolved Sobol indices of series observables of a model.
///
/// One integration per design row is reused across all times and operators.
/// Near-zero output variance at individual times yields per-time undefined
/// flags, not a global failure.
pub fn sobol_over_time(
    map: &ParamMap,
    priors: &[Distribution],
    times: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<SobolSeries>> {
    if n < 64 {
        return Err(Error::validation(
            "sobol estimation needs a base count n >= 64",
        ));
    }
    if priors.len() != map.n_free() {
        return Err(Error::validation(
            "one prior per free parameter is required",
        ));
    }
    if map.ops().iter().any(|op| !op.is_series()) {
        return Err(Error::validation(
            "sobol_over_time requires series operators",
        ));
    }
    let k = map.n_free();
    let n_ops = map.ops().len();
    let design = build_design(priors, n, seed)?;

    // rows of per-(op, time) values: eval[row][op][time]
    let eval_row = |row: &[f64]| -> Vec<Vec<f64>> {
        match resolve_and_observe(map, row, times) {
            Ok(v) => v,
            Err(_) => vec![vec![f64::NAN; times.len()]; n_ops],
        }
    };
    let e_a: Vec<Vec<Vec<f64>>> = par_map_idx(n, |j| eval_row(&design.a[j]));
    let e_b: Vec<Vec<Vec<f64>>> = par_map_idx(n, |j| eval_row(&design.b[j]));
    let mut e_ab: Vec<Vec<Vec<Vec<f64>>>> = Vec::with_capacity(k);
    for i in 0..k {
        e_ab.push(par_map_idx(n, |j| {
            let mut row = design.a[j].clone();
            row[i] = design.b[j][i];
            eval_row(&row)
        }));
    }

    let mut out = Vec::with_capacity(n_ops);
    for (oi, op) in map.ops().iter().enumerate() {
        let mut per_time = Vec::with_capacity(times.len());
        for ti in 0..times.len() {
            let f_a: Vec<f64> = (0..n).map(|j| e_a[j][oi][ti]).collect();
            let f_b: Vec<f64> = (0..n).map(|j| e_b[j][oi][ti]).collect();
            let f_ab: Vec<Vec<f64>> = (0..k)
                .map(|i| (0..n).map(|j| e_ab[i][j][oi][ti]).collect())
                .collect();
            if f_a
                .iter()
                .chain(&f_b)
                .chain(f_ab.iter().flatten())
                .any(|v| !v.is_finite())
            {
                per_time.push(SobolIndices::undefined(k, f64::NAN));
            } else {
                per_time.push(estimate(&f_a, &f_b, &f_ab, mix_seed(seed, ti as u64)));
            }
        }
        out.push(SobolSeries {
            observable: op.label(),
            times: times.to_vec(),
            per_time,
            n,
            seed,
        });
    }
    Ok(out)
}

fn resolve_and_observe(map: &ParamMap, row: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let (theta, ops) = map.resolve(row)?;
    let traj = integrate(
        map.model(),
        &theta,
        times,
        crate::model::DEFAULT_RTOL,
        crate::model::DEFAULT_ATOL,
    )?;
    ops.iter()
        .map(|op| observe(map.model(), &traj, op, &theta)?.into_series())
        .collect()
}

/// Saltelli-2010 principal / Jansen total estimators on centered values,
/// with a row bootstrap for standard errors.
fn estimate(f_a: &[f64], f_b: &[f64], f_ab: &[Vec<f64>], seed: u64) -> SobolIndices {
    let n = f_a.len();
    let k = f_ab.len();

    let ident: Vec<usize> = (0..n).collect();
    let point = point_estimate(f_a, f_b, f_ab, &ident);
    let (variance, principal, total) = match point {
        Some(t) => t,
        None => {
            // constant QoI: report the (zero) variance and flag
            let pooled: Vec<f64> = f_a.iter().chain(f_b).cloned().collect();
            let v = crate::math::sample_variance(&pooled);
            return SobolIndices::undefined(k, v);
        }
    };

    // bootstrap over design rows
    let mut rng = DetRng::with_stream(seed, 0xB00);
    let mut boot_p: Vec<Vec<f64>> = vec![Vec::with_capacity(BOOTSTRAP_RESAMPLES); k];
    let mut boot_t: Vec<Vec<f64>> = vec![Vec::with_capacity(BOOTSTRAP_RESAMPLES); k];
    let mut rows = vec![0usize; n];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for r in rows.iter_mut() {
            *r = rng.index(n);
        }
        if let Some((_, p, t)) = point_estimate(f_a, f_b, f_ab, &rows) {
            for i in 0..k {
                boot_p[i].push(p[i]);
                boot_t[i].push(t[i]);
            }
        }
    }
    let se = |xs: &Vec<f64>| -> f64 {
        if xs.len() < 2 {
            f64::NAN
        } else {
            crate::math::sample_variance(xs).sqrt()
        }
    };
    SobolIndices {
        principal_se: boot_p.iter().map(se).collect(),
        total_se: boot_t.iter().map(se).collect(),
        principal,
        total,
        variance,
        defined: true,
    }
}

/// One evaluation of the estimators on a row selection (identity selection
/// for the point estimate, resampled rows in the bootstrap). Returns None
/// when the pooled variance is numerically zero.
fn point_estimate(
    f_a: &[f64],
    f_b: &[f64],
    f_ab: &[Vec<f64>],
    rows: &[usize],
) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    let n = rows.len();
    let k = f_ab.len();

    let pooled: Vec<f64> = rows.iter().flat_map(|&j| [f_a[j], f_b[j]]).collect();
    let m = crate::math::mean(&pooled);
    let sq: Vec<f64> = pooled.iter().map(|v| (v - m) * (v - m)).collect();
    let variance = pairwise_sum(&sq) / (2 * n - 1) as f64;
    let scale = pooled.iter().fold(0.0_f64, |a, &b| a.max(b.abs())).max(1.0);
    if variance <= 1e-28 * scale * scale {
        return None;
    }

    let mut principal = Vec::with_capacity(k);
    let mut total = Vec::with_capacity(k);
    for col in f_ab {
        let prod: Vec<f64> = rows
            .iter()
            .map(|&j| (f_b[j] - m) * (col[j] - f_a[j]))
            .collect();
        principal.push(pairwise_sum(&prod) / n as f64 / variance);
        let sqd: Vec<f64> = rows
            .iter()
            .map(|&j| (f_a[j] - col[j]) * (f_a[j] - col[j]))
            .collect();
        total.push(pairwise_sum(&sqd) / (2 * n) as f64 / variance);
    }
    Some((variance, principal, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;
    use crate::observe::ObservationOperator;

    fn unit_priors(k: usize) -> Vec<Distribution> {
        (0..k)
            .map(|_| Distribution::Uniform { a: 0.0, b: 1.0 })
            .collect()
    }

    #[test]
    fn single_input_function_attributes_everything_to_it() {
        let res = sobol_indices(|x| x[0], &unit_priors(2), 2048, 1).unwrap();
        let s = &res.indices;
        assert!(s.defined);
        assert!((s.principal[0] - 1.0).abs() < 3.0 * s.principal_se[0].max(0.02));
        assert!(s.total[1].abs() < 3.0 * s.total_se[1].max(0.02));
    }

    #[test]
    fn additive_function_matches_analytic_indices() {
        // qoi = a x1 + b x2 on independent uniforms with equal variance:
        // s1 = a^2 / (a^2 + b^2) = 0.2 for a = 1, b = 2; no interaction
        let (a, b) = (1.0, 2.0);
        let res = sobol_indices(|x| a * x[0] + b * x[1], &unit_priors(2), 4096, 7).unwrap();
        let s = &res.indices;
        assert!((s.principal[0] - 0.2).abs() < 3.0 * s.principal_se[0]);
        assert!((s.principal[1] - 0.8).abs() < 3.0 * s.principal_se[1]);
        assert!((s.total[0] - 0.2).abs() < 3.0 * s.total_se[0]);
        assert!((s.total[1] - 0.8).abs() < 3.0 * s.total_se[1]);
        // mixed contribution 1 - sum s_i vanishes for additive functions
        let mixed = 1.0 - s.principal[0] - s.principal[1];
        let se = (s.principal_se[0].powi(2) + s.principal_se[1].powi(2)).sqrt();
        assert!(mixed.abs() < 3.0 * se, "mixed {mixed} vs se {se}");
    }

    #[test]
    fn indices_are_invariant_under_affine_rescaling() {
        let qoi = |x: &[f64]| x[0].exp() + 0.5 * x[1] * x[0];
        let r1 = sobol_indices(qoi, &unit_priors(2), 1024, 3).unwrap();
        let r2 = sobol_indices(|x| 5.0 * qoi(x) - 11.0, &unit_priors(2), 1024, 3).unwrap();
        for i in 0..2 {
            assert!((r1.indices.principal[i] - r2.indices.principal[i]).abs() < 1e-8);
            assert!((r1.indices.total[i] - r2.indices.total[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_qoi_is_flagged_undefined() {
        let res = sobol_indices(|_| 4.2, &unit_priors(2), 128, 5).unwrap();
        assert!(!res.indices.defined);
        assert!(res.indices.principal[0].is_nan());
    }

    #[test]
    fn determinism_given_n_and_seed() {
        let r1 = sobol_indices(|x| x[0] * x[1], &unit_priors(2), 256, 11).unwrap();
        let r2 = sobol_indices(|x| x[0] * x[1], &unit_priors(2), 256, 11).unwrap();
        assert_eq!(r1.indices.principal, r2.indices.principal);
        assert_eq!(r1.indices.total_se, r2.indices.total_se);
    }

    #[test]
    fn sir_asymptotic_regime_is_dictated_by_r() {
        // total index of r beats total index of beta at late times, for
        // every compartment
        let model = ModelSpec::sir(1.0);
        let base = model
            .full_theta(&[
                ("beta", 0.3),
                ("r", 0.12),
                ("S0", 0.95),
                ("I0", 0.05),
                ("R0", 0.0),
            ])
            .unwrap();
        let ops = vec![
            ObservationOperator::ScaledState {
                state: "S".into(),
                k: 1.0,
            },
            ObservationOperator::ScaledState {
                state: "I".into(),
                k: 1.0,
            },
            ObservationOperator::ScaledState {
                state: "R".into(),
                k: 1.0,
            },
        ];
        let map = ParamMap::new(model, base, ops, vec!["beta".into(), "r".into()]).unwrap();
        let priors = vec![
            Distribution::Uniform { a: 0.25, b: 0.35 },
            Distribution::Uniform { a: 0.06, b: 0.18 },
        ];
        let series = sobol_over_time(&map, &priors, &[0.0, 20.0, 100.0], 2048, 13).unwrap();
        for s in &series {
            // t = 0: deterministic initial conditions, variance zero
            assert!(!s.per_time[0].defined, "{} defined at t=0", s.observable);
            let late = &s.per_time[2];
            assert!(late.defined);
            assert!(
                late.total[1] > late.total[0],
                "{}: s_r^T = {} vs s_beta^T = {}",
                s.observable,
                late.total[1],
                late.total[0]
            );
            // limited interaction between the two parameters
            for i in 0..2 {
                let slack = 3.0 * (late.total_se[i] + late.principal_se[i]);
                assert!(
                    (late.total[i] - late.principal[i]).abs() < 0.1 + slack,
                    "{}: principal {} vs total {}",
                    s.observable,
                    late.principal[i],
                    late.total[i]
                );
            }
        }
    }

    #[test]
    fn beta_matters_more_in_the_transient_for_r_compartment() {
        let model = ModelSpec::sir(1.0);
        let base = model
            .full_theta(&[
                ("beta", 0.3),
                ("r", 0.12),
                ("S0", 0.95),
                ("I0", 0.05),
                ("R0", 0.0),
            ])
            .unwrap();
        let ops = vec![ObservationOperator::ScaledState {
            state: "R".into(),
            k: 1.0,
        }];
        let map = ParamMap::new(model, base, ops, vec!["beta".into(), "r".into()]).unwrap();
        let priors = vec![
            Distribution::Uniform { a: 0.25, b: 0.35 },
            Distribution::Uniform { a: 0.06, b: 0.18 },
        ];
        let times: Vec<f64> = (1..=15).map(|j| j as f64 * 10.0).collect();
        let series = sobol_over_time(&map, &priors, &times, 512, 17).unwrap();
        let s_beta: Vec<f64> = series[0]
            .per_time
            .iter()
            .map(|ix| ix.principal[0])
            .collect();
        // rises in the transient then falls toward the asymptotic regime
        let peak = s_beta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let last = *s_beta.last().unwrap();
        let first = s_beta[0];
        assert!(peak > first && peak > last, "s_beta(t) = {s_beta:?}");
    }
}
