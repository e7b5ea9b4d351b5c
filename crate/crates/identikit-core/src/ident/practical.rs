//! Practical identifiability diagnostics: bootstrap average relative
//! errors, parameter correlation, and Fisher-matrix rank analysis.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fit::{mle, FitOptions, FreeParam, LikelihoodSpec, PriorKind, SigmaMode};

use crate::math::linalg::sym_eigen;
use crate::model::{ModelSpec, ParameterVector};
use crate::observe::{synthesize, ObservationOperator, ParamMap, K_PARAM};
use crate::par::par_map_idx;
use crate::rng::mix_seed;

#[allow(unused_imports)]
use num_traits::Float;

/// Bootstrap average relative errors per (noise level, parameter).
#[derive(Debug, Clone)]
pub struct AreTable {
    pub noise_levels: Vec<f64>,
    pub params: Vec<String>,
    /// are\[level\]\[param\]
    pub are: Vec<Vec<f64>>,
    pub replicates: usize,
    /// Failed fits per level (excluded from the averages).
    pub failures: Vec<usize>,
}

/// Monte Carlo / bootstrap identifiability analysis.
///
/// For each noise level, `replicates` synthetic datasets are generated from
/// the true parameters and refit; the table reports the average relative
/// error |estimate - truth| / truth per parameter. Only the first
/// `n_params_jointly` entries of `free` are estimated; the rest stay fixed
/// at their true values. Fit failures are excluded if they stay under 20%
/// of the replicates, otherwise the level errors out.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_are(
    model: &ModelSpec,
    theta_true: &ParameterVector,
    ops: &[ObservationOperator],
    free: &[FreeParam],
    times: &[f64],
    noise_levels: &[f64],
    replicates: usize,
    n_params_jointly: usize,
    seed: u64,
    fit_opts: &FitOptions,
) -> Result<AreTable> {
    if replicates < 10 {
        return Err(Error::validation("bootstrap needs at least 10 replicates"));
    }
    if n_params_jointly == 0 || n_params_jointly > free.len() {
        return Err(Error::validation(
            "n_params_jointly must be in 1..=free.len()",
        ));
    }
    if noise_levels.is_empty() {
        return Err(Error::validation("at least one noise level is required"));
    }
    let joint: Vec<FreeParam> = free[..n_params_jointly].to_vec();

    // true values of the jointly estimated parameters
    let probe = ParamMap::new(
        model.clone(),
        theta_true.clone(),
        ops.to_vec(),
        joint.iter().map(|p| p.name.clone()).collect(),
    )?;
    let truth: Vec<f64> = joint
        .iter()
        .map(|p| {
            probe.base_value(&p.name).ok_or_else(|| {
                Error::Validation(format!("no true value available for '{}'", p.name))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    if truth.iter().any(|v| *v == 0.0) {
        return Err(Error::validation(
            "relative errors need nonzero true values in every estimated coordinate",
        ));
    }
    let _ = K_PARAM; // K participates through ParamMap::base_value

    let mut are = Vec::with_capacity(noise_levels.len());
    let mut failures = Vec::with_capacity(noise_levels.len());
    for (li, &sigma) in noise_levels.iter().enumerate() {
        if !(sigma >= 0.0) {
            return Err(Error::validation("noise levels must be >= 0"));
        }
        let sigmas = vec![sigma; ops.len()];
        let fits: Vec<Option<Vec<f64>>> = par_map_idx(replicates, |k| {
            let rep_seed = mix_seed(seed, ((li as u64) << 32) | k as u64);
            let data = match synthesize(model, theta_true, ops, times, &sigmas, rep_seed) {
                Ok(d) => d,
                Err(_) => return None,
            };
            let spec = match LikelihoodSpec::new(
                model.clone(),
                theta_true.clone(),
                ops.to_vec(),
                data,
                joint.clone(),
                SigmaMode::ProfiledCommon,
                PriorKind::UniformBox,
            ) {
                Ok(s) => s,
                Err(_) => return None,
            };
            let opts = FitOptions {
                seed: mix_seed(rep_seed, 0xA5E),
                ..fit_opts.clone()
            };
            mle(&spec, &opts).ok().map(|f| f.theta_mle)
        });

        let ok: Vec<&Vec<f64>> = fits.iter().flatten().collect();
        let failed = replicates - ok.len();
        if (failed as f64) >= 0.2 * replicates as f64 {
            return Err(Error::Optimization(format!(
                "{failed}/{replicates} fits failed at noise level {sigma}"
            )));
        }
        let mut row = vec![0.0; joint.len()];
        for est in &ok {
            for (j, (&e, &t)) in est.iter().zip(&truth).enumerate() {
                row[j] += (e - t).abs() / t.abs();
            }
        }
        for v in row.iter_mut() {
            *v /= ok.len() as f64;
        }
        are.push(row);
        failures.push(failed);
    }

    Ok(AreTable {
        noise_levels: noise_levels.to_vec(),
        params: joint.iter().map(|p| p.name.clone()).collect(),
        are,
        replicates,
        failures,
    })
}

/// Correlation matrix C_ij = Sigma_ij / sqrt(Sigma_ii Sigma_jj).
pub fn correlation_matrix(sigma_g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sigma_g.nrows();
    if sigma_g.ncols() != n {
        return Err(Error::validation("covariance must be square"));
    }
    for i in 0..n {
        if !(sigma_g[(i, i)] > 0.0) {
            return Err(Error::Validation(format!(
                "covariance diagonal entry {i} is not positive"
            )));
        }
    }
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] = sigma_g[(i, j)] / (sigma_g[(i, i)] * sigma_g[(j, j)]).sqrt();
        }
    }
    Ok(c)
}

/// Eigen-analysis of a Fisher matrix.
#[derive(Debug, Clone)]
pub struct FimDiagnostics {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Count of eigenvalues above 1e-10 times the largest.
    pub numeric_rank: usize,
    /// (eigenvalue, eigenvector) of each sub-threshold direction — the
    /// locally non-identifiable combinations.
    pub flagged: Vec<(f64, Vec<f64>)>,
}

/// Rank analysis of the Fisher information matrix: the numeric rank bounds
/// how many parameters can be inferred simultaneously, and the near-null
/// eigenvectors name the flat combinations.
pub fn fim_diagnostics(h: &DMatrix<f64>) -> Result<FimDiagnostics> {
    if h.nrows() != h.ncols() {
        return Err(Error::validation("fisher matrix must be square"));
    }
    let (values, vectors) = sym_eigen(h);
    let max_ev = values
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let floor = 1e-10 * max_ev;
    let mut rank = 0;
    let mut flagged = Vec::new();
    for (i, &ev) in values.iter().enumerate() {
        if ev > floor && ev > 0.0 {
            rank += 1;
        } else {
            flagged.push((ev, vectors.column(i).iter().cloned().collect()));
        }
    }
    Ok(FimDiagnostics {
        eigenvalues: values,
        numeric_rank: rank,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn correlation_of_diagonal_covariance_is_identity() {
        let c = correlation_matrix(&dmatrix![2.0, 0.0; 0.0, 0.5]).unwrap();
        assert!((c - DMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn correlation_diagonal_is_one_and_example3_value() {
        // arithmetic on the Example 3 covariance: corr = 0.1064 /
        // sqrt(0.7995 * 0.2609)
        let sigma = dmatrix![0.7995e-4, 0.1064e-4; 0.1064e-4, 0.2609e-4];
        let c = correlation_matrix(&sigma).unwrap();
        assert!((c[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((c[(1, 1)] - 1.0).abs() < 1e-14);
        let expected = 0.1064 / (0.7995_f64 * 0.2609).sqrt();
        assert!((c[(0, 1)] - expected).abs() < 1e-12);
        assert!((expected - 0.233).abs() < 5e-4);
    }

    #[test]
    fn correlation_rejects_nonpositive_diagonal() {
        assert!(correlation_matrix(&dmatrix![0.0, 0.0; 0.0, 1.0]).is_err());
    }

    #[test]
    fn fim_identity_has_full_rank() {
        let d = fim_diagnostics(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(d.numeric_rank, 3);
        assert!(d.flagged.is_empty());
    }

    #[test]
    fn fim_rank_one_gram_flags_the_orthogonal_direction() {
        // v v^T with v = (3, 4)/5
        let v = [0.6, 0.8];
        let mut m = DMatrix::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                m[(i, j)] = v[i] * v[j];
            }
        }
        let d = fim_diagnostics(&m).unwrap();
        assert_eq!(d.numeric_rank, 1);
        assert_eq!(d.flagged.len(), 1);
        let w = &d.flagged[0].1;
        // flagged direction is orthogonal to v
        let dot = w[0] * v[0] + w[1] * v[1];
        assert!(dot.abs() < 1e-10, "dot {dot}");
    }
}
