//! Sampling schemes and output statistics for forward UQ.
//!
//! Parameter samples are drawn from independent marginals by plain Monte
//! Carlo, Latin hypercube stratification, or a Halton low-discrepancy
//! sequence mapped through inverse CDFs. Posterior samples come from the
//! Gaussian (Fisher) approximation, truncated to the prior box by rejection.
//! Statistics: weighted moments, histogram/KDE density estimates, and
//! per-time empirical quantile bands.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::math::special::{norm_cdf, norm_quantile};
use crate::math::{linalg, mean as fmean, pairwise_sum};
use crate::rng::DetRng;

#[allow(unused_imports)]
use num_traits::Float;

/// Marginal prior distributions.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Uniform {
        a: f64,
        b: f64,
    },
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
    LogNormal {
        mu_log: f64,
        sigma_log: f64,
    },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::Uniform { a, b } => {
                if a < b {
                    Ok(())
                } else {
                    Err(Error::Validation(format!(
                        "uniform requires a < b, got [{a}, {b}]"
                    )))
                }
            }
            Distribution::Gaussian { sigma, .. } => {
                if sigma > 0.0 {
                    Ok(())
                } else {
                    Err(Error::validation("gaussian requires sigma > 0"))
                }
            }
            Distribution::TruncatedGaussian { sigma, lo, hi, .. } => {
                if sigma > 0.0 && lo < hi {
                    Ok(())
                } else {
                    Err(Error::validation(
                        "truncated gaussian requires sigma > 0 and lo < hi",
                    ))
                }
            }
            Distribution::LogNormal { sigma_log, .. } => {
                if sigma_log > 0.0 {
                    Ok(())
                } else {
                    Err(Error::validation("lognormal requires sigma_log > 0"))
                }
            }
        }
    }

    /// Support interval (closed where finite).
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Distribution::Uniform { a, b } => (a, b),
            Distribution::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Distribution::TruncatedGaussian { lo, hi, .. } => (lo, hi),
            Distribution::LogNormal { .. } => (0.0, f64::INFINITY),
        }
    }

    /// One random draw.
    fn sample(&self, rng: &mut DetRng) -> f64 {
        match *self {
            Distribution::Uniform { a, b } => rng.uniform_in(a, b),
            Distribution::Gaussian { mu, sigma } => mu + sigma * rng.gaussian(),
            Distribution::TruncatedGaussian { mu, sigma, lo, hi } => {
                // rejection; the acceptance probability is the truncated mass
                for _ in 0..100_000 {
                    let x = mu + sigma * rng.gaussian();
                    if x >= lo && x <= hi {
                        return x;
                    }
                }
                f64::NAN
            }
            Distribution::LogNormal { mu_log, sigma_log } => {
                (mu_log + sigma_log * rng.gaussian()).exp()
            }
        }
    }

    /// Inverse CDF, used by the stratified and low-discrepancy schemes.
    pub fn inv_cdf(&self, p: f64) -> f64 {
        debug_assert!(p > 0.0 && p < 1.0);
        match *self {
            Distribution::Uniform { a, b } => a + p * (b - a),
            Distribution::Gaussian { mu, sigma } => mu + sigma * norm_quantile(p),
            Distribution::TruncatedGaussian { mu, sigma, lo, hi } => {
                let (pa, pb) = (norm_cdf((lo - mu) / sigma), norm_cdf((hi - mu) / sigma));
                mu + sigma * norm_quantile(pa + p * (pb - pa))
            }
            Distribution::LogNormal { mu_log, sigma_log } => {
                (mu_log + sigma_log * norm_quantile(p)).exp()
            }
        }
    }
}

/// Sampling scheme for [`draw`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    MonteCarlo,
    Lhs,
    Halton,
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::MonteCarlo => "monte_carlo",
            Scheme::Lhs => "lhs",
            Scheme::Halton => "halton",
        }
    }
}

/// A weighted set of parameter samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    /// One row per sample.
    pub points: Vec<Vec<f64>>,
    /// Nonnegative, summing to one.
    pub weights: Vec<f64>,
    pub scheme: String,
    pub seed: u64,
}

impl SampleSet {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// Values of one coordinate across samples.
    pub fn column(&self, dim: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[dim]).collect()
    }
}

/// Number of Halton points discarded from the start of the sequence.
const HALTON_SKIP: u64 = 20;

const PRIMES: [u64; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

/// Radical inverse of `index` in base `base` (van der Corput).
pub fn radical_inverse(base: u64, mut index: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut f = inv_base;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * f;
        index /= base;
        f *= inv_base;
    }
    out
}

/// Draw `n` samples from independent marginals.
///
/// Monte Carlo draws i.i.d.; LHS places one point per marginal stratum per
/// dimension with seeded permutations; Halton uses the radical-inverse
/// sequence in the first k prime bases (skipping the first 20 points) mapped
/// through inverse CDFs. All schemes carry equal weights 1/n and are
/// bit-reproducible from (scheme, seed, n).
pub fn draw(priors: &[Distribution], n: usize, scheme: Scheme, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::validation("sample count must be >= 1"));
    }
    if priors.is_empty() {
        return Err(Error::validation("at least one marginal is required"));
    }
    for p in priors {
        p.validate()?;
    }
    let k = priors.len();
    if scheme == Scheme::Halton && k > PRIMES.len() {
        return Err(Error::Validation(format!(
            "halton supports up to {} dimensions, got {k}",
            PRIMES.len()
        )));
    }

    let mut points = vec![vec![0.0; k]; n];
    match scheme {
        Scheme::MonteCarlo => {
            let mut rng = DetRng::new(seed);
            for row in points.iter_mut() {
                for (d, prior) in priors.iter().enumerate() {
                    row[d] = prior.sample(&mut rng);
                }
            }
        }
        Scheme::Lhs => {
            let mut rng = DetRng::new(seed);
            for (d, prior) in priors.iter().enumerate() {
                let mut strata: Vec<usize> = (0..n).collect();
                rng.shuffle(&mut strata);
                for (j, row) in points.iter_mut().enumerate() {
                    let u = rng.uniform();
                    let p = (strata[j] as f64 + u) / n as f64;
                    // keep strictly inside (0,1) for the inverse CDF
                    row[d] = prior.inv_cdf(p.max(1e-15));
                }
            }
        }
        Scheme::Halton => {
            for (j, row) in points.iter_mut().enumerate() {
                let index = HALTON_SKIP + 1 + j as u64;
                for (d, prior) in priors.iter().enumerate() {
                    let u = radical_inverse(PRIMES[d], index);
                    row[d] = prior.inv_cdf(u);
                }
            }
        }
    }

    for row in &points {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate(
                "sampling produced a non-finite value (rejection exhausted?)".into(),
            ));
        }
    }
    let w = 1.0 / n as f64;
    Ok(SampleSet {
        points,
        weights: vec![w; n],
        scheme: scheme.label().to_string(),
        seed,
    })
}

// ---------------------------------------------------------------------------
// Gaussian posterior
// ---------------------------------------------------------------------------

/// Multivariate Gaussian approximation of a posterior, truncated to a box.
#[derive(Debug, Clone)]
pub struct GaussianPosterior {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
    /// Prior box used for truncation when sampling.
    pub bounds: Vec<(f64, f64)>,
    /// Parameter labels, aligned with `mean`.
    pub names: Vec<String>,
    /// Diagnostics, e.g. an ill-conditioning flag from the fit stage.
    pub flags: Vec<String>,
    /// Eigenvectors of near-null curvature directions, when flagged.
    pub weak_directions: Vec<Vec<f64>>,
}

impl GaussianPosterior {
    /// Marginal standard deviations (square roots of the diagonal).
    pub fn marginal_sd(&self) -> Vec<f64> {
        (0..self.mean.len())
            .map(|i| self.covariance[(i, i)].max(0.0).sqrt())
            .collect()
    }
}

/// Sample from N(mean, covariance) through its symmetric square root,
/// rejecting points outside the bounds box.
///
/// Errors if the covariance is not PSD (eigenvalues below -1e-12 relative)
/// or if the acceptance rate drops under 1e-3.
pub fn draw_posterior(post: &GaussianPosterior, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::validation("sample count must be >= 1"));
    }
    let k = post.mean.len();
    if post.covariance.nrows() != k || post.covariance.ncols() != k || post.bounds.len() != k {
        return Err(Error::validation(
            "posterior mean/covariance/bounds sizes disagree",
        ));
    }
    let root = linalg::sym_sqrt(&post.covariance, 1e-12)?;

    let mut rng = DetRng::new(seed);
    let mut points = Vec::with_capacity(n);
    let mut attempts: u64 = 0;
    while points.len() < n {
        attempts += 1;
        let z: Vec<f64> = (0..k).map(|_| rng.gaussian()).collect();
        let mut x = post.mean.clone();
        for r in 0..k {
            for c in 0..k {
                x[r] += root[(r, c)] * z[c];
            }
        }
        let inside = x
            .iter()
            .zip(&post.bounds)
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi);
        if inside {
            points.push(x);
        }
        if attempts >= 4096 && (points.len() as f64) < 1e-3 * attempts as f64 {
            return Err(Error::LowAcceptance {
                rate: points.len() as f64 / attempts as f64,
            });
        }
    }
    let w = 1.0 / n as f64;
    Ok(SampleSet {
        points,
        weights: vec![w; n],
        scheme: "gaussian_posterior".to_string(),
        seed,
    })
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

/// Weighted mean and variance of per-sample QoI values.
///
/// For equal weights the variance carries the unbiased n/(n-1) correction;
/// for general weights it is the plain weighted central second moment.
pub fn moments(values: &[f64], weights: &[f64]) -> Result<(f64, f64)> {
    if values.len() != weights.len() {
        return Err(Error::validation(
            "values and weights must have equal length",
        ));
    }
    let n = values.len();
    if n < 2 {
        return Err(Error::Degenerate(
            "variance needs at least two samples".into(),
        ));
    }
    let terms: Vec<f64> = values.iter().zip(weights).map(|(y, w)| w * y).collect();
    let m = pairwise_sum(&terms);
    let sq: Vec<f64> = values
        .iter()
        .zip(weights)
        .map(|(y, w)| w * (y - m) * (y - m))
        .collect();
    let mut var = pairwise_sum(&sq);
    let equal = weights
        .iter()
        .all(|w| (w - 1.0 / n as f64).abs() < 1e-12 / n as f64);
    if equal {
        var *= n as f64 / (n - 1) as f64;
    }
    Ok((m, var))
}

/// Density estimation method for [`density`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityMethod {
    Histogram {
        bins: usize,
    },
    /// Gaussian kernel with Silverman bandwidth 1.06 s n^(-1/5).
    Kde,
}

/// A sampled density curve; for histograms the x values are bin centers.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl DensityCurve {
    /// Trapezoid integral of the curve.
    pub fn integral(&self) -> f64 {
        let mut s = 0.0;
        for j in 1..self.x.len() {
            s += 0.5 * (self.y[j] + self.y[j - 1]) * (self.x[j] - self.x[j - 1]);
        }
        s
    }
}

/// Estimate the pdf of scalar values; normalized to integrate to one.
pub fn density(values: &[f64], method: DensityMethod) -> Result<DensityCurve> {
    if values.len() < 2 {
        return Err(Error::Degenerate(
            "density needs at least two values".into(),
        ));
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::Degenerate(
            "all values identical; density is a point mass".into(),
        ));
    }
    match method {
        DensityMethod::Histogram { bins } => {
            if bins == 0 {
                return Err(Error::validation("histogram needs at least one bin"));
            }
            let width = (hi - lo) / bins as f64;
            let mut counts = vec![0usize; bins];
            for &v in values {
                let b = (((v - lo) / width) as usize).min(bins - 1);
                counts[b] += 1;
            }
            let norm = values.len() as f64 * width;
            // step curve sampled at bin edges so the trapezoid integral is exact
            let mut x = Vec::with_capacity(2 * bins);
            let mut y = Vec::with_capacity(2 * bins);
            for (b, &c) in counts.iter().enumerate() {
                let d = c as f64 / norm;
                x.push(lo + b as f64 * width);
                y.push(d);
                x.push(lo + (b + 1) as f64 * width);
                y.push(d);
            }
            Ok(DensityCurve { x, y })
        }
        DensityMethod::Kde => {
            let n = values.len();
            let s = crate::math::sample_variance(values).sqrt();
            if s == 0.0 {
                return Err(Error::Degenerate(
                    "zero sample spread; KDE bandwidth is zero".into(),
                ));
            }
            let h = 1.06 * s * (n as f64).powf(-0.2);
            let (a, b) = (lo - 6.0 * h, hi + 6.0 * h);
            // resolve the kernel scale so the trapezoid integral is accurate
            let ngrid = (((b - a) / (h / 10.0)).ceil() as usize).clamp(512, 8192);
            let x: Vec<f64> = (0..=ngrid)
                .map(|j| a + (b - a) * j as f64 / ngrid as f64)
                .collect();
            let c = 1.0 / (n as f64 * h * (2.0 * core::f64::consts::PI).sqrt());
            let y: Vec<f64> = x
                .iter()
                .map(|&xi| {
                    let terms: Vec<f64> = values
                        .iter()
                        .map(|&v| {
                            let z = (xi - v) / h;
                            (-0.5 * z * z).exp()
                        })
                        .collect();
                    c * pairwise_sum(&terms)
                })
                .collect();
            Ok(DensityCurve { x, y })
        }
    }
}

/// Per-time empirical quantile curves.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileBand {
    pub levels: Vec<f64>,
    /// curves[l][t] is the level-l quantile at time index t.
    pub curves: Vec<Vec<f64>>,
}

/// Empirical per-time quantiles of sample trajectories (linear interpolation
/// of order statistics). `per_time_values` holds one row per sample.
pub fn quantile_band(per_time_values: &[Vec<f64>], levels: &[f64]) -> Result<QuantileBand> {
    if per_time_values.is_empty() {
        return Err(Error::validation("no samples"));
    }
    let n = per_time_values.len();
    let nt = per_time_values[0].len();
    if per_time_values.iter().any(|r| r.len() != nt) {
        return Err(Error::validation("sample rows have unequal lengths"));
    }
    for w in levels.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::validation("levels must be increasing"));
        }
    }
    if levels.iter().any(|&l| l <= 0.0 || l >= 1.0) {
        return Err(Error::validation("levels must be in (0,1)"));
    }
    let lmin = levels
        .iter()
        .cloned()
        .fold(1.0_f64, f64::min)
        .min(1.0 - levels.iter().cloned().fold(0.0_f64, f64::max));
    if (n as f64) < 1.0 / lmin {
        return Err(Error::Validation(format!(
            "{n} samples are too few for quantile level {lmin}"
        )));
    }

    let mut curves = vec![vec![0.0; nt]; levels.len()];
    let mut col = vec![0.0; n];
    for t in 0..nt {
        for (j, row) in per_time_values.iter().enumerate() {
            col[j] = row[t];
        }
        col.sort_by(f64::total_cmp);
        for (li, &level) in levels.iter().enumerate() {
            curves[li][t] = interp_quantile(&col, level);
        }
    }
    Ok(QuantileBand {
        levels: levels.to_vec(),
        curves,
    })
}

fn interp_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let j = h.floor() as usize;
    if j + 1 >= n {
        return sorted[n - 1];
    }
    sorted[j] + (h - j as f64) * (sorted[j + 1] - sorted[j])
}

/// Convenience: weighted mean of a function over a sample set.
pub fn weighted_mean(set: &SampleSet, values: &[f64]) -> f64 {
    let terms: Vec<f64> = values
        .iter()
        .zip(&set.weights)
        .map(|(y, w)| w * y)
        .collect();
    let _ = fmean; // mean is the unweighted special case
    pairwise_sum(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn monte_carlo_stays_in_the_box() {
        let priors = vec![
            Distribution::Uniform { a: 0.25, b: 0.35 },
            Distribution::Uniform { a: 0.06, b: 0.18 },
        ];
        let set = draw(&priors, 1000, Scheme::MonteCarlo, 1).unwrap();
        assert_eq!(set.n(), 1000);
        for p in &set.points {
            assert!(p[0] >= 0.25 && p[0] <= 0.35);
            assert!(p[1] >= 0.06 && p[1] <= 0.18);
        }
        let wsum: f64 = set.weights.iter().sum();
        assert!((wsum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lhs_stratifies_each_dimension() {
        let priors = vec![Distribution::Uniform { a: 0.0, b: 1.0 }];
        let set = draw(&priors, 10, Scheme::Lhs, 3).unwrap();
        let mut seen = [false; 10];
        for p in &set.points {
            let b = (p[0] * 10.0) as usize;
            assert!(!seen[b], "two samples in stratum {b}");
            seen[b] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn halton_first_emitted_point_is_bit_reversal_of_21() {
        // radical-inverse base 2 of 21 = 10101_2 -> 0.10101_2 = 0.65625
        assert_eq!(radical_inverse(2, 21), 0.65625);
        let priors = vec![Distribution::Uniform { a: 0.0, b: 1.0 }];
        let set = draw(&priors, 1, Scheme::Halton, 0).unwrap();
        assert_eq!(set.points[0][0], 0.65625);
    }

    #[test]
    fn halton_points_are_distinct_and_interior() {
        let priors = vec![
            Distribution::Uniform { a: 0.0, b: 1.0 },
            Distribution::Gaussian {
                mu: 0.0,
                sigma: 1.0,
            },
            Distribution::LogNormal {
                mu_log: 0.0,
                sigma_log: 0.5,
            },
        ];
        let set = draw(&priors, 200, Scheme::Halton, 0).unwrap();
        for d in 0..3 {
            let (lo, hi) = priors[d].support();
            let mut col = set.column(d);
            for &v in &col {
                assert!(v > lo && v < hi);
            }
            col.sort_by(f64::total_cmp);
            col.dedup();
            assert_eq!(col.len(), 200);
        }
    }

    #[test]
    fn schemes_are_deterministic() {
        let priors = vec![Distribution::Uniform { a: -1.0, b: 1.0 }];
        for scheme in [Scheme::MonteCarlo, Scheme::Lhs, Scheme::Halton] {
            let a = draw(&priors, 64, scheme, 9).unwrap();
            let b = draw(&priors, 64, scheme, 9).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn truncated_gaussian_respects_bounds_under_all_schemes() {
        let priors = vec![Distribution::TruncatedGaussian {
            mu: 0.0,
            sigma: 1.0,
            lo: -0.5,
            hi: 2.0,
        }];
        for scheme in [Scheme::MonteCarlo, Scheme::Lhs, Scheme::Halton] {
            let set = draw(&priors, 500, scheme, 4).unwrap();
            for p in &set.points {
                assert!(p[0] >= -0.5 && p[0] <= 2.0);
            }
        }
    }

    #[test]
    fn degenerate_covariance_returns_the_mean() {
        let post = GaussianPosterior {
            mean: vec![0.3, 0.1],
            covariance: DMatrix::zeros(2, 2),
            bounds: vec![(0.0, 1.0), (0.0, 1.0)],
            names: vec!["beta".into(), "r".into()],
            flags: vec![],
            weak_directions: vec![],
        };
        let set = draw_posterior(&post, 50, 2).unwrap();
        for p in &set.points {
            assert_eq!(p, &vec![0.3, 0.1]);
        }
    }

    #[test]
    fn posterior_sampling_recovers_covariance() {
        let cov = dmatrix![0.7995e-4, 0.1064e-4; 0.1064e-4, 0.2609e-4];
        let post = GaussianPosterior {
            mean: vec![0.2848, 0.0861],
            covariance: cov.clone(),
            bounds: vec![(0.25, 0.35), (0.06, 0.18)],
            names: vec!["beta".into(), "r".into()],
            flags: vec![],
            weak_directions: vec![],
        };
        let set = draw_posterior(&post, 50_000, 7).unwrap();
        // empirical covariance, entrywise within 5% of the diagonal scale
        let mean: Vec<f64> = (0..2)
            .map(|d| set.column(d).iter().sum::<f64>() / set.n() as f64)
            .collect();
        for r in 0..2 {
            for c in 0..2 {
                let emp: f64 = set
                    .points
                    .iter()
                    .map(|p| (p[r] - mean[r]) * (p[c] - mean[c]))
                    .sum::<f64>()
                    / (set.n() - 1) as f64;
                let scale = (cov[(r, r)] * cov[(c, c)]).sqrt();
                assert!(
                    (emp - cov[(r, c)]).abs() < 0.05 * scale,
                    "cov[{r}{c}] {emp} vs {}",
                    cov[(r, c)]
                );
            }
        }
    }

    #[test]
    fn bounds_excluding_the_mean_raise_low_acceptance() {
        let post = GaussianPosterior {
            mean: vec![10.0],
            covariance: dmatrix![1e-6],
            bounds: vec![(0.0, 1.0)],
            names: vec!["x".into()],
            flags: vec![],
            weak_directions: vec![],
        };
        assert!(matches!(
            draw_posterior(&post, 10, 1),
            Err(Error::LowAcceptance { .. })
        ));
    }

    #[test]
    fn moments_of_constant_and_uniform() {
        let vals = vec![2.5; 100];
        let w = vec![0.01; 100];
        let (m, v) = moments(&vals, &w).unwrap();
        assert!((m - 2.5).abs() < 1e-12);
        assert!(v.abs() < 1e-24);

        let priors = vec![Distribution::Uniform { a: 1.0, b: 3.0 }];
        let set = draw(&priors, 100_000, Scheme::MonteCarlo, 5).unwrap();
        let col = set.column(0);
        let (m, v) = moments(&col, &set.weights).unwrap();
        let se = (4.0 / 12.0_f64 / 100_000.0).sqrt();
        assert!((m - 2.0).abs() < 3.0 * se, "mean {m}");
        assert!((v - 4.0 / 12.0).abs() < 0.01);
    }

    #[test]
    fn moments_needs_two_samples() {
        assert!(moments(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn histogram_and_kde_integrate_to_one() {
        let mut rng = DetRng::new(11);
        let vals: Vec<f64> = (0..5000).map(|_| rng.gaussian()).collect();
        let hist = density(&vals, DensityMethod::Histogram { bins: 40 }).unwrap();
        assert!((hist.integral() - 1.0).abs() < 1e-6);
        let kde = density(&vals, DensityMethod::Kde).unwrap();
        assert!(
            (kde.integral() - 1.0).abs() < 1e-6,
            "kde integral {}",
            kde.integral()
        );
    }

    #[test]
    fn kde_mode_of_standard_normal_is_near_zero() {
        let mut rng = DetRng::new(13);
        let vals: Vec<f64> = (0..100_000).map(|_| rng.gaussian()).collect();
        let kde = density(&vals, DensityMethod::Kde).unwrap();
        let arg = kde
            .y
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert!(kde.x[arg].abs() < 0.05, "mode at {}", kde.x[arg]);
    }

    #[test]
    fn kde_detects_two_modes_of_a_mixture() {
        // equal mixture of N(0, 0.1^2) and N(1, 0.1^2); count strict sign
        // changes of the slope from + to -
        let mut rng = DetRng::new(17);
        let vals: Vec<f64> = (0..10_000)
            .map(|j| {
                let z = 0.1 * rng.gaussian();
                if j % 2 == 0 {
                    z
                } else {
                    1.0 + z
                }
            })
            .collect();
        let kde = density(&vals, DensityMethod::Kde).unwrap();
        let mut maxima = 0;
        for j in 1..kde.y.len() - 1 {
            if kde.y[j] > kde.y[j - 1] && kde.y[j] > kde.y[j + 1] && kde.y[j] > 0.1 {
                maxima += 1;
            }
        }
        assert_eq!(maxima, 2);
    }

    #[test]
    fn identical_values_are_a_degenerate_density() {
        assert!(matches!(
            density(&[1.0, 1.0, 1.0], DensityMethod::Kde),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn quantile_band_brackets_uniform_samples() {
        let mut rng = DetRng::new(19);
        let rows: Vec<Vec<f64>> = (0..100_000).map(|_| vec![rng.uniform()]).collect();
        let band = quantile_band(&rows, &[0.05, 0.95]).unwrap();
        assert!((band.curves[0][0] - 0.05).abs() < 0.01);
        assert!((band.curves[1][0] - 0.95).abs() < 0.01);
    }

    #[test]
    fn quantile_band_is_monotone_in_level_and_collapses_on_constants() {
        let rows: Vec<Vec<f64>> = (0..50).map(|_| vec![3.0, 4.0]).collect();
        let band = quantile_band(&rows, &[0.5, 0.95]).unwrap();
        assert_eq!(band.curves[0], vec![3.0, 4.0]);
        assert_eq!(band.curves[1], vec![3.0, 4.0]);

        let mut rng = DetRng::new(23);
        let rows: Vec<Vec<f64>> = (0..1000)
            .map(|_| vec![rng.gaussian(), rng.gaussian()])
            .collect();
        let band = quantile_band(&rows, &[0.5, 0.95]).unwrap();
        for t in 0..2 {
            assert!(band.curves[1][t] >= band.curves[0][t]);
        }
    }

    #[test]
    fn too_few_samples_for_extreme_levels() {
        let rows: Vec<Vec<f64>> = (0..5).map(|j| vec![j as f64]).collect();
        assert!(quantile_band(&rows, &[0.05, 0.95]).is_err());
    }
}
