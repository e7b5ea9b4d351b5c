//! Profile likelihood with chi-square confidence thresholds.
//!
//! The profile of a parameter is the full NLL minimized over all other free
//! parameters at each grid value, warm-started left-to-right and then
//! right-to-left (keeping the pointwise minimum) plus fresh seeded restarts
//! at every point. A parameter counts as practically identifiable when the
//! curve crosses min(PL) + Delta_alpha chi2_1 on both sides of its minimum
//! inside the grid.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fit::nelder_mead::{minimize, NmOptions};
use crate::fit::{to_bounded, to_unbounded, FitResult, LikelihoodSpec, SigmaMode};
use crate::math::special::chi2_quantile_1df;
use crate::rng::{mix_seed, DetRng};

#[allow(unused_imports)]
use num_traits::Float;

/// Reoptimization slack: profile values may dip below nll_at_mle by at most
/// this much before it counts as an inconsistency.
pub const REOPT_TOL: f64 = 1e-6;

/// Span of the profile grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileSpan {
    /// mle +- this many posterior standard deviations, clipped to bounds.
    PosteriorSigmas(f64),
    /// The parameter's whole prior interval.
    FullBounds,
    Explicit(f64, f64),
}

/// Grid specification for [`profile_likelihood`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub points: usize,
    pub span: ProfileSpan,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            points: 25,
            span: ProfileSpan::PosteriorSigmas(4.0),
        }
    }
}

/// One parameter's profile curve on the full-NLL scale.
#[derive(Debug, Clone)]
pub struct ProfileCurve {
    pub param: String,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Reoptimization succeeded at this grid point.
    pub ok: Vec<bool>,
    pub nll_at_mle: f64,
    /// Delta_alpha chi2_1 at the alpha the curve was built with.
    pub threshold: f64,
    pub alpha: f64,
}

impl ProfileCurve {
    /// Smallest successfully evaluated profile value.
    pub fn min_value(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.ok)
            .filter(|(_, ok)| **ok)
            .map(|(v, _)| *v)
            .fold(f64::INFINITY, f64::min)
    }

    /// Grid value at the profile minimum.
    pub fn argmin(&self) -> f64 {
        let mut best = (f64::INFINITY, self.grid[0]);
        for ((&v, &ok), &g) in self.values.iter().zip(&self.ok).zip(&self.grid) {
            if ok && v < best.0 {
                best = (v, g);
            }
        }
        best.1
    }
}

/// Confidence interval from a profile curve.
#[derive(Debug, Clone, PartialEq)]
pub struct PlInterval {
    pub lo: f64,
    pub hi: f64,
    /// True when the curve crosses the threshold on both sides of the
    /// minimum inside the grid.
    pub identifiable: bool,
}

/// Profile one free parameter of a fitted likelihood.
///
/// `restarts` counts the fresh starts per grid point, on top of the warm
/// starts chained from the neighbors.
pub fn profile_likelihood(
    spec: &LikelihoodSpec,
    fit: &FitResult,
    param: &str,
    grid_spec: &GridSpec,
    restarts: usize,
    seed: u64,
    alpha: f64,
) -> Result<ProfileCurve> {
    let idx = fit
        .names
        .iter()
        .position(|n| n == param)
        .ok_or_else(|| Error::Validation(format!("'{param}' is not a fitted parameter")))?;
    if grid_spec.points < 3 {
        return Err(Error::validation("profile grid needs at least 3 points"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::validation("alpha must be in (0,1)"));
    }

    // profiled_two specs are profiled at the sigmas the sweep selected
    let base_spec = match spec.sigma_mode {
        SigmaMode::ProfiledTwo { .. } => {
            let mut s = spec.clone();
            s.sigma_mode = SigmaMode::Known(fit.sigma_hat.clone());
            s
        }
        _ => spec.clone(),
    };

    let (lo_b, hi_b) = fit.bounds[idx];
    let (mut lo, mut hi) = match grid_spec.span {
        ProfileSpan::PosteriorSigmas(m) => {
            let sd = fit.covariance[(idx, idx)].max(0.0).sqrt();
            if sd > 0.0 && sd.is_finite() {
                (fit.theta_mle[idx] - m * sd, fit.theta_mle[idx] + m * sd)
            } else {
                (lo_b, hi_b)
            }
        }
        ProfileSpan::FullBounds => (lo_b, hi_b),
        ProfileSpan::Explicit(a, b) => (a, b),
    };
    lo = lo.max(lo_b);
    hi = hi.min(hi_b);
    if !(lo < hi) {
        return Err(Error::validation(
            "profile grid is empty after clipping to bounds",
        ));
    }
    let n = grid_spec.points;
    let grid: Vec<f64> = (0..n)
        .map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64)
        .collect();

    // other parameters' MLE values, used as a universal warm start
    let others_mle: Vec<f64> = fit
        .theta_mle
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .map(|(_, v)| *v)
        .collect();

    let nm = NmOptions::default();
    let mut values = vec![f64::INFINITY; n];
    let mut ok = vec![false; n];
    let mut carry: Option<Vec<f64>> = None;

    let pass = |order: Vec<usize>,
                carry: &mut Option<Vec<f64>>,
                values: &mut Vec<f64>,
                ok: &mut Vec<bool>|
     -> Result<()> {
        for gi in order {
            let v = grid[gi];
            let reduced = base_spec.reduced(param, v)?;
            let bounds = reduced.bounds();
            let k = bounds.len();

            // candidate starts: warm neighbor, MLE others, fresh uniforms
            let mut starts: Vec<Vec<f64>> = Vec::new();
            if let Some(c) = carry.as_ref() {
                starts.push(c.clone());
            }
            starts.push(others_mle.clone());
            let mut rng = DetRng::with_stream(mix_seed(seed, gi as u64), 0x9F0F);
            for _ in 0..restarts {
                starts.push(bounds.iter().map(|&(a, b)| rng.uniform_in(a, b)).collect());
            }

            let mut best: Option<(f64, Vec<f64>)> = None;
            for s in &starts {
                let (x, fx) = if k == 0 {
                    (vec![], reduced.objective(&[]))
                } else {
                    let u0 = to_unbounded(s, &bounds);
                    let res = minimize(|u| reduced.objective(&to_bounded(u, &bounds)), &u0, &nm);
                    (to_bounded(&res.x, &bounds), res.fx)
                };
                if fx.is_finite() && best.as_ref().map_or(true, |(b, _)| fx < *b) {
                    best = Some((fx, x));
                }
            }
            if let Some((_, x)) = best {
                let pl = reduced.nll(&x).unwrap_or(f64::INFINITY);
                if pl < values[gi] {
                    values[gi] = pl;
                }
                ok[gi] = ok[gi] || pl.is_finite();
                *carry = Some(x);
            } else {
                *carry = None;
            }
        }
        Ok(())
    };

    pass((0..n).collect(), &mut carry, &mut values, &mut ok)?;
    carry = None;
    pass((0..n).rev().collect(), &mut carry, &mut values, &mut ok)?;

    Ok(ProfileCurve {
        param: param.into(),
        grid,
        values,
        ok,
        nll_at_mle: fit.nll_value,
        threshold: chi2_quantile_1df(alpha),
        alpha,
    })
}

/// Confidence interval at level `alpha` from a profile curve: the connected
/// region around the profile minimum where PL <= min(PL) + Delta_alpha
/// chi2_1, with linear interpolation at the crossings.
pub fn pl_interval(curve: &ProfileCurve, alpha: f64) -> Result<PlInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::validation("alpha must be in (0,1)"));
    }
    let delta = chi2_quantile_1df(alpha);
    let n = curve.grid.len();
    let vals: Vec<f64> = curve
        .values
        .iter()
        .zip(&curve.ok)
        .map(|(&v, &ok)| if ok { v } else { f64::INFINITY })
        .collect();
    let (arg, min_v) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .unwrap();
    if !min_v.is_finite() {
        return Err(Error::Degenerate(
            "profile curve has no finite values".into(),
        ));
    }
    let level = min_v + delta;

    let mut lo = curve.grid[0];
    let mut crossed_lo = false;
    let mut i = arg;
    while i > 0 {
        if vals[i - 1] <= level {
            i -= 1;
        } else {
            let (x0, y0) = (curve.grid[i - 1], vals[i - 1]);
            let (x1, y1) = (curve.grid[i], vals[i]);
            lo = if y0.is_finite() {
                x1 - (x1 - x0) * (level - y1) / (y0 - y1)
            } else {
                x1
            };
            crossed_lo = true;
            break;
        }
    }
    if !crossed_lo {
        lo = curve.grid[0];
    }

    let mut hi = curve.grid[n - 1];
    let mut crossed_hi = false;
    let mut j = arg;
    while j + 1 < n {
        if vals[j + 1] <= level {
            j += 1;
        } else {
            let (x0, y0) = (curve.grid[j], vals[j]);
            let (x1, y1) = (curve.grid[j + 1], vals[j + 1]);
            hi = if y1.is_finite() {
                x0 + (x1 - x0) * (level - y0) / (y1 - y0)
            } else {
                x0
            };
            crossed_hi = true;
            break;
        }
    }
    if !crossed_hi {
        hi = curve.grid[n - 1];
    }

    Ok(PlInterval {
        lo,
        hi,
        identifiable: crossed_lo && crossed_hi,
    })
}
