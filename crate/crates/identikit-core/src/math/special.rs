//! Gaussian and chi-square special functions.

#[allow(unused_imports)]
use num_traits::Float;

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Standard normal quantile (inverse CDF).
///
/// Acklam's rational approximation refined by one Halley step against
/// `erfc`, giving close to full f64 accuracy on (0, 1).
pub fn norm_quantile(p: f64) -> f64 {
    assert!(
        p > 0.0 && p < 1.0,
        "norm_quantile requires p in (0,1), got {p}"
    );

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // Halley refinement
    let e = norm_cdf(x) - p;
    let u = e * (2.0 * core::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x -= u / (1.0 + x * u / 2.0);
    x
}

/// Alpha-quantile of the chi-square distribution with one degree of freedom.
///
/// Uses the identity chi2_1 = Z^2 for standard normal Z, so the quantile is
/// the squared normal quantile of (1+alpha)/2.
pub fn chi2_quantile_1df(alpha: f64) -> f64 {
    assert!(
        alpha > 0.0 && alpha < 1.0,
        "alpha must be in (0,1), got {alpha}"
    );
    let z = norm_quantile(0.5 * (1.0 + alpha));
    z * z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_cdf_reference_values() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((norm_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
        assert!((norm_cdf(-1.0) - 0.15865525393145707).abs() < 1e-13);
    }

    #[test]
    fn norm_quantile_round_trips_cdf() {
        for &p in &[1e-9, 1e-4, 0.02, 0.3, 0.5, 0.8, 0.975, 0.999, 1.0 - 1e-9] {
            let x = norm_quantile(p);
            assert!(
                (norm_cdf(x) - p).abs() < 1e-12 * p.max(1.0 - p).max(1e-3),
                "p={p}: cdf(q(p))={}",
                norm_cdf(x)
            );
        }
    }

    #[test]
    fn chi2_one_dof_95_quantile() {
        // Oracle: bisection on the regularized lower incomplete gamma
        // P(1/2, x/2), the chi-square CDF with one degree of freedom.
        fn gammp_half(x: f64) -> f64 {
            // series expansion of P(a, x) with a = 1/2
            let a = 0.5;
            if x <= 0.0 {
                return 0.0;
            }
            if x < a + 1.0 {
                let mut ap = a;
                let mut sum = 1.0 / a;
                let mut del = sum;
                for _ in 0..200 {
                    ap += 1.0;
                    del *= x / ap;
                    sum += del;
                    if del.abs() < sum.abs() * 1e-16 {
                        break;
                    }
                }
                sum * (-x + a * x.ln() - ln_gamma_half()).exp()
            } else {
                // continued fraction for Q(a, x)
                let mut b = x + 1.0 - a;
                let mut c = 1e300;
                let mut d = 1.0 / b;
                let mut h = d;
                for i in 1..200 {
                    let an = -(i as f64) * (i as f64 - a);
                    b += 2.0;
                    d = an * d + b;
                    if d.abs() < 1e-300 {
                        d = 1e-300;
                    }
                    c = b + an / c;
                    if c.abs() < 1e-300 {
                        c = 1e-300;
                    }
                    d = 1.0 / d;
                    let del = d * c;
                    h *= del;
                    if (del - 1.0).abs() < 1e-16 {
                        break;
                    }
                }
                1.0 - (-x + a * x.ln() - ln_gamma_half()).exp() * h
            }
        }
        fn ln_gamma_half() -> f64 {
            // Gamma(1/2) = sqrt(pi)
            0.5 * core::f64::consts::PI.ln()
        }

        let cdf = |x: f64| gammp_half(x / 2.0);
        let (mut lo, mut hi) = (0.0, 30.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < 0.95 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = 0.5 * (lo + hi);

        let q = chi2_quantile_1df(0.95);
        assert!((q - oracle).abs() < 1e-9, "q={q}, oracle={oracle}");
        assert!((q - 3.8415).abs() < 1e-3);
    }
}
