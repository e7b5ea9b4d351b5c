//! Nelder–Mead simplex minimization with standard coefficients
//! (reflect 1, expand 2, contract 0.5, shrink 0.5).
//!
//! Works on unconstrained vectors; callers handle bounds by
//! reparameterization. Objective values of +inf are legal and push the
//! simplex away from failed evaluations.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone)]
pub struct NmOptions {
    pub max_iters: usize,
    /// Convergence: spread of objective values across the simplex.
    pub f_tol: f64,
    /// Convergence: relative simplex diameter.
    pub x_tol: f64,
}

impl Default for NmOptions {
    fn default() -> Self {
        NmOptions {
            max_iters: 2000,
            f_tol: 1e-10,
            x_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iters: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

pub fn minimize<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: &NmOptions) -> NmResult {
    let n = x0.len();
    if n == 0 {
        return NmResult {
            x: vec![],
            fx: f(&[]),
            iters: 0,
            converged: true,
        };
    }

    // fminsearch-style initial simplex: 5% steps, absolute fallback at zero
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += if p[i] != 0.0 { 0.05 * p[i] } else { 0.00025 };
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();

    let mut iters = 0;
    let mut converged = false;
    while iters < opts.max_iters {
        iters += 1;

        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let reordered: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let revalues: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        simplex = reordered;
        values = revalues;

        let f_best = values[0];
        let f_worst = values[n];
        let spread = f_worst - f_best;
        let mut diameter = 0.0_f64;
        for p in &simplex[1..] {
            for j in 0..n {
                let scale = simplex[0][j].abs().max(1.0);
                diameter = diameter.max((p[j] - simplex[0][j]).abs() / scale);
            }
        }
        if spread.abs() < opts.f_tol && diameter < opts.x_tol {
            converged = true;
            break;
        }

        // centroid of all but the worst
        let mut centroid = vec![0.0; n];
        for p in &simplex[..n] {
            for j in 0..n {
                centroid[j] += p[j] / n as f64;
            }
        }

        let worst = simplex[n].clone();
        let reflected: Vec<f64> = (0..n)
            .map(|j| centroid[j] + REFLECT * (centroid[j] - worst[j]))
            .collect();
        let f_reflected = f(&reflected);

        if f_reflected < values[0] {
            let expanded: Vec<f64> = (0..n)
                .map(|j| centroid[j] + EXPAND * (reflected[j] - centroid[j]))
                .collect();
            let f_expanded = f(&expanded);
            if f_expanded < f_reflected {
                simplex[n] = expanded;
                values[n] = f_expanded;
            } else {
                simplex[n] = reflected;
                values[n] = f_reflected;
            }
            continue;
        }
        if f_reflected < values[n - 1] {
            simplex[n] = reflected;
            values[n] = f_reflected;
            continue;
        }

        // contraction (outside when the reflection improved on the worst)
        let (towards, f_towards) = if f_reflected < values[n] {
            let c: Vec<f64> = (0..n)
                .map(|j| centroid[j] + CONTRACT * (reflected[j] - centroid[j]))
                .collect();
            let fc = f(&c);
            (c, fc)
        } else {
            let c: Vec<f64> = (0..n)
                .map(|j| centroid[j] + CONTRACT * (worst[j] - centroid[j]))
                .collect();
            let fc = f(&c);
            (c, fc)
        };
        if f_towards < values[n].min(f_reflected) {
            simplex[n] = towards;
            values[n] = f_towards;
            continue;
        }

        // shrink toward the best vertex
        for i in 1..=n {
            for j in 0..n {
                simplex[i][j] = simplex[0][j] + SHRINK * (simplex[i][j] - simplex[0][j]);
            }
            values[i] = f(&simplex[i]);
        }
    }

    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    NmResult {
        x: simplex[best].clone(),
        fx: values[best],
        iters,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 1.5) * (x[0] - 1.5) + 4.0 * (x[1] + 0.5) * (x[1] + 0.5);
        let res = minimize(f, &[0.0, 0.0], &NmOptions::default());
        assert!(res.converged);
        assert!((res.x[0] - 1.5).abs() < 1e-6, "{:?}", res.x);
        assert!((res.x[1] + 0.5).abs() < 1e-6);
    }

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &[f64]| {
            let a = 1.0 - x[0];
            let b = x[1] - x[0] * x[0];
            a * a + 100.0 * b * b
        };
        let res = minimize(
            f,
            &[-1.2, 1.0],
            &NmOptions {
                max_iters: 5000,
                ..Default::default()
            },
        );
        assert!((res.x[0] - 1.0).abs() < 1e-4, "{:?}", res.x);
        assert!((res.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn survives_infinite_regions() {
        // objective undefined left of x = 0
        let f = |x: &[f64]| {
            if x[0] < 0.0 {
                f64::INFINITY
            } else {
                (x[0] - 0.3) * (x[0] - 0.3)
            }
        };
        let res = minimize(f, &[2.0], &NmOptions::default());
        assert!((res.x[0] - 0.3).abs() < 1e-6);
    }

    #[test]
    fn zero_dimension_returns_immediately() {
        let res = minimize(|_| 7.0, &[], &NmOptions::default());
        assert_eq!(res.fx, 7.0);
        assert!(res.converged);
    }
}
