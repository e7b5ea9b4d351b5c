//! Numerical support: special functions, deterministic summation, and small
//! symmetric-matrix routines shared across modules.

pub mod linalg;
pub mod special;

/// Pairwise (cascade) summation.
///
/// Deterministic for a fixed input order and markedly more accurate than a
/// left fold on long accumulations; used for every estimator reduction so
/// results do not depend on evaluation parallelism.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Mean via pairwise summation. Empty input yields NaN.
pub fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Unbiased sample variance (n-1 normalization).
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let sq: alloc::vec::Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    pairwise_sum(&sq) / (n - 1) as f64
}

/// Vertex of the parabola through three points with `x1` the middle abscissa.
///
/// Returns `(x*, y*)`; falls back to the middle point when the three points
/// are collinear or the curvature has the wrong sign for a maximum.
pub fn parabola_vertex(
    (x0, y0): (f64, f64),
    (x1, y1): (f64, f64),
    (x2, y2): (f64, f64),
) -> (f64, f64) {
    // Newton's divided differences: p(x) = y0 + c1 (x-x0) + c2 (x-x0)(x-x1)
    let c1 = (y1 - y0) / (x1 - x0);
    let c2 = ((y2 - y1) / (x2 - x1) - c1) / (x2 - x0);
    if c2 >= 0.0 || !c2.is_finite() {
        return (x1, y1);
    }
    let xv = 0.5 * (x0 + x1 - c1 / c2);
    if xv < x0 || xv > x2 {
        return (x1, y1);
    }
    let yv = y0 + c1 * (xv - x0) + c2 * (xv - x0) * (xv - x1);
    (xv, yv)
}
