//! Catalogue of input–output coefficient maps and their inversion.
//!
//! Three worked cases are encoded as data: SIR observed through I only, SIR
//! observed through I and R, and SEIRD observed through I, R and D. Each
//! case maps parameters to the coefficients of the monic input–output
//! equations; inverting the map (under declared known quantities) either
//! recovers the parameters uniquely or returns the identifiable
//! combinations. The numerical counterpart is [`indistinguishable`], which
//! checks output equality of two parameter sets by direct simulation.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{integrate, ModelSpec, ParameterVector};
use crate::observe::{observe, ObservationOperator, Observed};

#[allow(unused_imports)]
use num_traits::Float;

/// Relative residual above which a redundant coefficient is declared
/// inconsistent with the others.
const CONSISTENCY_TOL: f64 = 1e-8;

/// The catalogued (model, observables) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructuralCaseId {
    /// SIR with Y = I/K.
    SirIOnly,
    /// SIR with Y = I/K and Z = R/K.
    SirIAndR,
    /// SEIRD with Y = I/K, Z = R/K, W = D/K.
    SeirdIrd,
}

impl StructuralCaseId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sir_I_only" => Ok(StructuralCaseId::SirIOnly),
            "sir_I_and_R" => Ok(StructuralCaseId::SirIAndR),
            "seird_IRD" => Ok(StructuralCaseId::SeirdIrd),
            other => Err(Error::Validation(format!(
                "unknown structural case '{other}' (catalogue: sir_I_only, sir_I_and_R, seird_IRD)"
            ))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            StructuralCaseId::SirIOnly => "sir_I_only",
            StructuralCaseId::SirIAndR => "sir_I_and_R",
            StructuralCaseId::SeirdIrd => "seird_IRD",
        }
    }

    /// Labels of the coefficient vector entries, in order.
    pub fn coefficient_labels(&self) -> Vec<&'static str> {
        match self {
            StructuralCaseId::SirIOnly => vec!["K*beta/N", "K*r*beta/N"],
            StructuralCaseId::SirIAndR => vec!["beta", "beta*K/N", "r"],
            StructuralCaseId::SeirdIrd => {
                vec![
                    "i+d+r",
                    "i*(d+r-beta)",
                    "beta*K/N",
                    "beta*K/N*(i+d+r)",
                    "r",
                    "d",
                ]
            }
        }
    }

    /// Parameter names the coefficient map consumes.
    pub fn required_params(&self) -> Vec<&'static str> {
        match self {
            StructuralCaseId::SirIOnly | StructuralCaseId::SirIAndR => {
                vec!["beta", "r", "K", "N_pop"]
            }
            StructuralCaseId::SeirdIrd => vec!["beta", "r", "d", "i", "K", "N_pop"],
        }
    }
}

/// Which hyper-quantities are treated as known when inverting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Knowns {
    pub k: bool,
    pub n_pop: bool,
}

/// A catalogued case together with the knowledge assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StructuralCase {
    pub id: StructuralCaseId,
    pub knowns: Knowns,
}

/// Outcome of inverting a coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    /// Every parameter is recovered: (name, value) pairs.
    Unique(Vec<(String, f64)>),
    /// Only combinations are identified: (expression, value) pairs.
    Combinations(Vec<(String, f64)>),
}

impl Verdict {
    pub fn is_unique(&self) -> bool {
        matches!(self, Verdict::Unique(_))
    }
    pub fn entries(&self) -> &[(String, f64)] {
        match self {
            Verdict::Unique(v) | Verdict::Combinations(v) => v,
        }
    }
    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries()
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

fn lookup(params: &[(&str, f64)], name: &str) -> Result<f64> {
    let v = params
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::Validation(format!("missing parameter '{name}'")))?;
    if !(v > 0.0) {
        return Err(Error::Validation(format!(
            "parameter '{name}' must be positive, got {v}"
        )));
    }
    Ok(v)
}

/// Coefficients of the monic input–output equations at a full parameter
/// assignment (including K and N_pop). All parameters must be positive.
pub fn structural_coefficients(id: StructuralCaseId, params: &[(&str, f64)]) -> Result<Vec<f64>> {
    match id {
        StructuralCaseId::SirIOnly => {
            let (beta, r) = (lookup(params, "beta")?, lookup(params, "r")?);
            let (k, n) = (lookup(params, "K")?, lookup(params, "N_pop")?);
            Ok(vec![k * beta / n, k * r * beta / n])
        }
        StructuralCaseId::SirIAndR => {
            let (beta, r) = (lookup(params, "beta")?, lookup(params, "r")?);
            let (k, n) = (lookup(params, "K")?, lookup(params, "N_pop")?);
            Ok(vec![beta, beta * k / n, r])
        }
        StructuralCaseId::SeirdIrd => {
            let beta = lookup(params, "beta")?;
            let r = lookup(params, "r")?;
            let d = lookup(params, "d")?;
            let i = lookup(params, "i")?;
            let (k, n) = (lookup(params, "K")?, lookup(params, "N_pop")?);
            let c1 = i + d + r;
            let c2 = i * (d + r - beta);
            let c3 = beta * k / n;
            Ok(vec![c1, c2, c3, c3 * c1, r, d])
        }
    }
}

/// Invert a coefficient vector under the case's knowledge assumption.
///
/// `known_values` supplies the numeric values of the quantities declared
/// known (K and/or N_pop). Redundant coefficients are cross-checked; a
/// relative residual above 1e-8 is an inconsistency error.
pub fn invert_coefficients(
    case: &StructuralCase,
    coeffs: &[f64],
    known_values: &[(&str, f64)],
) -> Result<Verdict> {
    let expect = case.id.coefficient_labels().len();
    if coeffs.len() != expect {
        return Err(Error::Validation(format!(
            "case {} expects {expect} coefficients, got {}",
            case.id.label(),
            coeffs.len()
        )));
    }
    let known = |name: &str| -> Result<f64> {
        known_values
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Validation(format!("'{name}' declared known but not supplied")))
    };
    let nonzero = |v: f64, what: &str| -> Result<f64> {
        if v == 0.0 {
            Err(Error::Validation(format!(
                "division by zero coefficient ({what})"
            )))
        } else {
            Ok(v)
        }
    };

    match case.id {
        StructuralCaseId::SirIOnly => {
            let c1 = nonzero(coeffs[0], "K*beta/N")?;
            let r = coeffs[1] / c1;
            match (case.knowns.k, case.knowns.n_pop) {
                (true, true) => {
                    let k = nonzero(known("K")?, "K")?;
                    let n = known("N_pop")?;
                    Ok(Verdict::Unique(vec![
                        ("beta".to_string(), c1 * n / k),
                        ("r".to_string(), r),
                    ]))
                }
                (false, true) => {
                    let n = known("N_pop")?;
                    Ok(Verdict::Combinations(vec![
                        ("r".to_string(), r),
                        ("K*beta".to_string(), c1 * n),
                    ]))
                }
                _ => Ok(Verdict::Combinations(vec![
                    ("r".to_string(), r),
                    ("K*beta/N_pop".to_string(), c1),
                ])),
            }
        }
        StructuralCaseId::SirIAndR => {
            let beta = nonzero(coeffs[0], "beta")?;
            let c2 = coeffs[1];
            let r = coeffs[2];
            if case.knowns.n_pop {
                let n = known("N_pop")?;
                Ok(Verdict::Unique(vec![
                    ("beta".to_string(), beta),
                    ("K".to_string(), c2 * n / beta),
                    ("r".to_string(), r),
                ]))
            } else if case.knowns.k {
                let k = known("K")?;
                Ok(Verdict::Unique(vec![
                    ("beta".to_string(), beta),
                    ("N_pop".to_string(), k * beta / nonzero(c2, "beta*K/N")?),
                    ("r".to_string(), r),
                ]))
            } else {
                Ok(Verdict::Combinations(vec![
                    ("beta".to_string(), beta),
                    ("r".to_string(), r),
                    ("K/N_pop".to_string(), c2 / beta),
                ]))
            }
        }
        StructuralCaseId::SeirdIrd => {
            let (c1, c2, c3, c4, r, d) = (
                coeffs[0], coeffs[1], coeffs[2], coeffs[3], coeffs[4], coeffs[5],
            );
            // c4 is redundant: it must equal c3 * c1
            let residual = (c4 - c3 * c1).abs() / c4.abs().max(c3.abs() * c1.abs()).max(1e-300);
            if residual > CONSISTENCY_TOL {
                return Err(Error::Inconsistent(format!(
                    "coefficient 'beta*K/N*(i+d+r)' disagrees with 'beta*K/N' * '(i+d+r)' \
                     (relative residual {residual:.2e})"
                )));
            }
            let i = c1 - d - r;
            let i = nonzero(i, "i = (i+d+r) - d - r")?;
            let beta = d + r - c2 / i;
            let beta = nonzero(beta, "beta = d + r - c2/i")?;
            if case.knowns.n_pop {
                let n = known("N_pop")?;
                let beta_k = c3 * n;
                Ok(Verdict::Unique(vec![
                    ("r".to_string(), r),
                    ("d".to_string(), d),
                    ("i".to_string(), i),
                    ("beta".to_string(), beta),
                    ("K".to_string(), beta_k / beta),
                ]))
            } else if case.knowns.k {
                let k = known("K")?;
                Ok(Verdict::Unique(vec![
                    ("r".to_string(), r),
                    ("d".to_string(), d),
                    ("i".to_string(), i),
                    ("beta".to_string(), beta),
                    ("N_pop".to_string(), k * beta / nonzero(c3, "beta*K/N")?),
                ]))
            } else {
                Ok(Verdict::Combinations(vec![
                    ("r".to_string(), r),
                    ("d".to_string(), d),
                    ("i".to_string(), i),
                    ("beta".to_string(), beta),
                    ("K/N_pop".to_string(), c3 / beta),
                ]))
            }
        }
    }
}

/// Numerical output-equality check: integrate both parameter sets, apply
/// each side's observation operators on a dense grid, and compare.
///
/// The operator lists pair up positionally (same kinds, possibly different
/// under-reporting factors, since K is part of the assignment under test).
/// Returns (indistinguishable, max absolute output gap). The default
/// tolerance callers should use is ten times the integrator tolerance.
pub fn indistinguishable(
    model: &ModelSpec,
    ops_a: &[ObservationOperator],
    theta_a: &ParameterVector,
    ops_b: &[ObservationOperator],
    theta_b: &ParameterVector,
    horizon: f64,
    tol: f64,
) -> Result<(bool, f64)> {
    if !(horizon > 0.0) {
        return Err(Error::validation("horizon must be positive"));
    }
    if ops_a.len() != ops_b.len() {
        return Err(Error::validation("operator lists must pair up"));
    }
    const GRID: usize = 200;
    let times: Vec<f64> = (0..=GRID)
        .map(|j| horizon * j as f64 / GRID as f64)
        .collect();
    let rtol = crate::model::DEFAULT_RTOL;
    let atol = crate::model::DEFAULT_ATOL;
    let traj_a = integrate(model, theta_a, &times, rtol, atol)?;
    let traj_b = integrate(model, theta_b, &times, rtol, atol)?;

    let mut gap = 0.0_f64;
    for (op_a, op_b) in ops_a.iter().zip(ops_b) {
        let oa = observe(model, &traj_a, op_a, theta_a)?;
        let ob = observe(model, &traj_b, op_b, theta_b)?;
        match (oa, ob) {
            (Observed::Series(a), Observed::Series(b)) => {
                for (x, y) in a.iter().zip(&b) {
                    gap = gap.max((x - y).abs());
                }
            }
            (Observed::Scalar(a), Observed::Scalar(b)) => gap = gap.max((a - b).abs()),
            _ => {
                return Err(Error::validation(
                    "paired operators must have the same shape",
                ))
            }
        }
    }
    Ok((gap < tol, gap))
}
