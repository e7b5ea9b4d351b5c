//! JSON report structures for fits, structural verdicts and the workflow.

use nalgebra::DMatrix;
use serde::Serialize;

use identikit_core::fit::{FitResult, HessianRoute};
use identikit_core::ident::{PlInterval, Verdict};

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

#[derive(Debug, Serialize)]
pub struct RestartReport {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub nll: f64,
    pub converged: bool,
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub names: Vec<String>,
    pub theta_mle: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
    pub nll: f64,
    pub sigma_hat: Vec<f64>,
    pub hessian_route: String,
    /// Fisher matrix (curvature of -log L).
    pub hessian: Vec<Vec<f64>>,
    pub covariance: Vec<Vec<f64>>,
    /// Covariance from the Jacobian-Gram route, when computed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariance_jacobian: Option<Vec<Vec<f64>>>,
    pub correlation: Vec<Vec<f64>>,
    pub marginal_sd: Vec<f64>,
    pub flags: Vec<String>,
    pub weak_directions: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub restart_log: Vec<RestartReport>,
}

impl FitReport {
    pub fn new(fit: &FitResult, covariance_jacobian: Option<&DMatrix<f64>>) -> Self {
        let correlation = identikit_core::ident::correlation_matrix(&fit.covariance)
            .map(|c| matrix_rows(&c))
            .unwrap_or_default();
        let marginal_sd = (0..fit.theta_mle.len())
            .map(|i| fit.covariance[(i, i)].max(0.0).sqrt())
            .collect();
        FitReport {
            names: fit.names.clone(),
            theta_mle: fit.theta_mle.clone(),
            bounds: fit.bounds.clone(),
            nll: fit.nll_value,
            sigma_hat: fit.sigma_hat.clone(),
            hessian_route: match fit.hessian_route {
                HessianRoute::FiniteDifference => "finite_difference".into(),
                HessianRoute::JacobianGram => "jacobian_gram".into(),
            },
            hessian: matrix_rows(&fit.hessian),
            covariance: matrix_rows(&fit.covariance),
            covariance_jacobian: covariance_jacobian.map(matrix_rows),
            correlation,
            marginal_sd,
            flags: fit.flags.clone(),
            weak_directions: fit.weak_directions.clone(),
            lambda: fit.lambda,
            restart_log: fit
                .restart_log
                .iter()
                .map(|r| RestartReport {
                    start: r.start.clone(),
                    end: r.end.clone(),
                    nll: r.nll,
                    converged: r.converged,
                })
                .collect(),
        }
    }

    /// `param,estimate,sd,lo,hi` summary table.
    pub fn summary_csv(&self) -> Vec<u8> {
        let mut out = String::from("param,estimate,sd,lo,hi\n");
        for (i, n) in self.names.iter().enumerate() {
            out.push_str(&format!(
                "{n},{},{},{},{}\n",
                self.theta_mle[i], self.marginal_sd[i], self.bounds[i].0, self.bounds[i].1
            ));
        }
        out.into_bytes()
    }
}

#[derive(Debug, Serialize)]
pub struct StructuralReport {
    pub case: String,
    pub knowns: Vec<String>,
    /// "unique" or "combinations".
    pub verdict: String,
    /// Expressions identified (parameter names when unique).
    pub combinations: Vec<String>,
    /// Value of each identified expression, when parameter values were
    /// available to evaluate the coefficient map.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<std::collections::BTreeMap<String, f64>>,
    pub coefficient_labels: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

impl StructuralReport {
    pub fn from_verdict(
        case: &str,
        knowns: Vec<String>,
        verdict: &Verdict,
        labels: Vec<String>,
        coefficients: Option<Vec<f64>>,
    ) -> Self {
        StructuralReport {
            case: case.to_string(),
            knowns,
            verdict: if verdict.is_unique() {
                "unique".into()
            } else {
                "combinations".into()
            },
            combinations: verdict.entries().iter().map(|(n, _)| n.clone()).collect(),
            values: Some(verdict.entries().iter().cloned().collect()),
            coefficient_labels: labels,
            coefficients,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ProfileVerdict {
    pub param: String,
    pub identifiable: bool,
    pub interval: (f64, f64),
    pub argmin: f64,
    pub mle: f64,
    pub alpha: f64,
}

impl ProfileVerdict {
    pub fn new(param: &str, mle: f64, argmin: f64, iv: &PlInterval, alpha: f64) -> Self {
        ProfileVerdict {
            param: param.to_string(),
            identifiable: iv.identifiable,
            interval: (iv.lo, iv.hi),
            argmin,
            mle,
            alpha,
        }
    }
}

/// One stage of the workflow, in execution order.
#[derive(Debug, Serialize)]
pub struct StageReport {
    pub stage: String,
    /// completed | halted | skipped
    pub status: String,
    pub summary: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct WorkflowReport {
    pub stages: Vec<StageReport>,
    pub flags: Vec<String>,
    pub halted: bool,
}
