//! `fit`: maximum-likelihood / MAP estimation against the configured data,
//! with both Fisher-matrix routes and goodness-of-fit metrics.

use identikit_core::fit::{
    fisher_jacobian, goodness_of_fit, lambda_sweep, mle, FitResult, LambdaSweep, LikelihoodSpec,
    SigmaMode, EIGENVALUE_FLOOR,
};
use identikit_core::math::linalg::regularized_inverse;
use identikit_core::observe::predictions;

use crate::assemble::{self, Study};
use crate::dataio;
use crate::error::CliResult;
use crate::outdir::OutputWriter;
use crate::plot::{line_chart, LineSeries};
use crate::report::FitReport;

use super::{require_free, Ctx, SeedRole};

pub struct FitOutcome {
    pub fit: FitResult,
    /// Present when the noise mode was profiled_two.
    pub sweep: Option<LambdaSweep>,
}

/// Fit against the configured data; returns the spec alongside the result
/// so downstream commands (profile, workflow) can reuse them.
pub fn fitted(ctx: &Ctx, study: &Study) -> CliResult<(LikelihoodSpec, FitOutcome)> {
    require_free(study)?;
    let data = assemble::dataset(&ctx.cfg, study, ctx.data_seed())?;
    let spec = assemble::likelihood_spec(&ctx.cfg, study, data)?;
    let mut opts = assemble::fit_options(&ctx.cfg, ctx.seed);
    opts.seed = ctx.seed_for(SeedRole::Fit, opts.seed);
    let outcome = if matches!(spec.sigma_mode, SigmaMode::ProfiledTwo { .. }) {
        let sweep = lambda_sweep(&spec, &opts)?;
        FitOutcome {
            fit: sweep.fit.clone(),
            sweep: Some(sweep),
        }
    } else {
        FitOutcome {
            fit: mle(&spec, &opts)?,
            sweep: None,
        }
    };
    Ok((spec, outcome))
}

/// Write the standard fit artifacts: fit.json (both covariance routes),
/// fit_summary.csv, correlation.csv, gof.csv, data.csv, lambda.csv for
/// sweeps, and an optional data-vs-fit plot.
pub fn write_fit_artifacts(
    out: &mut OutputWriter,
    ctx: &Ctx,
    spec: &LikelihoodSpec,
    outcome: &FitOutcome,
    prefix: &str,
) -> CliResult<()> {
    let fit = &outcome.fit;
    // Jacobian-Gram route for comparison
    let jac = fisher_jacobian(spec, &fit.theta_mle, &fit.sigma_hat, 1e-5)?;
    let cov_jac = regularized_inverse(&jac, EIGENVALUE_FLOOR)?.inverse;
    let report = FitReport::new(fit, Some(&cov_jac));
    out.write_json(&format!("{prefix}fit.json"), &report)?;
    out.write(&format!("{prefix}fit_summary.csv"), &report.summary_csv())?;
    if let Ok(corr) = identikit_core::ident::correlation_matrix(&fit.covariance) {
        out.write(
            &format!("{prefix}correlation.csv"),
            &dataio::matrix_csv(&fit.names, &corr),
        )?;
    }
    out.write(
        &format!("{prefix}data.csv"),
        &dataio::dataset_csv(&spec.data),
    )?;
    if let Some(sweep) = &outcome.sweep {
        out.write(
            &format!("{prefix}lambda.csv"),
            &dataio::lambda_csv(&sweep.curve),
        )?;
    }

    // goodness of fit per series at the MLE
    let (theta, ops) = spec.map().resolve(&fit.theta_mle)?;
    let preds = predictions(&spec.data, spec.model(), &theta, &ops)?;
    let mut gof = String::from("series,rmse,mae,mape,mape_skipped\n");
    for (s, p) in spec.data.series.iter().zip(&preds) {
        let values: Vec<f64> = s.points.iter().map(|(_, v)| *v).collect();
        let g = goodness_of_fit(&values, p)?;
        gof.push_str(&format!(
            "{},{},{},{},{}\n",
            s.name, g.rmse, g.mae, g.mape, g.mape_skipped
        ));
    }
    out.write(&format!("{prefix}gof.csv"), gof.as_bytes())?;

    if ctx.plot {
        let mut lines = Vec::new();
        for (s, p) in spec.data.series.iter().zip(&preds) {
            lines.push(LineSeries {
                label: &s.name,
                points: s.points.clone(),
            });
            lines.push(LineSeries {
                label: "fit",
                points: s
                    .points
                    .iter()
                    .map(|(t, _)| *t)
                    .zip(p.iter().cloned())
                    .collect(),
            });
        }
        let svg = line_chart(
            "data and fitted predictions",
            "time (days)",
            "observable",
            &lines,
        );
        out.write(&format!("{prefix}fit.svg"), &svg)?;
    }
    Ok(())
}

pub fn run(ctx: &Ctx) -> CliResult<()> {
    let study = assemble::study(&ctx.cfg)?;
    let (spec, outcome) = fitted(ctx, &study)?;
    let mut out = OutputWriter::create(&ctx.out)?;
    write_fit_artifacts(&mut out, ctx, &spec, &outcome, "")?;
    out.finalize("fit")?;
    Ok(())
}
