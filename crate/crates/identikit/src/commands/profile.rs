//! `profile`: profile likelihood of fitted parameters with chi-square
//! confidence intervals and identifiability verdicts.

use identikit_core::fit::{FitResult, LikelihoodSpec};
use identikit_core::ident::{pl_interval, profile_likelihood, GridSpec, ProfileSpan};

use crate::assemble::{self, Study};
use crate::config::ProfileConfig;
use crate::dataio;
use crate::error::{CliError, CliResult};
use crate::outdir::OutputWriter;
use crate::plot::{line_chart, LineSeries};
use crate::report::ProfileVerdict;

use super::{Ctx, SeedRole};

fn grid_spec(cfg: &ProfileConfig) -> CliResult<GridSpec> {
    let span = match cfg.span.as_str() {
        "posterior" => ProfileSpan::PosteriorSigmas(cfg.sigmas),
        "bounds" => ProfileSpan::FullBounds,
        other => {
            return Err(CliError::Config(format!(
                "profile.span: '{other}' is not one of posterior, bounds"
            )))
        }
    };
    Ok(GridSpec {
        points: cfg.points,
        span,
    })
}

/// Profile the requested (default: all) fitted parameters.
pub fn profiles(
    ctx: &Ctx,
    spec: &LikelihoodSpec,
    fit: &FitResult,
    out: &mut OutputWriter,
    prefix: &str,
) -> CliResult<Vec<ProfileVerdict>> {
    let pcfg = ctx
        .cfg
        .profile
        .clone()
        .unwrap_or_else(|| serde_json::from_str("{}").expect("default profile config"));
    let gspec = grid_spec(&pcfg)?;
    let params: Vec<String> = if pcfg.params.is_empty() {
        fit.names.clone()
    } else {
        pcfg.params.clone()
    };
    let seed = ctx.seed_for(SeedRole::Profile, pcfg.seed);

    let mut verdicts = Vec::new();
    for param in &params {
        let curve = profile_likelihood(spec, fit, param, &gspec, pcfg.restarts, seed, pcfg.alpha)?;
        let iv = pl_interval(&curve, pcfg.alpha)?;
        out.write(
            &format!("{prefix}profile_{param}.csv"),
            &dataio::profile_csv(&curve),
        )?;
        if ctx.plot {
            let level = curve.min_value() + curve.threshold;
            let svg = line_chart(
                &format!("profile likelihood: {param}"),
                param,
                "NLL",
                &[
                    LineSeries {
                        label: "profile",
                        points: curve
                            .grid
                            .iter()
                            .cloned()
                            .zip(curve.values.clone())
                            .collect(),
                    },
                    LineSeries {
                        label: "threshold",
                        points: vec![(curve.grid[0], level), (*curve.grid.last().unwrap(), level)],
                    },
                ],
            );
            out.write(&format!("{prefix}profile_{param}.svg"), &svg)?;
        }
        let idx = fit.names.iter().position(|n| n == param).unwrap();
        verdicts.push(ProfileVerdict::new(
            param,
            fit.theta_mle[idx],
            curve.argmin(),
            &iv,
            pcfg.alpha,
        ));
    }
    Ok(verdicts)
}

pub fn run(ctx: &Ctx) -> CliResult<()> {
    let study: Study = assemble::study(&ctx.cfg)?;
    let (spec, outcome) = super::fit::fitted(ctx, &study)?;
    let mut out = OutputWriter::create(&ctx.out)?;
    super::fit::write_fit_artifacts(&mut out, ctx, &spec, &outcome, "")?;
    let verdicts = profiles(ctx, &spec, &outcome.fit, &mut out, "")?;
    out.write_json("profiles.json", &verdicts)?;
    out.finalize("profile")?;
    Ok(())
}
