//! `workflow`: the staged analysis pipeline.
//!
//! Stages, in order: (1) Sobol screening, (2) structural gate from the
//! catalogued input–output maps, (3) practical gate via profile likelihood
//! with optional hierarchical refit, (4) inverse UQ, (5) posterior-based
//! forward UQ compared against the prior bands. A `combinations` verdict at
//! the structural gate halts the Fisher branch with an explicit
//! non-identifiability report (sampling-based inversion of non-identifiable
//! posteriors is out of scope, and the report says so); downstream stages
//! are skipped, never run silently.

use identikit_core::fit::{gaussian_posterior, mle, FreeParam, LikelihoodSpec};
use identikit_core::observe::K_PARAM;
use identikit_core::sample::{draw, draw_posterior};

use crate::assemble::{self, Study};
use crate::dataio;
use crate::error::{CliError, CliResult};
use crate::outdir::OutputWriter;
use crate::report::{StageReport, WorkflowReport};

use super::forward::{sample_trajectories, write_state_stats};
use super::{Ctx, SeedRole};

pub fn run(ctx: &Ctx) -> CliResult<()> {
    let study = assemble::study(&ctx.cfg)?;
    let mut out = OutputWriter::create(&ctx.out)?;
    let mut stages: Vec<StageReport> = Vec::new();
    let mut flags: Vec<String> = Vec::new();

    // ----- stage 1: Sobol screening ------------------------------------
    let screening_hard = match super::sobol::compute(ctx, &study) {
        Ok((series, screening, names)) => {
            out.write("sobol.csv", &dataio::sobol_csv(&series, &names))?;
            out.write_json("sobol_screening.json", &screening)?;
            let hard = screening.hard_to_infer.clone();
            stages.push(StageReport {
                stage: "sobol_screening".into(),
                status: "completed".into(),
                summary: if hard.is_empty() {
                    "every parameter moves the observables above the floor".into()
                } else {
                    format!(
                        "hard to infer (total index < {}): {:?}",
                        screening.floor, hard
                    )
                },
                details: names
                    .iter()
                    .map(|n| format!("max total index of {n}: {:.4}", screening.max_total[n]))
                    .collect(),
                files: vec!["sobol.csv".into(), "sobol_screening.json".into()],
            });
            hard
        }
        Err(e) => {
            stages.push(StageReport {
                stage: "sobol_screening".into(),
                status: "skipped".into(),
                summary: format!("not run: {e}"),
                details: vec![],
                files: vec![],
            });
            Vec::new()
        }
    };
    for h in &screening_hard {
        flags.push(format!(
            "parameter '{h}' is hard to infer from the configured observables"
        ));
    }

    // ----- stage 2: structural gate -------------------------------------
    let case_name = ctx
        .cfg
        .structural
        .as_ref()
        .map(|s| s.case.clone())
        .or_else(|| super::structural::detect_case(&study));
    let mut halted = false;
    match case_name {
        None => {
            stages.push(StageReport {
                stage: "structural_gate".into(),
                status: "skipped".into(),
                summary: "no catalogued input-output map matches this model/observable pairing"
                    .into(),
                details: vec![],
                files: vec![],
            });
        }
        Some(case) => {
            let knowns = ctx
                .cfg
                .structural
                .as_ref()
                .map(|s| s.knowns.clone())
                .unwrap_or_else(|| super::structural::default_knowns(&study));
            let params = super::structural::coefficient_params(ctx, &study);
            let (report, verdict) = super::structural::analyze(&case, &knowns, &params)?;
            out.write_json("structural.json", &report)?;
            if verdict.is_unique() {
                stages.push(StageReport {
                    stage: "structural_gate".into(),
                    status: "completed".into(),
                    summary: format!("case {case}: structurally identifiable (unique inversion)"),
                    details: verdict
                        .entries()
                        .iter()
                        .map(|(n, v)| format!("{n} = {v}"))
                        .collect(),
                    files: vec!["structural.json".into()],
                });
            } else {
                halted = true;
                let combos: Vec<String> =
                    verdict.entries().iter().map(|(n, _)| n.clone()).collect();
                flags.push(format!(
                    "structural non-identifiability: only the combinations {combos:?} are \
                     determined by the data"
                ));
                stages.push(StageReport {
                    stage: "structural_gate".into(),
                    status: "halted".into(),
                    summary: format!(
                        "case {case}: NOT structurally identifiable; only the combinations \
                         {combos:?} can be estimated. The Fisher-Gaussian branch assumes a \
                         unique likelihood optimum and is not applicable; sampling-based \
                         inversion of the non-identifiable posterior is out of scope for this \
                         toolkit. Remedies: fix one parameter of each combination from \
                         independent knowledge, or reparameterize the model in the identifiable \
                         combinations."
                    ),
                    details: verdict
                        .entries()
                        .iter()
                        .map(|(n, v)| format!("identified combination: {n} = {v}"))
                        .collect(),
                    files: vec!["structural.json".into()],
                });
            }
        }
    }

    if halted {
        for name in ["practical_gate", "inverse_uq", "posterior_forward"] {
            stages.push(StageReport {
                stage: name.into(),
                status: "skipped".into(),
                summary: "skipped: the structural gate halted the Fisher branch".into(),
                details: vec![],
                files: vec![],
            });
        }
        let report = WorkflowReport {
            stages,
            flags,
            halted: true,
        };
        out.write_json("workflow.json", &report)?;
        out.finalize("workflow")?;
        return Err(CliError::GateHalt(
            "structural gate: parameters are identifiable only in combination".into(),
        ));
    }

    // ----- stage 3: practical gate ---------------------------------------
    let (spec, outcome) = super::fit::fitted(ctx, &study)?;
    let verdicts = super::profile::profiles(ctx, &spec, &outcome.fit, &mut out, "")?;
    out.write_json("profiles.json", &verdicts)?;
    let weak: Vec<String> = verdicts
        .iter()
        .filter(|v| !v.identifiable)
        .map(|v| v.param.clone())
        .collect();
    let strong: Vec<String> = verdicts
        .iter()
        .filter(|v| v.identifiable)
        .map(|v| v.param.clone())
        .collect();

    let hierarchical = ctx
        .cfg
        .workflow
        .as_ref()
        .map(|w| w.hierarchical)
        .unwrap_or(true);
    let mut practical_details: Vec<String> = verdicts
        .iter()
        .map(|v| {
            format!(
                "{}: identifiable = {}, interval [{:.4}, {:.4}]",
                v.param, v.identifiable, v.interval.0, v.interval.1
            )
        })
        .collect();
    let mut practical_files = vec!["profiles.json".to_string()];

    let mut final_spec = spec;
    let mut final_fit = outcome.fit;
    if !weak.is_empty() {
        flags.push(format!(
            "practically non-identifiable parameters: {weak:?}; remedies: acquire more data, \
             fix them from independent studies, or hierarchical optimization"
        ));
        if hierarchical && !strong.is_empty() {
            // refit the weak parameters with the well-determined ones pinned
            // at their first-pass estimates
            let mut base = final_spec.map().base().clone();
            let mut ops = final_spec.map().ops().to_vec();
            for (name, value) in final_fit.names.iter().zip(&final_fit.theta_mle) {
                if strong.contains(name) {
                    if name == K_PARAM {
                        for op in ops.iter_mut() {
                            if op.k().is_some() {
                                *op = op.with_k(*value);
                            }
                        }
                    } else {
                        base.set(name, *value).map_err(CliError::from)?;
                    }
                }
            }
            let weak_free: Vec<FreeParam> = final_spec
                .free
                .iter()
                .filter(|p| weak.contains(&p.name))
                .cloned()
                .collect();
            let reduced = LikelihoodSpec::new(
                final_spec.model().clone(),
                base,
                ops,
                final_spec.data.clone(),
                weak_free,
                final_spec.sigma_mode.clone(),
                identikit_core::fit::PriorKind::UniformBox,
            )
            .map_err(CliError::from)?;
            let mut opts = assemble::fit_options(&ctx.cfg, ctx.seed);
            opts.seed = identikit_core::derive_seed(ctx.seed_for(SeedRole::Fit, opts.seed), 0x42);
            let refit = mle(&reduced, &opts).map_err(CliError::from)?;
            let hierarchical_outcome = super::fit::FitOutcome {
                fit: refit.clone(),
                sweep: None,
            };
            super::fit::write_fit_artifacts(
                &mut out,
                ctx,
                &reduced,
                &hierarchical_outcome,
                "hierarchical_",
            )?;
            practical_details.push(format!(
                "hierarchical refit of {weak:?} with {strong:?} pinned at first-pass estimates"
            ));
            practical_files.push("hierarchical_fit.json".into());
            final_spec = reduced;
            final_fit = refit;
        }
    }
    stages.push(StageReport {
        stage: "practical_gate".into(),
        status: "completed".into(),
        summary: if weak.is_empty() {
            "every parameter crosses the chi-square threshold on both sides".into()
        } else {
            format!("practically non-identifiable: {weak:?}")
        },
        details: practical_details,
        files: practical_files,
    });

    // ----- stage 4: inverse UQ -------------------------------------------
    let final_outcome = super::fit::FitOutcome {
        fit: final_fit.clone(),
        sweep: outcome.sweep,
    };
    super::fit::write_fit_artifacts(&mut out, ctx, &final_spec, &final_outcome, "")?;
    stages.push(StageReport {
        stage: "inverse_uq".into(),
        status: "completed".into(),
        summary: format!(
            "theta_MLE = {:?}, sigma_hat = {:?}, NLL = {:.4}",
            final_fit.theta_mle, final_fit.sigma_hat, final_fit.nll_value
        ),
        details: final_fit.flags.clone(),
        files: vec!["fit.json".into(), "fit_summary.csv".into()],
    });

    // ----- stage 5: posterior-based forward UQ ----------------------------
    let grid = assemble::dense_grid(&ctx.cfg);
    let sampling_seed = ctx.seed_for(
        SeedRole::Sampling,
        ctx.cfg.sampling.as_ref().map(|s| s.seed).unwrap_or(0),
    );
    let n = ctx.cfg.sampling.as_ref().map(|s| s.n).unwrap_or(1000);
    let scheme = assemble::scheme(&ctx.cfg)?;

    // prior bands use the full prior over the original free parameters
    let prior_set = draw(&study.priors, n, scheme, sampling_seed)?;
    let prior_states = sample_trajectories(&study, &prior_set, &grid)?;
    write_state_stats(
        &mut out,
        "prior_",
        &study.model,
        &grid,
        &prior_states,
        &prior_set.weights,
    )?;

    // posterior bands from the Fisher-Gaussian approximation of the final fit
    let posterior = gaussian_posterior(&final_fit, &final_fit.bounds).map_err(CliError::from)?;
    let post_seed = ctx.seed_for(
        SeedRole::Posterior,
        identikit_core::derive_seed(sampling_seed, 5),
    );
    match draw_posterior(&posterior, n, post_seed) {
        Ok(post_set) => {
            let final_study = Study {
                model: final_spec.model().clone(),
                base: final_spec.map().base().clone(),
                ops: final_spec.map().ops().to_vec(),
                obs_names: study.obs_names.clone(),
                free: final_spec.free.clone(),
                priors: study.priors.clone(),
            };
            let post_states = sample_trajectories(&final_study, &post_set, &grid)?;
            write_state_stats(
                &mut out,
                "posterior_",
                &study.model,
                &grid,
                &post_states,
                &post_set.weights,
            )?;

            // time-averaged band widths (q95 - q05), prior vs posterior
            let width = |states: &[Vec<Vec<f64>>], si: usize| -> f64 {
                let rows: Vec<Vec<f64>> = states
                    .iter()
                    .map(|m| m.iter().map(|row| row[si]).collect())
                    .collect();
                let band = identikit_core::sample::quantile_band(&rows, &[0.05, 0.95]).unwrap();
                let total: f64 = band.curves[1]
                    .iter()
                    .zip(&band.curves[0])
                    .map(|(hi, lo)| hi - lo)
                    .sum();
                total / grid.len() as f64
            };
            let mut narrower = Vec::new();
            let mut details = Vec::new();
            for (si, name) in study.model.state_names().iter().enumerate() {
                let wp = width(&prior_states, si);
                let wq = width(&post_states, si);
                narrower.push(wq < wp);
                details.push(format!(
                    "{name}: prior band width {wp:.5}, posterior {wq:.5}"
                ));
            }
            stages.push(StageReport {
                stage: "posterior_forward".into(),
                status: "completed".into(),
                summary: if narrower.iter().all(|b| *b) {
                    "posterior bands are narrower than prior bands for every compartment".into()
                } else {
                    "posterior bands are not uniformly narrower than the prior".into()
                },
                details,
                files: study
                    .model
                    .state_names()
                    .iter()
                    .flat_map(|s| [format!("prior_{s}.csv"), format!("posterior_{s}.csv")])
                    .collect(),
            });
        }
        Err(identikit_core::Error::LowAcceptance { rate }) => {
            // a posterior that barely intersects the prior box means the
            // Fisher approximation is not trustworthy here; report prior
            // bands only instead of sampling a meaningless Gaussian
            flags.push(
                "posterior sampling rejected: the Fisher-Gaussian approximation barely \
                 intersects the prior box (non-identifiable directions dominate)"
                    .into(),
            );
            stages.push(StageReport {
                stage: "posterior_forward".into(),
                status: "skipped".into(),
                summary: format!(
                    "posterior acceptance rate {rate:.2e} below 1e-3; the Fisher-Gaussian \
                     posterior is unreliable for this fit, prior bands are reported instead"
                ),
                details: vec![],
                files: study
                    .model
                    .state_names()
                    .iter()
                    .map(|s| format!("prior_{s}.csv"))
                    .collect(),
            });
        }
        Err(e) => return Err(e.into()),
    }

    let report = WorkflowReport {
        stages,
        flags,
        halted: false,
    };
    out.write_json("workflow.json", &report)?;
    out.finalize("workflow")?;
    Ok(())
}
