//! `structural`: evaluate a catalogued input–output coefficient map at the
//! configured parameter values and invert it under the declared knowns.

use identikit_core::ident::{
    invert_coefficients, structural_coefficients, Knowns, StructuralCase, StructuralCaseId, Verdict,
};
use identikit_core::observe::K_PARAM;

use crate::assemble::{self, Study};
use crate::error::{CliError, CliResult};
use crate::outdir::OutputWriter;
use crate::report::StructuralReport;

use super::Ctx;

/// Parameter values the coefficient map is evaluated at: the baseline,
/// overridden by any synthetic ground truth.
pub(crate) fn coefficient_params(ctx: &Ctx, study: &Study) -> Vec<(String, f64)> {
    let mut values: Vec<(String, f64)> = study
        .base
        .names()
        .iter()
        .zip(study.base.values())
        .map(|(n, v)| (n.clone(), *v))
        .collect();
    let mut k = study.ops.iter().find_map(|op| op.k()).unwrap_or(1.0);
    if let Some(synth) = ctx.cfg.data.as_ref().and_then(|d| d.synthetic.as_ref()) {
        for (name, &v) in &synth.theta_true {
            if name == K_PARAM {
                k = v;
            } else if let Some(slot) = values.iter_mut().find(|(n, _)| n == name) {
                slot.1 = v;
            }
        }
    }
    values.push((K_PARAM.to_string(), k));
    values.push(("N_pop".to_string(), study.model.n_pop()));
    // the SEIRDz contact rate before lockdown plays the SEIRD beta: the
    // structural analysis applies to each branch separately
    if !values.iter().any(|(n, _)| n == "beta") {
        if let Some(b1) = values.iter().find(|(n, _)| n == "beta1").map(|(_, v)| *v) {
            values.push(("beta".to_string(), b1));
        }
    }
    values
}

pub fn analyze(
    case_name: &str,
    knowns_list: &[String],
    params: &[(String, f64)],
) -> CliResult<(StructuralReport, Verdict)> {
    let id = StructuralCaseId::parse(case_name).map_err(CliError::from)?;
    let knowns = Knowns {
        k: knowns_list.iter().any(|k| k == "K"),
        n_pop: knowns_list.iter().any(|k| k == "N_pop"),
    };
    let case = StructuralCase { id, knowns };

    let param_refs: Vec<(&str, f64)> = params.iter().map(|(n, v)| (n.as_str(), *v)).collect();
    let coefficients = structural_coefficients(id, &param_refs).map_err(CliError::from)?;
    let mut known_vals: Vec<(&str, f64)> = Vec::new();
    if knowns.k {
        known_vals.push((
            "K",
            params
                .iter()
                .find(|(n, _)| n == "K")
                .map(|(_, v)| *v)
                .unwrap_or(1.0),
        ));
    }
    if knowns.n_pop {
        known_vals.push((
            "N_pop",
            params
                .iter()
                .find(|(n, _)| n == "N_pop")
                .map(|(_, v)| *v)
                .unwrap_or(1.0),
        ));
    }
    let verdict = invert_coefficients(&case, &coefficients, &known_vals).map_err(CliError::from)?;

    let labels = id
        .coefficient_labels()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let report = StructuralReport::from_verdict(
        id.label(),
        knowns_list.to_vec(),
        &verdict,
        labels,
        Some(coefficients),
    );
    Ok((report, verdict))
}

/// Auto-detect a catalogued case from the model and its series observables.
pub fn detect_case(study: &Study) -> Option<String> {
    let mut observed: Vec<String> = study
        .ops
        .iter()
        .filter_map(|op| match op {
            identikit_core::observe::ObservationOperator::ScaledState { state, .. } => {
                Some(state.clone())
            }
            _ => None,
        })
        .collect();
    observed.sort();
    observed.dedup();
    match (study.model.name(), observed.as_slice()) {
        ("sir", [i]) if i == "I" => Some("sir_I_only".into()),
        ("sir", [i, r]) if i == "I" && r == "R" => Some("sir_I_and_R".into()),
        ("seird", [d, i, r]) | ("seirdz", [d, i, r]) if d == "D" && i == "I" && r == "R" => {
            Some("seird_IRD".into())
        }
        _ => None,
    }
}

/// Default knowledge assumption: N_pop comes from the config; K is known
/// unless it is a fit parameter.
pub fn default_knowns(study: &Study) -> Vec<String> {
    let mut knowns = vec!["N_pop".to_string()];
    if !study.free.iter().any(|p| p.name == K_PARAM) {
        knowns.push("K".to_string());
    }
    knowns
}

pub fn run(ctx: &Ctx) -> CliResult<()> {
    let study = assemble::study(&ctx.cfg)?;
    let scfg = ctx
        .cfg
        .structural
        .as_ref()
        .ok_or_else(|| CliError::config("structural: block required for this command"))?;
    let params = coefficient_params(ctx, &study);
    let (report, _) = analyze(&scfg.case, &scfg.knowns, &params)?;
    let mut out = OutputWriter::create(&ctx.out)?;
    out.write_json("structural.json", &report)?;
    out.finalize("structural")?;
    Ok(())
}
