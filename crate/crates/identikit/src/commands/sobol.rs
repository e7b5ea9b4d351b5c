//! `sobol`: time-resolved Sobol indices of the configured observables plus
//! a screening verdict (parameters whose total index never leaves the
//! floor are reported hard to infer).

use serde::Serialize;

use identikit_core::observe::ParamMap;
use identikit_core::sensitivity::{sobol_over_time, SobolSeries};

use crate::assemble::{self, Study};
use crate::dataio;
use crate::error::CliResult;
use crate::outdir::OutputWriter;
use crate::plot::{line_chart, LineSeries};

use super::{require_free, Ctx, SeedRole};

#[derive(Debug, Serialize)]
pub struct Screening {
    pub floor: f64,
    /// max over (observable, time) of the total index, per parameter.
    pub max_total: std::collections::BTreeMap<String, f64>,
    pub hard_to_infer: Vec<String>,
}

pub fn default_times(cfg: &crate::config::RunConfig) -> Vec<f64> {
    let h = cfg.horizon();
    (0..=30).map(|j| h * j as f64 / 30.0).collect()
}

pub fn compute(ctx: &Ctx, study: &Study) -> CliResult<(Vec<SobolSeries>, Screening, Vec<String>)> {
    require_free(study)?;
    let sobol_cfg = ctx.cfg.sobol.clone();
    let n = sobol_cfg.as_ref().map(|s| s.n).unwrap_or(1024);
    let floor = sobol_cfg
        .as_ref()
        .map(|s| s.screening_floor)
        .unwrap_or(0.01);
    let seed = ctx.seed_for(
        SeedRole::Sobol,
        sobol_cfg.as_ref().map(|s| s.seed).unwrap_or(0),
    );
    let times = sobol_cfg
        .as_ref()
        .and_then(|s| s.times.clone())
        .unwrap_or_else(|| default_times(&ctx.cfg));

    let series_ops = study.series_ops();
    let map = ParamMap::new(
        study.model.clone(),
        study.base.clone(),
        series_ops,
        study.free_names(),
    )?;
    let series = sobol_over_time(&map, &study.priors, &times, n, seed)?;

    let names = study.free_names();
    let mut max_total = std::collections::BTreeMap::new();
    for (pi, name) in names.iter().enumerate() {
        let mut best = f64::NEG_INFINITY;
        for s in &series {
            for ix in &s.per_time {
                if ix.defined && ix.total[pi].is_finite() {
                    best = best.max(ix.total[pi]);
                }
            }
        }
        max_total.insert(name.clone(), best);
    }
    let hard: Vec<String> = names
        .iter()
        .filter(|n| max_total.get(*n).map_or(true, |v| *v < floor))
        .cloned()
        .collect();
    Ok((
        series,
        Screening {
            floor,
            max_total,
            hard_to_infer: hard,
        },
        names,
    ))
}

pub fn run(ctx: &Ctx) -> CliResult<()> {
    let study = assemble::study(&ctx.cfg)?;
    let (series, screening, names) = compute(ctx, &study)?;
    let mut out = OutputWriter::create(&ctx.out)?;
    out.write("sobol.csv", &dataio::sobol_csv(&series, &names))?;
    out.write_json("sobol_screening.json", &screening)?;

    if ctx.plot {
        for s in &series {
            let mut lines = Vec::new();
            for (pi, name) in names.iter().enumerate() {
                lines.push(LineSeries {
                    label: name,
                    points: s
                        .times
                        .iter()
                        .zip(&s.per_time)
                        .filter(|(_, ix)| ix.defined)
                        .map(|(&t, ix)| (t, ix.total[pi]))
                        .collect(),
                });
            }
            let svg = line_chart(
                &format!("total Sobol indices: {}", s.observable),
                "time (days)",
                "total index",
                &lines,
            );
            out.write(&format!("sobol_{}.svg", s.observable), &svg)?;
        }
    }
    out.finalize("sobol")?;
    Ok(())
}
