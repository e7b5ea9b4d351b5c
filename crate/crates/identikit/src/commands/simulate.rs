//! `simulate`: integrate the model at fixed parameters and write the
//! trajectory.

use identikit_core::model::{integrate, DEFAULT_ATOL, DEFAULT_RTOL};

use crate::assemble;
use crate::dataio;
use crate::error::CliResult;
use crate::outdir::OutputWriter;
use crate::plot::{line_chart, LineSeries};

use super::Ctx;

pub fn run(ctx: &Ctx) -> CliResult<()> {
    let study = assemble::study(&ctx.cfg)?;
    let theta = assemble::fixed_theta(&ctx.cfg, &study)?;
    let grid = assemble::dense_grid(&ctx.cfg);
    let traj = integrate(&study.model, &theta, &grid, DEFAULT_RTOL, DEFAULT_ATOL)?;

    let mut out = OutputWriter::create(&ctx.out)?;
    out.write("trajectory.csv", &dataio::trajectory_csv(&traj))?;
    for w in traj.warnings() {
        eprintln!("warning: {w}");
    }
    if ctx.plot {
        let series: Vec<LineSeries> = study
            .model
            .state_names()
            .iter()
            .enumerate()
            .map(|(i, name)| LineSeries {
                label: name,
                points: traj.times().iter().cloned().zip(traj.column(i)).collect(),
            })
            .collect();
        let svg = line_chart(
            &format!("{} trajectory", study.model.name()),
            "time (days)",
            "compartment",
            &series,
        );
        out.write("trajectory.svg", &svg)?;
    }
    out.finalize("simulate")?;
    Ok(())
}
