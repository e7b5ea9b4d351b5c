//! `forward`: prior-based forward UQ — samples, per-time moments and
//! quantile bands for every compartment, and QoI pdfs.

use rayon::prelude::*;

use identikit_core::model::{integrate, ModelSpec, ParameterVector, DEFAULT_ATOL, DEFAULT_RTOL};
use identikit_core::observe::{observe, ObservationOperator, ParamMap};
use identikit_core::sample::{density, draw, moments, quantile_band, DensityMethod, SampleSet};

use crate::assemble::{self, Study};
use crate::dataio;
use crate::error::{CliError, CliResult};
use crate::outdir::OutputWriter;
use crate::plot::{line_chart, LineSeries};

use super::{Ctx, SeedRole};

pub const BAND_LEVELS: [f64; 2] = [0.05, 0.95];

/// Integrate every sample row; returns per-sample trajectories' state
/// matrices, evaluated in parallel but collected in order.
pub fn sample_trajectories(
    study: &Study,
    set: &SampleSet,
    grid: &[f64],
) -> CliResult<Vec<Vec<Vec<f64>>>> {
    let map = ParamMap::new(
        study.model.clone(),
        study.base.clone(),
        study.ops.clone(),
        study.free_names(),
    )?;
    let rows: Vec<Result<Vec<Vec<f64>>, identikit_core::Error>> = set
        .points
        .par_iter()
        .map(|row| {
            let (theta, _) = map.resolve(row)?;
            let traj = integrate(&study.model, &theta, grid, DEFAULT_RTOL, DEFAULT_ATOL)?;
            Ok(traj.states().to_vec())
        })
        .collect();
    rows.into_iter()
        .map(|r| r.map_err(CliError::from))
        .collect()
}

/// Per-state statistics files from sampled state matrices.
pub fn write_state_stats(
    out: &mut OutputWriter,
    prefix: &str,
    model: &ModelSpec,
    grid: &[f64],
    states: &[Vec<Vec<f64>>],
    weights: &[f64],
) -> CliResult<Vec<(String, Vec<f64>, Vec<f64>, Vec<f64>)>> {
    let mut charts = Vec::new();
    for (si, name) in model.state_names().iter().enumerate() {
        let rows: Vec<Vec<f64>> = states
            .iter()
            .map(|m| m.iter().map(|row| row[si]).collect())
            .collect();
        let nt = grid.len();
        let mut mean = Vec::with_capacity(nt);
        let mut var = Vec::with_capacity(nt);
        for t in 0..nt {
            let col: Vec<f64> = rows.iter().map(|r| r[t]).collect();
            if col.len() >= 2 {
                let (m, v) = moments(&col, weights)?;
                mean.push(m);
                var.push(v);
            } else {
                mean.push(col[0]);
                var.push(0.0);
            }
        }
        let band = if rows.len() >= 20 {
            quantile_band(&rows, &BAND_LEVELS)?
        } else {
            // too few samples for tail quantiles: collapse onto the data
            identikit_core::sample::QuantileBand {
                levels: BAND_LEVELS.to_vec(),
                curves: vec![mean.clone(), mean.clone()],
            }
        };
        out.write(
            &format!("{prefix}{name}.csv"),
            &dataio::stats_csv(grid, &mean, &var, &band),
        )?;
        charts.push((
            name.clone(),
            mean,
            band.curves[0].clone(),
            band.curves[1].clone(),
        ));
    }
    Ok(charts)
}

/// Evaluate scalar QoIs per sample: peak time/value of I (when present) and
/// states at the requested times.
pub fn qoi_values(
    study: &Study,
    set: &SampleSet,
    grid: &[f64],
    qoi_times: &[f64],
) -> CliResult<Vec<(String, Vec<f64>)>> {
    let map = ParamMap::new(
        study.model.clone(),
        study.base.clone(),
        study.ops.clone(),
        study.free_names(),
    )?;
    let mut ops: Vec<(String, ObservationOperator)> = Vec::new();
    if study.model.state_names().iter().any(|s| s == "I") {
        ops.push((
            "peak_time_I".into(),
            ObservationOperator::PeakTime { state: "I".into() },
        ));
        ops.push((
            "peak_value_I".into(),
            ObservationOperator::PeakValue { state: "I".into() },
        ));
    }
    for &t in qoi_times {
        for s in study.model.state_names() {
            ops.push((
                format!("{s}_at_{t}"),
                ObservationOperator::StateAtTime {
                    state: s.clone(),
                    t,
                },
            ));
        }
    }

    let evaluated: Vec<Result<Vec<f64>, identikit_core::Error>> = set
        .points
        .par_iter()
        .map(|row| {
            let (theta, _) = map.resolve(row)?;
            let traj = integrate(&study.model, &theta, grid, DEFAULT_RTOL, DEFAULT_ATOL)?;
            ops.iter()
                .map(|(_, op)| observe(&study.model, &traj, op, &theta)?.into_scalar())
                .collect()
        })
        .collect();
    let mut columns = vec![Vec::with_capacity(set.n()); ops.len()];
    for row in evaluated {
        let row = row.map_err(CliError::from)?;
        for (c, v) in columns.iter_mut().zip(row) {
            c.push(v);
        }
    }
    Ok(ops.into_iter().map(|(n, _)| n).zip(columns).collect())
}

fn theta_only_trajectory(
    study: &Study,
    theta: &ParameterVector,
    grid: &[f64],
) -> CliResult<Vec<Vec<f64>>> {
    let traj = integrate(&study.model, theta, grid, DEFAULT_RTOL, DEFAULT_ATOL)?;
    Ok(traj.states().to_vec())
}

pub fn run(ctx: &Ctx) -> CliResult<()> {
    let study = assemble::study(&ctx.cfg)?;
    let grid = assemble::dense_grid(&ctx.cfg);
    let mut out = OutputWriter::create(&ctx.out)?;

    if study.free.is_empty() {
        // fully deterministic parameters: bands collapse onto the
        // trajectory
        let states = theta_only_trajectory(&study, &study.base, &grid)?;
        let rows = vec![states];
        write_state_stats(&mut out, "forward_", &study.model, &grid, &rows, &[1.0])?;
        out.finalize("forward")?;
        return Ok(());
    }

    let sampling = ctx
        .cfg
        .sampling
        .clone()
        .unwrap_or_else(|| serde_json::from_str("{}").expect("default sampling config"));
    let scheme = assemble::scheme(&ctx.cfg)?;
    let seed = ctx.seed_for(SeedRole::Sampling, sampling.seed);

    let set = draw(&study.priors, sampling.n, scheme, seed)?;
    out.write(
        "samples.csv",
        &dataio::samples_csv(&set, &study.free_names()),
    )?;

    let states = sample_trajectories(&study, &set, &grid)?;
    let charts = write_state_stats(
        &mut out,
        "forward_",
        &study.model,
        &grid,
        &states,
        &set.weights,
    )?;

    if ctx.plot {
        for (name, mean, lo, hi) in &charts {
            let svg = line_chart(
                &format!("forward UQ: {name}"),
                "time (days)",
                name,
                &[
                    LineSeries {
                        label: "mean",
                        points: zip(&grid, mean),
                    },
                    LineSeries {
                        label: "q05",
                        points: zip(&grid, lo),
                    },
                    LineSeries {
                        label: "q95",
                        points: zip(&grid, hi),
                    },
                ],
            );
            out.write(&format!("forward_{name}.svg"), &svg)?;
        }
    }

    // QoI pdfs on a (usually larger) dedicated sample
    let n_pdf = sampling.n_pdf.unwrap_or(10_000);
    let pdf_set = if n_pdf == sampling.n {
        set
    } else {
        draw(
            &study.priors,
            n_pdf,
            scheme,
            identikit_core::derive_seed(seed, 0xDF),
        )?
    };
    for (name, values) in qoi_values(&study, &pdf_set, &grid, &ctx.cfg.qoi_times)? {
        match density(&values, DensityMethod::Kde) {
            Ok(curve) => {
                out.write(&format!("pdf_{name}.csv"), &dataio::density_csv(&curve))?;
            }
            Err(identikit_core::Error::Degenerate(_)) => {
                // constant QoI has no pdf estimate; skip the file
            }
            Err(e) => return Err(e.into()),
        }
    }

    out.finalize("forward")?;
    Ok(())
}

fn zip(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    x.iter().cloned().zip(y.iter().cloned()).collect()
}
