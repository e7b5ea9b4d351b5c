//! CSV formats.
//!
//! Datasets use the header `time,<obs_1>,<obs_2>,...` with one row per
//! time; empty cells mean "not observed at this time", so ragged series are
//! legal. All other CSVs are simple rectangular tables documented on their
//! writer. Floats are written with the shortest round-trip representation,
//! which keeps reruns byte-identical.

use std::path::Path;

use identikit_core::ident::{AreTable, ProfileCurve};
use identikit_core::model::Trajectory;
use identikit_core::observe::{Dataset, NoiseModel, Series};
use identikit_core::sample::{DensityCurve, QuantileBand, SampleSet};
use identikit_core::sensitivity::SobolSeries;

use crate::error::{CliError, CliResult};

fn fmt(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Read a dataset CSV (`time,<name_1>,...`; empty cells allowed).
pub fn read_dataset_csv(path: &Path) -> CliResult<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        .clone();
    if headers.len() < 2 || headers.get(0) != Some("time") {
        return Err(CliError::Config(format!(
            "{}: header must be time,<obs_1>,... (got {:?})",
            path.display(),
            headers
        )));
    }
    let names: Vec<String> = headers.iter().skip(1).map(|s| s.to_string()).collect();
    let mut series: Vec<Vec<(f64, f64)>> = vec![Vec::new(); names.len()];
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let t: f64 = record.get(0).unwrap_or("").parse().map_err(|_| {
            CliError::Config(format!(
                "{}: bad time in row {}",
                path.display(),
                row_idx + 2
            ))
        })?;
        for (j, cell) in record.iter().skip(1).enumerate() {
            if cell.trim().is_empty() {
                continue;
            }
            let v: f64 = cell.trim().parse().map_err(|_| {
                CliError::Config(format!(
                    "{}: bad value '{cell}' in row {} column {}",
                    path.display(),
                    row_idx + 2,
                    j + 2
                ))
            })?;
            series[j].push((t, v));
        }
    }
    let series: Vec<Series> = names
        .into_iter()
        .zip(series)
        .map(|(name, points)| Series { name, points })
        .collect();
    let noise = vec![NoiseModel::Unknown; series.len()];
    Dataset::new(series, noise).map_err(CliError::from)
}

/// Dataset CSV bytes (mirror of [`read_dataset_csv`]).
pub fn dataset_csv(data: &Dataset) -> Vec<u8> {
    let mut times: Vec<f64> = data
        .series
        .iter()
        .flat_map(|s| s.points.iter().map(|(t, _)| *t))
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut out = String::from("time");
    for s in &data.series {
        out.push(',');
        out.push_str(&s.name);
    }
    out.push('\n');
    for &t in &times {
        out.push_str(&fmt(t));
        for s in &data.series {
            out.push(',');
            if let Some((_, v)) = s.points.iter().find(|(pt, _)| *pt == t) {
                out.push_str(&fmt(*v));
            }
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// `time,<state_1>,...` rows of a trajectory.
pub fn trajectory_csv(traj: &Trajectory) -> Vec<u8> {
    let mut out = String::from("time");
    for s in traj.state_names() {
        out.push(',');
        out.push_str(s);
    }
    out.push('\n');
    for (t, row) in traj.times().iter().zip(traj.states()) {
        out.push_str(&fmt(*t));
        for v in row {
            out.push(',');
            out.push_str(&fmt(*v));
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// `sample_index,<name_1>,...,<name_k>,weight`.
pub fn samples_csv(set: &SampleSet, names: &[String]) -> Vec<u8> {
    let mut out = String::from("sample_index");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push_str(",weight\n");
    for (i, (p, w)) in set.points.iter().zip(&set.weights).enumerate() {
        out.push_str(&i.to_string());
        for v in p {
            out.push(',');
            out.push_str(&fmt(*v));
        }
        out.push(',');
        out.push_str(&fmt(*w));
        out.push('\n');
    }
    out.into_bytes()
}

/// Per-time statistics: `time,mean,var,q<lo>,q<hi>,...`.
pub fn stats_csv(times: &[f64], mean: &[f64], var: &[f64], band: &QuantileBand) -> Vec<u8> {
    let mut out = String::from("time,mean,var");
    for l in &band.levels {
        out.push_str(&format!(",q{:02}", (l * 100.0).round() as i64));
    }
    out.push('\n');
    for (i, &t) in times.iter().enumerate() {
        out.push_str(&format!("{},{},{}", fmt(t), fmt(mean[i]), fmt(var[i])));
        for c in &band.curves {
            out.push(',');
            out.push_str(&fmt(c[i]));
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// `x,density` of a pdf estimate.
pub fn density_csv(curve: &DensityCurve) -> Vec<u8> {
    let mut out = String::from("x,density\n");
    for (x, y) in curve.x.iter().zip(&curve.y) {
        out.push_str(&format!("{},{}\n", fmt(*x), fmt(*y)));
    }
    out.into_bytes()
}

/// Long-form Sobol table: `observable,time,param,principal,principal_se,total,total_se`.
pub fn sobol_csv(series: &[SobolSeries], params: &[String]) -> Vec<u8> {
    let mut out = String::from("observable,time,param,principal,principal_se,total,total_se\n");
    for s in series {
        for (ti, ix) in s.per_time.iter().enumerate() {
            for (pi, name) in params.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    s.observable,
                    fmt(s.times[ti]),
                    name,
                    fmt(ix.principal[pi]),
                    fmt(ix.principal_se[pi]),
                    fmt(ix.total[pi]),
                    fmt(ix.total_se[pi]),
                ));
            }
        }
    }
    out.into_bytes()
}

/// `param,grid_value,pl,threshold` (threshold = min(PL) + Delta_alpha).
pub fn profile_csv(curve: &ProfileCurve) -> Vec<u8> {
    let level = curve.min_value() + curve.threshold;
    let mut out = String::from("param,grid_value,pl,threshold\n");
    for (g, v) in curve.grid.iter().zip(&curve.values) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            curve.param,
            fmt(*g),
            fmt(*v),
            fmt(level)
        ));
    }
    out.into_bytes()
}

/// `noise_level,param,are`.
pub fn are_csv(table: &AreTable) -> Vec<u8> {
    let mut out = String::from("noise_level,param,are\n");
    for (li, &level) in table.noise_levels.iter().enumerate() {
        for (pi, name) in table.params.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt(level),
                name,
                fmt(table.are[li][pi])
            ));
        }
    }
    out.into_bytes()
}

/// Square matrix with a `param` row/column header.
pub fn matrix_csv(names: &[String], m: &nalgebra::DMatrix<f64>) -> Vec<u8> {
    let mut out = String::from("param");
    for n in names {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for (i, n) in names.iter().enumerate() {
        out.push_str(n);
        for j in 0..names.len() {
            out.push(',');
            out.push_str(&fmt(m[(i, j)]));
        }
        out.push('\n');
    }
    out.into_bytes()
}

/// `lambda,t_min,nll,sigma_first,sigma_second` of a lambda sweep.
pub fn lambda_csv(curve: &[identikit_core::fit::LambdaPoint]) -> Vec<u8> {
    let mut out = String::from("lambda,t_min,nll,sigma_first,sigma_second\n");
    for p in curve {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt(p.lambda),
            fmt(p.t_min),
            fmt(p.nll),
            fmt(p.sigma_first),
            fmt(p.sigma_second)
        ));
    }
    out.into_bytes()
}
