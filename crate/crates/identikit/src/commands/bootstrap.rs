//! `bootstrap`: Monte Carlo identifiability analysis — refit synthetic
//! replicates at increasing noise and report average relative errors.

use serde::Serialize;

use identikit_core::fit::FitOptions;
use identikit_core::ident::bootstrap_are;
use identikit_core::observe::K_PARAM;

use crate::assemble;
use crate::dataio;
use crate::error::{CliError, CliResult};
use crate::outdir::OutputWriter;

use super::{require_free, Ctx, SeedRole};

#[derive(Debug, Serialize)]
pub struct BootstrapSummary {
    pub params: Vec<String>,
    pub noise_levels: Vec<f64>,
    /// are\[level\]\[param\]
    pub are: Vec<Vec<f64>>,
    pub replicates: usize,
    pub failures: Vec<usize>,
    /// Per-parameter: ARE nondecreasing across the noise levels.
    pub nondecreasing: Vec<bool>,
}

pub fn run(ctx: &Ctx) -> CliResult<()> {
    let study = assemble::study(&ctx.cfg)?;
    require_free(&study)?;
    let bcfg = ctx
        .cfg
        .bootstrap
        .as_ref()
        .ok_or_else(|| CliError::config("bootstrap: block required for this command"))?;
    let synth = ctx
        .cfg
        .data
        .as_ref()
        .and_then(|d| d.synthetic.as_ref())
        .ok_or_else(|| CliError::config("data.synthetic: bootstrap needs a ground truth"))?;

    // true assignment for replicate generation
    let mut theta_true = study.base.clone();
    let mut ops = study.series_ops();
    for (name, &value) in &synth.theta_true {
        if name == K_PARAM {
            for op in ops.iter_mut() {
                if op.k().is_some() {
                    *op = op.with_k(value);
                }
            }
        } else {
            theta_true.set(name, value).map_err(CliError::from)?;
        }
    }
    let times = synth.times.expand()?;
    let jointly = bcfg.jointly.unwrap_or(study.free.len());
    let seed = ctx.seed_for(SeedRole::Bootstrap, bcfg.seed);
    let opts = FitOptions {
        restarts: bcfg.restarts,
        ..Default::default()
    };

    let table = bootstrap_are(
        &study.model,
        &theta_true,
        &ops,
        &study.free,
        &times,
        &bcfg.noise_levels,
        bcfg.replicates,
        jointly,
        seed,
        &opts,
    )?;

    let nondecreasing: Vec<bool> = (0..table.params.len())
        .map(|pi| table.are.windows(2).all(|w| w[1][pi] >= w[0][pi] * 0.999))
        .collect();
    let summary = BootstrapSummary {
        params: table.params.clone(),
        noise_levels: table.noise_levels.clone(),
        are: table.are.clone(),
        replicates: table.replicates,
        failures: table.failures.clone(),
        nondecreasing,
    };

    let mut out = OutputWriter::create(&ctx.out)?;
    out.write("are.csv", &dataio::are_csv(&table))?;
    out.write_json("bootstrap.json", &summary)?;
    out.finalize("bootstrap")?;
    Ok(())
}
