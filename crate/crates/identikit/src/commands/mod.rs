//! Command implementations. Each command consumes a [`RunConfig`], writes
//! its artifacts under the output directory, and records a manifest.

mod bootstrap;
mod fit;
mod forward;
mod profile;
mod simulate;
mod sobol;
mod structural;
mod workflow;

pub use bootstrap::run as cmd_bootstrap;
pub use fit::run as cmd_fit;
pub use forward::run as cmd_forward;
pub use profile::run as cmd_profile;
pub use simulate::run as cmd_simulate;
pub use sobol::run as cmd_sobol;
pub use structural::run as cmd_structural;
pub use workflow::run as cmd_workflow;

use std::path::PathBuf;

use identikit_core::derive_seed;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Everything a command needs: the validated config plus CLI overrides.
pub struct Ctx {
    pub cfg: RunConfig,
    /// Global reseed: when set, every component seed is derived from it.
    pub seed: Option<u64>,
    pub plot: bool,
    pub out: PathBuf,
}

impl Ctx {
    pub fn new(cfg: RunConfig, seed: Option<u64>, out: Option<PathBuf>, plot: bool) -> Self {
        let out = out
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("identikit-out"));
        Ctx {
            cfg,
            seed,
            plot,
            out,
        }
    }

    /// Effective seed of one component: the CLI-level seed (role-mixed)
    /// wins over the per-block config seed.
    pub fn seed_for(&self, role: SeedRole, config_seed: u64) -> u64 {
        match self.seed {
            Some(s) => derive_seed(s, role as u64),
            None => config_seed,
        }
    }

    pub fn data_seed(&self) -> Option<u64> {
        self.seed.map(|s| derive_seed(s, SeedRole::Data as u64))
    }
}

#[derive(Debug, Clone, Copy)]
pub enum SeedRole {
    Data = 1,
    Sampling = 2,
    Fit = 3,
    Profile = 4,
    Bootstrap = 5,
    Sobol = 6,
    Posterior = 7,
}

pub(crate) fn require_free(study: &crate::assemble::Study) -> CliResult<()> {
    if study.free.is_empty() {
        return Err(CliError::config(
            "parameters: this command needs at least one parameter with a prior",
        ));
    }
    Ok(())
}
