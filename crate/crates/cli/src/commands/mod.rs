pub mod accidentals;
pub mod curve;
pub mod fit;
pub mod g2;
pub mod simulate;
pub mod sweep;

use std::path::PathBuf;

use klyshko_core::{SimOptions, SimSeed};

use crate::config::RunConfig;
use crate::report::Outputs;

/// Resolved configuration and output location for one invocation.
pub struct Context {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn outputs(&self) -> Outputs {
        Outputs::new(self.out_dir.clone())
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            threads: self.cfg.threads,
            ..SimOptions::default()
        }
    }

    /// Seed of the `index`-th simulation in a multi-run command.
    pub fn seed(&self, index: u64) -> SimSeed {
        SimSeed::new(self.cfg.seed.wrapping_add(index))
    }
}
