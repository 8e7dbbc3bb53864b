use std::path::PathBuf;

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;

/// Envelope shared by every JSON report.
#[derive(Debug, Serialize)]
pub struct Report<'a, T: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    pub config_hash: String,
    pub seed: u64,
    /// Files written by the command, relative to the output directory.
    pub outputs: Vec<String>,
    pub results: &'a T,
}

/// Output directory plus the list of files written into it.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    pub fn new(dir: PathBuf) -> Self {
        Self {
            dir,
            written: Vec::new(),
        }
    }

    /// Registers `name` and returns its full path.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    /// Writes `<command>_report.json` and prints the list of outputs.
    pub fn finish<T: Serialize>(mut self, command: &'static str, cfg: &RunConfig, results: &T) -> Result<()> {
        let name = format!("{command}_report.json");
        let path = self.file(&name);
        let report = Report {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            outputs: self.written.clone(),
            results,
        };
        klyshko_core::io::write_json(&path, &report)?;
        for f in &self.written {
            println!("{}", self.dir.join(f).display());
        }
        Ok(())
    }
}
