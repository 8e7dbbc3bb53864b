//! Run configuration. One TOML file per run; every block is optional and
//! falls back to the defaults below. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use klyshko_core::calibration::{BudgetComponent, DEFAULT_MU};
use klyshko_core::{CoincConfig, DetectorChannel, SourceParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const DEFAULT_SEED: u64 = 20_240_601;

/// Temporal modes per second in the default config. Keeps singles near
/// 1e5/s, where gate saturation is small.
pub const DEFAULT_MODE_RATE: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Overridden by `--out` and `KLYSHKO_OUT`.
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub source: SourceBlock,
    pub channels: ChannelsBlock,
    pub coincidence: CoincConfig,
    pub sweep: SweepBlock,
    pub curve: CurveBlock,
    pub g2: G2Block,
    pub accidentals: AccidentalsBlock,
    pub budget: BudgetBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            output_dir: None,
            threads: None,
            source: SourceBlock::default(),
            channels: ChannelsBlock::default(),
            coincidence: CoincConfig::default(),
            sweep: SweepBlock::default(),
            curve: CurveBlock::default(),
            g2: G2Block::default(),
            accidentals: AccidentalsBlock::default(),
            budget: BudgetBlock::default(),
        }
    }
}

/// Source settings. `r` and `duration` drive `simulate`, and `r` also drives `accidentals`;
/// `mu` and `k_factor` map pump DAC values to squeezing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceBlock {
    pub r: f64,
    pub mode_rate: f64,
    pub background_rate_per_arm: f64,
    pub duration: f64,
    pub mu: f64,
    pub k_factor: f64,
}

impl Default for SourceBlock {
    fn default() -> Self {
        Self {
            r: 0.25,
            mode_rate: DEFAULT_MODE_RATE,
            background_rate_per_arm: 0.0,
            duration: 1.0,
            mu: DEFAULT_MU,
            k_factor: 1.6e-3,
        }
    }
}

impl SourceBlock {
    pub fn params(&self, r: f64, duration: f64) -> SourceParams {
        SourceParams {
            r,
            mode_rate: self.mode_rate,
            background_rate_per_arm: self.background_rate_per_arm,
            duration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelsBlock {
    /// Heralding detector.
    pub d1: DetectorChannel,
    /// Partner detector, and first split detector for `g2`.
    pub d2: DetectorChannel,
    /// Second split detector for `g2`.
    pub d3: DetectorChannel,
}

impl Default for ChannelsBlock {
    fn default() -> Self {
        let d2 = DetectorChannel {
            delay: 10e-9,
            ..DetectorChannel::with_efficiency(1.0, 0.57)
        };
        Self {
            d1: DetectorChannel::with_efficiency(1.0, 0.63),
            d2,
            d3: d2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepBlock {
    pub pump_dac: Vec<f64>,
    /// Seconds per sweep point.
    pub duration: f64,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            pump_dac: (1..=8).map(|k| 1000.0 * k as f64).collect(),
            duration: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveBlock {
    pub r_min: f64,
    pub r_max: f64,
    pub points: usize,
}

impl Default for CurveBlock {
    fn default() -> Self {
        Self {
            r_min: 0.0,
            r_max: 3.0,
            points: 301,
        }
    }
}

impl CurveBlock {
    pub fn grid(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.r_min],
            n => (0..n)
                .map(|i| self.r_min + (self.r_max - self.r_min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct G2Block {
    pub pump_dac: Vec<f64>,
    pub duration: f64,
    /// Fraction of the heralded arm routed to `d2`.
    pub split_ratio: f64,
}

impl Default for G2Block {
    fn default() -> Self {
        Self {
            pump_dac: vec![500.0, 1000.0, 2000.0, 4000.0, 6000.0],
            duration: 1.0,
            split_ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AccidentalsBlock {
    /// Coincidence windows to scan, seconds.
    pub cw: Vec<f64>,
    pub duration: f64,
}

impl Default for AccidentalsBlock {
    fn default() -> Self {
        Self {
            cw: (2..=12).map(|k| k as f64 * 5e-9).collect(),
            duration: 20.0,
        }
    }
}

/// Components of the conventional (substitution) calibration budget
/// written by `fit`. The default is a reference detector measured at
/// 6.37e4 counts/s against 1e5 photons/s incident.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetBlock {
    pub components: Vec<BudgetComponent>,
}

impl Default for BudgetBlock {
    fn default() -> Self {
        Self {
            components: vec![
                BudgetComponent::new("attenuation", 3.51e-6, 1.98e-9),
                BudgetComponent::new("trap detector voltage", -4.51, 9.24e-4),
                BudgetComponent::new("incident rate", 1e5, 1.8e-2),
                BudgetComponent::new("detected rate", 6.37e4, 3.06e2),
            ],
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::ConfigParse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.source;
        self.source.params(s.r, s.duration).validate().map_err(CliError::config)?;
        for ch in [&self.channels.d1, &self.channels.d2, &self.channels.d3] {
            ch.validate().map_err(CliError::config)?;
        }
        self.coincidence.validate().map_err(CliError::config)?;
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(CliError::Config(format!("{name} = {v} must be finite and > 0")))
            }
        };
        positive("source.mu", s.mu)?;
        positive("source.k_factor", s.k_factor)?;
        positive("sweep.duration", self.sweep.duration)?;
        positive("g2.duration", self.g2.duration)?;
        positive("accidentals.duration", self.accidentals.duration)?;
        for &d in self.sweep.pump_dac.iter().chain(&self.g2.pump_dac) {
            positive("pump_dac", d)?;
        }
        for &cw in &self.accidentals.cw {
            positive("accidentals.cw", cw)?;
        }
        if !(0.0..=1.0).contains(&self.g2.split_ratio) {
            return Err(CliError::Config(format!("g2.split_ratio = {} outside [0, 1]", self.g2.split_ratio)));
        }
        if !(self.curve.r_min.is_finite() && self.curve.r_max.is_finite())
            || self.curve.r_min < 0.0
            || self.curve.r_max < self.curve.r_min
        {
            return Err(CliError::Config(format!(
                "curve grid [{}, {}] must satisfy 0 <= r_min <= r_max",
                self.curve.r_min, self.curve.r_max
            )));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be >= 1".into()));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, leaving out settings that do
    /// not change results (output location and thread count).
    pub fn hash(&self) -> String {
        let canonical = Self {
            output_dir: None,
            threads: None,
            ..self.clone()
        };
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Squeezing produced by a pump DAC value.
    pub fn squeezing(&self, pump_dac: f64) -> f64 {
        klyshko_core::calibration::squeeze_from_dac(self.source.mu, self.source.k_factor, pump_dac)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::parse("", Path::new("x.toml")).unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("sede = 3", Path::new("x.toml")).is_err());
        assert!(RunConfig::parse("[source]\nrr = 0.1", Path::new("x.toml")).is_err());
        assert!(RunConfig::parse("[channels.d1]\neta = 0.1", Path::new("x.toml")).is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = RunConfig::default();
        let b = RunConfig {
            output_dir: Some("elsewhere".into()),
            threads: Some(3),
            ..RunConfig::default()
        };
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig {
            seed: 1,
            ..RunConfig::default()
        };
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn single_point_grid() {
        let c = CurveBlock {
            r_min: 0.4,
            r_max: 2.0,
            points: 1,
        };
        assert_eq!(c.grid(), vec![0.4]);
    }
}
