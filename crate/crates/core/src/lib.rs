//! Photon-counting models, a time-tag simulator, a clocked coincidence
//! engine and absolute detector-efficiency calibration by the Klyshko
//! method using a squeezed-vacuum (SPDC) source.

pub mod calibration;
pub mod coincidence;
pub mod error;
pub mod fock;
pub mod io;
pub mod sim;
pub mod summation;
pub mod tags;

pub use coincidence::{CoincConfig, CoincCounts, TripleCounts};
pub use error::{Error, Result};
pub use fock::{DiagonalFockDist, EffectiveEfficiency, SqueezeParam};
pub use sim::{DetectorChannel, LossModel, SimOptions, SimSeed, SourceParams};
pub use tags::TimeTagStream;
