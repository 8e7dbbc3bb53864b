use std::path::PathBuf;

/// Errors raised by the analytic, simulation, counting and estimation layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter lies outside the domain where the physics is defined.
    #[error("{name} = {value} is outside its valid domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time tags of channel {channel} are not sorted at index {index}")]
    Unsorted { channel: u8, index: usize },

    /// Accidental subtraction went further negative than shot noise allows.
    #[error(
        "effective coincidences {effective} below statistical floor -3*sqrt({accidentals}); \
         check delays and windows"
    )]
    NegativeCoincidences { effective: f64, accidentals: u64 },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The fitter ran out of iterations. Carries the best parameters seen.
    #[error("fit did not converge after {iterations} iterations (best cost {cost:e})")]
    NonConvergence {
        iterations: usize,
        cost: f64,
        best: [f64; 3],
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data in {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            expected: "[0, 1]",
        })
    }
}

pub(crate) fn check_nonnegative(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            expected: "finite and >= 0",
        })
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Domain {
            name,
            value,
            expected: "finite and > 0",
        })
    }
}
