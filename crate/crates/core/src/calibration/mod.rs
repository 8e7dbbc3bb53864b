//! Efficiency estimators, sweep fitting, accidental-line fitting and
//! uncertainty bookkeeping.

mod accidentals;
mod budget;
mod estimators;
mod fit;
mod propagation;

pub use accidentals::{accidental_line_fit, AccidentalLineFit};
pub use budget::{combine_budget, BudgetComponent, UncertaintyBudget};
pub use estimators::{
    channel_loss_from_trap, conventional_efficiency, infer_source_transmission, klyshko_efficiency, Measurement,
};
pub use fit::{
    fit_observations, fit_sweep, model_probabilities, squeeze_from_dac, CalibrationFit, FitOptions, PointSigma,
    ResidualDiagnostics, SweepObservation, SweepPoint, DEFAULT_MU, ILL_CONDITIONED_THRESHOLD,
};
pub use propagation::{conditional_eta2_derivative, invert_eta2, propagate_sigma_eta};
