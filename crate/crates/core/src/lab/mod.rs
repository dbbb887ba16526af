//! Experiments built on the estimators: repeated estimation with error
//! measures, smile generation, forward-variance extraction, calibration and
//! marginal checks of the Volterra process.

pub mod benchmark;
pub mod calibration;
pub mod forward_variance;
pub mod smile;
mod volterra_check;

pub use benchmark::{
    error_measures, reference_targets, repeated_estimation, BenchmarkRecord, Replications, StrikeTarget,
};
pub use calibration::{calibrate_rho_eta, nelder_mead, Bounds, CalibrationResult, NelderMeadOptions, SmileObjective};
pub use forward_variance::{bootstrap_forward_variance, extract_forward_variance, NaturalCubicSpline};
pub use smile::{generate_smile, to_delta_space, DeltaSlice, SmileConfig, SmilePoint, SmileSurface};
pub use volterra_check::{marginal_moments, MarginalMoments};
