//! Monte Carlo implied volatilities for the rough Bergomi model.
//!
//! The crate is organised bottom-up:
//!
//! - [`hybrid`] simulates the Riemann-Liouville (Volterra) process with the
//!   first-order hybrid scheme, evaluating the power-kernel history sum as an
//!   FFT convolution.
//! - [`engine`] maps Volterra skeletons to the variance process, integrated
//!   variance and the terminal price functionals `S_t` and `S¹_t`.
//! - [`black_scholes`] holds the out-of-the-money pricing convention, implied
//!   total variance inversion and delta/strike conversions.
//! - [`estimators`] builds the Base, Antithetic, Conditional, Controlled and
//!   Mixed price estimators and turns them into implied volatilities.
//! - [`lab`] runs repeated-estimation benchmarks, smile generation,
//!   forward-variance extraction and `(rho, eta)` calibration.
//! - [`io`] parses run configurations and writes CSV output for the
//!   `rbergomi` binary.
//!
//! Prices are forward-normalised throughout: `E[S_t] = 1` and log-strikes are
//! `k = log K`.
//!
//! ```no_run
//! use rbergomi::prelude::*;
//!
//! let model = ModelParams::new(ForwardVariance::flat(0.235 * 0.235), 1.9, -0.9, -0.43)?;
//! let grid = TimeGrid::new(312, 0.25)?;
//! let sim = Simulation::new(&model, grid)?;
//! let paths = sim.functionals(EstimatorKind::Mixed.path_requirements(), 100_000, 7)?;
//! let spec = OptionSpec::new(0.0, 0.25)?;
//! let est = estimate_implied_vol(EstimatorKind::Mixed, &paths, &spec, model.rho)?;
//! println!("ATM vol {:?}", est.sigma);
//! # Ok::<(), rbergomi::Error>(())
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod black_scholes;
pub mod engine;
mod error;
pub mod estimators;
pub mod hybrid;
pub mod io;
pub mod lab;
pub mod normal;
pub mod rng;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::black_scholes::{
        bs_price, forward_delta, implied_total_variance, implied_vol, logstrike_from_spot_delta, OptionSpec,
    };
    pub use crate::engine::{ForwardVariance, ModelParams, PathFunctionals, PathRequirements, Simulation};
    pub use crate::estimators::{estimate_implied_vol, EstimatorKind, ImpliedVolEstimate};
    pub use crate::hybrid::{HybridScheme, Roughness, TimeGrid, VolterraPaths};
    pub use crate::Error;
}
