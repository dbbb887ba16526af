//! Price and implied-volatility estimators of the form
//! `P̂ = mean(X + α̂Y) - α̂ E[Y]`.
//!
//! | kind        | X                          | Y                              |
//! |-------------|----------------------------|--------------------------------|
//! | Base        | `(S_t - e^k)⁺`             | 0                              |
//! | Antithetic  | `(S_t - e^k)⁺`, paired     | 0                              |
//! | Conditional | `BS((1-ρ²)∫V; S¹_t, k)`    | 0                              |
//! | Controlled  | `(S_t - e^k)⁺`             | `BS(Q̂ - ∫V; S_t, k)`           |
//! | Mixed       | `BS((1-ρ²)∫V; S¹_t, k)`    | `BS(ρ²(Q̂ - ∫V); S¹_t, k)`      |
//!
//! `Q̂` is the largest sampled integrated variance, so every variance
//! argument of `Y` is non-negative. The control `Y` is the price of a timer
//! option with budget `Q̂` (times `ρ²` for Mixed), whose expectation is the
//! Black-Scholes price at unit spot.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::black_scholes::{bs_price, implied_total_variance, intrinsic, OptionSpec};
use crate::engine::{PathFunctionals, PathRequirements};
use crate::{Error, Result};

/// Below this sample variance the control is treated as constant and `α̂ = 0`.
pub const DEGENERATE_CONTROL_VARIANCE: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Base,
    Antithetic,
    Conditional,
    Controlled,
    Mixed,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::Base,
        EstimatorKind::Antithetic,
        EstimatorKind::Conditional,
        EstimatorKind::Controlled,
        EstimatorKind::Mixed,
    ];

    /// Base alone runs on independent paths; Conditional and Mixed never
    /// need `W²`.
    pub fn path_requirements(self) -> PathRequirements {
        match self {
            EstimatorKind::Base => PathRequirements {
                antithetic: false,
                full_price: true,
            },
            EstimatorKind::Antithetic | EstimatorKind::Controlled => PathRequirements {
                antithetic: true,
                full_price: true,
            },
            EstimatorKind::Conditional | EstimatorKind::Mixed => PathRequirements {
                antithetic: true,
                full_price: false,
            },
        }
    }

    pub fn has_control(self) -> bool {
        matches!(self, EstimatorKind::Controlled | EstimatorKind::Mixed)
    }

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Base => "base",
            EstimatorKind::Antithetic => "antithetic",
            EstimatorKind::Conditional => "conditional",
            EstimatorKind::Controlled => "controlled",
            EstimatorKind::Mixed => "mixed",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config("estimator", format!("unknown estimator `{s}`")))
    }
}

/// Which timer-option control to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlVariant {
    /// `BS(ρ²(q - ∫V); S¹_t, k)`.
    Mixed,
    /// `BS(q - ∫V; S_t, k)`.
    Controlled,
}

/// `X = (w(S_t - e^k))⁺`.
pub fn base_payoff(pf: &PathFunctionals, spec: &OptionSpec) -> Result<Vec<f64>> {
    let s_t = pf.full_price()?;
    Ok(s_t.iter().map(|&s| intrinsic(s, spec.k, spec.w)).collect())
}

/// `X = BS((1-ρ²)∫V; S¹_t, k)`, the price conditional on `W¹`.
pub fn conditional_x(pf: &PathFunctionals, spec: &OptionSpec, rho: f64) -> Vec<f64> {
    let scale = 1.0 - rho * rho;
    pf.s1_t
        .par_iter()
        .zip(&pf.iv)
        .map(|(&s1, &iv)| bs_price(scale * iv, s1, spec.k, spec.w))
        .collect()
}

/// `Q̂ = max_i ∫V_i`.
pub fn q_hat(iv: &[f64]) -> Result<f64> {
    if iv.is_empty() {
        return Err(Error::invalid("iv", "need at least one integrated variance"));
    }
    Ok(iv.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Timer-option control samples with budget `q`.
pub fn control_y(
    pf: &PathFunctionals,
    spec: &OptionSpec,
    rho: f64,
    q: f64,
    variant: ControlVariant,
) -> Result<Vec<f64>> {
    let max_iv = q_hat(&pf.iv)?;
    if !(q >= max_iv) {
        return Err(Error::invalid(
            "q",
            format!("variance budget {q} is below the largest integrated variance {max_iv}"),
        ));
    }
    let (spot, scale) = match variant {
        ControlVariant::Mixed => (pf.s1_t.as_slice(), rho * rho),
        ControlVariant::Controlled => (pf.full_price()?, 1.0),
    };
    Ok(spot
        .par_iter()
        .zip(&pf.iv)
        .map(|(&s, &iv)| bs_price(scale * (q - iv), s, spec.k, spec.w))
        .collect())
}

/// `E[Y] = BS(ρ²q; 1, k)` (Mixed) or `BS(q; 1, k)` (Controlled).
pub fn timer_expectation(rho: f64, q: f64, spec: &OptionSpec, variant: ControlVariant) -> f64 {
    let budget = match variant {
        ControlVariant::Mixed => rho * rho * q,
        ControlVariant::Controlled => q,
    };
    bs_price(budget, 1.0, spec.k, spec.w)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// `α̂ = -Σ(X-X̄)(Y-Ȳ) / Σ(Y-Ȳ)²`, or 0 when `Y` is numerically constant.
pub fn alpha_hat(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "alpha_hat needs paired samples");
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut syy) = (0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        let dy = yi - my;
        sxy += (xi - mx) * dy;
        syy += dy * dy;
    }
    if syy / ((n - 1) as f64) < DEGENERATE_CONTROL_VARIANCE {
        return 0.0;
    }
    -sxy / syy
}

/// `X`, `Y` and the fitted control parameters for one estimator run.
#[derive(Debug, Clone)]
pub struct EstimatorSample {
    pub kind: EstimatorKind,
    pub x: Vec<f64>,
    /// Empty when the estimator has no control.
    pub y: Vec<f64>,
    pub alpha_hat: f64,
    pub q_hat: f64,
    pub ey: f64,
    pub antithetic: bool,
}

impl EstimatorSample {
    pub fn assemble(kind: EstimatorKind, pf: &PathFunctionals, spec: &OptionSpec, rho: f64) -> Result<Self> {
        let req = kind.path_requirements();
        if req.antithetic != pf.antithetic {
            return Err(Error::Shape(format!(
                "{kind} expects {} paths",
                if req.antithetic { "antithetic" } else { "independent" }
            )));
        }
        if pf.is_empty() {
            return Err(Error::invalid("n_paths", "no paths to estimate from"));
        }
        let x = match kind {
            EstimatorKind::Base | EstimatorKind::Antithetic | EstimatorKind::Controlled => base_payoff(pf, spec)?,
            EstimatorKind::Conditional | EstimatorKind::Mixed => conditional_x(pf, spec, rho),
        };
        let (y, alpha_hat, q, ey) = match kind {
            EstimatorKind::Controlled | EstimatorKind::Mixed => {
                let variant = if kind == EstimatorKind::Mixed {
                    ControlVariant::Mixed
                } else {
                    ControlVariant::Controlled
                };
                let q = q_hat(&pf.iv)?;
                let y = control_y(pf, spec, rho, q, variant)?;
                let a = alpha_hat(&x, &y);
                (y, a, q, timer_expectation(rho, q, spec, variant))
            }
            _ => (Vec::new(), 0.0, 0.0, 0.0),
        };
        Ok(Self {
            kind,
            x,
            y,
            alpha_hat,
            q_hat: q,
            ey,
            antithetic: pf.antithetic,
        })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Per-path terms `X + α̂Y`.
    pub fn adjusted(&self) -> Vec<f64> {
        if self.y.is_empty() {
            self.x.clone()
        } else {
            self.x
                .iter()
                .zip(&self.y)
                .map(|(x, y)| x + self.alpha_hat * y)
                .collect()
        }
    }

    /// `P̂ = mean(X + α̂Y) - α̂E[Y]`.
    pub fn price(&self) -> f64 {
        mean(&self.adjusted()) - self.alpha_hat * self.ey
    }

    /// Standard error of [`price`](Self::price), with antithetic pairs
    /// averaged first so that only independent terms enter.
    pub fn standard_error(&self) -> f64 {
        let terms = self.adjusted();
        let units: Vec<f64> = if self.antithetic {
            terms.chunks(2).map(mean).collect()
        } else {
            terms
        };
        let m = units.len();
        if m < 2 {
            return f64::NAN;
        }
        let mu = mean(&units);
        let var = units.iter().map(|u| (u - mu) * (u - mu)).sum::<f64>() / (m - 1) as f64;
        (var / m as f64).sqrt()
    }
}

/// Outcome flags for an implied-volatility estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateStatus {
    Ok,
    /// `P̂ <= 0`: reported as zero volatility.
    ClampedZero,
    /// `P̂` at or above the no-arbitrage bound: no volatility.
    AboveBound,
    InversionFailed,
}

#[derive(Debug, Clone)]
pub struct ImpliedVolEstimate {
    pub kind: EstimatorKind,
    pub spec: OptionSpec,
    pub sigma: Option<f64>,
    pub price: f64,
    pub price_std_err: f64,
    pub status: EstimateStatus,
    pub alpha_hat: f64,
    pub q_hat: f64,
    pub ey: f64,
    pub n: usize,
}

impl ImpliedVolEstimate {
    pub fn is_flagged(&self) -> bool {
        self.status != EstimateStatus::Ok
    }
}

/// Turns a price estimate into an implied volatility, flagging rather than
/// failing on out-of-range prices.
pub fn invert_estimate(sample: &EstimatorSample, spec: &OptionSpec) -> ImpliedVolEstimate {
    let price = sample.price();
    let upper = spec.price_upper_bound();
    let (sigma, status) = if !price.is_finite() {
        (None, EstimateStatus::InversionFailed)
    } else if price <= 0.0 {
        (Some(0.0), EstimateStatus::ClampedZero)
    } else if price >= upper {
        (None, EstimateStatus::AboveBound)
    } else {
        match implied_total_variance(price, spec.k) {
            Ok(v) => (Some((v / spec.t).sqrt()), EstimateStatus::Ok),
            Err(_) => (None, EstimateStatus::InversionFailed),
        }
    };
    ImpliedVolEstimate {
        kind: sample.kind,
        spec: *spec,
        sigma,
        price,
        price_std_err: sample.standard_error(),
        status,
        alpha_hat: sample.alpha_hat,
        q_hat: sample.q_hat,
        ey: sample.ey,
        n: sample.n(),
    }
}

/// `σ̂` with `σ̂²t = BS⁻¹(P̂; 1, k)` for one estimator on simulated paths.
pub fn estimate_implied_vol(
    kind: EstimatorKind,
    pf: &PathFunctionals,
    spec: &OptionSpec,
    rho: f64,
) -> Result<ImpliedVolEstimate> {
    let sample = EstimatorSample::assemble(kind, pf, spec, rho)?;
    Ok(invert_estimate(&sample, spec))
}
