//! Black-Scholes function with spot `s`, log-strike `k = log K` and total
//! variance `v`, under the out-of-the-money convention: puts for `k <= 0`,
//! calls for `k > 0`.
//!
//! Far out-of-the-money prices are formed through the Mills ratio,
//! `BS = s φ(d₊) (m(x_lo) - m(x_hi))`, which never subtracts two underflowing
//! CDF values. The implied total variance is found by safeguarded Newton on
//! `log BS`, which stays well conditioned deep in the wings.

use crate::normal;
use crate::{Error, Result};

/// Put or call; the sign `w` of the payoff `(w(S - e^k))⁺`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptionType {
    Put,
    Call,
}

impl OptionType {
    /// The out-of-the-money side for log-strike `k`.
    pub fn from_log_strike(k: f64) -> Self {
        if k <= 0.0 {
            OptionType::Put
        } else {
            OptionType::Call
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            OptionType::Put => -1.0,
            OptionType::Call => 1.0,
        }
    }
}

/// A European OTM option on the forward-normalised price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    pub k: f64,
    pub t: f64,
    pub w: OptionType,
}

impl OptionSpec {
    pub fn new(k: f64, t: f64) -> Result<Self> {
        if !k.is_finite() {
            return Err(Error::invalid("k", "log-strike must be finite"));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid("t", format!("maturity must be positive, got {t}")));
        }
        Ok(Self {
            k,
            t,
            w: OptionType::from_log_strike(k),
        })
    }

    /// Supremum of arbitrage-free prices at unit spot: 1 for calls, `e^k` for puts.
    pub fn price_upper_bound(&self) -> f64 {
        price_upper_bound(self.k)
    }
}

fn price_upper_bound(k: f64) -> f64 {
    match OptionType::from_log_strike(k) {
        OptionType::Call => 1.0,
        OptionType::Put => k.exp(),
    }
}

/// Payoff `(w(s - e^k))⁺`.
pub fn intrinsic(s: f64, k: f64, w: OptionType) -> f64 {
    (w.sign() * (s - k.exp())).max(0.0)
}

fn d_plus_minus(v: f64, s: f64, k: f64) -> (f64, f64, f64) {
    let sv = v.sqrt();
    let d_plus = (s.ln() - k) / sv + 0.5 * sv;
    (d_plus, d_plus - sv, sv)
}

/// `BS(v; s, k) = w(s N(w d₊) - e^k N(w d₋))`; intrinsic value at `v = 0`.
pub fn bs_price(v: f64, s: f64, k: f64, w: OptionType) -> f64 {
    debug_assert!(v >= 0.0 && s > 0.0, "bs_price needs v >= 0 and s > 0");
    if v <= 0.0 {
        return intrinsic(s, k, w);
    }
    let (d_plus, d_minus, _) = d_plus_minus(v, s, k);
    let ws = w.sign();
    let (x_plus, x_minus) = (-ws * d_plus, -ws * d_minus);
    let lo = x_plus.min(x_minus);
    if lo > 0.0 && lo.is_finite() {
        let hi = x_plus.max(x_minus);
        return (s * normal::pdf(d_plus) * (normal::mills_ratio(lo) - normal::mills_ratio(hi))).max(0.0);
    }
    let p = ws * (s * normal::cdf(ws * d_plus) - k.exp() * normal::cdf(ws * d_minus));
    p.max(0.0)
}

/// `log BS(v; s, k)`, finite wherever the price is positive in exact
/// arithmetic, even when the price itself underflows.
pub fn bs_log_price(v: f64, s: f64, k: f64, w: OptionType) -> f64 {
    if v <= 0.0 {
        return intrinsic(s, k, w).ln();
    }
    let (d_plus, d_minus, _) = d_plus_minus(v, s, k);
    let ws = w.sign();
    let (x_plus, x_minus) = (-ws * d_plus, -ws * d_minus);
    let lo = x_plus.min(x_minus);
    if lo > 0.0 {
        let hi = x_plus.max(x_minus);
        let diff = normal::mills_ratio(lo) - normal::mills_ratio(hi);
        return s.ln() + normal::ln_pdf(d_plus) + diff.ln();
    }
    bs_price(v, s, k, w).ln()
}

/// `∂BS/∂v = s φ(d₊) / (2√v)`.
pub fn vega_total_variance(v: f64, s: f64, k: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let (d_plus, _, sv) = d_plus_minus(v, s, k);
    s * normal::pdf(d_plus) / (2.0 * sv)
}

fn ln_vega_total_variance(v: f64, k: f64) -> f64 {
    let (d_plus, _, sv) = d_plus_minus(v, 1.0, k);
    normal::ln_pdf(d_plus) - (2.0 * sv).ln()
}

const INVERSION_MAX_ITER: usize = 200;

/// Total variance `v` with `BS(v; 1, k) = price`, OTM side implied by `k`.
pub fn implied_total_variance(price: f64, k: f64) -> Result<f64> {
    let upper = price_upper_bound(k);
    if !(price >= 0.0 && price < upper) {
        return Err(Error::PriceOutOfBounds { price, upper });
    }
    if price == 0.0 {
        return Ok(0.0);
    }
    implied_total_variance_from_log_price(price.ln(), k)
}

/// As [`implied_total_variance`], from `log price`; reaches prices below the
/// smallest positive `f64`.
pub fn implied_total_variance_from_log_price(log_price: f64, k: f64) -> Result<f64> {
    let w = OptionType::from_log_strike(k);
    let upper = price_upper_bound(k);
    if !(log_price < upper.ln()) || log_price.is_nan() {
        return Err(Error::PriceOutOfBounds {
            price: log_price.exp(),
            upper,
        });
    }
    if log_price == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let f = |v: f64| bs_log_price(v, 1.0, k, w) - log_price;

    // Bracket the root: f is increasing in v.
    let mut lo = 0.0_f64;
    let mut hi = 16.0_f64;
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e8 {
            return Err(Error::NoConvergence {
                what: "implied variance bracket",
                iterations: 0,
                residual: f(hi),
            });
        }
    }

    // Start from the left so that Newton on the concave log-price moves
    // monotonically; a rough ATM-style guess is enough.
    let mut v = {
        let guess = (2.0 * k.abs()).max((log_price.exp() * 2.5).powi(2)).min(hi);
        if guess > lo && f(guess) < 0.0 {
            guess
        } else {
            0.5 * (lo + hi)
        }
    };

    let mut residual = f64::INFINITY;
    for _ in 0..INVERSION_MAX_ITER {
        let fv = f(v);
        residual = fv;
        if fv == 0.0 {
            return Ok(v);
        }
        if fv < 0.0 {
            lo = lo.max(v);
        } else {
            hi = hi.min(v);
        }
        let slope = (ln_vega_total_variance(v, k) - bs_log_price(v, 1.0, k, w)).exp();
        let mut next = v - fv / slope;
        if !(next.is_finite() && next > lo && next < hi) {
            next = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi.min(v) };
        }
        if (next - v).abs() <= 4.0 * f64::EPSILON * v {
            return Ok(next);
        }
        v = next;
    }
    Err(Error::NoConvergence {
        what: "implied variance",
        iterations: INVERSION_MAX_ITER,
        residual,
    })
}

/// `σ_BS = √(v/t)` with `v = BS⁻¹(price; 1, k)`.
pub fn implied_vol(price: f64, k: f64, t: f64) -> Result<f64> {
    Ok((implied_total_variance(price, k)? / t).sqrt())
}

/// Forward delta `Δ = N(-d₋)` at unit spot.
pub fn forward_delta(k: f64, sigma: f64, t: f64) -> f64 {
    let sv = sigma * t.sqrt();
    normal::cdf(k / sv + 0.5 * sv)
}

const DELTA_MAX_ITER: usize = 500;
const DELTA_TOL: f64 = 1e-10;

/// Solves for `k` given `N(-(−k/(σ√t) + shift·σ√t)) = target` where `σ = smile(k)`.
fn solve_delta_strike(target: f64, smile: &dyn Fn(f64) -> f64, t: f64, shift: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid("delta", format!("must lie in (0, 1), got {target}")));
    }
    let z = normal::inv_cdf(target);
    let sqrt_t = t.sqrt();
    let residual = |k: f64| {
        let sv = smile(k) * sqrt_t;
        normal::cdf(k / sv - shift * sv) - target
    };
    let image = |k: f64| {
        let sv = smile(k) * sqrt_t;
        sv * (z + shift * sv)
    };

    // damped fixed point
    let mut k = image(0.0);
    let mut damping = 1.0;
    let mut r = residual(k);
    for _ in 0..DELTA_MAX_ITER {
        if !r.is_finite() {
            break;
        }
        if r.abs() <= DELTA_TOL {
            return Ok(k);
        }
        let candidate = k + damping * (image(k) - k);
        let rc = residual(candidate);
        if rc.is_finite() && rc.abs() < r.abs() {
            k = candidate;
            r = rc;
        } else {
            damping *= 0.5;
            if damping < 1e-8 {
                break;
            }
        }
    }

    // fall back to bisection on a bracket around the flat-smile answer
    let scale = smile(k).max(smile(0.0)) * sqrt_t;
    let (mut a, mut b) = (k - 10.0 * scale, k + 10.0 * scale);
    let (mut ra, rb) = (residual(a), residual(b));
    if !(ra < 0.0 && rb > 0.0) {
        return Err(Error::NoConvergence {
            what: "delta strike",
            iterations: DELTA_MAX_ITER,
            residual: r,
        });
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let rm = residual(m);
        if rm.abs() <= DELTA_TOL {
            return Ok(m);
        }
        if (rm < 0.0) == (ra < 0.0) {
            a = m;
            ra = rm;
        } else {
            b = m;
        }
    }
    Err(Error::NoConvergence {
        what: "delta strike",
        iterations: DELTA_MAX_ITER + 200,
        residual: r,
    })
}

/// Log-strike whose spot put delta `N(-d₊)` equals `delta_put` on `smile`.
///
/// `delta_put = 0.9` is the 10-delta call, `N(d₊) = 0.1`.
pub fn logstrike_from_spot_delta(delta_put: f64, smile: &dyn Fn(f64) -> f64, t: f64) -> Result<f64> {
    solve_delta_strike(delta_put, smile, t, 0.5)
}

/// Log-strike whose forward delta `N(-d₋)` equals `delta` on `smile`.
pub fn logstrike_from_forward_delta(delta: f64, smile: &dyn Fn(f64) -> f64, t: f64) -> Result<f64> {
    solve_delta_strike(delta, smile, t, -0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn put_at_the_money_closed_form() {
        // v = 0.04: d± = ±0.1, put = N(0.1) - N(-0.1) = 2N(0.1) - 1
        let p = bs_price(0.04, 1.0, 0.0, OptionType::Put);
        assert!((p - 0.079_655_674_554_057_8).abs() < 1e-15);
        assert!((p - 0.079656).abs() < 1e-6);
    }

    #[test]
    fn intrinsic_at_zero_variance() {
        assert_eq!(bs_price(0.0, 1.0, 0.1, OptionType::Call), 0.0);
        assert!((bs_price(0.0, 1.2, 0.1, OptionType::Call) - (1.2 - 0.1f64.exp())).abs() < 1e-16);
    }

    #[test]
    fn atm_put_equals_call() {
        for &v in &[1e-6, 0.01, 0.3, 2.0] {
            let p = bs_price(v, 1.0, 0.0, OptionType::Put);
            let c = bs_price(v, 1.0, 0.0, OptionType::Call);
            assert!((p - c).abs() < 1e-15);
        }
    }

    #[test]
    fn tail_form_matches_direct_form_where_both_are_accurate() {
        for &(v, k) in &[(0.04, 0.3), (0.01, -0.2), (0.5, 1.5), (0.0106, -0.1787)] {
            let w = OptionType::from_log_strike(k);
            let (d_plus, d_minus, _) = d_plus_minus(v, 1.0, k);
            let ws = w.sign();
            let direct = ws * (normal::cdf(ws * d_plus) - k.exp() * normal::cdf(ws * d_minus));
            let tail = bs_price(v, 1.0, k, w);
            assert!((direct - tail).abs() < 1e-15, "v={v} k={k}: {direct} vs {tail}");
        }
    }

    #[test]
    fn log_price_survives_underflow() {
        let lp = bs_log_price(1e-6, 1.0, 0.5, OptionType::Call);
        assert!(lp.is_finite() && lp < -1e5);
        assert_eq!(bs_price(1e-6, 1.0, 0.5, OptionType::Call), 0.0);
        let v = implied_total_variance_from_log_price(lp, 0.5).unwrap();
        assert!((v - 1e-6).abs() < 1e-14);
    }

    #[test]
    fn table_strike_round_trip() {
        let v = 0.2961f64.powi(2) * 0.25;
        let p = bs_price(v, 1.0, -0.1787, OptionType::Put);
        let back = implied_total_variance(p, -0.1787).unwrap();
        assert!((back - v).abs() < 1e-12);
        assert!((bs_price(back, 1.0, -0.1787, OptionType::Put) - p).abs() < 1e-12);
        assert!((implied_vol(p, -0.1787, 0.25).unwrap() - 0.2961).abs() < 1e-10);
    }

    #[test]
    fn inversion_domain() {
        assert_eq!(implied_total_variance(0.0, 0.2).unwrap(), 0.0);
        assert!(matches!(
            implied_total_variance(1.0, 0.2),
            Err(Error::PriceOutOfBounds { .. })
        ));
        assert!(implied_total_variance(-1e-3, 0.2).is_err());
        assert!(implied_total_variance((-0.1f64).exp(), -0.1).is_err());
        assert!(implied_total_variance(f64::NAN, 0.0).is_err());
        // above BS(16) the bracket grows
        let p = bs_price(40.0, 1.0, 0.0, OptionType::Put);
        assert!((implied_total_variance(p, 0.0).unwrap() - 40.0).abs() < 1e-9);
    }

    /// Bisection on the price, 200 halvings: an oracle independent of the
    /// Newton/log-space machinery.
    fn bisect_inverse(price: f64, k: f64) -> f64 {
        let w = OptionType::from_log_strike(k);
        let (mut lo, mut hi) = (0.0, 16.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if bs_price(mid, 1.0, k, w) < price {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn inversion_agrees_with_bisection_oracle() {
        for i in 0..25 {
            for j in 0..21 {
                let v = 0.005 + 0.08 * i as f64;
                let k = -0.5 + 0.05 * j as f64;
                let p = bs_price(v, 1.0, k, OptionType::from_log_strike(k));
                let newton = implied_total_variance(p, k).unwrap();
                let oracle = bisect_inverse(p, k);
                assert!((newton - oracle).abs() < 1e-8, "v={v} k={k}: {newton} vs {oracle}");
            }
        }
    }

    #[test]
    fn spot_delta_strikes_match_flat_smile_values() {
        let k = logstrike_from_spot_delta(0.10, &|_| 0.2417, 0.25).unwrap();
        assert!((k - -0.1476).abs() < 5e-5, "{k}");
        let k = logstrike_from_spot_delta(0.90, &|_| 0.2466, 0.25).unwrap();
        assert!((k - 0.1656).abs() < 5e-5, "{k}");
        let sigma: f64 = 0.3;
        let k = logstrike_from_spot_delta(0.5, &|_| sigma, 0.5).unwrap();
        assert!((k - 0.5 * sigma * sigma * 0.5).abs() < 1e-9);
    }

    #[test]
    fn spot_delta_on_sloped_smile_hits_residual() {
        let smile = |k: f64| (0.22 - 0.4 * k + 0.8 * k * k).max(0.05);
        for &d in &[0.05, 0.1, 0.25, 0.5, 0.75, 0.95] {
            let k = logstrike_from_spot_delta(d, &smile, 0.25).unwrap();
            let sv = smile(k) * 0.5;
            let r = normal::cdf(-(-k / sv + 0.5 * sv)) - d;
            assert!(r.abs() <= 1e-10);
        }
        assert!(logstrike_from_spot_delta(1.0, &smile, 0.25).is_err());
    }

    #[test]
    fn forward_delta_values() {
        let (s, t) = (0.2173, 0.25);
        assert!((forward_delta(-0.5 * s * s * t, s, t) - 0.5).abs() < 1e-15);
        // N(σ√t/2) = N(0.054325)
        assert!((forward_delta(0.0, s, t) - normal::cdf(0.054325)).abs() < 1e-15);
        assert!((forward_delta(0.0, s, t) - 0.5217).abs() < 1e-4);
        let k = logstrike_from_forward_delta(0.3, &|_| s, t).unwrap();
        assert!((forward_delta(k, s, t) - 0.3).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn put_call_parity(v in 0.0f64..4.0, s in 0.2f64..5.0, k in -1.5f64..1.5) {
            let c = bs_price(v, s, k, OptionType::Call);
            let p = bs_price(v, s, k, OptionType::Put);
            prop_assert!((c - p - (s - k.exp())).abs() <= 1e-14 * (1.0 + s + k.exp()));
        }

        #[test]
        fn price_monotone_in_variance(v in 1e-6f64..3.0, dv in 1e-4f64..1.0, k in -0.8f64..0.8) {
            let w = OptionType::from_log_strike(k);
            prop_assert!(bs_price(v + dv, 1.0, k, w) >= bs_price(v, 1.0, k, w));
        }

        #[test]
        fn otm_price_bounded(v in 0.0f64..4.0, k in -1.0f64..1.0) {
            let p = bs_price(v, 1.0, k, OptionType::from_log_strike(k));
            prop_assert!(p >= 0.0 && p <= 1.0f64.min(k.exp()));
        }

        #[test]
        fn inversion_round_trip(v in 1e-6f64..4.0, k in -0.5f64..0.5) {
            let w = OptionType::from_log_strike(k);
            let lp = bs_log_price(v, 1.0, k, w);
            let back = implied_total_variance_from_log_price(lp, k).unwrap();
            prop_assert!((back - v).abs() <= 1e-8, "v={} k={} back={}", v, k, back);
            let p = bs_price(v, 1.0, k, w);
            if p > 0.0 {
                let back = implied_total_variance(p, k).unwrap();
                prop_assert!((bs_price(back, 1.0, k, w) - p).abs() <= 1e-12);
            }
        }

        #[test]
        fn forward_delta_increasing_in_strike(k in -0.5f64..0.5, dk in 1e-3f64..0.2, s in 0.15f64..1.0) {
            prop_assert!(forward_delta(k + dk, s, 0.25) > forward_delta(k, s, 0.25));
        }
    }
}
