//! Standard normal distribution helpers.
//!
//! The CDF is evaluated through `erfc`, which keeps full relative accuracy in
//! the lower tail. The Mills ratio `N(-x)/φ(x)` is provided separately so that
//! far out-of-the-money option prices can be formed in log space.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Log of the standard normal density.
pub fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal CDF.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Mills ratio `N(-x) / φ(x)`, finite for every real `x` with `x > -37`.
///
/// Uses the continued fraction for large `x`, where `erfc` underflows.
pub fn mills_ratio(x: f64) -> f64 {
    if x < 26.0 {
        cdf(-x) / pdf(x)
    } else {
        // N(-x)/φ(x) = 1/(x + 1/(x + 2/(x + 3/(x + ...))))
        let mut tail = 0.0;
        for j in (1..=60).rev() {
            tail = j as f64 / (x + tail);
        }
        1.0 / (x + tail)
    }
}

/// Inverse standard normal CDF.
///
/// Acklam's rational approximation followed by two Halley refinements
/// against [`cdf`].
pub fn inv_cdf(p: f64) -> f64 {
    if p.is_nan() || p <= 0.0 {
        return if p == 0.0 { f64::NEG_INFINITY } else { f64::NAN };
    }
    if p >= 1.0 {
        return if p == 1.0 { f64::INFINITY } else { f64::NAN };
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    for _ in 0..2 {
        // residual cdf(x) - p, formed in whichever tail keeps it accurate
        let e = if x < 0.0 { cdf(x) - p } else { (1.0 - p) - cdf(-x) };
        let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Maclaurin series of erf, independent of libm; fine for |x| <= 3.
    fn erf_series(x: f64) -> f64 {
        let mut sum = 0.0;
        let mut term = x;
        let mut n = 0.0;
        while term.abs() > 1e-18 {
            sum += term / (2.0 * n + 1.0);
            n += 1.0;
            term *= -x * x / n;
        }
        2.0 / PI.sqrt() * sum
    }

    #[test]
    fn cdf_matches_series_oracle() {
        for i in -40..=40 {
            let x = i as f64 * 0.1;
            let oracle = 0.5 * (1.0 + erf_series(x * FRAC_1_SQRT_2));
            assert!((cdf(x) - oracle).abs() < 1e-14, "x={x}: {} vs {oracle}", cdf(x));
        }
    }

    #[test]
    fn cdf_reference_values() {
        assert_eq!(cdf(0.0), 0.5);
        assert!((cdf(0.1) - 0.539_827_837_277_028_9).abs() < 1e-15);
        assert!((cdf(-1.281_551_565_544_600_5) - 0.1).abs() < 1e-15);
        // lower tail keeps relative accuracy
        let t = cdf(-10.0);
        assert!((t / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn mills_ratio_branches_agree() {
        for &x in &[20.0, 24.0, 25.9] {
            let direct = cdf(-x) / pdf(x);
            let mut tail = 0.0;
            for j in (1..=60).rev() {
                tail = j as f64 / (x + tail);
            }
            let cf = 1.0 / (x + tail);
            assert!((direct / cf - 1.0).abs() < 1e-12, "x={x}");
        }
        // asymptotics 1/x - 1/x^3
        let x = 1e3;
        assert!((mills_ratio(x) - (1.0 / x - 1.0 / x.powi(3))).abs() < 1e-14);
    }

    #[test]
    fn inverse_round_trips() {
        for &p in &[
            1e-300,
            1e-12,
            1e-4,
            0.01,
            0.05,
            0.1,
            0.3,
            0.5,
            0.77,
            0.95,
            0.999,
            1.0 - 1e-10,
        ] {
            let x = inv_cdf(p);
            let back = cdf(x);
            assert!(((back - p) / p).abs() < 1e-12, "p={p}: x={x}, back={back}");
        }
        assert!((inv_cdf(0.1) + 1.281_551_565_544_600_5).abs() < 1e-13);
    }
}
