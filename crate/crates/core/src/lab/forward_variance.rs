//! Integrated forward variance from a forward-delta smile,
//! `∫₀ᵗ ξ₀(u) du = E[∫₀ᵗ V_u du] = ∫₀¹ σ_BS(Δ, t)² t dΔ`.

use crate::engine::ForwardVariance;
use crate::lab::smile::DeltaSlice;
use crate::{Error, Result};

/// Fewest smile points accepted by [`extract_forward_variance`].
pub const MIN_SMILE_POINTS: usize = 5;

/// Natural cubic spline through `(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalCubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots; zero at both ends.
    m: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::invalid("spline", "need at least two knots with one value each"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("spline", "knots must be strictly increasing"));
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for the interior second derivatives
            let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i]);
            }
            for i in 1..k {
                let f = h[i] / diag[i - 1];
                diag[i] -= f * h[i];
                rhs[i] -= f * rhs[i - 1];
            }
            m[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = (rhs[i] - h[i + 1] * m[i + 2]) / diag[i];
            }
        }
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    /// Spline value; constant beyond the end knots.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0];
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = self.x.partition_point(|&v| v <= t) - 1;
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    /// Exact integral over `[x_0, x_n]`.
    pub fn integral(&self) -> f64 {
        self.x
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let h = w[1] - w[0];
                0.5 * h * (self.y[i] + self.y[i + 1]) - h * h * h * (self.m[i] + self.m[i + 1]) / 24.0
            })
            .sum()
    }
}

/// `∫₀¹ σ(Δ)² t dΔ` with a natural cubic spline of `σ²` between the observed
/// deltas and constant extrapolation towards 0 and 1.
pub fn extract_forward_variance(t: f64, deltas: &[f64], sigmas: &[f64]) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid("maturity", format!("must be positive, got {t}")));
    }
    if deltas.len() < MIN_SMILE_POINTS || sigmas.len() != deltas.len() {
        return Err(Error::invalid(
            "smile",
            format!("need at least {MIN_SMILE_POINTS} points with one volatility each"),
        ));
    }
    if deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
        return Err(Error::invalid("smile", "forward deltas must lie in (0, 1)"));
    }
    if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::invalid("smile", "volatilities must be finite and non-negative"));
    }
    let var: Vec<f64> = sigmas.iter().map(|s| s * s).collect();
    let spline = NaturalCubicSpline::new(deltas, &var)?;
    let n = deltas.len();
    Ok(t * (var[0] * deltas[0] + spline.integral() + var[n - 1] * (1.0 - deltas[n - 1])))
}

/// [`extract_forward_variance`] on a forward-delta slice.
pub fn integrated_forward_variance(slice: &DeltaSlice) -> Result<f64> {
    extract_forward_variance(slice.maturity, &slice.deltas(), &slice.sigmas())
}

/// Piecewise-constant `ξ₀` matching integrated variances at increasing
/// maturities.
pub fn bootstrap_forward_variance(maturities: &[f64], integrated: &[f64]) -> Result<ForwardVariance> {
    if maturities.is_empty() || maturities.len() != integrated.len() {
        return Err(Error::invalid(
            "maturities",
            "need one integrated variance per maturity",
        ));
    }
    let mut breaks = Vec::with_capacity(maturities.len());
    let mut values = Vec::with_capacity(maturities.len());
    let (mut t0, mut i0) = (0.0, 0.0);
    for (&t, &iv) in maturities.iter().zip(integrated) {
        if !(t > t0) {
            return Err(Error::invalid("maturities", "must be positive and strictly increasing"));
        }
        let xi = (iv - i0) / (t - t0);
        if !(xi > 0.0 && xi.is_finite()) {
            return Err(Error::Numerical(format!(
                "integrated variance decreases between t = {t0} and t = {t}"
            )));
        }
        breaks.push(t0);
        values.push(xi);
        t0 = t;
        i0 = iv;
    }
    ForwardVariance::piecewise(breaks, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spline_interpolates_and_reproduces_lines() {
        let x = [0.0, 0.3, 0.5, 0.9, 1.4];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 3.0 * v).collect();
        let s = NaturalCubicSpline::new(&x, &y).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((s.eval(*xi) - yi).abs() < 1e-14);
        }
        assert!((s.eval(0.7) - (2.0 - 2.1)).abs() < 1e-14);
        assert!((s.integral() - (2.0 * 1.4 - 1.5 * 1.4 * 1.4)).abs() < 1e-14);
    }

    #[test]
    fn spline_integral_matches_quadrature() {
        let x = [0.05, 0.2, 0.35, 0.6, 0.8, 0.95];
        let y = [0.09, 0.06, 0.05, 0.048, 0.052, 0.07];
        let s = NaturalCubicSpline::new(&x, &y).unwrap();
        // composite Simpson on a fine grid
        let n = 20_000;
        let h = (x[5] - x[0]) / n as f64;
        let mut acc = s.eval(x[0]) + s.eval(x[5]);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * s.eval(x[0] + i as f64 * h);
        }
        let simpson = acc * h / 3.0;
        assert!((s.integral() - simpson).abs() < 1e-12);
    }

    #[test]
    fn flat_smile_is_exact() {
        let d = [0.1, 0.3, 0.5, 0.7, 0.9];
        let v = extract_forward_variance(0.25, &d, &[0.235; 5]).unwrap();
        assert!((v - 0.235 * 0.235 * 0.25).abs() < 1e-17);
    }

    #[test]
    fn too_few_points_are_rejected() {
        assert!(extract_forward_variance(1.0, &[0.2, 0.4, 0.6, 0.8], &[0.2; 4]).is_err());
        assert!(extract_forward_variance(1.0, &[0.0, 0.2, 0.4, 0.6, 0.8], &[0.2; 5]).is_err());
    }

    #[test]
    fn bootstrap_recovers_piecewise_curve() {
        let xi = ForwardVariance::piecewise(vec![0.0, 0.25, 0.5], vec![0.04, 0.05, 0.07]).unwrap();
        let ts = [0.25, 0.5, 1.0];
        let iv: Vec<f64> = ts.iter().map(|&t| xi.integral(t)).collect();
        let back = bootstrap_forward_variance(&ts, &iv).unwrap();
        for (a, b) in back.values().iter().zip(xi.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(bootstrap_forward_variance(&ts, &[0.01, 0.005, 0.02]).is_err());
    }

    proptest! {
        #[test]
        fn scaling_vols_scales_variance_quadratically(c in 0.1f64..5.0) {
            let d = [0.05, 0.2, 0.4, 0.55, 0.7, 0.93];
            let s = [0.3, 0.25, 0.22, 0.21, 0.215, 0.24];
            let base = extract_forward_variance(0.5, &d, &s).unwrap();
            let scaled: Vec<f64> = s.iter().map(|v| c * v).collect();
            let out = extract_forward_variance(0.5, &d, &scaled).unwrap();
            prop_assert!((out - c * c * base).abs() <= 1e-13 * out.abs().max(1.0));
        }
    }
}
