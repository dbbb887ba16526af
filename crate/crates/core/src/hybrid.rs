//! First-order hybrid scheme for the Riemann-Liouville process
//! `W^α_t = √(2α+1) ∫₀ᵗ (t-u)^α dW¹_u`.
//!
//! The most recent grid interval of the kernel integral is sampled exactly,
//! jointly Gaussian with the Brownian increment. Older intervals use the power
//! kernel evaluated at the optimal abscissae `b_k`, which turns the history
//! into a discrete convolution of the increments; that convolution is done
//! with an FFT, two real paths packed into one complex transform.

use std::sync::Arc;

use ndarray::{s, Array2, ArrayViewMut1};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::rng::{substream, DOMAIN_VOLTERRA};
use crate::{Error, Result};

/// Rows simulated per RNG substream. The batch partition depends only on the
/// path count, never on the number of worker threads.
pub const BATCH_ROWS: usize = 512;

/// Upper bound on `f64` cells held by [`HybridScheme::simulate`] (2 GiB).
const MAX_MATERIALIZED_CELLS: usize = 1 << 28;

/// Uniform time grid `t_i = i·dt`, `dt = maturity / n_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    n_steps: usize,
    maturity: f64,
}

impl TimeGrid {
    pub fn new(n_steps: usize, maturity: f64) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::invalid("n_steps", "must be at least 1"));
        }
        if !(maturity > 0.0 && maturity.is_finite()) {
            return Err(Error::invalid("maturity", format!("must be positive, got {maturity}")));
        }
        Ok(Self { n_steps, maturity })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn dt(&self) -> f64 {
        self.maturity / self.n_steps as f64
    }

    /// Grid time `t_i`; the last point is exactly the maturity.
    pub fn time(&self, i: usize) -> f64 {
        if i == self.n_steps {
            self.maturity
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.time(i)).collect()
    }
}

/// Kernel exponent `α ∈ (-1/2, 0]`; `α = 0` is plain Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Roughness(f64);

impl Roughness {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > -0.5 && alpha <= 0.0) {
            return Err(Error::invalid("alpha", format!("must lie in (-0.5, 0], got {alpha}")));
        }
        Ok(Self(alpha))
    }

    pub fn alpha(&self) -> f64 {
        self.0
    }

    /// Marginal variance `t^{2α+1}` of `W^α_t`.
    pub fn marginal_variance(&self, t: f64) -> f64 {
        t.powf(2.0 * self.0 + 1.0)
    }
}

/// Simulated Volterra skeletons.
///
/// With `antithetic` set, row `2j+1` is the exact negation of row `2j` in
/// every matrix.
#[derive(Debug, Clone)]
pub struct VolterraPaths {
    /// Brownian increments of `W¹`, `[paths × n_steps]`.
    pub dw1: Array2<f64>,
    /// Exact kernel integrals `∫_{t_j}^{t_{j+1}} (t_{j+1}-s)^α dW¹_s`, `[paths × n_steps]`.
    pub kernel_integrals: Array2<f64>,
    /// `W̃^α` at the grid times, `[paths × (n_steps + 1)]`, first column zero.
    pub walpha: Array2<f64>,
    pub antithetic: bool,
}

impl VolterraPaths {
    pub fn n_paths(&self) -> usize {
        self.walpha.nrows()
    }

    pub fn n_steps(&self) -> usize {
        self.dw1.ncols()
    }

    fn concat(parts: Vec<VolterraPaths>, antithetic: bool, n_steps: usize) -> VolterraPaths {
        let rows: usize = parts.iter().map(|p| p.n_paths()).sum();
        let mut dw1 = Array2::zeros((rows, n_steps));
        let mut kernel_integrals = Array2::zeros((rows, n_steps));
        let mut walpha = Array2::zeros((rows, n_steps + 1));
        let mut at = 0;
        for p in parts {
            let r = p.n_paths();
            dw1.slice_mut(s![at..at + r, ..]).assign(&p.dw1);
            kernel_integrals
                .slice_mut(s![at..at + r, ..])
                .assign(&p.kernel_integrals);
            walpha.slice_mut(s![at..at + r, ..]).assign(&p.walpha);
            at += r;
        }
        VolterraPaths {
            dw1,
            kernel_integrals,
            walpha,
            antithetic,
        }
    }
}

/// Optimal discretisation points `b_k = ((k^{α+1} - (k-1)^{α+1}) / (α+1))^{1/α}`
/// for `k = 2..=count`.
pub fn bstar_weights(alpha: f64, count: usize) -> Result<Vec<f64>> {
    if alpha == 0.0 {
        return Err(Error::invalid(
            "alpha",
            "b_k is singular at alpha = 0; use the Brownian branch",
        ));
    }
    if !(alpha > -0.5 && alpha < 0.0) {
        return Err(Error::invalid("alpha", format!("must lie in (-0.5, 0), got {alpha}")));
    }
    if count < 2 {
        return Err(Error::invalid("count", "must be at least 2"));
    }
    let a1 = alpha + 1.0;
    Ok((2..=count)
        .map(|k| {
            let k = k as f64;
            ((k.powf(a1) - (k - 1.0).powf(a1)) / a1).powf(1.0 / alpha)
        })
        .collect())
}

/// Covariance of `(ΔW¹, ∫_0^{dt} (dt-s)^α dW¹_s)` over one grid step.
pub fn kernel_pair_covariance(alpha: f64, dt: f64) -> Result<[[f64; 2]; 2]> {
    if !(alpha > -0.5 && alpha < 0.0) {
        return Err(Error::invalid("alpha", format!("must lie in (-0.5, 0), got {alpha}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
    }
    let c12 = dt.powf(alpha + 1.0) / (alpha + 1.0);
    let c22 = dt.powf(2.0 * alpha + 1.0) / (2.0 * alpha + 1.0);
    Ok([[dt, c12], [c12, c22]])
}

/// Naive `O(n²)` truncated convolution, the oracle for the FFT path.
///
/// `weights` is indexed by lag; the output has `dw1.len() + 1` entries with
/// `out[i] = Σ_{lag ≤ i, i-lag < n} weights[lag] · dw1[i - lag]`.
pub fn direct_convolution_reference(dw1: &[f64], weights: &[f64]) -> Vec<f64> {
    let n = dw1.len();
    (0..=n)
        .map(|i| {
            let mut acc = 0.0;
            for (lag, w) in weights.iter().enumerate().take(i + 1) {
                if i - lag < n {
                    acc += w * dw1[i - lag];
                }
            }
            acc
        })
        .collect()
}

#[derive(Clone)]
struct FftKernel {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Transform of the lag weights, pre-scaled by `1/len`.
    weights_hat: Vec<Complex<f64>>,
}

impl std::fmt::Debug for FftKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftKernel").field("len", &self.len).finish()
    }
}

#[derive(Debug, Clone)]
enum Kernel {
    Brownian,
    Rough {
        scale: f64,
        /// Lag weights `[0, 0, (b_2 dt)^α, ..., (b_n dt)^α]`.
        lag_weights: Vec<f64>,
        fft: FftKernel,
        /// Cholesky factors of the step covariance.
        l11: f64,
        l21: f64,
        l22: f64,
    },
}

/// Smallest `2^a 3^b 5^c` not below `n`.
fn fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r.is_multiple_of(p) {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Precomputed hybrid-scheme state for one `(α, grid)` pair.
#[derive(Debug, Clone)]
pub struct HybridScheme {
    roughness: Roughness,
    grid: TimeGrid,
    kernel: Kernel,
}

impl HybridScheme {
    pub fn new(roughness: Roughness, grid: TimeGrid) -> Result<Self> {
        let alpha = roughness.alpha();
        let n = grid.n_steps();
        let dt = grid.dt();
        let kernel = if alpha == 0.0 {
            Kernel::Brownian
        } else {
            let mut lag_weights = vec![0.0; n + 1];
            if n >= 2 {
                for (k, b) in (2..=n).zip(bstar_weights(alpha, n)?) {
                    lag_weights[k] = (b * dt).powf(alpha);
                }
            }
            let len = fast_len(2 * n);
            let mut planner = FftPlanner::new();
            let forward = planner.plan_fft_forward(len);
            let inverse = planner.plan_fft_inverse(len);
            let mut weights_hat: Vec<Complex<f64>> = (0..len)
                .map(|i| Complex::new(lag_weights.get(i).copied().unwrap_or(0.0), 0.0))
                .collect();
            forward.process(&mut weights_hat);
            let norm = 1.0 / len as f64;
            weights_hat.iter_mut().for_each(|z| *z *= norm);

            let cov = kernel_pair_covariance(alpha, dt)?;
            let l11 = cov[0][0].sqrt();
            let l21 = cov[0][1] / l11;
            let l22 = (cov[1][1] - l21 * l21).sqrt();
            Kernel::Rough {
                scale: (2.0 * alpha + 1.0).sqrt(),
                lag_weights,
                fft: FftKernel {
                    len,
                    forward,
                    inverse,
                    weights_hat,
                },
                l11,
                l21,
                l22,
            }
        };
        Ok(Self {
            roughness,
            grid,
            kernel,
        })
    }

    pub fn roughness(&self) -> Roughness {
        self.roughness
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// Lag weights of the history convolution (empty in the Brownian case).
    pub fn lag_weights(&self) -> &[f64] {
        match &self.kernel {
            Kernel::Brownian => &[],
            Kernel::Rough { lag_weights, .. } => lag_weights,
        }
    }

    /// `(batch index, rows)` for a run of `n_paths` rows.
    pub fn batch_layout(n_paths: usize) -> Vec<(u64, usize)> {
        (0..n_paths.div_ceil(BATCH_ROWS))
            .map(|b| (b as u64, BATCH_ROWS.min(n_paths - b * BATCH_ROWS)))
            .collect()
    }

    pub(crate) fn check_paths(n_paths: usize, antithetic: bool) -> Result<()> {
        if n_paths == 0 {
            return Err(Error::invalid("n_paths", "must be positive"));
        }
        if antithetic && !n_paths.is_multiple_of(2) {
            return Err(Error::invalid("n_paths", "must be even for antithetic pairs"));
        }
        Ok(())
    }

    /// Simulates `n_paths` rows, batch-parallel, and keeps every matrix in
    /// memory. Large runs should stream batches instead (see
    /// [`crate::engine::Simulation`]).
    pub fn simulate(&self, n_paths: usize, seed: u64, antithetic: bool) -> Result<VolterraPaths> {
        Self::check_paths(n_paths, antithetic)?;
        let cells = n_paths
            .checked_mul(3 * self.grid.n_steps() + 1)
            .filter(|&c| c <= MAX_MATERIALIZED_CELLS)
            .ok_or_else(|| {
                Error::invalid(
                    "n_paths",
                    format!(
                        "{n_paths} paths x {} steps exceeds the in-memory limit",
                        self.grid.n_steps()
                    ),
                )
            })?;
        debug_assert!(cells > 0);
        let parts: Vec<VolterraPaths> = Self::batch_layout(n_paths)
            .into_par_iter()
            .map(|(index, rows)| self.simulate_batch(index, rows, seed, antithetic))
            .collect();
        Ok(VolterraPaths::concat(parts, antithetic, self.grid.n_steps()))
    }

    /// Simulates one batch from its own substream.
    pub fn simulate_batch(&self, index: u64, rows: usize, seed: u64, antithetic: bool) -> VolterraPaths {
        assert!(
            !antithetic || rows.is_multiple_of(2),
            "antithetic batches need an even row count"
        );
        let n = self.grid.n_steps();
        let mut rng = substream(seed, DOMAIN_VOLTERRA, index);
        let mut dw1 = Array2::<f64>::zeros((rows, n));
        let mut integrals = Array2::<f64>::zeros((rows, n));
        let mut walpha = Array2::<f64>::zeros((rows, n + 1));

        let stride = if antithetic { 2 } else { 1 };
        let base_rows: Vec<usize> = (0..rows).step_by(stride).collect();

        match &self.kernel {
            Kernel::Brownian => {
                let sd = self.grid.dt().sqrt();
                for &r in &base_rows {
                    let mut acc = 0.0;
                    for j in 0..n {
                        let z: f64 = rng.sample(StandardNormal);
                        let dw = sd * z;
                        dw1[[r, j]] = dw;
                        integrals[[r, j]] = dw;
                        acc += dw;
                        walpha[[r, j + 1]] = acc;
                    }
                }
            }
            Kernel::Rough {
                scale,
                fft,
                l11,
                l21,
                l22,
                ..
            } => {
                for &r in &base_rows {
                    for j in 0..n {
                        let z1: f64 = rng.sample(StandardNormal);
                        let z2: f64 = rng.sample(StandardNormal);
                        dw1[[r, j]] = l11 * z1;
                        integrals[[r, j]] = l21 * z1 + l22 * z2;
                    }
                }
                let mut buf = vec![Complex::new(0.0, 0.0); fft.len];
                let mut scratch = vec![
                    Complex::new(0.0, 0.0);
                    fft.forward
                        .get_inplace_scratch_len()
                        .max(fft.inverse.get_inplace_scratch_len())
                ];
                for pair in base_rows.chunks(2) {
                    let a = pair[0];
                    let b = pair.get(1).copied();
                    for (j, z) in buf.iter_mut().enumerate() {
                        *z = if j < n {
                            Complex::new(dw1[[a, j]], b.map_or(0.0, |b| dw1[[b, j]]))
                        } else {
                            Complex::new(0.0, 0.0)
                        };
                    }
                    fft.forward.process_with_scratch(&mut buf, &mut scratch);
                    for (z, w) in buf.iter_mut().zip(&fft.weights_hat) {
                        *z *= w;
                    }
                    fft.inverse.process_with_scratch(&mut buf, &mut scratch);
                    for i in 1..=n {
                        walpha[[a, i]] = scale * (integrals[[a, i - 1]] + buf[i].re);
                        if let Some(b) = b {
                            walpha[[b, i]] = scale * (integrals[[b, i - 1]] + buf[i].im);
                        }
                    }
                }
            }
        }

        if antithetic {
            for r in (0..rows).step_by(2) {
                negate_into(&mut dw1, r);
                negate_into(&mut integrals, r);
                negate_into(&mut walpha, r);
            }
        }

        VolterraPaths {
            dw1,
            kernel_integrals: integrals,
            walpha,
            antithetic,
        }
    }

    /// Assembles `W̃^α` from increments and exact integrals with the direct
    /// `O(n²)` sum. Shares nothing with the FFT path except the lag weights.
    pub fn assemble_direct(&self, dw1: &[f64], kernel_integrals: &[f64]) -> Vec<f64> {
        match &self.kernel {
            Kernel::Brownian => {
                let mut out = vec![0.0; dw1.len() + 1];
                let mut acc = 0.0;
                for (j, dw) in dw1.iter().enumerate() {
                    acc += dw;
                    out[j + 1] = acc;
                }
                out
            }
            Kernel::Rough { scale, lag_weights, .. } => {
                let conv = direct_convolution_reference(dw1, lag_weights);
                let mut out = vec![0.0; dw1.len() + 1];
                for i in 1..=dw1.len() {
                    out[i] = scale * (kernel_integrals[i - 1] + conv[i]);
                }
                out
            }
        }
    }
}

fn negate_into(m: &mut Array2<f64>, base: usize) {
    let (src, mut dst) = m.multi_slice_mut((s![base, ..], s![base + 1, ..]));
    let src: ArrayViewMut1<f64> = src;
    dst.zip_mut_with(&src, |d, &v| *d = -v);
}

/// Antithetic Volterra skeletons, the standard entry point.
pub fn simulate_volterra(roughness: Roughness, grid: TimeGrid, n_paths: usize, seed: u64) -> Result<VolterraPaths> {
    HybridScheme::new(roughness, grid)?.simulate(n_paths, seed, true)
}
