//! rBergomi variance and price functionals on top of Volterra skeletons.
//!
//! `V_t = ξ₀(t) exp(η W^α_t - η²/2 t^{2α+1})`, and the price is the stochastic
//! exponential of `∫√V d(ρW¹ + √(1-ρ²)W²)`. Prices are discretised with a
//! left-point log-Euler step and the integrated variance with left-endpoint
//! rectangles, so that `log S_t` given `W¹` is exactly Gaussian with variance
//! `(1-ρ²)·iv` in the discrete model as well.

use ndarray::{s, Array2, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::hybrid::{HybridScheme, Roughness, TimeGrid, VolterraPaths, BATCH_ROWS};
use crate::rng::{substream, DOMAIN_ORTHOGONAL};
use crate::{Error, Result};

/// Piecewise-constant forward variance curve `ξ₀(t)`.
///
/// `values[i]` applies on `[breaks[i], breaks[i+1])`, the last value
/// extending to infinity. `breaks[0]` is always `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardVariance {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl ForwardVariance {
    pub fn flat(xi: f64) -> Self {
        Self {
            breaks: vec![0.0],
            values: vec![xi],
        }
    }

    pub fn piecewise(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breaks.is_empty() || breaks.len() != values.len() {
            return Err(Error::invalid(
                "xi0",
                "need one value per breakpoint and at least one breakpoint",
            ));
        }
        if breaks[0] != 0.0 {
            return Err(Error::invalid("xi0", "first breakpoint must be 0"));
        }
        if breaks.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("xi0", "breakpoints must be strictly increasing"));
        }
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("xi0", "forward variances must be positive"));
        }
        Ok(Self { breaks, values })
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, t: f64) -> f64 {
        let i = self.breaks.partition_point(|&b| b <= t);
        self.values[i.saturating_sub(1)]
    }

    /// `∫₀ᵗ ξ₀(u) du`.
    pub fn integral(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (i, &v) in self.values.iter().enumerate() {
            let lo = self.breaks[i];
            if lo >= t {
                break;
            }
            let hi = self.breaks.get(i + 1).copied().unwrap_or(f64::INFINITY).min(t);
            acc += v * (hi - lo);
        }
        acc
    }
}

/// rBergomi parameters `(ξ₀, η, ρ, α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub xi0: ForwardVariance,
    pub eta: f64,
    pub rho: f64,
    pub roughness: Roughness,
}

impl ModelParams {
    pub fn new(xi0: ForwardVariance, eta: f64, rho: f64, alpha: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::invalid("eta", format!("must be positive, got {eta}")));
        }
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::invalid("rho", format!("must lie in [-1, 1], got {rho}")));
        }
        Ok(Self {
            xi0,
            eta,
            rho,
            roughness: Roughness::new(alpha)?,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.roughness.alpha()
    }

    /// Same model with `(ρ, η)` replaced.
    pub fn with_rho_eta(&self, rho: f64, eta: f64) -> Result<Self> {
        Self::new(self.xi0.clone(), eta, rho, self.alpha())
    }
}

/// Terminal per-path quantities consumed by the estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFunctionals {
    /// Full price `S_t`; absent when the run did not draw `W²`.
    pub s_t: Option<Vec<f64>>,
    /// Parallel component `S¹_t = E(ρ∫√V dW¹)_t`.
    pub s1_t: Vec<f64>,
    /// Integrated variance `∫₀ᵗ V_u du`.
    pub iv: Vec<f64>,
    pub antithetic: bool,
    pub maturity: f64,
}

impl PathFunctionals {
    pub fn len(&self) -> usize {
        self.iv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iv.is_empty()
    }

    pub fn full_price(&self) -> Result<&[f64]> {
        self.s_t
            .as_deref()
            .ok_or_else(|| Error::Shape("estimator needs S_t but the paths were simulated without W²".into()))
    }

    /// Rows `range`, keeping antithetic pairs intact when the bounds are even.
    pub fn slice(&self, range: std::ops::Range<usize>) -> PathFunctionals {
        PathFunctionals {
            s_t: self.s_t.as_ref().map(|s| s[range.clone()].to_vec()),
            s1_t: self.s1_t[range.clone()].to_vec(),
            iv: self.iv[range].to_vec(),
            antithetic: self.antithetic,
            maturity: self.maturity,
        }
    }

    fn concat(parts: Vec<PathFunctionals>, maturity: f64, antithetic: bool, full: bool) -> Self {
        let mut out = PathFunctionals {
            s_t: full.then(Vec::new),
            s1_t: Vec::new(),
            iv: Vec::new(),
            antithetic,
            maturity,
        };
        for p in parts {
            if let (Some(dst), Some(src)) = (out.s_t.as_mut(), p.s_t) {
                dst.extend(src);
            }
            out.s1_t.extend(p.s1_t);
            out.iv.extend(p.iv);
        }
        out
    }
}

/// What a simulation must produce for a given estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathRequirements {
    pub antithetic: bool,
    /// Draw `W²` and accumulate the full price `S_t`.
    pub full_price: bool,
}

/// `V[i, j] = ξ₀(t_j) exp(η W̃[i, j] - η²/2 t_j^{2α+1})`.
pub fn variance_paths(vp: &VolterraPaths, params: &ModelParams, grid: &TimeGrid) -> Result<Array2<f64>> {
    variance_from_walpha(vp.walpha.view(), params, grid)
}

fn variance_from_walpha(walpha: ArrayView2<f64>, params: &ModelParams, grid: &TimeGrid) -> Result<Array2<f64>> {
    let n = grid.n_steps();
    if walpha.ncols() != n + 1 {
        return Err(Error::Shape(format!(
            "walpha has {} columns, grid needs {}",
            walpha.ncols(),
            n + 1
        )));
    }
    let eta = params.eta;
    let level: Vec<f64> = grid.times().iter().map(|&t| params.xi0.value(t)).collect();
    let comp: Vec<f64> = grid
        .times()
        .iter()
        .map(|&t| 0.5 * eta * eta * params.roughness.marginal_variance(t))
        .collect();
    let mut v = Array2::zeros(walpha.raw_dim());
    for (mut out, w) in v.rows_mut().into_iter().zip(walpha.rows()) {
        for j in 0..=n {
            out[j] = level[j] * (eta * w[j] - comp[j]).exp();
        }
    }
    if v.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(Error::NonFinite("variance process (overflow in exp)".into()));
    }
    Ok(v)
}

/// Left-endpoint rule `iv_i = Σ_{j<n} V[i, j]·dt`.
pub fn integrated_variance(v: &Array2<f64>, grid: &TimeGrid) -> Vec<f64> {
    let n = grid.n_steps();
    let dt = grid.dt();
    v.rows().into_iter().map(|row| row.slice(s![..n]).sum() * dt).collect()
}

/// Terminal `S_t`, `S¹_t` and `∫V` per path by left-point log-Euler.
///
/// `w2_seed = None` skips `W²` entirely, and with it `S_t`. `W²` increments
/// come from substream `(w2_seed, chunk)` for each chunk of
/// [`BATCH_ROWS`] rows, negated on odd rows of antithetic paths.
pub fn price_functionals(
    vp: &VolterraPaths,
    v: &Array2<f64>,
    params: &ModelParams,
    grid: &TimeGrid,
    w2_seed: Option<u64>,
) -> Result<PathFunctionals> {
    price_functionals_batch(vp, v, params, grid, w2_seed, 0)
}

fn price_functionals_batch(
    vp: &VolterraPaths,
    v: &Array2<f64>,
    params: &ModelParams,
    grid: &TimeGrid,
    w2_seed: Option<u64>,
    first_chunk: u64,
) -> Result<PathFunctionals> {
    let n = grid.n_steps();
    let rows = vp.n_paths();
    if vp.n_steps() != n || v.nrows() != rows || v.ncols() != n + 1 {
        return Err(Error::Shape("paths, variance and grid disagree".into()));
    }
    let dt = grid.dt();
    let rho = params.rho;
    let rho_bar = (1.0 - rho * rho).max(0.0).sqrt();
    let full = w2_seed.is_some();

    let mut s_t = Vec::with_capacity(if full { rows } else { 0 });
    let mut s1_t = Vec::with_capacity(rows);
    let mut iv = Vec::with_capacity(rows);
    let mut dw2 = vec![0.0; n];
    let sd = dt.sqrt();
    let mut rng: Option<ChaCha8Rng> = None;

    for r in 0..rows {
        if let Some(seed) = w2_seed {
            if r % BATCH_ROWS == 0 {
                rng = Some(substream(
                    seed,
                    DOMAIN_ORTHOGONAL,
                    first_chunk + (r / BATCH_ROWS) as u64,
                ));
            }
            if vp.antithetic && r % 2 == 1 {
                dw2.iter_mut().for_each(|x| *x = -*x);
            } else {
                let g = rng.as_mut().expect("substream initialised at chunk start");
                for x in dw2.iter_mut() {
                    let z: f64 = g.sample(StandardNormal);
                    *x = sd * z;
                }
            }
        }
        let vrow = v.row(r);
        let dw1 = vp.dw1.row(r);
        let mut log_s = 0.0;
        let mut log_s1 = 0.0;
        let mut int_v = 0.0;
        for j in 0..n {
            let vj = vrow[j];
            let sv = vj.sqrt();
            log_s1 += rho * sv * dw1[j] - 0.5 * rho * rho * vj * dt;
            if full {
                log_s += sv * (rho * dw1[j] + rho_bar * dw2[j]) - 0.5 * vj * dt;
            }
            int_v += vj;
        }
        let int_v = int_v * dt;
        let s1 = log_s1.exp();
        if !(s1.is_finite() && int_v.is_finite()) || s1 <= 0.0 {
            return Err(Error::NonFinite(format!("price functionals on path {r}")));
        }
        if full {
            let s = log_s.exp();
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::NonFinite(format!("full price on path {r}")));
            }
            s_t.push(s);
        }
        s1_t.push(s1);
        iv.push(int_v);
    }

    Ok(PathFunctionals {
        s_t: full.then_some(s_t),
        s1_t,
        iv,
        antithetic: vp.antithetic,
        maturity: grid.maturity(),
    })
}

/// Streams hybrid-scheme batches straight into [`PathFunctionals`], so that
/// only three numbers per path are retained.
#[derive(Debug, Clone)]
pub struct Simulation {
    params: ModelParams,
    scheme: HybridScheme,
}

impl Simulation {
    pub fn new(params: &ModelParams, grid: TimeGrid) -> Result<Self> {
        Ok(Self {
            params: params.clone(),
            scheme: HybridScheme::new(params.roughness, grid)?,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> TimeGrid {
        self.scheme.grid()
    }

    pub fn scheme(&self) -> &HybridScheme {
        &self.scheme
    }

    /// `W²` uses `seed` as well, under its own substream domain.
    pub fn functionals(&self, req: PathRequirements, n_paths: usize, seed: u64) -> Result<PathFunctionals> {
        self.functionals_with_w2_seed(req, n_paths, seed, seed)
    }

    pub fn functionals_with_w2_seed(
        &self,
        req: PathRequirements,
        n_paths: usize,
        seed: u64,
        w2_seed: u64,
    ) -> Result<PathFunctionals> {
        HybridScheme::check_paths(n_paths, req.antithetic)?;
        let grid = self.scheme.grid();
        let parts = HybridScheme::batch_layout(n_paths)
            .into_par_iter()
            .map(|(index, rows)| {
                let vp = self.scheme.simulate_batch(index, rows, seed, req.antithetic);
                let v = variance_paths(&vp, &self.params, &grid)?;
                price_functionals_batch(&vp, &v, &self.params, &grid, req.full_price.then_some(w2_seed), index)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PathFunctionals::concat(
            parts,
            grid.maturity(),
            req.antithetic,
            req.full_price,
        ))
    }
}

/// Functionals for fixed Volterra paths under different model parameters,
/// the common-random-numbers route used by calibration.
pub fn functionals_from_paths(
    vp: &VolterraPaths,
    params: &ModelParams,
    grid: &TimeGrid,
    w2_seed: Option<u64>,
) -> Result<PathFunctionals> {
    let v = variance_paths(vp, params, grid)?;
    price_functionals(vp, &v, params, grid, w2_seed)
}
