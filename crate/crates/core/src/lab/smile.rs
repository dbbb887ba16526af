//! Implied-volatility smiles on a spot-delta strike grid, and their
//! forward-delta representation.

use crate::black_scholes::{forward_delta, logstrike_from_spot_delta, OptionSpec};
use crate::engine::{ModelParams, PathFunctionals, Simulation};
use crate::estimators::{invert_estimate, EstimateStatus, EstimatorKind, EstimatorSample, ImpliedVolEstimate};
use crate::hybrid::TimeGrid;
use crate::lab::benchmark::sample_std;
use crate::rng::{derive_seed, DOMAIN_SMILE};
use crate::{Error, Result};

/// One day to one year.
pub const DEFAULT_MATURITIES: [f64; 8] = [
    1.0 / 365.0,
    1.0 / 52.0,
    2.0 / 52.0,
    1.0 / 12.0,
    2.0 / 12.0,
    0.25,
    0.5,
    1.0,
];

/// Put deltas `0.05, 0.10, ..., 0.95`.
pub fn default_deltas() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmileConfig {
    pub maturities: Vec<f64>,
    pub deltas: Vec<f64>,
    pub n_paths: usize,
    pub n_steps: usize,
    pub kind: EstimatorKind,
    pub seed: u64,
    /// Batches used for the standard errors.
    pub n_batches: usize,
}

impl Default for SmileConfig {
    fn default() -> Self {
        Self {
            maturities: DEFAULT_MATURITIES.to_vec(),
            deltas: default_deltas(),
            n_paths: 400_000,
            n_steps: 312,
            kind: EstimatorKind::Mixed,
            seed: 1,
            n_batches: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointStatus {
    Ok,
    /// The estimator flagged the price at this strike.
    Estimate(EstimateStatus),
    /// No strike matched the delta on the provisional smile.
    StrikeFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmilePoint {
    pub delta_put: f64,
    /// NaN when the strike solve failed.
    pub k: f64,
    pub sigma: Option<f64>,
    pub std_err: f64,
    pub status: PointStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmileSlice {
    pub maturity: f64,
    pub points: Vec<SmilePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmileSurface {
    pub slices: Vec<SmileSlice>,
}

impl SmileSurface {
    pub fn points(&self) -> impl Iterator<Item = (f64, &SmilePoint)> {
        self.slices
            .iter()
            .flat_map(|s| s.points.iter().map(move |p| (s.maturity, p)))
    }
}

/// Piecewise-linear smile in `k`, flat beyond the end points.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSmile {
    ks: Vec<f64>,
    sigmas: Vec<f64>,
}

impl LinearSmile {
    /// Sorts the nodes by strike; needs at least one node.
    pub fn new(mut nodes: Vec<(f64, f64)>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Numerical("no usable points for a provisional smile".into()));
        }
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        nodes.dedup_by(|a, b| a.0 == b.0);
        let (ks, sigmas) = nodes.into_iter().unzip();
        Ok(Self { ks, sigmas })
    }

    pub fn eval(&self, k: f64) -> f64 {
        let n = self.ks.len();
        if k <= self.ks[0] {
            return self.sigmas[0];
        }
        if k >= self.ks[n - 1] {
            return self.sigmas[n - 1];
        }
        let i = self.ks.partition_point(|&x| x <= k);
        let (k0, k1) = (self.ks[i - 1], self.ks[i]);
        let w = (k - k0) / (k1 - k0);
        self.sigmas[i - 1] * (1.0 - w) + self.sigmas[i] * w
    }
}

/// Estimate at `spec` plus a batch-means standard error of `σ̂`.
pub fn estimate_with_std_err(
    kind: EstimatorKind,
    pf: &PathFunctionals,
    spec: &OptionSpec,
    rho: f64,
    n_batches: usize,
) -> Result<(ImpliedVolEstimate, f64)> {
    let est = invert_estimate(&EstimatorSample::assemble(kind, pf, spec, rho)?, spec);
    let unit = if pf.antithetic { 2 } else { 1 };
    let per_batch = (pf.len() / unit / n_batches.max(1)) * unit;
    if n_batches < 2 || per_batch < 2 {
        return Ok((est, f64::NAN));
    }
    let mut sigmas = Vec::with_capacity(n_batches);
    for b in 0..n_batches {
        let part = pf.slice(b * per_batch..(b + 1) * per_batch);
        let e = invert_estimate(&EstimatorSample::assemble(kind, &part, spec, rho)?, spec);
        if let (false, Some(s)) = (e.is_flagged(), e.sigma) {
            sigmas.push(s);
        }
    }
    let se = sample_std(&sigmas) / (sigmas.len() as f64).sqrt();
    Ok((est, se))
}

/// One maturity of a smile, two passes on the same paths: flat-volatility
/// strikes give a provisional smile, whose delta strikes are then priced.
pub fn smile_slice(
    sim: &Simulation,
    kind: EstimatorKind,
    deltas: &[f64],
    n_paths: usize,
    seed: u64,
    n_batches: usize,
) -> Result<SmileSlice> {
    let t = sim.grid().maturity();
    let rho = sim.params().rho;
    let pf = sim.functionals(kind.path_requirements(), n_paths, seed)?;

    let flat = (sim.params().xi0.integral(t) / t).sqrt();
    let mut nodes = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let Ok(k) = logstrike_from_spot_delta(d, &|_| flat, t) else {
            continue;
        };
        let spec = OptionSpec::new(k, t)?;
        let est = invert_estimate(&EstimatorSample::assemble(kind, &pf, &spec, rho)?, &spec);
        if let (false, Some(s)) = (est.is_flagged(), est.sigma) {
            if s > 0.0 {
                nodes.push((k, s));
            }
        }
    }
    let provisional = LinearSmile::new(nodes)?;

    let mut points = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let point = match logstrike_from_spot_delta(d, &|k| provisional.eval(k), t) {
            Err(_) => SmilePoint {
                delta_put: d,
                k: f64::NAN,
                sigma: None,
                std_err: f64::NAN,
                status: PointStatus::StrikeFailed,
            },
            Ok(k) => {
                let spec = OptionSpec::new(k, t)?;
                let (est, std_err) = estimate_with_std_err(kind, &pf, &spec, rho, n_batches)?;
                SmilePoint {
                    delta_put: d,
                    k,
                    sigma: est.sigma,
                    std_err,
                    status: if est.is_flagged() {
                        PointStatus::Estimate(est.status)
                    } else {
                        PointStatus::Ok
                    },
                }
            }
        };
        points.push(point);
    }
    Ok(SmileSlice { maturity: t, points })
}

/// Smiles across maturities, each on its own grid of `n_steps` steps and
/// with seed `derive_seed(seed, SMILE, i)` for maturity `i`.
pub fn generate_smile(params: &ModelParams, cfg: &SmileConfig) -> Result<SmileSurface> {
    if cfg.deltas.is_empty() {
        return Err(Error::invalid("deltas", "need at least one delta"));
    }
    if cfg.deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) || cfg.deltas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("deltas", "must be strictly increasing inside (0, 1)"));
    }
    let mut slices = Vec::with_capacity(cfg.maturities.len());
    for (i, &t) in cfg.maturities.iter().enumerate() {
        let sim = Simulation::new(params, TimeGrid::new(cfg.n_steps, t)?)?;
        let seed = derive_seed(cfg.seed, DOMAIN_SMILE, i as u64);
        slices.push(smile_slice(
            &sim,
            cfg.kind,
            &cfg.deltas,
            cfg.n_paths,
            seed,
            cfg.n_batches,
        )?);
    }
    Ok(SmileSurface { slices })
}

/// A smile point keyed by forward delta `Δ = N(-d₋)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaPoint {
    pub delta: f64,
    pub k: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSlice {
    pub maturity: f64,
    /// Increasing in `k`.
    pub points: Vec<DeltaPoint>,
}

impl DeltaSlice {
    /// Builds a slice from `(k, σ)` pairs at maturity `t`.
    pub fn from_strikes(t: f64, strikes: &[(f64, f64)]) -> Self {
        let mut points: Vec<DeltaPoint> = strikes
            .iter()
            .map(|&(k, sigma)| DeltaPoint {
                delta: forward_delta(k, sigma, t),
                k,
                sigma,
            })
            .collect();
        points.sort_by(|a, b| a.k.total_cmp(&b.k));
        Self { maturity: t, points }
    }

    pub fn is_monotone(&self) -> bool {
        self.points.windows(2).all(|w| w[1].delta > w[0].delta)
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta).collect()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.sigma).collect()
    }
}

/// Re-keys every usable point by forward delta; flagged and failed points
/// are dropped.
pub fn to_delta_space(surface: &SmileSurface) -> Vec<DeltaSlice> {
    surface
        .slices
        .iter()
        .map(|s| {
            let pairs: Vec<(f64, f64)> = s
                .points
                .iter()
                .filter(|p| p.status == PointStatus::Ok)
                .filter_map(|p| p.sigma.filter(|&v| v > 0.0).map(|v| (p.k, v)))
                .collect();
            DeltaSlice::from_strikes(s.maturity, &pairs)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::black_scholes::logstrike_from_forward_delta;
    use crate::engine::ForwardVariance;

    #[test]
    fn default_grids() {
        let d = default_deltas();
        assert_eq!(d.len(), 19);
        assert_eq!(d[0], 0.05);
        assert_eq!(d[9], 0.5);
        assert!(d.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(DEFAULT_MATURITIES[5], 0.25);
    }

    #[test]
    fn linear_smile_interpolates_and_extrapolates_flat() {
        let s = LinearSmile::new(vec![(0.1, 0.2), (-0.1, 0.3), (0.0, 0.25)]).unwrap();
        assert_eq!(s.eval(-1.0), 0.3);
        assert_eq!(s.eval(1.0), 0.2);
        assert!((s.eval(0.05) - 0.225).abs() < 1e-15);
        assert!(LinearSmile::new(vec![]).is_err());
    }

    #[test]
    fn flat_smile_delta_space() {
        let t = 0.25;
        let sigma = 0.2;
        let ks: Vec<(f64, f64)> = (-10..=10).map(|i| (i as f64 * 0.03, sigma)).collect();
        let slice = DeltaSlice::from_strikes(t, &ks);
        assert!(slice.is_monotone());
        let atm = -sigma * sigma * t / 2.0;
        assert!((forward_delta(atm, sigma, t) - 0.5).abs() < 1e-15);
        for p in &slice.points {
            let back = logstrike_from_forward_delta(p.delta, &|_| sigma, t).unwrap();
            assert!((back - p.k).abs() < 1e-10, "{} vs {}", back, p.k);
        }
    }

    #[test]
    fn brownian_zero_correlation_smile_is_flat() {
        let m = ModelParams::new(ForwardVariance::flat(0.055225), 1e-10, 0.0, 0.0).unwrap();
        let cfg = SmileConfig {
            maturities: vec![1.0 / 52.0, 0.25, 1.0],
            deltas: vec![0.1, 0.5, 0.9],
            n_paths: 64,
            n_steps: 16,
            ..SmileConfig::default()
        };
        let surface = generate_smile(&m, &cfg).unwrap();
        for (_, p) in surface.points() {
            assert_eq!(p.status, PointStatus::Ok);
            assert!((p.sigma.unwrap() - 0.235).abs() < 1e-6, "{:?}", p);
        }
        for s in to_delta_space(&surface) {
            assert_eq!(s.points.len(), 3);
            assert!(s.is_monotone());
        }
    }

    #[test]
    fn bad_delta_grid_is_rejected() {
        let m = ModelParams::new(ForwardVariance::flat(0.04), 1.0, 0.0, -0.4).unwrap();
        let cfg = SmileConfig {
            deltas: vec![0.5, 0.2],
            ..SmileConfig::default()
        };
        assert!(generate_smile(&m, &cfg).is_err());
    }
}
