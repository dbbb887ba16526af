//! `(ρ, η)` calibration to a single-maturity smile by bounded Nelder-Mead
//! on a common-random-numbers objective.

use std::time::{Duration, Instant};

use crate::black_scholes::OptionSpec;
use crate::engine::{functionals_from_paths, ModelParams};
use crate::estimators::{estimate_implied_vol, EstimatorKind};
use crate::hybrid::{HybridScheme, TimeGrid, VolterraPaths};
use crate::rng::{derive_seed, DOMAIN_ORTHOGONAL};
use crate::{Error, Result};

/// `ρ ∈ [-0.99, 0.99]`, `η ∈ [1, 3]` by default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub rho: (f64, f64),
    pub eta: (f64, f64),
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            rho: (-0.99, 0.99),
            eta: (1.0, 3.0),
        }
    }
}

impl Bounds {
    fn lo(&self) -> [f64; 2] {
        [self.rho.0, self.eta.0]
    }

    fn hi(&self) -> [f64; 2] {
        [self.rho.1, self.eta.1]
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        (self.rho.0..=self.rho.1).contains(&x[0]) && (self.eta.0..=self.eta.1).contains(&x[1])
    }

    fn clamp(&self, x: [f64; 2]) -> [f64; 2] {
        let (lo, hi) = (self.lo(), self.hi());
        [x[0].clamp(lo[0], hi[0]), x[1].clamp(lo[1], hi[1])]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub bounds: Bounds,
    /// Initial simplex edge per coordinate.
    pub step: [f64; 2],
    pub max_evals: usize,
    /// Optional wall-clock cap on top of `max_evals`.
    pub budget: Option<Duration>,
    /// Stop once the simplex is this small in every coordinate...
    pub x_tol: f64,
    /// ...and its objective values are this close.
    pub f_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            bounds: Bounds::default(),
            step: [0.05, 0.05],
            max_evals: 200,
            budget: Some(Duration::from_millis(700)),
            x_tol: 1e-4,
            f_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationResult {
    pub rho_hat: f64,
    pub eta_hat: f64,
    pub rmse: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimises `f` over the box from `x0`. Trial points are clamped into the
/// box; the best point seen is returned.
pub fn nelder_mead<F: FnMut([f64; 2]) -> f64>(
    mut f: F,
    x0: [f64; 2],
    opts: &NelderMeadOptions,
) -> Result<CalibrationResult> {
    let b = opts.bounds;
    if !b.contains(x0) {
        return Err(Error::invalid(
            "initial point",
            format!("{x0:?} lies outside the bounds"),
        ));
    }
    let start = Instant::now();
    let mut evals = 0usize;
    let mut eval = |x: [f64; 2], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<([f64; 2], f64)> = Vec::with_capacity(3);
    simplex.push((x0, eval(x0, &mut evals)));
    for d in 0..2 {
        let mut x = x0;
        x[d] += opts.step[d];
        if x[d] > b.hi()[d] {
            x[d] = x0[d] - opts.step[d];
        }
        let x = b.clamp(x);
        simplex.push((x, eval(x, &mut evals)));
    }

    let mut iterations = 0;
    let mut converged = false;
    let out_of_budget = |evals: usize| evals >= opts.max_evals || opts.budget.is_some_and(|d| start.elapsed() >= d);
    while !out_of_budget(evals) {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread_f = simplex[2].1 - simplex[0].1;
        let spread_x = (0..2)
            .map(|d| {
                simplex
                    .iter()
                    .map(|p| (p.0[d] - simplex[0].0[d]).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread_x <= opts.x_tol && spread_f <= opts.f_tol || spread_x <= 1e-3 * opts.x_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (best, worst) = (simplex[0], simplex[2]);
        let centroid = [
            0.5 * (simplex[0].0[0] + simplex[1].0[0]),
            0.5 * (simplex[0].0[1] + simplex[1].0[1]),
        ];
        let along = |t: f64| {
            b.clamp([
                centroid[0] + t * (worst.0[0] - centroid[0]),
                centroid[1] + t * (worst.0[1] - centroid[1]),
            ])
        };

        let xr = along(-1.0);
        let fr = eval(xr, &mut evals);
        if fr < best.1 {
            let xe = along(-2.0);
            let fe = eval(xe, &mut evals);
            simplex[2] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[1].1 {
            simplex[2] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let x = along(-0.5);
            (x, eval(x, &mut evals))
        } else {
            let x = along(0.5);
            (x, eval(x, &mut evals))
        };
        if fc < worst.1.min(fr) {
            simplex[2] = (xc, fc);
            continue;
        }
        for p in simplex.iter_mut().skip(1) {
            let x = b.clamp([
                best.0[0] + 0.5 * (p.0[0] - best.0[0]),
                best.0[1] + 0.5 * (p.0[1] - best.0[1]),
            ]);
            *p = (x, eval(x, &mut evals));
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex[0];
    Ok(CalibrationResult {
        rho_hat: x[0],
        eta_hat: x[1],
        rmse: fx,
        iterations,
        evaluations: evals,
        converged,
    })
}

/// RMSE between simulated and target implied volatilities at one maturity,
/// with the Volterra paths (and `W²`, where used) frozen across `(ρ, η)`.
#[derive(Debug, Clone)]
pub struct SmileObjective {
    base: ModelParams,
    grid: TimeGrid,
    kind: EstimatorKind,
    paths: VolterraPaths,
    w2_seed: Option<u64>,
    specs: Vec<OptionSpec>,
    targets: Vec<f64>,
}

impl SmileObjective {
    /// `base` supplies `ξ₀` and `α`; its `ρ` and `η` are ignored.
    pub fn new(
        base: &ModelParams,
        grid: TimeGrid,
        kind: EstimatorKind,
        n_paths: usize,
        seed: u64,
        log_strikes: &[f64],
        targets: &[f64],
    ) -> Result<Self> {
        if log_strikes.is_empty() || log_strikes.len() != targets.len() {
            return Err(Error::invalid("target_vols", "need one target per strike"));
        }
        let req = kind.path_requirements();
        let paths = HybridScheme::new(base.roughness, grid)?.simulate(n_paths, seed, req.antithetic)?;
        let specs = log_strikes
            .iter()
            .map(|&k| OptionSpec::new(k, grid.maturity()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            base: base.clone(),
            grid,
            kind,
            paths,
            w2_seed: req.full_price.then(|| derive_seed(seed, DOMAIN_ORTHOGONAL, 0)),
            specs,
            targets: targets.to_vec(),
        })
    }

    /// Implied volatilities at `(ρ, η)`; `None` where the estimate failed.
    pub fn vols(&self, rho: f64, eta: f64) -> Result<Vec<Option<f64>>> {
        let params = self.base.with_rho_eta(rho, eta)?;
        let pf = functionals_from_paths(&self.paths, &params, &self.grid, self.w2_seed)?;
        self.specs
            .iter()
            .map(|spec| Ok(estimate_implied_vol(self.kind, &pf, spec, rho)?.sigma))
            .collect()
    }

    /// `+∞` if any strike fails.
    pub fn rmse(&self, rho: f64, eta: f64) -> f64 {
        let Ok(vols) = self.vols(rho, eta) else {
            return f64::INFINITY;
        };
        let mut acc = 0.0;
        for (v, t) in vols.iter().zip(&self.targets) {
            match v {
                Some(v) => acc += (v - t) * (v - t),
                None => return f64::INFINITY,
            }
        }
        (acc / self.targets.len() as f64).sqrt()
    }
}

/// Calibrates `(ρ, η)` from `x0` on `objective`.
pub fn calibrate_rho_eta(
    objective: &SmileObjective,
    x0: [f64; 2],
    opts: &NelderMeadOptions,
) -> Result<CalibrationResult> {
    nelder_mead(|x| objective.rmse(x[0], x[1]), x0, opts)
}

/// Repeated calibrations with frozen targets; run `i` simulates with
/// `derive_seed(seed, CALIBRATION, i)`.
#[allow(clippy::too_many_arguments)]
pub fn repeated_calibration(
    base: &ModelParams,
    grid: TimeGrid,
    kind: EstimatorKind,
    n_paths: usize,
    log_strikes: &[f64],
    targets: &[f64],
    x0: [f64; 2],
    opts: &NelderMeadOptions,
    n_runs: usize,
    seed: u64,
) -> Result<Vec<CalibrationResult>> {
    (0..n_runs)
        .map(|i| {
            let run_seed = derive_seed(seed, crate::rng::DOMAIN_CALIBRATION, i as u64);
            let obj = SmileObjective::new(base, grid, kind, n_paths, run_seed, log_strikes, targets)?;
            calibrate_rho_eta(&obj, x0, opts)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ForwardVariance;

    fn opts() -> NelderMeadOptions {
        NelderMeadOptions {
            budget: None,
            ..NelderMeadOptions::default()
        }
    }

    #[test]
    fn finds_interior_quadratic_minimum() {
        let r = nelder_mead(
            |x| (x[0] + 0.3).powi(2) + 4.0 * (x[1] - 2.2).powi(2),
            [0.0, 1.9],
            &opts(),
        )
        .unwrap();
        assert!(r.converged);
        assert!(
            (r.rho_hat + 0.3).abs() < 1e-3 && (r.eta_hat - 2.2).abs() < 1e-3,
            "{r:?}"
        );
    }

    #[test]
    fn stays_inside_bounds() {
        let r = nelder_mead(|x| (x[0] + 5.0).powi(2) + (x[1] - 9.0).powi(2), [0.0, 2.0], &opts()).unwrap();
        assert!(
            (r.rho_hat + 0.99).abs() < 1e-3 && (r.eta_hat - 3.0).abs() < 1e-3,
            "{r:?}"
        );
    }

    #[test]
    fn zero_objective_at_start_returns_start() {
        let x0 = [-0.9, 1.9];
        let r = nelder_mead(
            |x| ((x[0] - x0[0]).powi(2) + (x[1] - x0[1]).powi(2)).sqrt(),
            x0,
            &opts(),
        )
        .unwrap();
        assert_eq!([r.rho_hat, r.eta_hat], x0);
        assert_eq!(r.rmse, 0.0);
    }

    #[test]
    fn eval_cap_is_respected() {
        let o = NelderMeadOptions {
            max_evals: 10,
            ..opts()
        };
        let r = nelder_mead(|x| x[0].sin() + x[1].cos(), [0.0, 2.0], &o).unwrap();
        assert!(r.evaluations <= 12);
        assert!(!r.converged);
        assert!(nelder_mead(|_| 0.0, [2.0, 2.0], &o).is_err());
    }

    #[test]
    fn objective_is_deterministic_and_zero_on_its_own_vols() {
        let base = ModelParams::new(ForwardVariance::flat(0.055225), 1.9, 0.0, -0.43).unwrap();
        let grid = TimeGrid::new(48, 0.25).unwrap();
        let ks = [-0.15, -0.05, 0.0, 0.05, 0.15];
        let obj = SmileObjective::new(&base, grid, EstimatorKind::Mixed, 400, 9, &ks, &[0.2; 5]).unwrap();
        assert_eq!(obj.rmse(-0.5, 2.0), obj.rmse(-0.5, 2.0));
        let own: Vec<f64> = obj.vols(-0.5, 2.0).unwrap().into_iter().map(Option::unwrap).collect();
        let obj = SmileObjective::new(&base, grid, EstimatorKind::Mixed, 400, 9, &ks, &own).unwrap();
        assert_eq!(obj.rmse(-0.5, 2.0), 0.0);
        let r = calibrate_rho_eta(&obj, [-0.5, 2.0], &opts()).unwrap();
        assert_eq!((r.rho_hat, r.eta_hat, r.rmse), (-0.5, 2.0, 0.0));
    }
}
