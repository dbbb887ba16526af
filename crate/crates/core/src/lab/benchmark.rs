//! Repeated estimation at fixed strikes and the `φ²`, `ψ²` error measures.

use std::time::Instant;

use rayon::prelude::*;

use crate::black_scholes::OptionSpec;
use crate::engine::Simulation;
use crate::estimators::{invert_estimate, EstimatorKind, EstimatorSample};
use crate::rng::{derive_seed, DOMAIN_REPLICATION};
use crate::{Error, Result};

/// A strike with its reference implied volatility.
#[derive(Debug, Clone, PartialEq)]
pub struct StrikeTarget {
    pub label: String,
    pub k: f64,
    pub target_vol: f64,
}

impl StrikeTarget {
    pub fn new(label: impl Into<String>, k: f64, target_vol: f64) -> Self {
        Self {
            label: label.into(),
            k,
            target_vol,
        }
    }
}

/// 10-delta put, ATM and 10-delta call reference points of the 3M smile
/// (`ξ₀ = 0.235²`, `η = 1.9`, `α = -0.43`) for `ρ = -0.9` and `ρ = 0`.
pub fn reference_targets(rho: f64) -> Option<Vec<StrikeTarget>> {
    if rho == -0.9 {
        Some(vec![
            StrikeTarget::new("10P", -0.1787, 0.2961),
            StrikeTarget::new("ATM", 0.0, 0.2061),
            StrikeTarget::new("10C", 0.1041, 0.1576),
        ])
    } else if rho == 0.0 {
        Some(vec![
            StrikeTarget::new("10P", -0.1475, 0.2417),
            StrikeTarget::new("ATM", 0.0, 0.2173),
            StrikeTarget::new("10C", 0.1656, 0.2466),
        ])
    } else {
        None
    }
}

/// `N` replications of one estimator at a set of strikes.
#[derive(Debug, Clone)]
pub struct Replications {
    pub kind: EstimatorKind,
    pub rho: f64,
    pub strikes: Vec<StrikeTarget>,
    /// `σ̂` per strike, in replication order, flagged estimates left out.
    pub samples: Vec<Vec<f64>>,
    /// Flagged estimates per strike.
    pub flagged: Vec<usize>,
    /// Wall-clock milliseconds per replication, all strikes included.
    pub tau_ms: f64,
    pub n_paths: usize,
    pub n_reps: usize,
}

/// Runs `n_reps` independent replications of `kind` with `n_paths` paths
/// each. Replication `i` uses master seed `derive_seed(seed, REPLICATION, i)`.
pub fn repeated_estimation(
    sim: &Simulation,
    kind: EstimatorKind,
    strikes: &[StrikeTarget],
    n_paths: usize,
    n_reps: usize,
    seed: u64,
) -> Result<Replications> {
    if n_reps < 2 {
        return Err(Error::invalid("n_reps", "need at least two replications"));
    }
    if n_paths < 2 {
        return Err(Error::invalid("n_paths", "need at least two paths"));
    }
    if strikes.is_empty() {
        return Err(Error::invalid("log_strikes", "need at least one strike"));
    }
    let t = sim.grid().maturity();
    let rho = sim.params().rho;
    let specs = strikes
        .iter()
        .map(|s| OptionSpec::new(s.k, t))
        .collect::<Result<Vec<_>>>()?;
    let req = kind.path_requirements();

    let start = Instant::now();
    let per_rep: Vec<Vec<Option<f64>>> = (0..n_reps)
        .into_par_iter()
        .map(|i| {
            let pf = sim.functionals(req, n_paths, derive_seed(seed, DOMAIN_REPLICATION, i as u64))?;
            specs
                .iter()
                .map(|spec| {
                    let sample = EstimatorSample::assemble(kind, &pf, spec, rho)?;
                    let est = invert_estimate(&sample, spec);
                    Ok((!est.is_flagged()).then_some(est.sigma).flatten())
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let tau_ms = start.elapsed().as_secs_f64() * 1e3 / n_reps as f64;

    let mut samples = vec![Vec::with_capacity(n_reps); strikes.len()];
    let mut flagged = vec![0; strikes.len()];
    for rep in per_rep {
        for (j, sigma) in rep.into_iter().enumerate() {
            match sigma {
                Some(s) => samples[j].push(s),
                None => flagged[j] += 1,
            }
        }
    }
    Ok(Replications {
        kind,
        rho,
        strikes: strikes.to_vec(),
        samples,
        flagged,
        tau_ms,
        n_paths,
        n_reps,
    })
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (`N - 1` normalisation); NaN below two samples.
pub fn sample_std(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// `φ² = (1/m) Σᵢ (1/(N-1)) Σⱼ (σ̂ᵢⱼ - σᵢ)²` and `ψ² = τ φ²`.
pub fn error_measures(samples: &[Vec<f64>], targets: &[f64], tau_ms: f64) -> Result<(f64, f64)> {
    if samples.is_empty() || samples.len() != targets.len() {
        return Err(Error::invalid(
            "targets",
            "need one target per strike and at least one strike",
        ));
    }
    let mut acc = 0.0;
    for (s, &target) in samples.iter().zip(targets) {
        if s.len() < 2 {
            return Err(Error::invalid("samples", "need at least two samples per strike"));
        }
        acc += s.iter().map(|v| (v - target) * (v - target)).sum::<f64>() / (s.len() - 1) as f64;
    }
    let phi2 = acc / samples.len() as f64;
    Ok((phi2, tau_ms * phi2))
}

/// One output row of a benchmark run.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRecord {
    pub estimator: EstimatorKind,
    pub rho: f64,
    pub label: String,
    pub k: f64,
    pub target_vol: f64,
    pub bias: f64,
    pub std: f64,
    pub tau_ms: f64,
    /// Shared by every strike of the same run.
    pub phi2: f64,
    pub psi2: f64,
    pub flagged: usize,
}

impl Replications {
    pub fn targets(&self) -> Vec<f64> {
        self.strikes.iter().map(|s| s.target_vol).collect()
    }

    pub fn std_devs(&self) -> Vec<f64> {
        self.samples.iter().map(|s| sample_std(s)).collect()
    }

    pub fn measures(&self) -> Result<(f64, f64)> {
        error_measures(&self.samples, &self.targets(), self.tau_ms)
    }

    /// Records with `τ` replaced by `tau_ms`, for reproducible output.
    pub fn records_with_tau(&self, tau_ms: f64) -> Result<Vec<BenchmarkRecord>> {
        let (phi2, psi2) = error_measures(&self.samples, &self.targets(), tau_ms)?;
        Ok(self
            .strikes
            .iter()
            .zip(&self.samples)
            .zip(&self.flagged)
            .map(|((s, x), &flagged)| BenchmarkRecord {
                estimator: self.kind,
                rho: self.rho,
                label: s.label.clone(),
                k: s.k,
                target_vol: s.target_vol,
                bias: mean(x) - s.target_vol,
                std: sample_std(x),
                tau_ms,
                phi2,
                psi2,
                flagged,
            })
            .collect())
    }

    pub fn records(&self) -> Result<Vec<BenchmarkRecord>> {
        self.records_with_tau(self.tau_ms)
    }
}

/// Paths a run needs to bring its `φ²` from `phi2` at `n` paths down to
/// `target_phi2`, by `1/n` scaling.
pub fn paths_to_match(phi2: f64, n: usize, target_phi2: f64) -> f64 {
    n as f64 * phi2 / target_phi2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{ForwardVariance, ModelParams};
    use crate::hybrid::TimeGrid;

    #[test]
    fn exact_samples_have_zero_error() {
        let (phi2, psi2) = error_measures(&[vec![0.2; 5], vec![0.3; 5]], &[0.2, 0.3], 12.0).unwrap();
        assert_eq!((phi2, psi2), (0.0, 0.0));
    }

    #[test]
    fn balanced_samples_use_n_minus_one() {
        let c = 0.01;
        let n = 10;
        let s: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 0.2 + c } else { 0.2 - c }).collect();
        let (phi2, psi2) = error_measures(&[s], &[0.2], 3.0).unwrap();
        let expected = c * c * n as f64 / (n - 1) as f64;
        assert!((phi2 - expected).abs() < 1e-16);
        assert_eq!(psi2 / phi2, 3.0);
    }

    #[test]
    fn error_measures_reject_bad_shapes() {
        assert!(error_measures(&[], &[], 1.0).is_err());
        assert!(error_measures(&[vec![0.1]], &[0.1], 1.0).is_err());
        assert!(error_measures(&[vec![0.1, 0.2]], &[0.1, 0.2], 1.0).is_err());
    }

    #[test]
    fn sample_std_small_cases() {
        assert!(sample_std(&[1.0]).is_nan());
        assert!((sample_std(&[1.0, 3.0]) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn reference_targets_exist_for_both_regimes() {
        assert_eq!(reference_targets(-0.9).unwrap()[1].target_vol, 0.2061);
        assert_eq!(reference_targets(0.0).unwrap()[2].k, 0.1656);
        assert!(reference_targets(-0.5).is_none());
    }

    #[test]
    fn replications_are_reproducible_and_records_consistent() {
        let m = ModelParams::new(ForwardVariance::flat(0.055225), 1.9, -0.9, -0.43).unwrap();
        let sim = Simulation::new(&m, TimeGrid::new(32, 0.25).unwrap()).unwrap();
        let strikes = reference_targets(-0.9).unwrap();
        let a = repeated_estimation(&sim, EstimatorKind::Mixed, &strikes, 200, 8, 11).unwrap();
        let b = repeated_estimation(&sim, EstimatorKind::Mixed, &strikes, 200, 8, 11).unwrap();
        assert_eq!(a.samples, b.samples);
        assert!(a.tau_ms > 0.0);
        let recs = a.records_with_tau(5.0).unwrap();
        assert_eq!(recs.len(), 3);
        for r in &recs {
            assert!(r.std >= 0.0);
            assert_eq!(r.psi2, 5.0 * r.phi2);
        }
        assert!(repeated_estimation(&sim, EstimatorKind::Mixed, &strikes, 200, 1, 11).is_err());
    }

    #[test]
    fn paths_to_match_scales_linearly() {
        assert_eq!(paths_to_match(8.0, 1000, 1.0), 8000.0);
    }
}
