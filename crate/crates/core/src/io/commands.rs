use std::collections::BTreeMap;
use std::time::Duration;

use crate::engine::Simulation;
use crate::estimators::EstimatorKind;
use crate::hybrid::{HybridScheme, Roughness, TimeGrid};
use crate::io::config::{parse_config, Command, Invocation, RunConfig};
use crate::io::csv::{self, emit_csv, format_float};
use crate::lab::benchmark::{repeated_estimation, StrikeTarget};
use crate::lab::calibration::{repeated_calibration, NelderMeadOptions};
use crate::lab::forward_variance::{bootstrap_forward_variance, integrated_forward_variance};
use crate::lab::marginal_moments;
use crate::lab::smile::{generate_smile, smile_slice, DeltaSlice, PointStatus, SmileConfig};
use crate::rng::{derive_seed, DOMAIN_SMILE};
use crate::{Error, Result};

/// Rows of one command plus extra provenance lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
    pub notes: Vec<String>,
}

impl Output {
    fn new(columns: &'static [&'static str], rows: Vec<Vec<String>>) -> Self {
        Self {
            columns,
            rows,
            notes: Vec::new(),
        }
    }
}

/// Parses, runs and writes one invocation. The output file is created
/// before any work starts so that an unwritable path fails fast.
pub fn run(inv: &Invocation) -> Result<()> {
    let cfg = parse_config(inv)?;
    std::fs::File::create(&inv.out).map_err(|source| Error::Io {
        path: inv.out.display().to_string(),
        source,
    })?;
    let out = execute(&cfg)?;
    let mut header = cfg.provenance();
    header.extend(out.notes);
    emit_csv(&inv.out, &header, out.columns, &out.rows)
}

pub fn execute(cfg: &RunConfig) -> Result<Output> {
    match cfg.command {
        Command::VolterraCheck => volterra_check(cfg),
        Command::Smile => smile(cfg),
        Command::Benchmark => benchmark(cfg),
        Command::Calibrate => calibrate(cfg),
        Command::ExtractXi => extract_xi(cfg),
    }
}

fn volterra_check(cfg: &RunConfig) -> Result<Output> {
    let scheme = HybridScheme::new(Roughness::new(cfg.alpha)?, TimeGrid::new(cfg.n_steps, cfg.maturity)?)?;
    let m = marginal_moments(&scheme, cfg.n_paths, cfg.seed)?;
    let rows = (0..m.times.len())
        .map(|i| {
            [m.times[i], m.mean[i], m.var[i], m.model_var[i]]
                .into_iter()
                .map(format_float)
                .collect()
        })
        .collect();
    Ok(Output::new(&csv::VOLTERRA_COLUMNS, rows))
}

fn smile(cfg: &RunConfig) -> Result<Output> {
    let surface = generate_smile(
        &cfg.model()?,
        &SmileConfig {
            maturities: cfg.maturities.clone(),
            deltas: cfg.deltas.clone(),
            n_paths: cfg.n_paths,
            n_steps: cfg.n_steps,
            kind: cfg.estimator,
            seed: cfg.seed,
            n_batches: cfg.n_batches,
        },
    )?;
    if surface.points().all(|(_, p)| p.status != PointStatus::Ok) {
        return Err(Error::Numerical("every smile point was flagged".into()));
    }
    Ok(Output::new(&csv::SMILE_COLUMNS, csv::smile_rows(&surface)))
}

fn strike_targets(cfg: &RunConfig) -> Vec<StrikeTarget> {
    let ks = cfg.log_strikes.clone().unwrap_or_default();
    let vols = cfg.target_vols.clone().unwrap_or_default();
    ks.iter()
        .zip(&vols)
        .enumerate()
        .map(|(i, (&k, &v))| {
            let label = cfg
                .labels
                .as_ref()
                .map_or_else(|| format!("k{}", i + 1), |l| l[i].clone());
            StrikeTarget::new(label, k, v)
        })
        .collect()
}

fn benchmark(cfg: &RunConfig) -> Result<Output> {
    let sim = Simulation::new(&cfg.model()?, TimeGrid::new(cfg.n_steps, cfg.maturity)?)?;
    let strikes = strike_targets(cfg);
    let mut records = Vec::new();
    for &kind in &cfg.estimators {
        let reps = repeated_estimation(&sim, kind, &strikes, cfg.n_paths, cfg.n_reps, cfg.seed)?;
        if let Some(j) = reps.samples.iter().position(|s| s.len() < 2) {
            return Err(Error::Numerical(format!(
                "{kind}: {} of {} estimates flagged at {}",
                reps.flagged[j], cfg.n_reps, strikes[j].label
            )));
        }
        records.extend(reps.records_with_tau(cfg.tau_ms.unwrap_or(reps.tau_ms))?);
    }
    Ok(Output::new(&csv::BENCHMARK_COLUMNS, csv::benchmark_rows(&records)))
}

fn calibrate(cfg: &RunConfig) -> Result<Output> {
    let model = cfg.model()?;
    let grid = TimeGrid::new(cfg.n_steps, cfg.maturity)?;
    let (ks, vols) = match (&cfg.log_strikes, &cfg.target_vols) {
        (Some(k), Some(v)) => (k.clone(), v.clone()),
        _ => {
            let sim = Simulation::new(&model, grid)?;
            let seed = derive_seed(cfg.seed, DOMAIN_SMILE, u64::MAX);
            let slice = smile_slice(&sim, EstimatorKind::Mixed, &cfg.deltas, cfg.target_paths, seed, 0)?;
            slice
                .points
                .iter()
                .filter(|p| p.status == PointStatus::Ok)
                .filter_map(|p| p.sigma.map(|s| (p.k, s)))
                .unzip()
        }
    };
    if ks.is_empty() {
        return Err(Error::Numerical("no usable target volatilities".into()));
    }
    let opts = NelderMeadOptions {
        max_evals: cfg.max_evals,
        budget: (cfg.budget_ms > 0).then(|| Duration::from_millis(cfg.budget_ms)),
        ..NelderMeadOptions::default()
    };
    let results = repeated_calibration(
        &model,
        grid,
        cfg.estimator,
        cfg.n_paths,
        &ks,
        &vols,
        [cfg.rho, cfg.eta],
        &opts,
        cfg.n_calibrations,
        cfg.seed,
    )?;
    if results.iter().all(|r| !r.rmse.is_finite()) {
        return Err(Error::Numerical("every calibration objective failed".into()));
    }
    let mut out = Output::new(&csv::CALIBRATION_COLUMNS, csv::calibration_rows(&results));
    out.notes = vec![
        csv::list_line("target_log_strikes", &ks),
        csv::list_line("target_implied_vols", &vols),
    ];
    Ok(out)
}

fn extract_xi(cfg: &RunConfig) -> Result<Output> {
    let path = cfg.input.as_deref().ok_or_else(|| Error::config("input", "missing"))?;
    let rows = csv::read_smile_csv(std::path::Path::new(path))?;
    let mut by_maturity: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        if !(r.maturity > 0.0) {
            return Err(Error::config(
                "input",
                format!("maturity {} is not positive", r.maturity),
            ));
        }
        let entry = by_maturity.entry(r.maturity.to_bits()).or_default();
        if r.k.is_finite() && r.sigma.is_finite() && r.sigma > 0.0 {
            entry.push((r.k, r.sigma));
        }
    }
    let mut maturities = Vec::new();
    let mut integrated = Vec::new();
    for (bits, pairs) in by_maturity {
        let t = f64::from_bits(bits);
        let slice = DeltaSlice::from_strikes(t, &pairs);
        maturities.push(t);
        integrated.push(integrated_forward_variance(&slice)?);
    }
    let xi = bootstrap_forward_variance(&maturities, &integrated)?;
    let rows = maturities
        .iter()
        .zip(&integrated)
        .zip(xi.values())
        .map(|((&t, &iv), &x)| vec![format_float(t), format_float(iv), format_float(x)])
        .collect();
    Ok(Output::new(&csv::XI_COLUMNS, rows))
}
