//! Calibrating `(ρ, η)` to a 3M smile with 1000 paths, Base against Mixed.

use rbergomi::lab::benchmark::sample_std;
use rbergomi::lab::calibration::repeated_calibration;
use rbergomi::lab::smile::{default_deltas, smile_slice};
use rbergomi::lab::NelderMeadOptions;
use rbergomi::prelude::*;

fn main() -> rbergomi::Result<()> {
    let (rho, eta) = (0.0, 1.9);
    let model = ModelParams::new(ForwardVariance::flat(0.235 * 0.235), eta, rho, -0.43)?;
    let grid = TimeGrid::new(312, 0.25)?;

    // target smile from a large Mixed run
    let target = smile_slice(
        &Simulation::new(&model, grid)?,
        EstimatorKind::Mixed,
        &default_deltas(),
        100_000,
        1,
        0,
    )?;
    let ks: Vec<f64> = target.points.iter().map(|p| p.k).collect();
    let vols: Vec<f64> = target.points.iter().map(|p| p.sigma.unwrap()).collect();

    let opts = NelderMeadOptions::default();
    for kind in [EstimatorKind::Base, EstimatorKind::Mixed] {
        let runs = repeated_calibration(&model, grid, kind, 1_000, &ks, &vols, [rho, eta], &opts, 8, 5)?;
        let r: Vec<f64> = runs.iter().map(|c| c.rho_hat).collect();
        let e: Vec<f64> = runs.iter().map(|c| c.eta_hat).collect();
        println!(
            "{kind:<6} std(rho) {:.4}  std(eta) {:.4}",
            sample_std(&r),
            sample_std(&e)
        );
        for c in runs.iter().take(3) {
            println!(
                "  rho {:+.3} eta {:.3} rmse {:.4} evals {}",
                c.rho_hat, c.eta_hat, c.rmse, c.evaluations
            );
        }
    }
    Ok(())
}
