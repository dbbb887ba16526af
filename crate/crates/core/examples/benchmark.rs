//! Repeated estimation of Base and Mixed at `n = 1000` paths: bias, std,
//! runtime and the runtime-adjusted error `ψ²`.

use rbergomi::lab::{reference_targets, repeated_estimation};
use rbergomi::prelude::*;

fn main() -> rbergomi::Result<()> {
    let n_reps = 100;
    for rho in [-0.9, 0.0] {
        let model = ModelParams::new(ForwardVariance::flat(0.235 * 0.235), 1.9, rho, -0.43)?;
        let sim = Simulation::new(&model, TimeGrid::new(312, 0.25)?)?;
        let strikes = reference_targets(rho).unwrap();
        let mut psi2 = Vec::new();
        for kind in [EstimatorKind::Base, EstimatorKind::Mixed] {
            let reps = repeated_estimation(&sim, kind, &strikes, 1_000, n_reps, 11)?;
            for r in reps.records()? {
                println!(
                    "rho {rho:+.1} {:<6} {:<3} bias {:+.4} std {:.4}",
                    r.estimator, r.label, r.bias, r.std
                );
            }
            let (phi2, p) = reps.measures()?;
            println!("  tau {:.2} ms  phi2 {phi2:.3e}  psi2 {p:.3e}", reps.tau_ms);
            psi2.push(p);
        }
        println!("  psi2 ratio base/mixed = {:.1}", psi2[0] / psi2[1]);
    }
    Ok(())
}
