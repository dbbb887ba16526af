//! All five estimators on one configuration: implied vols and standard
//! errors at the 10-delta put, ATM and 10-delta call strikes.

use rbergomi::lab::reference_targets;
use rbergomi::prelude::*;

fn main() -> rbergomi::Result<()> {
    let n_paths = 20_000;
    for rho in [-0.9, 0.0] {
        let model = ModelParams::new(ForwardVariance::flat(0.235 * 0.235), 1.9, rho, -0.43)?;
        let sim = Simulation::new(&model, TimeGrid::new(312, 0.25)?)?;
        println!("rho = {rho}");
        for kind in EstimatorKind::ALL {
            let paths = sim.functionals(kind.path_requirements(), n_paths, 3)?;
            print!("  {kind:<12}");
            for target in reference_targets(rho).unwrap() {
                let spec = OptionSpec::new(target.k, 0.25)?;
                let est = estimate_implied_vol(kind, &paths, &spec, rho)?;
                print!(
                    "  {} {:.4} (price se {:.1e})",
                    target.label,
                    est.sigma.unwrap_or(f64::NAN),
                    est.price_std_err
                );
            }
            println!();
        }
    }
    Ok(())
}
