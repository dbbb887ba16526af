//! Integrated forward variance from a simulated smile in forward-delta
//! space, and a piecewise-constant forward variance curve.

use rbergomi::lab::forward_variance::integrated_forward_variance;
use rbergomi::lab::{bootstrap_forward_variance, generate_smile, to_delta_space, SmileConfig};
use rbergomi::prelude::*;

fn main() -> rbergomi::Result<()> {
    let xi = ForwardVariance::piecewise(vec![0.0, 0.25], vec![0.04, 0.06])?;
    let model = ModelParams::new(xi.clone(), 1.9, 0.0, -0.43)?;
    let mut deltas = vec![0.01, 0.02, 0.03];
    deltas.extend((1..=19).map(|i| i as f64 / 20.0));
    deltas.extend([0.97, 0.98, 0.99]);
    let cfg = SmileConfig {
        maturities: vec![0.25, 0.5],
        deltas,
        n_paths: 100_000,
        n_batches: 0,
        ..SmileConfig::default()
    };
    let slices = to_delta_space(&generate_smile(&model, &cfg)?);
    let mut integrated = Vec::new();
    for s in &slices {
        let iv = integrated_forward_variance(s)?;
        println!(
            "t = {}: smile integral {iv:.6}, true {:.6}",
            s.maturity,
            xi.integral(s.maturity)
        );
        integrated.push(iv);
    }
    let curve = bootstrap_forward_variance(&cfg.maturities, &integrated)?;
    println!("bootstrapped xi0 = {:?} (true [0.04, 0.06])", curve.values());
    Ok(())
}
