//! A smile across maturities on the spot-delta grid, then re-keyed by
//! forward delta.

use rbergomi::lab::{generate_smile, to_delta_space, SmileConfig};
use rbergomi::prelude::*;

fn main() -> rbergomi::Result<()> {
    let model = ModelParams::new(ForwardVariance::flat(0.235 * 0.235), 1.9, -0.9, -0.43)?;
    let cfg = SmileConfig {
        maturities: vec![1.0 / 52.0, 0.25, 1.0],
        n_paths: 40_000,
        kind: EstimatorKind::Mixed,
        ..SmileConfig::default()
    };
    let surface = generate_smile(&model, &cfg)?;
    for slice in &surface.slices {
        println!("t = {:.4}", slice.maturity);
        for p in slice.points.iter().step_by(3) {
            println!(
                "  put delta {:.2}  k = {:+.4}  vol = {:.4} +- {:.4}",
                p.delta_put,
                p.k,
                p.sigma.unwrap_or(f64::NAN),
                p.std_err
            );
        }
    }
    for slice in to_delta_space(&surface) {
        let d = slice.deltas();
        println!(
            "t = {:.4}: forward delta spans {:.3}..{:.3}, monotone = {}",
            slice.maturity,
            d[0],
            d[d.len() - 1],
            slice.is_monotone()
        );
    }
    Ok(())
}
