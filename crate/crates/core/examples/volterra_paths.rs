//! Hybrid-scheme skeletons of the Volterra process and their marginal
//! variance against `t^{2α+1}`.

use rbergomi::hybrid::{HybridScheme, Roughness, TimeGrid};
use rbergomi::lab::marginal_moments;

fn main() -> rbergomi::Result<()> {
    let grid = TimeGrid::new(312, 1.0)?;
    for alpha in [-0.43, -0.2, 0.0] {
        let scheme = HybridScheme::new(Roughness::new(alpha)?, grid)?;

        // a few antithetic paths kept in memory
        let paths = scheme.simulate(4, 42, true)?;
        println!(
            "alpha = {alpha:+.2}: W(1) on rows 0 and 1 = {:+.4}, {:+.4}",
            paths.walpha[[0, 312]],
            paths.walpha[[1, 312]]
        );

        // many paths streamed through moment accumulators
        let m = marginal_moments(&scheme, 20_000, 42)?;
        for i in [78, 156, 312] {
            println!(
                "  t = {:.3}  var = {:.5}  model = {:.5}",
                m.times[i], m.var[i], m.model_var[i]
            );
        }
    }
    Ok(())
}
