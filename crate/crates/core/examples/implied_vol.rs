//! Black-Scholes prices, implied volatility inversion and delta strikes.

use rbergomi::black_scholes::{bs_price, forward_delta, implied_vol, logstrike_from_spot_delta, OptionType};

fn main() -> rbergomi::Result<()> {
    let t = 0.25;
    let sigma = 0.2417;
    let v = sigma * sigma * t;

    for k in [-0.2, -0.05, 0.0, 0.05, 0.2] {
        let w = OptionType::from_log_strike(k);
        let price = bs_price(v, 1.0, k, w);
        let back = implied_vol(price, k, t)?;
        println!("k = {k:+.2}  {w:?}  price = {price:.6e}  implied vol = {back:.10}");
    }

    // fifteen standard deviations out of the money
    let price = bs_price(0.02 * 0.02, 1.0, -0.3, OptionType::Put);
    println!(
        "deep put price {price:e}, implied vol {:.10}",
        implied_vol(price, -0.3, 1.0)?
    );

    let flat = |_: f64| sigma;
    for delta_put in [0.1, 0.5, 0.9] {
        let k = logstrike_from_spot_delta(delta_put, &flat, t)?;
        println!(
            "put delta {delta_put:.2}: k = {k:+.4}, forward delta = {:.4}",
            forward_delta(k, sigma, t)
        );
    }
    Ok(())
}
