use rayon::prelude::*;

use crate::hybrid::HybridScheme;
use crate::{Error, Result};

/// Sample moments of `W̃^α` at every grid time against `t^{2α+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalMoments {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    /// `N - 1` normalisation.
    pub var: Vec<f64>,
    pub model_var: Vec<f64>,
    pub n_paths: usize,
}

struct Acc {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Acc {
    fn merge(mut self, other: Acc) -> Acc {
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        for j in 0..self.mean.len() {
            let d = other.mean[j] - self.mean[j];
            self.mean[j] += d * other.n / n;
            self.m2[j] += other.m2[j] + d * d * self.n * other.n / n;
        }
        self.n = n;
        self
    }
}

/// Streams `n_paths` independent rows batch by batch; the merge runs in
/// batch order, so results do not depend on the thread count.
pub fn marginal_moments(scheme: &HybridScheme, n_paths: usize, seed: u64) -> Result<MarginalMoments> {
    let grid = scheme.grid();
    let cols = grid.n_steps() + 1;
    if n_paths < 2 {
        return Err(Error::invalid("n_paths", "need at least two paths"));
    }
    let parts: Vec<Acc> = HybridScheme::batch_layout(n_paths)
        .into_par_iter()
        .map(|(index, rows)| {
            let vp = scheme.simulate_batch(index, rows, seed, false);
            let mut acc = Acc {
                n: 0.0,
                mean: vec![0.0; cols],
                m2: vec![0.0; cols],
            };
            for row in vp.walpha.rows() {
                acc.n += 1.0;
                for (j, &x) in row.iter().enumerate() {
                    let d = x - acc.mean[j];
                    acc.mean[j] += d / acc.n;
                    acc.m2[j] += d * (x - acc.mean[j]);
                }
            }
            acc
        })
        .collect();
    let total = parts.into_iter().fold(
        Acc {
            n: 0.0,
            mean: vec![0.0; cols],
            m2: vec![0.0; cols],
        },
        Acc::merge,
    );
    let times = grid.times();
    let denom = (total.n - 1.0).max(1.0);
    Ok(MarginalMoments {
        model_var: times.iter().map(|&t| scheme.roughness().marginal_variance(t)).collect(),
        times,
        mean: total.mean,
        var: total.m2.iter().map(|m| m / denom).collect(),
        n_paths,
    })
}
