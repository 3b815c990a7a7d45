//! Monte Carlo sampler for measurement words.
//!
//! Path: `x_0 ~ mu`, `k_0 ~ F(x_0, .)`, `x_1 ~ P(x_0, .)`, `k_1 ~ F(x_1, .)`, ...
//!
//! Samples are split into fixed blocks of [`BLOCK_SIZE`]. Block `b` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` switched to stream `b`, so the counts do
//! not depend on how blocks are scheduled across threads.

use entropy_lab::dynsys::StochasticSystem;
use entropy_lab::pou::{distribution, refine_afl, PartitionOfUnity};
use entropy_lab::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const BLOCK_SIZE: u64 = 1 << 16;

/// Inverse-CDF lookup for one categorical distribution.
struct Categorical {
    cumulative: Vec<f64>,
    last: usize,
}

impl Categorical {
    fn new(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        // rounding can leave the total just below 1; the tail goes to the last
        // outcome with positive weight
        let last = weights.iter().rposition(|&w| w > 0.0).unwrap_or(0);
        Self { cumulative, last }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .map_or(self.last, |i| i.min(self.last))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub samples: u64,
    pub counts: Vec<u64>,
    pub analytic: Vec<f64>,
    pub tv_distance: f64,
    /// `1.5 * sqrt(K^N / samples)`.
    pub reference_bound: f64,
}

impl SampleOutcome {
    pub fn empirical(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.samples as f64).collect()
    }

    pub fn distinct_words(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Draws `samples` words of length `depth` and compares them with the exact
/// word distribution.
pub fn sample_words(
    sys: &StochasticSystem,
    f: &PartitionOfUnity,
    depth: usize,
    samples: u64,
    seed: u64,
    word_cap: usize,
) -> Result<SampleOutcome> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be >= 1".into()));
    }
    let refined = refine_afl(sys, f, depth, word_cap)?;
    let analytic = distribution(sys.stationary(), refined.partition())?.into_inner();
    let words = analytic.len();
    let k = f.n_outcomes();
    let n = sys.n_states();

    let start = Categorical::new(sys.stationary().as_slice());
    let steps: Vec<Categorical> = (0..n).map(|x| Categorical::new(&sys.transition().row(x))).collect();
    let outcomes: Vec<Categorical> = (0..n).map(|x| Categorical::new(&f.row(x))).collect();

    let blocks = samples.div_ceil(BLOCK_SIZE);
    let per_block: Vec<Vec<u64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let count = BLOCK_SIZE.min(samples - b * BLOCK_SIZE);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let mut counts = vec![0u64; words];
            for _ in 0..count {
                let mut x = start.draw(&mut rng);
                let mut code = 0usize;
                for step in 0..depth {
                    if step > 0 {
                        x = steps[x].draw(&mut rng);
                    }
                    code = code * k + outcomes[x].draw(&mut rng);
                }
                counts[code] += 1;
            }
            counts
        })
        .collect();

    let mut counts = vec![0u64; words];
    for block in per_block {
        for (c, b) in counts.iter_mut().zip(block) {
            *c += b;
        }
    }
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / samples as f64).collect();
    Ok(SampleOutcome {
        samples,
        tv_distance: total_variation(&empirical, &analytic),
        reference_bound: 1.5 * (words as f64 / samples as f64).sqrt(),
        counts,
        analytic,
    })
}
