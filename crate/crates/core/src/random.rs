//! Seeded generators for random systems, partitions and densities.
//!
//! All generators take the caller's RNG so that a single seeded
//! `ChaCha8Rng` stream reproduces an entire corpus.

use nalgebra::DMatrix;
use rand::Rng;

use crate::dynsys::{default_labels, make_markov, StochasticSystem};
use crate::entcore::StochasticMatrix;
use crate::error::Result;
use crate::pou::PartitionOfUnity;

/// A flat Dirichlet(1, ..., 1) draw of length `k`.
pub fn random_simplex<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / total).collect()
}

/// A random Markov chain on `n` states with strictly positive transitions, so
/// the stationary measure is unique and positive.
pub fn random_system<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<StochasticSystem> {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..n).map(|_| 0.02 + rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect()
        })
        .collect();
    make_markov(default_labels(n), StochasticMatrix::from_rows(&rows)?, None)
}

/// A random partition of unity with `k` outcomes on `n` states.
pub fn random_partition<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Result<PartitionOfUnity> {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| random_simplex(rng, k)).collect();
    PartitionOfUnity::new(DMatrix::from_fn(n, k, |x, j| rows[x][j]))
}

/// A random partition of unity that is constant on the cells of a random set
/// partition, i.e. a simple function with possibly repeated rows.
pub fn random_simple_partition<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Result<PartitionOfUnity> {
    let n_cells = rng.random_range(1..=n);
    let mut cell_of: Vec<usize> = (0..n).map(|x| if x < n_cells { x } else { rng.random_range(0..n_cells) }).collect();
    // shuffle so the repeated rows are not always at the end
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        cell_of.swap(i, j);
    }
    let rows: Vec<Vec<f64>> = (0..n_cells).map(|_| random_simplex(rng, k)).collect();
    PartitionOfUnity::new(DMatrix::from_fn(n, k, |x, j| rows[cell_of[x]][j]))
}
