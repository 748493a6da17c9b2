//! Replica driver with reproducible per-replica random streams.
//!
//! Replica `r` draws from a ChaCha8 stream seeded with
//! `stream_seed(master, r)`, a splitmix64-style hash. Replicas may run on any
//! number of rayon workers; their results are collected in replica order and
//! reduced with compensated summation, so the output does not depend on
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{param, Result};
use crate::linalg::compensated_sum;

pub type Stream = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `replica` under master seed `master`.
pub fn stream_seed(master: u64, replica: u64) -> u64 {
    mix64(mix64(master.wrapping_add(GOLDEN)) ^ replica.wrapping_add(1).wrapping_mul(GOLDEN))
}

pub fn replica_stream(master: u64, replica: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(stream_seed(master, replica))
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub replicas: usize,
}

impl Estimate {
    /// Mean and standard error of the mean over `samples` (at least two).
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let r = samples.len();
        if r < 2 {
            return param(format!("an estimate needs at least 2 replicas, got {r}"));
        }
        let mean = compensated_sum(samples.iter().copied()) / r as f64;
        let ss = compensated_sum(samples.iter().map(|x| (x - mean) * (x - mean)));
        let var = ss / (r - 1) as f64;
        Ok(Estimate { mean, stderr: (var / r as f64).sqrt(), replicas: r })
    }

    /// Whether `value` lies within `k` standard errors of the mean. A zero
    /// standard error falls back to an absolute slack of `1e-12`.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr + 1e-12
    }
}

/// Runs `f` once per replica on the current rayon pool; results come back in
/// replica order.
pub fn run_replicas<T, F>(master: u64, replicas: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Stream, usize) -> T + Sync,
{
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = replica_stream(master, r as u64);
            f(&mut rng, r)
        })
        .collect()
}

/// Monte Carlo estimate of `E f`.
pub fn mc_mean<F>(master: u64, replicas: usize, f: F) -> Result<Estimate>
where
    F: Fn(&mut Stream) -> f64 + Sync,
{
    if replicas < 2 {
        return param(format!("at least 2 replicas required, got {replicas}"));
    }
    let samples = run_replicas(master, replicas, |rng, _| f(rng));
    Estimate::from_samples(&samples)
}

/// Estimates for several statistics computed on the same replicas.
pub fn mc_means<F>(master: u64, replicas: usize, f: F) -> Result<Vec<Estimate>>
where
    F: Fn(&mut Stream) -> Vec<f64> + Sync,
{
    if replicas < 2 {
        return param(format!("at least 2 replicas required, got {replicas}"));
    }
    let samples = run_replicas(master, replicas, |rng, _| f(rng));
    let width = samples[0].len();
    (0..width)
        .map(|k| {
            let column: Vec<f64> = samples.iter().map(|s| s[k]).collect();
            Estimate::from_samples(&column)
        })
        .collect()
}
