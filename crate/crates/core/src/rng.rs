//! Counter-based seeded streams.
//!
//! Stream `s` of master seed `m` is a ChaCha8 keystream keyed by `m` with
//! stream id `s`; two streams never share state. Monte Carlo work is split
//! into a fixed number of blocks, block `b` drawing from `stream(m, b)`, so a
//! run is bit-identical for fixed `(seed, workers)` regardless of how many
//! threads execute it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type SeededStream = ChaCha8Rng;

/// Environment variable overriding the default number of sample blocks.
pub const WORKERS_ENV: &str = "NOISESTAB_WORKERS";

const DEFAULT_WORKERS: usize = 16;

pub fn stream(master: u64, index: u64) -> SeededStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Child seed for sub-experiment `index` (splitmix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&w| w >= 1)
        .unwrap_or(DEFAULT_WORKERS)
}

/// Sample budget, master seed, and block count for a Monte Carlo estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64) -> Self {
        McConfig {
            samples,
            seed,
            workers: default_workers(),
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, samples: u64) -> Self {
        self.samples = samples;
        self
    }

    /// Sample count assigned to block `b`.
    pub fn block_len(&self, b: usize) -> u64 {
        let w = self.workers.max(1) as u64;
        self.samples / w + u64::from((b as u64) < self.samples % w)
    }

    /// Runs `f(stream, block_len)` once per block and returns the results in
    /// block order.
    pub fn run_blocks<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&mut SeededStream, u64) -> T + Sync,
    {
        let w = self.workers.max(1);
        (0..w)
            .into_par_iter()
            .map(|b| {
                let mut rng = stream(self.seed, b as u64);
                f(&mut rng, self.block_len(b))
            })
            .collect()
    }

    /// Counts successes over all blocks.
    pub fn count<F>(&self, f: F) -> u64
    where
        F: Fn(&mut SeededStream, u64) -> u64 + Sync,
    {
        self.run_blocks(f).into_iter().sum()
    }
}

/// Running mean and variance accumulator (Welford), mergeable in block order.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanVar {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanVar) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64) * (other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn merged(parts: &[MeanVar]) -> MeanVar {
        let mut acc = MeanVar::default();
        for p in parts {
            acc.merge(p);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream(7, 0).random()).collect();
        let b: u64 = stream(7, 0).random();
        assert!(a.iter().all(|&x| x == b));
        let c: u64 = stream(7, 1).random();
        let d: u64 = stream(8, 0).random();
        assert_ne!(b, c);
        assert_ne!(b, d);
    }

    #[test]
    fn block_lengths_sum_to_samples() {
        let cfg = McConfig::new(1003, 0).with_workers(7);
        let total: u64 = (0..7).map(|b| cfg.block_len(b)).sum();
        assert_eq!(total, 1003);
    }

    #[test]
    fn results_independent_of_thread_count() {
        let cfg = McConfig::new(10_000, 3).with_workers(5);
        let f = |rng: &mut SeededStream, n: u64| (0..n).filter(|_| rng.random::<f64>() < 0.3).count() as u64;
        let a = cfg.count(f);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| cfg.count(f));
        assert_eq!(a, b);
    }

    #[test]
    fn meanvar_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let mut whole = MeanVar::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut a = MeanVar::default();
        let mut b = MeanVar::default();
        xs[..37].iter().for_each(|&x| a.push(x));
        xs[37..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean - whole.mean).abs() < 1e-12);
        assert!((a.variance() - whole.variance()).abs() < 1e-12);
    }
}
