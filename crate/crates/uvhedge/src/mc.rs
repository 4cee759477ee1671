//! Seeded, path-parallel Monte Carlo with an order-fixed reduction.
//!
//! Path `i` draws from ChaCha8 seeded with the base seed on stream `i`, so a
//! path's numbers never depend on which worker ran it. Per-path results are
//! collected in path order and summed pairwise, which makes every statistic
//! bit-identical for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "UVHEDGE_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct McConfig {
    pub paths: u64,
    pub steps: usize,
    pub seed: u64,
    /// Pair path `2k+1` with the mirrored draws of path `2k`.
    pub antithetic: bool,
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::config("numerics.paths", "must be at least 1"));
        }
        if self.steps == 0 {
            return Err(Error::config("numerics.steps", "must be at least 1"));
        }
        if self.antithetic && self.paths % 2 == 1 {
            return Err(Error::config("numerics.paths", "must be even with antithetic sampling"));
        }
        Ok(())
    }

    /// Independent samples: paths, or antithetic pairs.
    pub fn units(&self) -> u64 {
        if self.antithetic {
            self.paths / 2
        } else {
            self.paths
        }
    }
}

/// Standard normal draws for one path.
pub struct Normals {
    rng: ChaCha8Rng,
    sign: f64,
}

impl Normals {
    pub fn new(seed: u64, stream: u64, mirrored: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            rng,
            sign: if mirrored { -1.0 } else { 1.0 },
        }
    }

    pub fn draw(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.sign * z
    }

    pub fn pair(&mut self) -> (f64, f64) {
        let a = self.draw();
        (a, self.draw())
    }
}

/// Worker count from `UVHEDGE_THREADS`, defaulting to all cores.
pub fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::config(
                THREADS_ENV,
                format!("expected a positive integer, got {v:?}"),
            )),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn pool() -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count()?)
        .build()
        .map_err(|e| Error::config(THREADS_ENV, e.to_string()))
}

/// Where a path's draws come from. [`NormalSource::draws`] can be called more
/// than once to replay the same numbers (common random numbers).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NormalSource {
    pub seed: u64,
    pub stream: u64,
    pub mirrored: bool,
}

impl NormalSource {
    pub fn draws(&self) -> Normals {
        Normals::new(self.seed, self.stream, self.mirrored)
    }
}

/// Runs `f(path_id, source)` for every path and returns one row of
/// statistics per independent unit; antithetic pairs are averaged.
pub fn map_units<F>(cfg: &McConfig, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(u64, NormalSource) -> Result<Vec<f64>> + Sync,
{
    cfg.validate()?;
    let source = |stream: u64, mirrored: bool| NormalSource {
        seed: cfg.seed,
        stream,
        mirrored,
    };
    let run = |unit: u64| -> Result<Vec<f64>> {
        if cfg.antithetic {
            let a = f(2 * unit, source(unit, false))?;
            let b = f(2 * unit + 1, source(unit, true))?;
            Ok(a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect())
        } else {
            f(unit, source(unit, false))
        }
    };
    let units = cfg.units();
    pool()?.install(|| (0..units).into_par_iter().map(run).collect())
}

/// Pairwise summation in a fixed order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = pairwise_sum(xs) / n as f64;
        let stderr = if n > 1 {
            let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&dev) / (n - 1) as f64 / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Self {
            mean,
            stderr,
            samples: n as u64,
        }
    }
}

/// Column `j` of the per-unit rows.
pub fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}
