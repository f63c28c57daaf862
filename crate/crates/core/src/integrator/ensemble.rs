use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::path::{functional_names, simulate_path_observed, InnerBall, PathResult};
use super::scheme::Scheme;
use crate::error::{Error, StepError};

/// Monte Carlo summary per checkpoint and functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub seed: u64,
    pub n_paths: usize,
    pub names: Vec<String>,
    pub times: Vec<f64>,
    /// `mean[c][f]` over paths alive at checkpoint `c`.
    pub mean: Vec<Vec<f64>>,
    /// Standard error from the unbiased sample variance; NaN with fewer than two live paths.
    pub se: Vec<Vec<f64>>,
    pub n_alive: Vec<usize>,
    /// Fraction of paths with `blowup_time ≤ t`.
    pub blowup_fraction: Vec<f64>,
}

/// One CSV-ready row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleRow<'a> {
    pub t: f64,
    pub name: &'a str,
    pub mean: f64,
    pub se: f64,
    pub blowup_fraction: f64,
    pub n_alive: usize,
}

impl EnsembleResult {
    /// Aggregates paths in the given order (Welford updates, so identical paths give SE = 0 exactly).
    pub fn from_paths(
        seed: u64,
        names: Vec<String>,
        times: Vec<f64>,
        paths: &[PathResult],
    ) -> Self {
        let nf = names.len();
        let nc = times.len();
        let mut mean = vec![vec![0.0; nf]; nc];
        let mut m2 = vec![vec![0.0; nf]; nc];
        let mut n_alive = vec![0usize; nc];
        for path in paths {
            for (c, row) in path.values.iter().enumerate().take(nc) {
                n_alive[c] += 1;
                let k = n_alive[c] as f64;
                for (f, x) in row.iter().enumerate() {
                    let d = x - mean[c][f];
                    mean[c][f] += d / k;
                    m2[c][f] += d * (x - mean[c][f]);
                }
            }
        }
        let se = m2
            .iter()
            .zip(&n_alive)
            .map(|(row, &n)| {
                row.iter()
                    .map(|s| {
                        if n < 2 {
                            f64::NAN
                        } else {
                            (s / (n - 1) as f64 / n as f64).sqrt()
                        }
                    })
                    .collect()
            })
            .collect();
        for (c, &n) in n_alive.iter().enumerate() {
            if n == 0 {
                mean[c].iter_mut().for_each(|v| *v = f64::NAN);
            }
        }
        let total = paths.len().max(1) as f64;
        let blowup_fraction = times
            .iter()
            .map(|t| {
                paths
                    .iter()
                    .filter(|p| p.blowup_time.is_some_and(|tb| tb <= *t))
                    .count() as f64
                    / total
            })
            .collect();
        Self {
            seed,
            n_paths: paths.len(),
            names,
            times,
            mean,
            se,
            n_alive,
            blowup_fraction,
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Rows in `(checkpoint, functional)` order.
    pub fn rows(&self) -> impl Iterator<Item = EnsembleRow<'_>> {
        self.times.iter().enumerate().flat_map(move |(c, &t)| {
            self.names
                .iter()
                .enumerate()
                .map(move |(f, name)| EnsembleRow {
                    t,
                    name,
                    mean: self.mean[c][f],
                    se: self.se[c][f],
                    blowup_fraction: self.blowup_fraction[c],
                    n_alive: self.n_alive[c],
                })
        })
    }
}

pub(crate) fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, StepError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    b.build()
        .map_err(|e| StepError::InvalidConfig(format!("thread pool: {e}")))
}

/// Simulates paths `0..n_paths` on streams `(seed, index)`, collected in index order.
pub fn simulate_paths(
    scheme: &Scheme,
    inner: Option<&InnerBall>,
    n_paths: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<PathResult>, Error> {
    let pool = pool(threads)?;
    let paths: Result<Vec<_>, StepError> = pool.install(|| {
        (0..n_paths as u64)
            .into_par_iter()
            .map(|i| simulate_path_observed(scheme, inner, seed, i, |_, _| {}))
            .collect()
    });
    Ok(paths?)
}

pub fn run_ensemble(
    scheme: &Scheme,
    inner: Option<&InnerBall>,
    n_paths: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<(EnsembleResult, Vec<PathResult>), Error> {
    if n_paths < 2 {
        return Err(
            StepError::InvalidConfig(format!("at least 2 paths required, got {n_paths}")).into(),
        );
    }
    let paths = simulate_paths(scheme, inner, n_paths, seed, threads)?;
    let cfg = scheme.config();
    let times = cfg
        .checkpoint_steps()
        .iter()
        .map(|s| cfg.time_of(*s))
        .collect();
    let names = functional_names(&cfg.p_list, inner.is_some());
    Ok((
        EnsembleResult::from_paths(seed, names, times, &paths),
        paths,
    ))
}
