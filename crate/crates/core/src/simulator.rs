//! Monte-Carlo sampling of the discrimination experiment.
//!
//! Each trial draws a state from the priors and an outcome from its Born row; the
//! last outcome is the inconclusive one. Trials are split into contiguous blocks,
//! one per worker, each driven by ChaCha8 seeded with `seed` on stream `worker`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::StateSet;
use crate::geometry::Priors;
use crate::povm::{self, PovmSet};

pub const GENERATOR: &str = "ChaCha8 (rand_chacha), stream = worker index";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("need at least one trial")]
    NoTrials,
    #[error("need at least one worker")]
    NoWorkers,
    #[error("dimension mismatch: {states} states, {priors} priors, {detectors} detectors")]
    DimensionMismatch {
        states: usize,
        priors: usize,
        detectors: usize,
    },
}

/// Born probabilities: rows are states, columns are the `N` detectors followed by
/// the inconclusive outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BornTable {
    pub rows: Vec<Vec<f64>>,
}

impl BornTable {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn inconclusive(&self, j: usize) -> f64 {
        self.rows[j][self.n()]
    }

    /// Largest cross probability `p_jk`, `j ≠ k`.
    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.n();
        let mut m: f64 = 0.0;
        for j in 0..n {
            for k in 0..n {
                if j != k {
                    m = m.max(self.rows[j][k]);
                }
            }
        }
        m
    }
}

/// `⟨ψ_j|Π_k|ψ_j⟩` with the inconclusive column `1 - Σ_k`, clamped into `[0, 1]`.
pub fn born_table(psi: &StateSet, set: &PovmSet) -> BornTable {
    let probs = povm::born_probabilities(psi, &set.xi_x);
    let rows = probs
        .into_iter()
        .map(|mut row| {
            let total: f64 = row.iter().sum();
            row.push((1.0 - total).clamp(0.0, 1.0));
            row
        })
        .collect();
    BornTable { rows }
}

/// `⟨ψ_j|Π̃|ψ_j⟩` computed directly from the complement, for cross-checking.
pub fn direct_inconclusive(psi: &StateSet, set: &PovmSet) -> Vec<f64> {
    (0..psi.n())
        .map(|j| {
            let v = psi.psi().column(j);
            let mut acc = crate::linalg::C64::new(0.0, 0.0);
            for a in 0..v.len() {
                for b in 0..v.len() {
                    acc += v[a].conj() * set.complement[(a, b)] * v[b];
                }
            }
            acc.re
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub trials: u64,
    pub success_rate: f64,
    pub inconclusive_rate: f64,
    pub error_rate: f64,
    /// `per_state[j][k]`: count of outcome `k` (last = inconclusive) given state `j`.
    pub per_state: Vec<Vec<u64>>,
    pub theoretical_pm: f64,
    /// `(success_rate - theoretical_pm) / √(p(1-p)/trials)`.
    pub z_score: f64,
    pub seed: u64,
    pub workers: usize,
    pub generator: String,
}

impl SimulationReport {
    pub fn misidentifications(&self) -> u64 {
        let n = self.per_state.len();
        (0..n)
            .map(|j| (0..n).filter(|k| *k != j).map(|k| self.per_state[j][k]).sum::<u64>())
            .sum()
    }
}

fn cdf(values: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

fn pick(cdf: &[f64], u: f64) -> usize {
    // The last bucket absorbs rounding in the running sum.
    cdf.iter().position(|c| u < *c).unwrap_or(cdf.len() - 1)
}

pub fn simulate(
    psi: &StateSet,
    eta: &Priors,
    set: &PovmSet,
    trials: u64,
    seed: u64,
) -> Result<SimulationReport, SimulationError> {
    simulate_with_workers(psi, eta, set, trials, seed, rayon::current_num_threads())
}

/// Deterministic for fixed `(seed, workers)`.
pub fn simulate_with_workers(
    psi: &StateSet,
    eta: &Priors,
    set: &PovmSet,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<SimulationReport, SimulationError> {
    if trials == 0 {
        return Err(SimulationError::NoTrials);
    }
    if workers == 0 {
        return Err(SimulationError::NoWorkers);
    }
    let n = psi.n();
    if eta.len() != n || set.n() != n {
        return Err(SimulationError::DimensionMismatch {
            states: n,
            priors: eta.len(),
            detectors: set.n(),
        });
    }
    let table = born_table(psi, set);
    let prior_cdf = cdf(eta.values());
    let row_cdfs: Vec<Vec<f64>> = table.rows.iter().map(|r| cdf(r)).collect();

    let base = trials / workers as u64;
    let extra = trials % workers as u64;
    let blocks: Vec<Vec<Vec<u64>>> = (0..workers)
        .into_par_iter()
        .map(|w| {
            let count = base + u64::from((w as u64) < extra);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(w as u64);
            let mut counts = vec![vec![0u64; n + 1]; n];
            for _ in 0..count {
                let j = pick(&prior_cdf, rng.random::<f64>());
                let k = pick(&row_cdfs[j], rng.random::<f64>());
                counts[j][k] += 1;
            }
            counts
        })
        .collect();

    let mut per_state = vec![vec![0u64; n + 1]; n];
    for block in &blocks {
        for (acc, row) in per_state.iter_mut().zip(block) {
            for (a, c) in acc.iter_mut().zip(row) {
                *a += c;
            }
        }
    }
    let success: u64 = (0..n).map(|j| per_state[j][j]).sum();
    let inconclusive: u64 = (0..n).map(|j| per_state[j][n]).sum();
    let error = trials - success - inconclusive;
    let tf = trials as f64;
    let theoretical_pm = set.weights.mean_efficiency(eta);
    let success_rate = success as f64 / tf;
    let sigma = (theoretical_pm * (1.0 - theoretical_pm) / tf).sqrt();
    let diff = success_rate - theoretical_pm;
    let z_score = if sigma > 0.0 {
        diff / sigma
    } else if diff.abs() < 1e-12 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    Ok(SimulationReport {
        trials,
        success_rate,
        inconclusive_rate: inconclusive as f64 / tf,
        error_rate: error as f64 / tf,
        per_state,
        theoretical_pm,
        z_score,
        seed,
        workers,
        generator: GENERATOR.to_string(),
    })
}
