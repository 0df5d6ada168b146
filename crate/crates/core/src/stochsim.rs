//! Monte Carlo replay of an allocation strategy against i.i.d. query streams.
//!
//! Query `n` of `Q` arrives at virtual time `n·T/Q` and is served by the
//! configuration active at that time. Each assigned ad with budget left pays
//! `min(p_ij, remaining)`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::adalloc::{evaluate_strategy, greedy_allocate, AdInstance, AllocationStrategy};
use crate::error::{Error, Result};
use crate::seqcore::Sequence;

/// Generator used for every trial; trial `k` reads stream `k` of the seed.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha), seed_from_u64(seed), stream = trial index";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StreamConfig {
    pub seed: u64,
    pub trials: usize,
    /// Defaults to `round(T)`.
    pub query_count: Option<usize>,
}

impl StreamConfig {
    pub fn new(seed: u64, trials: usize) -> Self {
        StreamConfig {
            seed,
            trials,
            query_count: None,
        }
    }

    pub fn with_queries(mut self, queries: usize) -> Self {
        self.query_count = Some(queries);
        self
    }

    pub fn resolved_queries(&self, instance: &AdInstance) -> usize {
        self.query_count
            .unwrap_or_else(|| instance.horizon().round() as usize)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimResult {
    pub per_trial: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (zero for a single trial).
    pub std: f64,
    /// Fluid utility of the same strategy.
    pub fluid: f64,
    pub trials: usize,
    pub seed: u64,
    pub query_count: usize,
    pub rng: &'static str,
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn run_trial(
    instance: &AdInstance,
    strategy: &AllocationStrategy,
    types: &WeightedIndex<f64>,
    queries: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let budgets = instance.budgets();
    let mut remaining = budgets.clone();
    let step = instance.horizon() / queries as f64;
    for n in 0..queries {
        let j = types.sample(rng);
        let Some(config) = strategy.action_at(n as f64 * step) else {
            continue;
        };
        for &i in config.ads_for(j) {
            if remaining[i] > 0.0 {
                let pay = instance.bid(i, j).min(remaining[i]);
                remaining[i] -= pay;
            }
        }
    }
    budgets.iter().zip(&remaining).map(|(b, r)| b - r).sum()
}

/// Replays `strategy` over `config.trials` independent streams. Trials run in
/// parallel and are reduced in trial order, so results are reproducible.
pub fn simulate_stream(instance: &AdInstance, strategy: &AllocationStrategy, config: &StreamConfig) -> Result<SimResult> {
    if config.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let queries = config.resolved_queries(instance);
    if queries == 0 {
        return Err(Error::InvalidArgument("query count must be at least 1".into()));
    }
    if strategy.length() > instance.horizon() + 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "strategy length {} exceeds horizon {}",
            strategy.length(),
            instance.horizon()
        )));
    }
    let fluid = evaluate_strategy(instance, strategy)?.utility;
    let types = WeightedIndex::new(instance.query_types().iter().map(|q| q.prob))
        .map_err(|e| Error::InvalidArgument(format!("query distribution: {e}")))?;
    let per_trial: Vec<f64> = (0..config.trials)
        .into_par_iter()
        .map(|k| run_trial(instance, strategy, &types, queries, &mut trial_rng(config.seed, k as u64)))
        .collect();
    let n = per_trial.len() as f64;
    let mean = per_trial.iter().sum::<f64>() / n;
    let std = if per_trial.len() > 1 {
        (per_trial.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(SimResult {
        per_trial,
        mean,
        std,
        fluid,
        trials: config.trials,
        seed: config.seed,
        query_count: queries,
        rng: RNG_ALGORITHM,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub scale: f64,
    pub mean: f64,
    pub fluid: f64,
    /// `|mean - fluid| / fluid`; zero when both are zero.
    pub relative_gap: f64,
}

/// Scales bids down and the horizon up by each factor, allocates greedily on the
/// scaled instance and compares the simulated mean with the fluid utility.
pub fn convergence_report(
    instance: &AdInstance,
    scales: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<ConvergenceRow>> {
    scales
        .iter()
        .map(|&scale| {
            let scaled = instance.scaled(scale)?;
            let (strategy, _) = greedy_allocate(&scaled)?;
            let sim = simulate_stream(&scaled, &strategy, &StreamConfig::new(seed, trials))?;
            let gap = (sim.mean - sim.fluid).abs();
            Ok(ConvergenceRow {
                scale,
                mean: sim.mean,
                fluid: sim.fluid,
                relative_gap: if sim.fluid > 0.0 {
                    gap / sim.fluid
                } else if gap == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                },
            })
        })
        .collect()
}
