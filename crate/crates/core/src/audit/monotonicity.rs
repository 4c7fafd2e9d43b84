use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spearman::{spearman_rho, Rho};
use super::AuditConfig;
use crate::error::{Error, Result};
use crate::net::Actor;
use crate::sim::World;

/// A bid together with the rest of an ad's state.
pub type TestState = (f64, Vec<f64>);

/// Candidate states of `n_rounds` sampled requests.
pub fn test_states(world: &World, seed: u64, n_rounds: usize) -> Vec<TestState> {
    (0..n_rounds as u64)
        .flat_map(|i| world.round(seed, i).request.candidates)
        .map(|c| (c.bid, c.features))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// Mean Spearman correlation over non-degenerate states; `None` if every state was degenerate.
    pub t_m: Option<f64>,
    pub states: usize,
    pub degenerate: usize,
    pub min_rho: Option<f64>,
}

/// The relative bid grid `lo*b, ..., hi*b` with `size` evenly spaced points.
pub fn bid_grid(bid: f64, cfg: &AuditConfig) -> Vec<f64> {
    let g = cfg.grid_size;
    (0..g)
        .map(|j| bid * (cfg.grid_lo + (cfg.grid_hi - cfg.grid_lo) * j as f64 / (g - 1) as f64))
        .collect()
}

/// Rank-correlation monotonicity of an arbitrary score function of `(bid, features)`.
pub fn monotonicity_of<F>(
    score: F,
    states: &[TestState],
    cfg: &AuditConfig,
) -> Result<MonotonicityReport>
where
    F: Fn(f64, &[f64]) -> Result<f64> + Sync,
{
    cfg.validate()?;
    if states.is_empty() {
        return Err(Error::InvalidInput(
            "monotonicity needs at least one test state".into(),
        ));
    }
    let rhos: Vec<Rho> = states
        .par_iter()
        .map(|(bid, x)| {
            let grid = bid_grid(*bid, cfg);
            let scores = grid
                .iter()
                .map(|&b| score(b, x))
                .collect::<Result<Vec<_>>>()?;
            spearman_rho(&grid, &scores)
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = rhos.iter().filter_map(|r| r.value()).collect();
    let t_m = (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64);
    Ok(MonotonicityReport {
        t_m,
        states: states.len(),
        degenerate: rhos.len() - values.len(),
        min_rho: values.iter().copied().reduce(f64::min),
    })
}

/// Mean Spearman correlation between a bid grid and the actor's rank scores.
pub fn monotonicity_metric(
    actor: &Actor,
    states: &[TestState],
    cfg: &AuditConfig,
) -> Result<MonotonicityReport> {
    monotonicity_of(|b, x| actor.rank_score(b, x), states, cfg)
}
