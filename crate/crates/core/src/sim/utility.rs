use serde::{Deserialize, Serialize};

use super::eval::{evaluate, EvalSpec};
use super::feedback::FeedbackRecord;
use super::world::World;
use crate::auction::{AdId, Mechanism};
use crate::error::{Error, Result};

/// Click-summed utility `sum (value - price)` over an advertiser's records.
pub fn advertiser_utility(records: &[FeedbackRecord]) -> f64 {
    records.iter().map(FeedbackRecord::utility).sum()
}

/// Mean per-round utility of each advertiser under a reference mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkUtilities {
    pub ad_ids: Vec<AdId>,
    pub mean: Vec<f64>,
    pub rounds: usize,
}

impl BenchmarkUtilities {
    pub fn total(&self) -> f64 {
        self.mean.iter().sum()
    }
}

pub fn benchmark_utilities(
    world: &World,
    mechanism: &Mechanism<'_>,
    spec: &EvalSpec,
) -> Result<BenchmarkUtilities> {
    if spec.rounds == 0 {
        return Err(Error::InvalidInput(
            "benchmark needs at least one round".into(),
        ));
    }
    let e = evaluate(world, mechanism, spec)?;
    Ok(BenchmarkUtilities {
        ad_ids: world.advertisers.iter().map(|a| a.id).collect(),
        mean: e.utility,
        rounds: spec.rounds,
    })
}
