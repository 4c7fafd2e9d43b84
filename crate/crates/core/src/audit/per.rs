use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::auction::{
    allocate, price_outcome, AuctionOutcome, AuctionRequest, Mechanism, Pricing, PricingConfig,
};
use crate::error::{Error, Result};
use crate::sim::World;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerReport {
    pub mean: Option<f64>,
    pub p05: Option<f64>,
    pub p95: Option<f64>,
    /// Winners with a defined ratio.
    pub audited: usize,
    /// Winners whose exact price is zero or has no solution.
    pub excluded: usize,
    pub ratios: Vec<f64>,
}

/// Nearest-rank percentile of sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

/// Multiplier price over exact critical-bid price for every winner of
/// `rounds` requests drawn with `seed`.
pub fn payment_error_rate(
    world: &World,
    mechanism: &Mechanism<'_>,
    seed: u64,
    rounds: usize,
    cfg: &PricingConfig,
) -> Result<PerReport> {
    if rounds == 0 {
        return Err(Error::InvalidInput(
            "payment audit needs at least one round".into(),
        ));
    }
    let per_round: Vec<(Vec<f64>, usize)> = (0..rounds as u64)
        .into_par_iter()
        .map(|i| {
            let req = world.round(seed, i).request;
            let entries = mechanism.entries(&req)?;
            let mut approx = allocate(&req, &entries)?;
            price_outcome(&req, &mut approx, mechanism, Pricing::Multiplier, cfg)?;
            let mut ratios = Vec::new();
            let mut excluded = 0;
            for pos in 0..approx.winners.len() {
                match exact_price(&req, &approx, mechanism, cfg, pos) {
                    Ok(p) if p > 0.0 => ratios.push(approx.winners[pos].price_per_click / p),
                    Ok(_) | Err(Error::NoCriticalBid { .. }) => excluded += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok((ratios, excluded))
        })
        .collect::<Result<_>>()?;
    let mut ratios = Vec::new();
    let mut excluded = 0;
    for (r, e) in per_round {
        ratios.extend(r);
        excluded += e;
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(PerReport {
        mean: (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64),
        p05: percentile(&sorted, 0.05),
        p95: percentile(&sorted, 0.95),
        audited: ratios.len(),
        excluded,
        ratios,
    })
}

/// Exact price of the winner at `pos`; earlier positions do not affect it.
fn exact_price(
    req: &AuctionRequest,
    outcome: &AuctionOutcome,
    mechanism: &Mechanism<'_>,
    cfg: &PricingConfig,
    pos: usize,
) -> Result<f64> {
    let mut single = AuctionOutcome {
        winners: vec![outcome.winners[pos]],
        losers: Vec::new(),
        ranking: outcome.ranking[pos..].to_vec(),
    };
    single.winners[0].slot = 1;
    price_outcome(req, &mut single, mechanism, Pricing::Exact, cfg)?;
    Ok(single.winners[0].price_per_click)
}
