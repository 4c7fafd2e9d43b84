use serde::{Deserialize, Serialize};

use super::types::RankedEntry;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PricingConfig {
    /// Charged to a winner that has nobody ranked below it.
    pub reserve_price: f64,
    /// Multipliers at or below this are refused instead of divided by.
    pub eps_div: f64,
    /// Bisection tolerance as a fraction of the upper bid bracket.
    pub tol_rel: f64,
}

impl Default for PricingConfig {
    fn default() -> Self {
        Self {
            reserve_price: 0.0,
            eps_div: 1e-9,
            tol_rel: 1e-6,
        }
    }
}

/// Approximate inverse payment: the winner's multiplier is held fixed and the
/// next-ranked score is divided through it, `p = (r_next - offset) / multiplier`.
///
/// `pos` is the winner's 0-based position in `ranking`.
pub fn price_by_multiplier(
    ranking: &[RankedEntry],
    pos: usize,
    cfg: &PricingConfig,
) -> Result<f64> {
    let entry = ranking
        .get(pos)
        .ok_or_else(|| Error::InvalidInput(format!("rank position {pos} out of range")))?;
    let Some(next) = ranking.get(pos + 1) else {
        return Ok(cfg.reserve_price.min(entry.bid));
    };
    if entry.multiplier <= cfg.eps_div {
        // A bid-independent score that still beats the next entry needs no bid at all.
        if entry.offset > 0.0 && entry.offset >= next.score {
            return Ok(0.0);
        }
        return Err(Error::DegenerateMultiplier {
            ad_id: entry.ad_id.to_string(),
            multiplier: entry.multiplier,
        });
    }
    let p = (next.score - entry.offset) / entry.multiplier;
    Ok(p.clamp(0.0, entry.bid))
}

/// Number of halvings needed to shrink `[0, bid_hi]` below `tol`.
pub fn bisection_iterations(bid_hi: f64, tol: f64) -> u32 {
    if bid_hi <= tol {
        0
    } else {
        (bid_hi / tol).log2().ceil() as u32
    }
}

/// Exact critical bid by bisection: the smallest `z` in `[0, bid_hi]` with
/// `rank_fn(z) >= target`, to absolute tolerance `tol`.
///
/// `rank_fn` should be non-decreasing in the bid. If it is not, the result is
/// still some crossing point of the bracket.
pub fn price_exact_binary_search<F>(rank_fn: F, target: f64, bid_hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(target.is_finite() && bid_hi.is_finite() && tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bad bisection bracket: target {target}, bid_hi {bid_hi}, tol {tol}"
        )));
    }
    if target <= 0.0 || rank_fn(0.0) >= target {
        return Ok(0.0);
    }
    let score_hi = rank_fn(bid_hi);
    if score_hi.is_nan() || score_hi < target {
        return Err(Error::NoCriticalBid { score_hi, target });
    }
    let (mut lo, mut hi) = (0.0_f64, bid_hi);
    for _ in 0..bisection_iterations(bid_hi, tol) {
        let mid = 0.5 * (lo + hi);
        if rank_fn(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
