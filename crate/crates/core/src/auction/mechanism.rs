use serde::{Deserialize, Serialize};

use super::allocate::allocate;
use super::pricing::{price_by_multiplier, price_exact_binary_search, PricingConfig};
use super::score::{fixed_score_unchecked, gsp_quality, UgspWeights};
use super::types::{AdCandidate, AuctionOutcome, AuctionRequest, RankedEntry};
use crate::error::{ensure_finite, Result};
use crate::net::Actor;

/// Rank-score rule of an auction.
#[derive(Debug, Clone, Copy)]
pub enum Mechanism<'a> {
    /// `bid * pctr^sigma`.
    Gsp { sigma: f64 },
    /// Linear combination of eCPM and bid-free utility terms.
    Ugsp(UgspWeights),
    /// `bid * pi(bid, x)` from a trained multiplier network.
    DeepGsp(&'a Actor),
    /// The hand-set `(bid/10)^0.4 * pctr^0.7` toy score.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Pricing {
    /// Divide the next score by the winner's multiplier held fixed.
    #[default]
    Multiplier,
    /// Bisection for the exact critical bid.
    Exact,
    /// Charge the bid.
    FirstPrice,
}

impl Mechanism<'_> {
    pub fn validate(&self) -> Result<()> {
        match self {
            Mechanism::Gsp { sigma } => ensure_finite("sigma", *sigma),
            Mechanism::Ugsp(w) => w.validate(),
            Mechanism::DeepGsp(_) | Mechanism::Fixed => Ok(()),
        }
    }

    /// Score of `cand` had it bid `bid`, every feature unchanged.
    pub fn score_at(&self, cand: &AdCandidate, bid: f64) -> Result<f64> {
        Ok(match self {
            Mechanism::Gsp { sigma } => bid * gsp_quality(cand.pctr(), *sigma),
            Mechanism::Ugsp(w) => {
                let (slope, offset) =
                    w.slope_offset(cand.pctr(), cand.pacr(), cand.pcvr(), cand.price());
                bid * slope + offset
            }
            Mechanism::DeepGsp(actor) => actor.rank_score(bid, &cand.features)?,
            Mechanism::Fixed => fixed_score_unchecked(bid, cand.pctr()),
        })
    }

    /// Ranked entry of candidate `index` at its submitted bid.
    pub fn entry(&self, cand: &AdCandidate, index: usize) -> Result<RankedEntry> {
        let bid = cand.bid;
        Ok(match self {
            Mechanism::Gsp { sigma } => RankedEntry::multiplicative(
                cand.ad_id,
                index,
                bid,
                gsp_quality(cand.pctr(), *sigma),
            ),
            Mechanism::Ugsp(w) => {
                let (slope, offset) =
                    w.slope_offset(cand.pctr(), cand.pacr(), cand.pcvr(), cand.price());
                RankedEntry {
                    ad_id: cand.ad_id,
                    candidate: index,
                    bid,
                    score: bid * slope + offset,
                    multiplier: slope,
                    offset,
                }
            }
            Mechanism::DeepGsp(actor) => RankedEntry::multiplicative(
                cand.ad_id,
                index,
                bid,
                actor.multiplier(bid, &cand.features)?,
            ),
            Mechanism::Fixed => {
                let score = fixed_score_unchecked(bid, cand.pctr());
                RankedEntry {
                    ad_id: cand.ad_id,
                    candidate: index,
                    bid,
                    score,
                    multiplier: if bid > 0.0 { score / bid } else { 0.0 },
                    offset: 0.0,
                }
            }
        })
    }

    pub fn entries(&self, request: &AuctionRequest) -> Result<Vec<RankedEntry>> {
        request
            .candidates
            .iter()
            .enumerate()
            .map(|(i, c)| self.entry(c, i))
            .collect()
    }
}

/// Fills in winner prices on an allocated outcome.
pub fn price_outcome(
    request: &AuctionRequest,
    outcome: &mut AuctionOutcome,
    mechanism: &Mechanism<'_>,
    pricing: Pricing,
    cfg: &PricingConfig,
) -> Result<()> {
    for pos in 0..outcome.winners.len() {
        let entry = outcome.ranking[pos];
        let price = match pricing {
            Pricing::Multiplier => price_by_multiplier(&outcome.ranking, pos, cfg)?,
            Pricing::FirstPrice => entry.bid,
            Pricing::Exact => match outcome.ranking.get(pos + 1) {
                None => cfg.reserve_price.min(entry.bid),
                Some(next) => {
                    let cand = &request.candidates[entry.candidate];
                    let tol = (cfg.tol_rel * entry.bid).max(f64::MIN_POSITIVE);
                    let rank_fn = |z: f64| mechanism.score_at(cand, z).unwrap_or(f64::NAN);
                    price_exact_binary_search(rank_fn, next.score, entry.bid, tol)?
                }
            },
        };
        outcome.winners[pos].price_per_click = price;
    }
    Ok(())
}

/// Scores, allocates and prices one auction.
pub fn run_auction(
    request: &AuctionRequest,
    mechanism: &Mechanism<'_>,
    pricing: Pricing,
    cfg: &PricingConfig,
) -> Result<AuctionOutcome> {
    mechanism.validate()?;
    let entries = mechanism.entries(request)?;
    let mut outcome = allocate(request, &entries)?;
    price_outcome(request, &mut outcome, mechanism, pricing, cfg)?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::types::AdId;
    use approx::assert_abs_diff_eq;

    fn toy_request() -> AuctionRequest {
        let c = |id, bid, pctr| AdCandidate::with_pctr(AdId(id), bid, pctr, 0);
        AuctionRequest {
            candidates: vec![c(1, 10.0, 0.1), c(2, 2.4, 0.2), c(3, 1.3, 0.3)],
            slots: 2,
            slot_ctr_factors: vec![1.0, 1.0],
        }
    }

    /// Expected revenue and CTR under the `PPC * pCTR` convention.
    fn totals(req: &AuctionRequest, out: &AuctionOutcome) -> (f64, f64) {
        out.winners.iter().fold((0.0, 0.0), |(rev, ctr), w| {
            let p = req.candidates[w.candidate].pctr();
            (rev + w.price_per_click * p, ctr + p)
        })
    }

    #[test]
    fn toy_gsp_totals() {
        let req = toy_request();
        let out = run_auction(
            &req,
            &Mechanism::Gsp { sigma: 1.0 },
            Pricing::Multiplier,
            &PricingConfig::default(),
        )
        .unwrap();
        let (rev, ctr) = totals(&req, &out);
        assert_abs_diff_eq!(rev, 0.87, epsilon = 1e-12);
        assert_abs_diff_eq!(ctr, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn toy_fixed_totals() {
        let req = toy_request();
        let out = run_auction(
            &req,
            &Mechanism::Fixed,
            Pricing::Multiplier,
            &PricingConfig::default(),
        )
        .unwrap();
        let (rev, ctr) = totals(&req, &out);
        assert_abs_diff_eq!(rev, 1.329, epsilon = 0.005);
        assert_abs_diff_eq!(ctr, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn everyone_wins_when_slots_equal_candidates() {
        let mut req = toy_request();
        req.slots = 3;
        req.slot_ctr_factors = vec![1.0, 0.8, 0.5];
        let cfg = PricingConfig {
            reserve_price: 0.2,
            ..PricingConfig::default()
        };
        let out = run_auction(
            &req,
            &Mechanism::Gsp { sigma: 1.0 },
            Pricing::Multiplier,
            &cfg,
        )
        .unwrap();
        assert_eq!(out.winners.len(), 3);
        assert!(out.losers.is_empty());
        assert_eq!(out.winners[2].price_per_click, 0.2);
    }

    #[test]
    fn exact_and_multiplier_agree_for_gsp_and_ugsp() {
        let mut req = toy_request();
        for c in &mut req.candidates {
            c.features[crate::auction::types::feature::PCVR] = 0.05;
        }
        let cfg = PricingConfig::default();
        let ugsp = UgspWeights::new(0.7, 0.2, 0.4);
        for mech in [Mechanism::Gsp { sigma: 1.4 }, Mechanism::Ugsp(ugsp)] {
            let a = run_auction(&req, &mech, Pricing::Multiplier, &cfg).unwrap();
            let b = run_auction(&req, &mech, Pricing::Exact, &cfg).unwrap();
            for (x, y) in a.winners.iter().zip(&b.winners) {
                let bid = req.candidates[x.candidate].bid;
                assert!((x.price_per_click - y.price_per_click).abs() <= 1e-6 * bid);
            }
        }
    }

    #[test]
    fn first_price_charges_bid() {
        let req = toy_request();
        let out = run_auction(
            &req,
            &Mechanism::Gsp { sigma: 1.0 },
            Pricing::FirstPrice,
            &PricingConfig::default(),
        )
        .unwrap();
        assert_eq!(out.winners[0].price_per_click, 10.0);
    }
}
