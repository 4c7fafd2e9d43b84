use std::cmp::Ordering;

use super::types::{AuctionOutcome, AuctionRequest, RankedEntry, Winner};
use crate::error::{Error, Result};

/// Ranking order: score descending, then bid descending, then ad id ascending.
pub fn rank_order(a: &RankedEntry, b: &RankedEntry) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| b.bid.total_cmp(&a.bid))
        .then_with(|| a.ad_id.cmp(&b.ad_id))
}

/// Sorts candidates by rank score and hands slots `1..=K` to the top K.
///
/// `scores` must hold one entry per candidate. Winner prices are left at zero;
/// a pricing rule fills them in.
pub fn allocate(request: &AuctionRequest, scores: &[RankedEntry]) -> Result<AuctionOutcome> {
    let n = request.candidates.len();
    if scores.len() != n {
        return Err(Error::ScoreCountMismatch {
            expected: n,
            got: scores.len(),
        });
    }
    let mut ranking = scores.to_vec();
    ranking.sort_by(rank_order);

    let k = request.slots.min(n);
    let winners = ranking[..k]
        .iter()
        .enumerate()
        .map(|(pos, e)| Winner {
            ad_id: e.ad_id,
            candidate: e.candidate,
            slot: pos + 1,
            price_per_click: 0.0,
        })
        .collect();
    let losers = ranking[k..].iter().map(|e| e.ad_id).collect();
    Ok(AuctionOutcome {
        winners,
        losers,
        ranking,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::types::{AdCandidate, AdId};

    fn request(bids: &[f64], pctrs: &[f64], slots: usize) -> AuctionRequest {
        let candidates = bids
            .iter()
            .zip(pctrs)
            .enumerate()
            .map(|(i, (&b, &p))| AdCandidate::with_pctr(AdId(i as u32 + 1), b, p, 0))
            .collect();
        AuctionRequest {
            candidates,
            slots,
            slot_ctr_factors: vec![1.0; slots],
        }
    }

    fn entries(req: &AuctionRequest, scores: &[f64]) -> Vec<RankedEntry> {
        req.candidates
            .iter()
            .zip(scores)
            .enumerate()
            .map(|(i, (c, &s))| RankedEntry {
                ad_id: c.ad_id,
                candidate: i,
                bid: c.bid,
                score: s,
                multiplier: if c.bid > 0.0 { s / c.bid } else { 0.0 },
                offset: 0.0,
            })
            .collect()
    }

    #[test]
    fn toy_gsp_ranking() {
        let req = request(&[10.0, 2.4, 1.3], &[0.1, 0.2, 0.3], 2);
        let out = allocate(&req, &entries(&req, &[1.0, 0.48, 0.39])).unwrap();
        let ids: Vec<_> = out.winners.iter().map(|w| (w.ad_id.0, w.slot)).collect();
        assert_eq!(ids, vec![(1, 1), (2, 2)]);
        assert_eq!(out.losers, vec![AdId(3)]);
    }

    #[test]
    fn toy_fixed_score_ranking() {
        let req = request(&[10.0, 2.4, 1.3], &[0.1, 0.2, 0.3], 2);
        let out = allocate(&req, &entries(&req, &[0.199, 0.183, 0.190])).unwrap();
        let ids: Vec<_> = out.winners.iter().map(|w| (w.ad_id.0, w.slot)).collect();
        assert_eq!(ids, vec![(1, 1), (3, 2)]);
        assert_eq!(out.losers, vec![AdId(2)]);
    }

    #[test]
    fn single_candidate_wins() {
        let req = request(&[3.0], &[0.2], 1);
        let out = allocate(&req, &entries(&req, &[0.6])).unwrap();
        assert_eq!(out.winners.len(), 1);
        assert_eq!(out.winners[0].slot, 1);
        assert!(out.losers.is_empty());
    }

    #[test]
    fn ties_break_on_bid_then_id() {
        let req = request(&[1.0, 2.0, 2.0], &[0.5, 0.25, 0.25], 3);
        let out = allocate(&req, &entries(&req, &[0.5, 0.5, 0.5])).unwrap();
        let ids: Vec<_> = out.winners.iter().map(|w| w.ad_id.0).collect();
        assert_eq!(ids, vec![2, 3, 1]);
    }

    #[test]
    fn score_count_mismatch() {
        let req = request(&[1.0, 2.0], &[0.5, 0.5], 1);
        let e = entries(&req, &[0.5, 1.0]);
        assert!(matches!(
            allocate(&req, &e[..1]),
            Err(Error::ScoreCountMismatch {
                expected: 2,
                got: 1
            })
        ));
    }
}
