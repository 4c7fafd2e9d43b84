use rand::Rng;
use serde::{Deserialize, Serialize};

use super::world::GroundTruth;
use crate::auction::{AdId, AuctionOutcome, AuctionRequest};
use crate::error::{Error, Result};

/// Realized user behavior on one displayed ad.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub round: u64,
    pub ad_id: AdId,
    pub candidate: usize,
    pub slot: usize,
    pub bid: f64,
    pub value: f64,
    pub pctr: f64,
    pub score: f64,
    pub price_per_click: f64,
    pub product_price: f64,
    pub clicked: bool,
    pub carted: bool,
    pub ordered: bool,
}

impl FeedbackRecord {
    /// Pay-per-click charge.
    pub fn payment(&self) -> f64 {
        if self.clicked {
            self.price_per_click
        } else {
            0.0
        }
    }

    pub fn gmv(&self) -> f64 {
        if self.ordered {
            self.product_price
        } else {
            0.0
        }
    }

    /// `value - price` on a click, zero otherwise.
    pub fn utility(&self) -> f64 {
        if self.clicked {
            self.value - self.price_per_click
        } else {
            0.0
        }
    }
}

fn check_slots(
    request: &AuctionRequest,
    outcome: &AuctionOutcome,
    truth: &GroundTruth,
) -> Result<()> {
    if truth.len() != request.candidates.len() {
        return Err(Error::Shape(format!(
            "ground truth covers {} candidates, request has {}",
            truth.len(),
            request.candidates.len()
        )));
    }
    if let Some(w) = outcome
        .winners
        .iter()
        .find(|w| w.slot == 0 || w.slot > request.slot_ctr_factors.len())
    {
        return Err(Error::InvalidInput(format!(
            "{} placed in slot {} without a CTR factor",
            w.ad_id, w.slot
        )));
    }
    Ok(())
}

/// Conditional probability of a funnel step given a click, capped at 1.
fn given_click(rate: f64, ctr: f64) -> f64 {
    if ctr > 0.0 {
        (rate / ctr).min(1.0)
    } else {
        0.0
    }
}

/// Draws click, cart and order for every winner. Each winner consumes exactly
/// three uniforms, in slot order, so replays with the same stream share randomness.
pub fn simulate_feedback<R: Rng + ?Sized>(
    round: u64,
    request: &AuctionRequest,
    outcome: &AuctionOutcome,
    truth: &GroundTruth,
    rng: &mut R,
) -> Result<Vec<FeedbackRecord>> {
    check_slots(request, outcome, truth)?;
    let mut out = Vec::with_capacity(outcome.winners.len());
    for (pos, w) in outcome.winners.iter().enumerate() {
        let cand = &request.candidates[w.candidate];
        let ctr = truth.ctr(w.candidate);
        let (u_click, u_cart, u_order): (f64, f64, f64) =
            (rng.random(), rng.random(), rng.random());
        let clicked = u_click < request.slot_ctr_factors[w.slot - 1] * ctr;
        let carted = clicked && u_cart < given_click(truth.acr(w.candidate), ctr);
        let ordered = clicked && u_order < given_click(truth.cvr(w.candidate), ctr);
        out.push(FeedbackRecord {
            round,
            ad_id: w.ad_id,
            candidate: w.candidate,
            slot: w.slot,
            bid: cand.bid,
            value: cand.value,
            pctr: cand.pctr(),
            score: outcome.ranking[pos].score,
            price_per_click: w.price_per_click,
            product_price: cand.price(),
            clicked,
            carted,
            ordered,
        });
    }
    Ok(out)
}

/// Expected behavior on one displayed ad: the probabilities the sampled
/// records are drawn with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedImpression {
    pub candidate: usize,
    pub click: f64,
    pub cart: f64,
    pub order: f64,
    pub payment: f64,
    pub gmv: f64,
    pub utility: f64,
}

pub fn expected_feedback(
    request: &AuctionRequest,
    outcome: &AuctionOutcome,
    truth: &GroundTruth,
) -> Result<Vec<ExpectedImpression>> {
    check_slots(request, outcome, truth)?;
    Ok(outcome
        .winners
        .iter()
        .map(|w| {
            let cand = &request.candidates[w.candidate];
            let ctr = truth.ctr(w.candidate);
            let click = request.slot_ctr_factors[w.slot - 1] * ctr;
            let cart = click * given_click(truth.acr(w.candidate), ctr);
            let order = click * given_click(truth.cvr(w.candidate), ctr);
            ExpectedImpression {
                candidate: w.candidate,
                click,
                cart,
                order,
                payment: click * w.price_per_click,
                gmv: order * cand.price(),
                utility: click * (cand.value - w.price_per_click),
            }
        })
        .collect())
}
