use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Opaque advertiser identifier. Ordering is used as the last tie-breaker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AdId(pub u32);

impl fmt::Display for AdId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ad{}", self.0)
    }
}

/// Positions inside a candidate feature vector.
///
/// Layout: `pctr, pacr, pcvr, product_price, budget_remaining, category_index, user_1..m`.
pub mod feature {
    pub const PCTR: usize = 0;
    pub const PACR: usize = 1;
    pub const PCVR: usize = 2;
    pub const PRICE: usize = 3;
    pub const BUDGET: usize = 4;
    pub const CATEGORY: usize = 5;
    pub const USER_START: usize = 6;

    pub const fn len(user_features: usize) -> usize {
        USER_START + user_features
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdCandidate {
    pub ad_id: AdId,
    pub bid: f64,
    /// Private per-click valuation. Only the simulator knows it.
    pub value: f64,
    pub features: Vec<f64>,
}

impl AdCandidate {
    /// Candidate with only a predicted CTR set; every other feature is zero.
    pub fn with_pctr(ad_id: AdId, bid: f64, pctr: f64, user_features: usize) -> Self {
        let mut features = vec![0.0; feature::len(user_features)];
        features[feature::PCTR] = pctr;
        Self {
            ad_id,
            bid,
            value: bid,
            features,
        }
    }

    pub fn pctr(&self) -> f64 {
        self.features[feature::PCTR]
    }

    pub fn pacr(&self) -> f64 {
        self.features[feature::PACR]
    }

    pub fn pcvr(&self) -> f64 {
        self.features[feature::PCVR]
    }

    pub fn price(&self) -> f64 {
        self.features[feature::PRICE]
    }

    pub fn validate(&self, feature_len: usize) -> Result<()> {
        ensure_finite("bid", self.bid)?;
        ensure_finite("value", self.value)?;
        if self.bid < 0.0 {
            return Err(Error::InvalidInput(format!(
                "{}: negative bid {}",
                self.ad_id, self.bid
            )));
        }
        if self.features.len() != feature_len {
            return Err(Error::InvalidInput(format!(
                "{}: expected {} features, got {}",
                self.ad_id,
                feature_len,
                self.features.len()
            )));
        }
        for (i, &x) in self.features.iter().enumerate() {
            ensure_finite("feature", x)?;
            let is_rate = matches!(i, feature::PCTR | feature::PACR | feature::PCVR);
            if is_rate && !(0.0..=1.0).contains(&x) {
                return Err(Error::InvalidInput(format!(
                    "{}: rate feature {i} = {x} outside [0,1]",
                    self.ad_id
                )));
            }
        }
        if self.price() < 0.0 {
            return Err(Error::InvalidInput(format!(
                "{}: negative product price",
                self.ad_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionRequest {
    pub candidates: Vec<AdCandidate>,
    pub slots: usize,
    pub slot_ctr_factors: Vec<f64>,
}

impl AuctionRequest {
    pub fn validate(&self) -> Result<()> {
        let n = self.candidates.len();
        if n == 0 {
            return Err(Error::InvalidInput(
                "auction needs at least one candidate".into(),
            ));
        }
        if self.slots == 0 || self.slots > n {
            return Err(Error::InvalidInput(format!(
                "slots must be in 1..={n}, got {}",
                self.slots
            )));
        }
        if self.slot_ctr_factors.len() != self.slots {
            return Err(Error::InvalidInput(format!(
                "expected {} slot factors, got {}",
                self.slots,
                self.slot_ctr_factors.len()
            )));
        }
        validate_slot_factors(&self.slot_ctr_factors)?;
        let feature_len = self.candidates[0].features.len();
        for c in &self.candidates {
            c.validate(feature_len)?;
        }
        Ok(())
    }
}

pub(crate) fn validate_slot_factors(beta: &[f64]) -> Result<()> {
    for (k, &b) in beta.iter().enumerate() {
        if !(b > 0.0 && b <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "slot factor {k} = {b} outside (0,1]"
            )));
        }
        if k > 0 && b > beta[k - 1] {
            return Err(Error::InvalidInput(
                "slot factors must be non-increasing".into(),
            ));
        }
    }
    Ok(())
}

/// One candidate's position in the ranking.
///
/// The score is affine in the bid: `score = bid * multiplier + offset`. Every
/// multiplicative mechanism (GSP, Deep GSP, the fixed toy score) has `offset == 0`;
/// only the utility-augmented GSP carries a bid-independent term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub ad_id: AdId,
    /// Index into `AuctionRequest::candidates`.
    pub candidate: usize,
    pub bid: f64,
    pub score: f64,
    pub multiplier: f64,
    pub offset: f64,
}

impl RankedEntry {
    pub fn multiplicative(ad_id: AdId, candidate: usize, bid: f64, multiplier: f64) -> Self {
        Self {
            ad_id,
            candidate,
            bid,
            score: bid * multiplier,
            multiplier,
            offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Winner {
    pub ad_id: AdId,
    pub candidate: usize,
    /// 1-based slot index.
    pub slot: usize,
    pub price_per_click: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    pub winners: Vec<Winner>,
    pub losers: Vec<AdId>,
    pub ranking: Vec<RankedEntry>,
}

impl AuctionOutcome {
    /// Slot (1-based) held by the candidate at `candidate` index, or `None` if it lost.
    pub fn slot_of(&self, candidate: usize) -> Option<usize> {
        self.winners
            .iter()
            .find(|w| w.candidate == candidate)
            .map(|w| w.slot)
    }

    pub fn winner_of(&self, candidate: usize) -> Option<&Winner> {
        self.winners.iter().find(|w| w.candidate == candidate)
    }
}
