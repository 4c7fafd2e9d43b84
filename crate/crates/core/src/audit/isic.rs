use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::auction::{
    allocate, price_outcome, AdId, AuctionRequest, Mechanism, Pricing, PricingConfig, RankedEntry,
};
use crate::error::{Error, Result};
use crate::sim::World;

/// Denominators below this are treated as zero.
pub const MIN_DENOMINATOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsicReport {
    pub alpha: f64,
    /// Pooled estimate; `None` when the denominator vanishes.
    pub value: Option<f64>,
    pub samples: usize,
    pub numerator: f64,
    pub denominator: f64,
    pub per_advertiser: Vec<(AdId, Option<f64>)>,
}

/// `(allocated, bid * allocated - payment)` for candidate `i` bidding `bid`,
/// everyone else unchanged.
fn outcome_at(
    req: &AuctionRequest,
    entries: &[RankedEntry],
    mechanism: &Mechanism<'_>,
    pricing: Pricing,
    cfg: &PricingConfig,
    i: usize,
    bid: f64,
) -> Result<(f64, f64)> {
    let mut cand = req.candidates[i].clone();
    cand.bid = bid;
    let mut entries = entries.to_vec();
    entries[i] = mechanism.entry(&cand, i)?;
    let mut out = allocate(req, &entries)?;
    price_outcome(req, &mut out, mechanism, pricing, cfg)?;
    Ok(match out.winner_of(i) {
        Some(w) => (1.0, bid - w.price_per_click),
        None => (0.0, 0.0),
    })
}

/// Per-sample terms `(u(+), u(-), v * x(v))`.
type Terms = (f64, f64, f64);

#[allow(clippy::too_many_arguments)]
fn sample_terms(
    world: &World,
    mechanism: &Mechanism<'_>,
    pricing: Pricing,
    cfg: &PricingConfig,
    alpha: f64,
    plus_seed: u64,
    minus_seed: u64,
    round: u64,
) -> Result<Vec<Terms>> {
    let plus_req = world.round(plus_seed, round).request;
    let minus_req = if minus_seed == plus_seed {
        plus_req.clone()
    } else {
        world.round(minus_seed, round).request
    };
    let plus_entries = mechanism.entries(&plus_req)?;
    let minus_entries = if minus_seed == plus_seed {
        plus_entries.clone()
    } else {
        mechanism.entries(&minus_req)?
    };
    (0..plus_req.candidates.len())
        .map(|i| {
            let v = plus_req.candidates[i].value;
            let (_, up) = outcome_at(
                &plus_req,
                &plus_entries,
                mechanism,
                pricing,
                cfg,
                i,
                (1.0 + alpha) * v,
            )?;
            let (x, _) = outcome_at(&plus_req, &plus_entries, mechanism, pricing, cfg, i, v)?;
            let vm = minus_req.candidates[i].value;
            let (_, down) = outcome_at(
                &minus_req,
                &minus_entries,
                mechanism,
                pricing,
                cfg,
                i,
                (1.0 - alpha) * vm,
            )?;
            Ok((up, down, v * x))
        })
        .collect()
}

fn check(world: &World, alpha: f64, samples: usize) -> Result<usize> {
    if world.config.slots != 1 {
        return Err(Error::InvalidInput(format!(
            "i-SIC is defined for single-slot auctions, world has {} slots",
            world.config.slots
        )));
    }
    if !(alpha > 0.0 && alpha <= 0.05) {
        return Err(Error::InvalidInput(format!(
            "perturbation {alpha} outside (0, 0.05]"
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidInput(
            "i-SIC needs at least one sample".into(),
        ));
    }
    Ok(samples.div_ceil(world.n_advertisers()))
}

#[allow(clippy::too_many_arguments)]
fn collect_terms(
    world: &World,
    mechanism: &Mechanism<'_>,
    pricing: Pricing,
    cfg: &PricingConfig,
    alpha: f64,
    rounds: usize,
    plus_seed: u64,
    minus_seed: u64,
) -> Result<Vec<Vec<Terms>>> {
    (0..rounds as u64)
        .into_par_iter()
        .map(|r| {
            sample_terms(
                world, mechanism, pricing, cfg, alpha, plus_seed, minus_seed, r,
            )
        })
        .collect()
}

/// Symmetric-perturbation incentive-compatibility score over valuations
/// drawn from the world. Every (request, advertiser) pair is one sample and is
/// replayed at bids `v`, `(1+alpha) v`, `(1-alpha) v` on the same request.
pub fn i_sic(
    world: &World,
    mechanism: &Mechanism<'_>,
    pricing: Pricing,
    cfg: &PricingConfig,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<IsicReport> {
    let rounds = check(world, alpha, samples)?;
    mechanism.validate()?;
    let terms = collect_terms(world, mechanism, pricing, cfg, alpha, rounds, seed, seed)?;
    let n = world.n_advertisers();
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    for row in &terms {
        for (i, (up, down, vx)) in row.iter().enumerate() {
            num[i] += up - down;
            den[i] += vx;
        }
    }
    let ratio = |a: f64, d: f64| (d > MIN_DENOMINATOR).then(|| a / (2.0 * alpha * d));
    let numerator: f64 = num.iter().sum();
    let denominator: f64 = den.iter().sum();
    Ok(IsicReport {
        alpha,
        value: ratio(numerator, denominator),
        samples: rounds * n,
        numerator: numerator / (rounds * n) as f64,
        denominator: denominator / (rounds * n) as f64,
        per_advertiser: world
            .advertisers
            .iter()
            .zip(num.iter().zip(&den))
            .map(|(a, (&x, &d))| (a.id, ratio(x, d)))
            .collect(),
    })
}

/// Sample variances of the per-sample utility difference with the two
/// perturbations sharing a request (paired) and drawn from independent
/// requests (unpaired).
pub fn paired_unpaired_variance(
    world: &World,
    mechanism: &Mechanism<'_>,
    pricing: Pricing,
    cfg: &PricingConfig,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let rounds = check(world, alpha, samples)?;
    let var = |terms: Vec<Vec<Terms>>| {
        let d: Vec<f64> = terms.into_iter().flatten().map(|(u, l, _)| u - l).collect();
        let m = d.iter().sum::<f64>() / d.len() as f64;
        d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (d.len() as f64 - 1.0).max(1.0)
    };
    let paired = collect_terms(world, mechanism, pricing, cfg, alpha, rounds, seed, seed)?;
    let unpaired = collect_terms(
        world,
        mechanism,
        pricing,
        cfg,
        alpha,
        rounds,
        seed,
        seed ^ 0x5EED_u64.rotate_left(40),
    )?;
    Ok((var(paired), var(unpaired)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::WorldConfig;

    fn single_slot() -> World {
        World::build(WorldConfig {
            slots: 1,
            slot_factors: vec![1.0],
            calibration_rounds: 100,
            ..WorldConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn requires_single_slot_and_small_alpha() {
        let multi = World::build(WorldConfig {
            calibration_rounds: 10,
            ..WorldConfig::default()
        })
        .unwrap();
        let m = Mechanism::Gsp { sigma: 1.0 };
        let cfg = PricingConfig::default();
        assert!(i_sic(&multi, &m, Pricing::Exact, &cfg, 0.01, 100, 0).is_err());
        assert!(i_sic(&single_slot(), &m, Pricing::Exact, &cfg, 0.2, 100, 0).is_err());
    }

    #[test]
    fn truthful_auction_scores_near_one() {
        let w = single_slot();
        let r = i_sic(
            &w,
            &Mechanism::Gsp { sigma: 1.0 },
            Pricing::Exact,
            &PricingConfig::default(),
            0.01,
            20_000,
            3,
        )
        .unwrap();
        let v = r.value.unwrap();
        assert!((v - 1.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn first_price_scores_below_truthful() {
        let w = single_slot();
        let cfg = PricingConfig::default();
        let m = Mechanism::Gsp { sigma: 1.0 };
        let fp = i_sic(&w, &m, Pricing::FirstPrice, &cfg, 0.01, 5_000, 3)
            .unwrap()
            .value
            .unwrap();
        let sp = i_sic(&w, &m, Pricing::Exact, &cfg, 0.01, 5_000, 3)
            .unwrap()
            .value
            .unwrap();
        assert!(fp < sp, "{fp} vs {sp}");
    }

    #[test]
    fn deterministic_under_seed() {
        let w = single_slot();
        let cfg = PricingConfig::default();
        let m = Mechanism::Gsp { sigma: 0.8 };
        assert_eq!(
            i_sic(&w, &m, Pricing::Multiplier, &cfg, 0.01, 800, 9).unwrap(),
            i_sic(&w, &m, Pricing::Multiplier, &cfg, 0.01, 800, 9).unwrap()
        );
    }

    #[test]
    fn pairing_reduces_variance() {
        let w = single_slot();
        let (p, u) = paired_unpaired_variance(
            &w,
            &Mechanism::Gsp { sigma: 1.0 },
            Pricing::Exact,
            &PricingConfig::default(),
            0.01,
            4_000,
            5,
        )
        .unwrap();
        assert!(p <= u, "{p} vs {u}");
    }
}
