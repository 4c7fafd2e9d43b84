use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::{BiddingMode, WorldConfig};
use super::metrics::Normalizers;
use crate::auction::{feature, AdCandidate, AdId, AuctionRequest};
use crate::error::{Error, Result};

/// Independent random-stream domains. A stream is identified by
/// `(seed, domain, index)`, so results never depend on how work is split
/// across threads.
pub mod domain {
    pub const WORLD: u64 = 0x57_4f52_4c44;
    pub const REQUEST: u64 = 0x52_4551;
    pub const FEEDBACK: u64 = 0x46_4542;
    pub const EXPLORE: u64 = 0x45_5850;
    pub const INIT: u64 = 0x49_4e49;
    pub const AUDIT: u64 = 0x41_5544;
}

pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Persistent per-advertiser market parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Advertiser {
    pub id: AdId,
    pub value_log_mean: f64,
    pub base_ctr: f64,
    pub cart_given_click: f64,
    pub order_given_click: f64,
    pub product_price: f64,
    pub budget: f64,
    pub category: usize,
    /// Log-biases of the pCTR, pACR and pCVR predictors for this advertiser.
    pub prediction_bias: [f64; 3],
}

/// True response rates per candidate of one request. Only the feedback oracle reads it.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub(crate) ctr: Vec<f64>,
    pub(crate) acr: Vec<f64>,
    pub(crate) cvr: Vec<f64>,
}

impl GroundTruth {
    pub fn new(ctr: Vec<f64>, acr: Vec<f64>, cvr: Vec<f64>) -> Result<Self> {
        if ctr.len() != acr.len() || ctr.len() != cvr.len() {
            return Err(Error::Shape("ground-truth vectors differ in length".into()));
        }
        if ctr
            .iter()
            .chain(&acr)
            .chain(&cvr)
            .any(|p| !(0.0..=1.0).contains(p))
        {
            return Err(Error::InvalidInput(
                "ground-truth rate outside [0,1]".into(),
            ));
        }
        Ok(Self { ctr, acr, cvr })
    }

    pub fn ctr(&self, candidate: usize) -> f64 {
        self.ctr[candidate]
    }

    pub fn acr(&self, candidate: usize) -> f64 {
        self.acr[candidate]
    }

    pub fn cvr(&self, candidate: usize) -> f64 {
        self.cvr[candidate]
    }

    pub fn len(&self) -> usize {
        self.ctr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ctr.is_empty()
    }
}

/// A sampled auction together with its hidden ground truth.
#[derive(Debug, Clone)]
pub struct Round {
    pub index: u64,
    pub request: AuctionRequest,
    pub truth: GroundTruth,
}

/// A realized synthetic market: config, advertisers and metric normalizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub config: WorldConfig,
    pub advertisers: Vec<Advertiser>,
    /// Category embeddings that drive the user interaction term.
    pub category_embeddings: Vec<Vec<f64>>,
    pub normalizers: Normalizers,
}

impl World {
    /// Draws advertisers from `config.seed` and calibrates the metric normalizers
    /// against squashed GSP with exponent 1.
    pub fn build(config: WorldConfig) -> Result<Self> {
        config.validate()?;
        let mut world = Self::draw(config)?;
        world.normalizers = super::eval::calibrate_normalizers(&world)?;
        Ok(world)
    }

    /// Advertisers only; normalizers left at 1.
    pub fn draw(config: WorldConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = stream(config.seed, domain::WORLD, 0);
        let m = config.user_features;
        let category_embeddings: Vec<Vec<f64>> = (0..config.n_categories)
            .map(|_| {
                (0..m)
                    .map(|_| normal(&mut rng) / (m.max(1) as f64).sqrt())
                    .collect()
            })
            .collect();
        let beta = |b: super::config::BetaParams| {
            Beta::new(b.alpha, b.beta).map_err(|e| Error::Config(e.to_string()))
        };
        let ctr = beta(config.ctr)?;
        let cart = beta(config.cart_given_click)?;
        let order = beta(config.order_given_click)?;
        let advertisers = (0..config.n_advertisers)
            .map(|i| Advertiser {
                id: AdId(i as u32 + 1),
                value_log_mean: config.value_log_mean
                    + config.value_log_mean_spread * normal(&mut rng),
                base_ctr: ctr.sample(&mut rng),
                cart_given_click: cart.sample(&mut rng),
                order_given_click: order.sample(&mut rng),
                product_price: (config.price_log_mean + config.price_log_sd * normal(&mut rng))
                    .exp(),
                budget: (5.0 + 0.5 * normal(&mut rng)).exp(),
                category: i % config.n_categories,
                prediction_bias: [
                    config.prediction_bias * normal(&mut rng),
                    config.prediction_bias * normal(&mut rng),
                    config.prediction_bias * normal(&mut rng),
                ],
            })
            .collect();
        Ok(Self {
            config,
            advertisers,
            category_embeddings,
            normalizers: Normalizers::unit(),
        })
    }

    pub fn feature_len(&self) -> usize {
        self.config.feature_len()
    }

    pub fn n_advertisers(&self) -> usize {
        self.advertisers.len()
    }

    pub fn slot_factors(&self) -> &[f64] {
        &self.config.slot_factors
    }

    /// Draws one request: valuations, bids, true rates and noisy predictions.
    pub fn sample_request<R: Rng + ?Sized>(&self, rng: &mut R) -> (AuctionRequest, GroundTruth) {
        let cfg = &self.config;
        let user: Vec<f64> = (0..cfg.user_features).map(|_| normal(rng)).collect();
        let n = self.advertisers.len();
        let mut candidates = Vec::with_capacity(n);
        let (mut t_ctr, mut t_acr, mut t_cvr) = (
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        );
        let nu = cfg.prediction_noise;
        for adv in &self.advertisers {
            let value = (adv.value_log_mean + cfg.value_log_sd * normal(rng)).exp();
            let bid = match cfg.bidding {
                BiddingMode::Truthful => value,
                BiddingMode::Shaded(f) => f * value,
            };
            let emb = &self.category_embeddings[adv.category];
            let affinity: f64 = user.iter().zip(emb).map(|(u, w)| u * w).sum();
            let norm2: f64 = emb.iter().map(|w| w * w).sum();
            let a = cfg.user_affinity;
            let ctr = (adv.base_ctr * (a * affinity - 0.5 * a * a * norm2).exp()).min(1.0);
            let acr = ctr * adv.cart_given_click;
            let cvr = ctr * adv.order_given_click;
            let mut predict = |truth: f64, bias: f64| -> f64 {
                (truth * (bias + nu * normal(rng) - 0.5 * nu * nu).exp()).clamp(0.0, 1.0)
            };
            let pctr = predict(ctr, adv.prediction_bias[0]);
            let pacr = predict(acr, adv.prediction_bias[1]);
            let pcvr = predict(cvr, adv.prediction_bias[2]);

            let mut features = vec![0.0; feature::len(cfg.user_features)];
            features[feature::PCTR] = pctr;
            features[feature::PACR] = pacr;
            features[feature::PCVR] = pcvr;
            features[feature::PRICE] = adv.product_price;
            features[feature::BUDGET] = adv.budget;
            features[feature::CATEGORY] = adv.category as f64;
            features[feature::USER_START..].copy_from_slice(&user);
            candidates.push(AdCandidate {
                ad_id: adv.id,
                bid,
                value,
                features,
            });
            t_ctr.push(ctr);
            t_acr.push(acr);
            t_cvr.push(cvr);
        }
        let request = AuctionRequest {
            candidates,
            slots: cfg.slots,
            slot_ctr_factors: cfg.slot_factors.clone(),
        };
        let truth = GroundTruth {
            ctr: t_ctr,
            acr: t_acr,
            cvr: t_cvr,
        };
        (request, truth)
    }

    /// The same market with only the top slot on offer.
    pub fn single_slot(&self) -> World {
        let mut w = self.clone();
        w.config.slots = 1;
        w.config.slot_factors = vec![self.config.slot_factors[0]];
        w
    }

    /// Round `index` of the request stream seeded by `seed`.
    pub fn round(&self, seed: u64, index: u64) -> Round {
        let (request, truth) = self.sample_request(&mut stream(seed, domain::REQUEST, index));
        Round {
            index,
            request,
            truth,
        }
    }

    /// Stable hash of the realized world, for cache keys.
    pub fn fingerprint(&self) -> u64 {
        let text = fingerprint_text(self);
        fnv1a(text.as_bytes())
    }
}

fn fingerprint_text(world: &World) -> String {
    // Debug output of plain data is stable across runs of the same build.
    format!(
        "{:?}|{:?}|{:?}",
        world.config, world.advertisers, world.normalizers
    )
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_world(noise: f64) -> World {
        World::draw(WorldConfig {
            prediction_noise: noise,
            prediction_bias: 0.0,
            ..WorldConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn zero_noise_predictions_are_exact() {
        let w = small_world(0.0);
        let r = w.round(1, 0);
        for (i, c) in r.request.candidates.iter().enumerate() {
            assert!((c.pctr() - r.truth.ctr(i)).abs() < 1e-15);
            assert!((c.pcvr() - r.truth.cvr(i)).abs() < 1e-15);
        }
    }

    #[test]
    fn truthful_bids_equal_values() {
        let w = small_world(0.2);
        for i in 0..20 {
            let r = w.round(4, i);
            assert!(r.request.candidates.iter().all(|c| c.bid == c.value));
        }
    }

    #[test]
    fn shaded_bids() {
        let w = World::draw(WorldConfig {
            bidding: BiddingMode::Shaded(0.8),
            ..WorldConfig::default()
        })
        .unwrap();
        let r = w.round(4, 0);
        assert!(r
            .request
            .candidates
            .iter()
            .all(|c| (c.bid - 0.8 * c.value).abs() < 1e-12));
    }

    #[test]
    fn same_seed_same_request() {
        let w = small_world(0.2);
        let a = w.round(9, 17);
        let b = w.round(9, 17);
        assert_eq!(a.request, b.request);
        assert_eq!(a.truth, b.truth);
        assert_ne!(w.round(9, 18).request, a.request);
    }

    #[test]
    fn sampled_requests_are_valid() {
        let w = small_world(0.3);
        for i in 0..200 {
            let r = w.round(2, i);
            r.request.validate().unwrap();
            for j in 0..r.truth.len() {
                assert!(r.truth.acr(j) <= r.truth.ctr(j) && r.truth.cvr(j) <= r.truth.ctr(j));
            }
        }
    }

    #[test]
    fn world_draw_is_deterministic() {
        let a = World::draw(WorldConfig::default()).unwrap();
        let b = World::draw(WorldConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
    }
}
