use serde::{Deserialize, Serialize};

use crate::auction::types::validate_slot_factors;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiddingMode {
    Truthful,
    /// Bid a fixed fraction of the valuation.
    Shaded(f64),
}

/// Shape parameters of a Beta distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub const fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

/// Synthetic market description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub n_advertisers: usize,
    pub slots: usize,
    pub slot_factors: Vec<f64>,
    pub user_features: usize,
    pub n_categories: usize,

    /// Mean of log-valuation, averaged over advertisers.
    pub value_log_mean: f64,
    /// Spread of per-advertiser log-valuation means.
    pub value_log_mean_spread: f64,
    /// Per-request dispersion of an advertiser's log-valuation.
    pub value_log_sd: f64,

    /// Per-advertiser base click-through rate.
    pub ctr: BetaParams,
    /// Add-to-cart probability given a click.
    pub cart_given_click: BetaParams,
    /// Order probability given a click.
    pub order_given_click: BetaParams,
    pub price_log_mean: f64,
    pub price_log_sd: f64,

    /// Strength of the user x advertiser interaction on the true CTR.
    pub user_affinity: f64,
    /// Per-request multiplicative log-normal noise on predicted rates.
    pub prediction_noise: f64,
    /// Per-advertiser persistent log-bias of the predictors.
    pub prediction_bias: f64,

    pub bidding: BiddingMode,
    pub seed: u64,
    /// Rounds of the benchmark mechanism used to calibrate metric normalizers.
    pub calibration_rounds: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            n_advertisers: 8,
            slots: 3,
            slot_factors: vec![1.0, 0.75, 0.55],
            user_features: 2,
            n_categories: 4,
            value_log_mean: 1.0,
            value_log_mean_spread: 0.4,
            value_log_sd: 0.4,
            ctr: BetaParams::new(3.0, 40.0),
            cart_given_click: BetaParams::new(2.0, 6.0),
            order_given_click: BetaParams::new(2.0, 14.0),
            price_log_mean: 3.0,
            price_log_sd: 0.7,
            user_affinity: 0.5,
            prediction_noise: 0.15,
            prediction_bias: 0.3,
            bidding: BiddingMode::Truthful,
            seed: 7,
            calibration_rounds: 4000,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.n_advertisers == 0 {
            problems.push("n_advertisers must be positive".to_string());
        }
        if self.slots == 0 || self.slots > self.n_advertisers {
            problems.push(format!("slots must be in 1..={}", self.n_advertisers));
        }
        if self.slot_factors.len() != self.slots {
            problems.push(format!("slot_factors needs {} entries", self.slots));
        } else if let Err(e) = validate_slot_factors(&self.slot_factors) {
            problems.push(e.to_string());
        }
        if self.n_categories == 0 {
            problems.push("n_categories must be positive".into());
        }
        for (name, b) in [
            ("ctr", self.ctr),
            ("cart_given_click", self.cart_given_click),
            ("order_given_click", self.order_given_click),
        ] {
            if !(b.alpha > 0.0 && b.beta > 0.0 && b.alpha.is_finite() && b.beta.is_finite()) {
                problems.push(format!("{name}: Beta parameters must be positive"));
            }
        }
        for (name, x) in [
            ("value_log_mean", self.value_log_mean),
            ("price_log_mean", self.price_log_mean),
        ] {
            if !x.is_finite() {
                problems.push(format!("{name} must be finite"));
            }
        }
        for (name, x) in [
            ("value_log_mean_spread", self.value_log_mean_spread),
            ("value_log_sd", self.value_log_sd),
            ("price_log_sd", self.price_log_sd),
            ("user_affinity", self.user_affinity),
            ("prediction_noise", self.prediction_noise),
            ("prediction_bias", self.prediction_bias),
        ] {
            if !(x >= 0.0 && x.is_finite()) {
                problems.push(format!("{name} must be finite and nonnegative"));
            }
        }
        if let BiddingMode::Shaded(f) = self.bidding {
            if !(f > 0.0 && f.is_finite()) {
                problems.push("shading factor must be positive".into());
            }
        }
        if self.calibration_rounds == 0 {
            problems.push("calibration_rounds must be positive".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn feature_len(&self) -> usize {
        crate::auction::feature::len(self.user_features)
    }

    /// Parses a `[world]` section from TOML text.
    pub fn from_toml(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct File {
            world: Option<WorldConfig>,
        }
        let f: File = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = f.world.unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct File<'a> {
            world: &'a WorldConfig,
        }
        toml::to_string(&File { world: self }).expect("world config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let c = WorldConfig::default();
        c.validate().unwrap();
        let back = WorldConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let c = WorldConfig::from_toml("[world]\nn_advertisers = 5\nseed = 3\n").unwrap();
        assert_eq!(c.n_advertisers, 5);
        assert_eq!(c.seed, 3);
        assert_eq!(c.slots, 3);
    }

    #[test]
    fn invalid_values_listed() {
        let err = WorldConfig::from_toml(
            "[world]\nslots = 2\nslot_factors = [0.5, 0.9]\nvalue_log_sd = -1.0\n",
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("non-increasing"), "{err}");
        assert!(err.contains("value_log_sd"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(WorldConfig::from_toml("[world]\nslotz = 2\n").is_err());
    }

    #[test]
    fn shaded_bidding_parses() {
        let c = WorldConfig::from_toml("[world]\nbidding = { shaded = 0.8 }\n").unwrap();
        assert_eq!(c.bidding, BiddingMode::Shaded(0.8));
    }
}
