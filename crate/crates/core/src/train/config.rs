use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{FeedbackMode, MetricWeights};

/// How the actor is initialized before policy optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStart {
    /// Random weights.
    None,
    /// Regress the multiplier onto `pctr^sigma`.
    Gsp(f64),
    /// Regress onto the squashing exponent of `sigma_grid` that scores best on
    /// the training objective.
    BestGsp,
}

/// Over which stretch of play the smooth-transition constraint compares utilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyPeriod {
    /// Each auction round; only that round's winners are checked.
    Round,
    /// The whole collected batch; advertisers with at least one win in it are checked.
    Batch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Objective weights over (RPM, CTR, ACR, CVR, GPM). Required.
    pub weights: Option<MetricWeights>,
    /// Tolerated utility loss relative to the benchmark; 1 disables the constraint.
    pub epsilon: f64,
    pub eta: f64,
    pub penalty_period: PenaltyPeriod,
    /// Coefficient of the monotonicity penalty in the actor loss.
    pub gamma: f64,
    /// Coefficient of the squared bid elasticity of the multiplier in the actor loss.
    pub kappa: f64,
    /// Extra bids per state, drawn log-uniformly over `[0.1 b, 10 b]`, at which
    /// the monotonicity penalty is also evaluated.
    pub mono_probes: usize,

    pub iterations: usize,
    /// Auction rounds collected per iteration.
    pub batch_rounds: usize,
    pub minibatch: usize,
    pub critic_steps: usize,
    pub actor_steps: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub noise_std: f64,
    pub noise_decay: f64,
    pub noise_min: f64,
    /// Capacity in experiences of a FIFO replay buffer; 0 trains on the latest batch only.
    pub replay_capacity: usize,

    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub warm_start: WarmStart,
    pub warm_start_steps: usize,
    pub sigma_grid: Vec<f64>,

    /// Benchmark rounds for the reference utilities.
    pub benchmark_rounds: usize,
    /// Rounds of benchmark play logged for critic pretraining.
    pub pretrain_rounds: usize,
    pub pretrain_epochs: usize,

    pub reward_feedback: FeedbackMode,
    pub eval_every: usize,
    pub eval_rounds: usize,
    /// Keep the evaluated snapshot with the best validation score.
    pub select_best: bool,
    pub seed: u64,
    pub eval_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            weights: None,
            epsilon: 1.0,
            eta: 10.0,
            penalty_period: PenaltyPeriod::Batch,
            gamma: 1.0,
            kappa: 1.0,
            mono_probes: 1,
            iterations: 300,
            batch_rounds: 256,
            minibatch: 512,
            critic_steps: 20,
            actor_steps: 1,
            lr_actor: 1e-4,
            lr_critic: 1e-3,
            noise_std: 0.3,
            noise_decay: 0.995,
            noise_min: 0.1,
            replay_capacity: 100_000,
            actor_hidden: vec![64, 32],
            critic_hidden: vec![64, 32],
            warm_start: WarmStart::Gsp(1.0),
            warm_start_steps: 1_500,
            sigma_grid: vec![0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0],
            benchmark_rounds: 2_000,
            pretrain_rounds: 1_000,
            pretrain_epochs: 30,
            reward_feedback: FeedbackMode::Expected,
            eval_every: 20,
            eval_rounds: 2_000,
            select_best: true,
            seed: 1,
            eval_seed: 0xE7A1,
        }
    }
}

impl TrainConfig {
    pub fn with_weights(weights: MetricWeights) -> Self {
        Self {
            weights: Some(weights),
            ..Self::default()
        }
    }

    pub fn weights(&self) -> Result<MetricWeights> {
        self.weights
            .ok_or_else(|| Error::Config("missing field `weights` in [train]".into()))
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut p = Vec::new();
        if self.weights.is_none() {
            p.push("missing field `weights`".to_string());
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            p.push(format!("epsilon {} outside [0,1]", self.epsilon));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            p.push("eta must be positive".into());
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            p.push("gamma must be nonnegative".into());
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            p.push("kappa must be nonnegative".into());
        }
        for (name, x) in [("lr_actor", self.lr_actor), ("lr_critic", self.lr_critic)] {
            if !(x > 0.0 && x.is_finite()) {
                p.push(format!("{name} must be positive"));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_min >= 0.0 && self.noise_std.is_finite()) {
            p.push("noise levels must be nonnegative".into());
        }
        if !(self.noise_decay > 0.0 && self.noise_decay <= 1.0) {
            p.push("noise_decay must lie in (0,1]".into());
        }
        for (name, n) in [
            ("batch_rounds", self.batch_rounds),
            ("minibatch", self.minibatch),
            ("benchmark_rounds", self.benchmark_rounds),
            ("pretrain_rounds", self.pretrain_rounds),
            ("eval_every", self.eval_every),
            ("eval_rounds", self.eval_rounds),
        ] {
            if n == 0 {
                p.push(format!("{name} must be positive"));
            }
        }
        if self
            .actor_hidden
            .iter()
            .chain(&self.critic_hidden)
            .any(|&h| h == 0)
        {
            p.push("hidden layer widths must be positive".into());
        }
        if self.sigma_grid.is_empty() || self.sigma_grid.iter().any(|s| !s.is_finite() || *s < 0.0)
        {
            p.push("sigma_grid must be nonempty and nonnegative".into());
        }
        if let WarmStart::Gsp(s) = self.warm_start {
            if !(s.is_finite() && s >= 0.0) {
                p.push("warm-start exponent must be nonnegative".into());
            }
        }
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p.join("; ")))
        }
    }

    /// Parses a `[train]` section.
    pub fn from_toml(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct File {
            train: Option<TrainConfig>,
        }
        let f: File = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = f.train.unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct File<'a> {
            train: &'a TrainConfig,
        }
        toml::to_string(&File { train: self }).expect("train config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_weights_named() {
        let err = TrainConfig::from_toml("[train]\niterations = 3\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("weights"), "{err}");
    }

    #[test]
    fn round_trip() {
        let c = TrainConfig {
            warm_start: WarmStart::BestGsp,
            ..TrainConfig::with_weights(MetricWeights::new([0.5, 0.5, 0.0, 0.0, 0.0]).unwrap())
        };
        assert_eq!(TrainConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn all_problems_listed() {
        let err = TrainConfig::from_toml(
            "[train]\nweights = [1.0, 0.0, 0.0, 0.0, 0.0]\nepsilon = 2.0\neta = 0.0\n",
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("epsilon") && err.contains("eta"), "{err}");
    }

    #[test]
    fn bad_weights_rejected() {
        assert!(TrainConfig::from_toml("[train]\nweights = [0.5, 0.0, 0.0, 0.0, 0.0]\n").is_err());
    }
}
