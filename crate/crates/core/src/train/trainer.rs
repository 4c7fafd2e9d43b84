use std::collections::VecDeque;
use std::io::Write;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{PenaltyPeriod, TrainConfig, WarmStart};
use super::update::{
    actor_update, critic_update, pretrain_critic, st_violation, ActorLoss, Experience, Penalties,
    PretrainReport,
};
use crate::auction::{allocate, feature, price_outcome, Mechanism, Pricing, PricingConfig};
use crate::audit::{monotonicity_metric, test_states, AuditConfig};
use crate::error::{Error, Result};
use crate::net::{state_vector, Actor, Critic, Optimizer, OptimizerKind, Standardizer};
use crate::sim::world::{domain, stream};
use crate::sim::{
    benchmark_utilities, evaluate, expected_feedback, simulate_feedback, BenchmarkUtilities,
    EvalSpec, FeedbackMode, FeedbackTotals, MetricWeights, World,
};

/// Request-stream salts, so training, pretraining and benchmark play never share requests.
const TRAIN_REQUESTS: u64 = 0x7A1_0000;
const PRETRAIN_REQUESTS: u64 = 0x9E7_0000;
const BENCHMARK_REQUESTS: u64 = 0xBE4C_0000;

/// Everything observed in one exploratory round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundPlay {
    pub round: u64,
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<f64>,
    /// Scalarized objective of the round on normalized (unclamped) metrics.
    pub objective: f64,
    pub utility: Vec<f64>,
    pub won: Vec<bool>,
}

/// Plays one round with multipliers perturbed by `exp(noise)`, `noise ~ N(0, noise_std^2)`.
#[allow(clippy::too_many_arguments)]
pub fn explore_round(
    world: &World,
    mechanism: &Mechanism<'_>,
    weights: &MetricWeights,
    noise_std: f64,
    request_seed: u64,
    noise_seed: u64,
    index: u64,
    feedback: FeedbackMode,
) -> Result<RoundPlay> {
    let round = world.round(request_seed, index);
    let req = &round.request;
    let mut rng = stream(noise_seed, domain::EXPLORE, index);
    let mut entries = mechanism.entries(req)?;
    for e in &mut entries {
        let z: f64 = StandardNormal.sample(&mut rng);
        if noise_std > 0.0 {
            let f = (noise_std * z).exp();
            e.multiplier *= f;
            e.score = e.bid * e.multiplier + e.offset;
        }
    }
    let mut outcome = allocate(req, &entries)?;
    price_outcome(
        req,
        &mut outcome,
        mechanism,
        Pricing::Multiplier,
        &PricingConfig::default(),
    )?;
    let n = req.candidates.len();
    let mut utility = vec![0.0; n];
    let mut won = vec![false; n];
    for w in &outcome.winners {
        won[w.candidate] = true;
    }
    let totals = match feedback {
        FeedbackMode::Expected => {
            let imps = expected_feedback(req, &outcome, &round.truth)?;
            for e in &imps {
                utility[e.candidate] += e.utility;
            }
            FeedbackTotals::from_expected(&imps)
        }
        FeedbackMode::Sampled => {
            let mut frng = stream(request_seed, domain::FEEDBACK, index);
            let recs = simulate_feedback(index, req, &outcome, &round.truth, &mut frng)?;
            for r in &recs {
                utility[r.candidate] += r.utility();
            }
            FeedbackTotals::from_records(&recs)
        }
    };
    let objective = weights.dot(&world.normalizers.apply(totals.raw_metrics()));
    Ok(RoundPlay {
        round: index,
        states: req
            .candidates
            .iter()
            .map(|c| state_vector(c.bid, &c.features))
            .collect(),
        actions: entries.iter().map(|e| e.score).collect(),
        objective,
        utility,
        won,
    })
}

/// Turns plays into per-ad experiences with shaped rewards. Every candidate of
/// every round yields one experience.
pub fn shape_rewards(
    plays: &[RoundPlay],
    benchmark: &[f64],
    epsilon: f64,
    eta: f64,
    period: PenaltyPeriod,
) -> Vec<Experience> {
    let n = benchmark.len();
    // per-advertiser shortfall over the whole batch
    let batch_violation: Vec<f64> = match period {
        PenaltyPeriod::Round => vec![0.0; n],
        PenaltyPeriod::Batch => (0..n)
            .map(|i| {
                let any_win = plays.iter().any(|p| p.won[i]);
                let mean_u =
                    plays.iter().map(|p| p.utility[i]).sum::<f64>() / plays.len().max(1) as f64;
                if any_win {
                    st_violation(mean_u, benchmark[i], epsilon)
                } else {
                    0.0
                }
            })
            .collect(),
    };
    let mut out = Vec::with_capacity(plays.len() * n);
    for p in plays {
        for i in 0..p.states.len() {
            let violation = match period {
                PenaltyPeriod::Round if p.won[i] => {
                    st_violation(p.utility[i], benchmark[i], epsilon)
                }
                PenaltyPeriod::Round => 0.0,
                PenaltyPeriod::Batch => batch_violation[i],
            };
            let penalty = eta * violation;
            out.push(Experience {
                round: p.round,
                candidate: i,
                state: p.states[i].clone(),
                action: p.actions[i],
                reward: p.objective - penalty,
                objective: p.objective,
                penalty,
            });
        }
    }
    out
}

/// Exploratory rounds `first..first + rounds`, in round order regardless of threads.
#[allow(clippy::too_many_arguments)]
pub fn collect_plays(
    world: &World,
    mechanism: &Mechanism<'_>,
    weights: &MetricWeights,
    noise_std: f64,
    request_seed: u64,
    noise_seed: u64,
    first: u64,
    rounds: usize,
    feedback: FeedbackMode,
) -> Result<Vec<RoundPlay>> {
    (first..first + rounds as u64)
        .into_par_iter()
        .map(|i| {
            explore_round(
                world,
                mechanism,
                weights,
                noise_std,
                request_seed,
                noise_seed,
                i,
                feedback,
            )
        })
        .collect()
}

/// One iteration's worth of experiences under the actor with exploration.
pub fn collect_batch(
    world: &World,
    actor: &Actor,
    cfg: &TrainConfig,
    benchmark: &BenchmarkUtilities,
    noise_std: f64,
    iteration: usize,
) -> Result<Vec<Experience>> {
    let weights = cfg.weights()?;
    let plays = collect_plays(
        world,
        &Mechanism::DeepGsp(actor),
        &weights,
        noise_std,
        cfg.seed ^ TRAIN_REQUESTS,
        cfg.seed,
        (iteration * cfg.batch_rounds) as u64,
        cfg.batch_rounds,
        cfg.reward_feedback,
    )?;
    Ok(shape_rewards(
        &plays,
        &benchmark.mean,
        cfg.epsilon,
        cfg.eta,
        cfg.penalty_period,
    ))
}

/// Reference utilities of the benchmark mechanism for this world; fixed per world.
pub fn world_benchmark(world: &World, rounds: usize) -> Result<BenchmarkUtilities> {
    benchmark_utilities(
        world,
        &Mechanism::Gsp { sigma: 1.0 },
        &EvalSpec::new(world.config.seed ^ BENCHMARK_REQUESTS, rounds),
    )
}

/// Per-iteration training diagnostics. Validation columns are filled on evaluation iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub noise_std: f64,
    pub critic_loss: f64,
    pub actor_q: f64,
    pub mono_loss: f64,
    pub elasticity_loss: f64,
    pub mean_reward: f64,
    pub validation: Option<Validation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    /// Scalarized objective on held-out requests.
    pub objective: f64,
    /// Total advertiser utility relative to the benchmark on the same requests.
    pub utility_ratio: f64,
    /// Objective minus the smooth-transition penalty; used for snapshot selection.
    pub score: f64,
    pub t_m: Option<f64>,
    pub mean_price_per_click: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub records: Vec<IterationRecord>,
    pub warm_start_sigma: Option<f64>,
    pub pretrain: Option<PretrainReport>,
    pub selected_iteration: Option<usize>,
    pub benchmark: BenchmarkUtilities,
}

impl TrainReport {
    pub const CSV_HEADER: &'static str =
        "iteration,noise_std,critic_loss,actor_q,mono_loss,elasticity_loss,mean_reward,objective,utility_ratio,score,t_m,mean_ppc";

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.records {
            let v = r.validation.map_or_else(
                || ",,,,".to_string(),
                |v| {
                    format!(
                        "{},{},{},{},{}",
                        v.objective,
                        v.utility_ratio,
                        v.score,
                        v.t_m.map_or(String::new(), |t| t.to_string()),
                        v.mean_price_per_click
                    )
                },
            );
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.iteration,
                r.noise_std,
                r.critic_loss,
                r.actor_q,
                r.mono_loss,
                r.elasticity_loss,
                r.mean_reward,
                v
            )?;
        }
        Ok(())
    }

    pub fn last_validation(&self) -> Option<Validation> {
        self.records.iter().rev().find_map(|r| r.validation)
    }
}

pub struct TrainOutcome {
    pub actor: Actor,
    pub critic: Critic,
    pub report: TrainReport,
}

/// Holds the learning state across iterations.
pub struct Trainer<'w> {
    world: &'w World,
    cfg: TrainConfig,
    weights: MetricWeights,
    actor: Actor,
    critic: Critic,
    actor_opt: Optimizer,
    critic_opt: Optimizer,
    benchmark: BenchmarkUtilities,
    validation_benchmark: BenchmarkUtilities,
    validation_states: Vec<(f64, Vec<f64>)>,
    buffer: VecDeque<Experience>,
    best: Option<(f64, usize, Actor)>,
    report: TrainReport,
}

fn log_targets(states: &[(f64, Vec<f64>)], sigma: f64) -> Vec<f64> {
    states
        .iter()
        .map(|(_, x)| sigma * x[feature::PCTR].max(1e-12).ln())
        .collect()
}

impl<'w> Trainer<'w> {
    /// Initializes networks, normalizers, the benchmark and the pretrained critic.
    pub fn new(world: &'w World, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let weights = cfg.weights()?;
        let fl = world.feature_len();

        let benchmark = world_benchmark(world, cfg.benchmark_rounds)?;
        let validation_benchmark = benchmark_utilities(
            world,
            &Mechanism::Gsp { sigma: 1.0 },
            &EvalSpec::new(cfg.eval_seed, cfg.eval_rounds),
        )?;
        let validation_states = test_states(world, cfg.eval_seed, 20);

        // benchmark play with exploration: the log the critic is pretrained on
        let m0 = Mechanism::Gsp { sigma: 1.0 };
        let pre_seed = cfg.seed ^ PRETRAIN_REQUESTS;
        let plays = collect_plays(
            world,
            &m0,
            &weights,
            cfg.noise_std,
            pre_seed,
            pre_seed,
            0,
            cfg.pretrain_rounds,
            cfg.reward_feedback,
        )?;
        let log = shape_rewards(
            &plays,
            &benchmark.mean,
            cfg.epsilon,
            cfg.eta,
            cfg.penalty_period,
        );

        let mut actor = Actor::new(
            fl,
            &cfg.actor_hidden,
            &mut stream(cfg.seed, domain::INIT, 0),
        )?;
        actor.set_normalizer(Standardizer::fit(log.iter().map(|e| e.state.as_slice()))?)?;
        let mut critic = Critic::new(
            fl + 1,
            &cfg.critic_hidden,
            &mut stream(cfg.seed, domain::INIT, 1),
        )?;
        let with_action: Vec<Vec<f64>> = log
            .iter()
            .map(|e| {
                let mut v = e.state.clone();
                v.push(e.action);
                v
            })
            .collect();
        critic.set_normalizer(Standardizer::fit(with_action.iter().map(|v| v.as_slice()))?)?;

        let mut report = TrainReport {
            records: Vec::new(),
            warm_start_sigma: None,
            pretrain: None,
            selected_iteration: None,
            benchmark: benchmark.clone(),
        };

        let sigma = match cfg.warm_start {
            WarmStart::None => None,
            WarmStart::Gsp(s) => Some(s),
            WarmStart::BestGsp => Some(best_gsp_sigma(world, &weights, &cfg)?),
        };
        if let Some(s) = sigma {
            let states: Vec<(f64, Vec<f64>)> = log
                .iter()
                .map(|e| (e.bid(), e.features().to_vec()))
                .collect();
            imitate(
                &mut actor,
                &states,
                s,
                cfg.warm_start_steps,
                cfg.minibatch,
                &mut stream(cfg.seed, domain::INIT, 2),
            )?;
            report.warm_start_sigma = Some(s);
        }

        let mut critic_opt = Optimizer::new(OptimizerKind::adam(), critic.net().num_params());
        if cfg.pretrain_epochs > 0 {
            report.pretrain = Some(pretrain_critic(
                &mut critic,
                &mut critic_opt,
                &log,
                cfg.pretrain_epochs,
                cfg.minibatch,
                cfg.lr_critic,
                &mut stream(cfg.seed, domain::INIT, 3),
            )?);
        }
        let actor_opt = Optimizer::new(OptimizerKind::adam(), actor.net().num_params());
        Ok(Self {
            world,
            cfg,
            weights,
            actor,
            critic,
            actor_opt,
            critic_opt,
            benchmark,
            validation_benchmark,
            validation_states,
            buffer: VecDeque::new(),
            best: None,
            report,
        })
    }

    pub fn actor(&self) -> &Actor {
        &self.actor
    }

    pub fn critic(&self) -> &Critic {
        &self.critic
    }

    pub fn benchmark(&self) -> &BenchmarkUtilities {
        &self.benchmark
    }

    fn noise_at(&self, iteration: usize) -> f64 {
        (self.cfg.noise_std * self.cfg.noise_decay.powi(iteration as i32))
            .max(self.cfg.noise_min.min(self.cfg.noise_std))
    }

    /// Held-out performance of the current actor.
    pub fn validate(&self) -> Result<Validation> {
        let e = evaluate(
            self.world,
            &Mechanism::DeepGsp(&self.actor),
            &EvalSpec::new(self.cfg.eval_seed, self.cfg.eval_rounds),
        )?;
        let objective = e.objective(&self.weights);
        let bench = &self.validation_benchmark.mean;
        let shortfall: f64 = e
            .utility
            .iter()
            .zip(bench)
            .map(|(u, b)| st_violation(*u, *b, self.cfg.epsilon))
            .sum::<f64>()
            / bench.len() as f64;
        let bench_total: f64 = bench.iter().sum();
        let t_m = monotonicity_metric(
            &self.actor,
            &self.validation_states,
            &AuditConfig::default(),
        )?
        .t_m;
        Ok(Validation {
            objective,
            utility_ratio: if bench_total > 0.0 {
                e.total_utility() / bench_total
            } else {
                f64::NAN
            },
            score: objective - self.cfg.eta * shortfall,
            t_m,
            mean_price_per_click: e.mean_payment_per_click(),
        })
    }

    fn consider(&mut self, iteration: usize, v: &Validation) {
        let better = self.best.as_ref().is_none_or(|(s, _, _)| v.score > *s);
        if better {
            self.best = Some((v.score, iteration, self.actor.clone()));
        }
    }

    /// Collect, then critic and actor steps. Returns the iteration's record.
    pub fn step(&mut self, iteration: usize) -> Result<IterationRecord> {
        let noise = self.noise_at(iteration);
        let batch = collect_batch(
            self.world,
            &self.actor,
            &self.cfg,
            &self.benchmark,
            noise,
            iteration,
        )?;
        let mean_reward = batch.iter().map(|e| e.reward).sum::<f64>() / batch.len() as f64;
        let pool: Vec<Experience> = if self.cfg.replay_capacity > 0 {
            self.buffer.extend(batch);
            while self.buffer.len() > self.cfg.replay_capacity {
                self.buffer.pop_front();
            }
            self.buffer.iter().cloned().collect()
        } else {
            batch
        };
        let mut rng = stream(self.cfg.seed, domain::INIT, 1_000 + iteration as u64);
        let mb = self.cfg.minibatch.min(pool.len());
        let mut critic_loss = f64::NAN;
        for _ in 0..self.cfg.critic_steps {
            let idx = sample(&mut rng, pool.len(), mb);
            let refs: Vec<&Experience> = idx.iter().map(|i| &pool[i]).collect();
            critic_loss = critic_update(
                &mut self.critic,
                &mut self.critic_opt,
                &refs,
                self.cfg.lr_critic,
            )?;
        }
        let mut loss = ActorLoss::default();
        for _ in 0..self.cfg.actor_steps {
            let idx = sample(&mut rng, pool.len(), mb);
            let refs: Vec<&Experience> = idx.iter().map(|i| &pool[i]).collect();
            loss = actor_update(
                &mut self.actor,
                &mut self.actor_opt,
                &self.critic,
                &refs,
                Penalties {
                    gamma: self.cfg.gamma,
                    kappa: self.cfg.kappa,
                },
                self.cfg.mono_probes,
                self.cfg.lr_actor,
                &mut rng,
            )?;
        }
        let last = iteration + 1 == self.cfg.iterations;
        let validation = if (iteration + 1).is_multiple_of(self.cfg.eval_every) || last {
            let v = self.validate()?;
            self.consider(iteration + 1, &v);
            Some(v)
        } else {
            None
        };
        Ok(IterationRecord {
            iteration: iteration + 1,
            noise_std: noise,
            critic_loss,
            actor_q: loss.q,
            mono_loss: loss.mono,
            elasticity_loss: loss.elasticity,
            mean_reward,
            validation,
        })
    }

    /// Runs all iterations and returns the selected actor.
    pub fn run(mut self) -> Result<TrainOutcome> {
        let v0 = self.validate()?;
        self.consider(0, &v0);
        self.report.records.push(IterationRecord {
            iteration: 0,
            noise_std: self.noise_at(0),
            critic_loss: f64::NAN,
            actor_q: f64::NAN,
            mono_loss: f64::NAN,
            elasticity_loss: f64::NAN,
            mean_reward: f64::NAN,
            validation: Some(v0),
        });
        for it in 0..self.cfg.iterations {
            let rec = self.step(it)?;
            log::debug!("iteration {} {:?}", rec.iteration, rec.validation);
            self.report.records.push(rec);
        }
        let (actor, selected) = match (self.cfg.select_best, self.best) {
            (true, Some((_, it, a))) => (a, Some(it)),
            _ => (self.actor, Some(self.cfg.iterations)),
        };
        self.report.selected_iteration = selected;
        Ok(TrainOutcome {
            actor,
            critic: self.critic,
            report: self.report,
        })
    }
}

/// Squashing exponent from the grid with the best validation objective.
pub fn best_gsp_sigma(world: &World, weights: &MetricWeights, cfg: &TrainConfig) -> Result<f64> {
    let spec = EvalSpec::new(cfg.eval_seed, cfg.eval_rounds);
    let mut best: Option<(f64, f64)> = None;
    for &s in &cfg.sigma_grid {
        let f = evaluate(world, &Mechanism::Gsp { sigma: s }, &spec)?.objective(weights);
        if best.is_none_or(|(bf, _)| f > bf) {
            best = Some((f, s));
        }
    }
    best.map(|(_, s)| s)
        .ok_or_else(|| Error::Config("empty sigma grid".into()))
}

/// Fits `ln pi` to `sigma * ln pctr` by squared error, with half the states at
/// bids redrawn log-uniformly over `[0.1 b, 10 b]` so the fit holds across bids.
pub fn imitate<R: Rng + ?Sized>(
    actor: &mut Actor,
    states: &[(f64, Vec<f64>)],
    sigma: f64,
    steps: usize,
    minibatch: usize,
    rng: &mut R,
) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::InvalidInput("imitation needs states".into()));
    }
    let targets = log_targets(states, sigma);
    let mut opt = Optimizer::new(OptimizerKind::adam(), actor.net().num_params());
    let mb = minibatch.min(states.len()).max(1);
    let mut last = f64::NAN;
    for step in 0..steps {
        let lr = 3e-3 * (1.0 - step as f64 / steps as f64) + 1e-4;
        let mut grad = vec![0.0; actor.net().num_params()];
        let mut loss = 0.0;
        for i in sample(rng, states.len(), mb) {
            let (b, x) = &states[i];
            let bid = if rng.random::<bool>() {
                b * 10f64.powf(rng.random_range(-1.0..1.0))
            } else {
                *b
            };
            let t = actor.trace(bid, x)?;
            let pi = t.output()[0].max(1e-300);
            let err = pi.ln() - targets[i];
            loss += err * err / mb as f64;
            actor.accumulate_grad(&t, 2.0 * err / pi / mb as f64, 0.0, &mut grad);
        }
        opt.step(actor.net_mut().params_mut(), &grad, lr)?;
        last = loss;
    }
    Ok(last)
}

/// Trains a Deep GSP actor on `world`.
pub fn train(world: &World, cfg: TrainConfig) -> Result<TrainOutcome> {
    Trainer::new(world, cfg)?.run()
}
