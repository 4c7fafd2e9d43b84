use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{Actor, Critic, CriticSample, Optimizer};

/// `F - eta * max(0, (1 - eps) * u_bar - u)`.
pub fn shaped_reward(
    objective: f64,
    utility: f64,
    benchmark_utility: f64,
    epsilon: f64,
    eta: f64,
) -> f64 {
    objective - eta * st_violation(utility, benchmark_utility, epsilon)
}

/// Shortfall of `utility` below the tolerated fraction of the benchmark.
pub fn st_violation(utility: f64, benchmark_utility: f64, epsilon: f64) -> f64 {
    ((1.0 - epsilon) * benchmark_utility - utility).max(0.0)
}

/// One ad's view of one auction round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub round: u64,
    pub candidate: usize,
    /// `(bid, features...)`.
    pub state: Vec<f64>,
    /// Rank score actually used in the auction.
    pub action: f64,
    pub reward: f64,
    /// Shared objective part of the reward.
    pub objective: f64,
    pub penalty: f64,
}

impl Experience {
    pub fn bid(&self) -> f64 {
        self.state[0]
    }

    pub fn features(&self) -> &[f64] {
        &self.state[1..]
    }
}

fn critic_batch<'a>(batch: &[&'a Experience]) -> Vec<CriticSample<'a>> {
    batch
        .iter()
        .map(|e| CriticSample {
            state: &e.state,
            action: e.action,
            target: e.reward,
        })
        .collect()
}

/// One step on the critic's squared error against the observed rewards.
/// Returns the loss before the step.
pub fn critic_update(
    critic: &mut Critic,
    opt: &mut Optimizer,
    batch: &[&Experience],
    lr: f64,
) -> Result<f64> {
    let samples = critic_batch(batch);
    let (loss, grad) = critic.mse_loss_grad(&samples)?;
    if !loss.is_finite() {
        return Err(Error::Diverged(format!("critic loss {loss}")));
    }
    opt.step(critic.net_mut().params_mut(), &grad, lr)?;
    Ok(loss)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActorLoss {
    pub total: f64,
    /// Mean critic value of the policy's actions.
    pub q: f64,
    /// Mean monotonicity penalty per evaluated point.
    pub mono: f64,
    /// Mean squared bid elasticity of the multiplier per evaluated point.
    pub elasticity: f64,
}

/// Regularizer coefficients of the actor loss.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Penalties {
    /// Monotonicity hinge.
    pub gamma: f64,
    /// Squared bid elasticity of the multiplier.
    pub kappa: f64,
}

/// Actor loss `mean(-Q(s, b * pi(s))) + gamma * mean(L_mono) + kappa * mean(e^2)`
/// and its parameter gradient, `e` being the bid elasticity of the multiplier.
/// Both penalties are averaged over the batch states plus `probes`.
pub fn actor_loss_grad(
    actor: &Actor,
    critic: &Critic,
    states: &[&[f64]],
    probes: &[(f64, &[f64])],
    pen: Penalties,
) -> Result<(ActorLoss, Vec<f64>)> {
    if states.is_empty() {
        return Err(Error::InvalidInput(
            "actor update needs a nonempty batch".into(),
        ));
    }
    let n = states.len() as f64;
    let mut grad = vec![0.0; actor.net().num_params()];
    let mut q_sum = 0.0;
    for s in states {
        let (bid, x) = (s[0], &s[1..]);
        let t = actor.trace(bid, x)?;
        let pi = t.output()[0];
        let (q, dq_da) = critic.q_grad_action(s, bid * pi)?;
        q_sum += q;
        actor.accumulate_grad(&t, -dq_da * bid / n, 0.0, &mut grad);
    }
    let mut points: Vec<(f64, &[f64])> = states.iter().map(|s| (s[0], &s[1..])).collect();
    points.extend_from_slice(probes);
    let m = points.len() as f64;
    let mut penalty = |coef: f64, f: &PenaltyFn| -> Result<f64> {
        if coef <= 0.0 {
            return Ok(0.0);
        }
        let (loss, g) = f(&points)?;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += coef * b / m;
        }
        Ok(loss / m)
    };
    let mono = penalty(pen.gamma, &|p| actor.mono_penalty(p))?;
    let elasticity = penalty(pen.kappa, &|p| actor.elasticity_penalty(p))?;
    let q = q_sum / n;
    Ok((
        ActorLoss {
            total: -q + pen.gamma * mono + pen.kappa * elasticity,
            q,
            mono,
            elasticity,
        },
        grad,
    ))
}

/// Draws one log-uniform probe bid in `[0.1 b, 10 b]` per state and repeat.
pub fn probe_points<'a, R: Rng + ?Sized>(
    states: &[&'a [f64]],
    per_state: usize,
    rng: &mut R,
) -> Vec<(f64, &'a [f64])> {
    let mut out = Vec::with_capacity(states.len() * per_state);
    for s in states {
        for _ in 0..per_state {
            let f: f64 = rng.random_range(-1.0..1.0);
            out.push((s[0] * 10f64.powf(f), &s[1..]));
        }
    }
    out
}

/// One actor step with the critic frozen.
type PenaltyFn<'a> = dyn Fn(&[(f64, &[f64])]) -> Result<(f64, Vec<f64>)> + 'a;

#[allow(clippy::too_many_arguments)]
pub fn actor_update<R: Rng + ?Sized>(
    actor: &mut Actor,
    opt: &mut Optimizer,
    critic: &Critic,
    batch: &[&Experience],
    pen: Penalties,
    mono_probes: usize,
    lr: f64,
    rng: &mut R,
) -> Result<ActorLoss> {
    let states: Vec<&[f64]> = batch.iter().map(|e| e.state.as_slice()).collect();
    let probes = probe_points(&states, mono_probes, rng);
    let (loss, grad) = actor_loss_grad(actor, critic, &states, &probes, pen)?;
    opt.step(actor.net_mut().params_mut(), &grad, lr)?;
    Ok(loss)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub epochs: usize,
    pub train_mse: f64,
    pub validation_mse: f64,
}

/// Regresses the critic on logged rewards with minibatch steps, holding out a
/// tenth of the log and stopping once validation error stops improving.
pub fn pretrain_critic<R: Rng + ?Sized>(
    critic: &mut Critic,
    opt: &mut Optimizer,
    log: &[Experience],
    max_epochs: usize,
    minibatch: usize,
    lr: f64,
    rng: &mut R,
) -> Result<PretrainReport> {
    if log.is_empty() {
        return Err(Error::InvalidInput(
            "critic pretraining needs a nonempty log".into(),
        ));
    }
    let mut idx: Vec<usize> = (0..log.len()).collect();
    idx.shuffle(rng);
    let n_val = if log.len() >= 20 { log.len() / 10 } else { 0 };
    let (val_idx, train_idx) = idx.split_at(n_val);
    let val: Vec<&Experience> = val_idx.iter().map(|&i| &log[i]).collect();
    let mut train: Vec<&Experience> = train_idx.iter().map(|&i| &log[i]).collect();
    let mse = |c: &Critic, set: &[&Experience]| c.mse(&critic_batch(set));

    const PATIENCE: usize = 5;
    let mut best = f64::INFINITY;
    let mut best_params = critic.net().params().to_vec();
    let mut stale = 0;
    let mut epochs = 0;
    for _ in 0..max_epochs {
        epochs += 1;
        train.shuffle(rng);
        for chunk in train.chunks(minibatch.max(1)) {
            critic_update(critic, opt, chunk, lr)?;
        }
        let score = if val.is_empty() {
            mse(critic, &train)?
        } else {
            mse(critic, &val)?
        };
        if !score.is_finite() {
            return Err(Error::Diverged(format!(
                "critic validation error {score} at epoch {epochs}"
            )));
        }
        if score < best * (1.0 - 1e-4) {
            best = score;
            best_params.copy_from_slice(critic.net().params());
            stale = 0;
        } else {
            stale += 1;
            if stale >= PATIENCE {
                break;
            }
        }
    }
    if best.is_finite() {
        critic.net_mut().params_mut().copy_from_slice(&best_params);
    }
    Ok(PretrainReport {
        epochs,
        train_mse: mse(critic, &train)?,
        validation_mse: if val.is_empty() {
            f64::NAN
        } else {
            mse(critic, &val)?
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{OptimizerKind, Standardizer};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shaped_reward_examples() {
        assert_eq!(shaped_reward(0.7, 0.0, 5.0, 1.0, 10.0), 0.7);
        assert_eq!(shaped_reward(0.7, 0.9, 1.0, 0.2, 10.0), 0.7);
        assert!((shaped_reward(0.5, 0.6, 1.0, 0.2, 2.0) - 0.1).abs() < 1e-12);
    }

    fn exp(state: Vec<f64>, action: f64, reward: f64) -> Experience {
        Experience {
            round: 0,
            candidate: 0,
            state,
            action,
            reward,
            objective: reward,
            penalty: 0.0,
        }
    }

    fn fitted_critic(state_len: usize, seed: u64) -> Critic {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = Critic::new(state_len, &[16, 8], &mut rng).unwrap();
        c.set_normalizer(Standardizer::identity(state_len + 1))
            .unwrap();
        c
    }

    #[test]
    fn constant_reward_is_learned() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let log: Vec<Experience> = (0..400)
            .map(|_| {
                exp(
                    vec![rng.random_range(0.0..2.0), rng.random_range(-1.0..1.0)],
                    rng.random_range(0.0..1.0),
                    0.37,
                )
            })
            .collect();
        let mut c = fitted_critic(2, 1);
        let mut opt = Optimizer::new(OptimizerKind::adam(), c.net().num_params());
        let r = pretrain_critic(&mut c, &mut opt, &log, 300, 32, 3e-3, &mut rng).unwrap();
        assert!(r.validation_mse <= 1e-4, "{r:?}");
    }

    #[test]
    fn linear_reward_in_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = vec![1.0, 0.5];
        let log: Vec<Experience> = (0..256)
            .map(|_| {
                let a = rng.random_range(0.0..1.0);
                exp(s.clone(), a, 0.2 + 0.6 * a)
            })
            .collect();
        let mut c = fitted_critic(2, 2);
        let mut opt = Optimizer::new(OptimizerKind::adam(), c.net().num_params());
        let refs: Vec<&Experience> = log.iter().collect();
        for _ in 0..2000 {
            critic_update(&mut c, &mut opt, &refs, 3e-3).unwrap();
        }
        assert!(c.mse(&critic_batch(&refs)).unwrap() <= 1e-3);
    }

    #[test]
    fn critic_loss_decreases_on_fixed_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let log: Vec<Experience> = (0..64)
            .map(|_| {
                let b: f64 = rng.random_range(0.0..3.0);
                exp(vec![b, 0.1], b * 0.1, b.sin())
            })
            .collect();
        let refs: Vec<&Experience> = log.iter().collect();
        let mut c = fitted_critic(2, 3);
        let mut opt = Optimizer::new(OptimizerKind::Sgd, c.net().num_params());
        let first = critic_update(&mut c, &mut opt, &refs, 1e-2).unwrap();
        let mut last = first;
        for _ in 0..100 {
            last = critic_update(&mut c, &mut opt, &refs, 1e-2).unwrap();
        }
        assert!(last < first);
    }

    #[test]
    fn perfect_critic_takes_no_step() {
        let c0 = Critic::constant(2, &[4], 0.25).unwrap();
        let mut c = c0.clone();
        let log = [
            exp(vec![1.0, 2.0], 0.3, 0.25),
            exp(vec![0.2, 0.0], 0.9, 0.25),
        ];
        let refs: Vec<&Experience> = log.iter().collect();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, c.net().num_params());
        assert_eq!(critic_update(&mut c, &mut opt, &refs, 0.1).unwrap(), 0.0);
        assert_eq!(c, c0);
    }

    fn random_actor(seed: u64, feature_len: usize) -> Actor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = Actor::new(feature_len, &[8, 6], &mut rng).unwrap();
        a.set_normalizer(Standardizer {
            mean: vec![1.0; feature_len + 1],
            scale: vec![1.5; feature_len + 1],
        })
        .unwrap();
        for p in a.net_mut().params_mut() {
            *p *= 2.5;
        }
        a
    }

    #[test]
    fn actor_gradient_matches_finite_differences() {
        let fl = 3;
        let actor = random_actor(7, fl);
        let critic = fitted_critic(fl + 1, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let states: Vec<Vec<f64>> = (0..12)
            .map(|_| {
                (0..=fl)
                    .map(|j| {
                        if j == 0 {
                            rng.random_range(0.1..3.0)
                        } else {
                            rng.random_range(-2.0..2.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
        let probes = probe_points(&refs, 2, &mut rng);
        let pen = Penalties {
            gamma: 3.0,
            kappa: 0.7,
        };
        let (loss, grad) = actor_loss_grad(&actor, &critic, &refs, &probes, pen).unwrap();
        assert!(
            loss.mono > 0.0 && loss.elasticity > 0.0,
            "test needs active penalties"
        );
        let h = 1e-6;
        let mut checked = 0;
        for k in 0..actor.net().num_params() {
            let mut a = actor.clone();
            a.net_mut().params_mut()[k] += h;
            let up = actor_loss_grad(&a, &critic, &refs, &probes, pen)
                .unwrap()
                .0
                .total;
            a.net_mut().params_mut()[k] -= 2.0 * h;
            let down = actor_loss_grad(&a, &critic, &refs, &probes, pen)
                .unwrap()
                .0
                .total;
            let fd = (up - down) / (2.0 * h);
            let scale = fd.abs().max(grad[k].abs());
            if scale > 1e-6 {
                assert!(
                    (fd - grad[k]).abs() / scale < 1e-3,
                    "param {k}: fd {fd} vs {}",
                    grad[k]
                );
                checked += 1;
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn zero_penalties_give_pure_policy_gradient() {
        let actor = random_actor(10, 2);
        let critic = fitted_critic(3, 11);
        let s = [vec![1.0, 0.3, -0.2], vec![2.0, -1.0, 0.5]];
        let refs: Vec<&[f64]> = s.iter().map(|v| v.as_slice()).collect();
        let (l, g0) = actor_loss_grad(&actor, &critic, &refs, &[], Penalties::default()).unwrap();
        assert_eq!((l.mono, l.elasticity), (0.0, 0.0));
        assert_eq!(l.total, -l.q);
        let mut expected = vec![0.0; g0.len()];
        for st in &refs {
            let t = actor.trace(st[0], &st[1..]).unwrap();
            let (_, dq) = critic.q_grad_action(st, st[0] * t.output()[0]).unwrap();
            actor.accumulate_grad(&t, -dq * st[0] / 2.0, 0.0, &mut expected);
        }
        assert_eq!(g0, expected);
    }
}
