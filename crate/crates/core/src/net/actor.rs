use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Mlp, Trace};
use super::normalize::Standardizer;
use crate::error::{Error, Result};

/// Bid-multiplier network: maps a state `(bid, features)` to a strictly positive
/// multiplier `pi`, so that the rank score is `bid * pi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actor {
    net: Mlp,
    norm: Option<Standardizer>,
}

/// Per-point result of the monotonicity check `d(b*pi)/db = pi + b*dpi/db`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSlope {
    pub multiplier: f64,
    pub dmult_dbid: f64,
    pub score_slope: f64,
}

pub const DEFAULT_HIDDEN: [usize; 2] = [64, 32];

/// Concatenates the bid and the feature vector into an actor state.
pub fn state_vector(bid: f64, features: &[f64]) -> Vec<f64> {
    let mut s = Vec::with_capacity(features.len() + 1);
    s.push(bid);
    s.extend_from_slice(features);
    s
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(feature_len: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let dims = Self::dims(feature_len, hidden);
        Ok(Self {
            net: Mlp::new(&dims, Activation::Tanh, Activation::Softplus, rng)?,
            norm: None,
        })
    }

    /// Network whose output layer is zeroed except for bias `c`, giving
    /// `pi = softplus(c)` everywhere. The normalizer is the identity.
    pub fn constant(feature_len: usize, hidden: &[usize], c: f64) -> Result<Self> {
        let dims = Self::dims(feature_len, hidden);
        let mut net = Mlp::zeros(&dims, Activation::Tanh, Activation::Softplus)?;
        net.last_layer_mut().1[0] = c;
        Ok(Self {
            net,
            norm: Some(Standardizer::identity(feature_len + 1)),
        })
    }

    pub fn from_parts(net: Mlp, norm: Option<Standardizer>) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::Shape("actor must have a scalar output".into()));
        }
        if let Some(n) = &norm {
            if n.dim() != net.input_dim() {
                return Err(Error::Shape(
                    "normalizer width differs from network input".into(),
                ));
            }
        }
        Ok(Self { net, norm })
    }

    fn dims(feature_len: usize, hidden: &[usize]) -> Vec<usize> {
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(feature_len + 1);
        dims.extend_from_slice(hidden);
        dims.push(1);
        dims
    }

    pub fn feature_len(&self) -> usize {
        self.net.input_dim() - 1
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn normalizer(&self) -> Option<&Standardizer> {
        self.norm.as_ref()
    }

    pub fn set_normalizer(&mut self, norm: Standardizer) -> Result<()> {
        if norm.dim() != self.net.input_dim() {
            return Err(Error::Shape(format!(
                "normalizer width {} differs from actor input {}",
                norm.dim(),
                self.net.input_dim()
            )));
        }
        self.norm = Some(norm);
        Ok(())
    }

    fn norm(&self) -> Result<&Standardizer> {
        self.norm.as_ref().ok_or(Error::UnfittedNormalizer)
    }

    fn input(&self, bid: f64, features: &[f64]) -> Result<Vec<f64>> {
        let norm = self.norm()?;
        if features.len() + 1 != self.net.input_dim() {
            return Err(Error::Shape(format!(
                "actor expects {} features, got {}",
                self.net.input_dim() - 1,
                features.len()
            )));
        }
        let mut z = Vec::with_capacity(features.len() + 1);
        z.push((bid - norm.mean[0]) / norm.scale[0]);
        z.extend(
            features
                .iter()
                .zip(norm.mean[1..].iter().zip(&norm.scale[1..]))
                .map(|(v, (m, s))| (v - m) / s),
        );
        Ok(z)
    }

    /// Input direction corresponding to a unit change of the raw bid.
    fn bid_direction(&self) -> Result<Vec<f64>> {
        let norm = self.norm()?;
        let mut d = vec![0.0; self.net.input_dim()];
        d[0] = 1.0 / norm.scale[0];
        Ok(d)
    }

    pub fn multiplier(&self, bid: f64, features: &[f64]) -> Result<f64> {
        Ok(self.net.forward(&self.input(bid, features)?)[0])
    }

    pub fn rank_score(&self, bid: f64, features: &[f64]) -> Result<f64> {
        Ok(bid * self.multiplier(bid, features)?)
    }

    /// Multiplier and its exact derivative with respect to the raw bid.
    pub fn multiplier_grad_bid(&self, bid: f64, features: &[f64]) -> Result<(f64, f64)> {
        let t = self.trace(bid, features)?;
        Ok((t.output()[0], t.output_tangent().expect("seeded")[0]))
    }

    pub fn score_slope(&self, bid: f64, features: &[f64]) -> Result<ScoreSlope> {
        let (m, d) = self.multiplier_grad_bid(bid, features)?;
        Ok(ScoreSlope {
            multiplier: m,
            dmult_dbid: d,
            score_slope: m + bid * d,
        })
    }

    pub(crate) fn trace(&self, bid: f64, features: &[f64]) -> Result<Trace> {
        let x = self.input(bid, features)?;
        let d = self.bid_direction()?;
        Ok(self.net.forward_trace(&x, Some(&d)))
    }

    /// Accumulates `mult_adj * dpi/dtheta + slope_adj * d(dpi/db)/dtheta` into `grad`.
    pub(crate) fn accumulate_grad(
        &self,
        trace: &Trace,
        mult_adj: f64,
        bid_slope_adj: f64,
        grad: &mut [f64],
    ) {
        self.net
            .backward(trace, &[mult_adj], Some(&[bid_slope_adj]), grad);
    }

    /// Point-wise monotonicity penalty `sum_i max(0, -(pi_i + b_i * dpi_i/db))`
    /// and its parameter gradient (subgradient 0 at the hinge).
    pub fn mono_penalty(&self, batch: &[(f64, &[f64])]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::InvalidInput(
                "monotonicity penalty needs a nonempty batch".into(),
            ));
        }
        let mut grad = vec![0.0; self.net.num_params()];
        let mut loss = 0.0;
        for &(bid, x) in batch {
            let t = self.trace(bid, x)?;
            let slope = t.output()[0] + bid * t.output_tangent().expect("seeded")[0];
            if slope < 0.0 {
                loss -= slope;
                self.accumulate_grad(&t, -1.0, -bid, &mut grad);
            }
        }
        Ok((loss, grad))
    }

    /// Sum over `batch` of the squared bid elasticity `(b * dpi/db / pi)^2` and
    /// its parameter gradient. Zero exactly when the multiplier ignores the bid,
    /// which is when next-score-over-multiplier pricing equals the critical bid.
    pub fn elasticity_penalty(&self, batch: &[(f64, &[f64])]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::InvalidInput(
                "elasticity penalty needs a nonempty batch".into(),
            ));
        }
        let mut grad = vec![0.0; self.net.num_params()];
        let mut loss = 0.0;
        for &(bid, x) in batch {
            let t = self.trace(bid, x)?;
            let pi = t.output()[0];
            let dpi = t.output_tangent().expect("seeded")[0];
            let e = bid * dpi / pi;
            loss += e * e;
            self.accumulate_grad(&t, -2.0 * e * e / pi, 2.0 * e * bid / pi, &mut grad);
        }
        Ok((loss, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::mlp::{sigmoid, softplus};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_actor(seed: u64, feature_len: usize) -> (Actor, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut actor = Actor::new(feature_len, &[16, 8], &mut rng).unwrap();
        let norm = Standardizer {
            mean: (0..=feature_len)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
            scale: (0..=feature_len)
                .map(|_| rng.random_range(0.5..3.0))
                .collect(),
        };
        actor.set_normalizer(norm).unwrap();
        for p in actor.net_mut().params_mut() {
            *p *= 2.0;
        }
        (actor, rng)
    }

    #[test]
    fn unfitted_normalizer_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let actor = Actor::new(3, &DEFAULT_HIDDEN, &mut rng).unwrap();
        assert!(matches!(
            actor.multiplier(1.0, &[0.1, 0.2, 0.3]),
            Err(Error::UnfittedNormalizer)
        ));
    }

    #[test]
    fn fresh_actor_is_positive_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut actor = Actor::new(4, &DEFAULT_HIDDEN, &mut rng).unwrap();
        actor.set_normalizer(Standardizer::identity(5)).unwrap();
        // the output pre-activation is bounded by the l1 norm of the last layer (tanh inputs in [-1,1])
        let (w, b) = {
            let mut a = actor.clone();
            let (w, b) = a.net_mut().last_layer_mut();
            (w.to_vec(), b[0])
        };
        let bound = softplus(b + w.iter().map(|x| x.abs()).sum::<f64>());
        for _ in 0..200 {
            let bid = rng.random_range(0.0..100.0);
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            let pi = actor.multiplier(bid, &x).unwrap();
            assert!(pi > 0.0 && pi < bound);
        }
    }

    #[test]
    fn constant_actor() {
        let actor = Actor::constant(3, &DEFAULT_HIDDEN, 0.7).unwrap();
        for bid in [0.0, 1.0, 55.0] {
            let (pi, d) = actor.multiplier_grad_bid(bid, &[0.1, 0.5, 2.0]).unwrap();
            assert!((pi - softplus(0.7)).abs() < 1e-15);
            assert_eq!(d, 0.0);
        }
        let xs = [[0.1, 0.2, 0.3], [0.4, 0.5, 0.6], [0.7, 0.8, 0.9]];
        let batch: Vec<(f64, &[f64])> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| (i as f64, x.as_slice()))
            .collect();
        let (loss, grad) = actor.mono_penalty(&batch).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn bid_gradient_matches_finite_differences() {
        for seed in 0..50 {
            let (actor, mut rng) = random_actor(seed, 5);
            let bid = rng.random_range(0.1..20.0);
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (_, d) = actor.multiplier_grad_bid(bid, &x).unwrap();
            let h = 1e-4 * bid.abs().max(1.0);
            let fd = (actor.multiplier(bid + h, &x).unwrap()
                - actor.multiplier(bid - h, &x).unwrap())
                / (2.0 * h);
            let rel = (d - fd).abs() / d.abs().max(fd.abs()).max(1e-8);
            assert!(
                rel <= 1e-4 || (d - fd).abs() < 1e-10,
                "seed {seed}: {d} vs {fd}"
            );
        }
    }

    #[test]
    fn single_layer_bid_gradient_closed_form() {
        let net = Mlp::from_params(
            &[3, 1],
            Activation::Tanh,
            Activation::Softplus,
            vec![0.8, -0.3, 0.5, 0.1],
        )
        .unwrap();
        let norm = Standardizer {
            mean: vec![2.0, 0.0, 0.0],
            scale: vec![4.0, 1.0, 1.0],
        };
        let actor = Actor::from_parts(net, Some(norm)).unwrap();
        let (bid, x) = (6.0, [0.5, -1.0]);
        let pre = 0.8 * (bid - 2.0) / 4.0 - 0.3 * 0.5 + 0.5 * -1.0 + 0.1;
        let (pi, d) = actor.multiplier_grad_bid(bid, &x).unwrap();
        assert!((pi - softplus(pre)).abs() < 1e-14);
        assert!((d - sigmoid(pre) * 0.8 / 4.0).abs() < 1e-14);
    }

    #[test]
    fn penalty_hinge_arithmetic() {
        // Single layer, features ignored: pi = softplus(3 - b), so the score slope
        // pi + b*dpi/db turns negative for moderate bids.
        let net = Mlp::from_params(
            &[2, 1],
            Activation::Tanh,
            Activation::Softplus,
            vec![-1.0, 0.0, 3.0],
        )
        .unwrap();
        let actor = Actor::from_parts(net, Some(Standardizer::identity(2))).unwrap();
        let slope = |b: f64| {
            let s = actor.score_slope(b, &[0.0]).unwrap();
            s.score_slope
        };
        assert!(slope(0.0) > 0.0 && slope(0.05) > 0.0 && slope(3.0) < -0.5);
        // locate the bid where the slope is exactly -0.5
        let (mut lo, mut hi) = (0.05, 3.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > -0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let bs = [0.0, 0.05, 0.5 * (lo + hi)];
        let batch: Vec<(f64, &[f64])> = bs.iter().map(|&b| (b, [0.0].as_slice())).collect();
        let (loss, _) = actor.mono_penalty(&batch).unwrap();
        assert!((loss - 0.5).abs() < 1e-12, "{loss}");
    }

    #[test]
    fn elasticity_gradient_matches_finite_differences() {
        for seed in 0..10 {
            let (actor, mut rng) = random_actor(100 + seed, 3);
            let xs: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let batch: Vec<(f64, &[f64])> = xs
                .iter()
                .map(|x| (rng.random_range(0.2..10.0), x.as_slice()))
                .collect();
            let (loss, grad) = actor.elasticity_penalty(&batch).unwrap();
            assert!(loss > 0.0);
            for k in (0..grad.len()).step_by(7) {
                let h = 1e-6;
                let mut a = actor.clone();
                a.net_mut().params_mut()[k] += h;
                let up = a.elasticity_penalty(&batch).unwrap().0;
                a.net_mut().params_mut()[k] -= 2.0 * h;
                let down = a.elasticity_penalty(&batch).unwrap().0;
                let fd = (up - down) / (2.0 * h);
                let err = (grad[k] - fd).abs() / grad[k].abs().max(fd.abs()).max(1e-6);
                assert!(err <= 1e-4, "seed {seed} param {k}: {} vs {fd}", grad[k]);
            }
        }
    }

    #[test]
    fn bid_free_multiplier_has_no_elasticity() {
        let actor = Actor::constant(2, &DEFAULT_HIDDEN, -0.4).unwrap();
        let x = [0.3, 0.9];
        let (loss, grad) = actor
            .elasticity_penalty(&[(1.0, &x[..]), (40.0, &x[..])])
            .unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }
}
