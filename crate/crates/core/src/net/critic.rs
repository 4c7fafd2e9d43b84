use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, Mlp};
use super::normalize::Standardizer;
use crate::error::{Error, Result};

/// State-action value network `Q(s, a)`; the action is the rank score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Critic {
    net: Mlp,
    norm: Option<Standardizer>,
}

/// One regression sample for the critic.
#[derive(Debug, Clone, Copy)]
pub struct CriticSample<'a> {
    pub state: &'a [f64],
    pub action: f64,
    pub target: f64,
}

impl Critic {
    pub fn new<R: Rng + ?Sized>(state_len: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        Ok(Self {
            net: Mlp::new(
                &Self::dims(state_len, hidden),
                Activation::Tanh,
                Activation::Identity,
                rng,
            )?,
            norm: None,
        })
    }

    /// Zero weights and output bias `c`: `Q = c` everywhere.
    pub fn constant(state_len: usize, hidden: &[usize], c: f64) -> Result<Self> {
        let mut net = Mlp::zeros(
            &Self::dims(state_len, hidden),
            Activation::Tanh,
            Activation::Identity,
        )?;
        net.last_layer_mut().1[0] = c;
        Ok(Self {
            net,
            norm: Some(Standardizer::identity(state_len + 1)),
        })
    }

    pub fn from_parts(net: Mlp, norm: Option<Standardizer>) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::Shape("critic must have a scalar output".into()));
        }
        Ok(Self { net, norm })
    }

    fn dims(state_len: usize, hidden: &[usize]) -> Vec<usize> {
        let mut dims = vec![state_len + 1];
        dims.extend_from_slice(hidden);
        dims.push(1);
        dims
    }

    pub fn state_len(&self) -> usize {
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
            return Err(Error::Shape(
                "normalizer width differs from critic input".into(),
            ));
        }
        self.norm = Some(norm);
        Ok(())
    }

    fn input(&self, state: &[f64], action: f64) -> Result<Vec<f64>> {
        let norm = self.norm.as_ref().ok_or(Error::UnfittedNormalizer)?;
        if state.len() != self.state_len() {
            return Err(Error::Shape(format!(
                "critic expects state of width {}, got {}",
                self.state_len(),
                state.len()
            )));
        }
        Ok(state
            .iter()
            .chain(std::iter::once(&action))
            .zip(norm.mean.iter().zip(&norm.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn q(&self, state: &[f64], action: f64) -> Result<f64> {
        Ok(self.net.forward(&self.input(state, action)?)[0])
    }

    /// `Q(s, a)` and `dQ/da` with respect to the raw action.
    pub fn q_grad_action(&self, state: &[f64], action: f64) -> Result<(f64, f64)> {
        let x = self.input(state, action)?;
        let norm = self.norm.as_ref().expect("checked in input");
        let mut dir = vec![0.0; x.len()];
        let last = x.len() - 1;
        dir[last] = 1.0 / norm.scale[last];
        let t = self.net.forward_trace(&x, Some(&dir));
        Ok((t.output()[0], t.output_tangent().expect("seeded")[0]))
    }

    /// Mean squared error over the batch and its parameter gradient.
    pub fn mse_loss_grad(&self, batch: &[CriticSample<'_>]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::InvalidInput(
                "critic loss needs a nonempty batch".into(),
            ));
        }
        let n = batch.len() as f64;
        let mut grad = vec![0.0; self.net.num_params()];
        let mut loss = 0.0;
        for s in batch {
            let x = self.input(s.state, s.action)?;
            let t = self.net.forward_trace(&x, None);
            let err = t.output()[0] - s.target;
            loss += err * err / n;
            self.net.backward(&t, &[2.0 * err / n], None, &mut grad);
        }
        Ok((loss, grad))
    }

    pub fn mse(&self, batch: &[CriticSample<'_>]) -> Result<f64> {
        let n = batch.len() as f64;
        batch.iter().try_fold(0.0, |acc, s| {
            let e = self.q(s.state, s.action)? - s.target;
            Ok(acc + e * e / n)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_critic() {
        let c = Critic::constant(3, &[8, 4], -1.25).unwrap();
        assert_eq!(c.q(&[1.0, 2.0, 3.0], 0.4).unwrap(), -1.25);
        assert_eq!(
            c.q_grad_action(&[0.0, 0.0, 0.0], 9.0).unwrap(),
            (-1.25, 0.0)
        );
    }

    #[test]
    fn action_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut c = Critic::new(2, &[12, 6], &mut rng).unwrap();
        c.set_normalizer(Standardizer {
            mean: vec![0.5, -0.2, 1.0],
            scale: vec![2.0, 0.7, 0.3],
        })
        .unwrap();
        for _ in 0..50 {
            let s = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let a = rng.random_range(0.0..3.0);
            let (_, d) = c.q_grad_action(&s, a).unwrap();
            let h = 1e-4 * a.abs().max(1.0);
            let fd = (c.q(&s, a + h).unwrap() - c.q(&s, a - h).unwrap()) / (2.0 * h);
            assert!((d - fd).abs() / d.abs().max(fd.abs()).max(1e-8) <= 1e-4);
        }
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut c = Critic::new(2, &[6, 5], &mut rng).unwrap();
        c.set_normalizer(Standardizer::identity(3)).unwrap();
        let states: Vec<[f64; 2]> = (0..8)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let batch: Vec<CriticSample> = states
            .iter()
            .map(|s| CriticSample {
                state: s,
                action: s[0] * 0.5 + 0.3,
                target: s[1] - s[0],
            })
            .collect();
        let (_, g) = c.mse_loss_grad(&batch).unwrap();
        for j in 0..c.net().num_params() {
            let h = 1e-6;
            let mut p = c.clone();
            p.net_mut().params_mut()[j] += h;
            let mut m = c.clone();
            m.net_mut().params_mut()[j] -= h;
            let fd = (p.mse(&batch).unwrap() - m.mse(&batch).unwrap()) / (2.0 * h);
            assert!(
                (g[j] - fd).abs() <= 1e-4 * g[j].abs().max(fd.abs()).max(1e-6),
                "param {j}"
            );
        }
    }
}
