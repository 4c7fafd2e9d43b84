//! Dense feed-forward network over a flat `f64` parameter vector.
//!
//! Besides the usual forward/backward pair, the network can carry a forward-mode
//! tangent (the derivative of every activation along one input direction) and
//! back-propagate through it. That is what the bid-monotonicity penalty needs: it
//! is a function of both the output and its derivative with respect to the bid.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Softplus,
    Identity,
}

impl Activation {
    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Tanh => 0,
            Activation::Softplus => 1,
            Activation::Identity => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Softplus),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }

    /// Value, first and second derivative at `z`.
    #[inline]
    pub fn eval(self, z: f64) -> (f64, f64, f64) {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                let d1 = 1.0 - t * t;
                (t, d1, -2.0 * t * d1)
            }
            Activation::Softplus => {
                let s = sigmoid(z);
                (softplus(z), s, s * (1.0 - s))
            }
            Activation::Identity => (z, 1.0, 0.0),
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn softplus(z: f64) -> f64 {
    // log(1 + e^z) without overflow
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct LayerShape {
    inputs: usize,
    outputs: usize,
    /// Offset of the row-major `outputs x inputs` weight block.
    w_off: usize,
    b_off: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    dims: Vec<usize>,
    shapes: Vec<LayerShape>,
    params: Vec<f64>,
    hidden: Activation,
    output: Activation,
}

/// Activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `outs[0]` is the input, `outs[l]` the output of layer `l`.
    outs: Vec<Vec<f64>>,
    /// Pre-activations of each layer.
    pre: Vec<Vec<f64>>,
    /// Tangents of `outs` and `pre` along the seeded input direction.
    tan_outs: Option<Vec<Vec<f64>>>,
    tan_pre: Option<Vec<Vec<f64>>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.outs
            .last()
            .expect("trace has at least the input layer")
    }

    /// Directional derivative of the output along the seeded input direction.
    pub fn output_tangent(&self) -> Option<&[f64]> {
        self.tan_outs
            .as_ref()
            .map(|t| t.last().expect("non-empty").as_slice())
    }
}

impl Mlp {
    fn layout(dims: &[usize]) -> (Vec<LayerShape>, usize) {
        let mut shapes = Vec::with_capacity(dims.len().saturating_sub(1));
        let mut off = 0;
        for w in dims.windows(2) {
            let (inputs, outputs) = (w[0], w[1]);
            let w_off = off;
            let b_off = w_off + inputs * outputs;
            off = b_off + outputs;
            shapes.push(LayerShape {
                inputs,
                outputs,
                w_off,
                b_off,
            });
        }
        (shapes, off)
    }

    /// Network with Glorot-uniform weights and zero biases.
    pub fn new<R: Rng + ?Sized>(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut mlp = Self::zeros(dims, hidden, output)?;
        for s in &mlp.shapes {
            let limit = (6.0 / (s.inputs + s.outputs) as f64).sqrt();
            for w in &mut mlp.params[s.w_off..s.b_off] {
                *w = rng.random_range(-limit..=limit);
            }
        }
        Ok(mlp)
    }

    pub fn zeros(dims: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Shape(format!("invalid layer dims {dims:?}")));
        }
        let (shapes, n) = Self::layout(dims);
        Ok(Self {
            dims: dims.to_vec(),
            shapes,
            params: vec![0.0; n],
            hidden,
            output,
        })
    }

    pub fn from_params(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        let mut mlp = Self::zeros(dims, hidden, output)?;
        if params.len() != mlp.params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameters for dims {dims:?}, got {}",
                mlp.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Shape("non-finite parameter".into()));
        }
        mlp.params = params;
        Ok(mlp)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("dims non-empty")
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Mutable view of the last layer's weights and bias.
    pub fn last_layer_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        let s = *self.shapes.last().expect("at least one layer");
        let (w, rest) = self.params[s.w_off..].split_at_mut(s.b_off - s.w_off);
        (w, &mut rest[..s.outputs])
    }

    /// Mutable view of layer `l`'s row-major weights and bias.
    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let s = self.shapes[l];
        let (w, rest) = self.params[s.w_off..].split_at_mut(s.b_off - s.w_off);
        (w, &mut rest[..s.outputs])
    }

    /// Plain forward pass.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.input_dim(), "input dimension");
        let mut h = input.to_vec();
        let last = self.shapes.len() - 1;
        for (l, s) in self.shapes.iter().enumerate() {
            let act = if l == last { self.output } else { self.hidden };
            let w = &self.params[s.w_off..s.b_off];
            let b = &self.params[s.b_off..s.b_off + s.outputs];
            h = (0..s.outputs)
                .map(|o| {
                    let row = &w[o * s.inputs..(o + 1) * s.inputs];
                    act.eval(b[o] + dot(row, &h)).0
                })
                .collect();
        }
        h
    }

    /// Forward pass that records activations, and optionally propagates a tangent
    /// seeded at the input with `direction`.
    pub fn forward_trace(&self, input: &[f64], direction: Option<&[f64]>) -> Trace {
        assert_eq!(input.len(), self.input_dim(), "input dimension");
        let n_layers = self.shapes.len();
        let mut outs = Vec::with_capacity(n_layers + 1);
        let mut pre = Vec::with_capacity(n_layers);
        outs.push(input.to_vec());
        let mut tan = direction.map(|d| {
            assert_eq!(d.len(), input.len(), "tangent dimension");
            (vec![d.to_vec()], Vec::with_capacity(n_layers))
        });
        for (l, s) in self.shapes.iter().enumerate() {
            let act = if l == n_layers - 1 {
                self.output
            } else {
                self.hidden
            };
            let w = &self.params[s.w_off..s.b_off];
            let b = &self.params[s.b_off..s.b_off + s.outputs];
            let h_in = &outs[l];
            let mut z = vec![0.0; s.outputs];
            let mut h = vec![0.0; s.outputs];
            let mut tz = tan.as_ref().map(|_| vec![0.0; s.outputs]);
            let mut th = tan.as_ref().map(|_| vec![0.0; s.outputs]);
            for o in 0..s.outputs {
                let row = &w[o * s.inputs..(o + 1) * s.inputs];
                z[o] = b[o] + dot(row, h_in);
                let (a, d1, _) = act.eval(z[o]);
                h[o] = a;
                if let (Some((touts, _)), Some(tz), Some(th)) =
                    (tan.as_ref(), tz.as_mut(), th.as_mut())
                {
                    tz[o] = dot(row, &touts[l]);
                    th[o] = d1 * tz[o];
                }
            }
            if let Some((touts, tpre)) = tan.as_mut() {
                touts.push(th.expect("tangent allocated"));
                tpre.push(tz.expect("tangent allocated"));
            }
            pre.push(z);
            outs.push(h);
        }
        let (tan_outs, tan_pre) = match tan {
            Some((a, b)) => (Some(a), Some(b)),
            None => (None, None),
        };
        Trace {
            outs,
            pre,
            tan_outs,
            tan_pre,
        }
    }

    /// Reverse pass. Accumulates (`+=`) parameter gradients into `grad` and returns
    /// the adjoint of the input.
    ///
    /// `out_adj` is the adjoint of the output; `tan_out_adj` the adjoint of the
    /// output tangent, which requires the trace to carry a tangent.
    pub fn backward(
        &self,
        trace: &Trace,
        out_adj: &[f64],
        tan_out_adj: Option<&[f64]>,
        grad: &mut [f64],
    ) -> Vec<f64> {
        assert_eq!(grad.len(), self.params.len(), "gradient buffer length");
        assert_eq!(out_adj.len(), self.output_dim(), "output adjoint length");
        let with_tan = tan_out_adj.is_some();
        if with_tan {
            assert!(trace.tan_outs.is_some(), "trace has no tangent");
        }
        let n_layers = self.shapes.len();
        let mut h_adj = out_adj.to_vec();
        let mut th_adj = tan_out_adj.map(<[f64]>::to_vec);
        for l in (0..n_layers).rev() {
            let s = self.shapes[l];
            let act = if l == n_layers - 1 {
                self.output
            } else {
                self.hidden
            };
            let z = &trace.pre[l];
            let h_in = &trace.outs[l];
            let mut z_adj = vec![0.0; s.outputs];
            let mut tz_adj = vec![0.0; if with_tan { s.outputs } else { 0 }];
            for o in 0..s.outputs {
                let (_, d1, d2) = act.eval(z[o]);
                z_adj[o] = d1 * h_adj[o];
                if let Some(th_adj) = th_adj.as_ref() {
                    let tz = trace.tan_pre.as_ref().expect("tangent")[l][o];
                    // th = act'(z) * tz
                    tz_adj[o] = d1 * th_adj[o];
                    z_adj[o] += d2 * tz * th_adj[o];
                }
            }
            let w = &self.params[s.w_off..s.b_off];
            let mut next_h_adj = vec![0.0; s.inputs];
            let mut next_th_adj = if with_tan {
                Some(vec![0.0; s.inputs])
            } else {
                None
            };
            for o in 0..s.outputs {
                let row = &w[o * s.inputs..(o + 1) * s.inputs];
                let g_row = &mut grad[s.w_off + o * s.inputs..s.w_off + (o + 1) * s.inputs];
                let za = z_adj[o];
                for i in 0..s.inputs {
                    g_row[i] += za * h_in[i];
                    next_h_adj[i] += za * row[i];
                }
                if let Some(nta) = next_th_adj.as_mut() {
                    let th_in = &trace.tan_outs.as_ref().expect("tangent")[l];
                    let ta = tz_adj[o];
                    for i in 0..s.inputs {
                        g_row[i] += ta * th_in[i];
                        nta[i] += ta * row[i];
                    }
                }
                grad[s.b_off + o] += za;
            }
            h_adj = next_h_adj;
            th_adj = next_th_adj;
        }
        h_adj
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
