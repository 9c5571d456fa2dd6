//! Dense feed-forward networks with explicit flat parameter vectors.
//!
//! Hidden layers apply the activation; the output layer is affine with no
//! squashing. Parameters for layer `l` are stored as a row-major
//! `out × in` weight block followed by `out` biases.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ShapError};
use crate::rng::RandomSource;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Elu,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Elu => {
                if z > 0.0 {
                    1.0
                } else {
                    z.exp()
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    widths: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct Trace {
    /// `acts[0]` is the input; `acts[l+1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    /// Pre-activations of each layer.
    pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("trace has an output")
    }
}

pub(crate) fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Zero-initialized network.
    pub fn zeros(widths: Vec<usize>, activation: Activation) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(ShapError::Argument(format!(
                "network widths {widths:?} need an input and output layer of positive width"
            )));
        }
        let n = param_count(&widths);
        Ok(Self { widths, activation, params: vec![0.0; n] })
    }

    /// Fan-in scaled uniform weights, zero biases.
    pub fn init(widths: Vec<usize>, activation: Activation, rng: &mut RandomSource) -> Result<Self> {
        let mut net = Self::zeros(widths, activation)?;
        let mut offset = 0;
        for l in 0..net.layers() {
            let (fan_in, out) = (net.widths[l], net.widths[l + 1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            for w in &mut net.params[offset..offset + fan_in * out] {
                *w = bound * (2.0 * rng.uniform() - 1.0);
            }
            offset += fan_in * out + out;
        }
        Ok(net)
    }

    pub fn from_params(widths: Vec<usize>, activation: Activation, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(widths, activation)?;
        if params.len() != net.params.len() {
            return Err(ShapError::Format(format!(
                "expected {} parameters, found {}",
                net.params.len(),
                params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("at least two layers")
    }

    fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_width() {
            return Err(ShapError::Argument(format!(
                "input of length {} for a network expecting {}",
                x.len(),
                self.input_width()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut offset = 0;
        for l in 0..self.layers() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let (w, rest) = self.params[offset..].split_at(n_in * n_out);
            let b = &rest[..n_out];
            let last = l + 1 == self.layers();
            cur = (0..n_out)
                .map(|o| {
                    let z = dot(&w[o * n_in..(o + 1) * n_in], &cur) + b[o];
                    if last {
                        z
                    } else {
                        self.activation.apply(z)
                    }
                })
                .collect();
            offset += n_in * n_out + n_out;
        }
        Ok(cur)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut acts = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(self.layers());
        let mut offset = 0;
        for l in 0..self.layers() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let input = &acts[l];
            let z: Vec<f64> = (0..n_out).map(|o| dot(&w[o * n_in..(o + 1) * n_in], input) + b[o]).collect();
            let last = l + 1 == self.layers();
            let a = if last { z.clone() } else { z.iter().map(|&v| self.activation.apply(v)).collect() };
            pre.push(z);
            acts.push(a);
            offset += n_in * n_out + n_out;
        }
        Ok(Trace { acts, pre })
    }

    /// Adds `∂L/∂θ` to `grad` given `∂L/∂output` for the traced pass.
    pub fn backward(&self, trace: &Trace, grad_output: &[f64], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params.len());
        debug_assert_eq!(grad_output.len(), self.output_width());
        let mut offsets = Vec::with_capacity(self.layers());
        let mut off = 0;
        for l in 0..self.layers() {
            offsets.push(off);
            off += self.widths[l] * self.widths[l + 1] + self.widths[l + 1];
        }
        let mut delta = grad_output.to_vec();
        for l in (0..self.layers()).rev() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            if l + 1 != self.layers() {
                for (dz, &z) in delta.iter_mut().zip(&trace.pre[l]) {
                    *dz *= self.activation.derivative(z);
                }
            }
            let input = &trace.acts[l];
            let base = offsets[l];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[base + o * n_in..base + (o + 1) * n_in];
                for (g, &a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grad[base + n_in * n_out + o] += d;
            }
            if l > 0 {
                let w = &self.params[base..base + n_in * n_out];
                let mut next = vec![0.0; n_in];
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    for (nx, &wv) in next.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *nx += d * wv;
                    }
                }
                delta = next;
            }
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    /// Adam moments with decoupled weight decay.
    Adam,
}

#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    weight_decay: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, weight_decay: f64, n_params: usize) -> Self {
        Self {
            kind,
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * (g + self.weight_decay * *p);
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let c1 = 1.0 - self.beta1.powi(self.t as i32);
                let c2 = 1.0 - self.beta2.powi(self.t as i32);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                    self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                    let mh = self.m[i] / c1;
                    let vh = self.v[i] / c2;
                    params[i] -= self.lr * (mh / (vh.sqrt() + self.eps) + self.weight_decay * params[i]);
                }
            }
        }
    }
}
