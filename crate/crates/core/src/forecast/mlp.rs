//! Two-layer perceptron: sigmoid hidden layer, linear scalar output.

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub n_in: usize,
    pub hidden: usize,
    /// Row-major `hidden x n_in`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(n_in: usize, hidden: usize, rng: &mut R) -> Self {
        let a = (6.0 / (n_in + hidden) as f64).sqrt();
        let b = (6.0 / (hidden + 1) as f64).sqrt();
        Mlp {
            n_in,
            hidden,
            w1: (0..hidden * n_in).map(|_| rng.random_range(-a..a)).collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden).map(|_| rng.random_range(-b..b)).collect(),
            b2: 0.0,
        }
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    /// Output and hidden activations.
    pub fn forward_with(&self, x: &[f64], act: &mut [f64]) -> f64 {
        let mut out = self.b2;
        for h in 0..self.hidden {
            let row = &self.w1[h * self.n_in..(h + 1) * self.n_in];
            let z: f64 = self.b1[h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            act[h] = sigmoid(z);
            out += self.w2[h] * act[h];
        }
        out
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut act = vec![0.0; self.hidden];
        self.forward_with(x, &mut act)
    }

    /// Accumulates `dout * d(output)/d(params)` into `grad` (flat layout of
    /// [`Mlp::params`]). `act` must come from `forward_with(x)`.
    pub fn backward(&self, x: &[f64], act: &[f64], dout: f64, grad: &mut [f64]) {
        let (gw1, rest) = grad.split_at_mut(self.w1.len());
        let (gb1, rest) = rest.split_at_mut(self.hidden);
        let (gw2, gb2) = rest.split_at_mut(self.hidden);
        gb2[0] += dout;
        for h in 0..self.hidden {
            gw2[h] += dout * act[h];
            let dz = dout * self.w2[h] * act[h] * (1.0 - act[h]);
            gb1[h] += dz;
            let row = &mut gw1[h * self.n_in..(h + 1) * self.n_in];
            for (g, v) in row.iter_mut().zip(x) {
                *g += dz * v;
            }
        }
    }

    /// Flat parameter vector: `w1, b1, w2, b2`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (a, rest) = p.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.hidden);
        let (c, d) = rest.split_at(self.hidden);
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2 = d[0];
    }
}

/// Adam with coupled L2 weight decay (`grad += decay * param`).
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64, weight_decay: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    /// `grad` excludes the decay term; it is added here.
    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for i in 0..params.len() {
            let g = grad[i] + self.weight_decay * params[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}
