//! Layers: sigmoid dense layer, standard LSTM cell, and the sigmoid output
//! head. Each layer exposes a cached forward pass and an exact backward pass
//! that accumulates parameter gradients into a same-shaped layer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::math::{dot, sigmoid, Matrix};

/// Fully connected layer with sigmoid activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn glorot(out_dim: usize, in_dim: usize, rng: &mut impl Rng) -> DenseLayer {
        DenseLayer { weights: Matrix::glorot(out_dim, in_dim, rng), bias: vec![0.0; out_dim] }
    }

    pub fn zeros(out_dim: usize, in_dim: usize) -> DenseLayer {
        DenseLayer { weights: Matrix::zeros(out_dim, in_dim), bias: vec![0.0; out_dim] }
    }

    pub fn zeros_like(&self) -> DenseLayer {
        DenseLayer::zeros(self.out_dim(), self.in_dim())
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows
    }

    /// `sigmoid(W x + b)`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim() {
            return Err(Error::shape(format!(
                "dense layer expects {} inputs, got {}",
                self.in_dim(),
                x.len()
            )));
        }
        let mut y = self.weights.matvec(x);
        for (v, b) in y.iter_mut().zip(&self.bias) {
            *v = sigmoid(*v + b);
        }
        Ok(y)
    }

    /// Accumulates gradients for the forward call that produced `y` from `x`;
    /// `dy` is the loss gradient at the output. Returns nothing for the input
    /// side because callers feed constants into dense layers here.
    pub fn backward(&self, x: &[f64], y: &[f64], dy: &[f64], grads: &mut DenseLayer) {
        let dz: Vec<f64> = dy.iter().zip(y).map(|(&d, &v)| d * v * (1.0 - v)).collect();
        grads.weights.add_outer(&dz, x);
        for (b, d) in grads.bias.iter_mut().zip(&dz) {
            *b += d;
        }
    }
}

/// One gate's parameters: input weights, recurrent weights, bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmGate {
    pub w_input: Matrix,
    pub w_hidden: Matrix,
    pub bias: Vec<f64>,
}

impl LstmGate {
    fn glorot(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> LstmGate {
        LstmGate {
            w_input: Matrix::glorot(hidden_dim, input_dim, rng),
            w_hidden: Matrix::glorot(hidden_dim, hidden_dim, rng),
            bias: vec![0.0; hidden_dim],
        }
    }

    fn zeros(input_dim: usize, hidden_dim: usize) -> LstmGate {
        LstmGate {
            w_input: Matrix::zeros(hidden_dim, input_dim),
            w_hidden: Matrix::zeros(hidden_dim, hidden_dim),
            bias: vec![0.0; hidden_dim],
        }
    }

    /// Pre-activation `W x + U h + b`.
    fn pre(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut z = self.w_input.matvec(x);
        self.w_hidden.matvec_add(h, &mut z);
        for (v, b) in z.iter_mut().zip(&self.bias) {
            *v += b;
        }
        z
    }
}

/// Standard LSTM cell (no peepholes) with zero-initialized state. Gate order
/// throughout is input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub input_gate: LstmGate,
    pub forget_gate: LstmGate,
    pub candidate: LstmGate,
    pub output_gate: LstmGate,
}

/// Cached activations for one LSTM time step.
struct LstmStep {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Cached forward pass over a full sequence.
pub struct LstmCache {
    steps: Vec<LstmStep>,
    pub h_final: Vec<f64>,
}

impl LstmCell {
    pub fn glorot(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> LstmCell {
        LstmCell {
            input_dim,
            hidden_dim,
            input_gate: LstmGate::glorot(input_dim, hidden_dim, rng),
            forget_gate: LstmGate::glorot(input_dim, hidden_dim, rng),
            candidate: LstmGate::glorot(input_dim, hidden_dim, rng),
            output_gate: LstmGate::glorot(input_dim, hidden_dim, rng),
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> LstmCell {
        LstmCell {
            input_dim,
            hidden_dim,
            input_gate: LstmGate::zeros(input_dim, hidden_dim),
            forget_gate: LstmGate::zeros(input_dim, hidden_dim),
            candidate: LstmGate::zeros(input_dim, hidden_dim),
            output_gate: LstmGate::zeros(input_dim, hidden_dim),
        }
    }

    pub fn zeros_like(&self) -> LstmCell {
        LstmCell::zeros(self.input_dim, self.hidden_dim)
    }

    /// Final hidden state after consuming the sequence, without caching.
    pub fn forward(&self, sequence: &[Vec<f64>]) -> Result<Vec<f64>> {
        if sequence.is_empty() {
            return Err(Error::shape("LSTM sequence must not be empty"));
        }
        let mut h = vec![0.0; self.hidden_dim];
        let mut c = vec![0.0; self.hidden_dim];
        for (t, x) in sequence.iter().enumerate() {
            if x.len() != self.input_dim {
                return Err(Error::shape(format!(
                    "LSTM step {t} expects {} inputs, got {}",
                    self.input_dim,
                    x.len()
                )));
            }
            let i = self.input_gate.pre(x, &h);
            let f = self.forget_gate.pre(x, &h);
            let g = self.candidate.pre(x, &h);
            let o = self.output_gate.pre(x, &h);
            for k in 0..self.hidden_dim {
                c[k] = sigmoid(f[k]) * c[k] + sigmoid(i[k]) * g[k].tanh();
                h[k] = sigmoid(o[k]) * c[k].tanh();
            }
        }
        Ok(h)
    }

    pub fn forward_cached(&self, sequence: &[Vec<f64>]) -> Result<LstmCache> {
        if sequence.is_empty() {
            return Err(Error::shape("LSTM sequence must not be empty"));
        }
        let mut h = vec![0.0; self.hidden_dim];
        let mut c = vec![0.0; self.hidden_dim];
        let mut steps = Vec::with_capacity(sequence.len());
        for (t, x) in sequence.iter().enumerate() {
            if x.len() != self.input_dim {
                return Err(Error::shape(format!(
                    "LSTM step {t} expects {} inputs, got {}",
                    self.input_dim,
                    x.len()
                )));
            }
            let i: Vec<f64> = self.input_gate.pre(x, &h).into_iter().map(sigmoid).collect();
            let f: Vec<f64> = self.forget_gate.pre(x, &h).into_iter().map(sigmoid).collect();
            let g: Vec<f64> = self.candidate.pre(x, &h).into_iter().map(f64::tanh).collect();
            let o: Vec<f64> = self.output_gate.pre(x, &h).into_iter().map(sigmoid).collect();
            let c_new: Vec<f64> = (0..self.hidden_dim).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
            let tanh_c: Vec<f64> = c_new.iter().map(|&v| v.tanh()).collect();
            let h_new: Vec<f64> = (0..self.hidden_dim).map(|k| o[k] * tanh_c[k]).collect();
            steps.push(LstmStep { x: x.clone(), h_prev: h, c_prev: c, i, f, g, o, tanh_c });
            h = h_new;
            c = c_new;
        }
        Ok(LstmCache { steps, h_final: h })
    }

    /// Backpropagation through time from the gradient at the final hidden
    /// state, accumulating parameter gradients into `grads`.
    pub fn backward(&self, cache: &LstmCache, dh_final: &[f64], grads: &mut LstmCell) {
        let n = self.hidden_dim;
        let mut dh = dh_final.to_vec();
        let mut dc = vec![0.0; n];
        for step in cache.steps.iter().rev() {
            // h = o * tanh(c); c = f * c_prev + i * g.
            let mut dz_o = vec![0.0; n];
            let mut dz_i = vec![0.0; n];
            let mut dz_f = vec![0.0; n];
            let mut dz_g = vec![0.0; n];
            for k in 0..n {
                let tc = step.tanh_c[k];
                dz_o[k] = dh[k] * tc * step.o[k] * (1.0 - step.o[k]);
                let dck = dc[k] + dh[k] * step.o[k] * (1.0 - tc * tc);
                dz_i[k] = dck * step.g[k] * step.i[k] * (1.0 - step.i[k]);
                dz_g[k] = dck * step.i[k] * (1.0 - step.g[k] * step.g[k]);
                dz_f[k] = dck * step.c_prev[k] * step.f[k] * (1.0 - step.f[k]);
                dc[k] = dck * step.f[k];
            }
            let mut dh_prev = vec![0.0; n];
            for (gate, grad_gate, dz) in [
                (&self.input_gate, &mut grads.input_gate, &dz_i),
                (&self.forget_gate, &mut grads.forget_gate, &dz_f),
                (&self.candidate, &mut grads.candidate, &dz_g),
                (&self.output_gate, &mut grads.output_gate, &dz_o),
            ] {
                grad_gate.w_input.add_outer(dz, &step.x);
                grad_gate.w_hidden.add_outer(dz, &step.h_prev);
                for (b, d) in grad_gate.bias.iter_mut().zip(dz) {
                    *b += d;
                }
                for (acc, v) in dh_prev.iter_mut().zip(gate.w_hidden.t_matvec(dz)) {
                    *acc += v;
                }
            }
            dh = dh_prev;
        }
    }
}

/// Single sigmoid output neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl OutputHead {
    pub fn glorot(in_dim: usize, rng: &mut impl Rng) -> OutputHead {
        let bound = (6.0 / (in_dim + 1) as f64).sqrt();
        OutputHead {
            weights: (0..in_dim).map(|_| rng.random_range(-bound..bound)).collect(),
            bias: 0.0,
        }
    }

    pub fn zeros(in_dim: usize) -> OutputHead {
        OutputHead { weights: vec![0.0; in_dim], bias: 0.0 }
    }

    pub fn zeros_like(&self) -> OutputHead {
        OutputHead::zeros(self.weights.len())
    }

    pub fn in_dim(&self) -> usize {
        self.weights.len()
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::shape(format!(
                "output head expects {} inputs, got {}",
                self.weights.len(),
                x.len()
            )));
        }
        Ok(sigmoid(dot(&self.weights, x) + self.bias))
    }

    /// Accumulates gradients given the pre-sigmoid gradient `dz` and returns
    /// the gradient at the input.
    pub fn backward(&self, x: &[f64], dz: f64, grads: &mut OutputHead) -> Vec<f64> {
        for (w, &xv) in grads.weights.iter_mut().zip(x) {
            *w += dz * xv;
        }
        grads.bias += dz;
        self.weights.iter().map(|&w| w * dz).collect()
    }
}
