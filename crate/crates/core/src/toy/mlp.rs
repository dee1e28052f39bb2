//! Fully connected ReLU network on a fixed all-ones input, with manual
//! backpropagation and Adam. All parameters live in one flat buffer so the
//! optimizer and the gradient checker can address them by index.

use serde::{Deserialize, Serialize};

use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
}

#[derive(Debug, Clone, Copy)]
struct LayerShape {
    inputs: usize,
    outputs: usize,
    w_off: usize,
    b_off: usize,
}

/// `depth` linear layers: `depth - 1` hidden `width -> width` ReLU layers
/// followed by a linear `width -> outputs` head. `depth = 1` is a plain
/// linear model of the constant input.
#[derive(Debug, Clone)]
pub struct Mlp {
    input: Vec<f64>,
    shapes: Vec<LayerShape>,
    params: Vec<f64>,
}

/// Pre-activations of every layer from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `pre[l]` is the affine output of layer `l`; the last entry is the
    /// network output.
    pub pre: Vec<Vec<f64>>,
}

impl ForwardPass {
    pub fn output(&self) -> &[f64] {
        self.pre.last().expect("at least one layer")
    }

    /// ReLU on/off pattern of the hidden units.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.pre[..self.pre.len() - 1]
            .iter()
            .flatten()
            .map(|&z| z > 0.0)
            .collect()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn relu(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| v.max(0.0)).collect()
}

impl Mlp {
    /// He-normal weights (`N(0, 2 / fan_in)`), zero biases.
    pub fn new(depth: usize, width: usize, outputs: usize, seed: u64) -> Self {
        assert!(depth >= 1 && width >= 1 && outputs >= 1);
        let mut shapes = Vec::with_capacity(depth);
        let mut off = 0;
        for l in 0..depth {
            let out = if l + 1 == depth { outputs } else { width };
            shapes.push(LayerShape {
                inputs: width,
                outputs: out,
                w_off: off,
                b_off: off + out * width,
            });
            off += out * width + out;
        }
        let mut params = vec![0.0; off];
        let mut rng = SplitMix64::new(seed);
        for s in &shapes {
            let scale = (2.0 / s.inputs as f64).sqrt();
            for w in &mut params[s.w_off..s.b_off] {
                *w = scale * rng.standard_normal();
            }
        }
        Self {
            input: vec![1.0; width],
            shapes,
            params,
        }
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn depth(&self) -> usize {
        self.shapes.len()
    }

    pub fn outputs(&self) -> usize {
        self.shapes.last().unwrap().outputs
    }

    pub fn forward(&self) -> ForwardPass {
        let mut pre = Vec::with_capacity(self.shapes.len());
        let mut x = self.input.clone();
        for (l, s) in self.shapes.iter().enumerate() {
            let w = &self.params[s.w_off..s.b_off];
            let b = &self.params[s.b_off..s.b_off + s.outputs];
            let z: Vec<f64> = w
                .chunks_exact(s.inputs)
                .zip(b)
                .map(|(row, bias)| bias + dot(row, &x))
                .collect();
            if l + 1 < self.shapes.len() {
                x = relu(&z);
            }
            pre.push(z);
        }
        ForwardPass { pre }
    }

    /// Accumulate `∂loss/∂θ` into `grad` (overwritten) given `∂loss/∂output`.
    pub fn backward(&self, pass: &ForwardPass, grad_output: &[f64], grad: &mut [f64]) {
        assert_eq!(grad.len(), self.params.len());
        assert_eq!(grad_output.len(), self.outputs());
        let mut g = grad_output.to_vec();
        for l in (0..self.shapes.len()).rev() {
            let s = self.shapes[l];
            let x_in = if l == 0 {
                self.input.clone()
            } else {
                relu(&pass.pre[l - 1])
            };
            let w = &self.params[s.w_off..s.b_off];
            let (gw, gb) = grad[s.w_off..s.b_off + s.outputs].split_at_mut(s.outputs * s.inputs);
            gb.copy_from_slice(&g);
            let mut g_in = vec![0.0; s.inputs];
            for ((go, w_row), gw_row) in g
                .iter()
                .zip(w.chunks_exact(s.inputs))
                .zip(gw.chunks_exact_mut(s.inputs))
            {
                if *go == 0.0 {
                    gw_row.fill(0.0);
                    continue;
                }
                for (gwi, xi) in gw_row.iter_mut().zip(&x_in) {
                    *gwi = go * xi;
                }
                axpy(*go, w_row, &mut g_in);
            }
            if l > 0 {
                for (gi, z) in g_in.iter_mut().zip(&pass.pre[l - 1]) {
                    if *z <= 0.0 {
                        *gi = 0.0;
                    }
                }
            }
            g = g_in;
        }
    }
    /// Backpropagate `grad_output` and apply one Adam update in the same
    /// sweep. Each weight row is read for the input gradient before it is
    /// updated, and the per-element arithmetic matches
    /// [`Mlp::backward`] followed by [`Adam::step`] exactly.
    pub fn backward_adam_step(&mut self, pass: &ForwardPass, grad_output: &[f64], adam: &mut Adam) {
        assert_eq!(grad_output.len(), self.outputs());
        assert_eq!(adam.m.len(), self.params.len());
        let coef = adam.begin_step();
        let mut g = grad_output.to_vec();
        for l in (0..self.shapes.len()).rev() {
            let s = self.shapes[l];
            let x_in = if l == 0 {
                self.input.clone()
            } else {
                relu(&pass.pre[l - 1])
            };
            let mut g_in = vec![0.0; s.inputs];
            for (o, &go) in g.iter().enumerate() {
                let off = s.w_off + o * s.inputs;
                let row = &mut self.params[off..off + s.inputs];
                if go != 0.0 {
                    axpy(go, row, &mut g_in);
                }
                adam.apply(&coef, off, row, |i| go * x_in[i]);
            }
            let b_range = s.b_off..s.b_off + s.outputs;
            adam.apply(&coef, s.b_off, &mut self.params[b_range], |i| g[i]);
            if l > 0 {
                for (gi, z) in g_in.iter_mut().zip(&pass.pre[l - 1]) {
                    if *z <= 0.0 {
                        *gi = 0.0;
                    }
                }
            }
            g = g_in;
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64, betas: [f64; 2], eps: f64) -> Self {
        Self {
            lr,
            beta1: betas[0],
            beta2: betas[1],
            eps,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    fn begin_step(&mut self) -> AdamCoefficients {
        self.t += 1;
        AdamCoefficients {
            c1: 1.0 / (1.0 - self.beta1.powi(self.t)),
            c2: 1.0 / (1.0 - self.beta2.powi(self.t)),
        }
    }

    #[inline]
    fn apply(&mut self, coef: &AdamCoefficients, offset: usize, params: &mut [f64], grad: impl Fn(usize) -> f64) {
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let n = params.len();
        let m = &mut self.m[offset..offset + n];
        let v = &mut self.v[offset..offset + n];
        for i in 0..n {
            let g = grad(i);
            let mi = b1 * m[i] + (1.0 - b1) * g;
            let vi = b2 * v[i] + (1.0 - b2) * g * g;
            m[i] = mi;
            v[i] = vi;
            params[i] -= lr * (mi * coef.c1) / ((vi * coef.c2).sqrt() + eps);
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len());
        let coef = self.begin_step();
        self.apply(&coef, 0, params, |i| grad[i]);
    }
}

struct AdamCoefficients {
    c1: f64,
    c2: f64,
}
