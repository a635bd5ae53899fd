//! Fully-connected layer with explicit forward/backward passes.

use rand_chacha::ChaCha8Rng;

use super::{orthogonal_init, NnError};

/// Elementwise nonlinearity applied after the affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Linear,
}

/// `y = act(W x + b)` with `W` stored row-major as `out_dim x in_dim`.
///
/// `forward` caches the input and pre-activation so a following `backward`
/// can accumulate exact parameter gradients and return the gradient with
/// respect to the input. Gradients accumulate across calls until
/// `zero_grad`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub gw: Vec<f64>,
    pub gb: Vec<f64>,
    act: Activation,
    cached_input: Vec<f64>,
    cached_pre: Vec<f64>,
    has_forward: bool,
}

impl Dense {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        act: Activation,
        init_gain: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut w = vec![0.0; in_dim * out_dim];
        orthogonal_init(&mut w, out_dim, in_dim, init_gain, rng);
        Self {
            in_dim,
            out_dim,
            w,
            b: vec![0.0; out_dim],
            gw: vec![0.0; in_dim * out_dim],
            gb: vec![0.0; out_dim],
            act,
            cached_input: Vec::new(),
            cached_pre: Vec::new(),
            has_forward: false,
        }
    }

    pub fn forward(&mut self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        if x.len() != self.in_dim {
            return Err(NnError::ShapeMismatch(format!(
                "dense expects {} inputs, got {}",
                self.in_dim,
                x.len()
            )));
        }
        let mut pre = self.b.clone();
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = 0.0;
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            pre[o] += acc;
        }
        self.cached_input = x.to_vec();
        self.cached_pre = pre.clone();
        self.has_forward = true;
        let out = pre
            .into_iter()
            .map(|p| match self.act {
                Activation::Tanh => p.tanh(),
                Activation::Relu => p.max(0.0),
                Activation::Linear => p,
            })
            .collect();
        Ok(out)
    }

    /// Accumulate gradients for the most recent `forward`; returns dL/dx.
    pub fn backward(&mut self, grad_out: &[f64]) -> Result<Vec<f64>, NnError> {
        if !self.has_forward {
            return Err(NnError::BackwardWithoutForward);
        }
        if grad_out.len() != self.out_dim {
            return Err(NnError::ShapeMismatch(format!(
                "dense backward expects {} grads, got {}",
                self.out_dim,
                grad_out.len()
            )));
        }
        let mut grad_in = vec![0.0; self.in_dim];
        for o in 0..self.out_dim {
            let dact = match self.act {
                Activation::Tanh => {
                    let y = self.cached_pre[o].tanh();
                    1.0 - y * y
                }
                Activation::Relu => {
                    if self.cached_pre[o] > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Activation::Linear => 1.0,
            };
            let dpre = grad_out[o] * dact;
            self.gb[o] += dpre;
            let row = o * self.in_dim;
            for i in 0..self.in_dim {
                self.gw[row + i] += dpre * self.cached_input[i];
                grad_in[i] += dpre * self.w[row + i];
            }
        }
        Ok(grad_in)
    }

    pub fn zero_grad(&mut self) {
        self.gw.iter_mut().for_each(|g| *g = 0.0);
        self.gb.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn for_each_param_grad(&mut self, f: &mut dyn FnMut(&mut f64, &mut f64)) {
        for (p, g) in self.w.iter_mut().zip(self.gw.iter_mut()) {
            f(p, g);
        }
        for (p, g) in self.b.iter_mut().zip(self.gb.iter_mut()) {
            f(p, g);
        }
    }
}
