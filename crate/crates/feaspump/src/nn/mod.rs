//! Hand-rolled neural networks with exact reverse-mode gradients.
//!
//! Only the two fixed architectures this crate trains exist here — a flat
//! two-hidden-layer perceptron and a small convolutional net over the
//! constraint grid — so there is no general autodiff graph. Each layer caches
//! its forward activations and implements an explicit backward pass; gradient
//! exactness is enforced by a central-difference suite in the tests.
//!
//! Observations are scaled by fixed constants before entering a network
//! (matrix entries by 1/10, right-hand sides by 1/100, points by 1/20, the
//! integrality mask untouched) so that raw magnitudes in the hundreds do not
//! saturate the tanh trunks. The constants are part of the observation-layout
//! contract, not learned parameters.

mod conv;
mod dense;
mod policy;

pub mod checkpoint;

pub use conv::Conv3x3;
pub use dense::{Activation, Dense};
pub use policy::{
    gaussian_entropy, gaussian_log_prob, gaussian_log_prob_grads, log_prob, sample_action,
    CnnCritic, CnnPolicy, Critic, MlpCritic, MlpPolicy, Policy, HIDDEN, LOG_STD_MAX, LOG_STD_MIN,
};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Fixed input scaling constants (see module docs).
pub const SCALE_MATRIX: f64 = 1.0 / 10.0;
pub const SCALE_RHS: f64 = 1.0 / 100.0;
pub const SCALE_POINT: f64 = 1.0 / 20.0;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite activation in {0}")]
    NonFiniteActivation(&'static str),
    #[error("backward called without a recorded forward pass")]
    BackwardWithoutForward,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint parse: {0}")]
    CheckpointParse(String),
    #[error("checkpoint binding mismatch: {0}")]
    BindingMismatch(String),
}

/// A shaped block of numbers; the exchange format between networks and
/// checkpoints. Construction rejects non-finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NnError> {
        let expect: usize = shape.iter().product();
        if data.len() != expect {
            return Err(NnError::ShapeMismatch(format!(
                "{} values for shape {shape:?}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NnError::NonFiniteActivation("tensor construction"));
        }
        Ok(Self { shape, data })
    }
}

/// Visits every `(parameter, gradient)` pair of a network in a fixed,
/// documented order; the optimizer and the checkpoint writer both rely on
/// that order being stable.
pub trait ParamVisitor {
    fn for_each_param_grad(&mut self, f: &mut dyn FnMut(&mut f64, &mut f64));
    fn zero_grad(&mut self);

    fn param_count(&mut self) -> usize {
        let mut count = 0;
        self.for_each_param_grad(&mut |_, _| count += 1);
        count
    }
}

/// Fill `out x in` row-major `w` with an orthogonal-style matrix scaled by
/// `gain`: sample a Gaussian matrix and orthonormalize the shorter side by
/// modified Gram-Schmidt.
pub(crate) fn orthogonal_init(
    w: &mut [f64],
    rows: usize,
    cols: usize,
    gain: f64,
    rng: &mut ChaCha8Rng,
) {
    use rand_distr::StandardNormal;
    assert_eq!(w.len(), rows * cols);

    let transpose = rows > cols;
    let (r, c) = if transpose {
        (cols, rows)
    } else {
        (rows, cols)
    };
    // r <= c: orthonormalize r vectors of length c.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(r);
    while basis.len() < r {
        let mut v: Vec<f64> = (0..c)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        for u in &basis {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= dot * ui;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            for vi in &mut v {
                *vi /= norm;
            }
            basis.push(v);
        }
    }
    for i in 0..rows {
        for j in 0..cols {
            let val = if transpose { basis[j][i] } else { basis[i][j] };
            w[i * cols + j] = gain * val;
        }
    }
}

/// `true` iff every entry is finite.
pub(crate) fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}
