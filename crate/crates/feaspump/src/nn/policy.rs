//! Policy and value networks plus the diagonal-Gaussian action head.
//!
//! Both network families are bound to an instance size `(n, m)` at
//! construction and reject observations of any other geometry. The flat
//! family runs `obs -> 64 -> 64 -> heads` with tanh hidden layers; the grid
//! family runs two 3x3 ReLU convolutions (1 -> 8 -> 16 channels) over the
//! `m x (n+1)` constraint grid, embeds the point/mask side information
//! through a dense layer, and fuses both through `64 -> 64 -> heads`.
//!
//! The action distribution is an independent Gaussian per coordinate with a
//! state-independent, learnable log standard deviation clamped to
//! `[LOG_STD_MIN, LOG_STD_MAX]`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::env::{Observation, Variant};
use crate::lp::DenseMatrix;

use super::{
    all_finite, Activation, Conv3x3, Dense, NnError, ParamVisitor, SCALE_MATRIX, SCALE_POINT,
    SCALE_RHS,
};

pub const HIDDEN: usize = 64;
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

const GAIN_HIDDEN: f64 = std::f64::consts::SQRT_2;
const GAIN_POLICY_HEAD: f64 = 0.01;
const GAIN_CRITIC_HEAD: f64 = 1.0;

/// Scale a flat `[A | b | x | x_proj | mask]` observation in place.
fn scale_mlp_obs(flat: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(flat.len());
    out.extend(flat[..m * n].iter().map(|v| v * SCALE_MATRIX));
    out.extend(flat[m * n..m * n + m].iter().map(|v| v * SCALE_RHS));
    out.extend(
        flat[m * n + m..m * n + m + 2 * n]
            .iter()
            .map(|v| v * SCALE_POINT),
    );
    out.extend(&flat[m * n + m + 2 * n..]);
    out
}

/// Scale the `[A | b]` grid into a single input channel.
fn scale_grid(matrix: &DenseMatrix, n: usize) -> Vec<f64> {
    let mut plane = Vec::with_capacity(matrix.rows() * matrix.cols());
    for i in 0..matrix.rows() {
        for j in 0..matrix.cols() {
            let s = if j < n { SCALE_MATRIX } else { SCALE_RHS };
            plane.push(matrix.at(i, j) * s);
        }
    }
    plane
}

/// Scale `[x | x_proj]` and append the raw mask.
fn scale_side(sols: &[f64], mask: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = sols.iter().map(|v| v * SCALE_POINT).collect();
    out.extend(mask);
    out
}

/// Shared `obs -> 64 -> 64 -> head` stack.
#[derive(Debug, Clone)]
struct MlpStack {
    l1: Dense,
    l2: Dense,
    head: Dense,
}

impl MlpStack {
    fn new(in_dim: usize, out_dim: usize, head_gain: f64, rng: &mut ChaCha8Rng) -> Self {
        Self {
            l1: Dense::new(in_dim, HIDDEN, Activation::Tanh, GAIN_HIDDEN, rng),
            l2: Dense::new(HIDDEN, HIDDEN, Activation::Tanh, GAIN_HIDDEN, rng),
            head: Dense::new(HIDDEN, out_dim, Activation::Linear, head_gain, rng),
        }
    }

    fn forward(&mut self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let h1 = self.l1.forward(x)?;
        let h2 = self.l2.forward(&h1)?;
        self.head.forward(&h2)
    }

    fn backward(&mut self, dout: &[f64]) -> Result<(), NnError> {
        let dh2 = self.head.backward(dout)?;
        let dh1 = self.l2.backward(&dh2)?;
        self.l1.backward(&dh1)?;
        Ok(())
    }

    fn zero_grad(&mut self) {
        self.l1.zero_grad();
        self.l2.zero_grad();
        self.head.zero_grad();
    }

    fn visit(&mut self, f: &mut dyn FnMut(&mut f64, &mut f64)) {
        self.l1.for_each_param_grad(f);
        self.l2.for_each_param_grad(f);
        self.head.for_each_param_grad(f);
    }
}

/// Shared convolutional stack: grid conv trunk, side embedding, fusion, head.
#[derive(Debug, Clone)]
struct CnnStack {
    conv1: Conv3x3,
    conv2: Conv3x3,
    side: Dense,
    fuse1: Dense,
    fuse2: Dense,
    head: Dense,
    conv_len: usize,
}

impl CnnStack {
    fn new(n: usize, m: usize, out_dim: usize, head_gain: f64, rng: &mut ChaCha8Rng) -> Self {
        let (h, w) = (m, n + 1);
        let conv1 = Conv3x3::new(1, 8, h, w, Activation::Relu, GAIN_HIDDEN, rng);
        let conv2 = Conv3x3::new(8, 16, h, w, Activation::Relu, GAIN_HIDDEN, rng);
        let conv_len = conv2.out_len();
        Self {
            conv1,
            conv2,
            side: Dense::new(3 * n, HIDDEN, Activation::Tanh, GAIN_HIDDEN, rng),
            fuse1: Dense::new(
                conv_len + HIDDEN,
                HIDDEN,
                Activation::Tanh,
                GAIN_HIDDEN,
                rng,
            ),
            fuse2: Dense::new(HIDDEN, HIDDEN, Activation::Tanh, GAIN_HIDDEN, rng),
            head: Dense::new(HIDDEN, out_dim, Activation::Linear, head_gain, rng),
            conv_len,
        }
    }

    fn forward(&mut self, plane: &[f64], side_in: &[f64]) -> Result<Vec<f64>, NnError> {
        let c1 = self.conv1.forward(plane)?;
        let c2 = self.conv2.forward(&c1)?;
        let s = self.side.forward(side_in)?;
        let mut joint = c2;
        joint.extend(s);
        let f1 = self.fuse1.forward(&joint)?;
        let f2 = self.fuse2.forward(&f1)?;
        self.head.forward(&f2)
    }

    fn backward(&mut self, dout: &[f64]) -> Result<(), NnError> {
        let df2 = self.head.backward(dout)?;
        let df1 = self.fuse2.backward(&df2)?;
        let djoint = self.fuse1.backward(&df1)?;
        let (dconv, dside) = djoint.split_at(self.conv_len);
        self.side.backward(dside)?;
        let dc1 = self.conv2.backward(dconv)?;
        self.conv1.backward(&dc1)?;
        Ok(())
    }

    fn zero_grad(&mut self) {
        self.conv1.zero_grad();
        self.conv2.zero_grad();
        self.side.zero_grad();
        self.fuse1.zero_grad();
        self.fuse2.zero_grad();
        self.head.zero_grad();
    }

    fn visit(&mut self, f: &mut dyn FnMut(&mut f64, &mut f64)) {
        self.conv1.for_each_param_grad(f);
        self.conv2.for_each_param_grad(f);
        self.side.for_each_param_grad(f);
        self.fuse1.for_each_param_grad(f);
        self.fuse2.for_each_param_grad(f);
        self.head.for_each_param_grad(f);
    }
}

/// Flat-observation policy network.
#[derive(Debug, Clone)]
pub struct MlpPolicy {
    pub n: usize,
    pub m: usize,
    stack: MlpStack,
    pub log_std: Vec<f64>,
    pub glog_std: Vec<f64>,
}

impl MlpPolicy {
    pub fn new(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            n,
            m,
            stack: MlpStack::new(Observation::mlp_len(n, m), n, GAIN_POLICY_HEAD, rng),
            log_std: vec![0.0; n],
            glog_std: vec![0.0; n],
        }
    }

    pub fn forward(&mut self, obs: &Observation) -> Result<Vec<f64>, NnError> {
        let x = scaled_flat_input(self.n, self.m, obs)?;
        let mean = self.stack.forward(&x)?;
        if !all_finite(&mean) {
            return Err(NnError::NonFiniteActivation("flat policy mean"));
        }
        Ok(mean)
    }

    pub fn backward(&mut self, dmean: &[f64]) -> Result<(), NnError> {
        self.stack.backward(dmean)
    }
}

/// Grid-observation policy network.
#[derive(Debug, Clone)]
pub struct CnnPolicy {
    pub n: usize,
    pub m: usize,
    stack: CnnStack,
    pub log_std: Vec<f64>,
    pub glog_std: Vec<f64>,
}

impl CnnPolicy {
    pub fn new(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            n,
            m,
            stack: CnnStack::new(n, m, n, GAIN_POLICY_HEAD, rng),
            log_std: vec![0.0; n],
            glog_std: vec![0.0; n],
        }
    }

    pub fn forward(&mut self, obs: &Observation) -> Result<Vec<f64>, NnError> {
        let (plane, side) = scaled_grid_input(self.n, self.m, obs)?;
        let mean = self.stack.forward(&plane, &side)?;
        if !all_finite(&mean) {
            return Err(NnError::NonFiniteActivation("grid policy mean"));
        }
        Ok(mean)
    }

    pub fn backward(&mut self, dmean: &[f64]) -> Result<(), NnError> {
        self.stack.backward(dmean)
    }
}

/// Flat-observation value network (same trunk, scalar head).
#[derive(Debug, Clone)]
pub struct MlpCritic {
    pub n: usize,
    pub m: usize,
    stack: MlpStack,
}

impl MlpCritic {
    pub fn new(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            n,
            m,
            stack: MlpStack::new(Observation::mlp_len(n, m), 1, GAIN_CRITIC_HEAD, rng),
        }
    }
}

/// Grid-observation value network (same trunk, scalar head).
#[derive(Debug, Clone)]
pub struct CnnCritic {
    pub n: usize,
    pub m: usize,
    stack: CnnStack,
}

impl CnnCritic {
    pub fn new(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            n,
            m,
            stack: CnnStack::new(n, m, 1, GAIN_CRITIC_HEAD, rng),
        }
    }
}

/// Either policy architecture behind one interface.
#[derive(Debug, Clone)]
pub enum Policy {
    Mlp(MlpPolicy),
    Cnn(CnnPolicy),
}

impl Policy {
    pub fn new(variant: Variant, n: usize, m: usize, rng: &mut ChaCha8Rng) -> Self {
        match variant {
            Variant::MlpObs => Policy::Mlp(MlpPolicy::new(n, m, rng)),
            Variant::CnnObs => Policy::Cnn(CnnPolicy::new(n, m, rng)),
        }
    }

    pub fn variant(&self) -> Variant {
        match self {
            Policy::Mlp(_) => Variant::MlpObs,
            Policy::Cnn(_) => Variant::CnnObs,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Policy::Mlp(p) => p.n,
            Policy::Cnn(p) => p.n,
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Policy::Mlp(p) => p.m,
            Policy::Cnn(p) => p.m,
        }
    }

    /// Mean action for an observation.
    pub fn forward(&mut self, obs: &Observation) -> Result<Vec<f64>, NnError> {
        match self {
            Policy::Mlp(p) => p.forward(obs),
            Policy::Cnn(p) => p.forward(obs),
        }
    }

    /// Backpropagate a gradient with respect to the mean from the most
    /// recent `forward`. The log-std gradient is accumulated separately via
    /// [`Policy::glog_std_mut`].
    pub fn backward(&mut self, dmean: &[f64]) -> Result<(), NnError> {
        match self {
            Policy::Mlp(p) => p.backward(dmean),
            Policy::Cnn(p) => p.backward(dmean),
        }
    }

    pub fn log_std(&self) -> &[f64] {
        match self {
            Policy::Mlp(p) => &p.log_std,
            Policy::Cnn(p) => &p.log_std,
        }
    }

    pub fn log_std_mut(&mut self) -> &mut Vec<f64> {
        match self {
            Policy::Mlp(p) => &mut p.log_std,
            Policy::Cnn(p) => &mut p.log_std,
        }
    }

    pub fn glog_std_mut(&mut self) -> &mut Vec<f64> {
        match self {
            Policy::Mlp(p) => &mut p.glog_std,
            Policy::Cnn(p) => &mut p.glog_std,
        }
    }

    /// Clamp the log standard deviation into its legal band.
    pub fn clamp_log_std(&mut self) {
        for v in self.log_std_mut() {
            *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }
}

impl ParamVisitor for Policy {
    fn for_each_param_grad(&mut self, f: &mut dyn FnMut(&mut f64, &mut f64)) {
        match self {
            Policy::Mlp(p) => {
                p.stack.visit(f);
                for (v, g) in p.log_std.iter_mut().zip(p.glog_std.iter_mut()) {
                    f(v, g);
                }
            }
            Policy::Cnn(p) => {
                p.stack.visit(f);
                for (v, g) in p.log_std.iter_mut().zip(p.glog_std.iter_mut()) {
                    f(v, g);
                }
            }
        }
    }

    fn zero_grad(&mut self) {
        match self {
            Policy::Mlp(p) => {
                p.stack.zero_grad();
                p.glog_std.iter_mut().for_each(|g| *g = 0.0);
            }
            Policy::Cnn(p) => {
                p.stack.zero_grad();
                p.glog_std.iter_mut().for_each(|g| *g = 0.0);
            }
        }
    }
}

/// Either value network behind one interface.
#[derive(Debug, Clone)]
pub enum Critic {
    Mlp(MlpCritic),
    Cnn(CnnCritic),
}

impl Critic {
    pub fn new(variant: Variant, n: usize, m: usize, rng: &mut ChaCha8Rng) -> Self {
        match variant {
            Variant::MlpObs => Critic::Mlp(MlpCritic::new(n, m, rng)),
            Variant::CnnObs => Critic::Cnn(CnnCritic::new(n, m, rng)),
        }
    }

    pub fn forward(&mut self, obs: &Observation) -> Result<f64, NnError> {
        let out = match self {
            Critic::Mlp(c) => {
                let x = scaled_flat_input(c.n, c.m, obs)?;
                c.stack.forward(&x)?
            }
            Critic::Cnn(c) => {
                let (plane, side) = scaled_grid_input(c.n, c.m, obs)?;
                c.stack.forward(&plane, &side)?
            }
        };
        let v = out[0];
        if !v.is_finite() {
            return Err(NnError::NonFiniteActivation("value head"));
        }
        Ok(v)
    }

    pub fn backward(&mut self, dvalue: f64) -> Result<(), NnError> {
        match self {
            Critic::Mlp(c) => c.stack.backward(&[dvalue]),
            Critic::Cnn(c) => c.stack.backward(&[dvalue]),
        }
    }
}

impl ParamVisitor for Critic {
    fn for_each_param_grad(&mut self, f: &mut dyn FnMut(&mut f64, &mut f64)) {
        match self {
            Critic::Mlp(c) => c.stack.visit(f),
            Critic::Cnn(c) => c.stack.visit(f),
        }
    }

    fn zero_grad(&mut self) {
        match self {
            Critic::Mlp(c) => c.stack.zero_grad(),
            Critic::Cnn(c) => c.stack.zero_grad(),
        }
    }
}

/// Validate and scale a flat observation for networks bound to `(n, m)`.
fn scaled_flat_input(n: usize, m: usize, obs: &Observation) -> Result<Vec<f64>, NnError> {
    match obs {
        Observation::MlpVec { flat } => {
            if flat.len() != Observation::mlp_len(n, m) {
                return Err(NnError::ShapeMismatch(format!(
                    "flat observation length {} for ({n}, {m})",
                    flat.len()
                )));
            }
            Ok(scale_mlp_obs(flat, n, m))
        }
        Observation::CnnObs { .. } => Err(NnError::ShapeMismatch(
            "grid observation fed to flat network".into(),
        )),
    }
}

/// Validate and scale a grid observation for networks bound to `(n, m)`.
fn scaled_grid_input(
    n: usize,
    m: usize,
    obs: &Observation,
) -> Result<(Vec<f64>, Vec<f64>), NnError> {
    match obs {
        Observation::CnnObs { matrix, sols, mask } => {
            if matrix.rows() != m
                || matrix.cols() != n + 1
                || sols.len() != 2 * n
                || mask.len() != n
            {
                return Err(NnError::ShapeMismatch(format!(
                    "grid observation {}x{} (sols {}, mask {}) for ({n}, {m})",
                    matrix.rows(),
                    matrix.cols(),
                    sols.len(),
                    mask.len()
                )));
            }
            Ok((scale_grid(matrix, n), scale_side(sols, mask)))
        }
        Observation::MlpVec { .. } => Err(NnError::ShapeMismatch(
            "flat observation fed to grid network".into(),
        )),
    }
}

const LN_2PI: f64 = 1.8378770664093453;

/// Log density of a diagonal Gaussian at `action`.
pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    let mut acc = 0.0;
    for j in 0..mean.len() {
        let sigma = log_std[j].exp();
        let z = (action[j] - mean[j]) / sigma;
        acc += -log_std[j] - 0.5 * LN_2PI - 0.5 * z * z;
    }
    acc
}

/// Differential entropy of a diagonal Gaussian.
pub fn gaussian_entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 * (1.0 + LN_2PI)).sum()
}

/// Exact gradients of `gaussian_log_prob` with respect to the mean and the
/// log standard deviation.
pub fn gaussian_log_prob_grads(
    mean: &[f64],
    log_std: &[f64],
    action: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let mut dmean = Vec::with_capacity(mean.len());
    let mut dlog_std = Vec::with_capacity(mean.len());
    for j in 0..mean.len() {
        let sigma = log_std[j].exp();
        let z = (action[j] - mean[j]) / sigma;
        dmean.push(z / sigma);
        dlog_std.push(z * z - 1.0);
    }
    (dmean, dlog_std)
}

/// Draw an action from the policy's Gaussian and return it with its log
/// density.
pub fn sample_action(
    policy: &mut Policy,
    obs: &Observation,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64), NnError> {
    let mean = policy.forward(obs)?;
    let log_std = policy.log_std().to_vec();
    let action: Vec<f64> = mean
        .iter()
        .zip(&log_std)
        .map(|(mu, ls)| mu + ls.exp() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let lp = gaussian_log_prob(&mean, &log_std, &action);
    Ok((action, lp))
}

/// Log density of `action` under the policy's current Gaussian.
pub fn log_prob(policy: &mut Policy, obs: &Observation, action: &[f64]) -> Result<f64, NnError> {
    let mean = policy.forward(obs)?;
    Ok(gaussian_log_prob(&mean, policy.log_std(), action))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{reset, EnvConfig};
    use crate::instance::{generate, Kind};
    use crate::oracle::finite_difference_grad;
    use rand::SeedableRng;

    fn obs_for(variant: Variant) -> (Observation, usize, usize) {
        let inst = generate(42, 3, 4, Kind::Mip).unwrap();
        let config = EnvConfig {
            variant,
            ..EnvConfig::default()
        };
        let (_, obs) = reset(&inst, config).unwrap();
        (obs, inst.n, inst.m)
    }

    #[test]
    fn zero_parameters_give_zero_mean_and_value() {
        for variant in [Variant::MlpObs, Variant::CnnObs] {
            let (obs, n, m) = obs_for(variant);
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let mut policy = Policy::new(variant, n, m, &mut rng);
            let mut critic = Critic::new(variant, n, m, &mut rng);
            policy.for_each_param_grad(&mut |p, _| *p = 0.0);
            critic.for_each_param_grad(&mut |p, _| *p = 0.0);
            let mean = policy.forward(&obs).unwrap();
            assert!(mean.iter().all(|v| *v == 0.0));
            assert_eq!(critic.forward(&obs).unwrap(), 0.0);
        }
    }

    #[test]
    fn wrong_observation_variant_is_rejected() {
        let (flat_obs, n, m) = obs_for(Variant::MlpObs);
        let (grid_obs, _, _) = obs_for(Variant::CnnObs);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut flat = Policy::new(Variant::MlpObs, n, m, &mut rng);
        let mut grid = Policy::new(Variant::CnnObs, n, m, &mut rng);
        assert!(flat.forward(&grid_obs).is_err());
        assert!(grid.forward(&flat_obs).is_err());
    }

    #[test]
    fn log_prob_matches_closed_form_in_one_dimension() {
        // Standard normal at its mean: -0.5 ln(2 pi).
        let lp = gaussian_log_prob(&[0.0], &[0.0], &[0.0]);
        assert!((lp - (-0.5 * LN_2PI)).abs() < 1e-12);
        // Shifted by one standard deviation subtracts one half.
        let lp1 = gaussian_log_prob(&[0.0], &[0.0], &[1.0]);
        assert!((lp1 - (-0.5 * LN_2PI - 0.5)).abs() < 1e-12);
        // Scaling sigma adds -log sigma at the mean.
        let ls = 0.7;
        let lp2 = gaussian_log_prob(&[2.0], &[ls], &[2.0]);
        assert!((lp2 - (-ls - 0.5 * LN_2PI)).abs() < 1e-12);
    }

    #[test]
    fn entropy_matches_closed_form() {
        let h = gaussian_entropy(&[0.0, 1.0]);
        let expect = 2.0 * (0.5 * (1.0 + LN_2PI)) + 1.0;
        assert!((h - expect).abs() < 1e-12);
    }

    #[test]
    fn log_prob_grads_match_central_differences() {
        let mean = vec![0.4, -1.2, 0.0];
        let log_std = vec![0.1, -0.4, 0.9];
        let action = vec![0.9, -1.0, 0.3];
        let (dmean, dls) = gaussian_log_prob_grads(&mean, &log_std, &action);
        let fd_mean =
            finite_difference_grad(|mu| gaussian_log_prob(mu, &log_std, &action), &mean, 1e-6);
        let fd_ls =
            finite_difference_grad(|ls| gaussian_log_prob(&mean, ls, &action), &log_std, 1e-6);
        for (a, b) in dmean.iter().zip(&fd_mean) {
            assert!((a - b).abs() < 1e-6);
        }
        for (a, b) in dls.iter().zip(&fd_ls) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn sampling_is_reproducible_and_consistent_with_log_prob() {
        let (obs, n, m) = obs_for(Variant::MlpObs);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut policy = Policy::new(Variant::MlpObs, n, m, &mut rng);

        let mut r1 = ChaCha8Rng::seed_from_u64(100);
        let (a1, lp1) = sample_action(&mut policy, &obs, &mut r1).unwrap();
        let mut r2 = ChaCha8Rng::seed_from_u64(100);
        let (a2, lp2) = sample_action(&mut policy, &obs, &mut r2).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(lp1, lp2);

        let recomputed = log_prob(&mut policy, &obs, &a1).unwrap();
        assert!((recomputed - lp1).abs() < 1e-12);
    }

    #[test]
    fn policy_gradients_match_central_differences() {
        for variant in [Variant::MlpObs, Variant::CnnObs] {
            let (obs, n, m) = obs_for(variant);
            let mut rng = ChaCha8Rng::seed_from_u64(31);
            let policy = Policy::new(variant, n, m, &mut rng);
            let coeff: Vec<f64> = (0..n).map(|j| 1.0 - 0.5 * j as f64).collect();

            let mut probe = policy.clone();
            probe.zero_grad();
            probe.forward(&obs).unwrap();
            probe.backward(&coeff).unwrap();
            let mut exact = Vec::new();
            probe.for_each_param_grad(&mut |_, g| exact.push(*g));

            let params: Vec<f64> = {
                let mut tmp = policy.clone();
                let mut v = Vec::new();
                tmp.for_each_param_grad(&mut |p, _| v.push(*p));
                v
            };
            let fd = finite_difference_grad(
                |theta| {
                    let mut net = policy.clone();
                    let mut it = theta.iter();
                    net.for_each_param_grad(&mut |p, _| *p = *it.next().unwrap());
                    let y = net.forward(&obs).unwrap();
                    y.iter().zip(&coeff).map(|(a, b)| a * b).sum()
                },
                &params,
                1e-5,
            );
            let mut worst = 0.0f64;
            for (e, a) in exact.iter().zip(&fd) {
                let denom = e.abs().max(a.abs()).max(1.0);
                worst = worst.max((e - a).abs() / denom);
            }
            assert!(worst < 1e-4, "{variant}: {worst}");
        }
    }

    #[test]
    fn critic_gradients_match_central_differences() {
        for variant in [Variant::MlpObs, Variant::CnnObs] {
            let (obs, n, m) = obs_for(variant);
            let mut rng = ChaCha8Rng::seed_from_u64(32);
            let critic = Critic::new(variant, n, m, &mut rng);

            let mut probe = critic.clone();
            probe.zero_grad();
            probe.forward(&obs).unwrap();
            probe.backward(1.0).unwrap();
            let mut exact = Vec::new();
            probe.for_each_param_grad(&mut |_, g| exact.push(*g));

            let params: Vec<f64> = {
                let mut tmp = critic.clone();
                let mut v = Vec::new();
                tmp.for_each_param_grad(&mut |p, _| v.push(*p));
                v
            };
            let fd = finite_difference_grad(
                |theta| {
                    let mut net = critic.clone();
                    let mut it = theta.iter();
                    net.for_each_param_grad(&mut |p, _| *p = *it.next().unwrap());
                    net.forward(&obs).unwrap()
                },
                &params,
                1e-5,
            );
            let mut worst = 0.0f64;
            for (e, a) in exact.iter().zip(&fd) {
                let denom = e.abs().max(a.abs()).max(1.0);
                worst = worst.max((e - a).abs() / denom);
            }
            assert!(worst < 1e-4, "{variant}: {worst}");
        }
    }

    #[test]
    fn parameter_counts_are_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let (n, m) = (5, 6);
        // Flat nets on (5, 6): observation length 51.
        // l1 51*64+64 = 3328, l2 64*64+64 = 4160, head 64*5+5 = 325, log-std 5.
        assert_eq!(
            Policy::new(Variant::MlpObs, n, m, &mut rng).param_count(),
            7818
        );
        assert_eq!(
            Critic::new(Variant::MlpObs, n, m, &mut rng).param_count(),
            7553
        );
        // Grid nets on (5, 6): grid 6x6, conv flatten 16*36 = 576.
        // conv1 80, conv2 1168, side 64*15+64 = 1024, fuse1 64*640+64 = 41024,
        // fuse2 4160, head 325, log-std 5.
        assert_eq!(
            Policy::new(Variant::CnnObs, n, m, &mut rng).param_count(),
            47786
        );
        assert_eq!(
            Critic::new(Variant::CnnObs, n, m, &mut rng).param_count(),
            47521
        );
    }

    #[test]
    fn clamp_pushes_log_std_into_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let mut policy = Policy::new(Variant::MlpObs, 3, 4, &mut rng);
        policy.log_std_mut().copy_from_slice(&[-9.0, 0.5, 7.0]);
        policy.clamp_log_std();
        assert_eq!(policy.log_std(), &[LOG_STD_MIN, 0.5, LOG_STD_MAX]);
    }
}
