//! Proximal policy optimization over the pump environment.
//!
//! The training loop is the classic on-policy cycle: collect complete
//! episodes with the current Gaussian policy, estimate advantages with
//! GAE(γ, λ), then run several epochs of minibatch updates on the clipped
//! surrogate objective
//!
//! ```text
//! maximize  E[ min(r A, clamp(r, 1-eps, 1+eps) A) ]
//!           + entropy_coef * H(pi)  -  value_coef * MSE(V, returns)
//! ```
//!
//! with `r = exp(log_prob_new - log_prob_old)`, a single Adam optimizer over
//! policy, value network, and log standard deviation, and a global
//! gradient-norm clip.
//!
//! Everything is deterministic given the master seed: each episode's RNG is
//! derived from `(seed, purpose tag, episode counter)` via [`derive_seed`],
//! so a collection's outcome is a pure function of its inputs and does not
//! depend on how episodes are scheduled.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::derive_seed;
use crate::env::{self, EnvConfig, EnvError, Observation, Variant};
use crate::instance::MipInstance;
use crate::nn::{
    gaussian_entropy, gaussian_log_prob, gaussian_log_prob_grads, sample_action, Critic, NnError,
    ParamVisitor, Policy,
};

/// Seed-derivation purpose tags (see [`derive_seed`]).
pub const SEED_TAG_INIT: u64 = 1;
pub const SEED_TAG_ROLLOUT: u64 = 2;
pub const SEED_TAG_EVAL: u64 = 3;
pub const SEED_TAG_SHUFFLE: u64 = 4;

#[derive(Debug, Error)]
pub enum PpoError {
    #[error("environment: {0}")]
    Env(#[from] EnvError),
    #[error("network: {0}")]
    Nn(#[from] NnError),
    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),
    #[error("bad training configuration: {0}")]
    BadConfig(String),
    #[error("empty instance pool")]
    EmptyPool,
    #[error("instance pool mismatch: {0}")]
    PoolMismatch(String),
    #[error("rollout buffer invariant violated: {0}")]
    BadBuffer(String),
}

/// All training hyperparameters. Every field has a conventional default;
/// the config file may override any subset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Outer collect/update cycles.
    pub iterations: usize,
    /// Complete episodes collected per iteration.
    pub episodes_per_iteration: usize,
    /// Passes over the collected batch per update.
    pub epochs_per_update: usize,
    /// Transitions per gradient step.
    pub minibatch_size: usize,
    /// Discount factor, in (0, 1].
    pub gamma: f64,
    /// Advantage-estimation decay, in [0, 1].
    pub gae_lambda: f64,
    /// Surrogate clip radius.
    pub clip_eps: f64,
    /// Adam step size.
    pub learning_rate: f64,
    /// Weight of the value-regression loss.
    pub value_coef: f64,
    /// Weight of the entropy bonus.
    pub entropy_coef: f64,
    /// Global gradient-norm ceiling.
    pub max_grad_norm: f64,
    /// Master seed; all stream seeds derive from it.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            episodes_per_iteration: 32,
            epochs_per_update: 4,
            minibatch_size: 64,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            learning_rate: 3e-4,
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |msg: String| Err(PpoError::BadConfig(msg));
        if self.iterations == 0
            || self.episodes_per_iteration == 0
            || self.epochs_per_update == 0
            || self.minibatch_size == 0
        {
            return bad("iteration, episode, epoch, and minibatch counts must be >= 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma = {} outside (0, 1]", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad(format!("gae_lambda = {} outside [0, 1]", self.gae_lambda));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps.is_finite()) {
            return bad(format!("clip_eps = {} must be positive", self.clip_eps));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate = {} must be positive",
                self.learning_rate
            ));
        }
        if !(self.value_coef >= 0.0 && self.value_coef.is_finite())
            || !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite())
        {
            return bad("value_coef and entropy_coef must be finite and >= 0".into());
        }
        if !(self.max_grad_norm > 0.0 && self.max_grad_norm.is_finite()) {
            return bad(format!(
                "max_grad_norm = {} must be positive",
                self.max_grad_norm
            ));
        }
        Ok(())
    }
}

/// One environment step as seen at collection time.
#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Observation,
    pub action: Vec<f64>,
    pub log_prob_old: f64,
    pub reward: f64,
    pub value_old: f64,
    pub done: bool,
    pub episode: usize,
}

/// A batch of complete episodes. Transitions are grouped by episode in
/// collection order; an episode that is already feasible at reset
/// contributes a length-1 entry with no transitions.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub transitions: Vec<Transition>,
    pub episode_lengths: Vec<usize>,
    /// Projection LP solves spent collecting the batch.
    pub lp_solves: usize,
}

impl RolloutBuffer {
    pub fn validate(&self, max_steps: usize) -> Result<(), PpoError> {
        let bad = |msg: String| Err(PpoError::BadBuffer(msg));
        for len in &self.episode_lengths {
            if *len == 0 || *len > max_steps {
                return bad(format!("episode length {len} outside [1, {max_steps}]"));
            }
        }
        let mut last_episode: Option<usize> = None;
        let mut seen: Vec<usize> = Vec::new();
        for (i, tr) in self.transitions.iter().enumerate() {
            if tr.episode >= self.episode_lengths.len() {
                return bad(format!(
                    "transition {i} references unknown episode {}",
                    tr.episode
                ));
            }
            match last_episode {
                Some(e) if e == tr.episode => {}
                _ => {
                    if seen.contains(&tr.episode) {
                        return bad(format!("episode {} is not contiguous", tr.episode));
                    }
                    if let Some(e) = last_episode {
                        if !self.transitions[i - 1].done {
                            return bad(format!("episode {e} does not end with done"));
                        }
                    }
                    seen.push(tr.episode);
                }
            }
            last_episode = Some(tr.episode);
        }
        if let Some(e) = last_episode {
            if !self.transitions.last().unwrap().done {
                return bad(format!("episode {e} does not end with done"));
            }
        }
        for (e, count) in seen.iter().map(|e| {
            (
                *e,
                self.transitions.iter().filter(|t| t.episode == *e).count(),
            )
        }) {
            if count > max_steps {
                return bad(format!("episode {e} has {count} transitions > {max_steps}"));
            }
        }
        Ok(())
    }

    /// Undiscounted return of every episode (0 for feasible-at-reset ones).
    pub fn episode_returns(&self) -> Vec<f64> {
        let mut returns = vec![0.0; self.episode_lengths.len()];
        for tr in &self.transitions {
            returns[tr.episode] += tr.reward;
        }
        returns
    }
}

fn check_pool(pool: &[MipInstance], policy: &Policy) -> Result<(), PpoError> {
    if pool.is_empty() {
        return Err(PpoError::EmptyPool);
    }
    for inst in pool {
        if inst.n != policy.n() || inst.m != policy.m() {
            return Err(PpoError::PoolMismatch(format!(
                "instance is ({}, {}), networks are bound to ({}, {})",
                inst.n,
                inst.m,
                policy.n(),
                policy.m()
            )));
        }
    }
    Ok(())
}

/// Roll out `count` complete episodes with the current policy. Each episode
/// draws its own RNG seed from `rng`, then picks its instance uniformly and
/// samples its actions from that stream alone.
pub fn collect_rollouts(
    policy: &mut Policy,
    critic: &mut Critic,
    pool: &[MipInstance],
    env_config: &EnvConfig,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RolloutBuffer, PpoError> {
    check_pool(pool, policy)?;
    let mut buffer = RolloutBuffer::default();
    for episode in 0..count {
        let mut ep_rng = ChaCha8Rng::seed_from_u64(rng.gen());
        let inst = &pool[ep_rng.gen_range(0..pool.len())];
        let (mut state, mut obs) = env::reset(inst, env_config.clone())?;
        while !state.done {
            let value_old = critic.forward(&obs)?;
            let (action, log_prob_old) = sample_action(policy, &obs, &mut ep_rng)?;
            let outcome = state.step(&action)?;
            buffer.transitions.push(Transition {
                obs,
                action,
                log_prob_old,
                reward: outcome.reward,
                value_old,
                done: outcome.done,
                episode,
            });
            obs = outcome.obs;
        }
        buffer.episode_lengths.push(state.episode_len());
        buffer.lp_solves += state.projection_solves;
    }
    Ok(buffer)
}

/// Raw (unnormalized) GAE advantages over the whole buffer:
/// `delta_t = r_t + gamma V_{t+1} (1 - done) - V_t`,
/// `A_t = delta_t + gamma lambda A_{t+1}`, restarted at episode ends.
pub fn gae_raw(buffer: &RolloutBuffer, gamma: f64, lambda: f64) -> Vec<f64> {
    let mut adv = vec![0.0; buffer.transitions.len()];
    let mut next_adv = 0.0;
    let mut next_value = 0.0;
    for t in (0..buffer.transitions.len()).rev() {
        let tr = &buffer.transitions[t];
        if tr.done {
            next_adv = 0.0;
            next_value = 0.0;
        }
        let delta = tr.reward + gamma * next_value - tr.value_old;
        let a = delta + gamma * lambda * next_adv;
        adv[t] = a;
        next_adv = a;
        next_value = tr.value_old;
    }
    adv
}

/// Advantages (normalized to zero mean / unit variance over the batch) and
/// value-regression targets `returns = raw_advantage + value_old`.
pub fn compute_gae(buffer: &RolloutBuffer, gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let raw = gae_raw(buffer, gamma, lambda);
    let returns: Vec<f64> = raw
        .iter()
        .zip(&buffer.transitions)
        .map(|(a, tr)| a + tr.value_old)
        .collect();
    let len = raw.len().max(1) as f64;
    let mean = raw.iter().sum::<f64>() / len;
    let var = raw.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / len;
    let std = var.sqrt();
    let normalized = raw.iter().map(|a| (a - mean) / (std + 1e-8)).collect();
    (normalized, returns)
}

/// Adam with bias correction, applied jointly to policy and value network
/// in visitor order. Moments persist across updates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, dim: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
        }
    }

    fn step(&mut self, policy: &mut Policy, critic: &mut Critic) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut i = 0;
        let mut apply = |p: &mut f64, g: &mut f64| {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * *g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * *g * *g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            *p -= self.lr * mhat / (vhat.sqrt() + self.eps);
            i += 1;
        };
        policy.for_each_param_grad(&mut apply);
        critic.for_each_param_grad(&mut apply);
        debug_assert_eq!(i, self.m.len());
    }
}

/// Global L2 norm of all gradients (policy then value network).
fn grad_norm(policy: &mut Policy, critic: &mut Critic) -> f64 {
    let mut acc = 0.0;
    let mut add = |_: &mut f64, g: &mut f64| acc += *g * *g;
    policy.for_each_param_grad(&mut add);
    critic.for_each_param_grad(&mut add);
    acc.sqrt()
}

fn scale_grads(policy: &mut Policy, critic: &mut Critic, s: f64) {
    let mut scale = |_: &mut f64, g: &mut f64| *g *= s;
    policy.for_each_param_grad(&mut scale);
    critic.for_each_param_grad(&mut scale);
}

/// Probability ratios `exp(log_prob_now - log_prob_old)` of every stored
/// transition under the networks' current parameters.
pub fn ratios_against(policy: &mut Policy, buffer: &RolloutBuffer) -> Result<Vec<f64>, PpoError> {
    let mut out = Vec::with_capacity(buffer.transitions.len());
    for tr in &buffer.transitions {
        let mean = policy.forward(&tr.obs)?;
        let lp = gaussian_log_prob(&mean, policy.log_std(), &tr.action);
        out.push((lp - tr.log_prob_old).exp());
    }
    Ok(out)
}

/// Aggregate statistics of one `ppo_update` call. `ratios` records every
/// probability ratio in processing order so the reported `clip_fraction`
/// can be recounted directly from the data.
#[derive(Debug, Clone)]
pub struct UpdateStats {
    pub surrogate_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub ratios: Vec<f64>,
    /// max |ratio - 1| over the first minibatch, before any gradient step.
    pub first_batch_ratio_dev: f64,
    pub samples: usize,
}

/// Run `epochs x minibatches` clipped-surrogate gradient steps on a batch.
///
/// A non-finite ratio, loss term, or gradient aborts the update with
/// [`PpoError::NonFiniteLoss`] and a diagnostic naming the offending
/// quantity; parameters keep whatever value the last completed step left.
pub fn ppo_update(
    policy: &mut Policy,
    critic: &mut Critic,
    buffer: &RolloutBuffer,
    cfg: &TrainConfig,
    opt: &mut Adam,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats, PpoError> {
    cfg.validate()?;
    if buffer.transitions.is_empty() {
        return Err(PpoError::BadBuffer("no transitions to update on".into()));
    }
    let (advantages, returns) = compute_gae(buffer, cfg.gamma, cfg.gae_lambda);

    let mut stats = UpdateStats {
        surrogate_loss: 0.0,
        value_loss: 0.0,
        entropy: 0.0,
        clip_fraction: 0.0,
        ratios: Vec::new(),
        first_batch_ratio_dev: 0.0,
        samples: 0,
    };
    let mut clip_events = 0usize;
    let mut first_batch = true;

    for _epoch in 0..cfg.epochs_per_update {
        let mut order: Vec<usize> = (0..buffer.transitions.len()).collect();
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            policy.zero_grad();
            critic.zero_grad();
            let batch = chunk.len() as f64;
            for &t in chunk {
                let tr = &buffer.transitions[t];
                let mean = policy.forward(&tr.obs)?;
                let log_std = policy.log_std().to_vec();
                let lp_new = gaussian_log_prob(&mean, &log_std, &tr.action);
                let ratio = (lp_new - tr.log_prob_old).exp();
                if !ratio.is_finite() {
                    return Err(PpoError::NonFiniteLoss(format!(
                        "probability ratio {ratio} (log-probs {lp_new} vs {})",
                        tr.log_prob_old
                    )));
                }
                let a = advantages[t];
                let plain = ratio * a;
                let clipped = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * a;
                let surrogate = plain.min(clipped);

                // d(-surrogate)/d(log_prob_new): the clipped branch has zero
                // derivative in ratio outside the band; inside the band both
                // branches coincide.
                let dloss_dlp = if plain <= clipped { -(ratio * a) } else { 0.0 };
                let (dmu, dls) = gaussian_log_prob_grads(&mean, &log_std, &tr.action);
                let dmean: Vec<f64> = dmu.iter().map(|d| d * dloss_dlp / batch).collect();
                policy.backward(&dmean)?;
                {
                    let gls = policy.glog_std_mut();
                    for (g, d) in gls.iter_mut().zip(&dls) {
                        *g += (d * dloss_dlp - cfg.entropy_coef) / batch;
                    }
                }

                let value = critic.forward(&tr.obs)?;
                let verr = value - returns[t];
                if !verr.is_finite() {
                    return Err(PpoError::NonFiniteLoss(format!(
                        "value error {verr} (prediction {value}, target {})",
                        returns[t]
                    )));
                }
                critic.backward(cfg.value_coef * 2.0 * verr / batch)?;

                let ent = gaussian_entropy(&log_std);
                stats.surrogate_loss -= surrogate;
                stats.value_loss += verr * verr;
                stats.entropy += ent;
                stats.samples += 1;
                stats.ratios.push(ratio);
                if (ratio - 1.0).abs() > cfg.clip_eps {
                    clip_events += 1;
                }
                if first_batch {
                    stats.first_batch_ratio_dev =
                        stats.first_batch_ratio_dev.max((ratio - 1.0).abs());
                }
            }
            first_batch = false;

            let norm = grad_norm(policy, critic);
            if !norm.is_finite() {
                return Err(PpoError::NonFiniteLoss(format!("gradient norm {norm}")));
            }
            if norm > cfg.max_grad_norm {
                scale_grads(policy, critic, cfg.max_grad_norm / norm);
            }
            opt.step(policy, critic);
            policy.clamp_log_std();
        }
    }

    let count = stats.samples.max(1) as f64;
    stats.surrogate_loss /= count;
    stats.value_loss /= count;
    stats.entropy /= count;
    stats.clip_fraction = clip_events as f64 / count;
    if !stats.surrogate_loss.is_finite() || !stats.value_loss.is_finite() {
        return Err(PpoError::NonFiniteLoss(format!(
            "aggregate losses (surrogate {}, value {})",
            stats.surrogate_loss, stats.value_loss
        )));
    }
    Ok(stats)
}

/// Step counts and cost of one evaluation episode.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeStats {
    pub length: usize,
    pub lp_solves: usize,
    /// Whether the final point satisfies every constraint.
    pub feasible: bool,
}

/// Play one episode. `deterministic` uses the mean action and consumes no
/// randomness; otherwise actions are sampled from the seeded stream.
pub fn run_episode(
    policy: &mut Policy,
    inst: &MipInstance,
    env_config: &EnvConfig,
    seed: u64,
    deterministic: bool,
) -> Result<EpisodeStats, PpoError> {
    let (mut state, mut obs) = env::reset(inst, env_config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while !state.done {
        let action = if deterministic {
            policy.forward(&obs)?
        } else {
            sample_action(policy, &obs, &mut rng)?.0
        };
        let outcome = state.step(&action)?;
        obs = outcome.obs;
    }
    let feasible = state
        .inst
        .check(&state.x)
        .map(|r| r.feasible)
        .unwrap_or(false);
    Ok(EpisodeStats {
        length: state.episode_len(),
        lp_solves: state.projection_solves,
        feasible,
    })
}

/// One row of the training log.
#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Mean/std/return over the episodes collected this iteration.
    pub ep_len_mean: f64,
    pub ep_len_std: f64,
    pub mean_return: f64,
    pub surrogate_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    /// Projection LP solves spent on collection this iteration.
    pub lp_solves: usize,
    /// Mean episode length over the held-out pool (stochastic actions).
    pub eval_ep_len_mean: f64,
}

/// Everything needed to reproduce a run, stored next to its log.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub variant: String,
    pub n: usize,
    pub m: usize,
    pub train_pool: usize,
    pub eval_pool: usize,
    pub max_steps: usize,
    pub reward_norm: String,
    pub action_clip: f64,
    pub freeze_projection: bool,
    pub obs_layout_version: u32,
    pub advantage_normalization: String,
    pub config: TrainConfig,
}

/// Per-iteration records plus run metadata; renders to CSV and JSON.
#[derive(Debug, Clone)]
pub struct TrainLog {
    pub metadata: RunMetadata,
    pub records: Vec<IterationRecord>,
}

pub const TRAIN_CSV_HEADER: &str = "iteration,ep_len_mean,ep_len_std,mean_return,surrogate_loss,value_loss,entropy,clip_fraction,lp_solves,eval_ep_len_mean";

/// Render one log row in the stable CSV column order.
pub fn record_to_csv(r: &IterationRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.iteration,
        r.ep_len_mean,
        r.ep_len_std,
        r.mean_return,
        r.surrogate_loss,
        r.value_loss,
        r.entropy,
        r.clip_fraction,
        r.lp_solves,
        r.eval_ep_len_mean
    )
}

impl RunMetadata {
    /// Captures everything reproducibility needs before training starts.
    pub fn new(
        variant: Variant,
        n: usize,
        m: usize,
        train_pool: usize,
        eval_pool: usize,
        env_config: &EnvConfig,
        cfg: &TrainConfig,
    ) -> Self {
        Self {
            variant: variant.to_string(),
            n,
            m,
            train_pool,
            eval_pool,
            max_steps: env_config.max_steps,
            reward_norm: format!("{:?}", env_config.reward_norm),
            action_clip: env_config.action_clip,
            freeze_projection: env_config.freeze_projection,
            obs_layout_version: env::OBS_LAYOUT_VERSION,
            advantage_normalization: "batch zero-mean unit-variance".into(),
            config: cfg.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("metadata serialization");
        out.push('\n');
        out
    }
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRAIN_CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&record_to_csv(r));
            out.push('\n');
        }
        out
    }

    pub fn metadata_json(&self) -> String {
        self.metadata.to_json()
    }
}

/// Result of a full training run: final networks, the best networks by
/// held-out mean episode length, and the complete log.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: Policy,
    pub critic: Critic,
    pub best_policy: Policy,
    pub best_critic: Critic,
    pub best_iteration: usize,
    pub best_eval_ep_len: f64,
    pub log: TrainLog,
}

fn population_stats(values: &[usize]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let len = values.len() as f64;
    let mean = values.iter().map(|v| *v as f64).sum::<f64>() / len;
    let var = values
        .iter()
        .map(|v| (*v as f64 - mean).powi(2))
        .sum::<f64>()
        / len;
    (mean, var.sqrt())
}

/// Full training loop: `iterations x (collect -> advantages -> update ->
/// held-out evaluation)`. `sink` receives each completed row immediately,
/// so a caller can persist partial logs even if a later iteration aborts.
pub fn train_with_sink(
    train_pool: &[MipInstance],
    eval_pool: &[MipInstance],
    variant: Variant,
    env_config: &EnvConfig,
    cfg: &TrainConfig,
    sink: &mut dyn FnMut(&IterationRecord),
) -> Result<TrainOutcome, PpoError> {
    cfg.validate()?;
    let mut env_config = env_config.clone();
    env_config.variant = variant;
    env_config
        .validate()
        .map_err(|msg| PpoError::Env(EnvError::BadConfig(msg)))?;
    if train_pool.is_empty() || eval_pool.is_empty() {
        return Err(PpoError::EmptyPool);
    }
    let (n, m) = (train_pool[0].n, train_pool[0].m);
    for inst in train_pool.iter().chain(eval_pool) {
        if inst.n != n || inst.m != m {
            return Err(PpoError::PoolMismatch(format!(
                "mixed geometries ({}, {}) and ({n}, {m}) in the pools",
                inst.n, inst.m
            )));
        }
    }

    let master = cfg.seed;
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(master, SEED_TAG_INIT, 0));
    let mut policy = Policy::new(variant, n, m, &mut init_rng);
    let mut critic = Critic::new(variant, n, m, &mut init_rng);
    let dim = policy.param_count() + critic.param_count();
    let mut opt = Adam::new(cfg.learning_rate, dim);
    let mut rollout_rng = ChaCha8Rng::seed_from_u64(derive_seed(master, SEED_TAG_ROLLOUT, 0));
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(master, SEED_TAG_SHUFFLE, 0));

    let metadata = RunMetadata::new(
        variant,
        n,
        m,
        train_pool.len(),
        eval_pool.len(),
        &env_config,
        cfg,
    );
    let mut log = TrainLog {
        metadata,
        records: Vec::with_capacity(cfg.iterations),
    };

    let mut best_policy = policy.clone();
    let mut best_critic = critic.clone();
    let mut best_iteration = 0;
    let mut best_eval = f64::INFINITY;

    for iteration in 1..=cfg.iterations {
        let buffer = collect_rollouts(
            &mut policy,
            &mut critic,
            train_pool,
            &env_config,
            cfg.episodes_per_iteration,
            &mut rollout_rng,
        )?;
        buffer.validate(env_config.max_steps)?;

        // A batch where every episode was feasible at reset has nothing to
        // update on; record it and move to the next iteration.
        let stats = if buffer.transitions.is_empty() {
            UpdateStats {
                surrogate_loss: 0.0,
                value_loss: 0.0,
                entropy: gaussian_entropy(policy.log_std()),
                clip_fraction: 0.0,
                ratios: Vec::new(),
                first_batch_ratio_dev: 0.0,
                samples: 0,
            }
        } else {
            ppo_update(
                &mut policy,
                &mut critic,
                &buffer,
                cfg,
                &mut opt,
                &mut shuffle_rng,
            )?
        };

        let mut eval_sum = 0usize;
        for (i, inst) in eval_pool.iter().enumerate() {
            let seed = derive_seed(master, SEED_TAG_EVAL, (iteration as u64) << 32 | i as u64);
            let ep = run_episode(&mut policy, inst, &env_config, seed, false)?;
            eval_sum += ep.length;
        }
        let eval_mean = eval_sum as f64 / eval_pool.len() as f64;

        let (len_mean, len_std) = population_stats(&buffer.episode_lengths);
        let returns = buffer.episode_returns();
        let mean_return = returns.iter().sum::<f64>() / returns.len().max(1) as f64;
        let record = IterationRecord {
            iteration,
            ep_len_mean: len_mean,
            ep_len_std: len_std,
            mean_return,
            surrogate_loss: stats.surrogate_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            clip_fraction: stats.clip_fraction,
            lp_solves: buffer.lp_solves,
            eval_ep_len_mean: eval_mean,
        };
        sink(&record);
        log.records.push(record);

        if eval_mean < best_eval {
            best_eval = eval_mean;
            best_iteration = iteration;
            best_policy = policy.clone();
            best_critic = critic.clone();
        }
    }

    Ok(TrainOutcome {
        policy,
        critic,
        best_policy,
        best_critic,
        best_iteration,
        best_eval_ep_len: best_eval,
        log,
    })
}

/// [`train_with_sink`] without incremental log persistence.
pub fn train(
    train_pool: &[MipInstance],
    eval_pool: &[MipInstance],
    variant: Variant,
    env_config: &EnvConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, PpoError> {
    train_with_sink(train_pool, eval_pool, variant, env_config, cfg, &mut |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, Kind};
    use crate::nn::log_prob;
    use crate::oracle::naive_gae_episode;

    fn small_pool(count: usize, kind: Kind) -> Vec<MipInstance> {
        (0..count as u64)
            .map(|i| generate(4_000 + i, 3, 4, kind).unwrap())
            .collect()
    }

    fn fresh_nets(seed: u64) -> (Policy, Critic) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let policy = Policy::new(Variant::MlpObs, 3, 4, &mut rng);
        let critic = Critic::new(Variant::MlpObs, 3, 4, &mut rng);
        (policy, critic)
    }

    fn short_env() -> EnvConfig {
        EnvConfig {
            max_steps: 15,
            ..EnvConfig::default()
        }
    }

    #[test]
    fn collection_is_deterministic() {
        let pool = small_pool(6, Kind::Ip);
        let env_config = short_env();
        let (p0, c0) = fresh_nets(77);

        let run = |seed: u64| {
            let (mut p, mut c) = (p0.clone(), c0.clone());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            collect_rollouts(&mut p, &mut c, &pool, &env_config, 5, &mut rng).unwrap()
        };
        let (a, b) = (run(9), run(9));
        assert_eq!(a.episode_lengths, b.episode_lengths);
        assert_eq!(a.lp_solves, b.lp_solves);
        assert_eq!(a.transitions.len(), b.transitions.len());
        for (x, y) in a.transitions.iter().zip(&b.transitions) {
            assert_eq!(x.action, y.action);
            assert_eq!(x.reward, y.reward);
            assert_eq!(x.log_prob_old, y.log_prob_old);
        }
        a.validate(env_config.max_steps).unwrap();
    }

    #[test]
    fn stored_log_probs_match_recomputation() {
        let pool = small_pool(4, Kind::Mip);
        let env_config = short_env();
        let (mut p, mut c) = fresh_nets(78);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let buffer = collect_rollouts(&mut p, &mut c, &pool, &env_config, 6, &mut rng).unwrap();
        assert!(!buffer.transitions.is_empty());
        for tr in &buffer.transitions {
            let lp = log_prob(&mut p, &tr.obs, &tr.action).unwrap();
            assert!((lp - tr.log_prob_old).abs() < 1e-10);
        }
    }

    #[test]
    fn feasible_at_reset_pool_yields_unit_lengths() {
        // Hunt for instances whose rounded relaxation optimum is already
        // feasible, then collect on that pool with a near-silent policy.
        let env_config = short_env();
        let mut pool = Vec::new();
        let mut seed = 0u64;
        while pool.len() < 3 {
            let inst = generate(30_000 + seed, 3, 4, Kind::Ip).unwrap();
            let (state, _) = env::reset(&inst, env_config.clone()).unwrap();
            if state.done {
                pool.push(inst);
            }
            seed += 1;
            assert!(seed < 4_000, "no feasible-at-reset instances found");
        }
        let (mut p, mut c) = fresh_nets(79);
        p.for_each_param_grad(&mut |v, _| *v = 0.0);
        p.log_std_mut().iter_mut().for_each(|v| *v = -5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let buffer = collect_rollouts(&mut p, &mut c, &pool, &env_config, 8, &mut rng).unwrap();
        assert!(buffer.transitions.is_empty());
        assert_eq!(buffer.episode_lengths, vec![1; 8]);
    }

    fn synthetic_buffer(rewards: &[&[f64]], values: &[&[f64]]) -> RolloutBuffer {
        // Observation content is irrelevant for advantage math.
        let dummy_obs = || Observation::MlpVec { flat: vec![0.0] };
        let mut buffer = RolloutBuffer::default();
        for (e, (rs, vs)) in rewards.iter().zip(values).enumerate() {
            assert_eq!(rs.len(), vs.len());
            for t in 0..rs.len() {
                buffer.transitions.push(Transition {
                    obs: dummy_obs(),
                    action: vec![0.0],
                    log_prob_old: 0.0,
                    reward: rs[t],
                    value_old: vs[t],
                    done: t + 1 == rs.len(),
                    episode: e,
                });
            }
            buffer.episode_lengths.push(rs.len());
        }
        buffer
    }

    #[test]
    fn gae_single_step_is_one_step_td() {
        let buffer = synthetic_buffer(&[&[2.0]], &[&[0.7]]);
        let adv = gae_raw(&buffer, 0.9, 0.0);
        // Terminal step: delta = r - V.
        assert!((adv[0] - (2.0 - 0.7)).abs() < 1e-12);
    }

    #[test]
    fn gae_lambda_one_zero_values_is_reward_to_go() {
        let buffer = synthetic_buffer(&[&[1.0, 2.0, 3.0]], &[&[0.0, 0.0, 0.0]]);
        let gamma = 0.9;
        let adv = gae_raw(&buffer, gamma, 1.0);
        let expect0 = 1.0 + gamma * 2.0 + gamma * gamma * 3.0;
        let expect1 = 2.0 + gamma * 3.0;
        assert!((adv[0] - expect0).abs() < 1e-12);
        assert!((adv[1] - expect1).abs() < 1e-12);
        assert!((adv[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gae_matches_naive_double_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..25 {
            let n_eps = rng.gen_range(1..4);
            let mut rewards: Vec<Vec<f64>> = Vec::new();
            let mut values: Vec<Vec<f64>> = Vec::new();
            for _ in 0..n_eps {
                let len = rng.gen_range(1..9);
                rewards.push((0..len).map(|_| rng.gen_range(-3.0..3.0)).collect());
                values.push((0..len).map(|_| rng.gen_range(-3.0..3.0)).collect());
            }
            let r_slices: Vec<&[f64]> = rewards.iter().map(|v| v.as_slice()).collect();
            let v_slices: Vec<&[f64]> = values.iter().map(|v| v.as_slice()).collect();
            let buffer = synthetic_buffer(&r_slices, &v_slices);
            let (gamma, lambda) = (rng.gen_range(0.5..1.0), rng.gen_range(0.0..1.0));
            let fast = gae_raw(&buffer, gamma, lambda);
            let mut offset = 0;
            for (rs, vs) in rewards.iter().zip(&values) {
                let naive = naive_gae_episode(rs, vs, gamma, lambda);
                for (k, expect) in naive.iter().enumerate() {
                    assert!((fast[offset + k] - expect).abs() < 1e-10);
                }
                offset += rs.len();
            }
        }
    }

    #[test]
    fn returns_are_raw_advantage_plus_value() {
        let buffer = synthetic_buffer(&[&[1.0, -1.0], &[0.5]], &[&[0.3, 0.2], &[-0.1]]);
        let raw = gae_raw(&buffer, 0.99, 0.95);
        let (_, returns) = compute_gae(&buffer, 0.99, 0.95);
        for (i, tr) in buffer.transitions.iter().enumerate() {
            assert!((returns[i] - (raw[i] + tr.value_old)).abs() < 1e-12);
        }
    }

    #[test]
    fn ratios_are_one_before_any_update() {
        let pool = small_pool(4, Kind::Ip);
        let env_config = short_env();
        let (mut p, mut c) = fresh_nets(80);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let buffer = collect_rollouts(&mut p, &mut c, &pool, &env_config, 6, &mut rng).unwrap();
        let ratios = ratios_against(&mut p, &buffer).unwrap();
        let max_dev = ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
        assert!(max_dev < 1e-8, "max deviation {max_dev}");
    }

    #[test]
    fn zero_advantages_leave_policy_untouched() {
        // Values chosen so every GAE delta is exactly zero.
        let gamma = 0.5;
        let rewards = [-1.0, -2.0, -3.0];
        let mut values = [0.0; 3];
        values[2] = rewards[2];
        values[1] = rewards[1] + gamma * values[2];
        values[0] = rewards[0] + gamma * values[1];

        let pool = small_pool(1, Kind::Ip);
        let env_config = short_env();
        let (mut p, mut c) = fresh_nets(81);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let collected = collect_rollouts(&mut p, &mut c, &pool, &env_config, 4, &mut rng).unwrap();
        assert!(
            collected.transitions.len() >= 3,
            "need at least 3 transitions"
        );

        // Rebuild a 3-step buffer on real observations with the crafted
        // rewards/values, stored log-probs matching the current policy.
        let mut buffer = RolloutBuffer::default();
        for t in 0..3 {
            let src = &collected.transitions[t];
            buffer.transitions.push(Transition {
                obs: src.obs.clone(),
                action: src.action.clone(),
                log_prob_old: log_prob(&mut p, &src.obs, &src.action).unwrap(),
                reward: rewards[t],
                value_old: values[t],
                done: t == 2,
                episode: 0,
            });
        }
        buffer.episode_lengths.push(3);
        assert!(gae_raw(&buffer, gamma, 0.9).iter().all(|a| a.abs() < 1e-12));

        let cfg = TrainConfig {
            epochs_per_update: 2,
            minibatch_size: 8,
            gamma,
            gae_lambda: 0.9,
            entropy_coef: 0.0,
            ..TrainConfig::default()
        };
        let mut before = Vec::new();
        p.for_each_param_grad(&mut |v, _| before.push(v.to_bits()));
        let mut opt = Adam::new(cfg.learning_rate, p.param_count() + c.param_count());
        let mut shuffle = ChaCha8Rng::seed_from_u64(15);
        ppo_update(&mut p, &mut c, &buffer, &cfg, &mut opt, &mut shuffle).unwrap();
        let mut after = Vec::new();
        p.for_each_param_grad(&mut |v, _| after.push(v.to_bits()));
        assert_eq!(before, after);
    }

    #[test]
    fn clip_fraction_matches_direct_recount() {
        let pool = small_pool(5, Kind::Mip);
        let env_config = short_env();
        let (mut p, mut c) = fresh_nets(82);
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let buffer = collect_rollouts(&mut p, &mut c, &pool, &env_config, 8, &mut rng).unwrap();
        let cfg = TrainConfig {
            epochs_per_update: 3,
            minibatch_size: 16,
            learning_rate: 3e-3,
            ..TrainConfig::default()
        };
        let mut opt = Adam::new(cfg.learning_rate, p.param_count() + c.param_count());
        let mut shuffle = ChaCha8Rng::seed_from_u64(17);
        let stats = ppo_update(&mut p, &mut c, &buffer, &cfg, &mut opt, &mut shuffle).unwrap();

        assert_eq!(stats.samples, stats.ratios.len());
        let recount = stats
            .ratios
            .iter()
            .filter(|r| (**r - 1.0).abs() > cfg.clip_eps)
            .count() as f64
            / stats.ratios.len() as f64;
        assert!((stats.clip_fraction - recount).abs() < 1e-12);
        assert!(stats.first_batch_ratio_dev < 1e-8);
    }

    #[test]
    fn nan_in_buffer_aborts_with_non_finite_loss() {
        let pool = small_pool(2, Kind::Ip);
        let env_config = short_env();
        let (mut p, mut c) = fresh_nets(83);
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let mut buffer = collect_rollouts(&mut p, &mut c, &pool, &env_config, 4, &mut rng).unwrap();
        assert!(!buffer.transitions.is_empty());
        buffer.transitions[0].log_prob_old = f64::NAN;
        let cfg = TrainConfig::default();
        let mut opt = Adam::new(cfg.learning_rate, p.param_count() + c.param_count());
        let mut shuffle = ChaCha8Rng::seed_from_u64(19);
        let err = ppo_update(&mut p, &mut c, &buffer, &cfg, &mut opt, &mut shuffle).unwrap_err();
        assert!(matches!(err, PpoError::NonFiniteLoss(_)), "{err}");
    }

    #[test]
    fn buffer_validation_catches_broken_invariants() {
        let mut buffer = synthetic_buffer(&[&[1.0, 1.0]], &[&[0.0, 0.0]]);
        buffer.validate(10).unwrap();
        // Episode that does not end with done.
        buffer.transitions[1].done = false;
        assert!(buffer.validate(10).is_err());
        // Length above the cap.
        let buffer = synthetic_buffer(&[&[0.0; 12]], &[&[0.0; 12]]);
        assert!(buffer.validate(10).is_err());
        // Non-contiguous episode ids.
        let mut buffer = synthetic_buffer(&[&[1.0], &[2.0], &[3.0]], &[&[0.0], &[0.0], &[0.0]]);
        buffer.transitions[2].episode = 0;
        assert!(buffer.validate(10).is_err());
    }

    #[test]
    fn run_episode_deterministic_mode_ignores_seed() {
        let inst = generate(5_000, 3, 4, Kind::Ip).unwrap();
        let env_config = short_env();
        let (mut p, _) = fresh_nets(84);
        let a = run_episode(&mut p, &inst, &env_config, 1, true).unwrap();
        let b = run_episode(&mut p, &inst, &env_config, 999, true).unwrap();
        assert_eq!(a.length, b.length);
        assert_eq!(a.lp_solves, b.lp_solves);
        assert_eq!(a.feasible, b.feasible);
    }

    #[test]
    fn training_smoke_run_is_reproducible() {
        let train_pool = small_pool(10, Kind::Ip);
        let eval_pool: Vec<MipInstance> = (0..4u64)
            .map(|i| generate(6_000 + i, 3, 4, Kind::Ip).unwrap())
            .collect();
        let env_config = short_env();
        let cfg = TrainConfig {
            iterations: 2,
            episodes_per_iteration: 6,
            minibatch_size: 32,
            seed: 42,
            ..TrainConfig::default()
        };
        let out1 = train(&train_pool, &eval_pool, Variant::MlpObs, &env_config, &cfg).unwrap();
        let out2 = train(&train_pool, &eval_pool, Variant::MlpObs, &env_config, &cfg).unwrap();
        assert_eq!(out1.log.records.len(), 2);
        assert_eq!(out1.log.to_csv(), out2.log.to_csv());
        assert_eq!(out1.log.metadata_json(), out2.log.metadata_json());
        for r in &out1.log.records {
            assert!(r.ep_len_mean.is_finite());
            assert!(r.surrogate_loss.is_finite());
            assert!(r.value_loss.is_finite());
            assert!(r.eval_ep_len_mean.is_finite());
        }
        // The sink sees exactly the rows that end up in the log.
        let mut seen = Vec::new();
        train_with_sink(
            &train_pool,
            &eval_pool,
            Variant::MlpObs,
            &env_config,
            &cfg,
            &mut |r| seen.push(r.iteration),
        )
        .unwrap();
        assert_eq!(seen, vec![1, 2]);
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let ok = TrainConfig::default();
        ok.validate().unwrap();
        for bad in [
            TrainConfig {
                gamma: 0.0,
                ..ok.clone()
            },
            TrainConfig {
                gamma: 1.5,
                ..ok.clone()
            },
            TrainConfig {
                clip_eps: 0.0,
                ..ok.clone()
            },
            TrainConfig {
                iterations: 0,
                ..ok.clone()
            },
            TrainConfig {
                minibatch_size: 0,
                ..ok.clone()
            },
            TrainConfig {
                learning_rate: -1.0,
                ..ok.clone()
            },
            TrainConfig {
                gae_lambda: 1.2,
                ..ok.clone()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
