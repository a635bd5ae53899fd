//! Episode-length metrics and head-to-head solver comparison.
//!
//! Every solver is scored the same way: run one episode per instance,
//! record the step count (failures count at the cap), and summarize the
//! counts as mean / population std / max / interpolated 90th and 10th
//! quantiles / success rate, plus the LP-projection cost. Wall-clock time
//! is measured and shown in the text rendering only — CSV outputs contain
//! exclusively deterministic numbers so a rerun is byte-identical.

use std::time::Instant;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::derive_seed;
use crate::env::EnvConfig;
use crate::fp::{self, FpError};
use crate::instance::{Kind, MipInstance};
use crate::nn::Policy;
use crate::ppo::{run_episode, PpoError};

/// Seed-derivation purpose tags for evaluation streams.
pub const SEED_TAG_FP_EVAL: u64 = 16;
pub const SEED_TAG_NET_EVAL: u64 = 17;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no instances to evaluate")]
    EmptySet,
    #[error("checkpoint binding mismatch: {0}")]
    BindingMismatch(String),
    #[error("pump: {0}")]
    Fp(#[from] FpError),
    #[error("episode: {0}")]
    Ppo(#[from] PpoError),
}

/// Quantile of a sample by linear interpolation between order statistics
/// at fractional index `p * (len - 1)`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&p));
    let h = p * (sorted.len() - 1) as f64;
    let k = h.floor() as usize;
    let g = h - k as f64;
    if k + 1 < sorted.len() {
        sorted[k] + g * (sorted[k + 1] - sorted[k])
    } else {
        sorted[k]
    }
}

/// One solver's summary over an instance set.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub solver: String,
    pub episodes: usize,
    pub ep_len_mean: f64,
    pub ep_len_std: f64,
    pub ep_len_max: f64,
    pub q90: f64,
    pub q10: f64,
    /// Fraction of episodes with step count strictly below the cap.
    pub success_rate: f64,
    pub lp_solves_per_episode: f64,
    /// Mean wall-clock seconds per episode; never written to CSV.
    pub wall_s_per_episode: f64,
}

/// Summarize per-episode step counts and LP-solve counts.
pub fn summarize(
    solver: &str,
    lengths: &[usize],
    lp_solves: &[usize],
    cap: usize,
    wall_seconds: f64,
) -> MetricsRow {
    assert!(!lengths.is_empty());
    assert_eq!(lengths.len(), lp_solves.len());
    let count = lengths.len() as f64;
    let as_f64: Vec<f64> = lengths.iter().map(|v| *v as f64).collect();
    let mean = as_f64.iter().sum::<f64>() / count;
    let var = as_f64.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
    let mut sorted = as_f64.clone();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let successes = lengths.iter().filter(|l| **l < cap).count();
    MetricsRow {
        solver: solver.to_string(),
        episodes: lengths.len(),
        ep_len_mean: mean,
        ep_len_std: var.sqrt(),
        ep_len_max: sorted[sorted.len() - 1],
        q90: quantile(&sorted, 0.9),
        q10: quantile(&sorted, 0.1),
        success_rate: successes as f64 / count,
        lp_solves_per_episode: lp_solves.iter().sum::<usize>() as f64 / count,
        wall_s_per_episode: wall_seconds / count,
    }
}

/// A summary row plus the per-episode raw data behind it.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub row: MetricsRow,
    pub lengths: Vec<usize>,
    pub lp_solves: Vec<usize>,
}

/// Score the classic pump: one run per instance, step cap `cap`, run seeds
/// derived from `seed`.
pub fn evaluate_fp(
    instances: &[MipInstance],
    cap: usize,
    seed: u64,
) -> Result<EvalOutcome, EvalError> {
    if instances.is_empty() {
        return Err(EvalError::EmptySet);
    }
    let started = Instant::now();
    let mut lengths = Vec::with_capacity(instances.len());
    let mut lp_solves = Vec::with_capacity(instances.len());
    for (i, inst) in instances.iter().enumerate() {
        let result = fp::run_fp(inst, cap, derive_seed(seed, SEED_TAG_FP_EVAL, i as u64))?;
        lengths.push(result.steps_taken);
        lp_solves.push(result.lp_solves);
    }
    let wall = started.elapsed().as_secs_f64();
    Ok(EvalOutcome {
        row: summarize("fp", &lengths, &lp_solves, cap, wall),
        lengths,
        lp_solves,
    })
}

/// Score a trained policy: one episode per instance under the policy's own
/// observation variant. `deterministic` switches from sampled actions
/// (the default protocol) to the distribution mean.
pub fn evaluate_policy(
    policy: &mut Policy,
    instances: &[MipInstance],
    cap: usize,
    seed: u64,
    deterministic: bool,
) -> Result<EvalOutcome, EvalError> {
    if instances.is_empty() {
        return Err(EvalError::EmptySet);
    }
    for inst in instances {
        if inst.n != policy.n() || inst.m != policy.m() {
            return Err(EvalError::BindingMismatch(format!(
                "instance is ({}, {}), networks are bound to ({}, {})",
                inst.n,
                inst.m,
                policy.n(),
                policy.m()
            )));
        }
    }
    let env_config = EnvConfig {
        max_steps: cap,
        variant: policy.variant(),
        ..EnvConfig::default()
    };
    let started = Instant::now();
    let mut lengths = Vec::with_capacity(instances.len());
    let mut lp_solves = Vec::with_capacity(instances.len());
    for (i, inst) in instances.iter().enumerate() {
        let ep_seed = derive_seed(seed, SEED_TAG_NET_EVAL, i as u64);
        let ep = run_episode(policy, inst, &env_config, ep_seed, deterministic)?;
        lengths.push(ep.length);
        lp_solves.push(ep.lp_solves);
    }
    let wall = started.elapsed().as_secs_f64();
    let label = policy.variant().to_string();
    Ok(EvalOutcome {
        row: summarize(&label, &lengths, &lp_solves, cap, wall),
        lengths,
        lp_solves,
    })
}

pub const METRICS_CSV_HEADER: &str =
    "solver,episodes,ep_len_mean,ep_len_std,ep_len_max,q90,q10,success_rate,lp_solves_per_episode";

/// Render one row in the stable CSV column order (wall time excluded).
pub fn row_to_csv(r: &MetricsRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        r.solver,
        r.episodes,
        r.ep_len_mean,
        r.ep_len_std,
        r.ep_len_max,
        r.q90,
        r.q10,
        r.success_rate,
        r.lp_solves_per_episode
    )
}

/// Rows for several solvers over one shared instance set.
#[derive(Debug, Clone)]
pub struct MetricsTable {
    pub kind: Kind,
    pub n: usize,
    pub m: usize,
    pub cap: usize,
    pub seed: u64,
    /// SHA-256 over the canonical text of every instance, in order.
    pub instance_hash: String,
    /// Fixed column order: pump first, then the network policies. `None`
    /// marks a requested solver whose checkpoint was unavailable.
    pub cells: Vec<(String, Option<MetricsRow>)>,
}

/// SHA-256 over the canonical text serialization of the whole set.
pub fn instance_set_hash(instances: &[MipInstance]) -> String {
    let mut hasher = Sha256::new();
    for inst in instances {
        hasher.update(inst.to_text().as_bytes());
    }
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

impl MetricsTable {
    /// CSV rendering: one line per present solver, deterministic fields only.
    pub fn to_csv(&self) -> String {
        let mut out = format!("kind,n,m,cap,seed,instance_hash,{METRICS_CSV_HEADER}\n");
        for (_, cell) in self.cells.iter().filter(|(_, c)| c.is_some()) {
            let row = cell.as_ref().unwrap();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.kind,
                self.n,
                self.m,
                self.cap,
                self.seed,
                self.instance_hash,
                row_to_csv(row)
            ));
        }
        out
    }

    /// Aligned text rendering; includes measured wall time, which is why
    /// this form is informational rather than comparable byte-for-byte.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "kind {}  size {}x{}  cap {}  seed {}\ninstances sha256:{}\n\n",
            self.kind, self.n, self.m, self.cap, self.seed, self.instance_hash
        ));
        out.push_str(&format!("{:<22}", "metric"));
        for (name, _) in &self.cells {
            out.push_str(&format!("{name:>12}"));
        }
        out.push('\n');
        let metric = |out: &mut String, label: &str, pick: &dyn Fn(&MetricsRow) -> String| {
            out.push_str(&format!("{label:<22}"));
            for (_, cell) in &self.cells {
                match cell {
                    Some(row) => out.push_str(&format!("{:>12}", pick(row))),
                    None => out.push_str(&format!("{:>12}", "-")),
                }
            }
            out.push('\n');
        };
        metric(&mut out, "episodes", &|r| r.episodes.to_string());
        metric(&mut out, "ep_len_mean", &|r| {
            format!("{:.2}", r.ep_len_mean)
        });
        metric(&mut out, "ep_len_std", &|r| format!("{:.2}", r.ep_len_std));
        metric(&mut out, "ep_len_max", &|r| format!("{:.1}", r.ep_len_max));
        metric(&mut out, "q90", &|r| format!("{:.1}", r.q90));
        metric(&mut out, "q10", &|r| format!("{:.1}", r.q10));
        metric(&mut out, "success_rate", &|r| {
            format!("{:.2}", r.success_rate)
        });
        metric(&mut out, "lp_solves_per_ep", &|r| {
            format!("{:.2}", r.lp_solves_per_episode)
        });
        metric(&mut out, "wall_s_per_ep", &|r| {
            format!("{:.5}", r.wall_s_per_episode)
        });
        out
    }
}

/// Score the pump and any provided policies on one shared instance set.
/// A `None` policy slot keeps its column with an absent cell.
pub fn compare(
    instances: &[MipInstance],
    cap: usize,
    seed: u64,
    mlp: Option<&mut Policy>,
    cnn: Option<&mut Policy>,
) -> Result<MetricsTable, EvalError> {
    if instances.is_empty() {
        return Err(EvalError::EmptySet);
    }
    let first = &instances[0];
    let fp_row = evaluate_fp(instances, cap, seed)?.row;
    let mut cells = vec![("fp".to_string(), Some(fp_row))];
    for (label, slot) in [("mlp", mlp), ("cnn", cnn)] {
        let cell = match slot {
            Some(policy) => Some(evaluate_policy(policy, instances, cap, seed, false)?.row),
            None => None,
        };
        cells.push((label.to_string(), cell));
    }
    Ok(MetricsTable {
        kind: first.kind,
        n: first.n,
        m: first.m,
        cap,
        seed,
        instance_hash: instance_set_hash(instances),
        cells,
    })
}
