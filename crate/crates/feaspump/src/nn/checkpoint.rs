//! Bit-exact checkpoints for a policy/value pair.
//!
//! Parameters are stored as IEEE-754 bit patterns (`u64`), not decimal
//! text, so a save/load round trip reproduces the networks exactly and a
//! re-saved checkpoint is byte-identical. Each file also records the
//! instance geometry `(n, m)`, the network variant, and the observation
//! layout version it was trained against; loading rejects any mismatch
//! with a diagnostic instead of silently misreading weights.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Variant, OBS_LAYOUT_VERSION};

use super::{Critic, NnError, ParamVisitor, Policy};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    obs_layout_version: u32,
    n: usize,
    m: usize,
    variant: String,
    /// Policy parameters in visitor order, each an `f64` bit pattern.
    policy_bits: Vec<u64>,
    /// Value-network parameters in visitor order.
    critic_bits: Vec<u64>,
}

fn collect_bits(net: &mut dyn ParamVisitor) -> Vec<u64> {
    let mut bits = Vec::new();
    net.for_each_param_grad(&mut |p, _| bits.push(p.to_bits()));
    bits
}

fn restore_bits(net: &mut dyn ParamVisitor, bits: &[u64], what: &str) -> Result<(), NnError> {
    let expect = net.param_count();
    if bits.len() != expect {
        return Err(NnError::BindingMismatch(format!(
            "{what} holds {} parameters, architecture expects {expect}",
            bits.len()
        )));
    }
    let mut it = bits.iter();
    net.for_each_param_grad(&mut |p, _| *p = f64::from_bits(*it.next().unwrap()));
    Ok(())
}

/// Serialize a policy/value pair to the checkpoint text format.
pub fn to_string(policy: &Policy, critic: &Critic) -> String {
    let mut p = policy.clone();
    let mut c = critic.clone();
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        obs_layout_version: OBS_LAYOUT_VERSION,
        n: policy.n(),
        m: policy.m(),
        variant: policy.variant().to_string(),
        policy_bits: collect_bits(&mut p),
        critic_bits: collect_bits(&mut c),
    };
    let mut out = serde_json::to_string(&file).expect("checkpoint serialization");
    out.push('\n');
    out
}

pub fn save(policy: &Policy, critic: &Critic, path: &Path) -> Result<(), NnError> {
    std::fs::write(path, to_string(policy, critic))?;
    Ok(())
}

/// Rebuild the pair from checkpoint text, verifying every binding field.
pub fn from_str(text: &str) -> Result<(Policy, Critic), NnError> {
    let file: CheckpointFile =
        serde_json::from_str(text).map_err(|e| NnError::CheckpointParse(e.to_string()))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(NnError::BindingMismatch(format!(
            "checkpoint format version {} (supported: {CHECKPOINT_VERSION})",
            file.version
        )));
    }
    if file.obs_layout_version != OBS_LAYOUT_VERSION {
        return Err(NnError::BindingMismatch(format!(
            "observation layout version {} (current: {OBS_LAYOUT_VERSION})",
            file.obs_layout_version
        )));
    }
    let variant: Variant = file
        .variant
        .parse()
        .map_err(|_| NnError::BindingMismatch(format!("unknown variant {:?}", file.variant)))?;
    if file.n == 0 || file.m == 0 {
        return Err(NnError::BindingMismatch(format!(
            "degenerate geometry ({}, {})",
            file.n, file.m
        )));
    }
    // Weights are overwritten below, so the construction seed is irrelevant.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut policy = Policy::new(variant, file.n, file.m, &mut rng);
    let mut critic = Critic::new(variant, file.n, file.m, &mut rng);
    restore_bits(&mut policy, &file.policy_bits, "policy blob")?;
    restore_bits(&mut critic, &file.critic_bits, "value blob")?;
    Ok((policy, critic))
}

pub fn load(path: &Path) -> Result<(Policy, Critic), NnError> {
    let text = std::fs::read_to_string(path)?;
    from_str(&text)
}
