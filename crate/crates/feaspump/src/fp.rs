//! The classic feasibility pump: alternate L1 projection onto the relaxed
//! region with rounding of the integer-masked coordinates, perturbing the
//! rounded point whenever the alternation stalls.
//!
//! A counted step is one projection-plus-rounding that produced a new rounded
//! point. Perturbations resolve stalls without consuming a step; a hard cap
//! of `10 x max_steps` total loop iterations guarantees termination even on
//! regions with no integral point.

use std::collections::HashSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{round_partial, InstanceError, MipInstance};
use crate::lp::{project_l1, solve_lp, DenseLp, LpError, LpOutcome};

#[derive(Debug, Error)]
pub enum FpError {
    #[error("lp: {0}")]
    Lp(#[from] LpError),
    #[error("instance: {0}")]
    Instance(#[from] InstanceError),
    #[error("the continuous relaxation is empty; instance contract violated")]
    RelaxationInfeasible,
}

/// Why a pump run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    FoundFeasible,
    StepLimit,
}

/// What happened at a trace record: the initial relaxation, a counted
/// projection step, or an uncounted perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEvent {
    Init,
    Step,
    Perturb,
}

/// One pump iteration: the relaxation-side point, its rounding, and the L1
/// distance between the two (zero exactly when the pair has converged).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub event: TraceEvent,
    pub x: Vec<f64>,
    pub x_rounded: Vec<f64>,
    pub l1_distance: f64,
}

/// Result of a pump run.
#[derive(Debug, Clone, PartialEq)]
pub struct FpResult {
    /// Counted steps, at least 1 (a feasible initial rounding counts as one),
    /// at most `max_steps`; failures report exactly `max_steps`.
    pub steps_taken: usize,
    pub solution: Option<Vec<f64>>,
    pub trace: Vec<TraceRecord>,
    pub perturbation_count: usize,
    pub terminated_by: Termination,
    /// LP solves performed: one relaxation solve plus one per projection.
    pub lp_solves: usize,
}

/// Knobs beyond the step cap; the defaults match the documented behavior.
#[derive(Debug, Clone, Copy)]
pub struct FpOptions {
    /// Perturb on any revisit of a previously seen rounded point, not just an
    /// immediate repeat.
    pub revisit_detection: bool,
}

impl Default for FpOptions {
    fn default() -> Self {
        Self {
            revisit_detection: true,
        }
    }
}

/// Run the pump with default options. Deterministic given `(inst, seed)`.
pub fn run_fp(inst: &MipInstance, max_steps: usize, rng_seed: u64) -> Result<FpResult, FpError> {
    run_fp_with_options(inst, max_steps, rng_seed, FpOptions::default())
}

pub fn run_fp_with_options(
    inst: &MipInstance,
    max_steps: usize,
    rng_seed: u64,
    options: FpOptions,
) -> Result<FpResult, FpError> {
    assert!(max_steps >= 1, "max_steps must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let a = inst.a_f64();
    let b = inst.b_f64();
    let lb = inst.lower_vec();
    let ub = inst.upper_vec();

    let relax = DenseLp::new(inst.c_f64(), a.clone(), b.clone(), lb.clone(), ub.clone())?;
    let mut lp_solves = 1usize;
    let x0 = match solve_lp(&relax)? {
        LpOutcome::Optimal { point, .. } => point,
        LpOutcome::Infeasible | LpOutcome::Unbounded => return Err(FpError::RelaxationInfeasible),
    };

    let mut x = x0;
    let mut xbar = round_partial(&x, &inst.int_mask);
    let mut trace = vec![TraceRecord {
        step: 0,
        event: TraceEvent::Init,
        x: x.clone(),
        x_rounded: xbar.clone(),
        l1_distance: l1(&x, &xbar),
    }];
    let mut visited: HashSet<Vec<u64>> = HashSet::new();
    visited.insert(key(&xbar));
    let mut steps = 0usize;
    let mut perturbation_count = 0usize;

    if inst.check(&xbar)?.feasible {
        return Ok(FpResult {
            steps_taken: 1,
            solution: Some(xbar),
            trace,
            perturbation_count,
            terminated_by: Termination::FoundFeasible,
            lp_solves,
        });
    }

    let hard_cap = 10 * max_steps;
    for _ in 0..hard_cap {
        if steps >= max_steps {
            break;
        }
        x = project_l1(&a, &b, &lb, &ub, &xbar)?;
        lp_solves += 1;
        let candidate = round_partial(&x, &inst.int_mask);

        let stalled =
            candidate == xbar || (options.revisit_detection && visited.contains(&key(&candidate)));
        if stalled {
            xbar = perturb(&candidate, inst, &mut rng);
            perturbation_count += 1;
            visited.insert(key(&xbar));
            trace.push(TraceRecord {
                step: steps,
                event: TraceEvent::Perturb,
                x: x.clone(),
                x_rounded: xbar.clone(),
                l1_distance: l1(&x, &xbar),
            });
        } else {
            xbar = candidate;
            steps += 1;
            visited.insert(key(&xbar));
            trace.push(TraceRecord {
                step: steps,
                event: TraceEvent::Step,
                x: x.clone(),
                x_rounded: xbar.clone(),
                l1_distance: l1(&x, &xbar),
            });
        }

        if inst.check(&xbar)?.feasible {
            return Ok(FpResult {
                steps_taken: steps.max(1),
                solution: Some(xbar),
                trace,
                perturbation_count,
                terminated_by: Termination::FoundFeasible,
                lp_solves,
            });
        }
    }

    Ok(FpResult {
        steps_taken: max_steps,
        solution: None,
        trace,
        perturbation_count,
        terminated_by: Termination::StepLimit,
        lp_solves,
    })
}

/// Serialize a trace as one JSON record per line.
pub fn trace_to_jsonl(trace: &[TraceRecord]) -> String {
    let mut out = String::new();
    for rec in trace {
        out.push_str(&serde_json::to_string(rec).expect("trace serialization"));
        out.push('\n');
    }
    out
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn key(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// Flip each masked coordinate by +-1 with probability 1/2, clamped to the
/// box; redrawn until the clamped result differs from the input somewhere.
fn perturb(point: &[f64], inst: &MipInstance, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let lb = inst.lower_bound as f64;
    let ub = inst.upper_bound as f64;
    loop {
        let mut out = point.to_vec();
        let mut changed = false;
        for (j, v) in out.iter_mut().enumerate() {
            if inst.int_mask[j] && rng.gen_bool(0.5) {
                let delta = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let moved = (*v + delta).clamp(lb, ub);
                if moved != *v {
                    *v = moved;
                    changed = true;
                }
            }
        }
        if changed {
            return out;
        }
    }
}
