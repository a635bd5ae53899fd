//! The decision process wrapped around an instance: an agent moves an
//! integral point by bounded real actions, observing the constraint data and
//! a projection of the current (or initial) point, until the point is
//! feasible or the step budget runs out.
//!
//! Two observation encodings exist. The flat-vector encoding refreshes the
//! projection after every move; the grid encoding computes it once at reset
//! and keeps it frozen, trading per-step LP solves for a richer view of the
//! constraint matrix. The projection-solve counter makes that trade
//! observable and testable.

use thiserror::Error;

use crate::instance::{round_partial, FeasibilityReport, InstanceError, MipInstance};
use crate::lp::{project_l1, solve_lp, DenseLp, DenseMatrix, LpError, LpOutcome};

/// Version of the observation layouts below. Checkpoints record it; bump on
/// any change to offsets or field order.
pub const OBS_LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("lp: {0}")]
    Lp(#[from] LpError),
    #[error("instance: {0}")]
    Instance(#[from] InstanceError),
    #[error("the continuous relaxation is empty; instance contract violated")]
    RelaxationInfeasible,
    #[error("step called on a finished episode")]
    StepAfterDone,
    #[error("action has length {got}, expected {expected}")]
    ActionLength { expected: usize, got: usize },
    #[error("bad environment config: {0}")]
    BadConfig(String),
}

/// Which observation encoding the environment produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Variant {
    /// Flat vector `[A | b | x_t | x_proj | mask]`, projection refreshed each step.
    #[serde(rename = "mlp")]
    MlpObs,
    /// Grid `[A | b]` plus `[x_t | x_proj_0]` and the mask, projection frozen at reset.
    #[serde(rename = "cnn")]
    CnnObs,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::MlpObs => "mlp",
            Variant::CnnObs => "cnn",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mlp" => Ok(Variant::MlpObs),
            "cnn" => Ok(Variant::CnnObs),
            other => Err(format!(
                "unknown variant `{other}` (expected `mlp` or `cnn`)"
            )),
        }
    }
}

/// How constraint violation turns into (negative) reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardNorm {
    /// `-sum_i max(0, (Ax - b)_i)` — zero exactly on constraint feasibility.
    PositivePartL1,
    /// `-sqrt(sum_i max(0, (Ax - b)_i)^2)`.
    PositivePartL2,
    /// `-||Ax - b||_2`, which penalizes slack rows too; zero only when every
    /// row is tight.
    PlainL2,
}

/// Environment parameters shared by every episode.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub max_steps: usize,
    pub variant: Variant,
    pub reward_norm: RewardNorm,
    /// Per-coordinate clamp applied to raw actions before the move.
    pub action_clip: f64,
    /// Keep the reset-time projection for the whole episode even in the
    /// flat-vector variant (normally implied by the grid variant alone).
    pub freeze_projection: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            max_steps: 100,
            variant: Variant::MlpObs,
            reward_norm: RewardNorm::PositivePartL1,
            action_clip: 10.0,
            freeze_projection: false,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_steps == 0 {
            return Err("max_steps must be at least 1".into());
        }
        if !(self.action_clip > 0.0) {
            return Err("action_clip must be positive".into());
        }
        Ok(())
    }

    /// Whether episodes re-project after every move.
    fn per_step_projection(&self) -> bool {
        self.variant == Variant::MlpObs && !self.freeze_projection
    }
}

/// One observation, in the encoding the config selected.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    /// Layout `[A row-major (m*n) | b (m) | x_t (n) | x_proj (n) | mask (n)]`.
    MlpVec { flat: Vec<f64> },
    /// `matrix` is the `m x (n+1)` grid `[A | b]`; `sols` is `[x_t | x_proj_0]`
    /// (length `2n`); `mask` is the integrality mask as 0/1 reals (length `n`).
    CnnObs {
        matrix: DenseMatrix,
        sols: Vec<f64>,
        mask: Vec<f64>,
    },
}

impl Observation {
    /// Flat length of the vector encoding for a given instance shape.
    pub fn mlp_len(n: usize, m: usize) -> usize {
        m * n + m + 3 * n
    }
}

/// A live episode.
#[derive(Debug, Clone)]
pub struct EnvState {
    pub inst: MipInstance,
    pub config: EnvConfig,
    /// Current integral-on-mask point.
    pub x: Vec<f64>,
    /// Latest projection (refreshed per step or frozen at reset).
    pub x_proj: Vec<f64>,
    /// Completed steps.
    pub t: usize,
    pub done: bool,
    /// Projection LP solves performed since reset (excludes the relaxation
    /// solve that seeds the start point).
    pub projection_solves: usize,
    a: DenseMatrix,
    b: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
}

/// What a step returns.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub obs: Observation,
    pub reward: f64,
    pub done: bool,
    pub info: FeasibilityReport,
}

/// Start an episode: the point begins at the rounded optimum of the
/// continuous relaxation, and the first projection is computed (one LP
/// solve in every variant). An already-feasible start is `done` immediately.
pub fn reset(inst: &MipInstance, config: EnvConfig) -> Result<(EnvState, Observation), EnvError> {
    config.validate().map_err(EnvError::BadConfig)?;
    let a = inst.a_f64();
    let b = inst.b_f64();
    let lb = inst.lower_vec();
    let ub = inst.upper_vec();

    let relax = DenseLp::new(inst.c_f64(), a.clone(), b.clone(), lb.clone(), ub.clone())?;
    let x_relax = match solve_lp(&relax)? {
        LpOutcome::Optimal { point, .. } => point,
        _ => return Err(EnvError::RelaxationInfeasible),
    };
    let x = round_partial(&x_relax, &inst.int_mask);
    let x_proj = project_l1(&a, &b, &lb, &ub, &x)?;
    let report = inst.check(&x)?;

    let state = EnvState {
        inst: inst.clone(),
        config,
        x,
        x_proj,
        t: 0,
        done: report.feasible,
        projection_solves: 1,
        a,
        b,
        lb,
        ub,
    };
    let obs = state.observe();
    Ok((state, obs))
}

impl EnvState {
    /// Encode the current state in the configured layout.
    pub fn observe(&self) -> Observation {
        let inst = &self.inst;
        match self.config.variant {
            Variant::MlpObs => {
                let mut flat = Vec::with_capacity(Observation::mlp_len(inst.n, inst.m));
                flat.extend(self.a.data());
                flat.extend(&self.b);
                flat.extend(&self.x);
                flat.extend(&self.x_proj);
                flat.extend(inst.int_mask.iter().map(|&f| if f { 1.0 } else { 0.0 }));
                Observation::MlpVec { flat }
            }
            Variant::CnnObs => {
                let mut grid = DenseMatrix::zeros(inst.m, inst.n + 1);
                for i in 0..inst.m {
                    for j in 0..inst.n {
                        grid.set(i, j, self.a.at(i, j));
                    }
                    grid.set(i, inst.n, self.b[i]);
                }
                let mut sols = self.x.clone();
                sols.extend(&self.x_proj);
                Observation::CnnObs {
                    matrix: grid,
                    sols,
                    mask: inst
                        .int_mask
                        .iter()
                        .map(|&f| if f { 1.0 } else { 0.0 })
                        .collect(),
                }
            }
        }
    }

    /// Apply an action: clamp it per coordinate, move, clamp to the box,
    /// round the masked coordinates, then score the new point.
    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::StepAfterDone);
        }
        let n = self.inst.n;
        if action.len() != n {
            return Err(EnvError::ActionLength {
                expected: n,
                got: action.len(),
            });
        }

        let clip = self.config.action_clip;
        let moved: Vec<f64> = (0..n)
            .map(|j| {
                let a = action[j].clamp(-clip, clip);
                (self.x[j] + a).clamp(self.lb[j], self.ub[j])
            })
            .collect();
        self.x = round_partial(&moved, &self.inst.int_mask);
        self.t += 1;

        if self.config.per_step_projection() {
            self.x_proj = project_l1(&self.a, &self.b, &self.lb, &self.ub, &self.x)?;
            self.projection_solves += 1;
        }

        let report = self.inst.check(&self.x)?;
        let reward = -violation(&self.config.reward_norm, &self.a, &self.b, &self.x);
        self.done = report.feasible || self.t >= self.config.max_steps;

        Ok(StepOutcome {
            obs: self.observe(),
            reward,
            done: self.done,
            info: report,
        })
    }

    /// Episode length under the benchmark convention: completed steps, with
    /// a feasible-at-reset episode counting as 1.
    pub fn episode_len(&self) -> usize {
        self.t.max(1)
    }
}

pub(crate) fn violation(norm: &RewardNorm, a: &DenseMatrix, b: &[f64], x: &[f64]) -> f64 {
    match norm {
        RewardNorm::PositivePartL1 => (0..a.rows())
            .map(|i| {
                let lhs: f64 = a.row(i).iter().zip(x).map(|(v, xi)| v * xi).sum();
                (lhs - b[i]).max(0.0)
            })
            .sum(),
        RewardNorm::PositivePartL2 => (0..a.rows())
            .map(|i| {
                let lhs: f64 = a.row(i).iter().zip(x).map(|(v, xi)| v * xi).sum();
                (lhs - b[i]).max(0.0).powi(2)
            })
            .sum::<f64>()
            .sqrt(),
        RewardNorm::PlainL2 => (0..a.rows())
            .map(|i| {
                let lhs: f64 = a.row(i).iter().zip(x).map(|(v, xi)| v * xi).sum();
                (lhs - b[i]).powi(2)
            })
            .sum::<f64>()
            .sqrt(),
    }
}
