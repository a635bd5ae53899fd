//! Feasibility search for bounded mixed-integer programs.
//!
//! The crate provides two routes to a feasible point of
//! `{ x : Ax <= b, lb <= x <= ub, x_i integral for i in the mask }`:
//!
//! * [`fp`] — the classic feasibility pump: alternate L1 projection onto the
//!   continuous relaxation with rounding of the integer coordinates, plus a
//!   random perturbation when the iterates cycle.
//! * [`ppo`] + [`env`] + [`nn`] — a pump-style Markov decision process and a
//!   PPO-trained Gaussian policy (MLP or CNN observation encoding) that moves
//!   the incumbent point directly.
//!
//! Supporting modules: [`lp`] (dense two-phase simplex and L1 projection),
//! [`instance`] (problem data model, random generator, file format),
//! [`eval`] (episode-length metrics and solver comparison tables),
//! [`oracle`] (independent reference implementations used by `selftest` and
//! the test suites), and [`cli`] (the `feaspump` binary's subcommands).
//!
//! Start with the `examples/` directory: each major capability has a runnable
//! example (`cargo run --example classic_pump`, `--example train_mlp`, ...).

pub mod cli;
pub mod config;
pub mod env;
pub mod eval;
pub mod fp;
pub mod instance;
pub mod lp;
pub mod nn;
pub mod oracle;
pub mod ppo;

/// Row violation tolerance: a point satisfies a row when `row . x - rhs <= FEAS_TOL`.
pub const FEAS_TOL: f64 = 1e-7;
/// Optimality tolerance for the simplex objective.
pub const OPT_TOL: f64 = 1e-6;
/// Integrality tolerance: a masked coordinate counts as integral within this.
pub const INT_TOL: f64 = 1e-6;

/// Derive an independent stream seed from a master seed, a purpose tag, and
/// an index (SplitMix64 finalizer). Work keyed this way — one stream per
/// episode — is a pure function of `(master, tag, index)`, so results do not
/// depend on scheduling or worker count.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
