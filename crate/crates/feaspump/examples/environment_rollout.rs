//! Step the pump environment by hand, in both observation variants.
//!
//! The environment wraps one instance as an episodic task: the state is the
//! current integral point, an action is a bounded real move per variable,
//! and the reward is the negated constraint violation. The flat variant
//! re-projects after every move; the grid variant keeps the reset-time
//! projection, so a whole episode costs exactly one LP solve.
//!
//! Run with: `cargo run --example environment_rollout`

use feaspump::env::{reset, EnvConfig, Observation, Variant};
use feaspump::instance::{generate, Kind};

fn main() {
    // Roughly half of all instances are solved by the reset point alone
    // (the rounded relaxation optimum); scan for one that actually needs
    // work so the loop below has something to show.
    let inst = (0..100)
        .map(|seed| generate(seed, 4, 5, Kind::Ip).expect("generation succeeds"))
        .find(|inst| {
            let (state, _) = reset(inst, EnvConfig::default()).expect("reset succeeds");
            !state.done
        })
        .expect("an unsolved start exists among 100 seeds");

    for variant in [Variant::MlpObs, Variant::CnnObs] {
        println!("--- {variant} variant ---");
        let config = EnvConfig {
            variant,
            max_steps: 12,
            ..EnvConfig::default()
        };
        let (mut state, obs) = reset(&inst, config).expect("reset succeeds");
        match &obs {
            Observation::MlpVec { flat } => {
                println!("observation: flat vector of length {}", flat.len());
            }
            Observation::CnnObs { matrix, sols, mask } => {
                println!(
                    "observation: {}x{} grid + {} solution entries + {} mask entries",
                    matrix.rows(),
                    matrix.cols(),
                    sols.len(),
                    mask.len()
                );
            }
        }
        println!("start point {:?}", state.x);

        // A scripted policy standing in for a trained one: walk toward the
        // generator's stored witness. Actions are clamped to ±10 per
        // coordinate by the environment, so far-away targets take several
        // steps; the episode ends the moment the point becomes feasible.
        let target = inst
            .witness
            .clone()
            .expect("generated instances carry a witness");
        let mut reward_sum = 0.0;
        while !state.done {
            let action: Vec<f64> = target
                .iter()
                .zip(&state.x)
                .map(|(goal, here)| *goal as f64 - here)
                .collect();
            let outcome = state.step(&action).expect("step succeeds");
            reward_sum += outcome.reward;
            if outcome.done {
                break;
            }
        }
        println!(
            "episode length {} (feasible: {}), total reward {:.2}, LP solves {}",
            state.episode_len(),
            state
                .inst
                .check(&state.x)
                .map(|r| r.feasible)
                .unwrap_or(false),
            reward_sum,
            state.projection_solves
        );
        println!("final point {:?}\n", state.x);
    }
}
