//! Train the grid-observation agent and verify its one-LP-per-episode cost.
//!
//! The grid variant reads the instance as an `m x (n+1)` image `[A | b]`
//! through two 3x3 convolutions, with the current point, the reset-time
//! projection, and the integrality mask entering through a dense side path.
//! Because that projection is frozen for the whole episode, every episode
//! costs exactly one LP solve — the property this example checks on real
//! rollouts before and after training.
//!
//! Run with: `cargo run --release --example train_cnn`

use feaspump::env::{EnvConfig, Variant};
use feaspump::instance::{generate, Kind};
use feaspump::ppo::{run_episode, train, TrainConfig};

fn main() {
    let train_pool: Vec<_> = (0..12)
        .map(|i| generate(3000 + i, 5, 6, Kind::Ip).expect("generation succeeds"))
        .collect();
    let eval_pool: Vec<_> = (0..6)
        .map(|i| generate(4000 + i, 5, 6, Kind::Ip).expect("generation succeeds"))
        .collect();

    let cfg = TrainConfig {
        iterations: 3,
        episodes_per_iteration: 12,
        seed: 5,
        ..TrainConfig::default()
    };
    let env_cfg = EnvConfig::default();

    let outcome =
        train(&train_pool, &eval_pool, Variant::CnnObs, &env_cfg, &cfg).expect("training runs");
    for r in &outcome.log.records {
        println!(
            "iter {}  ep_len_mean {:>6.2}  eval {:>6.2}  surrogate {:>8.4}",
            r.iteration, r.ep_len_mean, r.eval_ep_len_mean, r.surrogate_loss
        );
    }

    // The frozen-projection invariant, checked on fresh episodes with the
    // trained policy: one LP solve per episode, no matter the length.
    let mut policy = outcome.best_policy;
    let probe_cfg = EnvConfig {
        variant: Variant::CnnObs,
        ..EnvConfig::default()
    };
    println!("\nepisode probes (length / LP solves):");
    for (i, inst) in eval_pool.iter().enumerate() {
        let ep = run_episode(&mut policy, inst, &probe_cfg, 900 + i as u64, false)
            .expect("episode runs");
        println!(
            "  instance {i}: {:>3} steps, {} LP solve(s)",
            ep.length, ep.lp_solves
        );
        assert_eq!(
            ep.lp_solves, 1,
            "grid episodes must cost exactly one projection"
        );
    }
    println!("every episode used exactly one LP solve");
}
