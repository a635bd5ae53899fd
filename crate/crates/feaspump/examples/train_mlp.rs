//! Train a small flat-observation pump agent end to end.
//!
//! A short PPO run on tiny pools: collect episodes from a training pool,
//! estimate advantages, take clipped-surrogate updates, and score each
//! iteration on a held-out pool. The run is fully deterministic in the
//! config seed. For a production-scale run use the `train` subcommand of
//! the `feaspump` binary, which persists pools, logs, and checkpoints.
//!
//! Run with: `cargo run --release --example train_mlp`

use feaspump::env::{EnvConfig, Variant};
use feaspump::instance::{generate, Kind};
use feaspump::nn::checkpoint;
use feaspump::ppo::{train, TrainConfig};

fn main() {
    let train_pool: Vec<_> = (0..16)
        .map(|i| generate(1000 + i, 5, 6, Kind::Ip).expect("generation succeeds"))
        .collect();
    let eval_pool: Vec<_> = (0..8)
        .map(|i| generate(2000 + i, 5, 6, Kind::Ip).expect("generation succeeds"))
        .collect();

    let cfg = TrainConfig {
        iterations: 5,
        episodes_per_iteration: 16,
        seed: 11,
        ..TrainConfig::default()
    };
    let env_cfg = EnvConfig::default();

    let outcome =
        train(&train_pool, &eval_pool, Variant::MlpObs, &env_cfg, &cfg).expect("training runs");

    println!("iter  ep_len_mean  eval_mean  entropy  clip_frac");
    for r in &outcome.log.records {
        println!(
            "{:>4}  {:>11.2}  {:>9.2}  {:>7.3}  {:>9.3}",
            r.iteration, r.ep_len_mean, r.eval_ep_len_mean, r.entropy, r.clip_fraction
        );
    }
    println!(
        "\nbest held-out mean {:.2} at iteration {}",
        outcome.best_eval_ep_len, outcome.best_iteration
    );

    // Checkpoints serialize every parameter as exact bit patterns, so a
    // save/load round trip reproduces the network byte for byte.
    let text = checkpoint::to_string(&outcome.best_policy, &outcome.best_critic);
    let (restored_policy, _critic) = checkpoint::from_str(&text).expect("checkpoint parses");
    let again = checkpoint::to_string(&restored_policy, &_critic);
    assert_eq!(text, again);
    println!("checkpoint round trip: {} bytes, bit-exact", text.len());
}
