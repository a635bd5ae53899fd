//! Score the classic pump against trained agents on one instance set.
//!
//! The comparison protocol: every solver sees exactly the same instances,
//! one episode per instance under a shared step cap; failed episodes enter
//! the statistics at the cap. The emitted table embeds the SHA-256 of the
//! instance set and the evaluation seed, so the numbers can be regenerated
//! byte for byte by anyone holding the same files.
//!
//! Run with: `cargo run --release --example compare_solvers`

use feaspump::env::{EnvConfig, Variant};
use feaspump::eval::compare;
use feaspump::instance::{generate, Kind};
use feaspump::ppo::{train, TrainConfig};

fn main() {
    let train_pool: Vec<_> = (0..16)
        .map(|i| generate(5000 + i, 5, 6, Kind::Ip).expect("generation succeeds"))
        .collect();
    let shared_eval: Vec<_> = (0..10)
        .map(|i| generate(6000 + i, 5, 6, Kind::Ip).expect("generation succeeds"))
        .collect();

    // A deliberately short training budget: the point here is the
    // head-to-head protocol, not final numbers.
    let cfg = TrainConfig {
        iterations: 4,
        episodes_per_iteration: 12,
        seed: 2,
        ..TrainConfig::default()
    };
    let env_cfg = EnvConfig::default();
    let mut mlp = train(&train_pool, &shared_eval, Variant::MlpObs, &env_cfg, &cfg)
        .expect("training runs")
        .best_policy;

    // Leave the grid agent out to show how absent columns render: a solver
    // without a checkpoint keeps its column with `-` cells.
    let table = compare(&shared_eval, 100, 0, Some(&mut mlp), None).expect("evaluation runs");
    print!("{}", table.render_text());

    // The CSV form carries only deterministic fields, so regenerating it
    // from the same inputs reproduces it exactly.
    let csv_once = table.to_csv();
    let mut mlp_again = mlp;
    let again = compare(&shared_eval, 100, 0, Some(&mut mlp_again), None).expect("evaluation runs");
    assert_eq!(csv_once, again.to_csv());
    println!(
        "\nCSV regeneration is byte-identical ({} bytes)",
        csv_once.len()
    );
}
