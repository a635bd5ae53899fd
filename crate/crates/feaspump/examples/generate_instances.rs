//! Generate random feasibility instances and inspect their structure.
//!
//! Every instance is a system `Ax <= b` over the box `[-20, 20]^n` with an
//! integrality mask. The generator plants a positive integer solution and
//! adds positive slack, so a feasible integral point always exists, and it
//! resamples until at least one entry of `b` is negative, so the origin is
//! never a solution. The planted point is stored as a witness.
//!
//! Run with: `cargo run --example generate_instances`

use feaspump::instance::{generate, Kind};

fn main() {
    for (seed, kind) in [(7, Kind::Ip), (8, Kind::Mip)] {
        let inst = generate(seed, 4, 5, kind).expect("generation succeeds");
        println!("--- seed {seed}, kind {kind} ---");
        println!("rows (A | b):");
        for i in 0..inst.m {
            let row: Vec<String> = (0..inst.n)
                .map(|j| format!("{:>4}", inst.a_at(i, j)))
                .collect();
            println!("  {} | {:>4}", row.join(" "), inst.b[i]);
        }
        println!("integrality mask: {:?}", inst.int_mask);
        println!(
            "objective c: {:?}  (unused by pure feasibility search)",
            inst.c
        );

        let witness = inst
            .witness
            .clone()
            .expect("generator always stores a witness");
        let as_real: Vec<f64> = witness.iter().map(|&v| v as f64).collect();
        let report = inst.check(&as_real).expect("witness has the right length");
        println!("witness {witness:?} feasible: {}", report.feasible);

        // The negative right-hand-side guarantee: rounding the origin is
        // never already a solution.
        let origin = vec![0.0; inst.n];
        let origin_report = inst.check(&origin).expect("origin has the right length");
        println!(
            "origin violates constraints by {:.1} (never feasible by construction)",
            origin_report.constraint_violation
        );

        // Instances round-trip through a line-oriented text format.
        let text = inst.to_text();
        println!("text form is {} lines\n", text.lines().count());
    }
}
