//! Run the classic feasibility pump and watch it alternate.
//!
//! The pump starts from the solution of the continuous relaxation, then
//! bounces between two sets: round the current point to satisfy
//! integrality, project the rounding back onto the polyhedron in L1. When
//! the rounded point stops moving, a random restart perturbs it; restarts
//! are not counted as steps, and a revisit check cuts obvious cycles.
//!
//! Run with: `cargo run --example classic_pump`

use feaspump::fp::{run_fp, run_fp_with_options, FpOptions, Termination, TraceEvent};
use feaspump::instance::{generate, Kind};

fn main() {
    let inst = generate(20, 5, 6, Kind::Ip).expect("generation succeeds");
    let result = run_fp(&inst, 100, 0).expect("pump runs");

    println!(
        "terminated after {} counted steps ({:?}), {} perturbations, {} LP solves",
        result.steps_taken, result.terminated_by, result.perturbation_count, result.lp_solves
    );
    if let Some(solution) = &result.solution {
        println!("solution: {solution:?}");
        let report = inst.check(solution).expect("solution has the right length");
        assert!(report.feasible);
    }

    println!("\nfirst trace records (step / event / rounded point / L1 gap):");
    for record in result.trace.iter().take(8) {
        let tag = match record.event {
            TraceEvent::Init => "init   ",
            TraceEvent::Step => "step   ",
            TraceEvent::Perturb => "perturb",
        };
        println!(
            "  {:>3} {tag} {:?}  gap {:.3}",
            record.step, record.x_rounded, record.l1_distance
        );
    }

    // The revisit check is on by default; disabling it reproduces the
    // bare textbook loop, which may need more perturbations to escape.
    let bare = run_fp_with_options(
        &inst,
        100,
        0,
        FpOptions {
            revisit_detection: false,
        },
    )
    .expect("pump runs");
    println!(
        "\nwithout revisit detection: {} steps, {} perturbations ({})",
        bare.steps_taken,
        bare.perturbation_count,
        match bare.terminated_by {
            Termination::FoundFeasible => "found feasible",
            Termination::StepLimit => "hit the cap",
        }
    );
}
