//! Solve a linear program and project a point onto a polyhedron in L1.
//!
//! The dense two-phase simplex solver is the single numerical engine behind
//! everything else: the pump's relaxation and projections, and the
//! environment's observation refresh. This example shows both entry points.
//!
//! Run with: `cargo run --example lp_projection`

use feaspump::instance::{generate, Kind};
use feaspump::lp::{max_row_violation, project_l1, solve_lp, DenseLp, DenseMatrix, LpOutcome};

fn main() {
    // A tiny explicit LP: minimize -x - 2y subject to x + y <= 4,
    // x - y <= 1, inside the box [0, 10]^2. Optimum sits at a vertex.
    let lp = DenseLp::new(
        vec![-1.0, -2.0],
        DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, -1.0]]),
        vec![4.0, 1.0],
        vec![0.0, 0.0],
        vec![10.0, 10.0],
    )
    .expect("consistent dimensions");
    match solve_lp(&lp).expect("solvable") {
        LpOutcome::Optimal {
            point,
            objective_value,
        } => {
            println!("optimum {objective_value} at {point:?}");
        }
        other => println!("unexpected outcome {other:?}"),
    }

    // L1 projection: find the closest feasible point (in the sum of
    // absolute differences) to an arbitrary anchor. The pump calls this
    // every step with the latest rounding as the anchor.
    let inst = generate(3, 3, 4, Kind::Ip).expect("generation succeeds");
    let a = inst.a_f64();
    let b = inst.b_f64();
    let (lower, upper) = (inst.lower_vec(), inst.upper_vec());

    let anchor = vec![14.0, -9.0, 3.0];
    let projected = project_l1(&a, &b, &lower, &upper, &anchor).expect("region is nonempty");
    let distance: f64 = projected
        .iter()
        .zip(&anchor)
        .map(|(p, q)| (p - q).abs())
        .sum();
    println!("anchor    {anchor:?}");
    println!("projected {projected:?}  (L1 distance {distance:.3})");
    println!(
        "max row violation after projection: {:.2e}",
        max_row_violation(&a, &b, &projected)
    );

    // Projection is a fixed point on feasible anchors: asking again from
    // the projected point returns it unchanged.
    let again = project_l1(&a, &b, &lower, &upper, &projected).expect("still nonempty");
    println!("re-projection drift: {:.2e}", {
        projected
            .iter()
            .zip(&again)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0f64, f64::max)
    });
}
