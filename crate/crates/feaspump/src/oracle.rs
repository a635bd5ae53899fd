//! Independent reference implementations used to cross-check the fast paths,
//! plus the self-check suites behind the CLI's `selftest` subcommand.
//!
//! Everything here is deliberately naive: vertices by enumerating active-set
//! subsets, feasibility by explicit per-row loops, gradients by central
//! differences, advantage estimates by direct double summation, integer
//! feasibility by depth-first search. None of it shares code with the
//! production implementations it checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::instance::{generate, Kind, MipInstance};
use crate::lp::{max_row_violation, project_l1, solve_lp, DenseLp, DenseMatrix, LpOutcome};
use crate::FEAS_TOL;

/// Cap on stored per-case diagnostics; failures beyond it are only counted.
const MAX_DIAGNOSTICS: usize = 16;

/// Outcome of one self-check suite: how many cases ran, which failed, and
/// any informational notes (for conditions that are legal but worth logging).
#[derive(Debug)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
    pub notes: Vec<String>,
}

impl SuiteOutcome {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            cases: 0,
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn fail(&mut self, msg: String) {
        if self.failures.len() < MAX_DIAGNOSTICS {
            self.failures.push(msg);
        } else if self.failures.len() == MAX_DIAGNOSTICS {
            self.failures.push("... further failures omitted".into());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// One-line human rendering: `name: pass (N cases)` or the failure count.
    pub fn render(&self) -> String {
        let mut line = if self.passed() {
            format!("{}: pass ({} cases)", self.name, self.cases)
        } else {
            format!(
                "{}: FAIL ({} of {} cases)",
                self.name,
                self.failures.len(),
                self.cases
            )
        };
        for note in &self.notes {
            line.push_str(&format!("\n  note: {note}"));
        }
        for failure in &self.failures {
            line.push_str(&format!("\n  fail: {failure}"));
        }
        line
    }
}

/// Solve `a x = rhs` for a square system by Gaussian elimination with partial
/// pivoting; `None` when numerically singular.
pub fn solve_linear_system(a: &DenseMatrix, rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    assert_eq!(a.rows(), n);
    assert_eq!(a.cols(), n);
    let mut m: Vec<f64> = a.data().to_vec();
    let mut b = rhs.to_vec();
    for col in 0..n {
        let pivot_row = (col..n).max_by(|&r, &s| {
            m[r * n + col]
                .abs()
                .partial_cmp(&m[s * n + col].abs())
                .unwrap()
        })?;
        if m[pivot_row * n + col].abs() < 1e-9 {
            return None;
        }
        if pivot_row != col {
            for j in 0..n {
                m.swap(col * n + j, pivot_row * n + j);
            }
            b.swap(col, pivot_row);
        }
        let piv = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / piv;
            if f != 0.0 {
                for j in col..n {
                    m[r * n + j] -= f * m[col * n + j];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for j in row + 1..n {
            acc -= m[row * n + j] * x[j];
        }
        x[row] = acc / m[row * n + row];
    }
    Some(x)
}

/// All vertices of `{ x : rows x <= rhs, lb <= x <= ub }`, found by solving
/// every n-subset of the combined constraint set (rows plus both bound walls)
/// as an equality system and keeping the solutions that satisfy everything.
pub fn enumerate_vertices(
    rows: &DenseMatrix,
    rhs: &[f64],
    lb: &[f64],
    ub: &[f64],
) -> Vec<Vec<f64>> {
    let n = lb.len();
    let m = rows.rows();
    // Combined list: the m rows, then x_j <= ub_j, then -x_j <= -lb_j.
    let total = m + 2 * n;
    let coeff = |c: usize, j: usize| -> f64 {
        if c < m {
            rows.at(c, j)
        } else if c < m + n {
            if j == c - m {
                1.0
            } else {
                0.0
            }
        } else if j == c - m - n {
            -1.0
        } else {
            0.0
        }
    };
    let bound = |c: usize| -> f64 {
        if c < m {
            rhs[c]
        } else if c < m + n {
            ub[c - m]
        } else {
            -lb[c - m - n]
        }
    };

    let mut vertices = Vec::new();
    let mut subset: Vec<usize> = (0..n).collect();
    if total < n {
        return vertices;
    }
    loop {
        let mut sys = DenseMatrix::zeros(n, n);
        let mut sys_rhs = vec![0.0; n];
        for (r, &c) in subset.iter().enumerate() {
            for j in 0..n {
                sys.set(r, j, coeff(c, j));
            }
            sys_rhs[r] = bound(c);
        }
        if let Some(x) = solve_linear_system(&sys, &sys_rhs) {
            let feasible = (0..total).all(|c| {
                let lhs: f64 = (0..n).map(|j| coeff(c, j) * x[j]).sum();
                lhs <= bound(c) + FEAS_TOL
            });
            if feasible {
                vertices.push(x);
            }
        }
        // Advance the k-subset odometer.
        let mut i = n;
        loop {
            if i == 0 {
                return vertices;
            }
            i -= 1;
            if subset[i] < total - (n - i) {
                subset[i] += 1;
                for k in i + 1..n {
                    subset[k] = subset[k - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Minimum objective over the vertices of the LP's feasible region, or `None`
/// when no feasible vertex exists (the region is empty — a bounded nonempty
/// polyhedron always has a vertex).
pub fn lp_min_by_vertex_enumeration(lp: &DenseLp) -> Option<f64> {
    let vertices = enumerate_vertices(&lp.row_matrix, &lp.rhs, &lp.lower_bounds, &lp.upper_bounds);
    vertices
        .iter()
        .map(|v| lp.objective.iter().zip(v).map(|(c, x)| c * x).sum::<f64>())
        .min_by(|a, b| a.partial_cmp(b).unwrap())
}

/// Minimal L1 distance from `anchor` to the region, via vertex enumeration of
/// the same lifted `[x | t]` polytope the production projection solves over
/// (rebuilt here from scratch).
pub fn l1_min_by_vertex_enumeration(
    rows: &DenseMatrix,
    rhs: &[f64],
    lb: &[f64],
    ub: &[f64],
    anchor: &[f64],
) -> Option<f64> {
    let n = anchor.len();
    let m = rows.rows();
    let mut big = DenseMatrix::zeros(m + 2 * n, 2 * n);
    let mut big_rhs = vec![0.0; m + 2 * n];
    for i in 0..m {
        for j in 0..n {
            big.set(i, j, rows.at(i, j));
        }
        big_rhs[i] = rhs[i];
    }
    for j in 0..n {
        big.set(m + 2 * j, j, 1.0);
        big.set(m + 2 * j, n + j, -1.0);
        big_rhs[m + 2 * j] = anchor[j];
        big.set(m + 2 * j + 1, j, -1.0);
        big.set(m + 2 * j + 1, n + j, -1.0);
        big_rhs[m + 2 * j + 1] = -anchor[j];
    }
    let mut big_lb = lb.to_vec();
    let mut big_ub = ub.to_vec();
    for j in 0..n {
        let reach = (ub[j] - anchor[j]).abs().max((anchor[j] - lb[j]).abs());
        big_lb.push(0.0);
        big_ub.push(reach + 1.0);
    }
    let vertices = enumerate_vertices(&big, &big_rhs, &big_lb, &big_ub);
    vertices
        .iter()
        .map(|v| v[n..].iter().sum::<f64>())
        .min_by(|a, b| a.partial_cmp(b).unwrap())
}

/// Per-row feasibility measurement written as plain loops over instance data,
/// shared with nothing: `(sum of positive row excesses, max distance of a
/// masked coordinate to its nearest integer)`.
pub fn naive_violations(inst: &MipInstance, x: &[f64]) -> (f64, f64) {
    let mut constraint = 0.0;
    for i in 0..inst.m {
        let mut lhs = 0.0;
        for j in 0..inst.n {
            lhs += inst.a_at(i, j) as f64 * x[j];
        }
        let excess = lhs - inst.b[i] as f64;
        if excess > 0.0 {
            constraint += excess;
        }
    }
    let mut integrality = 0.0f64;
    for j in 0..inst.n {
        if inst.int_mask[j] {
            let d = (x[j] - x[j].round()).abs();
            if d > integrality {
                integrality = d;
            }
        }
    }
    (constraint, integrality)
}

/// `sum_i max(0, (A x - b)_i)` by direct loops.
pub fn naive_positive_part_l1(a: &DenseMatrix, b: &[f64], x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.rows() {
        let mut lhs = 0.0;
        for j in 0..a.cols() {
            lhs += a.at(i, j) * x[j];
        }
        if lhs - b[i] > 0.0 {
            acc += lhs - b[i];
        }
    }
    acc
}

/// Advantage estimates for one episode by direct double summation
/// `A_t = sum_l (gamma lambda)^l delta_{t+l}` with a terminal last step.
pub fn naive_gae_episode(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Vec<f64> {
    let t_max = rewards.len();
    assert_eq!(values.len(), t_max);
    let delta: Vec<f64> = (0..t_max)
        .map(|t| {
            let next_v = if t + 1 < t_max { values[t + 1] } else { 0.0 };
            rewards[t] + gamma * next_v - values[t]
        })
        .collect();
    (0..t_max)
        .map(|t| {
            let mut acc = 0.0;
            let mut w = 1.0;
            for l in t..t_max {
                acc += w * delta[l];
                w *= gamma * lambda;
            }
            acc
        })
        .collect()
}

/// Quantile by explicit order statistics: insertion-sort a copy, then
/// interpolate linearly at fractional rank `p * (len - 1)`.
pub fn naive_quantile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    // Insertion sort, to stay independent of the library sort used elsewhere.
    for i in 1..sorted.len() {
        let mut j = i;
        while j > 0 && sorted[j - 1] > sorted[j] {
            sorted.swap(j - 1, j);
            j -= 1;
        }
    }
    let rank = p * (sorted.len() as f64 - 1.0);
    let below = rank.floor();
    let above = rank.ceil();
    if below == above {
        sorted[below as usize]
    } else {
        let w = rank - below;
        (1.0 - w) * sorted[below as usize] + w * sorted[above as usize]
    }
}

/// Central-difference gradient of a scalar function of a parameter vector.
pub fn finite_difference_grad<F>(mut f: F, params: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut grad = Vec::with_capacity(params.len());
    let mut work = params.to_vec();
    for i in 0..params.len() {
        let orig = work[i];
        work[i] = orig + h;
        let up = f(&work);
        work[i] = orig - h;
        let down = f(&work);
        work[i] = orig;
        grad.push((up - down) / (2.0 * h));
    }
    grad
}

/// Result of [`find_integer_point`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntegerSearch {
    /// A fully integral point satisfying every row and the box.
    Found(Vec<i64>),
    /// The whole search space was pruned or visited; no such point exists.
    Exhausted,
    /// The node budget ran out before the search could conclude either way.
    BudgetExceeded,
}

/// Depth-first search for an all-integer point in the instance's region,
/// fixing variables in order with per-row implied-bound pruning. Entirely
/// ignorant of the stored witness.
pub fn find_integer_point(inst: &MipInstance, node_budget: usize) -> IntegerSearch {
    let n = inst.n;
    let m = inst.m;
    let lb = inst.lower_bound;
    let ub = inst.upper_bound;

    // resid[i] = slack remaining in row i; min_rest[i] = least achievable
    // contribution of the still-unfixed variables to row i.
    let mut resid: Vec<i64> = inst.b.clone();
    let mut min_rest = vec![0i64; m];
    for i in 0..m {
        for j in 0..n {
            let a = inst.a_at(i, j);
            min_rest[i] += (a * lb).min(a * ub);
        }
    }

    // Try small-magnitude values first; generated regions cluster near the
    // planted interior point, and small values fail fast elsewhere.
    let mut value_order: Vec<i64> = (lb..=ub).collect();
    value_order.sort_by_key(|&v| (v - 3).abs());

    let mut assignment = vec![0i64; n];
    let mut nodes = 0usize;

    fn dfs(
        inst: &MipInstance,
        j: usize,
        resid: &mut [i64],
        min_rest: &mut [i64],
        value_order: &[i64],
        assignment: &mut [i64],
        nodes: &mut usize,
        budget: usize,
    ) -> Option<bool> {
        if *nodes >= budget {
            return None;
        }
        *nodes += 1;
        if j == inst.n {
            return Some(true);
        }
        for &v in value_order {
            let mut ok = true;
            for i in 0..inst.m {
                let a = inst.a_at(i, j);
                let contribution = a * v;
                let rest_wo_j = min_rest[i] - (a * inst.lower_bound).min(a * inst.upper_bound);
                if contribution + rest_wo_j > resid[i] {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            for i in 0..inst.m {
                let a = inst.a_at(i, j);
                resid[i] -= a * v;
                min_rest[i] -= (a * inst.lower_bound).min(a * inst.upper_bound);
            }
            assignment[j] = v;
            match dfs(
                inst,
                j + 1,
                resid,
                min_rest,
                value_order,
                assignment,
                nodes,
                budget,
            ) {
                Some(true) => return Some(true),
                Some(false) => {}
                None => return None,
            }
            for i in 0..inst.m {
                let a = inst.a_at(i, j);
                resid[i] += a * v;
                min_rest[i] += (a * inst.lower_bound).min(a * inst.upper_bound);
            }
        }
        Some(false)
    }

    match dfs(
        inst,
        0,
        &mut resid,
        &mut min_rest,
        &value_order,
        &mut assignment,
        &mut nodes,
        node_budget,
    ) {
        Some(true) => IntegerSearch::Found(assignment),
        Some(false) => IntegerSearch::Exhausted,
        None => IntegerSearch::BudgetExceeded,
    }
}

/// Random bounded LP with small integer data, the shape the solver sees in
/// production (some draws are infeasible on purpose).
pub fn random_small_lp(rng: &mut ChaCha8Rng) -> DenseLp {
    let n = rng.gen_range(1..=5usize);
    let m = rng.gen_range(1..=8usize);
    let data: Vec<f64> = (0..m * n)
        .map(|_| rng.gen_range(-10..=10i64) as f64)
        .collect();
    let rhs: Vec<f64> = (0..m).map(|_| rng.gen_range(-30..=30i64) as f64).collect();
    let objective: Vec<f64> = (0..n).map(|_| rng.gen_range(-10..=10i64) as f64).collect();
    DenseLp::new(
        objective,
        DenseMatrix::new(m, n, data),
        rhs,
        vec![-20.0; n],
        vec![20.0; n],
    )
    .expect("random LP construction")
}

// ---------------------------------------------------------------------------
// Self-check suites
//
// Each suite cross-checks one production code path against the independent
// reference implementations above, on freshly generated random cases. They
// back both the `selftest` subcommand (small case counts) and the heavier
// integration tests (large counts); everything is deterministic in `seed`.
// ---------------------------------------------------------------------------

/// Checks the two-phase simplex solver against brute-force vertex
/// enumeration on random small LPs: optimal values must agree to `1e-6`
/// relative tolerance and infeasibility verdicts must match.
pub fn lp_suite(seed: u64, cases: usize) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("lp-vs-vertex-enumeration");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut infeasible = 0usize;
    for case in 0..cases {
        out.cases += 1;
        let lp = random_small_lp(&mut rng);
        let reference = lp_min_by_vertex_enumeration(&lp);
        match (solve_lp(&lp), reference) {
            (
                Ok(LpOutcome::Optimal {
                    point,
                    objective_value,
                }),
                Some(want),
            ) => {
                let tol = 1e-6 * (1.0 + want.abs());
                if (objective_value - want).abs() > tol {
                    out.fail(format!(
                        "case {case}: simplex objective {objective_value} vs enumeration {want}"
                    ));
                } else if max_row_violation(&lp.row_matrix, &lp.rhs, &point) > 1e-6 {
                    out.fail(format!("case {case}: simplex point violates constraints"));
                }
            }
            (Ok(LpOutcome::Infeasible), None) => infeasible += 1,
            (
                Ok(LpOutcome::Optimal {
                    objective_value, ..
                }),
                None,
            ) => {
                out.fail(format!(
                    "case {case}: simplex found objective {objective_value} but enumeration says infeasible"
                ));
            }
            (Ok(LpOutcome::Infeasible), Some(want)) => {
                out.fail(format!(
                    "case {case}: simplex says infeasible but enumeration found {want}"
                ));
            }
            (Ok(LpOutcome::Unbounded), _) => {
                out.fail(format!(
                    "case {case}: unbounded verdict on a box-bounded LP"
                ));
            }
            (Err(e), _) => out.fail(format!("case {case}: solver error: {e}")),
        }
    }
    out.notes.push(format!(
        "{infeasible} of {cases} random LPs were infeasible"
    ));
    out
}

/// Checks the L1 projection on random generated instances and random anchor
/// points: the projection must satisfy every constraint and the box, must be
/// a fixed point under re-projection, and must attain the minimal L1
/// distance found by vertex enumeration of the lifted polytope.
pub fn projection_suite(seed: u64, cases: usize) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("l1-projection");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 3usize;
    for case in 0..cases {
        out.cases += 1;
        let m = rng.gen_range(3..=6);
        let kind = if rng.gen_bool(0.5) {
            Kind::Ip
        } else {
            Kind::Mip
        };
        let inst = match generate(rng.gen(), n, m, kind) {
            Ok(inst) => inst,
            Err(e) => {
                out.fail(format!("case {case}: generator error: {e}"));
                continue;
            }
        };
        let a = inst.a_f64();
        let b = inst.b_f64();
        let lower = inst.lower_vec();
        let upper = inst.upper_vec();
        let anchor: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    rng.gen_range(-20..=20) as f64
                } else {
                    rng.gen_range(-20.0..=20.0)
                }
            })
            .collect();
        let proj = match project_l1(&a, &b, &lower, &upper, &anchor) {
            Ok(p) => p,
            Err(e) => {
                out.fail(format!("case {case}: projection error: {e}"));
                continue;
            }
        };
        if max_row_violation(&a, &b, &proj) > 1e-6 {
            out.fail(format!("case {case}: projection violates a constraint row"));
            continue;
        }
        if proj
            .iter()
            .zip(lower.iter().zip(upper.iter()))
            .any(|(&v, (&lo, &hi))| v < lo - 1e-9 || v > hi + 1e-9)
        {
            out.fail(format!("case {case}: projection leaves the box"));
            continue;
        }
        match project_l1(&a, &b, &lower, &upper, &proj) {
            Ok(again) => {
                let drift = proj
                    .iter()
                    .zip(again.iter())
                    .map(|(p, q)| (p - q).abs())
                    .fold(0.0f64, f64::max);
                if drift > 1e-6 {
                    out.fail(format!("case {case}: re-projection moved by {drift}"));
                    continue;
                }
            }
            Err(e) => {
                out.fail(format!("case {case}: re-projection error: {e}"));
                continue;
            }
        }
        let dist: f64 = proj
            .iter()
            .zip(anchor.iter())
            .map(|(p, q)| (p - q).abs())
            .sum();
        match l1_min_by_vertex_enumeration(&a, &b, &lower, &upper, &anchor) {
            Some(best) => {
                if dist > best + 1e-6 {
                    out.fail(format!(
                        "case {case}: projection distance {dist} exceeds enumerated minimum {best}"
                    ));
                }
            }
            None => out.fail(format!(
                "case {case}: lifted enumeration found no vertex although projection succeeded"
            )),
        }
    }
    out
}

/// Checks the instance generator: every instance must pass validation
/// (shape, kind marker, negative right-hand-side row, stored witness), and a
/// subsample of small instances must actually contain an integer-feasible
/// point under exhaustive search.
pub fn generator_suite(
    seed: u64,
    count: usize,
    search_count: usize,
    budget: usize,
) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("instance-generator");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = [(5usize, 6usize), (7, 9), (9, 18)];
    let kinds = [Kind::Ip, Kind::Mip];
    let mut searched = 0usize;
    let mut found = 0usize;
    let mut over_budget = 0usize;
    for case in 0..count {
        out.cases += 1;
        let (n, m) = sizes[case % sizes.len()];
        let kind = kinds[(case / sizes.len()) % kinds.len()];
        let inst = match generate(rng.gen(), n, m, kind) {
            Ok(inst) => inst,
            Err(e) => {
                out.fail(format!(
                    "case {case}: generator error for {n}x{m} {kind}: {e}"
                ));
                continue;
            }
        };
        if let Err(e) = inst.validate() {
            out.fail(format!(
                "case {case}: generated instance fails validation: {e}"
            ));
            continue;
        }
        if !inst.b.iter().any(|&bi| bi < 0) {
            out.fail(format!("case {case}: no negative right-hand-side entry"));
            continue;
        }
        if (n, m) == (5, 6) && searched < search_count {
            searched += 1;
            match find_integer_point(&inst, budget) {
                IntegerSearch::Found(x) => {
                    let point: Vec<f64> = x.iter().map(|&v| v as f64).collect();
                    match inst.check(&point) {
                        Ok(report) if report.feasible => found += 1,
                        Ok(_) => {
                            out.fail(format!("case {case}: search returned an infeasible point"));
                        }
                        Err(e) => out.fail(format!("case {case}: check error: {e}")),
                    }
                }
                IntegerSearch::Exhausted => {
                    out.fail(format!(
                        "case {case}: exhaustive search found no integer point despite witness"
                    ));
                }
                IntegerSearch::BudgetExceeded => over_budget += 1,
            }
        }
    }
    if searched > 0 {
        out.notes.push(format!(
            "integer search on 5x6 subsample: {found}/{searched} found, {over_budget} over budget"
        ));
        if (found as f64) < 0.99 * (searched as f64) {
            out.fail(format!(
                "integer-feasible rate {found}/{searched} below 99% on the searched subsample"
            ));
        }
    }
    out
}

/// Checks analytic network gradients against central finite differences on
/// observations drawn from real environment episodes. Each draw builds fresh
/// networks, picks a random scalar loss over the policy mean (and the raw
/// value for the critic), and compares every parameter's gradient at
/// `h = 1e-5` with relative tolerance `1e-4` (denominator floored at 1).
pub fn gradient_suite(seed: u64, draws: usize) -> SuiteOutcome {
    use crate::env::{reset, EnvConfig, Variant};
    use crate::nn::{Critic, ParamVisitor, Policy};

    let mut out = SuiteOutcome::new("gradient-vs-finite-difference");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 3usize;
    let m = 4usize;
    for draw in 0..draws {
        for &variant in &[Variant::MlpObs, Variant::CnnObs] {
            out.cases += 1;
            let inst = match generate(rng.gen(), n, m, Kind::Ip) {
                Ok(inst) => inst,
                Err(e) => {
                    out.fail(format!("draw {draw}: generator error: {e}"));
                    continue;
                }
            };
            let config = EnvConfig {
                variant,
                ..EnvConfig::default()
            };
            let (mut state, mut obs) = match reset(&inst, config) {
                Ok(pair) => pair,
                Err(e) => {
                    out.fail(format!("draw {draw}: reset error: {e}"));
                    continue;
                }
            };
            // Wander a couple of steps so the observation is not always the
            // initial one; stop early if the episode terminates.
            for _ in 0..rng.gen_range(0..3usize) {
                if state.done {
                    break;
                }
                let action: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
                match state.step(&action) {
                    Ok(outcome) => obs = outcome.obs,
                    Err(_) => break,
                }
            }

            let mut policy = Policy::new(variant, n, m, &mut rng);
            let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            policy.zero_grad();
            policy.forward(&obs).expect("policy forward");
            policy.backward(&weights).expect("policy backward");
            let mut params = Vec::new();
            let mut analytic = Vec::new();
            policy.for_each_param_grad(&mut |p, g| {
                params.push(*p);
                analytic.push(*g);
            });
            let fd = finite_difference_grad(
                |theta| {
                    let mut it = theta.iter();
                    policy.for_each_param_grad(&mut |p, _| *p = *it.next().unwrap());
                    let mean = policy.forward(&obs).expect("policy forward");
                    mean.iter().zip(&weights).map(|(a, w)| a * w).sum()
                },
                &params,
                1e-5,
            );
            if let Some(err) = worst_rel_err(&analytic, &fd) {
                if err > 1e-4 {
                    out.fail(format!(
                        "draw {draw}: {variant} policy gradient mismatch, rel err {err:.3e}"
                    ));
                    continue;
                }
            }

            let mut critic = Critic::new(variant, n, m, &mut rng);
            critic.zero_grad();
            critic.forward(&obs).expect("critic forward");
            critic.backward(1.0).expect("critic backward");
            let mut cparams = Vec::new();
            let mut canalytic = Vec::new();
            critic.for_each_param_grad(&mut |p, g| {
                cparams.push(*p);
                canalytic.push(*g);
            });
            let cfd = finite_difference_grad(
                |theta| {
                    let mut it = theta.iter();
                    critic.for_each_param_grad(&mut |p, _| *p = *it.next().unwrap());
                    critic.forward(&obs).expect("critic forward")
                },
                &cparams,
                1e-5,
            );
            if let Some(err) = worst_rel_err(&canalytic, &cfd) {
                if err > 1e-4 {
                    out.fail(format!(
                        "draw {draw}: {variant} critic gradient mismatch, rel err {err:.3e}"
                    ));
                }
            }
        }
    }
    out
}

/// Largest elementwise relative error between two gradient vectors, with the
/// denominator floored at 1 so near-zero entries compare absolutely.
fn worst_rel_err(analytic: &[f64], numeric: &[f64]) -> Option<f64> {
    if analytic.len() != numeric.len() {
        return Some(f64::INFINITY);
    }
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(&a, &g)| (a - g).abs() / a.abs().max(g.abs()).max(1.0))
        .fold(None, |acc, e| Some(acc.map_or(e, |a: f64| a.max(e))))
}

/// Checks the vectorized advantage recursion against per-episode naive
/// double summation on random synthetic rollout buffers (tolerance `1e-10`).
pub fn gae_suite(seed: u64, cases: usize) -> SuiteOutcome {
    use crate::ppo::{gae_raw, RolloutBuffer, Transition};

    let mut out = SuiteOutcome::new("advantage-recursion");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        out.cases += 1;
        let episodes = rng.gen_range(1..=4usize);
        let mut buffer = RolloutBuffer::default();
        let mut episode_data = Vec::new();
        for ep in 0..episodes {
            let len = rng.gen_range(1..=8usize);
            let rewards: Vec<f64> = (0..len).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let values: Vec<f64> = (0..len).map(|_| rng.gen_range(-5.0..5.0)).collect();
            for t in 0..len {
                buffer.transitions.push(Transition {
                    obs: crate::env::Observation::MlpVec { flat: vec![0.0] },
                    action: vec![0.0],
                    log_prob_old: 0.0,
                    reward: rewards[t],
                    value_old: values[t],
                    done: t + 1 == len,
                    episode: ep,
                });
            }
            buffer.episode_lengths.push(len);
            episode_data.push((rewards, values));
        }
        let gamma = rng.gen_range(0.9..1.0);
        let lambda = rng.gen_range(0.8..1.0);
        let got = gae_raw(&buffer, gamma, lambda);
        let mut offset = 0usize;
        for (rewards, values) in &episode_data {
            let want = naive_gae_episode(rewards, values, gamma, lambda);
            for (t, w) in want.iter().enumerate() {
                if (got[offset + t] - w).abs() > 1e-10 {
                    out.fail(format!(
                        "case {case}: advantage[{t}] = {} vs naive {w}",
                        got[offset + t]
                    ));
                }
            }
            offset += rewards.len();
        }
    }
    out
}

/// Checks the metrics summarizer against naive loops: mean, population
/// standard deviation, max, interpolated quantiles, and success rate must
/// match on random episode-length samples (tolerance `1e-12`).
pub fn metrics_suite(seed: u64, cases: usize) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("metrics-summary");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for case in 0..cases {
        out.cases += 1;
        let cap = rng.gen_range(5..=100usize);
        let count = rng.gen_range(1..=40usize);
        let lengths: Vec<usize> = (0..count).map(|_| rng.gen_range(1..=cap)).collect();
        let lp_solves: Vec<usize> = (0..count).map(|_| rng.gen_range(1..=50)).collect();
        let row = crate::eval::summarize("probe", &lengths, &lp_solves, cap, 0.0);

        let as_f64: Vec<f64> = lengths.iter().map(|&v| v as f64).collect();
        let mean = as_f64.iter().sum::<f64>() / count as f64;
        let var = as_f64.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
        let max = lengths.iter().copied().max().unwrap_or(0) as f64;
        let successes = lengths.iter().filter(|&&l| l < cap).count();
        let solves_mean = lp_solves.iter().sum::<usize>() as f64 / count as f64;

        let checks = [
            ("mean", row.ep_len_mean, mean),
            ("std", row.ep_len_std, var.sqrt()),
            ("max", row.ep_len_max, max),
            ("q90", row.q90, naive_quantile(&as_f64, 0.9)),
            ("q10", row.q10, naive_quantile(&as_f64, 0.1)),
            ("success", row.success_rate, successes as f64 / count as f64),
            ("lp-solves", row.lp_solves_per_episode, solves_mean),
        ];
        for (label, got, want) in checks {
            if (got - want).abs() > 1e-12 {
                out.fail(format!("case {case}: {label} = {got} vs naive {want}"));
            }
        }
    }
    out
}
