//! Dense linear programming: a two-phase primal simplex over inequality rows
//! with finite box bounds, and the L1 projection onto a polyhedron built on
//! top of it.
//!
//! Scope is deliberately small: every variable carries finite bounds, rows are
//! `row . x <= rhs`, and problem sizes stay in the tens of variables, so a
//! dense tableau with Bland's rule as the anti-cycling fallback is the whole
//! story. Solves are pure functions of their input: identical inputs produce
//! bit-identical outcomes.

use thiserror::Error;

use crate::FEAS_TOL;

/// Reduced-cost threshold below which a column is considered improving.
const COST_TOL: f64 = 1e-9;
/// Smallest pivot element magnitude accepted by the ratio test.
const PIVOT_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERACY_SWITCH: usize = 16;
/// Default pivot budget for a single solve.
pub const DEFAULT_PIVOT_CAP: usize = 50_000;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("inconsistent dimensions: {0}")]
    BadDimensions(String),
    #[error("non-finite entry in LP data: {0}")]
    NonFinite(String),
    #[error("lower bound exceeds upper bound at variable {index}")]
    BoundOrder { index: usize },
    #[error("pivot cap of {cap} exceeded; the solve is cycling or ill-conditioned")]
    MaxPivotsExceeded { cap: usize },
    #[error("projection target region is empty; caller contract violated")]
    ProjectionInfeasible,
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `A x` for a vector `x` of length `cols`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// A linear program `min c.x  s.t.  A x <= b,  lb <= x <= ub` with every
/// bound finite.
#[derive(Debug, Clone)]
pub struct DenseLp {
    pub objective: Vec<f64>,
    pub row_matrix: DenseMatrix,
    pub rhs: Vec<f64>,
    pub lower_bounds: Vec<f64>,
    pub upper_bounds: Vec<f64>,
}

impl DenseLp {
    pub fn new(
        objective: Vec<f64>,
        row_matrix: DenseMatrix,
        rhs: Vec<f64>,
        lower_bounds: Vec<f64>,
        upper_bounds: Vec<f64>,
    ) -> Result<Self, LpError> {
        let n = objective.len();
        if n == 0 {
            return Err(LpError::BadDimensions("zero variables".into()));
        }
        if row_matrix.cols() != n {
            return Err(LpError::BadDimensions(format!(
                "row matrix has {} columns for {} variables",
                row_matrix.cols(),
                n
            )));
        }
        if row_matrix.rows() != rhs.len() {
            return Err(LpError::BadDimensions(format!(
                "{} rows vs {} right-hand sides",
                row_matrix.rows(),
                rhs.len()
            )));
        }
        if lower_bounds.len() != n || upper_bounds.len() != n {
            return Err(LpError::BadDimensions("bound vector length".into()));
        }
        for (name, v) in [
            ("objective", &objective),
            ("rhs", &rhs),
            ("lower_bounds", &lower_bounds),
            ("upper_bounds", &upper_bounds),
        ] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(LpError::NonFinite(name.into()));
            }
        }
        if row_matrix.data().iter().any(|x| !x.is_finite()) {
            return Err(LpError::NonFinite("row_matrix".into()));
        }
        for i in 0..n {
            if lower_bounds[i] > upper_bounds[i] {
                return Err(LpError::BoundOrder { index: i });
            }
        }
        Ok(Self {
            objective,
            row_matrix,
            rhs,
            lower_bounds,
            upper_bounds,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }
}

/// Result of an LP solve.
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal {
        point: Vec<f64>,
        objective_value: f64,
    },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(&self) -> Option<(&[f64], f64)> {
        match self {
            LpOutcome::Optimal {
                point,
                objective_value,
            } => Some((point, *objective_value)),
            _ => None,
        }
    }
}

/// Largest violation `row . x - rhs` over all rows (negative when strictly interior).
pub fn max_row_violation(rows: &DenseMatrix, rhs: &[f64], x: &[f64]) -> f64 {
    (0..rows.rows())
        .map(|i| {
            let lhs: f64 = rows.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
            lhs - rhs[i]
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solve with the default pivot budget.
pub fn solve_lp(lp: &DenseLp) -> Result<LpOutcome, LpError> {
    solve_lp_with_pivot_cap(lp, DEFAULT_PIVOT_CAP)
}

/// Solve with an explicit pivot budget; exceeding it is reported as
/// [`LpError::MaxPivotsExceeded`], never as a wrong answer.
pub fn solve_lp_with_pivot_cap(lp: &DenseLp, cap: usize) -> Result<LpOutcome, LpError> {
    let n = lp.num_vars();
    let m = lp.num_rows();

    // Shift to y = x - lb >= 0 and turn the upper bounds into rows:
    //   A y <= b - A lb,   I y <= ub - lb.
    let range: Vec<f64> = (0..n)
        .map(|j| lp.upper_bounds[j] - lp.lower_bounds[j])
        .collect();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m + n);
    let mut rhs: Vec<f64> = Vec::with_capacity(m + n);
    for i in 0..m {
        let a = lp.row_matrix.row(i);
        let shift: f64 = a.iter().zip(&lp.lower_bounds).map(|(v, l)| v * l).sum();
        rows.push(a.to_vec());
        rhs.push(lp.rhs[i] - shift);
    }
    for j in 0..n {
        let mut r = vec![0.0; n];
        r[j] = 1.0;
        rows.push(r);
        rhs.push(range[j]);
    }

    let mut tab = Tableau::new(n, &rows, &rhs);
    let mut budget = PivotBudget { used: 0, cap };

    if tab.num_artificials() > 0 {
        tab.load_phase1_cost();
        match tab.run(&mut budget)? {
            Phase::Optimal => {}
            // Phase 1 minimizes a sum of nonnegative variables; it cannot be unbounded.
            Phase::Unbounded => unreachable!("phase 1 objective is bounded below"),
        }
        if tab.objective_value() > FEAS_TOL {
            return Ok(LpOutcome::Infeasible);
        }
        tab.purge_artificials();
    }

    tab.load_phase2_cost(&lp.objective);
    match tab.run(&mut budget)? {
        Phase::Optimal => {}
        Phase::Unbounded => return Ok(LpOutcome::Unbounded),
    }

    let mut y = vec![0.0; n];
    for (r, &bc) in tab.basis.iter().enumerate() {
        if bc < n {
            y[bc] = tab.rows[r][tab.width];
        }
    }
    let point: Vec<f64> = (0..n)
        .map(|j| (y[j].clamp(0.0, range[j])) + lp.lower_bounds[j])
        .collect();
    let objective_value = lp.objective.iter().zip(&point).map(|(c, x)| c * x).sum();
    Ok(LpOutcome::Optimal {
        point,
        objective_value,
    })
}

/// L1 projection of `anchor` onto `{ x : rows . x <= rhs, lb <= x <= ub }`.
///
/// Uses the standard reformulation with one auxiliary variable per coordinate
/// (`-t <= x - anchor <= t`, minimize `sum t`). An anchor that already lies in
/// the region is returned unchanged without a solve.
pub fn project_l1(
    rows: &DenseMatrix,
    rhs: &[f64],
    lower_bounds: &[f64],
    upper_bounds: &[f64],
    anchor: &[f64],
) -> Result<Vec<f64>, LpError> {
    let n = anchor.len();
    if rows.cols() != n || lower_bounds.len() != n || upper_bounds.len() != n {
        return Err(LpError::BadDimensions("projection input lengths".into()));
    }
    let m = rows.rows();

    let in_box = anchor
        .iter()
        .enumerate()
        .all(|(j, &a)| a >= lower_bounds[j] - FEAS_TOL && a <= upper_bounds[j] + FEAS_TOL);
    if in_box && max_row_violation(rows, rhs, anchor) <= FEAS_TOL {
        return Ok(anchor.to_vec());
    }

    // Variables [x | t]; objective sum(t).
    let mut obj = vec![0.0; 2 * n];
    obj[n..].fill(1.0);
    let total_rows = m + 2 * n;
    let mut big = DenseMatrix::zeros(total_rows, 2 * n);
    let mut big_rhs = vec![0.0; total_rows];
    for i in 0..m {
        for j in 0..n {
            big.set(i, j, rows.at(i, j));
        }
        big_rhs[i] = rhs[i];
    }
    for j in 0..n {
        // x_j - t_j <= anchor_j
        big.set(m + 2 * j, j, 1.0);
        big.set(m + 2 * j, n + j, -1.0);
        big_rhs[m + 2 * j] = anchor[j];
        // -x_j - t_j <= -anchor_j
        big.set(m + 2 * j + 1, j, -1.0);
        big.set(m + 2 * j + 1, n + j, -1.0);
        big_rhs[m + 2 * j + 1] = -anchor[j];
    }
    let mut lb = lower_bounds.to_vec();
    let mut ub = upper_bounds.to_vec();
    for j in 0..n {
        let reach = (upper_bounds[j] - anchor[j])
            .abs()
            .max((anchor[j] - lower_bounds[j]).abs());
        lb.push(0.0);
        ub.push(reach + 1.0);
    }

    let lp = DenseLp::new(obj, big, big_rhs, lb, ub)?;
    match solve_lp(&lp)? {
        LpOutcome::Optimal { point, .. } => Ok(point[..n].to_vec()),
        LpOutcome::Infeasible | LpOutcome::Unbounded => Err(LpError::ProjectionInfeasible),
    }
}

enum Phase {
    Optimal,
    Unbounded,
}

struct PivotBudget {
    used: usize,
    cap: usize,
}

/// Simplex tableau over columns `[structural | slack | artificial]` with the
/// right-hand side stored in the last position of every row.
struct Tableau {
    rows: Vec<Vec<f64>>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    n_struct: usize,
    art_start: usize,
    width: usize,
    bland: bool,
    degen_streak: usize,
}

impl Tableau {
    fn new(n_struct: usize, rows_in: &[Vec<f64>], rhs: &[f64]) -> Self {
        let m = rows_in.len();
        let art_rows: Vec<usize> = (0..m).filter(|&i| rhs[i] < 0.0).collect();
        let art_start = n_struct + m;
        let width = art_start + art_rows.len();

        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut next_art = art_start;
        for i in 0..m {
            let mut row = vec![0.0; width + 1];
            let negate = rhs[i] < 0.0;
            let sign = if negate { -1.0 } else { 1.0 };
            for j in 0..n_struct {
                row[j] = sign * rows_in[i][j];
            }
            row[n_struct + i] = sign; // slack
            row[width] = sign * rhs[i];
            if negate {
                row[next_art] = 1.0;
                basis.push(next_art);
                next_art += 1;
            } else {
                basis.push(n_struct + i);
            }
            rows.push(row);
        }

        Self {
            rows,
            cost: vec![0.0; width + 1],
            basis,
            n_struct,
            art_start,
            width,
            bland: false,
            degen_streak: 0,
        }
    }

    fn num_artificials(&self) -> usize {
        self.width - self.art_start
    }

    fn objective_value(&self) -> f64 {
        -self.cost[self.width]
    }

    /// Cost row = sum of artificial indicators, priced out over the basis.
    fn load_phase1_cost(&mut self) {
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        for j in self.art_start..self.width {
            self.cost[j] = 1.0;
        }
        self.price_out();
    }

    fn load_phase2_cost(&mut self, objective: &[f64]) {
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        self.cost[..self.n_struct].copy_from_slice(objective);
        self.price_out();
        self.bland = false;
        self.degen_streak = 0;
    }

    fn price_out(&mut self) {
        for r in 0..self.rows.len() {
            let cb = self.cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.rows[r];
                for j in 0..=self.width {
                    self.cost[j] -= cb * row[j];
                }
            }
        }
    }

    fn run(&mut self, budget: &mut PivotBudget) -> Result<Phase, LpError> {
        loop {
            let Some(enter) = self.pick_entering() else {
                return Ok(Phase::Optimal);
            };
            let Some(leave) = self.pick_leaving(enter) else {
                return Ok(Phase::Unbounded);
            };
            if budget.used >= budget.cap {
                return Err(LpError::MaxPivotsExceeded { cap: budget.cap });
            }
            budget.used += 1;

            if self.rows[leave][self.width].abs() <= 1e-12 {
                self.degen_streak += 1;
                if self.degen_streak >= DEGENERACY_SWITCH {
                    self.bland = true;
                }
            } else {
                self.degen_streak = 0;
            }
            self.pivot(leave, enter);
        }
    }

    /// Entering column among structural + slack columns only; artificial
    /// columns never re-enter once they have left the basis.
    fn pick_entering(&self) -> Option<usize> {
        if self.bland {
            (0..self.art_start).find(|&j| self.cost[j] < -COST_TOL)
        } else {
            let mut best = None;
            let mut best_cost = -COST_TOL;
            for j in 0..self.art_start {
                if self.cost[j] < best_cost {
                    best_cost = self.cost[j];
                    best = Some(j);
                }
            }
            best
        }
    }

    /// Ratio test; ties broken by the least basic-variable index, which is the
    /// Bland-compatible choice.
    fn pick_leaving(&self, enter: usize) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.rows.len() {
            let a = self.rows[r][enter];
            if a > PIVOT_TOL {
                let ratio = self.rows[r][self.width] / a;
                match best {
                    None => best = Some((r, ratio)),
                    Some((br, bratio)) => {
                        if ratio < bratio - 1e-12
                            || (ratio <= bratio + 1e-12 && self.basis[r] < self.basis[br])
                        {
                            best = Some((r, ratio));
                        }
                    }
                }
            }
        }
        best.map(|(r, _)| r)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.rows[r][c];
        let row = &mut self.rows[r];
        for v in row.iter_mut() {
            *v /= piv;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, p) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * p;
                    }
                }
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (v, p) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
        }
        self.basis[r] = c;
    }

    /// After phase 1 at objective zero: pivot basic artificials out on any
    /// available structural or slack column, dropping redundant rows.
    fn purge_artificials(&mut self) {
        let mut r = 0;
        while r < self.rows.len() {
            if self.basis[r] >= self.art_start {
                let col = (0..self.art_start).find(|&j| self.rows[r][j].abs() > PIVOT_TOL);
                match col {
                    Some(c) => self.pivot(r, c),
                    None => {
                        self.rows.remove(r);
                        self.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }
}
