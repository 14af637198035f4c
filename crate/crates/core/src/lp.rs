//! Dense two-phase primal simplex.
//!
//! Programs are stated as `minimize c^T y` over `y >= 0` subject to rows
//! `a_i^T y {>=, <=, =} b_i`. Programs with many more rows than variables
//! are solved through their dual, which is short and wide; the primal point
//! is then read off the dual's final reduced costs.

use crate::error::{Error, Result};

/// Pivot elements below this magnitude are never used.
pub const PIVOT_TOLERANCE: f64 = 1e-10;
/// Absolute tolerance on constraint satisfaction.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-8;
const OPTIMALITY_TOLERANCE: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Ge,
    Le,
    Eq,
}

impl Relation {
    fn flipped(self) -> Self {
        match self {
            Relation::Ge => Relation::Le,
            Relation::Le => Relation::Ge,
            Relation::Eq => Relation::Eq,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, y: &[f64]) -> f64 {
        self.coefficients.iter().zip(y).map(|(a, v)| a * v).sum()
    }

    /// Amount by which `y` violates this row (zero when satisfied).
    pub fn violation(&self, y: &[f64]) -> f64 {
        let lhs = self.activity(y);
        match self.relation {
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `minimize c^T y` subject to linear rows, with `y >= 0` implied.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Result<Self> {
        if objective.is_empty() {
            return Err(Error::Parameter("linear program needs at least one variable".into()));
        }
        if objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::Parameter("objective coefficients must be finite".into()));
        }
        Ok(Self { objective, constraints: Vec::new() })
    }

    pub fn add_constraint(&mut self, coefficients: Vec<f64>, relation: Relation, rhs: f64) -> Result<()> {
        if coefficients.len() != self.variable_count() {
            return Err(Error::Parameter(format!(
                "constraint has {} coefficients, program has {} variables",
                coefficients.len(),
                self.variable_count()
            )));
        }
        if !rhs.is_finite() || coefficients.iter().any(|a| !a.is_finite()) {
            return Err(Error::Parameter("constraint coefficients must be finite".into()));
        }
        self.constraints.push(Constraint { coefficients, relation, rhs });
        Ok(())
    }

    pub fn variable_count(&self) -> usize {
        self.objective.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective_at(&self, y: &[f64]) -> f64 {
        self.objective.iter().zip(y).map(|(c, v)| c * v).sum()
    }

    /// Largest row violation at `y`, including the sign bounds.
    pub fn max_violation(&self, y: &[f64]) -> f64 {
        let bounds = y.iter().fold(0.0f64, |m, &v| m.max(-v));
        self.constraints.iter().fold(bounds, |m, c| m.max(c.violation(y)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; empty unless optimal.
    pub values: Vec<f64>,
    pub objective_value: f64,
    /// Row multipliers `pi` with `c - A^T pi >= 0`: nonnegative on `>=` rows,
    /// nonpositive on `<=` rows. Empty unless optimal.
    pub duals: Vec<f64>,
}

impl LpSolution {
    fn without_point(status: LpStatus) -> Self {
        let objective_value = match status {
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
            LpStatus::Optimal => f64::NAN,
        };
        Self { status, values: Vec::new(), objective_value, duals: Vec::new() }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves `lp`, choosing between the primal and dual tableau by shape.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    if lp.constraints.len() > 2 * lp.variable_count() {
        if let Some(sol) = solve_via_dual(lp)? {
            return Ok(sol);
        }
    }
    solve_primal(lp)
}

/// Solves `lp` directly with the two-phase tableau, never dualizing.
pub fn solve_primal(lp: &LinearProgram) -> Result<LpSolution> {
    Tableau::build(lp).run(lp)
}

/// How a dual variable maps back onto a primal row multiplier.
#[derive(Debug, Clone, Copy)]
enum DualVar {
    /// `pi_i = q`
    Plus(usize),
    /// `pi_i = -q`
    Minus(usize),
}

/// Solves the dual; returns `None` when the outcome cannot decide the
/// primal status on its own (dual infeasible) or the recovered primal point
/// fails verification.
fn solve_via_dual(lp: &LinearProgram) -> Result<Option<LpSolution>> {
    let n = lp.variable_count();
    let mut map = Vec::with_capacity(lp.constraints.len());
    let mut dual_obj = Vec::with_capacity(lp.constraints.len());
    for (i, c) in lp.constraints.iter().enumerate() {
        match c.relation {
            Relation::Ge => {
                map.push(DualVar::Plus(i));
                dual_obj.push(-c.rhs);
            }
            Relation::Le => {
                map.push(DualVar::Minus(i));
                dual_obj.push(c.rhs);
            }
            Relation::Eq => {
                map.push(DualVar::Plus(i));
                dual_obj.push(-c.rhs);
                map.push(DualVar::Minus(i));
                dual_obj.push(c.rhs);
            }
        }
    }
    let mut dual = LinearProgram { objective: dual_obj, constraints: Vec::with_capacity(n) };
    for j in 0..n {
        let coefficients = map
            .iter()
            .map(|v| match *v {
                DualVar::Plus(i) => lp.constraints[i].coefficients[j],
                DualVar::Minus(i) => -lp.constraints[i].coefficients[j],
            })
            .collect();
        dual.constraints.push(Constraint { coefficients, relation: Relation::Le, rhs: lp.objective[j] });
    }

    let sol = Tableau::build(&dual).run(&dual)?;
    match sol.status {
        LpStatus::Unbounded => Ok(Some(LpSolution::without_point(LpStatus::Infeasible))),
        LpStatus::Infeasible => Ok(None),
        LpStatus::Optimal => {
            let values: Vec<f64> = sol.duals.iter().map(|&d| clean(-d)).collect();
            let mut duals = vec![0.0; lp.constraints.len()];
            for (v, q) in map.iter().zip(&sol.values) {
                match *v {
                    DualVar::Plus(i) => duals[i] += q,
                    DualVar::Minus(i) => duals[i] -= q,
                }
            }
            if lp.max_violation(&values) > FEASIBILITY_TOLERANCE {
                return Ok(None);
            }
            let objective_value = lp.objective_at(&values);
            Ok(Some(LpSolution { status: LpStatus::Optimal, values, objective_value, duals }))
        }
    }
}

fn clean(v: f64) -> f64 {
    if v.abs() < 1e-13 {
        0.0
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColumnKind {
    Structural,
    Slack,
    Artificial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pricing {
    Dantzig,
    Bland,
}

struct Tableau {
    rows: usize,
    /// Column count excluding the right-hand side.
    cols: usize,
    /// Row-major `rows x (cols + 1)`; the last entry of each row is the rhs.
    body: Vec<f64>,
    /// Reduced costs, with `-objective` in the last entry.
    cost: Vec<f64>,
    basis: Vec<usize>,
    kinds: Vec<ColumnKind>,
    /// Per row: the column whose reduced cost yields the row multiplier and
    /// the sign converting it.
    multiplier_col: Vec<(usize, f64)>,
    /// `-1` where the row was negated to make its rhs nonnegative.
    row_sign: Vec<f64>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.variable_count();
        let m = lp.constraints.len();
        let mut row_sign = Vec::with_capacity(m);
        let mut relations = Vec::with_capacity(m);
        for c in &lp.constraints {
            if c.rhs < 0.0 {
                row_sign.push(-1.0);
                relations.push(c.relation.flipped());
            } else {
                row_sign.push(1.0);
                relations.push(c.relation);
            }
        }
        let slack_count = relations.iter().filter(|r| **r != Relation::Eq).count();
        let art_count = relations.iter().filter(|r| **r != Relation::Le).count();
        let cols = n + slack_count + art_count;
        let width = cols + 1;

        let mut kinds = vec![ColumnKind::Structural; n];
        kinds.extend(std::iter::repeat_n(ColumnKind::Slack, slack_count));
        kinds.extend(std::iter::repeat_n(ColumnKind::Artificial, art_count));

        let mut body = vec![0.0; m * width];
        let mut basis = Vec::with_capacity(m);
        let mut multiplier_col = Vec::with_capacity(m);
        let mut next_slack = n;
        let mut next_art = n + slack_count;
        for (i, c) in lp.constraints.iter().enumerate() {
            let row = &mut body[i * width..(i + 1) * width];
            let s = row_sign[i];
            for (dst, a) in row.iter_mut().zip(&c.coefficients) {
                *dst = s * a;
            }
            row[cols] = s * c.rhs;
            match relations[i] {
                Relation::Le => {
                    row[next_slack] = 1.0;
                    basis.push(next_slack);
                    multiplier_col.push((next_slack, -1.0));
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -1.0;
                    row[next_art] = 1.0;
                    basis.push(next_art);
                    multiplier_col.push((next_slack, 1.0));
                    next_slack += 1;
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = 1.0;
                    basis.push(next_art);
                    multiplier_col.push((next_art, -1.0));
                    next_art += 1;
                }
            }
        }
        Self { rows: m, cols, body, cost: vec![0.0; width], basis, kinds, multiplier_col, row_sign }
    }

    fn width(&self) -> usize {
        self.cols + 1
    }

    fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.body[i * w..(i + 1) * w]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.body[i * self.width() + self.cols]
    }

    /// Loads `costs` (per column) as the objective and prices out the basis.
    fn load_costs(&mut self, costs: &[f64]) {
        let w = self.width();
        self.cost[..self.cols].copy_from_slice(costs);
        self.cost[self.cols] = 0.0;
        for i in 0..self.rows {
            let cb = costs[self.basis[i]];
            if cb != 0.0 {
                let row = &self.body[i * w..(i + 1) * w];
                for (c, a) in self.cost.iter_mut().zip(row) {
                    *c -= cb * a;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let w = self.width();
        let (before, rest) = self.body.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        let inv = 1.0 / prow[j];
        prow.iter_mut().for_each(|v| *v *= inv);
        prow[j] = 1.0;
        let eliminate = |row: &mut [f64]| {
            let f = row[j];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
                row[j] = 0.0;
            }
        };
        before.chunks_exact_mut(w).for_each(eliminate);
        after.chunks_exact_mut(w).for_each(eliminate);
        eliminate(&mut self.cost);
        self.basis[r] = j;
    }

    fn entering(&self, allow_artificial: bool, pricing: Pricing) -> Option<usize> {
        let candidates = (0..self.cols)
            .filter(|&j| allow_artificial || self.kinds[j] != ColumnKind::Artificial)
            .filter(|&j| self.cost[j] < -OPTIMALITY_TOLERANCE);
        match pricing {
            Pricing::Bland => candidates.into_iter().next(),
            Pricing::Dantzig => candidates.min_by(|&a, &b| self.cost[a].total_cmp(&self.cost[b])),
        }
    }

    /// Minimum-ratio row for entering column `j`; `None` means unbounded.
    fn leaving(&self, j: usize, pricing: Pricing) -> Option<usize> {
        let w = self.width();
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let a = self.body[i * w + j];
            if a <= PIVOT_TOLERANCE {
                continue;
            }
            let ratio = self.body[i * w + self.cols] / a;
            best = match best {
                None => Some((i, ratio)),
                Some((bi, br)) => {
                    let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                    let better = if tie {
                        match pricing {
                            Pricing::Bland => self.basis[i] < self.basis[bi],
                            Pricing::Dantzig => a > self.body[bi * w + j],
                        }
                    } else {
                        ratio < br
                    };
                    if better {
                        Some((i, ratio))
                    } else {
                        Some((bi, br))
                    }
                }
            };
        }
        best.map(|(i, _)| i)
    }

    /// Runs simplex iterations on the loaded objective. Dantzig pricing is
    /// used until a degenerate pivot occurs; Bland's rule then governs until
    /// the objective strictly improves again, which rules out cycling.
    fn iterate(&mut self, allow_artificial: bool) -> Result<bool> {
        let limit = 50_000 + 20 * (self.rows + self.cols);
        let mut pricing = Pricing::Dantzig;
        for _ in 0..limit {
            let Some(j) = self.entering(allow_artificial, pricing) else {
                return Ok(true);
            };
            let Some(r) = self.leaving(j, pricing) else {
                return Ok(false);
            };
            let degenerate = self.rhs(r).abs() <= PIVOT_TOLERANCE;
            self.pivot(r, j);
            pricing = if degenerate { Pricing::Bland } else { Pricing::Dantzig };
        }
        Err(Error::NumericalFailure(format!("no convergence after {limit} pivots")))
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        let n = lp.variable_count();
        let has_artificial = self.basis.iter().any(|&b| self.kinds[b] == ColumnKind::Artificial);
        if has_artificial {
            let phase_one: Vec<f64> =
                self.kinds.iter().map(|k| if *k == ColumnKind::Artificial { 1.0 } else { 0.0 }).collect();
            self.load_costs(&phase_one);
            self.iterate(true)?;
            let infeasibility = -self.cost[self.cols];
            let scale = 1.0 + lp.constraints.iter().fold(0.0f64, |m, c| m.max(c.rhs.abs()));
            if infeasibility > FEASIBILITY_TOLERANCE * scale {
                return Ok(LpSolution::without_point(LpStatus::Infeasible));
            }
            self.expel_artificials();
        }

        let mut costs = vec![0.0; self.cols];
        costs[..n].copy_from_slice(&lp.objective);
        self.load_costs(&costs);
        if !self.iterate(false)? {
            return Ok(LpSolution::without_point(LpStatus::Unbounded));
        }

        let mut values = vec![0.0; n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                values[b] = self.rhs(i).max(0.0);
            }
        }
        let duals = self
            .multiplier_col
            .iter()
            .zip(&self.row_sign)
            .map(|(&(col, s), sign)| clean(s * sign * self.cost[col]))
            .collect();
        let objective_value = lp.objective_at(&values);
        Ok(LpSolution { status: LpStatus::Optimal, values, objective_value, duals })
    }

    /// Pivots zero-level artificials out of the basis where some real column
    /// can replace them; rows with no such column are redundant and keep
    /// their artificial at zero.
    fn expel_artificials(&mut self) {
        for i in 0..self.rows {
            if self.kinds[self.basis[i]] != ColumnKind::Artificial {
                continue;
            }
            let row = self.row(i);
            let replacement = (0..self.cols)
                .filter(|&j| self.kinds[j] != ColumnKind::Artificial && row[j].abs() > 1e-9)
                .max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()));
            if let Some(j) = replacement {
                self.pivot(i, j);
            }
        }
    }
}
