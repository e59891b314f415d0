//! Dense bounded-variable primal simplex.
//!
//! Every row gets a slack so the slack block of the tableau always holds the
//! basis inverse. Rows whose slack cannot absorb the starting residual get an
//! artificial column; phase one drives those to zero. Fixed columns are
//! substituted out before the tableau is built.

use thiserror::Error;

use super::model::{MilpModel, Relation, Sense};

/// Smallest accepted pivot magnitude.
pub const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-7;
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("numerical instability: only pivots below {PIVOT_TOL:e} remain")]
    Numerical,
    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(usize),
}

/// Optimal basic solution of a relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// Value of every model variable.
    pub x: Vec<f64>,
    /// Objective in the model's own sense, constant included.
    pub objective: f64,
    /// Sensitivity of the objective to each row's right-hand side.
    pub duals: Vec<f64>,
    /// Objective coefficient minus `Aᵀy`, per variable.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

/// Solves the continuous relaxation of `model` with every variable's bounds
/// replaced by `bounds`.
pub fn solve_relaxation(model: &MilpModel, bounds: &[(f64, f64)]) -> Result<LpOutcome, LpError> {
    debug_assert_eq!(bounds.len(), model.num_vars());
    let n_model = model.num_vars();
    if bounds.iter().any(|(l, u)| l > u) {
        return Ok(LpOutcome::Infeasible);
    }
    // Columns for the variables that are not fixed.
    let mut col_of = vec![usize::MAX; n_model];
    let mut var_of = Vec::new();
    for (v, &(l, u)) in bounds.iter().enumerate() {
        if l < u {
            col_of[v] = var_of.len();
            var_of.push(v);
        }
    }
    let n = var_of.len();
    let sign = match model.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };

    // Scaled rows over the free columns.
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs = Vec::new();
    let mut rels = Vec::new();
    let mut scale = Vec::new();
    let mut row_of_con = vec![usize::MAX; model.constraints().len()];
    for (ci, con) in model.constraints().iter().enumerate() {
        let mut b = con.rhs;
        let mut coefs = Vec::new();
        for &(v, a) in con.lhs.terms() {
            if col_of[v.0] == usize::MAX {
                b -= a * bounds[v.0].0;
            } else {
                coefs.push((col_of[v.0], a));
            }
        }
        let big = coefs.iter().map(|c| c.1.abs()).fold(0.0, f64::max);
        if big == 0.0 {
            let tol = 1e-9 * (1.0 + b.abs());
            let ok = match con.relation {
                Relation::Le => 0.0 <= b + tol,
                Relation::Ge => 0.0 >= b - tol,
                Relation::Eq => b.abs() <= tol,
            };
            if !ok {
                return Ok(LpOutcome::Infeasible);
            }
            continue;
        }
        let s = 1.0 / big;
        row_of_con[ci] = rows.len();
        rows.push(coefs.into_iter().map(|(j, a)| (j, a * s)).collect());
        rhs.push(b * s);
        rels.push(con.relation);
        scale.push(s);
    }
    let m = rows.len();

    let mut lo = Vec::with_capacity(n + 2 * m);
    let mut hi = Vec::with_capacity(n + 2 * m);
    for &v in &var_of {
        lo.push(bounds[v].0);
        hi.push(bounds[v].1);
    }
    for rel in &rels {
        let (l, u) = match rel {
            Relation::Le => (0.0, f64::INFINITY),
            Relation::Ge => (f64::NEG_INFINITY, 0.0),
            Relation::Eq => (0.0, 0.0),
        };
        lo.push(l);
        hi.push(u);
    }
    let mut cost = vec![0.0; n + m];
    for &(v, c) in model.objective().terms() {
        if col_of[v.0] != usize::MAX {
            cost[col_of[v.0]] = sign * c;
        }
    }

    let mut x = vec![0.0; n + m];
    for j in 0..n {
        x[j] = start_value(lo[j], hi[j]);
    }

    // Starting basis: slacks where they absorb the residual, else artificials.
    let mut art_rows = Vec::new();
    let mut art_sign = Vec::new();
    let mut slack_value = vec![0.0; m];
    let mut basic_slack = vec![false; m];
    for i in 0..m {
        let r = rhs[i] - rows[i].iter().map(|&(j, a)| a * x[j]).sum::<f64>();
        let s = lo[n + i].max(hi[n + i].min(r));
        slack_value[i] = s;
        if s == r {
            basic_slack[i] = true;
        } else {
            art_rows.push(i);
            art_sign.push(if r > s { 1.0 } else { -1.0 });
        }
    }
    let n_art = art_rows.len();
    let ncols = n + m + n_art;
    for _ in 0..n_art {
        lo.push(0.0);
        hi.push(f64::INFINITY);
        cost.push(0.0);
        x.push(0.0);
    }

    let mut t = Tableau {
        m,
        ncols,
        a: vec![0.0; m * ncols],
        basis: vec![0; m],
        is_basic: vec![usize::MAX; ncols],
        xb: vec![0.0; m],
        d: vec![0.0; ncols],
        lo,
        hi,
        x,
        iterations: 0,
    };
    let mut art_of_row = vec![usize::MAX; m];
    for (k, &i) in art_rows.iter().enumerate() {
        art_of_row[i] = n + m + k;
    }
    for i in 0..m {
        let div = if basic_slack[i] {
            1.0
        } else {
            art_sign[art_rows.iter().position(|&r| r == i).unwrap()]
        };
        let row = &mut t.a[i * ncols..(i + 1) * ncols];
        for &(j, a) in &rows[i] {
            row[j] = a / div;
        }
        row[n + i] = 1.0 / div;
        let basic_col = if basic_slack[i] {
            n + i
        } else {
            let k = art_of_row[i];
            row[k] = 1.0;
            t.x[n + i] = slack_value[i];
            k
        };
        let r = rhs[i] - rows[i].iter().map(|&(j, a)| a * t.x[j]).sum::<f64>();
        t.basis[i] = basic_col;
        t.is_basic[basic_col] = i;
        t.xb[i] = if basic_slack[i] {
            r
        } else {
            (r - slack_value[i]).abs()
        };
    }

    let cap = 20_000 + 50 * (m + ncols);
    if n_art > 0 {
        let mut phase1 = vec![0.0; ncols];
        for c in phase1.iter_mut().skip(n + m) {
            *c = 1.0;
        }
        t.price(&phase1);
        match t.run(cap)? {
            Step::Optimal => {}
            Step::Unbounded => return Err(LpError::Numerical),
        }
        let infeasibility: f64 = (0..m)
            .filter(|&i| t.basis[i] >= n + m)
            .map(|i| t.xb[i].abs())
            .sum();
        if infeasibility > PHASE1_TOL {
            return Ok(LpOutcome::Infeasible);
        }
        t.evict_artificials(n + m);
        for j in n + m..ncols {
            t.hi[j] = 0.0;
            if t.is_basic[j] == usize::MAX {
                t.x[j] = 0.0;
            }
        }
    }

    let mut phase2 = cost.clone();
    phase2.resize(ncols, 0.0);
    t.price(&phase2);
    match t.run(cap)? {
        Step::Optimal => {}
        Step::Unbounded => return Ok(LpOutcome::Unbounded),
    }
    t.refresh_basics(&rows, &rhs, &art_rows, &art_sign, n);

    // Recover model-space values.
    let mut xs = vec![0.0; n_model];
    for (v, &(l, _)) in bounds.iter().enumerate() {
        xs[v] = if col_of[v] == usize::MAX {
            l
        } else {
            t.value(col_of[v])
        };
    }
    // y (min form, scaled) = c_B B⁻¹, with B⁻¹ in the slack block.
    let mut duals = vec![0.0; model.constraints().len()];
    for (ci, &r) in row_of_con.iter().enumerate() {
        if r == usize::MAX {
            continue;
        }
        let mut y = 0.0;
        for i in 0..m {
            y += phase2[t.basis[i]] * t.a[i * ncols + n + r];
        }
        duals[ci] = sign * y * scale[r];
    }
    let mut reduced_costs: Vec<f64> = (0..n_model).map(|v| model.objective().coef(super::VarId(v))).collect();
    for (ci, con) in model.constraints().iter().enumerate() {
        for &(v, a) in con.lhs.terms() {
            reduced_costs[v.0] -= duals[ci] * a;
        }
    }
    let objective = model.objective().value(&xs);
    Ok(LpOutcome::Optimal(LpSolution {
        x: xs,
        objective,
        duals,
        reduced_costs,
        iterations: t.iterations,
    }))
}

fn start_value(lo: f64, hi: f64) -> f64 {
    if lo.is_finite() {
        lo
    } else if hi.is_finite() {
        hi
    } else {
        0.0
    }
}

enum Step {
    Optimal,
    Unbounded,
}

struct Tableau {
    m: usize,
    ncols: usize,
    /// Row-major `B⁻¹A`.
    a: Vec<f64>,
    basis: Vec<usize>,
    /// Row of a basic column, `usize::MAX` when nonbasic.
    is_basic: Vec<usize>,
    xb: Vec<f64>,
    /// Reduced costs of the current phase.
    d: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Values of nonbasic columns.
    x: Vec<f64>,
    iterations: usize,
}

impl Tableau {
    fn value(&self, j: usize) -> f64 {
        match self.is_basic[j] {
            usize::MAX => self.x[j],
            i => self.xb[i],
        }
    }

    fn price(&mut self, cost: &[f64]) {
        self.d.copy_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.a[i * self.ncols..(i + 1) * self.ncols];
                for (d, &a) in self.d.iter_mut().zip(row) {
                    *d -= cb * a;
                }
            }
        }
    }

    /// Entering column and direction, or `None` at optimality.
    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.ncols {
            if self.is_basic[j] != usize::MAX || self.hi[j] <= self.lo[j] {
                continue;
            }
            let dj = self.d[j];
            let dir = if dj < -COST_TOL && self.x[j] < self.hi[j] {
                1.0
            } else if dj > COST_TOL && self.x[j] > self.lo[j] {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|b| dj.abs() > b.2) {
                best = Some((j, dir, dj.abs()));
            }
        }
        best.map(|b| (b.0, b.1))
    }

    fn run(&mut self, cap: usize) -> Result<Step, LpError> {
        let mut streak = 0usize;
        loop {
            if self.iterations >= cap {
                return Err(LpError::IterationLimit(cap));
            }
            let bland = streak >= DEGENERATE_STREAK;
            let Some((j, dir)) = self.choose_entering(bland) else {
                return Ok(Step::Optimal);
            };
            self.iterations += 1;
            let mut theta = self.hi[j] - self.lo[j];
            let mut leave: Option<(usize, f64)> = None;
            let mut tiny_blocked = false;
            for i in 0..self.m {
                let alpha = self.a[i * self.ncols + j];
                if alpha.abs() <= PIVOT_TOL {
                    if alpha != 0.0 {
                        tiny_blocked = true;
                    }
                    continue;
                }
                let rate = -dir * alpha;
                let b = self.basis[i];
                let limit = if rate < 0.0 {
                    (self.xb[i] - self.lo[b]) / -rate
                } else {
                    (self.hi[b] - self.xb[i]) / rate
                };
                if !limit.is_finite() {
                    continue;
                }
                let limit = limit.max(0.0);
                let better = match leave {
                    None => limit < theta || !theta.is_finite(),
                    Some((r, _)) => {
                        if limit < theta - 1e-12 {
                            true
                        } else if limit <= theta + 1e-12 {
                            if bland {
                                b < self.basis[r]
                            } else {
                                alpha.abs() > self.a[r * self.ncols + j].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    theta = theta.min(limit);
                    leave = Some((i, rate));
                }
            }
            if !theta.is_finite() {
                if tiny_blocked {
                    return Err(LpError::Numerical);
                }
                return Ok(Step::Unbounded);
            }
            streak = if theta <= 1e-12 { streak + 1 } else { 0 };
            for i in 0..self.m {
                let alpha = self.a[i * self.ncols + j];
                if alpha != 0.0 {
                    self.xb[i] -= dir * theta * alpha;
                }
            }
            match leave {
                None => {
                    // Bound flip.
                    self.x[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
                }
                Some((r, rate)) => {
                    let entering_value = self.x[j] + dir * theta;
                    let out = self.basis[r];
                    self.x[out] = if rate < 0.0 { self.lo[out] } else { self.hi[out] };
                    self.pivot(r, j);
                    self.xb[r] = entering_value;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let nc = self.ncols;
        let p = self.a[r * nc + j];
        {
            let row = &mut self.a[r * nc..(r + 1) * nc];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[j] = 1.0;
        }
        let nz: Vec<usize> = (0..nc).filter(|&k| self.a[r * nc + k] != 0.0).collect();
        let pivot_row: Vec<f64> = nz.iter().map(|&k| self.a[r * nc + k]).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.a[i * nc + j];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.a[i * nc..(i + 1) * nc];
            for (&k, &pv) in nz.iter().zip(&pivot_row) {
                row[k] -= f * pv;
            }
            row[j] = 0.0;
        }
        let f = self.d[j];
        if f != 0.0 {
            for (&k, &pv) in nz.iter().zip(&pivot_row) {
                self.d[k] -= f * pv;
            }
            self.d[j] = 0.0;
        }
        let out = self.basis[r];
        self.is_basic[out] = usize::MAX;
        self.basis[r] = j;
        self.is_basic[j] = r;
    }

    /// Pivots basic artificials (at zero) out where a real column allows it.
    fn evict_artificials(&mut self, first_art: usize) {
        for r in 0..self.m {
            if self.basis[r] < first_art {
                continue;
            }
            let nc = self.ncols;
            let mut best: Option<(usize, f64)> = None;
            for k in 0..first_art {
                if self.is_basic[k] != usize::MAX {
                    continue;
                }
                let a = self.a[r * nc + k].abs();
                if a > 1e-7 && best.is_none_or(|b| a > b.1) {
                    best = Some((k, a));
                }
            }
            if let Some((k, _)) = best {
                let value = self.x[k];
                let out = self.basis[r];
                self.x[out] = 0.0;
                self.pivot(r, k);
                self.xb[r] = value;
            }
        }
    }

    /// Recomputes basic values as `B⁻¹(b − N·x_N)` to shed drift.
    fn refresh_basics(
        &mut self,
        rows: &[Vec<(usize, f64)>],
        rhs: &[f64],
        art_rows: &[usize],
        art_sign: &[f64],
        n: usize,
    ) {
        let m = self.m;
        let mut resid: Vec<f64> = rhs.to_vec();
        for i in 0..m {
            for &(j, a) in &rows[i] {
                if self.is_basic[j] == usize::MAX {
                    resid[i] -= a * self.x[j];
                }
            }
            if self.is_basic[n + i] == usize::MAX {
                resid[i] -= self.x[n + i];
            }
        }
        for (k, (&i, &s)) in art_rows.iter().zip(art_sign).enumerate() {
            let col = n + m + k;
            if self.is_basic[col] == usize::MAX {
                resid[i] -= s * self.x[col];
            }
        }
        for r in 0..m {
            let row = &self.a[r * self.ncols + n..r * self.ncols + n + m];
            self.xb[r] = row.iter().zip(&resid).map(|(b, v)| b * v).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{LinExpr, MilpModel, Relation, Sense};

    fn bounds(m: &MilpModel) -> Vec<(f64, f64)> {
        m.variables().iter().map(|v| (v.lb, v.ub)).collect()
    }

    fn solve(m: &MilpModel) -> LpOutcome {
        solve_relaxation(m, &bounds(m)).unwrap()
    }

    #[test]
    fn two_dimensional_vertex() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, f64::INFINITY).unwrap();
        let y = m.add_continuous("y", 0.0, f64::INFINITY).unwrap();
        m.add_constraint("cap", LinExpr::from(x).with(1.0, y), Relation::Le, 4.0).unwrap();
        m.add_constraint("xcap", LinExpr::from(x), Relation::Le, 2.0).unwrap();
        m.set_objective(Sense::Maximize, LinExpr::term(3.0, x).with(2.0, y));
        let LpOutcome::Optimal(s) = solve(&m) else { panic!() };
        assert!((s.objective - 10.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 2.0).abs() < 1e-9);
        // Duals: cap row 2, xcap row 1.
        assert!((s.duals[0] - 2.0).abs() < 1e-9, "{:?}", s.duals);
        assert!((s.duals[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_bound() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        m.add_constraint("c", LinExpr::from(x), Relation::Le, 5.0).unwrap();
        m.set_objective(Sense::Maximize, LinExpr::from(x));
        let LpOutcome::Optimal(s) = solve(&m) else { panic!() };
        assert_eq!(s.objective, 5.0);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        m.add_constraint("a", LinExpr::from(x), Relation::Ge, 1.0).unwrap();
        m.add_constraint("b", LinExpr::from(x), Relation::Le, 0.0).unwrap();
        assert_eq!(solve(&m), LpOutcome::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, f64::INFINITY).unwrap();
        let y = m.add_continuous("y", 0.0, f64::INFINITY).unwrap();
        m.add_constraint("c", LinExpr::from(x).with(-1.0, y), Relation::Le, 1.0).unwrap();
        m.set_objective(Sense::Maximize, LinExpr::from(x));
        assert_eq!(solve(&m), LpOutcome::Unbounded);
    }

    #[test]
    fn equality_rows_and_free_variables() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let y = m.add_continuous("y", -3.0, 3.0).unwrap();
        m.add_constraint("e", LinExpr::from(x).with(2.0, y), Relation::Eq, 1.0).unwrap();
        m.set_objective(Sense::Minimize, LinExpr::from(x));
        let LpOutcome::Optimal(s) = solve(&m) else { panic!() };
        assert!((s.objective + 5.0).abs() < 1e-9);
    }

    #[test]
    fn fixed_columns_are_substituted() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, 10.0).unwrap();
        let y = m.add_continuous("y", 0.0, 10.0).unwrap();
        m.add_constraint("c", LinExpr::from(x).with(1.0, y), Relation::Le, 8.0).unwrap();
        m.set_objective(Sense::Maximize, LinExpr::from(x).with(0.5, y));
        let LpOutcome::Optimal(s) = solve_relaxation(&m, &[(0.0, 10.0), (6.0, 6.0)]).unwrap() else {
            panic!()
        };
        assert_eq!(s.x, vec![2.0, 6.0]);
    }
}
