use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::model::{MilpModel, Sense, VarKind};
use super::simplex::{solve_relaxation, LpError, LpOutcome};

pub const FEASIBILITY_TOL: f64 = 1e-6;
pub const INTEGRALITY_TOL: f64 = 1e-6;
pub const DEFAULT_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    Timeout,
}

/// Stopping rules for branch-and-bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub time: Option<Duration>,
    pub nodes: Option<usize>,
    /// Relative gap at which the search stops.
    pub gap: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            time: None,
            nodes: None,
            gap: DEFAULT_GAP,
        }
    }
}

impl Limits {
    /// No time or node limit and a zero gap.
    pub fn exact() -> Self {
        Limits {
            gap: 0.0,
            ..Limits::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: Status,
    /// Objective of the incumbent, in the model's sense.
    pub objective: Option<f64>,
    /// Value per variable id; empty without an incumbent.
    pub values: Vec<f64>,
    /// Proved bound on the optimum, in the model's sense.
    pub best_bound: Option<f64>,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub wall_time: Duration,
}

impl SolveResult {
    pub(crate) fn empty(status: Status) -> Self {
        SolveResult {
            status,
            objective: None,
            values: Vec::new(),
            best_bound: None,
            nodes: 0,
            lp_iterations: 0,
            wall_time: Duration::ZERO,
        }
    }

    /// Relative gap between incumbent and bound.
    pub fn gap(&self) -> Option<f64> {
        match (self.objective, self.best_bound) {
            (Some(o), Some(b)) => Some(relative_gap(o, b)),
            _ => None,
        }
    }

    pub fn value(&self, v: super::VarId) -> f64 {
        self.values[v.0]
    }
}

fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    (incumbent - bound).abs() / incumbent.abs().max(1.0)
}

struct Node {
    /// Lower bound in minimization form.
    bound: f64,
    id: usize,
    fixings: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap: the smallest bound, then the oldest node, comes out first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Branch-and-bound over the binary variables of `model`.
///
/// Nodes are taken best-bound first (oldest first on ties); the most
/// fractional binary is branched on (lowest id on ties) and the down
/// branch is created first. Integral LP solutions are polished by fixing
/// every binary and re-solving.
pub fn solve_milp(model: &MilpModel, limits: &Limits) -> Result<SolveResult, LpError> {
    let start = Instant::now();
    let sign = match model.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let base: Vec<(f64, f64)> = model.variables().iter().map(|v| (v.lb, v.ub)).collect();
    let binaries: Vec<usize> = model.binaries().map(|v| v.0).collect();

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        id: 0,
        fixings: Vec::new(),
    });
    let mut next_id = 1;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut nodes = 0usize;
    let mut iterations = 0usize;
    let mut timed_out = false;
    let mut root_unbounded = false;

    while let Some(node) = heap.peek() {
        let inc = incumbent.as_ref().map(|i| i.0);
        if let Some(inc) = inc {
            if node.bound >= inc - limits.gap * inc.abs().max(1.0) - 1e-9 {
                // Everything left is within the requested gap.
                break;
            }
        }
        if limits.nodes.is_some_and(|n| nodes >= n)
            || limits.time.is_some_and(|t| start.elapsed() >= t)
        {
            timed_out = true;
            break;
        }
        let node = heap.pop().expect("peeked");
        nodes += 1;
        let mut bounds = base.clone();
        for &(v, val) in &node.fixings {
            bounds[v] = (val, val);
        }
        let sol = match solve_relaxation(model, &bounds)? {
            LpOutcome::Optimal(s) => s,
            LpOutcome::Infeasible => continue,
            LpOutcome::Unbounded => {
                if node.fixings.is_empty() {
                    root_unbounded = true;
                    break;
                }
                continue;
            }
        };
        iterations += sol.iterations;
        let obj = sign * sol.objective;
        if let Some(inc) = inc {
            if obj >= inc - 1e-9 * inc.abs().max(1.0) {
                continue;
            }
        }
        let mut branch: Option<(usize, f64)> = None;
        for &b in &binaries {
            let v = sol.x[b];
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > INTEGRALITY_TOL && branch.is_none_or(|(_, f)| frac > f + 1e-12) {
                branch = Some((b, frac));
            }
        }
        match branch {
            None => {
                let (obj, x) = polish(model, &bounds, &binaries, sol.x, &mut iterations)?
                    .map(|x| (sign * model.objective_value(&x), x))
                    .unwrap_or((obj, Vec::new()));
                if !x.is_empty() && incumbent.as_ref().is_none_or(|i| obj < i.0) {
                    incumbent = Some((obj, x));
                }
            }
            Some((b, _)) => {
                for val in [0.0, 1.0] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((b, val));
                    heap.push(Node {
                        bound: obj,
                        id: next_id,
                        fixings,
                    });
                    next_id += 1;
                }
            }
        }
    }

    let wall_time = start.elapsed();
    if root_unbounded {
        return Ok(SolveResult {
            nodes,
            lp_iterations: iterations,
            wall_time,
            ..SolveResult::empty(Status::Unbounded)
        });
    }
    let open_bound = heap.peek().map(|n| n.bound);
    Ok(match incumbent {
        Some((obj, x)) => {
            let bound = open_bound.map_or(obj, |b| b.min(obj));
            SolveResult {
                status: if timed_out {
                    Status::Timeout
                } else {
                    Status::Optimal
                },
                objective: Some(sign * obj),
                values: x,
                best_bound: Some(sign * bound),
                nodes,
                lp_iterations: iterations,
                wall_time,
            }
        }
        None => SolveResult {
            best_bound: open_bound.map(|b| sign * b),
            nodes,
            lp_iterations: iterations,
            wall_time,
            ..SolveResult::empty(if timed_out {
                Status::Timeout
            } else {
                Status::Infeasible
            })
        },
    })
}

/// Rounds the binaries of an integral LP point, fixes them and re-solves so
/// the continuous part is exact for that assignment.
fn polish(
    model: &MilpModel,
    bounds: &[(f64, f64)],
    binaries: &[usize],
    x: Vec<f64>,
    iterations: &mut usize,
) -> Result<Option<Vec<f64>>, LpError> {
    if binaries.is_empty() {
        return Ok(Some(x));
    }
    let mut fixed = bounds.to_vec();
    for &b in binaries {
        let v = x[b].round();
        fixed[b] = (v, v);
    }
    Ok(match solve_relaxation(model, &fixed)? {
        LpOutcome::Optimal(s) => {
            *iterations += s.iterations;
            let mut out = s.x;
            for &b in binaries {
                out[b] = out[b].round();
            }
            Some(out)
        }
        // Rounding pushed the point out; keep the LP point, which is within
        // tolerance.
        _ => {
            let mut out = x;
            for &b in binaries {
                out[b] = out[b].round();
            }
            let (viol, _) = model.max_violation(&out);
            (viol <= FEASIBILITY_TOL).then_some(out)
        }
    })
}

/// Solves the relaxation with the model's own bounds, ignoring integrality.
pub fn solve_lp(model: &MilpModel) -> Result<SolveResult, LpError> {
    let start = Instant::now();
    let bounds: Vec<(f64, f64)> = model.variables().iter().map(|v| (v.lb, v.ub)).collect();
    Ok(match solve_relaxation(model, &bounds)? {
        LpOutcome::Optimal(s) => SolveResult {
            status: Status::Optimal,
            objective: Some(s.objective),
            best_bound: Some(s.objective),
            values: s.x,
            nodes: 1,
            lp_iterations: s.iterations,
            wall_time: start.elapsed(),
        },
        LpOutcome::Infeasible => SolveResult::empty(Status::Infeasible),
        LpOutcome::Unbounded => SolveResult::empty(Status::Unbounded),
    })
}

/// True when every binary variable is integral in `x`.
pub fn is_integral(model: &MilpModel, x: &[f64]) -> bool {
    model
        .variables()
        .iter()
        .zip(x)
        .filter(|(v, _)| v.kind == VarKind::Binary)
        .all(|(_, &val)| (val - val.round()).abs() <= INTEGRALITY_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{LinExpr, Relation};

    #[test]
    fn fractional_relaxation_rounds_down() {
        let mut m = MilpModel::new("t");
        let a = m.add_binary("x1").unwrap();
        let b = m.add_binary("x2").unwrap();
        m.add_constraint("c", LinExpr::from(a).with(1.0, b), Relation::Le, 1.5).unwrap();
        m.set_objective(Sense::Maximize, LinExpr::from(a).with(1.0, b));
        let lp = solve_lp(&m).unwrap();
        assert_eq!(lp.objective, Some(1.5));
        let r = solve_milp(&m, &Limits::exact()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert_eq!(r.objective, Some(1.0));
        assert!(is_integral(&m, &r.values));
    }

    #[test]
    fn conflicting_fixings_are_infeasible() {
        let mut m = MilpModel::new("t");
        let a = m.add_binary("x1").unwrap();
        let b = m.add_binary("x2").unwrap();
        m.add_constraint("sum", LinExpr::from(a).with(1.0, b), Relation::Eq, 1.0).unwrap();
        m.add_constraint("a", LinExpr::from(a), Relation::Eq, 1.0).unwrap();
        m.add_constraint("b", LinExpr::from(b), Relation::Eq, 1.0).unwrap();
        assert_eq!(solve_milp(&m, &Limits::default()).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn node_limit_reports_timeout() {
        let mut m = MilpModel::new("t");
        let mut e = LinExpr::new();
        let mut w = LinExpr::new();
        for i in 0..6 {
            let b = m.add_binary(format!("b{i}")).unwrap();
            e.add_term(1.0 + i as f64, b);
            w.add_term(2.0 + (i % 3) as f64, b);
        }
        m.add_constraint("w", w, Relation::Le, 7.5).unwrap();
        m.set_objective(Sense::Maximize, e);
        let r = solve_milp(
            &m,
            &Limits {
                nodes: Some(1),
                ..Limits::exact()
            },
        )
        .unwrap();
        assert_eq!(r.status, Status::Timeout);
        assert_eq!(r.nodes, 1);
    }
}
