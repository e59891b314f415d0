use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use super::bnb::{SolveResult, Status};
use super::model::{MilpModel, Sense};
use super::simplex::{solve_relaxation, LpError, LpOutcome};

/// Most free binaries [`enumerate_oracle`] accepts.
pub const ORACLE_MAX_BINARIES: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("model has {0} free binaries; the oracle enumerates at most {ORACLE_MAX_BINARIES}")]
    TooManyBinaries(usize),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Exact optimum by solving the continuous LP for every assignment of the
/// binaries that are not already fixed by their bounds.
///
/// Assignments are solved in parallel and reduced in enumeration order, so
/// ties go to the lowest assignment index regardless of thread count.
pub fn enumerate_oracle(model: &MilpModel) -> Result<SolveResult, OracleError> {
    let start = Instant::now();
    let base: Vec<(f64, f64)> = model.variables().iter().map(|v| (v.lb, v.ub)).collect();
    let free: Vec<usize> = model
        .binaries()
        .map(|v| v.0)
        .filter(|&b| base[b].0 < base[b].1)
        .collect();
    if free.len() > ORACLE_MAX_BINARIES {
        return Err(OracleError::TooManyBinaries(free.len()));
    }
    let sign = match model.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let count = 1usize << free.len();
    let acc = (0u64..count as u64)
        .into_par_iter()
        .map(|mask| {
            let mut bounds = base.clone();
            for (k, &b) in free.iter().enumerate() {
                let v = ((mask >> k) & 1) as f64;
                bounds[b] = (v, v);
            }
            Acc::single(mask, sign, solve_relaxation(model, &bounds))
        })
        .reduce(Acc::default, Acc::merge);
    if let Some((_, e)) = acc.error {
        return Err(e.into());
    }
    if acc.unbounded {
        return Ok(SolveResult {
            nodes: count,
            ..SolveResult::empty(Status::Unbounded)
        });
    }
    let iterations = acc.iterations;
    let best = acc.best.map(|(obj, _, x)| (obj, x));
    let wall_time = start.elapsed();
    Ok(match best {
        Some((obj, x)) => SolveResult {
            status: Status::Optimal,
            objective: Some(sign * obj),
            best_bound: Some(sign * obj),
            values: x,
            nodes: count,
            lp_iterations: iterations,
            wall_time,
        },
        None => SolveResult {
            nodes: count,
            lp_iterations: iterations,
            wall_time,
            ..SolveResult::empty(Status::Infeasible)
        },
    })
}

/// Partial reduction over a range of assignments. Merging keeps the lowest
/// assignment index on ties, so the result does not depend on the split.
#[derive(Default)]
struct Acc {
    best: Option<(f64, u64, Vec<f64>)>,
    unbounded: bool,
    error: Option<(u64, LpError)>,
    iterations: usize,
}

impl Acc {
    fn single(mask: u64, sign: f64, outcome: Result<LpOutcome, LpError>) -> Acc {
        let mut acc = Acc::default();
        match outcome {
            Ok(LpOutcome::Optimal(s)) => {
                acc.iterations = s.iterations;
                acc.best = Some((sign * s.objective, mask, s.x));
            }
            Ok(LpOutcome::Infeasible) => {}
            Ok(LpOutcome::Unbounded) => acc.unbounded = true,
            Err(e) => acc.error = Some((mask, e)),
        }
        acc
    }

    fn merge(self, other: Acc) -> Acc {
        let best = match (self.best, other.best) {
            (Some(a), Some(b)) => {
                if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                    Some(b)
                } else {
                    Some(a)
                }
            }
            (a, b) => a.or(b),
        };
        let error = match (self.error, other.error) {
            (Some(a), Some(b)) => Some(if b.0 < a.0 { b } else { a }),
            (a, b) => a.or(b),
        };
        Acc {
            best,
            unbounded: self.unbounded || other.unbounded,
            error,
            iterations: self.iterations + other.iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve_lp, LinExpr, Relation};

    #[test]
    fn no_binaries_matches_lp() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, 3.0).unwrap();
        let y = m.add_continuous("y", 0.0, 3.0).unwrap();
        m.add_constraint("c", LinExpr::from(x).with(2.0, y), Relation::Le, 4.0).unwrap();
        m.set_objective(Sense::Maximize, LinExpr::from(x).with(1.0, y));
        let a = enumerate_oracle(&m).unwrap();
        let b = solve_lp(&m).unwrap();
        assert_eq!(a.objective, b.objective);
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn every_assignment_infeasible() {
        let mut m = MilpModel::new("t");
        let a = m.add_binary("a").unwrap();
        let b = m.add_binary("b").unwrap();
        m.add_constraint("c", LinExpr::from(a).with(1.0, b), Relation::Eq, 0.5).unwrap();
        assert_eq!(enumerate_oracle(&m).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn refuses_large_models() {
        let mut m = MilpModel::new("t");
        for i in 0..21 {
            m.add_binary(format!("b{i}")).unwrap();
        }
        assert_eq!(enumerate_oracle(&m).unwrap_err(), OracleError::TooManyBinaries(21));
        // Fixed binaries do not count.
        for i in 0..12 {
            m.set_bounds(crate::milp::VarId(i), 1.0, 1.0).unwrap();
        }
        assert!(enumerate_oracle(&m).is_ok());
    }
}
