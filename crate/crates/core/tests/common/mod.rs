//! Random generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stablim::expr::LimitExpr;
use stablim::milp::{LinExpr, MilpModel, Relation, Sense};
use stablim::transform::{DomainMap, Interval};

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const VAR_NAMES: [&str; 4] = ["a", "b", "c", "d"];

/// Random limit expression of at most `depth` levels over `vars`.
pub fn random_expr(rng: &mut TestRng, depth: usize, vars: &[&str]) -> LimitExpr {
    if depth <= 1 || rng.gen_bool(0.2) {
        return if rng.gen_bool(0.4) {
            LimitExpr::Const(rng.gen_range(-100..=100) as f64)
        } else {
            LimitExpr::var(vars[rng.gen_range(0..vars.len())])
        };
    }
    let kids = |rng: &mut TestRng| -> Vec<LimitExpr> {
        let n = rng.gen_range(2..=3);
        (0..n).map(|_| random_expr(rng, depth - 1, vars)).collect()
    };
    match rng.gen_range(0..10) {
        0 => LimitExpr::neg(random_expr(rng, depth - 1, vars)),
        1 => {
            let mut c = rng.gen_range(-3.0..3.0_f64);
            if c.abs() < 0.1 {
                c = 1.5;
            }
            LimitExpr::mul((c * 4.0).round() / 4.0, random_expr(rng, depth - 1, vars))
        }
        2 | 3 => LimitExpr::Add(kids(rng)),
        4..=6 => LimitExpr::Min(kids(rng)),
        _ => LimitExpr::Max(kids(rng)),
    }
}

/// Random finite domains for `vars`.
pub fn random_domains(rng: &mut TestRng, vars: &[&str]) -> DomainMap {
    vars.iter()
        .map(|v| {
            let lo = rng.gen_range(-50..=50) as f64;
            let width = rng.gen_range(0..=100) as f64;
            (v.to_string(), Interval::new(lo, lo + width).unwrap())
        })
        .collect()
}

pub fn random_binding(rng: &mut TestRng, d: &DomainMap, vars: &[&str]) -> HashMap<String, f64> {
    vars.iter()
        .map(|v| {
            let i = d.domain(v);
            let x = if i.lo == i.hi {
                i.lo
            } else {
                rng.gen_range(i.lo..=i.hi)
            };
            (v.to_string(), x)
        })
        .collect()
}

/// Evaluator written independently of the library: iterative post-order
/// over an explicit stack.
pub fn naive_eval(e: &LimitExpr, b: &HashMap<String, f64>) -> f64 {
    enum Frame<'a> {
        Enter(&'a LimitExpr),
        Exit(&'a LimitExpr),
    }
    let mut stack = vec![Frame::Enter(e)];
    let mut values: Vec<f64> = Vec::new();
    while let Some(f) = stack.pop() {
        match f {
            Frame::Enter(n) => {
                stack.push(Frame::Exit(n));
                for c in n.children().iter().rev() {
                    stack.push(Frame::Enter(c));
                }
            }
            Frame::Exit(n) => {
                let k = n.children().len();
                let args: Vec<f64> = values.split_off(values.len() - k);
                values.push(match n {
                    LimitExpr::Const(c) => *c,
                    LimitExpr::Var(v) => b[v],
                    LimitExpr::Neg(_) => -args[0],
                    LimitExpr::Mul(c, _) => c * args[0],
                    LimitExpr::Add(_) => args.iter().sum(),
                    LimitExpr::Min(_) => args.iter().cloned().fold(f64::INFINITY, f64::min),
                    LimitExpr::Max(_) => args.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                });
            }
        }
    }
    values[0]
}

/// `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

/// Random mixed-binary model within the stated size limits.
pub fn random_milp(rng: &mut TestRng, max_bin: usize, max_cont: usize, max_rows: usize) -> MilpModel {
    let mut m = MilpModel::new("random");
    let nb = rng.gen_range(1..=max_bin);
    let nc = rng.gen_range(1..=max_cont);
    let mut ids = Vec::new();
    for i in 0..nb {
        ids.push(m.add_binary(format!("b{i}")).unwrap());
    }
    for i in 0..nc {
        let lo = if rng.gen_bool(0.5) { 0.0 } else { -(rng.gen_range(0..=5) as f64) };
        let hi = lo + rng.gen_range(1..=10) as f64;
        ids.push(m.add_continuous(format!("x{i}"), lo, hi).unwrap());
    }
    let rows = rng.gen_range(1..=max_rows);
    for r in 0..rows {
        let mut e = LinExpr::new();
        for &v in &ids {
            if rng.gen_bool(0.3) {
                e.add_term(rng.gen_range(-5..=5) as f64, v);
            }
        }
        let rel = match rng.gen_range(0..6) {
            0 => Relation::Eq,
            1 | 2 => Relation::Ge,
            _ => Relation::Le,
        };
        let rhs = rng.gen_range(-6..=10) as f64;
        m.add_constraint(format!("r{r}"), e, rel, rhs).unwrap();
    }
    let obj: LinExpr = ids
        .iter()
        .map(|&v| (rng.gen_range(-4..=6) as f64, v))
        .collect();
    let sense = if rng.gen_bool(0.5) { Sense::Maximize } else { Sense::Minimize };
    m.set_objective(sense, obj);
    m
}

/// Random LP `max c·x, A x <= b, 0 <= x <= u` with `b >= 0`.
pub fn random_lp(rng: &mut TestRng) -> MilpModel {
    let mut m = MilpModel::new("lp");
    let n = rng.gen_range(2..=12);
    let rows = rng.gen_range(1..=12);
    let ids: Vec<_> = (0..n)
        .map(|i| {
            let u = if rng.gen_bool(0.7) { rng.gen_range(1.0..20.0) } else { f64::INFINITY };
            m.add_continuous(format!("x{i}"), 0.0, u).unwrap()
        })
        .collect();
    for r in 0..rows {
        let e: LinExpr = ids.iter().map(|&v| (rng.gen_range(0.0..5.0), v)).collect();
        m.add_constraint(format!("r{r}"), e, Relation::Le, rng.gen_range(1.0..50.0)).unwrap();
    }
    let obj: LinExpr = ids.iter().map(|&v| (rng.gen_range(-2.0..6.0), v)).collect();
    m.set_objective(Sense::Maximize, obj);
    m
}
