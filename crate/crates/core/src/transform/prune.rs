use super::interval::{bounds, DomainMap};
use super::normalize::tidy;
use crate::expr::LimitExpr;

/// Relative tolerance of the dominance test.
pub const DOMINANCE_TOL: f64 = 1e-9;

/// Removes `min`/`max` children that can never be selected on the domains
/// of `d`, then tidies, repeating until nothing changes.
///
/// Inside a `min`, a child whose lower bound reaches another child's upper
/// bound is dropped; `max` is the mirror image. When two children dominate
/// each other the later one in canonical order goes.
pub fn prune(e: &LimitExpr, d: &DomainMap) -> LimitExpr {
    let mut current = tidy(e);
    loop {
        let next = tidy(&prune_once(&current, d));
        if next == current {
            return current;
        }
        current = next;
    }
}

fn prune_once(e: &LimitExpr, d: &DomainMap) -> LimitExpr {
    match e {
        LimitExpr::Const(_) | LimitExpr::Var(_) => e.clone(),
        LimitExpr::Neg(x) => LimitExpr::neg(prune_once(x, d)),
        LimitExpr::Mul(c, x) => LimitExpr::mul(*c, prune_once(x, d)),
        LimitExpr::Add(xs) => LimitExpr::Add(xs.iter().map(|x| prune_once(x, d)).collect()),
        LimitExpr::Min(xs) => LimitExpr::min_of(survivors(xs, d, true)),
        LimitExpr::Max(xs) => LimitExpr::max_of(survivors(xs, d, false)),
    }
}

fn survivors(xs: &[LimitExpr], d: &DomainMap, is_min: bool) -> Vec<LimitExpr> {
    let children: Vec<LimitExpr> = xs.iter().map(|x| prune_once(x, d)).collect();
    // Orient everything as a min: for max, compare negated ranges.
    let ranges: Vec<(f64, f64)> = children
        .iter()
        .map(|c| {
            let b = bounds(c, d);
            if is_min {
                (b.lo, b.hi)
            } else {
                (-b.hi, -b.lo)
            }
        })
        .collect();
    let dominated = |j: usize, i: usize| {
        let (lo_j, _) = ranges[j];
        let (_, hi_i) = ranges[i];
        lo_j >= hi_i - DOMINANCE_TOL * hi_i.abs().max(1.0)
    };
    let mut kept: Vec<usize> = Vec::with_capacity(children.len());
    for j in 0..children.len() {
        if kept.iter().any(|&i| dominated(j, i)) {
            continue;
        }
        kept.retain(|&i| !dominated(i, j));
        kept.push(j);
    }
    kept.into_iter().map(|i| children[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::transform::interval::Interval;

    fn dom(pairs: &[(&str, f64, f64)]) -> DomainMap {
        pairs
            .iter()
            .map(|(n, lo, hi)| (n.to_string(), Interval::new(*lo, *hi).unwrap()))
            .collect()
    }

    #[test]
    fn dominated_branch_becomes_constant() {
        let d = dom(&[("P_1", 0.0, 400.0)]);
        let e = parse("min(100, -50*P_1+22500)").unwrap();
        assert_eq!(prune(&e, &d), LimitExpr::Const(100.0));
    }

    #[test]
    fn disjoint_max_keeps_variable() {
        let d = dom(&[("x", 10.0, 20.0)]);
        assert_eq!(prune(&parse("max(5, x)").unwrap(), &d), LimitExpr::var("x"));
    }

    #[test]
    fn three_plant_limit_collapses_inner_block() {
        let d = dom(&[("P_1", 0.0, 400.0), ("N_2", 0.0, 10.0), ("N_3", 0.0, 10.0)]);
        let e = parse(
            "min(max(min(-50*P_1+22500,100), min(-50*P_1+30000,50), 0) + (-50*N_2 + -100*N_3), 0) + 915",
        )
        .unwrap();
        let p = prune(&e, &d);
        assert_eq!(p.to_string(), "915 + min(0, 100 + -100*N_3 + -50*N_2)");
        assert!(p.node_count() < e.node_count());
    }

    #[test]
    fn overlapping_ranges_are_left_alone() {
        let d = dom(&[("P_m", 0.0, 3000.0)]);
        let e = parse("max(1000, min(-P_m+6000, -2*P_m+7000, -4*P_m+11000))").unwrap();
        let p = prune(&e, &d);
        assert_eq!(p, tidy(&e));
        assert_eq!(p.node_count(), e.node_count());
    }

    #[test]
    fn ties_drop_the_later_sibling() {
        let d = dom(&[("x", 1.0, 1.0), ("y", 1.0, 1.0)]);
        assert_eq!(prune(&parse("min(y, x)").unwrap(), &d), LimitExpr::var("x"));
    }

    #[test]
    fn is_idempotent() {
        let d = dom(&[("a", -5.0, 5.0), ("b", 0.0, 1.0)]);
        let e = parse("max(min(a, 10, b + 20), -7, 2*b - 3)").unwrap();
        let once = prune(&e, &d);
        assert_eq!(prune(&once, &d), once);
    }
}
