mod common;

use common::*;
use stablim::milp::{
    enumerate_oracle, import_lp, export_lp, solve_lp, solve_milp, Limits, Relation, Status,
    FEASIBILITY_TOL,
};

#[test]
fn branch_and_bound_matches_enumeration() {
    let mut r = rng(11);
    let mut feasible = 0;
    for case in 0..100 {
        let m = random_milp(&mut r, 10, 30, 40);
        let bb = solve_milp(&m, &Limits::exact()).unwrap();
        let en = enumerate_oracle(&m).unwrap();
        assert_eq!(bb.status, en.status, "case {case}");
        if bb.status == Status::Optimal {
            feasible += 1;
            let (a, b) = (bb.objective.unwrap(), en.objective.unwrap());
            assert!((a - b).abs() <= 1e-6, "case {case}: {a} vs {b}");
            let (viol, frac) = m.max_violation(&bb.values);
            assert!(viol <= FEASIBILITY_TOL && frac <= 1e-6, "case {case}");
        }
    }
    assert!(feasible >= 20, "only {feasible} feasible cases");
}

#[test]
fn lp_duality_gap_is_tiny() {
    let mut r = rng(12);
    for case in 0..100 {
        let m = random_lp(&mut r);
        let stablim::milp::LpOutcome::Optimal(s) = stablim::milp::solve_relaxation(
            &m,
            &m.variables().iter().map(|v| (v.lb, v.ub)).collect::<Vec<_>>(),
        )
        .unwrap() else {
            panic!("case {case} not optimal");
        };
        // Dual of max c·x, Ax <= b, 0 <= x <= u computed from the row duals.
        let mut dual = 0.0;
        for (c, &y) in m.constraints().iter().zip(&s.duals) {
            assert_eq!(c.relation, Relation::Le);
            assert!(y >= -1e-9, "case {case}: negative dual {y}");
            dual += c.rhs * y;
        }
        for (j, v) in m.variables().iter().enumerate() {
            let mut r = m.objective().coef(stablim::milp::VarId(j));
            for (c, &y) in m.constraints().iter().zip(&s.duals) {
                r -= y * c.lhs.coef(stablim::milp::VarId(j));
            }
            if r > 1e-9 {
                assert!(v.ub.is_finite(), "case {case}: dual infeasible");
                dual += r * v.ub;
            }
        }
        assert!((dual - s.objective).abs() <= 1e-7 * s.objective.abs().max(1.0), "case {case}: primal {} dual {dual}", s.objective);
    }
}

#[test]
fn solves_are_deterministic() {
    let mut r = rng(13);
    for _ in 0..20 {
        let m = random_milp(&mut r, 8, 10, 12);
        let a = solve_milp(&m, &Limits::exact()).unwrap();
        let b = solve_milp(&m, &Limits::exact()).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.objective, b.objective);
    }
}

#[test]
fn knapsack_matches_oracle_and_round_trips() {
    let mut r = rng(14);
    for _ in 0..10 {
        let mut m = stablim::milp::MilpModel::new("knapsack");
        let mut value = stablim::milp::LinExpr::new();
        let mut weight = stablim::milp::LinExpr::new();
        let mut total = 0.0;
        for i in 0..8 {
            use rand::Rng;
            let b = m.add_binary(format!("item{i}")).unwrap();
            let w = r.gen_range(1..=20) as f64;
            total += w;
            value.add_term(r.gen_range(1..=30) as f64, b);
            weight.add_term(w, b);
        }
        m.add_constraint("capacity", weight, Relation::Le, (total / 2.0).floor()).unwrap();
        m.set_objective(stablim::milp::Sense::Maximize, value);
        let bb = solve_milp(&m, &Limits::exact()).unwrap();
        let en = enumerate_oracle(&m).unwrap();
        assert_eq!(bb.objective, en.objective);
        let back = import_lp(&export_lp(&m)).unwrap();
        assert_eq!(solve_milp(&back, &Limits::exact()).unwrap().objective, bb.objective);
        assert!(solve_lp(&m).unwrap().objective.unwrap() >= bb.objective.unwrap() - 1e-9);
    }
}
