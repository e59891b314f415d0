use super::*;
use crate::grid::{Effect, GridSnapshot, LimitSide, PerStep};
use crate::milp::{enumerate_oracle, Limits};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TWO_ZONE: &str = include_str!("../../tests/fixtures/two_zone.json");
const DEFICIT: &str = include_str!("../../tests/fixtures/deficit.json");

fn snapshot(text: &str) -> GridSnapshot {
    GridSnapshot::from_json(text).unwrap()
}

fn limits() -> Limits {
    Limits::default()
}

/// Two units forced at 1000 and 600 MW in the south zone, one FCPL each.
fn forced_pair() -> GridSnapshot {
    snapshot(
        r#"{
        "time": {"durations": [3600]},
        "zones": [{"id": "S", "south": true, "net_load": 500}],
        "plants": [{"id": "A", "zone": "S"}, {"id": "B", "zone": "S"}],
        "generators": [
            {"id": "A1", "plant": "A", "commit_order": 1, "pmin": 1000, "pmax": 1000, "forced": true},
            {"id": "B1", "plant": "B", "commit_order": 1, "pmin": 600, "pmax": 600, "forced": true}
        ],
        "fcpl_sets": [
            {"id": "lossA", "generators": ["A1"]},
            {"id": "lossB", "generators": ["B1"]}
        ],
        "reserves": [{"id": "10S"}, {"id": "10NS"}, {"id": "30NS"}]
    }"#,
    )
}

#[test]
fn reserve_formulas() {
    let s = forced_pair();
    for (r, want) in [
        (ReserveKind::Spin10, 250.0),
        (ReserveKind::NonSpin10, 1000.0),
        (ReserveKind::NonSpin30, 1300.0),
    ] {
        let rep = solve_adequacy(&s, r, 0, &limits()).unwrap();
        assert_eq!(rep.required, Some(want), "{r}");
        assert_eq!(rep.margin, Some(1600.0 - 500.0 - want), "{r}");
        assert_eq!(rep.worst.as_ref().unwrap().id.as_str(), "lossA");
        assert_eq!(rep.worst.as_ref().unwrap().mw, 1000.0);
        assert_eq!(rep.second.as_ref().unwrap().mw, 600.0);
    }
}

#[test]
fn two_zone_matches_oracle() {
    let s = snapshot(TWO_ZONE);
    let built = build_adequacy(&s, ReserveKind::NonSpin10, 0).unwrap();
    assert!(built.model.num_binaries() <= 6);
    let milp = solve_milp(&built.model, &Limits::exact()).unwrap();
    let oracle = enumerate_oracle(&built.model).unwrap();
    let (a, b) = (milp.objective.unwrap(), oracle.objective.unwrap());
    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    // Splitting 800 MW evenly minimizes the worst loss: 800 - 600 - 400.
    assert!((a + 200.0).abs() < 1e-6);
}

#[test]
fn monitor_margins_follow_net_load() {
    let s = snapshot(TWO_ZONE);
    let rep = run_monitor(&s, &[ReserveKind::NonSpin10], &[0, 1, 2], 2, &limits());
    let margins: Vec<f64> = rep.reports.iter().map(|r| r.margin.unwrap()).collect();
    assert_eq!(rep.reports.len(), 3);
    for (m, want) in margins.iter().zip([-200.0, -100.0, 0.0]) {
        assert!((m - want).abs() < 1e-6, "{margins:?}");
    }
    let statuses: Vec<_> = rep.reports.iter().map(|r| r.status).collect();
    assert_eq!(
        statuses,
        [AdequacyStatus::Deficit, AdequacyStatus::Deficit, AdequacyStatus::Adequate]
    );
}

#[test]
fn inactive_reserves_give_no_reports() {
    let s = snapshot(TWO_ZONE);
    let rep = run_monitor(&s, &[ReserveKind::Spin10, ReserveKind::NonSpin30], &[0, 1, 2], 1, &limits());
    assert!(rep.reports.is_empty());
    assert!(matches!(
        build_adequacy(&s, ReserveKind::Spin10, 0),
        Err(AdequacyError::ReserveInactive { .. })
    ));
}

#[test]
fn monitor_is_deterministic() {
    let s = snapshot(DEFICIT);
    let one = run_monitor(&s, &ReserveKind::ALL, &[0, 1], 1, &limits()).to_json();
    let eight = run_monitor(&s, &ReserveKind::ALL, &[0, 1], 8, &limits()).to_json();
    assert_eq!(one, eight);
}

/// Random fleets of up to eight FCPL sets; the selected worst and second
/// worst must be the two largest sets by dispatched power.
#[test]
fn fcpl_selection_is_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..40 {
        let n_gen = rng.gen_range(2..=6);
        let n_sets = rng.gen_range(2..=8);
        let mut gens = Vec::new();
        for g in 0..n_gen {
            let pmax = rng.gen_range(1..=20) as f64 * 50.0;
            let forced = rng.gen_bool(0.5);
            let pmin = if forced { pmax * rng.gen_range(0.2..1.0) } else { 0.0 };
            gens.push(serde_json::json!({
                "id": format!("g{g}"), "plant": "A", "commit_order": g,
                "pmin": pmin, "pmax": pmax, "forced": forced
            }));
        }
        let mut sets = Vec::new();
        for f in 0..n_sets {
            let members: Vec<String> = (0..n_gen)
                .filter(|_| rng.gen_bool(0.4))
                .map(|g| format!("g{g}"))
                .collect();
            let members = if members.is_empty() { vec![format!("g{}", f % n_gen)] } else { members };
            sets.push(serde_json::json!({"id": format!("f{f}"), "generators": members}));
        }
        let v = serde_json::json!({
            "time": {"durations": [3600]},
            "zones": [{"id": "S", "south": true, "net_load": rng.gen_range(0..2000)}],
            "plants": [{"id": "A", "zone": "S"}],
            "generators": gens,
            "gas_plants": [{"id": "G", "zone": "S", "max": 3000}],
            "fcpl_sets": sets,
            "reserves": [{"id": "30NS"}]
        });
        let s = GridSnapshot::from_json(&v.to_string()).unwrap();
        let rep = solve_adequacy(&s, ReserveKind::NonSpin30, 0, &limits()).unwrap();
        let power = |id: &str| -> f64 {
            let set = s.fcpl_sets.iter().find(|f| f.id.as_str() == id).unwrap();
            set.generators.iter().map(|g| rep.dispatch[&format!("p[{g}]")]).sum()
        };
        let mut all: Vec<f64> = s.fcpl_sets.iter().map(|f| power(f.id.as_str())).collect();
        all.sort_by(|a, b| b.total_cmp(a));
        let worst = rep.worst.as_ref().unwrap();
        let second = rep.second.as_ref().unwrap();
        assert_ne!(worst.id, second.id, "case {case}");
        assert!((power(worst.id.as_str()) - all[0]).abs() < 1e-6, "case {case}");
        assert!((power(second.id.as_str()) - all[1]).abs() < 1e-6, "case {case}");
        assert!(worst.mw >= second.mw - 1e-9);
        let required = rep.required.unwrap();
        assert!((required - (all[0] + 0.5 * all[1])).abs() < 1e-6, "case {case}");
    }
}

/// Margins of every monitored reserve once the effects of `chosen` are
/// applied to the snapshot directly.
fn margins_with(s: &GridSnapshot, t: usize, chosen: &[usize]) -> Vec<f64> {
    let mut s = s.clone();
    let mut replaced: Vec<(String, LimitSide, Vec<String>)> = Vec::new();
    for &i in chosen {
        for e in s.remedial_actions[i].effects.clone() {
            match e {
                Effect::AddZonePower { zone, mw } | Effect::ShedLoad { zone, mw } => {
                    let z = s.zones.iter_mut().find(|z| z.id == zone).unwrap();
                    let load = z.net_load.at(t) - mw;
                    let mut v = z.net_load.values();
                    v.resize(s.time.len(), *v.last().unwrap());
                    v[t] = load;
                    z.net_load = PerStep::Steps(v);
                }
                Effect::ScaleLimit { link, side, limit } => {
                    match replaced.iter_mut().find(|(l, sd, _)| *l == link.as_str() && *sd == side) {
                        Some(entry) => entry.2.push(limit),
                        None => replaced.push((link.to_string(), side, vec![limit])),
                    }
                }
                Effect::DropReserve { reserve } => {
                    for f in &mut s.fcpl_sets {
                        let keep: Vec<ReserveKind> = if f.reserves.is_empty() {
                            ReserveKind::ALL.to_vec()
                        } else {
                            f.reserves.clone()
                        };
                        f.reserves = keep.into_iter().filter(|r| *r != reserve).collect();
                        if f.reserves.is_empty() {
                            f.steps = Some(vec![]);
                        }
                    }
                }
            }
        }
    }
    for (link, side, limits) in replaced {
        let l = s.links.iter_mut().find(|l| l.id.as_str() == link).unwrap();
        let text = if limits.len() == 1 {
            limits[0].clone()
        } else if side.is_upper() {
            format!("min({})", limits.join(", "))
        } else {
            format!("max({})", limits.join(", "))
        };
        let slot = match side {
            LimitSide::LowerIn => &mut l.limits.lower_in,
            LimitSide::UpperIn => &mut l.limits.upper_in,
            LimitSide::LowerOut => &mut l.limits.lower_out,
            LimitSide::UpperOut => &mut l.limits.upper_out,
        };
        *slot = Some(PerStep::Scalar(text));
    }
    ReserveKind::ALL
        .into_iter()
        .filter(|&r| s.reserve(r).is_some_and(|spec| spec.active_at(t)))
        .map(|r| solve_adequacy(&s, r, t, &Limits::exact()).unwrap().margin.unwrap())
        .collect()
}

/// Cheapest action subset whose margins are all non-negative.
fn subset_oracle(s: &GridSnapshot, t: usize) -> Option<(f64, Vec<usize>)> {
    let n = s.remedial_actions.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 0u32..(1 << n) {
        let chosen: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let cost: f64 = chosen.iter().map(|&i| s.remedial_actions[i].priority).sum();
        if best.as_ref().is_some_and(|b| b.0 <= cost) {
            continue;
        }
        if margins_with(s, t, &chosen).iter().all(|m| *m >= -1e-7) {
            best = Some((cost, chosen));
        }
    }
    best
}

fn only_shedding(s: &mut GridSnapshot, priorities: [f64; 2], load: f64) {
    s.remedial_actions.truncate(2);
    s.remedial_actions[0].priority = priorities[0];
    s.remedial_actions[1].priority = priorities[1];
    s.zones[1].net_load = PerStep::Steps(vec![load, 600.0]);
}

#[test]
fn restoration_prefers_cheaper_action() {
    let mut s = snapshot(DEFICIT);
    only_shedding(&mut s, [1.0, 5.0], 800.0);
    let plan = restore_step(&s, 0, &limits()).unwrap();
    assert_eq!(plan.status, RestorationStatus::Restored);
    assert_eq!(plan.selected, vec!["shed_a".into()]);
    assert_eq!(plan.total_cost, 1.0);
    assert!((plan.deficits[&ReserveKind::NonSpin10].unwrap() + 50.0).abs() < 1e-6);
    assert!((plan.margins[&ReserveKind::NonSpin10] - 10.0).abs() < 1e-6);
    assert_eq!(subset_oracle(&s, 0).unwrap().1, vec![0]);
}

#[test]
fn restoration_combines_actions() {
    let mut s = snapshot(DEFICIT);
    only_shedding(&mut s, [1.0, 1.0], 850.0);
    let plan = restore_step(&s, 0, &limits()).unwrap();
    assert_eq!(plan.selected, vec!["shed_a".into(), "shed_b".into()]);
    assert_eq!(plan.total_cost, 2.0);
    assert!(plan.margins.values().all(|m| *m >= 0.0));
}

#[test]
fn restoration_requires_a_deficit() {
    let s = snapshot(DEFICIT);
    assert!(matches!(restore_step(&s, 1, &limits()), Err(AdequacyError::NoDeficit(1))));
    assert!(matches!(build_restoration(&s, 0, &[]), Err(AdequacyError::NoDeficit(0))));
}

#[test]
fn restoration_reports_unrestorable() {
    let mut s = snapshot(DEFICIT);
    s.remedial_actions.truncate(1);
    s.zones[1].net_load = PerStep::Steps(vec![2000.0, 600.0]);
    let plan = restore_step(&s, 0, &limits()).unwrap();
    assert_eq!(plan.status, RestorationStatus::Unrestorable);
    assert!(plan.selected.is_empty());
}

#[test]
fn restoration_matches_subset_enumeration() {
    let base = snapshot(DEFICIT);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..12 {
        let mut s = base.clone();
        for a in &mut s.remedial_actions {
            a.priority = rng.gen_range(1..=10) as f64;
        }
        let load = rng.gen_range(780..=900) as f64;
        s.zones[1].net_load = PerStep::Steps(vec![load, 600.0]);
        let oracle = subset_oracle(&s, 0);
        let plan = restore_step(&s, 0, &limits()).unwrap();
        match oracle {
            None => assert_eq!(plan.status, RestorationStatus::Unrestorable, "case {case}"),
            Some((cost, _)) => {
                assert_eq!(plan.status, RestorationStatus::Restored, "case {case}");
                assert!((plan.total_cost - cost).abs() < 1e-9, "case {case}: {} vs {cost}", plan.total_cost);
                let idx: Vec<usize> = s
                    .remedial_actions
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| plan.selected.contains(&a.id))
                    .map(|(i, _)| i)
                    .collect();
                assert!(margins_with(&s, 0, &idx).iter().all(|m| *m >= -1e-7), "case {case}");
            }
        }
    }
}
