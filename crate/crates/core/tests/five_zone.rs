//! End-to-end runs on the five-zone fixture.

use stablim::adequacy::{restore_step, run_monitor, AdequacyStatus, RestorationStatus};
use stablim::grid::{load_snapshot, GridSnapshot, ReserveKind};
use stablim::htscuc::{build_htscuc_horizon, solve_htscuc};
use stablim::milp::{Limits, Status};

fn five_zone() -> GridSnapshot {
    load_snapshot(format!("{}/tests/fixtures/five_zone.json", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn fixture_shape() {
    let s = five_zone();
    assert_eq!((s.zones.len(), s.plants.len(), s.generators.len()), (5, 6, 14));
}

#[test]
fn monitor_finds_adequate_and_deficit_cells() {
    let s = five_zone();
    let report = run_monitor(&s, &ReserveKind::ALL, &[0, 1, 2, 3], 4, &Limits::default());
    // 30NS is only monitored at steps 0 and 2.
    assert_eq!(report.reports.len(), 10);
    let count = |st| report.reports.iter().filter(|r| r.status == st).count();
    assert!(count(AdequacyStatus::Adequate) > 0);
    assert!(count(AdequacyStatus::Deficit) > 0);
    assert_eq!(count(AdequacyStatus::Error), 0);
}

#[test]
fn deficits_are_restored() {
    let s = five_zone();
    let plan = restore_step(&s, 2, &Limits::default()).unwrap();
    assert_eq!(plan.status, RestorationStatus::Restored);
    assert!(!plan.selected.is_empty());
    assert!(plan.margins.values().all(|&m| m >= 0.0));
}

#[test]
fn commitment_solves() {
    let s = five_zone();
    let hm = build_htscuc_horizon(&s, 2).unwrap();
    let sched = solve_htscuc(&s, &hm, &Limits::default()).unwrap();
    assert_eq!(sched.status, Status::Optimal);
    assert_eq!(sched.steps.len(), 2);
    for step in &sched.steps {
        assert_eq!(step.configs.len(), 6);
    }
}
