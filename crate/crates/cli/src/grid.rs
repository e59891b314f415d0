use std::path::Path;

use anyhow::{bail, Context};
use serde_json::json;
use stablim::adequacy::{restore_step, run_monitor, AdequacyStatus};
use stablim::grid::{load_snapshot, GridSnapshot, ReserveKind, SNAPSHOT_SCHEMA_VERSION};
use stablim::htscuc::{build_htscuc_horizon, schedule_from};
use stablim::milp::{export_lp, import_lp, solve_milp, Limits, SolutionDump};

use crate::output;
use crate::UsageError;

fn load(path: &Path) -> anyhow::Result<GridSnapshot> {
    load_snapshot(path).with_context(|| format!("snapshot {}", path.display()))
}

pub fn validate(path: &Path, out: &Path) -> anyhow::Result<()> {
    let s = load(path)?;
    let summary = json!({
        "schema_version": SNAPSHOT_SCHEMA_VERSION,
        "snapshot": s.name,
        "valid": true,
        "steps": s.steps(),
        "zones": s.zones.len(),
        "links": s.links.len(),
        "plants": s.plants.len(),
        "generators": s.generators.len(),
        "reservoirs": s.reservoirs.len(),
        "rivers": s.rivers.len(),
        "fcpl_sets": s.fcpl_sets.len(),
        "reserves": s.reserves.iter().map(|r| r.id).collect::<Vec<_>>(),
        "remedial_actions": s.remedial_actions.len(),
    });
    output::write(out, &output::json(&summary))
}

/// Parses `a..b`, `a..=b`, `t` or `t1,t2,...` against a horizon of `steps`.
pub fn parse_steps(text: &str, steps: usize) -> Result<Vec<usize>, UsageError> {
    let bad = || UsageError(format!("invalid step selection `{text}`"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let list: Vec<usize> = if let Some((a, b)) = text.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = text.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        text.split(',').map(num).collect::<Result<_, _>>()?
    };
    if list.is_empty() {
        return Err(UsageError(format!("step selection `{text}` is empty")));
    }
    if let Some(t) = list.iter().find(|&&t| t >= steps) {
        return Err(UsageError(format!("step {t} is outside the horizon of {steps} steps")));
    }
    Ok(list)
}

pub struct AdequacyRun<'a> {
    pub snapshot: &'a Path,
    pub reserves: &'a [ReserveKind],
    pub steps: Option<&'a str>,
    pub parallelism: usize,
    pub limits: Limits,
    pub out: &'a Path,
    pub csv: Option<&'a Path>,
}

pub fn adequacy(run: &AdequacyRun) -> anyhow::Result<()> {
    let s = load(run.snapshot)?;
    let steps = match run.steps {
        Some(text) => parse_steps(text, s.steps())?,
        None => (0..s.steps()).collect(),
    };
    for r in run.reserves {
        if s.reserve(*r).is_none() {
            log::warn!("reserve {r} is not monitored by the snapshot");
        }
    }
    let report = run_monitor(&s, run.reserves, &steps, run.parallelism, &run.limits);
    for r in &report.reports {
        match r.status {
            AdequacyStatus::Deficit => log::warn!("{} deficit at step {}: {:?} MW", r.reserve, r.step, r.margin),
            AdequacyStatus::Error => log::error!(
                "{} at step {}: {}",
                r.reserve,
                r.step,
                r.message.as_deref().unwrap_or("no solution")
            ),
            _ => {}
        }
    }
    let mut outputs = vec![(run.out, report.to_json())];
    if let Some(csv) = run.csv {
        outputs.push((csv, report.to_csv()));
    }
    output::write_all(&outputs)
}

pub fn restore(snapshot: &Path, step: usize, limits: &Limits, out: &Path) -> anyhow::Result<()> {
    let s = load(snapshot)?;
    if step >= s.steps() {
        bail!(UsageError(format!("step {step} is outside the horizon of {} steps", s.steps())));
    }
    let plan = restore_step(&s, step, limits)?;
    log::info!("restoration at step {step}: {:?}, cost {}", plan.status, plan.total_cost);
    output::write(out, &plan.to_json())
}

pub struct HucRun<'a> {
    pub snapshot: &'a Path,
    pub horizon: Option<usize>,
    pub limits: Limits,
    pub out: &'a Path,
    pub lp: Option<&'a Path>,
    pub solution: Option<&'a Path>,
}

pub fn huc(run: &HucRun) -> anyhow::Result<()> {
    let s = load(run.snapshot)?;
    let available = s.steps().saturating_sub(1);
    let future = run.horizon.unwrap_or(available);
    if future > available {
        bail!(UsageError(format!(
            "a horizon of {future} steps exceeds the {available} future steps of the snapshot"
        )));
    }
    let hm = build_htscuc_horizon(&s, future)?;
    log::info!(
        "commitment model: {} variables ({} binaries), {} rows",
        hm.model.variables().len(),
        hm.model.num_binaries(),
        hm.model.constraints().len()
    );
    let result = solve_milp(&hm.model, &run.limits)?;
    if result.values.is_empty() {
        bail!("no feasible schedule: solver status {:?}", result.status);
    }
    let schedule = schedule_from(&s, &hm, &result);
    let mut outputs = vec![(run.out, schedule.to_json())];
    if let Some(lp) = run.lp {
        outputs.push((lp, export_lp(&hm.model)));
    }
    if let Some(sol) = run.solution {
        outputs.push((sol, SolutionDump::new(&hm.model, &result).to_json() + "\n"));
    }
    output::write_all(&outputs)
}

pub fn solve(lp: &Path, limits: &Limits, out: &Path) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(lp).with_context(|| format!("cannot read {}", lp.display()))?;
    let model = import_lp(&text).with_context(|| format!("{}", lp.display()))?;
    let result = solve_milp(&model, limits)?;
    output::write(out, &(SolutionDump::new(&model, &result).to_json() + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_selections() {
        assert_eq!(parse_steps("0..3", 5).unwrap(), [0, 1, 2]);
        assert_eq!(parse_steps("1..=3", 5).unwrap(), [1, 2, 3]);
        assert_eq!(parse_steps("4", 5).unwrap(), [4]);
        assert_eq!(parse_steps("0, 2,4", 5).unwrap(), [0, 2, 4]);
        assert!(parse_steps("0..9", 5).is_err());
        assert!(parse_steps("3..1", 5).is_err());
        assert!(parse_steps("x", 5).is_err());
    }
}
