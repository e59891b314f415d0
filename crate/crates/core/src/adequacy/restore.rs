use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::expr::parse;
use crate::grid::{ActionId, Effect, GridSnapshot, ReserveKind};
use crate::linearize::Attachment;
use crate::milp::{solve_milp, LinExpr, Limits, MilpModel, Relation, Sense, Status, VarId};
use crate::network::LimitSwitch;

use super::build::{add_adequacy, check_active, ActionTerms, AdequacyHandles};
use super::{clean, solve_adequacy, AdequacyError, AdequacyStatus, REPORT_SCHEMA_VERSION};

/// The combined restoration problem of one step.
#[derive(Debug, Clone)]
pub struct RestorationModel {
    pub model: MilpModel,
    pub step: usize,
    pub deficits: Vec<ReserveKind>,
    pub reserves: Vec<AdequacyHandles>,
    /// Action id, priority and selection binary.
    pub actions: Vec<(ActionId, f64, VarId)>,
    pub attachments: Vec<Attachment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RestorationStatus {
    /// Every margin is non-negative after the selected actions.
    Restored,
    /// No combination of actions clears every deficit.
    Unrestorable,
    /// The search stopped before proving optimality or feasibility.
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDecision {
    pub id: ActionId,
    pub priority: f64,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestorationPlan {
    pub schema_version: u32,
    pub step: usize,
    pub status: RestorationStatus,
    /// Reserves in deficit before any action, with their margins when known.
    pub deficits: BTreeMap<ReserveKind, Option<f64>>,
    /// Ids of the selected actions, in snapshot order.
    pub selected: Vec<ActionId>,
    pub actions: Vec<ActionDecision>,
    pub total_cost: f64,
    /// Best margin of every monitored reserve once the actions are applied.
    pub margins: BTreeMap<ReserveKind, f64>,
}

impl RestorationPlan {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("plan serializes");
        text.push('\n');
        text
    }
}

fn prefix(r: ReserveKind) -> String {
    format!("r{r}.")
}

/// Builds the restoration problem of step `t`: one copy of the adequacy
/// rows per monitored reserve, a non-negative margin in each, and shared
/// action binaries whose total priority is minimized.
pub fn build_restoration(
    s: &GridSnapshot,
    t: usize,
    deficits: &[ReserveKind],
) -> Result<RestorationModel, AdequacyError> {
    if deficits.is_empty() {
        return Err(AdequacyError::NoDeficit(t));
    }
    for &r in deficits {
        check_active(s, r, t)?;
    }
    let mut model = MilpModel::new(format!("restoration_t{t}"));
    let mut terms = ActionTerms::default();
    let mut actions = Vec::new();
    let mut objective = LinExpr::new();
    for a in &s.remedial_actions {
        let b = model.add_binary(format!("b[{}]", a.id))?;
        objective.add_term(a.priority, b);
        actions.push((a.id.clone(), a.priority, b));
        for e in &a.effects {
            match e {
                Effect::AddZonePower { zone, mw } | Effect::ShedLoad { zone, mw } => {
                    terms.zone_supply.entry(zone.clone()).or_default().add_term(*mw, b);
                }
                Effect::ScaleLimit { link, side, limit } => {
                    terms
                        .limit_switches
                        .entry((link.to_string(), *side))
                        .or_default()
                        .push(LimitSwitch {
                            action: b,
                            limit: parse(limit).expect("validated snapshot holds parseable limits"),
                        });
                }
                Effect::DropReserve { reserve } => {
                    terms.drop_reserve.entry(*reserve).or_default().push(b);
                }
            }
        }
    }
    let monitored: Vec<ReserveKind> = ReserveKind::ALL
        .into_iter()
        .filter(|&r| s.reserve(r).is_some_and(|spec| spec.active_at(t)))
        .collect();
    let mut reserves = Vec::new();
    let mut attachments = Vec::new();
    for r in monitored {
        let p = prefix(r);
        let h = add_adequacy(&mut model, s, r, t, &p, &terms, &mut attachments)?;
        model.add_constraint(format!("{p}margin_nonneg"), LinExpr::from(h.margin), Relation::Ge, 0.0)?;
        reserves.push(h);
    }
    model.set_objective(Sense::Minimize, objective);
    let mut deficits = deficits.to_vec();
    deficits.sort();
    deficits.dedup();
    Ok(RestorationModel {
        model,
        step: t,
        deficits,
        reserves,
        actions,
        attachments,
    })
}

/// Solves a restoration problem. When restorable, the selection is then
/// fixed and every margin maximized to report the post-action margins.
pub fn solve_restoration(rm: &RestorationModel, limits: &Limits) -> Result<RestorationPlan, AdequacyError> {
    let result = solve_milp(&rm.model, limits)?;
    let mut plan = RestorationPlan {
        schema_version: REPORT_SCHEMA_VERSION,
        step: rm.step,
        status: RestorationStatus::Unrestorable,
        deficits: rm.deficits.iter().map(|&r| (r, None)).collect(),
        selected: Vec::new(),
        actions: rm
            .actions
            .iter()
            .map(|(id, priority, _)| ActionDecision {
                id: id.clone(),
                priority: *priority,
                selected: false,
            })
            .collect(),
        total_cost: 0.0,
        margins: BTreeMap::new(),
    };
    if result.values.is_empty() {
        if result.status == Status::Timeout {
            plan.status = RestorationStatus::Timeout;
        }
        return Ok(plan);
    }
    plan.status = if result.status == Status::Timeout {
        RestorationStatus::Timeout
    } else {
        RestorationStatus::Restored
    };
    let mut fixed = rm.model.clone();
    for (decision, (id, priority, b)) in plan.actions.iter_mut().zip(&rm.actions) {
        let on = result.values[b.0] > 0.5;
        decision.selected = on;
        if on {
            plan.selected.push(id.clone());
            plan.total_cost += priority;
        }
        let v = if on { 1.0 } else { 0.0 };
        fixed.set_bounds(*b, v, v)?;
    }
    let mut total = LinExpr::new();
    for h in &rm.reserves {
        total.add_term(1.0, h.margin);
    }
    fixed.set_objective(Sense::Maximize, total);
    let post = solve_milp(&fixed, limits)?;
    let x = if post.values.is_empty() { &result.values } else { &post.values };
    for h in &rm.reserves {
        plan.margins.insert(h.reserve, clean(x[h.margin.0]));
    }
    Ok(plan)
}

/// Monitors every reserve at step `t` and restores the deficits found.
pub fn restore_step(s: &GridSnapshot, t: usize, limits: &Limits) -> Result<RestorationPlan, AdequacyError> {
    if t >= s.steps() {
        return Err(AdequacyError::StepOutOfRange { step: t, steps: s.steps() });
    }
    let mut deficits = BTreeMap::new();
    for r in ReserveKind::ALL {
        if !s.reserve(r).is_some_and(|spec| spec.active_at(t)) {
            continue;
        }
        let report = solve_adequacy(s, r, t, limits)?;
        if report.status != AdequacyStatus::Adequate {
            deficits.insert(r, report.margin);
        }
    }
    let rs: Vec<ReserveKind> = deficits.keys().copied().collect();
    let rm = build_restoration(s, t, &rs)?;
    let mut plan = solve_restoration(&rm, limits)?;
    plan.deficits = deficits;
    Ok(plan)
}
