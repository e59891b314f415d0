//! Reserve monitoring: one margin-maximizing problem per monitored
//! (reserve, step) pair, and a restoration problem choosing the cheapest
//! set of remedial actions that clears every deficit of a step.

mod build;
mod restore;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{FcplId, GridSnapshot, ReserveKind};
use crate::linearize::LinearizeError;
use crate::milp::{solve_milp, Limits, LpError, ModelError, SolveResult, Status};

pub(crate) use build::default_domain;
pub use build::{build_adequacy, AdequacyHandles, AdequacyModel, FcplHandle, FCPL_BIG_M_PAD, MARGIN_BOUND};
pub use restore::{
    build_restoration, restore_step, solve_restoration, ActionDecision, RestorationModel, RestorationPlan,
    RestorationStatus,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Values closer to zero than this are reported as zero.
const REPORT_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum AdequacyError {
    #[error("step {step} is outside the horizon of {steps} steps")]
    StepOutOfRange { step: usize, steps: usize },
    #[error("reserve {reserve} is not monitored at step {step}")]
    ReserveInactive { reserve: ReserveKind, step: usize },
    #[error("no reserve is in deficit at step {0}; nothing to restore")]
    NoDeficit(usize),
    #[error(transparent)]
    Linearize(#[from] LinearizeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("solver failed: {0}")]
    Solver(#[from] LpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdequacyStatus {
    /// Margin is non-negative.
    Adequate,
    /// Margin is negative; restoration is needed.
    Deficit,
    /// The problem could not be built or solved.
    Error,
}

/// An FCPL set and its dispatched power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcplLoss {
    pub id: FcplId,
    pub mw: f64,
}

/// Outcome of one (reserve, step) problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdequacyReport {
    pub reserve: ReserveKind,
    pub step: usize,
    pub status: AdequacyStatus,
    /// Surplus of deliverable power over load plus reserve, MW.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst: Option<FcplLoss>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second: Option<FcplLoss>,
    /// Reserve requirement, MW.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub required: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub dispatch: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl AdequacyReport {
    fn error(reserve: ReserveKind, step: usize, message: String) -> Self {
        AdequacyReport {
            reserve,
            step,
            status: AdequacyStatus::Error,
            margin: None,
            worst: None,
            second: None,
            required: None,
            dispatch: BTreeMap::new(),
            message: Some(message),
        }
    }
}

/// All reports of one monitoring run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub schema_version: u32,
    pub snapshot: String,
    pub reports: Vec<AdequacyReport>,
}

impl MonitorReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    /// `reserve,step,status,margin,required,worst_mw` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("reserve,step,status,margin,required,worst_mw\n");
        let f = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.reports {
            let status = serde_json::to_value(r.status).expect("status serializes");
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.reserve,
                r.step,
                status.as_str().unwrap_or_default(),
                f(r.margin),
                f(r.required),
                f(r.worst.as_ref().map(|w| w.mw)),
            ));
        }
        out
    }
}

pub(crate) fn clean(v: f64) -> f64 {
    if v.abs() < REPORT_EPS {
        0.0
    } else {
        v
    }
}

/// Builds and solves the (r, t) problem.
pub fn solve_adequacy(
    s: &GridSnapshot,
    r: ReserveKind,
    t: usize,
    limits: &Limits,
) -> Result<AdequacyReport, AdequacyError> {
    let built = build_adequacy(s, r, t)?;
    let result = solve_milp(&built.model, limits)?;
    Ok(report_from(&built.handles, &result))
}

/// Extracts the report of one problem from a solution.
pub fn report_from(h: &AdequacyHandles, result: &SolveResult) -> AdequacyReport {
    if result.values.is_empty() {
        let status = serde_json::to_value(result.status).expect("status serializes");
        return AdequacyReport::error(
            h.reserve,
            h.step,
            format!("solver returned {}", status.as_str().unwrap_or_default()),
        );
    }
    let x = &result.values;
    let margin = clean(x[h.margin.0]);
    let pick = |sel: fn(&FcplHandle) -> Option<crate::milp::VarId>| {
        h.fcpl
            .iter()
            .find(|f| sel(f).is_some_and(|v| x[v.0] > 0.5))
            .map(|f| FcplLoss {
                id: f.id.clone(),
                mw: clean(f.power.value(x)),
            })
    };
    let mut dispatch = BTreeMap::new();
    for (name, v) in &h.dispatch {
        dispatch.insert(name.clone(), clean(x[v.0]));
    }
    AdequacyReport {
        reserve: h.reserve,
        step: h.step,
        status: if margin >= 0.0 {
            AdequacyStatus::Adequate
        } else {
            AdequacyStatus::Deficit
        },
        margin: Some(margin),
        worst: pick(|f| f.worst),
        second: pick(|f| f.second),
        required: Some(clean(x[h.required.0])),
        dispatch,
        message: (result.status == Status::Timeout).then(|| "time limit reached; best incumbent reported".to_string()),
    }
}

/// Solves every monitored (reserve, step) pair among `reserves` x `steps`
/// on a pool of `parallelism` threads. Reports are ordered by reserve, then
/// step, and do not depend on the thread count.
pub fn run_monitor(
    s: &GridSnapshot,
    reserves: &[ReserveKind],
    steps: &[usize],
    parallelism: usize,
    limits: &Limits,
) -> MonitorReport {
    let mut rs: Vec<ReserveKind> = reserves.to_vec();
    rs.sort();
    rs.dedup();
    let mut ts: Vec<usize> = steps.to_vec();
    ts.sort();
    ts.dedup();
    let cells: Vec<(ReserveKind, usize)> = rs
        .iter()
        .flat_map(|&r| ts.iter().map(move |&t| (r, t)))
        .filter(|&(r, t)| t < s.steps() && s.reserve(r).is_some_and(|spec| spec.active_at(t)))
        .collect();
    let solve = |&(r, t): &(ReserveKind, usize)| {
        solve_adequacy(s, r, t, limits).unwrap_or_else(|e| AdequacyReport::error(r, t, e.to_string()))
    };
    let reports = match rayon::ThreadPoolBuilder::new().num_threads(parallelism.max(1)).build() {
        Ok(pool) => pool.install(|| cells.par_iter().map(solve).collect()),
        Err(_) => cells.iter().map(solve).collect(),
    };
    MonitorReport {
        schema_version: REPORT_SCHEMA_VERSION,
        snapshot: s.name.clone(),
        reports,
    }
}

#[cfg(test)]
mod tests;
