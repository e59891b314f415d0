use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adequacy::clean;
use crate::grid::{GeneratorId, GridSnapshot, PlantId, ReservoirId, RiverId, SpillwayId};
use crate::milp::{SolveResult, Status};

use super::build::{HucModel, StabilityCheck, StepHandles};

pub const SCHEDULE_SCHEMA_VERSION: u32 = 1;

/// Slack at or below which a stability limit is reported as binding.
const BINDING_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSchedule {
    pub online: bool,
    /// MW.
    pub power: f64,
    /// m³/s.
    pub flow: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSchedule {
    pub power: f64,
    pub flow: f64,
    pub sfc_up: f64,
    pub sfc_down: f64,
    pub pfc_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirSchedule {
    /// End-of-step volume, m³.
    pub volume: f64,
    /// Mean level over the step, m.
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiverSchedule {
    /// Volume entering during the step, m³.
    pub inflow: f64,
    /// Volume delivered downstream during the step, m³.
    pub outflow: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub step: usize,
    /// Units of the active configuration of each plant.
    pub configs: BTreeMap<PlantId, Vec<GeneratorId>>,
    pub units: BTreeMap<GeneratorId, UnitSchedule>,
    pub plants: BTreeMap<PlantId, PlantSchedule>,
    pub reservoirs: BTreeMap<ReservoirId, ReservoirSchedule>,
    pub rivers: BTreeMap<RiverId, RiverSchedule>,
    pub spills: BTreeMap<SpillwayId, f64>,
    /// Fleet output during a transient, MW.
    pub transient: f64,
    /// Worst north contingency, MW.
    pub worst_fcpl: f64,
    pub pfc_margin: f64,
    pub sfc_up: f64,
    pub sfc_down: f64,
    /// Stability limits holding with slack at most 1e-6.
    pub binding: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HucSchedule {
    pub schema_version: u32,
    pub snapshot: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_bound: Option<f64>,
    /// Future steps; empty without a feasible schedule.
    pub steps: Vec<StepSchedule>,
}

impl HucSchedule {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("schedule serializes");
        text.push('\n');
        text
    }
}

/// Reads the schedule out of a solution of `hm`.
pub fn schedule_from(s: &GridSnapshot, hm: &HucModel, result: &SolveResult) -> HucSchedule {
    let mut out = HucSchedule {
        schema_version: SCHEDULE_SCHEMA_VERSION,
        snapshot: s.name.clone(),
        status: result.status,
        objective: result.objective.map(clean),
        best_bound: result.best_bound.map(clean),
        steps: Vec::new(),
    };
    if result.values.is_empty() {
        return out;
    }
    let x = &result.values;
    for h in &hm.per_step {
        out.steps.push(step_schedule(s, hm, h, x));
    }
    out
}

/// Slack of a stability limit at `x`; negative when violated.
pub(crate) fn slack(c: &StabilityCheck, h: &StepHandles, x: &[f64]) -> Option<f64> {
    let limit = c.limit.evaluate_with(&|name| h.symbols.value(name, x)).ok()?;
    let lhs = c.lhs.value(x);
    Some(if c.upper { limit - lhs } else { lhs - limit })
}

fn step_schedule(s: &GridSnapshot, hm: &HucModel, h: &StepHandles, x: &[f64]) -> StepSchedule {
    let t = h.step;
    let mut configs = BTreeMap::new();
    for (plant, list) in &hm.configs {
        let vars = &hm.config_vars[plant];
        if let Some(k) = (0..list.len()).find(|&k| x[vars[k][t - 1].0] > 0.5) {
            configs.insert(plant.clone(), list[k].members.clone());
        }
    }
    let mut units = BTreeMap::new();
    let mut plants: BTreeMap<PlantId, PlantSchedule> = BTreeMap::new();
    for (g, terms) in &h.generators {
        units.insert(
            g.clone(),
            UnitSchedule {
                online: terms.on.value(x) > 0.5,
                power: clean(terms.power.value(x)),
                flow: clean(terms.flow.value(x)),
            },
        );
        if let Some(gen) = s.generator(g.as_str()) {
            let e = plants.entry(gen.plant.clone()).or_insert(PlantSchedule {
                power: 0.0,
                flow: 0.0,
                sfc_up: 0.0,
                sfc_down: 0.0,
                pfc_margin: 0.0,
            });
            e.sfc_up += terms.sfc_up.value(x);
            e.sfc_down += terms.sfc_down.value(x);
            e.pfc_margin += terms.pfc.value(x);
        }
    }
    for (plant, power) in &h.plant_power {
        let e = plants.entry(plant.clone()).or_insert(PlantSchedule {
            power: 0.0,
            flow: 0.0,
            sfc_up: 0.0,
            sfc_down: 0.0,
            pfc_margin: 0.0,
        });
        e.power = power.value(x);
        e.flow = h.plant_flow.get(plant).map_or(0.0, |v| x[v.0]);
    }
    for p in plants.values_mut() {
        for v in [&mut p.power, &mut p.flow, &mut p.sfc_up, &mut p.sfc_down, &mut p.pfc_margin] {
            *v = clean(*v);
        }
    }
    let reservoirs = h
        .volume
        .iter()
        .map(|(id, v)| {
            (
                id.clone(),
                ReservoirSchedule {
                    volume: clean(x[v.0]),
                    level: clean(x[h.level[id].0]),
                },
            )
        })
        .collect();
    let rivers = h
        .river_in
        .iter()
        .map(|(id, v)| {
            (
                id.clone(),
                RiverSchedule {
                    inflow: clean(x[v.0]),
                    outflow: clean(x[h.river_out[id].0]),
                },
            )
        })
        .collect();
    let binding = h
        .checks
        .iter()
        .filter(|c| slack(c, h, x).is_some_and(|sl| sl <= BINDING_TOL))
        .map(|c| c.name.clone())
        .collect();
    StepSchedule {
        step: t,
        configs,
        units,
        plants,
        reservoirs,
        rivers,
        spills: h.spill.iter().map(|(id, v)| (id.clone(), clean(x[v.0]))).collect(),
        transient: clean(x[h.transient.0]),
        worst_fcpl: clean(x[h.worst.0]),
        pfc_margin: clean(h.pfc.value(x)),
        sfc_up: clean(h.sfc_up.value(x)),
        sfc_down: clean(h.sfc_down.value(x)),
        binding,
    }
}
