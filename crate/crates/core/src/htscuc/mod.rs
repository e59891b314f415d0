//! Short-term unit commitment of the hydro fleet under stability limits.
//!
//! Each plant runs one of a precomputed set of configurations per step.
//! Interchangeable units are grouped into super-generators whose operating
//! point is a convex combination of tabulated (yield, drop height)
//! vertices. Water balances, river delays, transmission, frequency-control
//! margins and contingency limits are all linear in those weights; the
//! objective penalises configuration changes and setpoint moves.

mod build;
mod configs;
mod schedule;
mod supergen;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::grid::{DropHeight, GeneratorId, GridSnapshot, PlantId, ReservoirId, VertexError, Yield};
use crate::linearize::LinearizeError;
use crate::milp::{solve_milp, Limits, LpError, ModelError};

pub use build::{GeneratorTerms, HucModel, StabilityCheck, StepHandles, WeightVar};
pub use configs::{generate_configs, PlantConfig};
pub use schedule::{
    schedule_from, HucSchedule, PlantSchedule, ReservoirSchedule, RiverSchedule, StepSchedule, UnitSchedule,
    SCHEDULE_SCHEMA_VERSION,
};
pub use supergen::{partition_supergenerators, SuperGenerator};

/// Volume shortfall tolerated by the hydraulic pre-check, m³.
const WATER_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum HucError {
    #[error("the horizon needs a step after the initial state; got {0} step(s)")]
    HorizonTooShort(usize),
    #[error("a horizon of {requested} steps exceeds the snapshot's {available}")]
    HorizonTooLong { requested: usize, available: usize },
    #[error("generator `{generator}` has no vertex data for configurations of {size} unit(s)")]
    MissingVertices { generator: GeneratorId, size: usize },
    #[error("generator `{generator}`: {source}")]
    Vertex {
        generator: GeneratorId,
        #[source]
        source: VertexError,
    },
    #[error(
        "reservoir `{reservoir}` cannot sustain the minimum flows: its volume drops to {volume} m³ \
         at step {step}, below the minimum of {minimum} m³"
    )]
    HydraulicInfeasible {
        reservoir: ReservoirId,
        step: usize,
        volume: f64,
        minimum: f64,
    },
    #[error(transparent)]
    Linearize(#[from] LinearizeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("solver failed: {0}")]
    Solver(#[from] LpError),
}

/// Builds the commitment problem over the whole snapshot horizon.
pub fn build_htscuc(s: &GridSnapshot) -> Result<HucModel, HucError> {
    build::build(s, s.steps())
}

/// Builds the commitment problem over the initial state and the next
/// `future` steps.
pub fn build_htscuc_horizon(s: &GridSnapshot, future: usize) -> Result<HucModel, HucError> {
    build::build(s, future + 1)
}

/// Solves a built problem and extracts the schedule.
pub fn solve_htscuc(s: &GridSnapshot, hm: &HucModel, limits: &Limits) -> Result<HucSchedule, HucError> {
    let result = solve_milp(&hm.model, limits)?;
    Ok(schedule_from(s, hm, &result))
}

/// Rejects horizons on which a reservoir fed only by natural inflow cannot
/// supply the least water its forced units need.
///
/// Reservoirs fed by rivers are skipped: their inflow depends on upstream
/// decisions.
pub(crate) fn check_hydraulics(
    s: &GridSnapshot,
    steps: usize,
    configs: &BTreeMap<PlantId, Vec<PlantConfig>>,
) -> Result<(), HucError> {
    for re in &s.reservoirs {
        if s.rivers.iter().any(|r| r.to.as_ref() == Some(&re.id)) {
            continue;
        }
        let mut volume = re.initial_volume;
        for t in 1..steps {
            volume += re.inflow.at(t);
            for sp in s.spillways.iter().filter(|sp| sp.reservoir == re.id) {
                volume -= sp.min.at(t);
            }
            for plant in s.plants.iter().filter(|p| p.controllable && p.reservoir.as_ref() == Some(&re.id)) {
                let forced = s.plant_generators(plant.id.as_str()).any(|g| g.forced.at(t));
                if !forced {
                    continue;
                }
                let least = configs
                    .get(&plant.id)
                    .into_iter()
                    .flatten()
                    .filter(|c| c.admissible[t])
                    .map(|c| min_flow(s, c))
                    .fold(f64::INFINITY, f64::min);
                if least.is_finite() {
                    volume -= s.time.durations[t] * least;
                }
            }
            if volume < re.volume_min - WATER_TOL {
                return Err(HucError::HydraulicInfeasible {
                    reservoir: re.id.clone(),
                    step: t,
                    volume,
                    minimum: re.volume_min,
                });
            }
        }
    }
    Ok(())
}

/// Least flow of a configuration over its steady-state vertices, m³/s.
fn min_flow(s: &GridSnapshot, c: &PlantConfig) -> f64 {
    c.members
        .iter()
        .filter_map(|g| s.generator(g.as_str()))
        .filter_map(|g| g.vertex_table(c.len()).and_then(Result::ok))
        .map(|table| {
            Yield::NORMAL
                .iter()
                .flat_map(|&y| DropHeight::ALL.map(|dh| table.vertex(y, dh).flow))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}
