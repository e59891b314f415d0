//! The grid snapshot: one JSON document carrying every zone, link, plant,
//! generator, reservoir and rule that the adequacy and commitment builders
//! read. A snapshot is validated once on load and never mutated afterwards.

mod series;
mod validate;
mod vertex;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse, LimitExpr};

pub use series::*;
pub use validate::Diagnostic;
pub use vertex::{
    hydraulic_power, make_vertex_table, DropHeight, HeightPair, Vertex, VertexError,
    VertexSource, VertexTable, Yield, YieldCurve, YieldValues, GRAVITY, WATER_DENSITY,
};

pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

/// Names under which limit expressions can refer to grid quantities.
pub mod symbols {
    /// Transient output of the whole fleet.
    pub const TRANSIENT: &str = "Ptrans";
    /// Worst first-contingency production loss in the north.
    pub const WORST_NORTH: &str = "Pworst_north";
    /// South contingency to cover.
    pub const WORST_SOUTH: &str = "Pworst_south";

    pub fn plant_power(id: &str) -> String {
        format!("P[{id}]")
    }

    pub fn plant_units(id: &str) -> String {
        format!("N[{id}]")
    }

    pub fn flow(id: &str) -> String {
        format!("F[{id}]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ReserveKind {
    /// Ten-minute spinning.
    #[serde(rename = "10S")]
    Spin10,
    /// Ten-minute non-spinning.
    #[serde(rename = "10NS")]
    NonSpin10,
    /// Thirty-minute non-spinning.
    #[serde(rename = "30NS")]
    NonSpin30,
}

impl ReserveKind {
    pub const ALL: [ReserveKind; 3] = [ReserveKind::Spin10, ReserveKind::NonSpin10, ReserveKind::NonSpin30];

    pub fn as_str(self) -> &'static str {
        match self {
            ReserveKind::Spin10 => "10S",
            ReserveKind::NonSpin10 => "10NS",
            ReserveKind::NonSpin30 => "30NS",
        }
    }

    /// Required reserve as `worst_factor * worst + second_factor * second`.
    pub fn requirement(self) -> (f64, f64) {
        match self {
            ReserveKind::Spin10 => (0.25, 0.0),
            ReserveKind::NonSpin10 => (1.0, 0.0),
            ReserveKind::NonSpin30 => (1.0, 0.5),
        }
    }
}

impl fmt::Display for ReserveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown reserve `{0}` (expected 10S, 10NS or 30NS)")]
pub struct UnknownReserve(pub String);

impl FromStr for ReserveKind {
    type Err = UnknownReserve;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ReserveKind::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownReserve(s.to_string()))
    }
}

/// `offset + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Affine {
    #[serde(default)]
    pub offset: f64,
    #[serde(default = "one")]
    pub slope: f64,
}

impl Default for Affine {
    fn default() -> Self {
        Affine {
            offset: 0.0,
            slope: 1.0,
        }
    }
}

impl Affine {
    pub fn apply(&self, x: f64) -> f64 {
        self.offset + self.slope * x
    }
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

fn zero_series() -> PerStep<f64> {
    PerStep::Scalar(0.0)
}

fn zero_expr() -> PerStep<String> {
    PerStep::Scalar("0".to_string())
}

fn schema_version() -> u32 {
    SNAPSHOT_SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    /// Step durations in seconds; step 0 is the initial state.
    pub durations: Vec<f64>,
}

impl TimeGrid {
    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    /// Steps after the initial one.
    pub fn future(&self) -> std::ops::Range<usize> {
        1..self.durations.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub id: ZoneId,
    #[serde(default)]
    pub south: bool,
    /// Forecast load net of non-dispatchable production, MW.
    pub net_load: PerStep<f64>,
}

/// Limit expressions on the two ends of a link; absent sides are unbounded.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowLimits {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_in: Option<PerStep<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_in: Option<PerStep<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_out: Option<PerStep<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_out: Option<PerStep<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitSide {
    LowerIn,
    #[default]
    UpperIn,
    LowerOut,
    UpperOut,
}

impl LimitSide {
    pub const ALL: [LimitSide; 4] = [
        LimitSide::LowerIn,
        LimitSide::UpperIn,
        LimitSide::LowerOut,
        LimitSide::UpperOut,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LimitSide::LowerIn => "lower_in",
            LimitSide::UpperIn => "upper_in",
            LimitSide::LowerOut => "lower_out",
            LimitSide::UpperOut => "upper_out",
        }
    }

    pub fn is_upper(self) -> bool {
        matches!(self, LimitSide::UpperIn | LimitSide::UpperOut)
    }

    pub fn is_inbound(self) -> bool {
        matches!(self, LimitSide::LowerIn | LimitSide::UpperIn)
    }
}

impl FlowLimits {
    pub fn get(&self, side: LimitSide) -> Option<&PerStep<String>> {
        match side {
            LimitSide::LowerIn => self.lower_in.as_ref(),
            LimitSide::UpperIn => self.upper_in.as_ref(),
            LimitSide::LowerOut => self.lower_out.as_ref(),
            LimitSide::UpperOut => self.upper_out.as_ref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub id: LinkId,
    pub from: ZoneId,
    pub to: ZoneId,
    /// Delivered power as a function of injected power.
    #[serde(default)]
    pub loss: Affine,
    /// Bound on the magnitude of injected power, MW. Defaults to the
    /// snapshot's total installed capacity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
    #[serde(default)]
    pub limits: FlowLimits,
}

/// One terminal of the multi-terminal DC grid, modelled as a special link
/// between its zone and a lossy common bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtdcTerminal {
    pub id: LinkId,
    pub zone: ZoneId,
    /// Share of injected power that reaches the bus.
    #[serde(default)]
    pub loss: Affine,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
    #[serde(default)]
    pub limits: FlowLimits,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mtdc {
    pub terminals: Vec<MtdcTerminal>,
}

/// Per-reserve replacement of plant bounds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantOverlay {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units_min: Option<PerStep<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units_max: Option<PerStep<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_min: Option<PerStep<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_max: Option<PerStep<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HydroPlant {
    pub id: PlantId,
    pub zone: ZoneId,
    /// Uncontrollable plants follow `scheduled_output` in the commitment
    /// problem.
    #[serde(default = "yes")]
    pub controllable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reservoir: Option<ReservoirId>,
    /// River receiving the turbined water; none means it leaves the system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discharge: Option<RiverId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units_min: Option<PerStep<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units_max: Option<PerStep<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_min: Option<PerStep<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_max: Option<PerStep<f64>>,
    #[serde(default = "zero_series")]
    pub scheduled_output: PerStep<f64>,
    /// Cost per unit change of a configuration indicator.
    #[serde(default = "zero_series")]
    pub maneuver_cost: PerStep<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<ReserveKind, PlantOverlay>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorOverlay {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmin: Option<PerStep<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmax: Option<PerStep<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub online: bool,
    #[serde(default)]
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub id: GeneratorId,
    pub plant: PlantId,
    /// Lower orders are committed first.
    pub commit_order: u32,
    #[serde(default = "always")]
    pub available: PerStep<bool>,
    #[serde(default = "never")]
    pub forced: PerStep<bool>,
    /// Specific operational restriction in force.
    #[serde(default = "never")]
    pub restricted: PerStep<bool>,
    #[serde(default = "zero_series")]
    pub pmin: PerStep<f64>,
    pub pmax: PerStep<f64>,
    /// Takes part in the economic dispatch; setpoint changes of units that
    /// do not are penalised.
    #[serde(default = "yes")]
    pub economic_dispatch: bool,
    #[serde(default = "zero_series")]
    pub setpoint_cost: PerStep<f64>,
    #[serde(default)]
    pub initial: InitialState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<VertexSource>,
    /// Vertex data replacing `vertices` in configurations of the given size.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub vertices_by_size: BTreeMap<usize, VertexSource>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<ReserveKind, GeneratorOverlay>,
}

fn always() -> PerStep<bool> {
    PerStep::Scalar(true)
}

fn never() -> PerStep<bool> {
    PerStep::Scalar(false)
}

impl Generator {
    pub fn pmin_for(&self, r: ReserveKind, t: usize) -> f64 {
        self.overrides
            .get(&r)
            .and_then(|o| o.pmin.as_ref())
            .unwrap_or(&self.pmin)
            .at(t)
    }

    pub fn pmax_for(&self, r: ReserveKind, t: usize) -> f64 {
        self.overrides
            .get(&r)
            .and_then(|o| o.pmax.as_ref())
            .unwrap_or(&self.pmax)
            .at(t)
    }

    /// Vertex data for a configuration with `size` members.
    pub fn vertex_table(&self, size: usize) -> Option<Result<VertexTable, VertexError>> {
        self.vertices_by_size
            .get(&size)
            .or(self.vertices.as_ref())
            .map(VertexSource::resolve)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reservoir {
    pub id: ReservoirId,
    /// m³.
    pub initial_volume: f64,
    #[serde(default)]
    pub volume_min: f64,
    pub volume_max: f64,
    /// Level in m from volume in m³.
    pub level: Affine,
    /// Level at which each tabulated drop height applies, m.
    pub drop_levels: HeightPair<f64>,
    /// Natural inflow volume per step, m³.
    #[serde(default = "zero_series")]
    pub inflow: PerStep<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct River {
    pub id: RiverId,
    /// Reservoir at the end of the river; none means the water leaves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<ReservoirId>,
    /// `lambda[s][t]`: share of the volume entering at step `s` that
    /// leaves at step `t`.
    pub lambda: Vec<Vec<f64>>,
    /// Volume that entered during the initial step, m³.
    #[serde(default)]
    pub initial_inflow: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spillway {
    pub id: SpillwayId,
    pub reservoir: ReservoirId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub river: Option<RiverId>,
    #[serde(default = "zero_series")]
    pub min: PerStep<f64>,
    pub max: PerStep<f64>,
}

/// Gas plant, interconnector or interruptible load: a bounded MW quantity
/// in a zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resource {
    pub id: ResourceId,
    pub zone: ZoneId,
    #[serde(default = "zero_series")]
    pub min: PerStep<f64>,
    pub max: PerStep<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOfRiver {
    pub id: PlantId,
    pub zone: ZoneId,
    #[serde(default = "zero_series")]
    pub min: PerStep<f64>,
    pub max: PerStep<f64>,
    /// Output assumed by the commitment problem; defaults to `max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheduled: Option<PerStep<f64>>,
}

impl RunOfRiver {
    pub fn scheduled_at(&self, t: usize) -> f64 {
        self.scheduled.as_ref().unwrap_or(&self.max).at(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcplSet {
    pub id: FcplId,
    pub generators: Vec<GeneratorId>,
    /// Reserves the set applies to; empty means all.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reserves: Vec<ReserveKind>,
    /// Steps at which the set applies; absent means all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<usize>>,
}

impl FcplSet {
    pub fn active_at(&self, t: usize) -> bool {
        self.steps.as_ref().is_none_or(|s| s.contains(&t))
    }

    pub fn active_for(&self, r: ReserveKind, t: usize) -> bool {
        (self.reserves.is_empty() || self.reserves.contains(&r)) && self.active_at(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConstraint {
    pub id: TopologyId,
    pub generators: Vec<GeneratorId>,
    pub limit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityZone {
    pub id: StabilityZoneId,
    pub plants: Vec<PlantId>,
    /// Absolute PFC margin to hold, MW.
    pub abs_threshold: f64,
    /// PFC margin to hold per MW of fleet transient output.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReserveSpec {
    pub id: ReserveKind,
    /// Steps at which the reserve is monitored; absent means all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<usize>>,
}

impl ReserveSpec {
    pub fn active_at(&self, t: usize) -> bool {
        self.steps.as_ref().is_none_or(|s| s.contains(&t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Effect {
    /// Extra supply in a zone, MW.
    AddZonePower { zone: ZoneId, mw: f64 },
    /// Replaces one limit of a link or MTDC terminal.
    ScaleLimit {
        link: LinkId,
        #[serde(default)]
        side: LimitSide,
        limit: String,
    },
    /// Load removed from a zone, MW.
    ShedLoad { zone: ZoneId, mw: f64 },
    /// Lifts a reserve requirement.
    DropReserve { reserve: ReserveKind },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemedialAction {
    pub id: ActionId,
    /// Cost of applying the action; cheaper actions are preferred.
    pub priority: f64,
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SfcThresholds {
    #[serde(default)]
    pub up: f64,
    #[serde(default)]
    pub down: f64,
    #[serde(default)]
    pub total: f64,
}

/// Scales of the commitment objective terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveWeights {
    #[serde(default = "one")]
    pub maneuver: f64,
    #[serde(default = "one")]
    pub setpoint: f64,
    /// Penalty per unit weight placed off the optimal yield; 0 disables it.
    #[serde(default)]
    pub yield_gap: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        ObjectiveWeights {
            maneuver: 1.0,
            setpoint: 1.0,
            yield_gap: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSnapshot {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub time: TimeGrid,
    pub zones: Vec<Zone>,
    #[serde(default)]
    pub links: Vec<Link>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mtdc: Option<Mtdc>,
    #[serde(default)]
    pub plants: Vec<HydroPlant>,
    #[serde(default)]
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub reservoirs: Vec<Reservoir>,
    #[serde(default)]
    pub rivers: Vec<River>,
    #[serde(default)]
    pub spillways: Vec<Spillway>,
    #[serde(default)]
    pub gas_plants: Vec<Resource>,
    #[serde(default)]
    pub interconnectors: Vec<Resource>,
    #[serde(default)]
    pub interruptibles: Vec<Resource>,
    #[serde(default)]
    pub run_of_river: Vec<RunOfRiver>,
    #[serde(default)]
    pub fcpl_sets: Vec<FcplSet>,
    #[serde(default)]
    pub topology: Vec<TopologyConstraint>,
    #[serde(default)]
    pub stability_zones: Vec<StabilityZone>,
    #[serde(default)]
    pub reserves: Vec<ReserveSpec>,
    #[serde(default)]
    pub remedial_actions: Vec<RemedialAction>,
    #[serde(default)]
    pub sfc: SfcThresholds,
    /// Total PFC margin required, as a function of the worst contingencies.
    #[serde(default = "zero_expr")]
    pub pfc_limit: PerStep<String>,
    /// Ceiling on the worst north contingency as a function of `Ptrans`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper_north_fcpl: Option<String>,
    /// South contingency to cover, bound to `Pworst_south`.
    #[serde(default = "zero_expr")]
    pub south_fcpl: PerStep<String>,
    #[serde(default)]
    pub objective: ObjectiveWeights,
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("cannot read snapshot: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot is not valid JSON for the schema: {0}")]
    Schema(#[from] serde_json::Error),
    #[error("snapshot failed validation with {} error(s):\n{}", .0.len(), render(.0))]
    Invalid(Vec<Diagnostic>),
}

fn render(d: &[Diagnostic]) -> String {
    d.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

/// Reads and validates a snapshot file.
pub fn load_snapshot(path: impl AsRef<Path>) -> Result<GridSnapshot, SnapshotError> {
    let text = std::fs::read_to_string(path)?;
    GridSnapshot::from_json(&text)
}

impl GridSnapshot {
    /// Parses and validates a snapshot document.
    pub fn from_json(text: &str) -> Result<GridSnapshot, SnapshotError> {
        let snapshot: GridSnapshot = serde_json::from_str(text)?;
        let errors = snapshot.validate();
        if errors.is_empty() {
            Ok(snapshot)
        } else {
            Err(SnapshotError::Invalid(errors))
        }
    }

    pub fn steps(&self) -> usize {
        self.time.len()
    }

    pub fn south_zone(&self) -> &Zone {
        self.zones.iter().find(|z| z.south).expect("validated snapshot has a south zone")
    }

    pub fn zone(&self, id: &str) -> Option<&Zone> {
        self.zones.iter().find(|z| z.id.as_str() == id)
    }

    pub fn plant(&self, id: &str) -> Option<&HydroPlant> {
        self.plants.iter().find(|p| p.id.as_str() == id)
    }

    pub fn generator(&self, id: &str) -> Option<&Generator> {
        self.generators.iter().find(|g| g.id.as_str() == id)
    }

    pub fn reservoir(&self, id: &str) -> Option<&Reservoir> {
        self.reservoirs.iter().find(|r| r.id.as_str() == id)
    }

    pub fn river(&self, id: &str) -> Option<&River> {
        self.rivers.iter().find(|r| r.id.as_str() == id)
    }

    /// Generators of a plant, in snapshot order.
    pub fn plant_generators<'a>(&'a self, plant: &'a str) -> impl Iterator<Item = &'a Generator> + 'a {
        self.generators.iter().filter(move |g| g.plant.as_str() == plant)
    }

    pub fn terminals(&self) -> &[MtdcTerminal] {
        self.mtdc.as_ref().map_or(&[], |m| &m.terminals)
    }

    pub fn reserve(&self, kind: ReserveKind) -> Option<&ReserveSpec> {
        self.reserves.iter().find(|r| r.id == kind)
    }

    /// Sum of every production capacity plus the largest zonal load; used
    /// as the default bound on link flows.
    pub fn system_capacity(&self) -> f64 {
        let max_of = |s: &PerStep<f64>| s.values().into_iter().fold(0.0, |a: f64, v| a.max(v.abs()));
        let gens: f64 = self.generators.iter().map(|g| max_of(&g.pmax)).sum();
        let resources: f64 = self
            .gas_plants
            .iter()
            .chain(&self.interconnectors)
            .chain(&self.interruptibles)
            .map(|r| max_of(&r.max))
            .sum();
        let ror: f64 = self.run_of_river.iter().map(|r| max_of(&r.max)).sum();
        let load: f64 = self.zones.iter().map(|z| max_of(&z.net_load)).sum();
        let scheduled: f64 = self.plants.iter().map(|p| max_of(&p.scheduled_output)).sum();
        (gens + resources + ror + load + scheduled).max(1.0)
    }

    /// Every name a limit expression may mention.
    pub fn symbol_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for p in &self.plants {
            out.insert(symbols::plant_power(p.id.as_str()));
            out.insert(symbols::plant_units(p.id.as_str()));
        }
        for r in &self.run_of_river {
            out.insert(symbols::plant_power(r.id.as_str()));
        }
        for l in self.links.iter().map(|l| &l.id).chain(self.terminals().iter().map(|t| &t.id)) {
            out.insert(symbols::flow(l.as_str()));
        }
        out.insert(symbols::TRANSIENT.to_string());
        out.insert(symbols::WORST_NORTH.to_string());
        out.insert(symbols::WORST_SOUTH.to_string());
        out
    }

    /// Parses a stored limit expression; validation guarantees success.
    pub fn limit(&self, text: &str) -> LimitExpr {
        parse(text).expect("validated snapshot holds parseable limits")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }
}
