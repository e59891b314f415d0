use std::collections::BTreeMap;

use serde::Serialize;

use crate::grid::{FcplId, GeneratorId, GridSnapshot, PlantId, TopologyId};

/// Interchangeable units of one plant at one step, modelled as one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SuperGenerator {
    /// Lowest member id and the step, as `g1@3`.
    pub id: String,
    pub step: usize,
    pub plant: PlantId,
    pub members: Vec<GeneratorId>,
}

impl SuperGenerator {
    pub fn contains(&self, g: &str) -> bool {
        self.members.iter().any(|m| m.as_str() == g)
    }
}

/// Partitions the available units of controllable plants at step `t`.
///
/// Units share a group when they belong to the same plant, the same FCPL
/// sets active at `t` and the same topology constraints. Restricted units
/// stay alone. Groups come out by plant, then lowest member id.
pub fn partition_supergenerators(s: &GridSnapshot, t: usize) -> Vec<SuperGenerator> {
    type Key = (PlantId, Option<GeneratorId>, Vec<FcplId>, Vec<TopologyId>);
    let mut groups: BTreeMap<Key, Vec<GeneratorId>> = BTreeMap::new();
    for plant in s.plants.iter().filter(|p| p.controllable) {
        for g in s.plant_generators(plant.id.as_str()) {
            if !g.available.at(t) {
                continue;
            }
            let fcpl = s
                .fcpl_sets
                .iter()
                .filter(|f| f.active_at(t) && f.generators.contains(&g.id))
                .map(|f| f.id.clone())
                .collect();
            let topo = s
                .topology
                .iter()
                .filter(|tc| tc.generators.contains(&g.id))
                .map(|tc| tc.id.clone())
                .collect();
            let alone = g.restricted.at(t).then(|| g.id.clone());
            groups
                .entry((plant.id.clone(), alone, fcpl, topo))
                .or_default()
                .push(g.id.clone());
        }
    }
    let mut out: Vec<SuperGenerator> = groups
        .into_iter()
        .map(|((plant, ..), mut members)| {
            members.sort();
            SuperGenerator {
                id: format!("{}@{t}", members[0]),
                step: t,
                plant,
                members,
            }
        })
        .collect();
    out.sort_by(|a, b| (&a.plant, &a.members[0]).cmp(&(&b.plant, &b.members[0])));
    out
}
