use std::collections::BTreeSet;

use serde::Serialize;

use crate::grid::{Generator, GeneratorId, GridSnapshot, PlantId};

/// A subset of a plant's generators that may run together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlantConfig {
    pub plant: PlantId,
    /// Members in commitment order.
    pub members: Vec<GeneratorId>,
    /// Whether the configuration may be active, per step. Step 0 is the
    /// initial state and is admissible only for the initial configuration.
    pub admissible: Vec<bool>,
}

impl PlantConfig {
    /// `plant{g1,g2}`.
    pub fn label(&self) -> String {
        let names: Vec<&str> = self.members.iter().map(|g| g.as_str()).collect();
        format!("{}{{{}}}", self.plant, names.join(","))
    }

    pub fn contains(&self, g: &str) -> bool {
        self.members.iter().any(|m| m.as_str() == g)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Configurations of `plant` over steps `0..steps`, by the
/// commitment-order recursion: starting from the units forced online at
/// every future step, each extension adds one unit with a higher
/// commitment order, chosen among the units forced at least once and the
/// units picked by the availability, restriction and constraint covers.
///
/// The starting configuration comes first; the rest follow in depth-first
/// generation order without duplicates.
///
/// ```
/// use stablim::grid::GridSnapshot;
/// use stablim::htscuc::generate_configs;
///
/// let s = GridSnapshot::from_json(r#"{
///     "time": {"durations": [3600, 3600, 3600]},
///     "zones": [{"id": "S", "south": true, "net_load": 0}],
///     "plants": [{"id": "A", "zone": "S"}],
///     "generators": [
///         {"id": "g1", "plant": "A", "commit_order": 1, "pmax": 10},
///         {"id": "g2", "plant": "A", "commit_order": 2, "pmax": 10},
///         {"id": "g3", "plant": "A", "commit_order": 3, "pmax": 10}
///     ]
/// }"#).unwrap();
/// let labels: Vec<String> = generate_configs(&s, "A", 3).iter().map(|c| c.label()).collect();
/// assert_eq!(labels, ["A{}", "A{g1}", "A{g1,g2}", "A{g1,g2,g3}"]);
/// ```
pub fn generate_configs(s: &GridSnapshot, plant: &str, steps: usize) -> Vec<PlantConfig> {
    let future: Vec<usize> = (1..steps).collect();
    let mut gens: Vec<&Generator> = s.plant_generators(plant).collect();
    gens.sort_by_key(|g| g.commit_order);
    let forced: BTreeSet<&str> = gens
        .iter()
        .filter(|g| !future.is_empty() && future.iter().all(|&t| g.forced.at(t)))
        .map(|g| g.id.as_str())
        .collect();
    let unavailable: BTreeSet<&str> = gens
        .iter()
        .filter(|g| future.iter().all(|&t| !g.available.at(t)))
        .map(|g| g.id.as_str())
        .collect();
    let excluded: BTreeSet<&str> = unavailable.union(&forced).copied().collect();
    let ctx = Ctx {
        s,
        gens: &gens,
        future: &future,
        excluded: &excluded,
    };
    let mut out: Vec<BTreeSet<&str>> = vec![forced.clone()];
    ctx.extend(&forced, &mut out);
    out.into_iter()
        .map(|set| {
            let members: Vec<GeneratorId> = gens
                .iter()
                .filter(|g| set.contains(g.id.as_str()))
                .map(|g| g.id.clone())
                .collect();
            let admissible = (0..steps)
                .map(|t| t > 0 && admissible_at(&gens, &set, t))
                .collect();
            PlantConfig {
                plant: PlantId::from(plant),
                members,
                admissible,
            }
        })
        .collect()
}

/// All members available at `t` and every unit forced at `t` included.
pub(crate) fn admissible_at(gens: &[&Generator], set: &BTreeSet<&str>, t: usize) -> bool {
    gens.iter().all(|g| {
        let member = set.contains(g.id.as_str());
        (!member || g.available.at(t)) && (member || !g.forced.at(t))
    })
}

struct Ctx<'a> {
    s: &'a GridSnapshot,
    gens: &'a [&'a Generator],
    future: &'a [usize],
    excluded: &'a BTreeSet<&'a str>,
}

impl<'a> Ctx<'a> {
    fn extend(&self, cfg: &BTreeSet<&'a str>, out: &mut Vec<BTreeSet<&'a str>>) {
        let co_max = self
            .gens
            .iter()
            .filter(|g| cfg.contains(g.id.as_str()) && !self.excluded.contains(g.id.as_str()))
            .map(|g| g.commit_order as i64)
            .max()
            .unwrap_or(i64::MIN);
        let potential: Vec<&Generator> = self
            .gens
            .iter()
            .copied()
            .filter(|g| !self.excluded.contains(g.id.as_str()) && g.commit_order as i64 > co_max)
            .collect();
        let mut to_add: BTreeSet<&str> = potential
            .iter()
            .filter(|g| self.future.iter().any(|&t| g.forced.at(t)))
            .map(|g| g.id.as_str())
            .collect();
        to_add.extend(self.cover(&potential, |g, t| g.available.at(t)));
        to_add.extend(self.cover(&potential, |g, t| g.available.at(t) && !g.restricted.at(t)));
        to_add.extend(self.cover(&potential, |g, t| g.available.at(t) && !self.constrained(g, t)));
        for g in potential.iter().filter(|g| to_add.contains(g.id.as_str())) {
            let mut next = cfg.clone();
            next.insert(g.id.as_str());
            if !out.contains(&next) {
                out.push(next.clone());
            }
            self.extend(&next, out);
        }
    }

    /// Greedy cover of the future steps: candidates are scanned in
    /// commitment order and kept when they cover a step no kept candidate
    /// covers, until every coverable step is covered.
    fn cover(&self, cands: &[&'a Generator], covers: impl Fn(&Generator, usize) -> bool) -> Vec<&'a str> {
        let universe: BTreeSet<usize> = self
            .future
            .iter()
            .copied()
            .filter(|&t| cands.iter().any(|g| covers(g, t)))
            .collect();
        let mut covered = BTreeSet::new();
        let mut picked = Vec::new();
        for g in cands {
            if covered.len() == universe.len() {
                break;
            }
            let new: Vec<usize> = universe
                .iter()
                .copied()
                .filter(|&t| !covered.contains(&t) && covers(g, t))
                .collect();
            if !new.is_empty() {
                covered.extend(new);
                picked.push(g.id.as_str());
            }
        }
        picked
    }

    /// Member of an FCPL set active at `t` or of any topology constraint.
    fn constrained(&self, g: &Generator, t: usize) -> bool {
        self.s
            .fcpl_sets
            .iter()
            .any(|f| f.active_at(t) && f.generators.contains(&g.id))
            || self.s.topology.iter().any(|tc| tc.generators.contains(&g.id))
    }
}
