use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::*;
use crate::expr::parse;

/// One validation failure, located by a JSON-path-like string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

const ROW_SUM_TOLERANCE: f64 = 1e-9;

struct Checker<'a> {
    s: &'a GridSnapshot,
    out: Vec<Diagnostic>,
    symbols: BTreeSet<String>,
}

impl<'a> Checker<'a> {
    fn err(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.out.push(Diagnostic {
            path: path.into(),
            message: message.into(),
        });
    }

    fn series<T: Clone>(&mut self, path: &str, s: &PerStep<T>) {
        let n = self.s.steps();
        if !s.len_matches(n) {
            let got = s.values().len();
            self.err(path, format!("has {got} entries, expected 1 or {n}"));
        }
    }

    fn finite_series(&mut self, path: &str, s: &PerStep<f64>) {
        self.series(path, s);
        if s.values().iter().any(|v| !v.is_finite()) {
            self.err(path, "contains a non-finite value");
        }
    }

    fn bounds(&mut self, path: &str, lo: &PerStep<f64>, hi: &PerStep<f64>) {
        self.finite_series(&format!("{path}.min"), lo);
        self.finite_series(&format!("{path}.max"), hi);
        for t in 0..self.s.steps() {
            if lo.at(t) > hi.at(t) {
                self.err(path, format!("min {} exceeds max {} at step {t}", lo.at(t), hi.at(t)));
                break;
            }
        }
    }

    fn limit(&mut self, path: &str, text: &str) {
        match parse(text) {
            Err(e) => self.err(path, format!("limit `{text}` does not parse: {e}")),
            Ok(e) => {
                for v in e.variables() {
                    if !self.symbols.contains(&v) {
                        self.err(path, format!("limit `{text}` refers to unknown quantity `{v}`"));
                    }
                }
            }
        }
    }

    fn limit_series(&mut self, path: &str, s: &PerStep<String>) {
        self.series(path, s);
        for text in s.values() {
            self.limit(path, &text);
        }
    }

    fn unique<'b>(&mut self, kind: &str, ids: impl Iterator<Item = &'b str>) -> BTreeSet<&'b str> {
        let mut seen = BTreeSet::new();
        for id in ids {
            if !seen.insert(id) {
                self.err(format!("{kind}[{id}]"), "duplicate id");
            }
        }
        seen
    }

    fn refers(&mut self, path: &str, what: &str, id: &str, known: &BTreeSet<&str>) {
        if !known.contains(id) {
            self.err(path, format!("unknown {what} `{id}`"));
        }
    }

    fn affine(&mut self, path: &str, a: &Affine) {
        if !(a.slope > 0.0 && a.slope <= 1.0) {
            self.err(path, format!("loss slope {} is outside (0, 1]", a.slope));
        }
        if !a.offset.is_finite() {
            self.err(path, "loss offset is not finite");
        }
    }

    fn flow_limits(&mut self, path: &str, l: &FlowLimits) {
        for side in LimitSide::ALL {
            if let Some(s) = l.get(side) {
                self.limit_series(&format!("{path}.limits.{}", side.as_str()), s);
            }
        }
    }

    fn steps(&mut self, path: &str, steps: &Option<Vec<usize>>) {
        let n = self.s.steps();
        if let Some(bad) = steps.iter().flatten().find(|&&t| t >= n) {
            self.err(path, format!("step {bad} is beyond the horizon of {n} steps"));
        }
    }
}

impl GridSnapshot {
    /// Every problem with the snapshot; empty when it is valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut c = Checker {
            s: self,
            out: Vec::new(),
            symbols: self.symbol_names(),
        };
        let s = self;

        if s.schema_version != SNAPSHOT_SCHEMA_VERSION {
            c.err("schema_version", format!("unsupported version {}", s.schema_version));
        }
        if s.time.durations.is_empty() {
            c.err("time.durations", "horizon is empty");
        }
        for (t, d) in s.time.durations.iter().enumerate() {
            if !(*d > 0.0 && d.is_finite()) {
                c.err(format!("time.durations[{t}]"), format!("duration {d} is not positive"));
            }
        }

        let zones = c.unique("zones", s.zones.iter().map(|z| z.id.as_str()));
        let south = s.zones.iter().filter(|z| z.south).count();
        if south != 1 {
            c.err("zones", format!("expected exactly one south zone, found {south}"));
        }
        for z in &s.zones {
            c.finite_series(&format!("zones[{}].net_load", z.id), &z.net_load);
        }

        let links = c.unique(
            "links",
            s.links.iter().map(|l| l.id.as_str()).chain(s.terminals().iter().map(|t| t.id.as_str())),
        );
        for l in &s.links {
            let p = format!("links[{}]", l.id);
            c.refers(&format!("{p}.from"), "zone", l.from.as_str(), &zones);
            c.refers(&format!("{p}.to"), "zone", l.to.as_str(), &zones);
            if l.from == l.to {
                c.err(&p, "link connects a zone to itself");
            }
            c.affine(&format!("{p}.loss"), &l.loss);
            if l.capacity.is_some_and(|cap| !(cap > 0.0)) {
                c.err(format!("{p}.capacity"), "capacity must be positive");
            }
            c.flow_limits(&p, &l.limits);
        }
        for term in s.terminals() {
            let p = format!("mtdc.terminals[{}]", term.id);
            c.refers(&format!("{p}.zone"), "zone", term.zone.as_str(), &zones);
            c.affine(&format!("{p}.loss"), &term.loss);
            if term.capacity.is_some_and(|cap| !(cap > 0.0)) {
                c.err(format!("{p}.capacity"), "capacity must be positive");
            }
            c.flow_limits(&p, &term.limits);
        }

        let reservoirs = c.unique("reservoirs", s.reservoirs.iter().map(|r| r.id.as_str()));
        let rivers = c.unique("rivers", s.rivers.iter().map(|r| r.id.as_str()));
        c.unique("spillways", s.spillways.iter().map(|r| r.id.as_str()));
        let plants = c.unique(
            "plants",
            s.plants.iter().map(|p| p.id.as_str()).chain(s.run_of_river.iter().map(|r| r.id.as_str())),
        );
        let generators = c.unique("generators", s.generators.iter().map(|g| g.id.as_str()));
        c.unique(
            "resources",
            s.gas_plants
                .iter()
                .chain(&s.interconnectors)
                .chain(&s.interruptibles)
                .map(|r| r.id.as_str()),
        );

        for p in &s.plants {
            let path = format!("plants[{}]", p.id);
            c.refers(&format!("{path}.zone"), "zone", p.zone.as_str(), &zones);
            if let Some(r) = &p.reservoir {
                c.refers(&format!("{path}.reservoir"), "reservoir", r.as_str(), &reservoirs);
            }
            if let Some(r) = &p.discharge {
                c.refers(&format!("{path}.discharge"), "river", r.as_str(), &rivers);
            }
            check_plant_bounds(&mut c, &path, &p.units_min, &p.units_max, &p.power_min, &p.power_max);
            for (r, o) in &p.overrides {
                check_plant_bounds(
                    &mut c,
                    &format!("{path}.overrides.{r}"),
                    &o.units_min,
                    &o.units_max,
                    &o.power_min,
                    &o.power_max,
                );
            }
            c.finite_series(&format!("{path}.scheduled_output"), &p.scheduled_output);
            c.finite_series(&format!("{path}.maneuver_cost"), &p.maneuver_cost);
            if p.maneuver_cost.values().iter().any(|v| *v < 0.0) {
                c.err(format!("{path}.maneuver_cost"), "costs must be non-negative");
            }
        }

        let mut orders: BTreeMap<&str, BTreeMap<u32, &str>> = BTreeMap::new();
        for g in &s.generators {
            let path = format!("generators[{}]", g.id);
            c.refers(&format!("{path}.plant"), "plant", g.plant.as_str(), &plants);
            if s.run_of_river.iter().any(|r| r.id == g.plant) {
                c.err(format!("{path}.plant"), "generators cannot belong to a run-of-river plant");
            }
            if let Some(other) = orders.entry(g.plant.as_str()).or_default().insert(g.commit_order, g.id.as_str())
            {
                c.err(
                    format!("{path}.commit_order"),
                    format!("order {} is already used by `{other}` in plant `{}`", g.commit_order, g.plant),
                );
            }
            c.series(&format!("{path}.available"), &g.available);
            c.series(&format!("{path}.forced"), &g.forced);
            c.series(&format!("{path}.restricted"), &g.restricted);
            for t in 0..s.steps() {
                if g.forced.at(t) && !g.available.at(t) {
                    c.err(format!("{path}.forced"), format!("forced online while unavailable at step {t}"));
                    break;
                }
            }
            c.bounds(&path, &g.pmin, &g.pmax);
            if g.pmin.values().iter().any(|v| *v < 0.0) {
                c.err(format!("{path}.pmin"), "power bounds must be non-negative");
            }
            for (r, o) in &g.overrides {
                let lo = o.pmin.clone().unwrap_or_else(|| g.pmin.clone());
                let hi = o.pmax.clone().unwrap_or_else(|| g.pmax.clone());
                c.bounds(&format!("{path}.overrides.{r}"), &lo, &hi);
            }
            c.finite_series(&format!("{path}.setpoint_cost"), &g.setpoint_cost);
            if g.setpoint_cost.values().iter().any(|v| *v < 0.0) {
                c.err(format!("{path}.setpoint_cost"), "costs must be non-negative");
            }
            if g.initial.online && !(g.initial.power >= 0.0) {
                c.err(format!("{path}.initial.power"), "initial power must be non-negative");
            }
            let sources = g.vertices.iter().map(|v| ("vertices".to_string(), v)).chain(
                g.vertices_by_size
                    .iter()
                    .map(|(k, v)| (format!("vertices_by_size.{k}"), v)),
            );
            for (field, src) in sources {
                if let Err(e) = src.resolve() {
                    c.err(format!("{path}.{field}"), e.to_string());
                }
            }
        }

        for r in &s.reservoirs {
            let path = format!("reservoirs[{}]", r.id);
            if !(r.volume_min >= 0.0 && r.volume_min <= r.volume_max) {
                c.err(
                    &path,
                    format!("volume bounds [{}, {}] are inconsistent", r.volume_min, r.volume_max),
                );
            }
            if !(r.initial_volume >= r.volume_min && r.initial_volume <= r.volume_max) {
                c.err(
                    format!("{path}.initial_volume"),
                    format!("{} lies outside [{}, {}]", r.initial_volume, r.volume_min, r.volume_max),
                );
            }
            if !(r.level.offset.is_finite() && r.level.slope.is_finite() && r.level.slope >= 0.0) {
                c.err(format!("{path}.level"), "level curve must be finite and non-decreasing");
            }
            if !(r.drop_levels.low < r.drop_levels.high) {
                c.err(format!("{path}.drop_levels"), "low drop level must be below high");
            }
            c.finite_series(&format!("{path}.inflow"), &r.inflow);
        }

        let n = s.steps();
        for river in &s.rivers {
            let path = format!("rivers[{}]", river.id);
            if let Some(to) = &river.to {
                c.refers(&format!("{path}.to"), "reservoir", to.as_str(), &reservoirs);
            }
            if river.lambda.len() != n || river.lambda.iter().any(|row| row.len() != n) {
                c.err(format!("{path}.lambda"), format!("must be a {n}x{n} matrix"));
                continue;
            }
            for (from, row) in river.lambda.iter().enumerate() {
                for (to, &v) in row.iter().enumerate() {
                    if !(v >= 0.0 && v.is_finite()) {
                        c.err(format!("{path}.lambda[{from}][{to}]"), format!("coefficient {v} is negative"));
                    } else if to < from && v != 0.0 {
                        c.err(
                            format!("{path}.lambda[{from}][{to}]"),
                            "water cannot leave before it enters",
                        );
                    }
                }
                let sum: f64 = row.iter().sum();
                if sum > 1.0 + ROW_SUM_TOLERANCE {
                    c.err(
                        format!("{path}.lambda[{from}]"),
                        format!("river `{}`: row {from} sums to {sum}, more than 1", river.id),
                    );
                }
            }
        }

        for sp in &s.spillways {
            let path = format!("spillways[{}]", sp.id);
            c.refers(&format!("{path}.reservoir"), "reservoir", sp.reservoir.as_str(), &reservoirs);
            if let Some(r) = &sp.river {
                c.refers(&format!("{path}.river"), "river", r.as_str(), &rivers);
            }
            c.bounds(&path, &sp.min, &sp.max);
            if sp.min.values().iter().any(|v| *v < 0.0) {
                c.err(format!("{path}.min"), "spill volumes must be non-negative");
            }
        }
        if let Some(cycle) = hydraulic_cycle(s) {
            c.err("rivers", format!("hydraulic graph has a cycle through reservoir `{cycle}`"));
        }

        for (kind, list) in [
            ("gas_plants", &s.gas_plants),
            ("interconnectors", &s.interconnectors),
            ("interruptibles", &s.interruptibles),
        ] {
            for r in list {
                let path = format!("{kind}[{}]", r.id);
                c.refers(&format!("{path}.zone"), "zone", r.zone.as_str(), &zones);
                c.bounds(&path, &r.min, &r.max);
            }
        }
        for r in &s.run_of_river {
            let path = format!("run_of_river[{}]", r.id);
            c.refers(&format!("{path}.zone"), "zone", r.zone.as_str(), &zones);
            c.bounds(&path, &r.min, &r.max);
            if let Some(sch) = &r.scheduled {
                c.finite_series(&format!("{path}.scheduled"), sch);
            }
        }

        c.unique("fcpl_sets", s.fcpl_sets.iter().map(|f| f.id.as_str()));
        for f in &s.fcpl_sets {
            let path = format!("fcpl_sets[{}]", f.id);
            if f.generators.is_empty() {
                c.err(&path, "FCPL set is empty");
            }
            for g in &f.generators {
                c.refers(&format!("{path}.generators"), "generator", g.as_str(), &generators);
            }
            c.steps(&format!("{path}.steps"), &f.steps);
        }
        c.unique("topology", s.topology.iter().map(|f| f.id.as_str()));
        for tc in &s.topology {
            let path = format!("topology[{}]", tc.id);
            if tc.generators.is_empty() {
                c.err(&path, "constraint covers no generator");
            }
            for g in &tc.generators {
                c.refers(&format!("{path}.generators"), "generator", g.as_str(), &generators);
            }
            c.limit(&format!("{path}.limit"), &tc.limit);
        }
        c.unique("stability_zones", s.stability_zones.iter().map(|z| z.id.as_str()));
        for z in &s.stability_zones {
            let path = format!("stability_zones[{}]", z.id);
            for p in &z.plants {
                c.refers(&format!("{path}.plants"), "plant", p.as_str(), &plants);
            }
            if !(z.abs_threshold >= 0.0 && z.rate >= 0.0) {
                c.err(&path, "thresholds must be non-negative");
            }
        }

        let mut seen = BTreeSet::new();
        for r in &s.reserves {
            if !seen.insert(r.id) {
                c.err(format!("reserves[{}]", r.id), "duplicate reserve");
            }
            c.steps(&format!("reserves[{}].steps", r.id), &r.steps);
        }

        c.unique("remedial_actions", s.remedial_actions.iter().map(|a| a.id.as_str()));
        for a in &s.remedial_actions {
            let path = format!("remedial_actions[{}]", a.id);
            if !(a.priority > 0.0 && a.priority.is_finite()) {
                c.err(format!("{path}.priority"), format!("priority {} must be positive", a.priority));
            }
            if a.effects.is_empty() {
                c.err(&path, "action has no effect");
            }
            for (i, e) in a.effects.iter().enumerate() {
                let ep = format!("{path}.effects[{i}]");
                match e {
                    Effect::AddZonePower { zone, mw } | Effect::ShedLoad { zone, mw } => {
                        c.refers(&ep, "zone", zone.as_str(), &zones);
                        if !(*mw > 0.0 && mw.is_finite()) {
                            c.err(&ep, format!("power {mw} must be positive"));
                        }
                    }
                    Effect::ScaleLimit { link, limit, .. } => {
                        c.refers(&ep, "link", link.as_str(), &links);
                        c.limit(&ep, limit);
                    }
                    Effect::DropReserve { .. } => {}
                }
            }
        }

        let sfc = s.sfc;
        if !(sfc.up >= 0.0 && sfc.down >= 0.0 && sfc.total >= 0.0) {
            c.err("sfc", "thresholds must be non-negative");
        }
        c.limit_series("pfc_limit", &s.pfc_limit);
        c.limit_series("south_fcpl", &s.south_fcpl);
        if let Some(u) = &s.upper_north_fcpl {
            c.limit("upper_north_fcpl", u);
        }
        let w = s.objective;
        if !(w.maneuver >= 0.0 && w.setpoint >= 0.0 && w.yield_gap >= 0.0) {
            c.err("objective", "weights must be non-negative");
        }
        c.out
    }
}

fn check_plant_bounds(
    c: &mut Checker<'_>,
    path: &str,
    units_min: &Option<PerStep<u32>>,
    units_max: &Option<PerStep<u32>>,
    power_min: &Option<PerStep<f64>>,
    power_max: &Option<PerStep<f64>>,
) {
    if let Some(u) = units_min {
        c.series(&format!("{path}.units_min"), u);
    }
    if let Some(u) = units_max {
        c.series(&format!("{path}.units_max"), u);
    }
    if let Some(p) = power_min {
        c.finite_series(&format!("{path}.power_min"), p);
    }
    if let Some(p) = power_max {
        c.finite_series(&format!("{path}.power_max"), p);
    }
    for t in 0..c.s.steps() {
        if let (Some(lo), Some(hi)) = (units_min, units_max) {
            if lo.at(t) > hi.at(t) {
                c.err(path, format!("units_min exceeds units_max at step {t}"));
                break;
            }
        }
        if let (Some(lo), Some(hi)) = (power_min, power_max) {
            if lo.at(t) > hi.at(t) {
                c.err(path, format!("power_min exceeds power_max at step {t}"));
                break;
            }
        }
    }
}

/// A reservoir on a directed cycle of reservoir -> plant/spillway -> river ->
/// reservoir edges, if any.
fn hydraulic_cycle(s: &GridSnapshot) -> Option<String> {
    let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let river_to = |id: &str| s.river(id).and_then(|r| r.to.as_ref()).map(|r| r.as_str());
    for p in &s.plants {
        if let (Some(re), Some(ri)) = (&p.reservoir, &p.discharge) {
            if let Some(dst) = river_to(ri.as_str()) {
                edges.entry(re.as_str()).or_default().insert(dst);
            }
        }
    }
    for sp in &s.spillways {
        if let Some(dst) = sp.river.as_ref().and_then(|r| river_to(r.as_str())) {
            edges.entry(sp.reservoir.as_str()).or_default().insert(dst);
        }
    }
    // Iterative three-colour DFS.
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    for start in s.reservoirs.iter().map(|r| r.id.as_str()) {
        if state.contains_key(start) {
            continue;
        }
        let mut stack: Vec<(&str, Vec<&str>)> = vec![(start, edges.get(start).into_iter().flatten().copied().collect())];
        state.insert(start, 1);
        while let Some((node, next)) = stack.last_mut() {
            match next.pop() {
                Some(m) => match state.get(m) {
                    Some(1) => return Some(m.to_string()),
                    Some(_) => {}
                    None => {
                        state.insert(m, 1);
                        let succ = edges.get(m).into_iter().flatten().copied().collect();
                        stack.push((m, succ));
                    }
                },
                None => {
                    state.insert(node, 2);
                    stack.pop();
                }
            }
        }
    }
    None
}
