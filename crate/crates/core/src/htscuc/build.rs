use std::collections::{BTreeMap, BTreeSet};

use crate::expr::{parse, LimitExpr};
use crate::grid::{
    symbols, DropHeight, GeneratorId, GridSnapshot, LimitSide, PlantId, ReservoirId, RiverId, SpillwayId, VertexTable, Yield,
    ZoneId,
};
use crate::linearize::{attach_abs, attach_gated_abs, attach_lower, attach_upper, linear_bounds, Attachment, SymbolTable};
use crate::milp::{LinExpr, MilpModel, Relation, Sense, VarId};
use crate::network::{add_network, attach_network_limits, LimitSwitches};
use crate::transform::{bounds, Interval};

use super::configs::{generate_configs, PlantConfig};
use super::supergen::{partition_supergenerators, SuperGenerator};
use super::{check_hydraulics, HucError};
use crate::adequacy::default_domain;

/// Relative padding of the setpoint gate big-M.
const GATE_PADDING: f64 = 0.01;
const GATE_FLOOR: f64 = 1e-6;

/// One weight variable: the share of super-generator `sg` running in
/// configuration `config` at a (yield, drop height) vertex.
#[derive(Debug, Clone)]
pub struct WeightVar {
    pub sg: usize,
    pub config: usize,
    pub yield_: Yield,
    pub height: DropHeight,
    pub var: VarId,
}

/// A stability limit whose tightness is reported with the schedule.
#[derive(Debug, Clone)]
pub struct StabilityCheck {
    pub name: String,
    pub lhs: LinExpr,
    pub limit: LimitExpr,
    pub upper: bool,
}

/// Per-generator quantities, as expressions of the weights.
#[derive(Debug, Clone, Default)]
pub struct GeneratorTerms {
    /// Commitment indicator.
    pub on: LinExpr,
    pub power: LinExpr,
    pub flow: LinExpr,
    pub sfc_up: LinExpr,
    pub sfc_down: LinExpr,
    pub pfc: LinExpr,
    /// Output during a transient.
    pub transient: LinExpr,
}

/// Model handles of one future step.
#[derive(Debug, Clone)]
pub struct StepHandles {
    pub step: usize,
    pub supergens: Vec<SuperGenerator>,
    pub weights: Vec<WeightVar>,
    /// Yield indicator per super-generator with weights.
    pub yield_high: BTreeMap<usize, VarId>,
    pub generators: BTreeMap<GeneratorId, GeneratorTerms>,
    pub plant_power: BTreeMap<PlantId, LinExpr>,
    pub plant_flow: BTreeMap<PlantId, VarId>,
    pub volume: BTreeMap<ReservoirId, VarId>,
    pub level: BTreeMap<ReservoirId, VarId>,
    pub river_in: BTreeMap<RiverId, VarId>,
    pub river_out: BTreeMap<RiverId, VarId>,
    pub spill: BTreeMap<SpillwayId, VarId>,
    pub transient: VarId,
    pub worst: VarId,
    pub sfc_up: LinExpr,
    pub sfc_down: LinExpr,
    pub pfc: LinExpr,
    pub symbols: SymbolTable,
    pub checks: Vec<StabilityCheck>,
}

/// A built commitment problem.
#[derive(Debug, Clone)]
pub struct HucModel {
    pub model: MilpModel,
    /// Steps covered, the initial state included.
    pub steps: usize,
    pub configs: BTreeMap<PlantId, Vec<PlantConfig>>,
    /// Configuration indicators, `[config][step - 1]`.
    pub config_vars: BTreeMap<PlantId, Vec<Vec<VarId>>>,
    /// Index of the initial configuration of each plant.
    pub initial_config: BTreeMap<PlantId, usize>,
    pub per_step: Vec<StepHandles>,
    pub attachments: Vec<Attachment>,
}

impl HucModel {
    pub fn step(&self, t: usize) -> &StepHandles {
        &self.per_step[t - 1]
    }
}

fn plain(
    model: &mut MilpModel,
    checks: &mut Vec<StabilityCheck>,
    name: String,
    lhs: LinExpr,
    rhs: f64,
    upper: bool,
) -> Result<(), HucError> {
    let rel = if upper { Relation::Le } else { Relation::Ge };
    model.add_constraint(name.clone(), lhs.clone(), rel, rhs)?;
    checks.push(StabilityCheck {
        name,
        lhs,
        limit: LimitExpr::Const(rhs),
        upper,
    });
    Ok(())
}

fn record(
    checks: &mut Vec<StabilityCheck>,
    attachments: &mut Vec<Attachment>,
    a: Attachment,
    lhs: &LinExpr,
    limit: &LimitExpr,
    upper: bool,
) {
    checks.push(StabilityCheck {
        name: a.constraint.clone(),
        lhs: lhs.clone(),
        limit: limit.clone(),
        upper,
    });
    attachments.push(a);
}

fn pre(t: usize) -> String {
    format!("t{t}.")
}

/// Adds a variable equal to `expr`, bounded by the range of `expr`.
fn defined(model: &mut MilpModel, name: String, expr: &LinExpr) -> Result<VarId, HucError> {
    let range = linear_bounds(model, expr);
    let v = model.add_continuous(name.clone(), range.lo, range.hi)?;
    model.add_relation(format!("{name}.def"), LinExpr::from(v), Relation::Eq, expr)?;
    Ok(v)
}

/// Configurations of every controllable plant, with the initial online set
/// appended when the recursion does not produce it.
pub(crate) fn plant_configs(
    s: &GridSnapshot,
    steps: usize,
) -> (BTreeMap<PlantId, Vec<PlantConfig>>, BTreeMap<PlantId, usize>) {
    let mut configs = BTreeMap::new();
    let mut initial = BTreeMap::new();
    for plant in s.plants.iter().filter(|p| p.controllable) {
        let mut list = generate_configs(s, plant.id.as_str(), steps);
        let mut gens: Vec<_> = s.plant_generators(plant.id.as_str()).collect();
        gens.sort_by_key(|g| g.commit_order);
        let online: Vec<GeneratorId> = gens.iter().filter(|g| g.initial.online).map(|g| g.id.clone()).collect();
        let k = match list.iter().position(|c| c.members == online) {
            Some(k) => k,
            None => {
                let set: BTreeSet<&str> = online.iter().map(|g| g.as_str()).collect();
                let admissible = (0..steps)
                    .map(|t| t > 0 && super::configs::admissible_at(&gens, &set, t))
                    .collect();
                list.push(PlantConfig {
                    plant: plant.id.clone(),
                    members: online,
                    admissible,
                });
                list.len() - 1
            }
        };
        list[k].admissible[0] = true;
        initial.insert(plant.id.clone(), k);
        configs.insert(plant.id.clone(), list);
    }
    (configs, initial)
}

/// Builds the commitment problem over the first `steps` steps of `s`
/// (the initial state included).
pub(crate) fn build(s: &GridSnapshot, steps: usize) -> Result<HucModel, HucError> {
    if steps < 2 {
        return Err(HucError::HorizonTooShort(steps));
    }
    if steps > s.steps() {
        return Err(HucError::HorizonTooLong {
            requested: steps,
            available: s.steps(),
        });
    }
    let (configs, initial_config) = plant_configs(s, steps);
    check_hydraulics(s, steps, &configs)?;
    let mut model = MilpModel::new(format!("commitment_{}", if s.name.is_empty() { "snapshot" } else { &s.name }));
    let mut attachments = Vec::new();
    let mut objective = LinExpr::new();
    let weights = s.objective;

    // Configuration indicators.
    let mut config_vars: BTreeMap<PlantId, Vec<Vec<VarId>>> = BTreeMap::new();
    for (plant, list) in &configs {
        let mut per_cfg = Vec::new();
        for (k, cfg) in list.iter().enumerate() {
            let mut vars = Vec::new();
            for t in 1..steps {
                let name = format!("{}A[{}]", pre(t), cfg.label());
                // The first configuration is implied by the others.
                let v = if k == 0 {
                    model.add_continuous(name, 0.0, 1.0)?
                } else {
                    model.add_binary(name)?
                };
                if !cfg.admissible[t] {
                    model.set_bounds(v, 0.0, 0.0)?;
                }
                vars.push(v);
            }
            per_cfg.push(vars);
        }
        for t in 1..steps {
            let mut sum = LinExpr::new();
            for vars in &per_cfg {
                sum.add_term(1.0, vars[t - 1]);
            }
            model.add_constraint(format!("{}one_config[{plant}]", pre(t)), sum, Relation::Eq, 1.0)?;
        }
        config_vars.insert(plant.clone(), per_cfg);
    }
    let config_at = |plant: &PlantId, k: usize, t: usize| -> LinExpr {
        if t == 0 {
            LinExpr::constant(if initial_config[plant] == k { 1.0 } else { 0.0 })
        } else {
            LinExpr::from(config_vars[plant][k][t - 1])
        }
    };

    let mut per_step: Vec<StepHandles> = Vec::new();
    let mut river_in_hist: BTreeMap<RiverId, Vec<LinExpr>> = s
        .rivers
        .iter()
        .map(|r| (r.id.clone(), vec![LinExpr::constant(r.initial_inflow)]))
        .collect();
    let mut prev_volume: BTreeMap<ReservoirId, LinExpr> = s
        .reservoirs
        .iter()
        .map(|r| (r.id.clone(), LinExpr::constant(r.initial_volume)))
        .collect();

    for t in 1..steps {
        let p = pre(t);
        let sgs = partition_supergenerators(s, t);
        let mut gen_terms: BTreeMap<GeneratorId, GeneratorTerms> = BTreeMap::new();
        let mut weight_vars = Vec::new();
        let mut yield_high = BTreeMap::new();

        // Commitment of each generator.
        for (plant, list) in &configs {
            for g in s.plant_generators(plant.as_str()) {
                let mut on = LinExpr::new();
                for (k, cfg) in list.iter().enumerate() {
                    if cfg.contains(g.id.as_str()) {
                        on.add_expr(&config_at(plant, k, t), 1.0);
                    }
                }
                gen_terms.entry(g.id.clone()).or_default().on = on;
            }
        }

        // Weights and vertex recovery.
        let mut tables: BTreeMap<(GeneratorId, usize), VertexTable> = BTreeMap::new();
        let mut level_rows = Vec::new();
        for (si, sg) in sgs.iter().enumerate() {
            let plant = s.plant(sg.plant.as_str()).expect("validated plant");
            let list = &configs[&sg.plant];
            let reservoir = plant.reservoir.as_ref().and_then(|r| s.reservoir(r.as_str()));
            let mut level_mix = LinExpr::new();
            let mut online = LinExpr::new();
            let mut by_yield: BTreeMap<Yield, LinExpr> = BTreeMap::new();
            for (k, cfg) in list.iter().enumerate() {
                if !cfg.admissible[t] {
                    continue;
                }
                let members: Vec<&GeneratorId> = sg.members.iter().filter(|g| cfg.contains(g.as_str())).collect();
                if members.is_empty() {
                    continue;
                }
                for g in &members {
                    let key = ((*g).clone(), cfg.len());
                    if !tables.contains_key(&key) {
                        let gen = s.generator(g.as_str()).expect("validated generator");
                        let table = gen
                            .vertex_table(cfg.len())
                            .ok_or_else(|| HucError::MissingVertices {
                                generator: (*g).clone(),
                                size: cfg.len(),
                            })?
                            .map_err(|source| HucError::Vertex {
                                generator: (*g).clone(),
                                source,
                            })?;
                        tables.insert(key, table);
                    }
                }
                let mut sum = LinExpr::new();
                for y in Yield::NORMAL {
                    for dh in DropHeight::ALL {
                        let w = model.add_continuous(
                            format!("{p}w[{},{},{},{}]", sg.id, cfg.label(), y.as_str(), dh.as_str()),
                            0.0,
                            1.0,
                        )?;
                        weight_vars.push(WeightVar {
                            sg: si,
                            config: k,
                            yield_: y,
                            height: dh,
                            var: w,
                        });
                        sum.add_term(1.0, w);
                        online.add_term(1.0, w);
                        by_yield.entry(y).or_default().add_term(1.0, w);
                        if let Some(re) = reservoir {
                            level_mix.add_term(re.drop_levels.get(dh), w);
                        }
                        for g in &members {
                            let table = &tables[&((*g).clone(), cfg.len())];
                            let v = table.vertex(y, dh);
                            let stab = table.vertex(Yield::Stab, dh);
                            let gt = gen_terms.entry((*g).clone()).or_default();
                            gt.power.add_term(v.power, w);
                            gt.flow.add_term(v.flow, w);
                            gt.sfc_up.add_term(v.sfc_up, w);
                            gt.sfc_down.add_term(v.sfc_down, w);
                            gt.pfc.add_term(v.pfc_margin, w);
                            gt.transient.add_term(stab.power, w);
                        }
                    }
                }
                model.add_relation(
                    format!("{p}cfg_weights[{},{}]", sg.id, cfg.label()),
                    config_at(&sg.plant, k, t),
                    Relation::Eq,
                    &sum,
                )?;
            }
            if online.terms().is_empty() {
                continue;
            }
            // At most one of the extreme yields across the group.
            let h = model.add_binary(format!("{p}H[{}]", sg.id))?;
            yield_high.insert(si, h);
            model.add_relation(
                format!("{p}yield_max[{}]", sg.id),
                by_yield[&Yield::Max].clone(),
                Relation::Le,
                &LinExpr::from(h),
            )?;
            model.add_constraint(
                format!("{p}yield_min[{}]", sg.id),
                by_yield[&Yield::Min].clone().with(1.0, h),
                Relation::Le,
                1.0,
            )?;
            if weights.yield_gap > 0.0 {
                objective.add_expr(&by_yield[&Yield::Min], weights.yield_gap);
                objective.add_expr(&by_yield[&Yield::Max], weights.yield_gap);
            }
            // Level consistency, relaxed while the group is offline.
            if reservoir.is_some() {
                level_rows.push((si, sg.id.clone(), level_mix, online));
            }
        }

        // Plant aggregates and symbols.
        let mut st = SymbolTable::new().with_default_domain(default_domain());
        let mut supply: BTreeMap<ZoneId, LinExpr> = BTreeMap::new();
        let mut plant_power = BTreeMap::new();
        let mut plant_flow = BTreeMap::new();
        for plant in &s.plants {
            if !plant.controllable {
                let out = plant.scheduled_output.at(t);
                st.bind_const(symbols::plant_power(plant.id.as_str()), out);
                supply.entry(plant.zone.clone()).or_default().add_constant(out);
                plant_power.insert(plant.id.clone(), LinExpr::constant(out));
                continue;
            }
            let mut power = LinExpr::new();
            let mut flow = LinExpr::new();
            let mut units = LinExpr::new();
            let mut count = 0.0;
            for g in s.plant_generators(plant.id.as_str()) {
                if let Some(gt) = gen_terms.get(&g.id) {
                    power.add_expr(&gt.power, 1.0);
                    flow.add_expr(&gt.flow, 1.0);
                    units.add_expr(&gt.on, 1.0);
                }
                count += 1.0;
            }
            let pv = defined(&mut model, format!("{p}P[{}]", plant.id), &power)?;
            let fv = defined(&mut model, format!("{p}F[{}]", plant.id), &flow)?;
            st.bind_model_var(&model, symbols::plant_power(plant.id.as_str()), pv);
            st.bind_linear(symbols::plant_units(plant.id.as_str()), units, Interval { lo: 0.0, hi: count });
            supply.entry(plant.zone.clone()).or_default().add_term(1.0, pv);
            plant_power.insert(plant.id.clone(), LinExpr::from(pv));
            plant_flow.insert(plant.id.clone(), fv);
        }
        for ror in &s.run_of_river {
            let out = ror.scheduled_at(t);
            st.bind_const(symbols::plant_power(ror.id.as_str()), out);
            supply.entry(ror.zone.clone()).or_default().add_constant(out);
        }
        for (kind, list, sign) in [
            ("gas", &s.gas_plants, 1.0),
            ("ic", &s.interconnectors, 1.0),
            ("ir", &s.interruptibles, -1.0),
        ] {
            for res in list {
                let v = model.add_continuous(format!("{p}{kind}[{}]", res.id), res.min.at(t), res.max.at(t))?;
                supply.entry(res.zone.clone()).or_default().add_term(sign, v);
            }
        }

        // Hydraulics.
        let mut spill = BTreeMap::new();
        for sp in &s.spillways {
            let v = model.add_continuous(format!("{p}spill[{}]", sp.id), sp.min.at(t), sp.max.at(t))?;
            spill.insert(sp.id.clone(), v);
        }
        let dt = s.time.durations[t];
        let mut river_in = BTreeMap::new();
        let mut river_out = BTreeMap::new();
        for r in &s.rivers {
            let mut vin = LinExpr::new();
            for plant in s.plants.iter().filter(|pl| pl.discharge.as_ref() == Some(&r.id)) {
                if let Some(&fv) = plant_flow.get(&plant.id) {
                    vin.add_term(dt, fv);
                }
            }
            for sp in s.spillways.iter().filter(|sp| sp.river.as_ref() == Some(&r.id)) {
                vin.add_term(1.0, spill[&sp.id]);
            }
            let v = defined(&mut model, format!("{p}Vin[{}]", r.id), &vin)?;
            river_in.insert(r.id.clone(), v);
            let hist = river_in_hist.get_mut(&r.id).expect("river history");
            hist.push(LinExpr::from(v));
            let mut vout = LinExpr::new();
            for (from, vin_from) in hist.iter().enumerate() {
                let share = r.lambda.get(from).and_then(|row| row.get(t)).copied().unwrap_or(0.0);
                if share != 0.0 {
                    vout.add_expr(vin_from, share);
                }
            }
            let v = defined(&mut model, format!("{p}Vout[{}]", r.id), &vout)?;
            river_out.insert(r.id.clone(), v);
        }
        let mut volume = BTreeMap::new();
        let mut level = BTreeMap::new();
        for re in &s.reservoirs {
            let v = model.add_continuous(format!("{p}V[{}]", re.id), re.volume_min, re.volume_max)?;
            let mut rhs = prev_volume[&re.id].clone().plus_constant(re.inflow.at(t));
            for r in s.rivers.iter().filter(|r| r.to.as_ref() == Some(&re.id)) {
                rhs.add_term(1.0, river_out[&r.id]);
            }
            for plant in s.plants.iter().filter(|pl| pl.reservoir.as_ref() == Some(&re.id)) {
                if let Some(&fv) = plant_flow.get(&plant.id) {
                    rhs.add_term(-dt, fv);
                }
            }
            for sp in s.spillways.iter().filter(|sp| sp.reservoir == re.id) {
                rhs.add_term(-1.0, spill[&sp.id]);
            }
            model.add_relation(format!("{p}water[{}]", re.id), LinExpr::from(v), Relation::Eq, &rhs)?;
            let (l0, l1) = (re.level.apply(re.volume_min), re.level.apply(re.volume_max));
            let lv = model.add_continuous(format!("{p}L[{}]", re.id), l0.min(l1), l0.max(l1))?;
            let mean = prev_volume[&re.id]
                .clone()
                .with(1.0, v)
                .scaled(0.5 * re.level.slope)
                .plus_constant(re.level.offset);
            model.add_relation(format!("{p}level[{}]", re.id), LinExpr::from(lv), Relation::Eq, &mean)?;
            prev_volume.insert(re.id.clone(), LinExpr::from(v));
            volume.insert(re.id.clone(), v);
            level.insert(re.id.clone(), lv);
        }
        for (si, sg_id, mix, online) in level_rows {
            let plant = s.plant(sgs[si].plant.as_str()).expect("validated plant");
            let re_id = plant.reservoir.as_ref().expect("level rows need a reservoir");
            let re = s.reservoir(re_id.as_str()).expect("validated reservoir");
            let lv = level[re_id];
            let lb = linear_bounds(&model, &LinExpr::from(lv));
            let m = (lb.hi - re.drop_levels.low)
                .max(re.drop_levels.high - lb.lo)
                .max(lb.hi.abs())
                .max(lb.lo.abs())
                + 1.0;
            let diff = LinExpr::from(lv).minus(&mix);
            model.add_constraint(
                format!("{p}level_mix_hi[{sg_id}]"),
                diff.clone().plus(&online.scaled(m)),
                Relation::Le,
                m,
            )?;
            model.add_constraint(
                format!("{p}level_mix_lo[{sg_id}]"),
                diff.minus(&online.scaled(m)),
                Relation::Ge,
                -m,
            )?;
        }

        // Frequency control.
        let mut sfc_up = LinExpr::new();
        let mut sfc_down = LinExpr::new();
        let mut pfc = LinExpr::new();
        let mut transient = LinExpr::new();
        for gt in gen_terms.values() {
            sfc_up.add_expr(&gt.sfc_up, 1.0);
            sfc_down.add_expr(&gt.sfc_down, 1.0);
            pfc.add_expr(&gt.pfc, 1.0);
            transient.add_expr(&gt.transient, 1.0);
        }
        let mut checks = Vec::new();
        if s.sfc.up > 0.0 {
            plain(&mut model, &mut checks, format!("{p}sfc_up"), sfc_up.clone(), s.sfc.up, false)?;
        }
        if s.sfc.down > 0.0 {
            plain(&mut model, &mut checks, format!("{p}sfc_down"), sfc_down.clone(), s.sfc.down, false)?;
        }
        if s.sfc.total > 0.0 {
            plain(&mut model, &mut checks, format!("{p}sfc_total"), sfc_up.clone().plus(&sfc_down), s.sfc.total, false)?;
        }
        let ptrans = defined(&mut model, format!("{p}Ptrans"), &transient)?;
        st.bind_model_var(&model, symbols::TRANSIENT, ptrans);

        // Worst north contingency: covers every active FCPL set.
        let sets: Vec<_> = s.fcpl_sets.iter().filter(|f| f.active_at(t)).collect();
        let mut losses = Vec::new();
        for f in &sets {
            let mut loss = LinExpr::new();
            for g in &f.generators {
                if let Some(gt) = gen_terms.get(g) {
                    loss.add_expr(&gt.power, 1.0);
                    loss.add_expr(&gt.sfc_up, 1.0);
                }
            }
            losses.push((f.id.clone(), loss));
        }
        let worst_hi = losses
            .iter()
            .map(|(_, l)| linear_bounds(&model, l).hi)
            .fold(0.0, f64::max);
        let worst = model.add_continuous(format!("{p}Pworst"), 0.0, worst_hi)?;
        for (id, loss) in &losses {
            let lhs = LinExpr::from(worst).minus(loss);
            plain(&mut model, &mut checks, format!("{p}worst_lo[{id}]"), lhs, 0.0, false)?;
        }
        st.bind_model_var(&model, symbols::WORST_NORTH, worst);
        if let Some(text) = &s.upper_north_fcpl {
            let e = s.limit(text);
            let x = LinExpr::from(worst);
            record(&mut checks, &mut attachments, attach_upper(&mut model, &x, &e, &st, &format!("{p}north_fcpl"))?, &x, &e, true);
        }
        let south_expr = s.limit(&s.south_fcpl.at(t));
        if south_expr.variables().is_empty() {
            let v = south_expr.evaluate_with(&|_| None).expect("constant expression");
            st.bind_const(symbols::WORST_SOUTH, v);
        } else {
            let range = bounds(&south_expr, st.domains());
            let v = model.add_continuous(format!("{p}Pworst_south"), range.lo, range.hi)?;
            let x = LinExpr::from(v);
            attachments.push(attach_upper(&mut model, &x, &south_expr, &st, &format!("{p}south_fcpl.ub"))?);
            attachments.push(attach_lower(&mut model, &x, &south_expr, &st, &format!("{p}south_fcpl.lb"))?);
            st.bind_var(symbols::WORST_SOUTH, v, range);
        }

        // Primary frequency control.
        let e = s.limit(&s.pfc_limit.at(t));
        record(&mut checks, &mut attachments, attach_lower(&mut model, &pfc, &e, &st, &format!("{p}pfc"))?, &pfc, &e, false);
        for sz in &s.stability_zones {
            let mut zone_pfc = LinExpr::new();
            for g in s.generators.iter().filter(|g| sz.plants.contains(&g.plant)) {
                if let Some(gt) = gen_terms.get(&g.id) {
                    zone_pfc.add_expr(&gt.pfc, 1.0);
                }
            }
            let e = parse(&format!("min({}, {} * {})", sz.abs_threshold, sz.rate, symbols::TRANSIENT))
                .expect("generated expression parses");
            record(
                &mut checks,
                &mut attachments,
                attach_lower(&mut model, &zone_pfc, &e, &st, &format!("{p}pfc_zone[{}]", sz.id))?,
                &zone_pfc,
                &e,
                false,
            );
        }

        // Topology.
        for tc in &s.topology {
            let mut sum = LinExpr::new();
            for g in &tc.generators {
                if let Some(gt) = gen_terms.get(g) {
                    sum.add_expr(&gt.power, 1.0);
                    sum.add_expr(&gt.sfc_up, 1.0);
                }
            }
            let e = s.limit(&tc.limit);
            record(&mut checks, &mut attachments, attach_upper(&mut model, &sum, &e, &st, &format!("{p}topology[{}]", tc.id))?, &sum, &e, true);
        }

        // Transmission and zone balances.
        let net = add_network(&mut model, s, &p, &mut st)?;
        attach_network_limits(&mut model, s, t, &p, &net, &st, &LimitSwitches::new(), &mut attachments)?;
        let all_limits = s.links.iter().map(|l| &l.limits).chain(s.terminals().iter().map(|m| &m.limits));
        for (fv, limits) in net.links.iter().chain(&net.terminals).zip(all_limits) {
            for side in LimitSide::ALL {
                if let Some(text) = limits.get(side) {
                    checks.push(StabilityCheck {
                        name: format!("{p}{}[{}]", side.as_str(), fv.id),
                        lhs: LinExpr::from(if side.is_inbound() { fv.inbound } else { fv.outbound }),
                        limit: s.limit(&text.at(t)),
                        upper: side.is_upper(),
                    });
                }
            }
        }
        for z in &s.zones {
            let mut rhs = supply.remove(&z.id).unwrap_or_default();
            if let Some(imp) = net.zone_import.get(&z.id) {
                rhs.add_expr(imp, 1.0);
            }
            model.add_constraint(format!("{p}balance[{}]", z.id), rhs, Relation::Eq, z.net_load.at(t))?;
        }

        per_step.push(StepHandles {
            step: t,
            supergens: sgs,
            weights: weight_vars,
            yield_high,
            generators: gen_terms,
            plant_power,
            plant_flow,
            volume,
            level,
            river_in,
            river_out,
            spill,
            transient: ptrans,
            worst,
            sfc_up,
            sfc_down,
            pfc,
            symbols: st,
            checks,
        });
    }

    // Objective: configuration changes.
    for (plant_id, list) in &configs {
        let plant = s.plant(plant_id.as_str()).expect("validated plant");
        for t in 1..steps {
            let cost = plant.maneuver_cost.at(t) * weights.maneuver;
            if cost <= 0.0 {
                continue;
            }
            for (k, cfg) in list.iter().enumerate() {
                let change = config_at(plant_id, k, t).minus(&config_at(plant_id, k, t - 1));
                if linear_bounds(&model, &change).magnitude() == 0.0 {
                    continue;
                }
                let d = model.add_continuous(format!("{}dA[{}]", pre(t), cfg.label()), 0.0, 1.0)?;
                attach_abs(&mut model, d, &change, &format!("{}maneuver[{}]", pre(t), cfg.label()))?;
                objective.add_term(cost, d);
            }
        }
    }

    // Objective: setpoint changes of units outside the economic dispatch,
    // waived at steps where the plant changes configuration.
    let initial_terms = |g: &crate::grid::Generator| GeneratorTerms {
        on: LinExpr::constant(if g.initial.online { 1.0 } else { 0.0 }),
        power: LinExpr::constant(g.initial.power),
        ..Default::default()
    };
    for plant in s.plants.iter().filter(|p| p.controllable) {
        let gens: Vec<_> = s.plant_generators(plant.id.as_str()).collect();
        for t in 1..steps {
            let p = pre(t);
            let costly: Vec<_> = gens
                .iter()
                .filter(|g| !g.economic_dispatch && g.setpoint_cost.at(t) * weights.setpoint > 0.0)
                .collect();
            if costly.is_empty() {
                continue;
            }
            let terms_at = |g: &crate::grid::Generator, t: usize| -> GeneratorTerms {
                if t == 0 {
                    initial_terms(g)
                } else {
                    per_step[t - 1].generators.get(&g.id).cloned().unwrap_or_default()
                }
            };
            let gate = model.add_binary(format!("{p}changed[{}]", plant.id))?;
            let mut any = LinExpr::new();
            for g in &gens {
                let (now, before) = (terms_at(g, t).on, terms_at(g, t - 1).on);
                let c = model.add_continuous(format!("{p}switch[{}]", g.id), 0.0, 1.0)?;
                let name = format!("{p}switch[{}]", g.id);
                let cx = LinExpr::from(c);
                model.add_relation(format!("{name}.a"), cx.clone(), Relation::Ge, &now.clone().minus(&before))?;
                model.add_relation(format!("{name}.b"), cx.clone(), Relation::Ge, &before.clone().minus(&now))?;
                model.add_relation(format!("{name}.c"), cx.clone(), Relation::Le, &now.clone().plus(&before))?;
                model.add_relation(
                    format!("{name}.d"),
                    cx.clone(),
                    Relation::Le,
                    &now.clone().plus(&before).scaled(-1.0).plus_constant(2.0),
                )?;
                model.add_relation(format!("{p}changed_ge[{}]", g.id), LinExpr::from(gate), Relation::Ge, &cx)?;
                any.add_term(1.0, c);
            }
            model.add_relation(format!("{p}changed_le[{}]", plant.id), LinExpr::from(gate), Relation::Le, &any)?;
            for g in costly {
                let change = terms_at(g, t).power.minus(&terms_at(g, t - 1).power);
                let m = linear_bounds(&model, &change).magnitude() * (1.0 + GATE_PADDING) + GATE_FLOOR;
                let d = model.add_continuous(format!("{p}dP[{}]", g.id), 0.0, m)?;
                attach_gated_abs(&mut model, d, &change, gate, m, &format!("{p}setpoint[{}]", g.id))?;
                objective.add_term(g.setpoint_cost.at(t) * weights.setpoint, d);
            }
        }
    }

    model.set_objective(Sense::Minimize, objective);
    Ok(HucModel {
        model,
        steps,
        configs,
        config_vars,
        initial_config,
        per_step,
        attachments,
    })
}
