use std::collections::BTreeMap;

use crate::grid::{symbols, FcplId, GeneratorId, GridSnapshot, ReserveKind, ZoneId};
use crate::linearize::{attach_lower, attach_upper, Attachment, SymbolTable};
use crate::milp::{LinExpr, MilpModel, Relation, Sense, VarId};
use crate::network::{add_network, attach_network_limits, LimitSwitches, Network};
use crate::transform::{bounds, DomainMap, Interval};

use super::AdequacyError;

/// Bound on the adequacy margin used for bound analysis, MW.
pub const MARGIN_BOUND: f64 = 1e6;
/// Padding added to the FCPL big-M, MW.
pub const FCPL_BIG_M_PAD: f64 = 1.0;

/// Variables of one FCPL set.
#[derive(Debug, Clone)]
pub struct FcplHandle {
    pub id: FcplId,
    /// Dispatched power of the members.
    pub power: LinExpr,
    pub worst: Option<VarId>,
    pub second: Option<VarId>,
    pub big_m: f64,
}

/// Where each quantity of one (reserve, step) problem lives in the model.
#[derive(Debug, Clone)]
pub struct AdequacyHandles {
    pub reserve: ReserveKind,
    pub step: usize,
    pub generators: Vec<(GeneratorId, VarId, VarId)>,
    /// Named continuous quantities reported as dispatch.
    pub dispatch: Vec<(String, VarId)>,
    pub fcpl: Vec<FcplHandle>,
    pub worst: VarId,
    pub second: VarId,
    pub required: VarId,
    pub margin: VarId,
}

/// Terms that remedial actions add to a problem.
#[derive(Debug, Clone, Default)]
pub(crate) struct ActionTerms {
    /// Extra supply per zone.
    pub zone_supply: BTreeMap<ZoneId, LinExpr>,
    pub limit_switches: LimitSwitches,
    /// Binaries lifting each reserve requirement.
    pub drop_reserve: BTreeMap<ReserveKind, Vec<VarId>>,
}

/// A built adequacy problem for one reserve at one step.
#[derive(Debug, Clone)]
pub struct AdequacyModel {
    pub model: MilpModel,
    pub handles: AdequacyHandles,
    pub attachments: Vec<Attachment>,
}

/// Checks that `r` is monitored at `t`.
pub(crate) fn check_active(s: &GridSnapshot, r: ReserveKind, t: usize) -> Result<(), AdequacyError> {
    if t >= s.steps() {
        return Err(AdequacyError::StepOutOfRange { step: t, steps: s.steps() });
    }
    match s.reserve(r) {
        Some(spec) if spec.active_at(t) => Ok(()),
        _ => Err(AdequacyError::ReserveInactive { reserve: r, step: t }),
    }
}

/// Builds the problem maximizing the adequacy margin of reserve `r` at
/// step `t`.
///
/// ```
/// use stablim::adequacy::build_adequacy;
/// use stablim::grid::{GridSnapshot, ReserveKind};
/// use stablim::milp::{solve_milp, Limits};
///
/// let s = GridSnapshot::from_json(r#"{
///     "time": {"durations": [3600]},
///     "zones": [{"id": "S", "south": true, "net_load": 300}],
///     "plants": [{"id": "A", "zone": "S"}],
///     "generators": [{"id": "A1", "plant": "A", "commit_order": 1, "pmax": 500}],
///     "gas_plants": [{"id": "G", "zone": "S", "max": 400}],
///     "fcpl_sets": [{"id": "fA", "generators": ["A1"]}],
///     "reserves": [{"id": "10S"}]
/// }"#).unwrap();
/// let built = build_adequacy(&s, ReserveKind::Spin10, 0).unwrap();
/// let sol = solve_milp(&built.model, &Limits::default()).unwrap();
/// // 900 MW of supply, 300 MW of load, a quarter of the 500 MW unit held back.
/// assert!((sol.objective.unwrap() - 475.0).abs() < 1e-6);
/// ```
pub fn build_adequacy(s: &GridSnapshot, r: ReserveKind, t: usize) -> Result<AdequacyModel, AdequacyError> {
    check_active(s, r, t)?;
    let mut model = MilpModel::new(format!("adequacy_{r}_t{t}"));
    let mut attachments = Vec::new();
    let handles = add_adequacy(&mut model, s, r, t, "", &ActionTerms::default(), &mut attachments)?;
    model.set_objective(Sense::Maximize, LinExpr::from(handles.margin));
    Ok(AdequacyModel {
        model,
        handles,
        attachments,
    })
}

pub(crate) fn default_domain() -> Interval {
    DomainMap::from_env().map(|d| d.default_domain()).unwrap_or(DomainMap::FALLBACK)
}

/// Adds every row of the (r, t) problem, with names prefixed by `prefix`.
pub(crate) fn add_adequacy(
    model: &mut MilpModel,
    s: &GridSnapshot,
    r: ReserveKind,
    t: usize,
    prefix: &str,
    actions: &ActionTerms,
    attachments: &mut Vec<Attachment>,
) -> Result<AdequacyHandles, AdequacyError> {
    let mut st = SymbolTable::new().with_default_domain(default_domain());
    let mut supply: BTreeMap<ZoneId, LinExpr> = BTreeMap::new();
    let mut dispatch = Vec::new();
    let mut generators = Vec::new();
    let mut gen_power: BTreeMap<&str, (VarId, f64)> = BTreeMap::new();

    for plant in &s.plants {
        let mut units = LinExpr::new();
        let mut power = LinExpr::new();
        let mut pmax_sum = 0.0;
        let mut count = 0u32;
        for g in s.plant_generators(plant.id.as_str()) {
            let available = g.available.at(t);
            let (lo, hi) = (g.pmin_for(r, t), g.pmax_for(r, t));
            let on = model.add_binary(format!("{prefix}a[{}]", g.id))?;
            let p = model.add_continuous(format!("{prefix}p[{}]", g.id), 0.0, hi)?;
            if !available {
                model.set_bounds(on, 0.0, 0.0)?;
                model.set_bounds(p, 0.0, 0.0)?;
            } else if g.forced.at(t) {
                model.set_bounds(on, 1.0, 1.0)?;
            }
            model.add_constraint(
                format!("{prefix}gen_min[{}]", g.id),
                LinExpr::from(p).with(-lo, on),
                Relation::Ge,
                0.0,
            )?;
            model.add_constraint(
                format!("{prefix}gen_max[{}]", g.id),
                LinExpr::from(p).with(-hi, on),
                Relation::Le,
                0.0,
            )?;
            units.add_term(1.0, on);
            power.add_term(1.0, p);
            if available {
                pmax_sum += hi;
                count += 1;
            }
            gen_power.insert(g.id.as_str(), (p, hi));
            generators.push((g.id.clone(), on, p));
            dispatch.push((format!("p[{}]", g.id), p));
        }
        let overlay = plant.overrides.get(&r);
        let pick_u = |base: &Option<crate::grid::PerStep<u32>>, o: Option<&Option<crate::grid::PerStep<u32>>>| {
            o.and_then(|o| o.as_ref()).or(base.as_ref()).map(|v| v.at(t))
        };
        let pick_p = |base: &Option<crate::grid::PerStep<f64>>, o: Option<&Option<crate::grid::PerStep<f64>>>| {
            o.and_then(|o| o.as_ref()).or(base.as_ref()).map(|v| v.at(t))
        };
        let n_lo = pick_u(&plant.units_min, overlay.map(|o| &o.units_min)).unwrap_or(0) as f64;
        let n_hi = pick_u(&plant.units_max, overlay.map(|o| &o.units_max)).map_or(count as f64, |v| v as f64);
        let p_lo = pick_p(&plant.power_min, overlay.map(|o| &o.power_min)).unwrap_or(0.0);
        let p_hi = pick_p(&plant.power_max, overlay.map(|o| &o.power_max)).unwrap_or(pmax_sum);
        let n = model.add_continuous(format!("{prefix}N[{}]", plant.id), n_lo, n_hi.max(n_lo))?;
        let pp = model.add_continuous(format!("{prefix}P[{}]", plant.id), p_lo, p_hi.max(p_lo))?;
        model.add_relation(format!("{prefix}units[{}]", plant.id), LinExpr::from(n), Relation::Eq, &units)?;
        model.add_relation(format!("{prefix}plant[{}]", plant.id), LinExpr::from(pp), Relation::Eq, &power)?;
        st.bind_model_var(model, symbols::plant_power(plant.id.as_str()), pp);
        st.bind_model_var(model, symbols::plant_units(plant.id.as_str()), n);
        supply.entry(plant.zone.clone()).or_default().add_term(1.0, pp);
        dispatch.push((format!("P[{}]", plant.id), pp));
    }

    let south = s.south_zone().id.clone();
    for (kind, list, sign, south_sign) in [
        ("gas", &s.gas_plants, 1.0, 1.0),
        ("ic", &s.interconnectors, 1.0, 1.0),
        ("ir", &s.interruptibles, -1.0, 1.0),
    ] {
        for res in list {
            let v = model.add_continuous(format!("{prefix}{kind}[{}]", res.id), res.min.at(t), res.max.at(t))?;
            let sgn = if res.zone == south { south_sign } else { sign };
            supply.entry(res.zone.clone()).or_default().add_term(sgn, v);
            dispatch.push((format!("{kind}[{}]", res.id), v));
        }
    }
    for ror in &s.run_of_river {
        let v = model.add_continuous(format!("{prefix}ror[{}]", ror.id), ror.min.at(t), ror.max.at(t))?;
        st.bind_model_var(model, symbols::plant_power(ror.id.as_str()), v);
        supply.entry(ror.zone.clone()).or_default().add_term(1.0, v);
        dispatch.push((format!("ror[{}]", ror.id), v));
    }

    let net: Network = add_network(model, s, prefix, &mut st)?;
    for fv in net.links.iter().chain(&net.terminals) {
        dispatch.push((format!("F[{}].in", fv.id), fv.inbound));
        dispatch.push((format!("F[{}].out", fv.id), fv.outbound));
    }

    // Worst and second-worst FCPL.
    let sets: Vec<_> = s.fcpl_sets.iter().filter(|f| f.active_for(r, t)).collect();
    let upper_of = |f: &crate::grid::FcplSet| -> f64 {
        f.generators
            .iter()
            .filter_map(|g| gen_power.get(g.as_str()))
            .map(|&(_, hi)| hi)
            .sum()
    };
    let big_m = sets.iter().map(|f| upper_of(f)).fold(0.0, f64::max) + FCPL_BIG_M_PAD;
    let worst = model.add_continuous(format!("{prefix}Pworst"), 0.0, if sets.is_empty() { 0.0 } else { big_m })?;
    let second = model.add_continuous(
        format!("{prefix}P2nd"),
        0.0,
        if sets.len() < 2 { 0.0 } else { big_m },
    )?;
    let mut fcpl = Vec::new();
    let mut sum_w = LinExpr::new();
    let mut sum_s = LinExpr::new();
    for f in &sets {
        let mut power = LinExpr::new();
        for g in &f.generators {
            if let Some(&(p, _)) = gen_power.get(g.as_str()) {
                power.add_term(1.0, p);
            }
        }
        let w = model.add_binary(format!("{prefix}w[{}]", f.id))?;
        sum_w.add_term(1.0, w);
        let id = &f.id;
        model.add_relation(format!("{prefix}worst_lo[{id}]"), LinExpr::from(worst), Relation::Ge, &power)?;
        model.add_relation(
            format!("{prefix}worst_hi[{id}]"),
            LinExpr::from(worst).with(big_m, w),
            Relation::Le,
            &power.clone().plus_constant(big_m),
        )?;
        let mut sv = None;
        if sets.len() >= 2 {
            let sb = model.add_binary(format!("{prefix}s[{}]", f.id))?;
            sum_s.add_term(1.0, sb);
            model.add_relation(
                format!("{prefix}second_lo[{id}]"),
                LinExpr::from(second).with(big_m, w),
                Relation::Ge,
                &power,
            )?;
            model.add_relation(
                format!("{prefix}second_hi[{id}]"),
                LinExpr::from(second).with(big_m, sb),
                Relation::Le,
                &power.clone().plus_constant(big_m),
            )?;
            model.add_constraint(
                format!("{prefix}distinct[{id}]"),
                LinExpr::from(w).with(1.0, sb),
                Relation::Le,
                1.0,
            )?;
            sv = Some(sb);
        }
        fcpl.push(FcplHandle {
            id: f.id.clone(),
            power,
            worst: Some(w),
            second: sv,
            big_m,
        });
    }
    if !sets.is_empty() {
        model.add_constraint(format!("{prefix}one_worst"), sum_w, Relation::Eq, 1.0)?;
    }
    if sets.len() >= 2 {
        model.add_constraint(format!("{prefix}one_second"), sum_s, Relation::Eq, 1.0)?;
        // Valid cuts: the two largest losses cover any pair of sets. They
        // keep the relaxation from shrinking the second-worst loss.
        for (i, f) in fcpl.iter().enumerate() {
            for g in &fcpl[i + 1..] {
                model.add_relation(
                    format!("{prefix}top2[{},{}]", f.id, g.id),
                    LinExpr::from(worst).with(1.0, second),
                    Relation::Ge,
                    &f.power.clone().plus(&g.power),
                )?;
            }
        }
    }
    st.bind_model_var(model, symbols::WORST_NORTH, worst);

    // South contingency, as an expression of the other quantities.
    let south_expr = s.limit(&s.south_fcpl.at(t));
    if south_expr.variables().is_empty() {
        let v = south_expr.evaluate_with(&|_| None).expect("constant expression");
        st.bind_const(symbols::WORST_SOUTH, v);
    } else {
        let range = bounds(&south_expr, st.domains());
        let v = model.add_continuous(format!("{prefix}Pworst_south"), range.lo, range.hi)?;
        let name = format!("{prefix}south_fcpl");
        attachments.push(attach_upper(model, &LinExpr::from(v), &south_expr, &st, &format!("{name}.ub"))?);
        attachments.push(attach_lower(model, &LinExpr::from(v), &south_expr, &st, &format!("{name}.lb"))?);
        st.bind_var(symbols::WORST_SOUTH, v, range);
    }

    // Required reserve.
    let (a, b) = r.requirement();
    let required = model.add_continuous(format!("{prefix}Pres"), 0.0, (a + b) * big_m)?;
    let formula = LinExpr::term(a, worst).with(b, second);
    match actions.drop_reserve.get(&r) {
        Some(drops) if !drops.is_empty() => {
            let m = (a + b) * big_m + 1.0;
            let mut lifted = formula.clone();
            for &d in drops {
                lifted.add_term(-m, d);
            }
            model.add_relation(format!("{prefix}reserve"), LinExpr::from(required), Relation::Ge, &lifted)?;
        }
        _ => {
            model.add_relation(format!("{prefix}reserve"), LinExpr::from(required), Relation::Eq, &formula)?;
        }
    }
    let margin = model.add_continuous(format!("{prefix}Ppm"), -MARGIN_BOUND, MARGIN_BOUND)?;

    // Topology constraints.
    for tc in &s.topology {
        let mut sum = LinExpr::new();
        for g in &tc.generators {
            if let Some(&(p, _)) = gen_power.get(g.as_str()) {
                sum.add_term(1.0, p);
            }
        }
        let e = s.limit(&tc.limit);
        attachments.push(attach_upper(model, &sum, &e, &st, &format!("{prefix}topology[{}]", tc.id))?);
    }

    attach_network_limits(model, s, t, prefix, &net, &st, &actions.limit_switches, attachments)?;

    // Zone balances.
    for z in &s.zones {
        let mut rhs = supply.remove(&z.id).unwrap_or_default();
        if let Some(imp) = net.zone_import.get(&z.id) {
            rhs.add_expr(imp, 1.0);
        }
        if let Some(extra) = actions.zone_supply.get(&z.id) {
            rhs.add_expr(extra, 1.0);
        }
        if z.south {
            rhs.add_term(-1.0, required);
            rhs.add_term(-1.0, margin);
        }
        model.add_constraint(format!("{prefix}balance[{}]", z.id), rhs, Relation::Eq, z.net_load.at(t))?;
    }

    Ok(AdequacyHandles {
        reserve: r,
        step: t,
        generators,
        dispatch,
        fcpl,
        worst,
        second,
        required,
        margin,
    })
}
