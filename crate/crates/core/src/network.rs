//! Transmission rows shared by the adequacy and commitment builders: link
//! and MTDC flow variables, affine losses, and stability limits on both
//! ends of every link.

use std::collections::BTreeMap;

use crate::expr::LimitExpr;
use crate::grid::{symbols, GridSnapshot, LimitSide, ZoneId};
use crate::linearize::{attach_lower, attach_upper, linear_bounds, Attachment, LinearizeError, SymbolTable};
use crate::milp::{LinExpr, MilpModel, Relation, VarId};
use crate::transform::bounds;

/// Flow variables of one link or MTDC terminal.
#[derive(Debug, Clone)]
pub(crate) struct FlowVars {
    pub id: String,
    /// Power entering at the upstream end (link) or injected into the DC bus.
    pub inbound: VarId,
    /// Power delivered downstream (link) or withdrawn from the DC bus.
    pub outbound: VarId,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Network {
    pub links: Vec<FlowVars>,
    pub terminals: Vec<FlowVars>,
    /// Net power each zone receives from the network.
    pub zone_import: BTreeMap<ZoneId, LinExpr>,
}

/// A limit that replaces the snapshot's one when `action` is 1.
#[derive(Debug, Clone)]
pub(crate) struct LimitSwitch {
    pub action: VarId,
    pub limit: LimitExpr,
}

pub(crate) type LimitSwitches = BTreeMap<(String, LimitSide), Vec<LimitSwitch>>;

/// Adds flow variables and loss rows and binds `F[..]`.
pub(crate) fn add_network(
    model: &mut MilpModel,
    s: &GridSnapshot,
    prefix: &str,
    st: &mut SymbolTable,
) -> Result<Network, LinearizeError> {
    let mut net = Network::default();
    let default_cap = s.system_capacity();
    for l in &s.links {
        let cap = l.capacity.unwrap_or(default_cap);
        let pin = model.add_continuous(format!("{prefix}Pin[{}]", l.id), 0.0, cap)?;
        let out_lo = l.loss.apply(0.0).min(l.loss.apply(cap));
        let out_hi = l.loss.apply(0.0).max(l.loss.apply(cap));
        let pout = model.add_continuous(format!("{prefix}Pout[{}]", l.id), out_lo, out_hi)?;
        model.add_constraint(
            format!("{prefix}loss[{}]", l.id),
            LinExpr::from(pout).with(-l.loss.slope, pin),
            Relation::Eq,
            l.loss.offset,
        )?;
        st.bind_model_var(model, symbols::flow(l.id.as_str()), pin);
        net.zone_import.entry(l.to.clone()).or_default().add_term(1.0, pout);
        net.zone_import.entry(l.from.clone()).or_default().add_term(-1.0, pin);
        net.links.push(FlowVars {
            id: l.id.to_string(),
            inbound: pin,
            outbound: pout,
        });
    }
    let terminals = s.terminals();
    if !terminals.is_empty() {
        // Pooled DC bus: everything withdrawn equals everything injected,
        // after each terminal's loss.
        let mut pool = LinExpr::new();
        let mut offsets = 0.0;
        for term in terminals {
            let cap = term.capacity.unwrap_or(default_cap);
            let inj = model.add_continuous(format!("{prefix}Minj[{}]", term.id), 0.0, cap)?;
            let wd = model.add_continuous(format!("{prefix}Mwd[{}]", term.id), 0.0, cap)?;
            pool.add_term(1.0, wd);
            pool.add_term(-term.loss.slope, inj);
            offsets += term.loss.offset;
            let flow = LinExpr::from(inj).with(-1.0, wd);
            st.bind_linear(
                symbols::flow(term.id.as_str()),
                flow,
                crate::transform::Interval { lo: -cap, hi: cap },
            );
            let zi = net.zone_import.entry(term.zone.clone()).or_default();
            zi.add_term(1.0, wd);
            zi.add_term(-1.0, inj);
            net.terminals.push(FlowVars {
                id: term.id.to_string(),
                inbound: inj,
                outbound: wd,
            });
        }
        model.add_constraint(format!("{prefix}mtdc_balance"), pool, Relation::Eq, offsets)?;
    }
    Ok(net)
}

/// Attaches every link and terminal limit at step `t`. A limit with
/// switches holds only while none of its actions is on; each switch's
/// replacement holds while its action is on.
pub(crate) fn attach_network_limits(
    model: &mut MilpModel,
    s: &GridSnapshot,
    t: usize,
    prefix: &str,
    net: &Network,
    st: &SymbolTable,
    switches: &LimitSwitches,
    out: &mut Vec<Attachment>,
) -> Result<(), LinearizeError> {
    let sides = s
        .links
        .iter()
        .map(|l| &l.limits)
        .chain(s.terminals().iter().map(|m| &m.limits));
    for (fv, limits) in net.links.iter().chain(&net.terminals).zip(sides) {
        for side in LimitSide::ALL {
            let key = (fv.id.clone(), side);
            let switched = switches.get(&key).map(Vec::as_slice).unwrap_or(&[]);
            let var = if side.is_inbound() { fv.inbound } else { fv.outbound };
            let name = format!("{prefix}{}[{}]", side.as_str(), fv.id);
            if let Some(text) = limits.get(side) {
                let e = s.limit(&text.at(t));
                let mut x = LinExpr::from(var);
                if !switched.is_empty() {
                    let m = relax_margin(model, &x, &e, st, side.is_upper());
                    let sign = if side.is_upper() { -m } else { m };
                    for sw in switched {
                        x.add_term(sign, sw.action);
                    }
                }
                out.push(attach_side(model, &x, &e, st, &name, side.is_upper())?);
            }
            for (k, sw) in switched.iter().enumerate() {
                let base = LinExpr::from(var);
                let m = relax_margin(model, &base, &sw.limit, st, side.is_upper());
                // Holds as is when the action is on, relaxed by m when off.
                let x = if side.is_upper() {
                    base.with(m, sw.action).plus_constant(-m)
                } else {
                    base.with(-m, sw.action).plus_constant(m)
                };
                out.push(attach_side(model, &x, &sw.limit, st, &format!("{name}.alt{k}"), side.is_upper())?);
            }
        }
    }
    Ok(())
}

fn attach_side(
    model: &mut MilpModel,
    x: &LinExpr,
    e: &LimitExpr,
    st: &SymbolTable,
    name: &str,
    upper: bool,
) -> Result<Attachment, LinearizeError> {
    if upper {
        attach_upper(model, x, e, st, name)
    } else {
        attach_lower(model, x, e, st, name)
    }
}

/// Shift that makes `x <= e` (or `x >= e`) slack everywhere in the domain.
fn relax_margin(model: &MilpModel, x: &LinExpr, e: &LimitExpr, st: &SymbolTable, upper: bool) -> f64 {
    let xb = linear_bounds(model, x);
    let eb = bounds(e, st.domains());
    let gap = if upper { xb.hi - eb.lo } else { eb.hi - xb.lo };
    gap.max(0.0) + 1.0
}
