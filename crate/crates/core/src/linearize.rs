//! Compiles `x <= e` and `x >= e` for a [`LimitExpr`] `e` into MILP rows,
//! plus the absolute-value idioms used by the scheduling objective.
//!
//! Conjunctive nodes (a `min` on the upper side, a `max` on the lower side)
//! become one row per child. Disjunctive nodes get one binary selector per
//! child, `sum(b) = 1`, and a big-M taken from the interval envelope of that
//! node only.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::expr::LimitExpr;
use crate::milp::{LinExpr, MilpModel, ModelError, Relation, VarId, VarKind};
use crate::transform::{bounds, simplify, DomainMap, Interval};

/// Relative padding applied to every envelope width.
pub const BIG_M_PADDING: f64 = 0.01;
/// Absolute padding added on top, so a zero-width envelope still gets slack.
const BIG_M_FLOOR: f64 = 1e-6;

/// What an expression variable stands for in the target model.
#[derive(Debug, Clone, PartialEq)]
pub enum Symbol {
    Var(VarId),
    Const(f64),
    /// An affine combination of model variables.
    Linear(LinExpr),
}

/// Name resolution for expression variables, with a domain per name.
#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    symbols: BTreeMap<String, Symbol>,
    domains: DomainMap,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Domain used for names bound without one and for infinite bounds.
    pub fn with_default_domain(mut self, domain: Interval) -> Self {
        self.domains = self.domains.with_default(domain);
        self
    }

    pub fn bind_var(&mut self, name: impl Into<String>, var: VarId, domain: Interval) {
        let name = name.into();
        self.domains.insert(name.clone(), domain);
        self.symbols.insert(name, Symbol::Var(var));
    }

    /// Binds a model variable using its own bounds as the domain. Infinite
    /// sides are replaced by the default domain's.
    pub fn bind_model_var(&mut self, model: &MilpModel, name: impl Into<String>, var: VarId) {
        let v = model.variable(var);
        let fallback = self.domains.default_domain();
        let lo = if v.lb.is_finite() { v.lb } else { fallback.lo.min(v.ub) };
        let hi = if v.ub.is_finite() { v.ub } else { fallback.hi.max(lo) };
        self.bind_var(name, var, Interval { lo, hi });
    }

    pub fn bind_const(&mut self, name: impl Into<String>, value: f64) {
        let name = name.into();
        self.domains.insert(name.clone(), Interval::point(value));
        self.symbols.insert(name, Symbol::Const(value));
    }

    pub fn bind_linear(&mut self, name: impl Into<String>, expr: LinExpr, domain: Interval) {
        let name = name.into();
        self.domains.insert(name.clone(), domain);
        self.symbols.insert(name, Symbol::Linear(expr));
    }

    pub fn get(&self, name: &str) -> Option<&Symbol> {
        self.symbols.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.symbols.contains_key(name)
    }

    pub fn domains(&self) -> &DomainMap {
        &self.domains
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.symbols.keys().map(String::as_str)
    }

    /// Value of a bound name at the point `x`.
    pub fn value(&self, name: &str, x: &[f64]) -> Option<f64> {
        self.symbols.get(name).map(|s| match s {
            Symbol::Var(v) => x[v.0],
            Symbol::Const(c) => *c,
            Symbol::Linear(e) => e.value(x),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinearizeError {
    #[error("`{constraint}`: no symbol bound for `{name}`")]
    MissingSymbol { constraint: String, name: String },
    #[error("`{constraint}`: domain {domain} of `{name}` is not finite")]
    UnboundedDomain {
        constraint: String,
        name: String,
        domain: Interval,
    },
    #[error("`{constraint}`: envelope {envelope} of node {node} is not finite")]
    UnboundedEnvelope {
        constraint: String,
        node: String,
        envelope: Interval,
    },
    #[error("`{constraint}`: big-M {m} is below the attainable magnitude {needed}")]
    BigMTooSmall {
        constraint: String,
        m: f64,
        needed: f64,
    },
    #[error("`{constraint}`: gate variable {gate} is not binary")]
    GateNotBinary { constraint: String, gate: VarId },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// The big-M chosen for one disjunctive node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BigM {
    /// Dotted child path from the root, `0` being the root.
    pub node: String,
    pub m: f64,
    pub envelope: Interval,
}

/// Everything one attach call added to the model.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Attachment {
    pub constraint: String,
    /// The expression after simplification, as encoded.
    pub encoded: String,
    pub rows: Vec<String>,
    pub variables: Vec<String>,
    pub binaries: Vec<String>,
    pub big_m: Vec<BigM>,
}

impl Attachment {
    pub fn num_binaries(&self) -> usize {
        self.binaries.len()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    /// `lhs <= node`
    Upper,
    /// `lhs >= node`
    Lower,
}

impl Side {
    fn flip(self) -> Side {
        match self {
            Side::Upper => Side::Lower,
            Side::Lower => Side::Upper,
        }
    }

    fn relation(self) -> Relation {
        match self {
            Side::Upper => Relation::Le,
            Side::Lower => Relation::Ge,
        }
    }
}

/// Adds rows encoding `x <= e`.
///
/// ```
/// use stablim::expr::parse;
/// use stablim::linearize::{attach_upper, SymbolTable};
/// use stablim::milp::{LinExpr, MilpModel};
/// use stablim::transform::Interval;
///
/// let mut m = MilpModel::new("demo");
/// let x = m.add_continuous("x", 0.0, 100.0).unwrap();
/// let y = m.add_continuous("y", 0.0, 10.0).unwrap();
/// let mut st = SymbolTable::new();
/// st.bind_var("y", y, Interval::new(0.0, 10.0).unwrap());
/// let a = attach_upper(&mut m, &LinExpr::from(x), &parse("min(8, y + 1)").unwrap(), &st, "cap").unwrap();
/// assert_eq!(a.rows.len(), 2);
/// assert_eq!(a.num_binaries(), 0);
/// ```
pub fn attach_upper(
    model: &mut MilpModel,
    x: &LinExpr,
    e: &LimitExpr,
    st: &SymbolTable,
    name: &str,
) -> Result<Attachment, LinearizeError> {
    attach(model, x, e, st, name, Side::Upper)
}

/// Adds rows encoding `x >= e`.
pub fn attach_lower(
    model: &mut MilpModel,
    x: &LinExpr,
    e: &LimitExpr,
    st: &SymbolTable,
    name: &str,
) -> Result<Attachment, LinearizeError> {
    attach(model, x, e, st, name, Side::Lower)
}

fn attach(
    model: &mut MilpModel,
    x: &LinExpr,
    e: &LimitExpr,
    st: &SymbolTable,
    name: &str,
    side: Side,
) -> Result<Attachment, LinearizeError> {
    let mut enc = Encoder {
        model,
        symbols: st.clone(),
        name,
        out: Attachment {
            constraint: name.to_string(),
            ..Attachment::default()
        },
    };
    let root = enc.prepare(e)?;
    enc.out.encoded = root.to_string();
    enc.encode(x.clone(), &root, "0", side)?;
    Ok(enc.out)
}

struct Encoder<'a> {
    model: &'a mut MilpModel,
    symbols: SymbolTable,
    name: &'a str,
    out: Attachment,
}

impl Encoder<'_> {
    /// Resolves constants, checks domains, simplifies, and turns affine shared
    /// subtrees into defined variables. Other shared subtrees are inlined.
    fn prepare(&mut self, e: &LimitExpr) -> Result<LimitExpr, LinearizeError> {
        let mut consts = BTreeMap::new();
        for v in e.variables() {
            match self.symbols.get(&v) {
                None => {
                    return Err(LinearizeError::MissingSymbol {
                        constraint: self.name.to_string(),
                        name: v,
                    })
                }
                Some(Symbol::Const(c)) => {
                    consts.insert(v, LimitExpr::Const(*c));
                }
                Some(_) => {
                    let domain = self.symbols.domains.domain(&v);
                    if !domain.is_finite() {
                        return Err(LinearizeError::UnboundedDomain {
                            constraint: self.name.to_string(),
                            name: v,
                            domain,
                        });
                    }
                }
            }
        }
        let s = simplify(&e.substitute(&consts), &self.symbols.domains);
        let mut inline = BTreeMap::new();
        for def in s.definitions {
            let body = def.body.substitute(&inline);
            if body.is_affine() {
                let domain = bounds(&body, &self.symbols.domains);
                let lin = self.affine(&body)?;
                let var = self.fresh(&def.name, domain)?;
                let row = format!("{}_{}", self.name, def.name);
                self.model
                    .add_relation(row.clone(), LinExpr::from(var), Relation::Eq, &lin)?;
                self.out.rows.push(row);
                self.symbols.bind_var(def.name, var, domain);
            } else {
                inline.insert(def.name, body);
            }
        }
        Ok(s.expr.substitute(&inline))
    }

    fn fresh(&mut self, suffix: &str, domain: Interval) -> Result<VarId, LinearizeError> {
        let name = format!("__mm_{}_{}", self.name, suffix);
        let id = self
            .model
            .add_var(name.clone(), VarKind::Continuous, domain.lo, domain.hi)?;
        self.out.variables.push(name);
        Ok(id)
    }

    fn row(&mut self, path: &str, lhs: LinExpr, rel: Relation, rhs: &LinExpr) -> Result<(), LinearizeError> {
        let name = if path == "0" {
            self.name.to_string()
        } else {
            format!("{}_{}", self.name, path)
        };
        self.model.add_relation(name.clone(), lhs, rel, rhs)?;
        self.out.rows.push(name);
        Ok(())
    }

    fn affine(&self, e: &LimitExpr) -> Result<LinExpr, LinearizeError> {
        Ok(match e {
            LimitExpr::Const(c) => LinExpr::constant(*c),
            LimitExpr::Var(v) => match self.symbols.get(v) {
                Some(Symbol::Var(id)) => LinExpr::from(*id),
                Some(Symbol::Const(c)) => LinExpr::constant(*c),
                Some(Symbol::Linear(l)) => l.clone(),
                None => {
                    return Err(LinearizeError::MissingSymbol {
                        constraint: self.name.to_string(),
                        name: v.clone(),
                    })
                }
            },
            LimitExpr::Neg(c) => self.affine(c)?.scaled(-1.0),
            LimitExpr::Mul(s, c) => self.affine(c)?.scaled(*s),
            LimitExpr::Add(cs) => {
                let mut out = LinExpr::new();
                for c in cs {
                    out.add_expr(&self.affine(c)?, 1.0);
                }
                out
            }
            LimitExpr::Min(_) | LimitExpr::Max(_) => unreachable!("affine() on a min/max node"),
        })
    }

    /// Value standing for `child` in a parent row: the child itself when
    /// affine, otherwise a fresh variable bounded by it in direction `side`.
    fn operand(&mut self, child: &LimitExpr, path: &str, side: Side) -> Result<LinExpr, LinearizeError> {
        if child.is_affine() {
            return self.affine(child);
        }
        let domain = bounds(child, &self.symbols.domains);
        if !domain.is_finite() {
            return Err(self.unbounded(path, domain));
        }
        let v = self.fresh(path, domain)?;
        self.encode(LinExpr::from(v), child, path, side)?;
        Ok(LinExpr::from(v))
    }

    fn unbounded(&self, path: &str, envelope: Interval) -> LinearizeError {
        LinearizeError::UnboundedEnvelope {
            constraint: self.name.to_string(),
            node: path.to_string(),
            envelope,
        }
    }

    fn encode(&mut self, lhs: LinExpr, e: &LimitExpr, path: &str, side: Side) -> Result<(), LinearizeError> {
        if e.is_affine() {
            let rhs = self.affine(e)?;
            return self.row(path, lhs, side.relation(), &rhs);
        }
        match (e, side) {
            (LimitExpr::Min(cs), Side::Upper) | (LimitExpr::Max(cs), Side::Lower) => {
                for (i, c) in cs.iter().enumerate() {
                    self.encode(lhs.clone(), c, &format!("{path}.{i}"), side)?;
                }
                Ok(())
            }
            (LimitExpr::Max(cs), Side::Upper) | (LimitExpr::Min(cs), Side::Lower) => {
                self.disjunction(lhs, cs, path, side)
            }
            (LimitExpr::Add(cs), _) => {
                let (affine, composite): (Vec<_>, Vec<_>) =
                    cs.iter().enumerate().partition(|(_, c)| c.is_affine());
                let mut rest = LinExpr::new();
                for (_, c) in &affine {
                    rest.add_expr(&self.affine(c)?, 1.0);
                }
                if let [(k, c)] = composite.as_slice() {
                    return self.encode(lhs.minus(&rest), c, &format!("{path}.{k}"), side);
                }
                for (k, c) in composite {
                    let v = self.operand(c, &format!("{path}.{k}"), side)?;
                    rest.add_expr(&v, 1.0);
                }
                self.row(path, lhs, side.relation(), &rest)
            }
            (LimitExpr::Neg(c), _) => self.encode(lhs.scaled(-1.0), c, &format!("{path}.0"), side.flip()),
            (LimitExpr::Mul(s, c), _) => {
                if *s == 0.0 {
                    return self.row(path, lhs, side.relation(), &LinExpr::new());
                }
                let side = if *s > 0.0 { side } else { side.flip() };
                self.encode(lhs.scaled(1.0 / s), c, &format!("{path}.0"), side)
            }
            (LimitExpr::Const(_) | LimitExpr::Var(_), _) => unreachable!("leaves are affine"),
        }
    }

    /// `lhs <= max(cs)` or `lhs >= min(cs)`: one selected child must hold.
    fn disjunction(&mut self, lhs: LinExpr, cs: &[LimitExpr], path: &str, side: Side) -> Result<(), LinearizeError> {
        let envelope = cs
            .iter()
            .map(|c| bounds(c, &self.symbols.domains))
            .reduce(Interval::hull)
            .expect("min/max nodes have children");
        if !envelope.is_finite() {
            return Err(self.unbounded(path, envelope));
        }
        let m = envelope.width() * (1.0 + BIG_M_PADDING) + BIG_M_FLOOR;
        self.out.big_m.push(BigM {
            node: path.to_string(),
            m,
            envelope,
        });
        let mut select = LinExpr::new();
        for (i, c) in cs.iter().enumerate() {
            let value = self.operand(c, &format!("{path}.{i}"), side)?;
            let b_name = format!("__mm_{}_{}.b{}", self.name, path, i);
            let b = self.model.add_binary(b_name.clone())?;
            self.out.variables.push(b_name.clone());
            self.out.binaries.push(b_name);
            select.add_term(1.0, b);
            // Upper: lhs <= value + M(1 - b). Lower: lhs >= value - M(1 - b).
            let sign = if side == Side::Upper { 1.0 } else { -1.0 };
            let rhs = value.plus_constant(sign * m).with(-sign * m, b);
            self.row(&format!("{path}.d{i}"), lhs.clone(), side.relation(), &rhs)?;
        }
        self.row(&format!("{path}.sel"), select, Relation::Eq, &LinExpr::constant(1.0))
    }
}

/// Interval of a linear expression over the model's variable bounds.
pub fn linear_bounds(model: &MilpModel, a: &LinExpr) -> Interval {
    a.terms().iter().fold(Interval::point(a.constant_part()), |acc, &(v, c)| {
        let var = model.variable(v);
        acc.add(Interval { lo: var.lb, hi: var.ub }.scale(c))
    })
}

/// Adds `t >= a` and `t >= -a`. Exact when `t` is pushed down by the
/// objective.
pub fn attach_abs(
    model: &mut MilpModel,
    t: VarId,
    a: &LinExpr,
    name: &str,
) -> Result<Vec<String>, LinearizeError> {
    let pos = format!("{name}_pos");
    let neg = format!("{name}_neg");
    model.add_relation(pos.clone(), LinExpr::from(t), Relation::Ge, a)?;
    model.add_relation(neg.clone(), LinExpr::from(t), Relation::Ge, &a.scaled(-1.0))?;
    Ok(vec![pos, neg])
}

/// Adds `t >= a - M*gate`, `t >= -a - M*gate` and `t >= 0`: `t` may drop to
/// zero when the gate is on and must cover `|a|` when it is off.
///
/// `big_m` must cover the largest `|a|` reachable within the variable bounds.
pub fn attach_gated_abs(
    model: &mut MilpModel,
    t: VarId,
    a: &LinExpr,
    gate: VarId,
    big_m: f64,
    name: &str,
) -> Result<Vec<String>, LinearizeError> {
    if model.variable(gate).kind != VarKind::Binary {
        return Err(LinearizeError::GateNotBinary {
            constraint: name.to_string(),
            gate,
        });
    }
    let needed = linear_bounds(model, a).magnitude();
    if !(big_m >= needed) {
        return Err(LinearizeError::BigMTooSmall {
            constraint: name.to_string(),
            m: big_m,
            needed,
        });
    }
    let pos = format!("{name}_pos");
    let neg = format!("{name}_neg");
    let nn = format!("{name}_nn");
    let gated = |e: LinExpr| e.with(-big_m, gate);
    model.add_relation(pos.clone(), LinExpr::from(t), Relation::Ge, &gated(a.clone()))?;
    model.add_relation(neg.clone(), LinExpr::from(t), Relation::Ge, &gated(a.scaled(-1.0)))?;
    model.add_constraint(nn.clone(), LinExpr::from(t), Relation::Ge, 0.0)?;
    Ok(vec![pos, neg, nn])
}
