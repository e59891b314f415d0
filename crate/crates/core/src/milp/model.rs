use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a variable in its model's registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lb: f64,
    pub ub: f64,
}

/// Linear form `Σ coef·var + constant` with merged, id-sorted terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinExpr {
    terms: Vec<(VarId, f64)>,
    constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(coef: f64, var: VarId) -> Self {
        LinExpr::new().with(coef, var)
    }

    /// Adds `coef·var`, merging with an existing term.
    pub fn add_term(&mut self, coef: f64, var: VarId) {
        match self.terms.binary_search_by_key(&var, |t| t.0) {
            Ok(i) => {
                self.terms[i].1 += coef;
                if self.terms[i].1 == 0.0 {
                    self.terms.remove(i);
                }
            }
            Err(i) if coef != 0.0 => self.terms.insert(i, (var, coef)),
            Err(_) => {}
        }
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn with(mut self, coef: f64, var: VarId) -> Self {
        self.add_term(coef, var);
        self
    }

    pub fn plus_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add_expr(&mut self, other: &LinExpr, factor: f64) {
        for &(v, c) in &other.terms {
            self.add_term(factor * c, v);
        }
        self.constant += factor * other.constant;
    }

    pub fn plus(mut self, other: &LinExpr) -> Self {
        self.add_expr(other, 1.0);
        self
    }

    pub fn minus(mut self, other: &LinExpr) -> Self {
        self.add_expr(other, -1.0);
        self
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = LinExpr::new();
        out.add_expr(self, factor);
        out
    }

    pub fn terms(&self) -> &[(VarId, f64)] {
        &self.terms
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coef(&self, var: VarId) -> f64 {
        self.terms
            .binary_search_by_key(&var, |t| t.0)
            .map(|i| self.terms[i].1)
            .unwrap_or(0.0)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v.0]).sum::<f64>()
    }
}

impl From<VarId> for LinExpr {
    fn from(v: VarId) -> Self {
        LinExpr::term(1.0, v)
    }
}

impl FromIterator<(f64, VarId)> for LinExpr {
    fn from_iter<I: IntoIterator<Item = (f64, VarId)>>(iter: I) -> Self {
        let mut e = LinExpr::new();
        for (c, v) in iter {
            e.add_term(c, v);
        }
        e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

/// Row `lhs relation rhs`; the constant of `lhs` is kept at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub lhs: LinExpr,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let v = self.lhs.value(x);
        match self.relation {
            Relation::Le => (v - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - v).max(0.0),
            Relation::Eq => (v - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate constraint name `{0}`")]
    DuplicateConstraint(String),
    #[error("variable `{name}` has invalid bounds [{lb}, {ub}]")]
    InvalidBounds { name: String, lb: f64, ub: f64 },
    #[error("non-finite coefficient in `{0}`")]
    NonFinite(String),
    #[error("unknown variable {0}")]
    UnknownVariable(VarId),
}

/// Variables, rows and objective of a mixed-binary linear program.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub name: String,
    vars: Vec<Variable>,
    var_names: HashMap<String, VarId>,
    constraints: Vec<Constraint>,
    con_names: HashMap<String, usize>,
    sense: Sense,
    objective: LinExpr,
}

impl Default for MilpModel {
    fn default() -> Self {
        MilpModel::new("model")
    }
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        MilpModel {
            name: name.into(),
            vars: Vec::new(),
            var_names: HashMap::new(),
            constraints: Vec::new(),
            con_names: HashMap::new(),
            sense: Sense::Minimize,
            objective: LinExpr::new(),
        }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        lb: f64,
        ub: f64,
    ) -> Result<VarId, ModelError> {
        let name = name.into();
        let (lb, ub) = match kind {
            VarKind::Binary => (lb.max(0.0), ub.min(1.0)),
            VarKind::Continuous => (lb, ub),
        };
        if lb.is_nan() || ub.is_nan() || lb > ub || lb == f64::INFINITY || ub == f64::NEG_INFINITY
        {
            return Err(ModelError::InvalidBounds { name, lb, ub });
        }
        if self.var_names.contains_key(&name) {
            return Err(ModelError::DuplicateVariable(name));
        }
        let id = VarId(self.vars.len());
        self.var_names.insert(name.clone(), id);
        self.vars.push(Variable { name, kind, lb, ub });
        Ok(id)
    }

    pub fn add_continuous(
        &mut self,
        name: impl Into<String>,
        lb: f64,
        ub: f64,
    ) -> Result<VarId, ModelError> {
        self.add_var(name, VarKind::Continuous, lb, ub)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<VarId, ModelError> {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    /// Adds `lhs relation rhs`, moving the constant of `lhs` to the right.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        lhs: LinExpr,
        relation: Relation,
        rhs: f64,
    ) -> Result<usize, ModelError> {
        let name = name.into();
        if self.con_names.contains_key(&name) {
            return Err(ModelError::DuplicateConstraint(name));
        }
        if !rhs.is_finite() || lhs.terms.iter().any(|t| !t.1.is_finite()) {
            return Err(ModelError::NonFinite(name));
        }
        if let Some(&(v, _)) = lhs.terms.iter().find(|t| t.0 .0 >= self.vars.len()) {
            return Err(ModelError::UnknownVariable(v));
        }
        let rhs = rhs - lhs.constant;
        let lhs = LinExpr {
            terms: lhs.terms,
            constant: 0.0,
        };
        let idx = self.constraints.len();
        self.con_names.insert(name.clone(), idx);
        self.constraints.push(Constraint {
            name,
            lhs,
            relation,
            rhs,
        });
        Ok(idx)
    }

    /// Shorthand for `lhs relation rhs` with both sides linear.
    pub fn add_relation(
        &mut self,
        name: impl Into<String>,
        lhs: LinExpr,
        relation: Relation,
        rhs: &LinExpr,
    ) -> Result<usize, ModelError> {
        self.add_constraint(name, lhs.minus(rhs), relation, 0.0)
    }

    pub fn set_objective(&mut self, sense: Sense, objective: LinExpr) {
        self.sense = sense;
        self.objective = objective;
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn objective(&self) -> &LinExpr {
        &self.objective
    }

    pub fn variables(&self) -> &[Variable] {
        &self.vars
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.var_names.get(name).copied()
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, name: &str) -> Option<&Constraint> {
        self.con_names.get(name).map(|&i| &self.constraints[i])
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| VarId(i))
    }

    pub fn num_binaries(&self) -> usize {
        self.binaries().count()
    }

    /// Tightens the bounds of a variable; used to fix values.
    pub fn set_bounds(&mut self, id: VarId, lb: f64, ub: f64) -> Result<(), ModelError> {
        let v = self.vars.get_mut(id.0).ok_or(ModelError::UnknownVariable(id))?;
        if lb.is_nan() || ub.is_nan() || lb > ub {
            return Err(ModelError::InvalidBounds {
                name: v.name.clone(),
                lb,
                ub,
            });
        }
        v.lb = lb;
        v.ub = ub;
        Ok(())
    }

    /// Largest row or bound violation of `x`, and binary integrality gap.
    pub fn max_violation(&self, x: &[f64]) -> (f64, f64) {
        let mut worst = self
            .constraints
            .iter()
            .map(|c| c.violation(x))
            .fold(0.0, f64::max);
        let mut frac: f64 = 0.0;
        for (v, &val) in self.vars.iter().zip(x) {
            worst = worst.max(v.lb - val).max(val - v.ub);
            if v.kind == VarKind::Binary {
                frac = frac.max((val - val.round()).abs());
            }
        }
        (worst, frac)
    }

    /// Value of the objective at `x`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.value(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terms_merge_and_cancel() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, 1.0).unwrap();
        let y = m.add_continuous("y", 0.0, 1.0).unwrap();
        let e = LinExpr::term(2.0, y).with(1.0, x).with(3.0, y).with(-1.0, x);
        assert_eq!(e.terms(), &[(y, 5.0)]);
    }

    #[test]
    fn constraint_constant_moves_right() {
        let mut m = MilpModel::new("t");
        let x = m.add_continuous("x", 0.0, 10.0).unwrap();
        let i = m
            .add_constraint("c", LinExpr::term(1.0, x).plus_constant(3.0), Relation::Le, 5.0)
            .unwrap();
        assert_eq!(m.constraints()[i].rhs, 2.0);
        assert_eq!(m.constraints()[i].lhs.constant_part(), 0.0);
    }

    #[test]
    fn names_are_unique() {
        let mut m = MilpModel::new("t");
        m.add_binary("b").unwrap();
        assert!(matches!(m.add_binary("b"), Err(ModelError::DuplicateVariable(_))));
        m.add_constraint("r", LinExpr::new(), Relation::Le, 1.0).unwrap();
        assert!(m.add_constraint("r", LinExpr::new(), Relation::Le, 1.0).is_err());
    }

    #[test]
    fn rejects_reversed_bounds() {
        let mut m = MilpModel::new("t");
        assert!(m.add_continuous("x", 2.0, 1.0).is_err());
        assert!(m.add_continuous("y", f64::NEG_INFINITY, f64::INFINITY).is_ok());
    }
}
