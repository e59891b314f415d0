//! Limit expressions: piecewise-linear nested min/max functions over named
//! grid quantities.
//!
//! A stability limit such as
//!
//! ```text
//! max(1000, min(-P_m + 6000, -2*P_m + 7000, -4*P_m + 11000))
//! ```
//!
//! is parsed into a [`LimitExpr`] tree. Trees are immutable values; every
//! transformation in [`crate::transform`] returns a new tree.

mod parse;
mod print;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

pub use parse::{parse, ParseError};

/// Largest magnitude accepted for a numeric literal.
pub const MAX_LITERAL: f64 = 1e15;

/// A node of a limit expression.
#[derive(Debug, Clone, PartialEq)]
pub enum LimitExpr {
    Const(f64),
    Var(String),
    Neg(Box<LimitExpr>),
    Add(Vec<LimitExpr>),
    /// `scalar * child`; the scalar is always a finite constant.
    Mul(f64, Box<LimitExpr>),
    Min(Vec<LimitExpr>),
    Max(Vec<LimitExpr>),
}

/// Variable values used by [`LimitExpr::evaluate`].
pub type Binding = HashMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no value bound for variable `{0}`")]
    MissingBinding(String),
}

impl LimitExpr {
    pub fn var(name: impl Into<String>) -> Self {
        LimitExpr::Var(name.into())
    }

    pub fn neg(e: LimitExpr) -> Self {
        LimitExpr::Neg(Box::new(e))
    }

    pub fn mul(scalar: f64, e: LimitExpr) -> Self {
        LimitExpr::Mul(scalar, Box::new(e))
    }

    /// `Min` of the children, collapsing a single child to itself.
    pub fn min_of(mut children: Vec<LimitExpr>) -> Self {
        if children.len() == 1 {
            children.pop().unwrap()
        } else {
            LimitExpr::Min(children)
        }
    }

    /// `Max` of the children, collapsing a single child to itself.
    pub fn max_of(mut children: Vec<LimitExpr>) -> Self {
        if children.len() == 1 {
            children.pop().unwrap()
        } else {
            LimitExpr::Max(children)
        }
    }

    /// `Add` of the children, collapsing a single child to itself.
    pub fn sum_of(mut children: Vec<LimitExpr>) -> Self {
        match children.len() {
            0 => LimitExpr::Const(0.0),
            1 => children.pop().unwrap(),
            _ => LimitExpr::Add(children),
        }
    }

    /// Exact recursive evaluation.
    pub fn evaluate(&self, binding: &Binding) -> Result<f64, EvalError> {
        self.evaluate_with(&|name| binding.get(name).copied())
    }

    /// Evaluation with an arbitrary variable lookup.
    pub fn evaluate_with(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64, EvalError> {
        Ok(match self {
            LimitExpr::Const(c) => *c,
            LimitExpr::Var(name) => {
                lookup(name).ok_or_else(|| EvalError::MissingBinding(name.clone()))?
            }
            LimitExpr::Neg(e) => -e.evaluate_with(lookup)?,
            LimitExpr::Mul(c, e) => c * e.evaluate_with(lookup)?,
            LimitExpr::Add(es) => {
                let mut acc = 0.0;
                for e in es {
                    acc += e.evaluate_with(lookup)?;
                }
                acc
            }
            LimitExpr::Min(es) => {
                let mut acc = f64::INFINITY;
                for e in es {
                    acc = acc.min(e.evaluate_with(lookup)?);
                }
                acc
            }
            LimitExpr::Max(es) => {
                let mut acc = f64::NEG_INFINITY;
                for e in es {
                    acc = acc.max(e.evaluate_with(lookup)?);
                }
                acc
            }
        })
    }

    pub fn children(&self) -> &[LimitExpr] {
        match self {
            LimitExpr::Const(_) | LimitExpr::Var(_) => &[],
            LimitExpr::Neg(e) | LimitExpr::Mul(_, e) => std::slice::from_ref(e),
            LimitExpr::Add(es) | LimitExpr::Min(es) | LimitExpr::Max(es) => es,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, LimitExpr::Const(_) | LimitExpr::Var(_))
    }

    /// True when the tree contains no `Min`/`Max` node.
    pub fn is_affine(&self) -> bool {
        match self {
            LimitExpr::Min(_) | LimitExpr::Max(_) => false,
            _ => self.children().iter().all(LimitExpr::is_affine),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(LimitExpr::node_count).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(LimitExpr::depth).max().unwrap_or(0)
    }

    /// Depth counted in non-affine levels: an affine subtree counts as 0, any
    /// other node adds one level above its deepest child.
    pub fn nesting_depth(&self) -> usize {
        if self.is_affine() {
            0
        } else {
            1 + self.children().iter().map(LimitExpr::nesting_depth).max().unwrap_or(0)
        }
    }

    /// Number of binary selectors needed if every `Min`/`Max` node were
    /// linearized in its binary form. Used only for reporting.
    pub fn min_max_count(&self) -> usize {
        let own = usize::from(matches!(self, LimitExpr::Min(_) | LimitExpr::Max(_)));
        own + self.children().iter().map(LimitExpr::min_max_count).sum::<usize>()
    }

    /// Free variable names, sorted.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            LimitExpr::Var(name) => {
                out.insert(name.clone());
            }
            _ => self.children().iter().for_each(|c| c.collect_vars(out)),
        }
    }

    /// Replaces every occurrence of the named variables by the given trees.
    pub fn substitute(&self, defs: &BTreeMap<String, LimitExpr>) -> LimitExpr {
        self.map_leaves(&|leaf| match leaf {
            LimitExpr::Var(name) => defs.get(name).cloned(),
            _ => None,
        })
    }

    fn map_leaves(&self, f: &dyn Fn(&LimitExpr) -> Option<LimitExpr>) -> LimitExpr {
        match self {
            LimitExpr::Const(_) | LimitExpr::Var(_) => f(self).unwrap_or_else(|| self.clone()),
            LimitExpr::Neg(e) => LimitExpr::Neg(Box::new(e.map_leaves(f))),
            LimitExpr::Mul(c, e) => LimitExpr::Mul(*c, Box::new(e.map_leaves(f))),
            LimitExpr::Add(es) => LimitExpr::Add(es.iter().map(|e| e.map_leaves(f)).collect()),
            LimitExpr::Min(es) => LimitExpr::Min(es.iter().map(|e| e.map_leaves(f)).collect()),
            LimitExpr::Max(es) => LimitExpr::Max(es.iter().map(|e| e.map_leaves(f)).collect()),
        }
    }

    /// Copy of the tree with the children of every commutative node sorted in
    /// canonical order: constants (ascending), then variables
    /// (lexicographic), then composite nodes by printed form.
    pub fn canonical(&self) -> LimitExpr {
        match self {
            LimitExpr::Const(_) | LimitExpr::Var(_) => self.clone(),
            LimitExpr::Neg(e) => LimitExpr::Neg(Box::new(e.canonical())),
            LimitExpr::Mul(c, e) => LimitExpr::Mul(*c, Box::new(e.canonical())),
            LimitExpr::Add(es) => LimitExpr::Add(canonical_children(es)),
            LimitExpr::Min(es) => LimitExpr::Min(canonical_children(es)),
            LimitExpr::Max(es) => LimitExpr::Max(canonical_children(es)),
        }
    }
}

/// Sorts already-canonical siblings into canonical order.
pub(crate) fn sort_canonical(children: &mut Vec<LimitExpr>) {
    let mut keyed: Vec<(SortKey, LimitExpr)> =
        children.drain(..).map(|c| (SortKey::of(&c), c)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    children.extend(keyed.into_iter().map(|(_, c)| c));
}

fn canonical_children(children: &[LimitExpr]) -> Vec<LimitExpr> {
    let mut keyed: Vec<(SortKey, LimitExpr)> = children
        .iter()
        .map(|c| {
            let c = c.canonical();
            (SortKey::of(&c), c)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.into_iter().map(|(_, c)| c).collect()
}

/// Ordering key implementing the canonical child order.
#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum SortKey {
    Const(OrdF64),
    Var(String),
    Composite(String),
}

impl SortKey {
    pub(crate) fn of(e: &LimitExpr) -> SortKey {
        match e {
            LimitExpr::Const(c) => SortKey::Const(OrdF64(*c)),
            LimitExpr::Var(v) => SortKey::Var(v.clone()),
            other => SortKey::Composite(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct OrdF64(pub f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EQ1: &str = "max(1000, min(-P_m+6000, -2*P_m+7000, -4*P_m+11000))";
    const EQ3: &str =
        "min(max(min(-50*P_1+22500,100), min(-50*P_1+30000,50), 0) + (-50*N_2 + -100*N_3), 0) + 915";

    fn bind(pairs: &[(&str, f64)]) -> Binding {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn evaluates_power_interface_limit() {
        let e = parse(EQ1).unwrap();
        assert_eq!(e.evaluate(&bind(&[("P_m", 2000.0)])).unwrap(), 3000.0);
    }

    #[test]
    fn evaluates_three_plant_limit() {
        let e = parse(EQ3).unwrap();
        let b = bind(&[("P_1", 400.0), ("N_2", 0.0), ("N_3", 0.0)]);
        assert_eq!(e.evaluate(&b).unwrap(), 915.0);
        let b = bind(&[("P_1", 400.0), ("N_2", 3.0), ("N_3", 0.0)]);
        assert_eq!(e.evaluate(&b).unwrap(), 865.0);
    }

    #[test]
    fn three_plant_limit_has_depth_five() {
        let e = parse(EQ3).unwrap();
        assert_eq!(e.nesting_depth(), 5, "{e:?}");
        assert!(matches!(e, LimitExpr::Add(_)));
    }

    #[test]
    fn missing_binding_is_reported() {
        let e = parse("x + y").unwrap();
        let err = e.evaluate(&bind(&[("x", 1.0)])).unwrap_err();
        assert_eq!(err, EvalError::MissingBinding("y".into()));
    }

    #[test]
    fn single_child_min_evaluates_as_child() {
        let child = parse("3*x + 1").unwrap();
        let wrapped = LimitExpr::Min(vec![child.clone()]);
        let b = bind(&[("x", 2.5)]);
        assert_eq!(wrapped.evaluate(&b), child.evaluate(&b));
    }

    #[test]
    fn canonical_order_puts_constants_then_vars_then_composites() {
        let e = LimitExpr::Max(vec![
            LimitExpr::neg(LimitExpr::var("a")),
            LimitExpr::var("z"),
            LimitExpr::Const(5.0),
            LimitExpr::var("b"),
            LimitExpr::Const(-1.0),
        ]);
        assert_eq!(e.canonical().to_string(), "max(-1, 5, b, z, -a)");
    }

    #[test]
    fn substitution_replaces_every_occurrence() {
        let e = parse("min(x, x + 1)").unwrap();
        let mut defs = BTreeMap::new();
        defs.insert("x".to_string(), parse("2*y").unwrap());
        let s = e.substitute(&defs);
        assert_eq!(s.variables().into_iter().collect::<Vec<_>>(), vec!["y"]);
        let b = bind(&[("y", 3.0)]);
        assert_eq!(s.evaluate(&b).unwrap(), 6.0);
    }
}
