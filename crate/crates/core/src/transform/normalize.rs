use std::collections::BTreeMap;

use crate::expr::{sort_canonical, LimitExpr};

/// Rewrites `e` into normal form.
///
/// Negations and scalars are pushed down to the leaves (a negative scalar
/// turns `min` into `max` and back), sums are distributed under scalars,
/// same-kind nesting is flattened, constants and like terms are merged,
/// duplicate `min`/`max` siblings are dropped and all children are sorted in
/// canonical order. In the result `Neg` and `Mul` only wrap variables.
pub fn normalize(e: &LimitExpr) -> LimitExpr {
    match e {
        LimitExpr::Const(_) | LimitExpr::Var(_) => e.clone(),
        LimitExpr::Neg(x) => scale(-1.0, normalize(x)),
        LimitExpr::Mul(c, x) => scale(*c, normalize(x)),
        LimitExpr::Add(xs) => make_add(xs.iter().map(normalize).collect()),
        LimitExpr::Min(xs) => make_min(xs.iter().map(normalize).collect()),
        LimitExpr::Max(xs) => make_max(xs.iter().map(normalize).collect()),
    }
}

/// `c * n` for a normalized `n`.
fn scale(c: f64, n: LimitExpr) -> LimitExpr {
    if c == 0.0 {
        return LimitExpr::Const(0.0);
    }
    match n {
        LimitExpr::Const(v) => LimitExpr::Const(c * v),
        LimitExpr::Var(_) => linear_term(c, n),
        LimitExpr::Neg(x) => scale(-c, *x),
        LimitExpr::Mul(d, x) => scale(c * d, *x),
        LimitExpr::Add(xs) => make_add(xs.into_iter().map(|x| scale(c, x)).collect()),
        LimitExpr::Min(xs) => {
            let scaled = xs.into_iter().map(|x| scale(c, x)).collect();
            if c > 0.0 {
                make_min(scaled)
            } else {
                make_max(scaled)
            }
        }
        LimitExpr::Max(xs) => {
            let scaled = xs.into_iter().map(|x| scale(c, x)).collect();
            if c > 0.0 {
                make_max(scaled)
            } else {
                make_min(scaled)
            }
        }
    }
}

fn linear_term(c: f64, var: LimitExpr) -> LimitExpr {
    if c == 1.0 {
        var
    } else if c == -1.0 {
        LimitExpr::neg(var)
    } else if c == 0.0 {
        LimitExpr::Const(0.0)
    } else {
        LimitExpr::mul(c, var)
    }
}

/// Coefficient and variable name of a normalized linear leaf term.
fn as_linear(n: &LimitExpr) -> Option<(f64, &str)> {
    match n {
        LimitExpr::Var(v) => Some((1.0, v)),
        LimitExpr::Neg(x) => match x.as_ref() {
            LimitExpr::Var(v) => Some((-1.0, v)),
            _ => None,
        },
        LimitExpr::Mul(c, x) => match x.as_ref() {
            LimitExpr::Var(v) => Some((*c, v)),
            _ => None,
        },
        _ => None,
    }
}

fn make_add(children: Vec<LimitExpr>) -> LimitExpr {
    let mut flat = Vec::with_capacity(children.len());
    for c in children {
        match c {
            LimitExpr::Add(inner) => flat.extend(inner),
            other => flat.push(other),
        }
    }
    let mut constant = 0.0;
    let mut has_constant = false;
    let mut coefs: BTreeMap<String, f64> = BTreeMap::new();
    let mut rest = Vec::new();
    for c in flat {
        if let LimitExpr::Const(v) = c {
            constant += v;
            has_constant = true;
        } else if let Some((k, v)) = as_linear(&c) {
            *coefs.entry(v.to_string()).or_insert(0.0) += k;
        } else {
            rest.push(c);
        }
    }
    let mut out = Vec::new();
    for (name, k) in coefs {
        if k != 0.0 {
            out.push(linear_term(k, LimitExpr::Var(name)));
        }
    }
    out.extend(rest);
    if has_constant && (constant != 0.0 || out.is_empty()) {
        out.push(LimitExpr::Const(constant));
    }
    sort_canonical(&mut out);
    LimitExpr::sum_of(out)
}

fn make_min(children: Vec<LimitExpr>) -> LimitExpr {
    make_extremum(children, true)
}

fn make_max(children: Vec<LimitExpr>) -> LimitExpr {
    make_extremum(children, false)
}

fn make_extremum(children: Vec<LimitExpr>, is_min: bool) -> LimitExpr {
    let mut flat = Vec::with_capacity(children.len());
    for c in children {
        match c {
            LimitExpr::Min(inner) if is_min => flat.extend(inner),
            LimitExpr::Max(inner) if !is_min => flat.extend(inner),
            other => flat.push(other),
        }
    }
    let mut constant: Option<f64> = None;
    let mut out = Vec::with_capacity(flat.len());
    for c in flat {
        if let LimitExpr::Const(v) = c {
            constant = Some(match constant {
                None => v,
                Some(k) if is_min => k.min(v),
                Some(k) => k.max(v),
            });
        } else {
            out.push(c);
        }
    }
    if let Some(k) = constant {
        out.push(LimitExpr::Const(k));
    }
    sort_canonical(&mut out);
    out.dedup();
    if is_min {
        LimitExpr::min_of(out)
    } else {
        LimitExpr::max_of(out)
    }
}

/// Size-preserving cleanup: flattens same-kind nesting, merges constants,
/// folds constant scalars, collapses single children, drops duplicate
/// `min`/`max` siblings and sorts. Never increases the node count.
pub(crate) fn tidy(e: &LimitExpr) -> LimitExpr {
    match e {
        LimitExpr::Const(_) | LimitExpr::Var(_) => e.clone(),
        LimitExpr::Neg(x) => match tidy(x) {
            LimitExpr::Const(v) => LimitExpr::Const(-v),
            LimitExpr::Neg(inner) => *inner,
            LimitExpr::Mul(c, inner) => LimitExpr::Mul(-c, inner),
            other => LimitExpr::neg(other),
        },
        LimitExpr::Mul(c, x) => match tidy(x) {
            LimitExpr::Const(v) => LimitExpr::Const(c * v),
            LimitExpr::Mul(d, inner) => LimitExpr::Mul(c * d, inner),
            LimitExpr::Neg(inner) => LimitExpr::Mul(-c, inner),
            other if *c == 1.0 => other,
            other => LimitExpr::mul(*c, other),
        },
        LimitExpr::Add(xs) => {
            let mut flat = Vec::with_capacity(xs.len());
            for c in xs.iter().map(tidy) {
                match c {
                    LimitExpr::Add(inner) => flat.extend(inner),
                    other => flat.push(other),
                }
            }
            let mut constant: Option<f64> = None;
            let mut out = Vec::with_capacity(flat.len());
            for c in flat {
                match c {
                    LimitExpr::Const(v) => *constant.get_or_insert(0.0) += v,
                    other => out.push(other),
                }
            }
            match constant {
                Some(k) if k != 0.0 || out.is_empty() => out.push(LimitExpr::Const(k)),
                _ => {}
            }
            sort_canonical(&mut out);
            LimitExpr::sum_of(out)
        }
        LimitExpr::Min(xs) => make_min(xs.iter().map(tidy).collect()),
        LimitExpr::Max(xs) => make_max(xs.iter().map(tidy).collect()),
    }
}
