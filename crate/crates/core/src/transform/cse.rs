use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::expr::LimitExpr;

/// A shared subtree pulled out by [`factor_common`].
#[derive(Debug, Clone, PartialEq)]
pub struct Definition {
    pub name: String,
    pub body: LimitExpr,
}

/// Replaces every non-leaf subtree that occurs at least twice by a fresh
/// variable `_cseN`.
///
/// Larger subtrees are extracted first. The returned definitions are in
/// dependency order: a body only mentions names defined before it.
pub fn factor_common(e: &LimitExpr) -> (LimitExpr, Vec<Definition>) {
    let taken = e.variables();
    let mut next_id = 0usize;
    let mut root = e.clone();
    let mut defs: Vec<Definition> = Vec::new();
    loop {
        let mut counts: HashMap<String, (usize, LimitExpr)> = HashMap::new();
        count(&root, &mut counts);
        for d in &defs {
            count(&d.body, &mut counts);
        }
        let best = counts
            .into_iter()
            .filter(|(_, (n, _))| *n >= 2)
            .max_by(|a, b| {
                let size = |x: &(String, (usize, LimitExpr))| x.1 .1.node_count();
                size(a).cmp(&size(b)).then_with(|| b.0.cmp(&a.0))
            });
        let Some((_, (_, target))) = best else { break };
        let name = loop {
            let candidate = format!("_cse{next_id}");
            next_id += 1;
            if !taken.contains(&candidate) {
                break candidate;
            }
        };
        let var = LimitExpr::Var(name.clone());
        root = replace(&root, &target, &var);
        for d in &mut defs {
            d.body = replace(&d.body, &target, &var);
        }
        defs.push(Definition { name, body: target });
    }
    (root, dependency_order(defs))
}

/// Substitutes definitions back, innermost last.
pub fn expand(e: &LimitExpr, defs: &[Definition]) -> LimitExpr {
    let mut out = e.clone();
    for d in defs.iter().rev() {
        let mut map = BTreeMap::new();
        map.insert(d.name.clone(), d.body.clone());
        out = out.substitute(&map);
    }
    out
}

fn count(e: &LimitExpr, counts: &mut HashMap<String, (usize, LimitExpr)>) {
    if e.is_leaf() {
        return;
    }
    counts
        .entry(e.to_string())
        .and_modify(|(n, seen)| {
            // Equal text implies equal canonical trees; compare anyway.
            if seen == e {
                *n += 1;
            }
        })
        .or_insert_with(|| (1, e.clone()));
    for c in e.children() {
        count(c, counts);
    }
}

fn replace(e: &LimitExpr, target: &LimitExpr, var: &LimitExpr) -> LimitExpr {
    if e == target {
        return var.clone();
    }
    match e {
        LimitExpr::Const(_) | LimitExpr::Var(_) => e.clone(),
        LimitExpr::Neg(x) => LimitExpr::neg(replace(x, target, var)),
        LimitExpr::Mul(c, x) => LimitExpr::mul(*c, replace(x, target, var)),
        LimitExpr::Add(xs) => LimitExpr::Add(xs.iter().map(|x| replace(x, target, var)).collect()),
        LimitExpr::Min(xs) => LimitExpr::Min(xs.iter().map(|x| replace(x, target, var)).collect()),
        LimitExpr::Max(xs) => LimitExpr::Max(xs.iter().map(|x| replace(x, target, var)).collect()),
    }
}

fn dependency_order(defs: Vec<Definition>) -> Vec<Definition> {
    let names: BTreeSet<String> = defs.iter().map(|d| d.name.clone()).collect();
    let mut pending = defs;
    let mut done: BTreeSet<String> = BTreeSet::new();
    let mut out = Vec::with_capacity(pending.len());
    while !pending.is_empty() {
        let pos = pending
            .iter()
            .position(|d| {
                d.body
                    .variables()
                    .iter()
                    .all(|v| !names.contains(v) || done.contains(v))
            })
            .expect("definitions are acyclic");
        let d = pending.remove(pos);
        done.insert(d.name.clone());
        out.push(d);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::transform::normalize;

    #[test]
    fn repeated_scaled_term_is_shared() {
        let e = normalize(
            &parse("min(max(min(-50*P_1+22500,100), min(-50*P_1+30000,50), 0) + (-50*N_2 + -100*N_3), 0) + 915")
                .unwrap(),
        );
        let (root, defs) = factor_common(&e);
        assert_eq!(defs.len(), 1);
        assert_eq!(defs[0].body.to_string(), "-50*P_1");
        assert!(!root.to_string().contains("P_1"));
        assert_eq!(expand(&root, &defs), e);
    }

    #[test]
    fn nothing_repeated_leaves_tree_alone() {
        let e = normalize(&parse("max(1000, min(-P_m+6000, -2*P_m+7000, -4*P_m+11000))").unwrap());
        let (root, defs) = factor_common(&e);
        assert_eq!(root, e);
        assert!(defs.is_empty());
    }

    #[test]
    fn shared_sum_is_extracted_once() {
        let e = normalize(&parse("min(x + y, max(x + y, z))").unwrap());
        let (root, defs) = factor_common(&e);
        assert_eq!(defs.len(), 1);
        assert_eq!(defs[0].body.to_string(), "x + y");
        assert_eq!(root.to_string(), "min(_cse0, max(_cse0, z))");
    }

    #[test]
    fn nested_repeats_are_ordered_by_dependency() {
        // `2*a` repeats inside and outside the larger shared block.
        let e = normalize(&parse("min(max(2*a, b) + 1, max(2*a, b) + 1 - 2*a, 2*a + c)").unwrap());
        let (root, defs) = factor_common(&e);
        assert!(defs.len() >= 2);
        for (i, d) in defs.iter().enumerate() {
            for v in d.body.variables() {
                if let Some(j) = defs.iter().position(|o| o.name == v) {
                    assert!(j < i, "{} uses later {}", d.name, v);
                }
            }
        }
        assert_eq!(expand(&root, &defs), e);
    }

    #[test]
    fn fresh_names_avoid_existing_variables() {
        let e = normalize(&parse("min(_cse0 + y, max(_cse0 + y, 1))").unwrap());
        let (_, defs) = factor_common(&e);
        assert_eq!(defs[0].name, "_cse1");
    }
}
