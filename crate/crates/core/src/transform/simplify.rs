use serde::Serialize;

use super::cse::{factor_common, Definition};
use super::interval::{bounds, DomainMap, Interval};
use super::normalize::normalize;
use super::prune::prune;
use crate::expr::LimitExpr;

/// Output of the full transformation pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplified {
    pub expr: LimitExpr,
    pub definitions: Vec<Definition>,
    pub report: SimplifyReport,
}

/// Counters describing what the pipeline did.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplifyReport {
    pub nodes_in: usize,
    pub nodes_normalized: usize,
    pub nodes_pruned: usize,
    pub pruned_node_count: usize,
    pub nodes_out: usize,
    pub min_max_in: usize,
    pub min_max_out: usize,
    pub shared_subtrees: usize,
    pub range: Interval,
    /// Variables that fell back to the default domain.
    pub defaulted_variables: Vec<String>,
}

/// Runs normalize, prune and factor_common in that order.
///
/// ```
/// use stablim::expr::parse;
/// use stablim::transform::{simplify, DomainMap, Interval};
///
/// let mut d = DomainMap::new();
/// d.insert("P_1", Interval::new(0.0, 400.0).unwrap());
/// let s = simplify(&parse("min(100, -50*P_1 + 22500)").unwrap(), &d);
/// assert_eq!(s.expr.to_string(), "100");
/// assert_eq!(s.report.pruned_node_count, 5);
/// ```
pub fn simplify(e: &LimitExpr, d: &DomainMap) -> Simplified {
    let defaulted: Vec<String> = d.missing(e).into_iter().collect();
    for v in &defaulted {
        log::warn!(
            "variable `{v}` has no domain; using {}",
            d.default_domain()
        );
    }
    let normalized = normalize(e);
    let pruned = prune(&normalized, d);
    let range = bounds(&pruned, d);
    let (expr, definitions) = factor_common(&pruned);
    let report = SimplifyReport {
        nodes_in: e.node_count(),
        nodes_normalized: normalized.node_count(),
        nodes_pruned: pruned.node_count(),
        pruned_node_count: normalized.node_count() - pruned.node_count(),
        nodes_out: expr.node_count()
            + definitions.iter().map(|d| d.body.node_count()).sum::<usize>(),
        min_max_in: e.min_max_count(),
        min_max_out: pruned.min_max_count(),
        shared_subtrees: definitions.len(),
        range,
        defaulted_variables: defaulted,
    };
    Simplified {
        expr,
        definitions,
        report,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn reports_nothing_pruned_on_overlapping_branches() {
        let mut d = DomainMap::new();
        d.insert("P_m", Interval::new(0.0, 3000.0).unwrap());
        let e = parse("max(1000, min(-P_m+6000, -2*P_m+7000, -4*P_m+11000))").unwrap();
        let s = simplify(&e, &d);
        assert_eq!(s.report.pruned_node_count, 0);
        assert!(s.definitions.is_empty());
        assert_eq!(s.expr, e.canonical());
    }

    #[test]
    fn lists_defaulted_variables() {
        let s = simplify(&parse("max(x, y)").unwrap(), &DomainMap::new());
        assert_eq!(s.report.defaulted_variables, vec!["x", "y"]);
        assert_eq!(s.report.range, DomainMap::FALLBACK);
    }
}
