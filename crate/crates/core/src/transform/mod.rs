//! Semantics-preserving rewrites of limit expressions and the interval
//! analysis that drives pruning and big-M selection.

mod cse;
mod interval;
mod normalize;
mod prune;
mod simplify;

pub use cse::{expand, factor_common, Definition};
pub use interval::{bounds, DomainMap, Interval, IntervalError, DEFAULT_DOMAIN_ENV};
pub use normalize::normalize;
pub use prune::{prune, DOMINANCE_TOL};
pub use simplify::{simplify, SimplifyReport, Simplified};
