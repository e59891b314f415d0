use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::LimitExpr;

/// Environment variable overriding the default variable domain, as `lo,hi`.
pub const DEFAULT_DOMAIN_ENV: &str = "STABLIM_DEFAULT_DOMAIN";

/// Closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntervalError {
    #[error("interval bounds out of order: [{0}, {1}]")]
    Reversed(f64, f64),
    #[error("interval bound is NaN")]
    NaN,
    #[error("cannot parse domain `{0}`; expected `lo,hi`")]
    Syntax(String),
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if lo.is_nan() || hi.is_nan() {
            Err(IntervalError::NaN)
        } else if lo > hi {
            Err(IntervalError::Reversed(lo, hi))
        } else {
            Ok(Interval { lo, hi })
        }
    }

    pub const fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    /// Largest absolute value reached on the interval.
    pub fn magnitude(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn add(self, other: Interval) -> Interval {
        Interval {
            lo: sum_down(self.lo, other.lo),
            hi: sum_up(self.hi, other.hi),
        }
    }

    pub fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn scale(self, c: f64) -> Interval {
        let (a, b) = if c >= 0.0 {
            (self.lo, self.hi)
        } else {
            (self.hi, self.lo)
        };
        Interval {
            lo: prod_down(c, a),
            hi: prod_up(c, b),
        }
    }

    pub fn min(self, other: Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    pub fn max(self, other: Interval) -> Interval {
        Interval {
            lo: self.lo.max(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Smallest interval containing both.
    pub fn hull(self, other: Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl std::str::FromStr for Interval {
    type Err = IntervalError;

    /// Accepts `lo,hi`, optionally wrapped in brackets.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = s.trim().trim_start_matches('[').trim_end_matches(']');
        let (lo, hi) = body
            .split_once(',')
            .ok_or_else(|| IntervalError::Syntax(s.to_string()))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| IntervalError::Syntax(s.to_string()))
        };
        Interval::new(parse(lo)?, parse(hi)?)
    }
}

// Rounded results are widened by one ulp unless the operation was exact, so
// exact inputs keep exact bounds.
fn sum_err(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn sum_down(a: f64, b: f64) -> f64 {
    let (s, e) = sum_err(a, b);
    if s.is_finite() && e < 0.0 {
        s.next_down()
    } else {
        s
    }
}

fn sum_up(a: f64, b: f64) -> f64 {
    let (s, e) = sum_err(a, b);
    if s.is_finite() && e > 0.0 {
        s.next_up()
    } else {
        s
    }
}

fn prod_down(a: f64, b: f64) -> f64 {
    let p = a * b;
    if p.is_finite() && a.mul_add(b, -p) < 0.0 {
        p.next_down()
    } else {
        p
    }
}

fn prod_up(a: f64, b: f64) -> f64 {
    let p = a * b;
    if p.is_finite() && a.mul_add(b, -p) > 0.0 {
        p.next_up()
    } else {
        p
    }
}

/// Variable domains used by bound analysis, with a fallback for variables
/// that have none.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainMap {
    domains: BTreeMap<String, Interval>,
    default: Interval,
}

impl Default for DomainMap {
    fn default() -> Self {
        DomainMap {
            domains: BTreeMap::new(),
            default: DomainMap::FALLBACK,
        }
    }
}

impl DomainMap {
    pub const FALLBACK: Interval = Interval { lo: -1e9, hi: 1e9 };

    pub fn new() -> Self {
        Self::default()
    }

    /// Empty map whose default comes from `STABLIM_DEFAULT_DOMAIN` when set.
    pub fn from_env() -> Result<Self, IntervalError> {
        let default = match std::env::var(DEFAULT_DOMAIN_ENV) {
            Ok(text) => text.parse()?,
            Err(_) => DomainMap::FALLBACK,
        };
        Ok(DomainMap {
            domains: BTreeMap::new(),
            default,
        })
    }

    pub fn with_default(mut self, default: Interval) -> Self {
        self.default = default;
        self
    }

    pub fn default_domain(&self) -> Interval {
        self.default
    }

    pub fn insert(&mut self, name: impl Into<String>, domain: Interval) {
        self.domains.insert(name.into(), domain);
    }

    pub fn get(&self, name: &str) -> Option<Interval> {
        self.domains.get(name).copied()
    }

    /// Domain of `name`, falling back to the default.
    pub fn domain(&self, name: &str) -> Interval {
        self.get(name).unwrap_or(self.default)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Interval)> {
        self.domains.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Variables of `e` that have no explicit domain.
    pub fn missing(&self, e: &LimitExpr) -> BTreeSet<String> {
        e.variables()
            .into_iter()
            .filter(|v| !self.domains.contains_key(v))
            .collect()
    }
}

impl FromIterator<(String, Interval)> for DomainMap {
    fn from_iter<I: IntoIterator<Item = (String, Interval)>>(iter: I) -> Self {
        DomainMap {
            domains: iter.into_iter().collect(),
            default: DomainMap::FALLBACK,
        }
    }
}

/// Sound image range of `e` over the domains in `d`.
pub fn bounds(e: &LimitExpr, d: &DomainMap) -> Interval {
    match e {
        LimitExpr::Const(c) => Interval::point(*c),
        LimitExpr::Var(name) => d.domain(name),
        LimitExpr::Neg(x) => bounds(x, d).neg(),
        LimitExpr::Mul(c, x) => bounds(x, d).scale(*c),
        LimitExpr::Add(xs) => xs
            .iter()
            .map(|x| bounds(x, d))
            .reduce(Interval::add)
            .unwrap_or(Interval::point(0.0)),
        LimitExpr::Min(xs) => fold(xs, d, Interval::min),
        LimitExpr::Max(xs) => fold(xs, d, Interval::max),
    }
}

fn fold(xs: &[LimitExpr], d: &DomainMap, f: fn(Interval, Interval) -> Interval) -> Interval {
    xs.iter()
        .map(|x| bounds(x, d))
        .reduce(f)
        .expect("min/max node without children")
}
