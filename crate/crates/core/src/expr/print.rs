use std::cmp::Ordering;
use std::fmt;

use super::{LimitExpr, OrdF64};

impl fmt::Display for LimitExpr {
    /// Canonical text: commutative children are emitted in canonical order,
    /// and the output parses back to the canonical form of the tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
enum Class {
    Const,
    Var,
    Composite,
}

struct Rendered<'a> {
    node: &'a LimitExpr,
    text: String,
}

impl Rendered<'_> {
    fn class(&self) -> Class {
        match self.node {
            LimitExpr::Const(_) => Class::Const,
            LimitExpr::Var(_) => Class::Var,
            _ => Class::Composite,
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        self.class().cmp(&other.class()).then_with(|| match (self.node, other.node) {
            (LimitExpr::Const(a), LimitExpr::Const(b)) => OrdF64(*a).cmp(&OrdF64(*b)),
            _ => self.text.cmp(&other.text),
        })
    }
}

fn sorted(children: &[LimitExpr]) -> Vec<Rendered<'_>> {
    let mut out: Vec<Rendered<'_>> = children
        .iter()
        .map(|node| Rendered {
            node,
            text: render(node),
        })
        .collect();
    out.sort_by(|a, b| a.cmp(b));
    out
}

fn render(e: &LimitExpr) -> String {
    match e {
        LimitExpr::Const(c) => format!("{c}"),
        LimitExpr::Var(name) => name.clone(),
        LimitExpr::Neg(inner) => match inner.as_ref() {
            LimitExpr::Const(_) | LimitExpr::Add(_) | LimitExpr::Mul(..) => {
                format!("-({})", render(inner))
            }
            other => format!("-{}", render(other)),
        },
        LimitExpr::Mul(c, inner) => match inner.as_ref() {
            LimitExpr::Add(_) | LimitExpr::Mul(..) => format!("{c}*({})", render(inner)),
            other => format!("{c}*{}", render(other)),
        },
        LimitExpr::Add(children) => {
            let mut out = String::new();
            for (i, child) in sorted(children).into_iter().enumerate() {
                match child.node {
                    LimitExpr::Neg(inner) if i > 0 => {
                        out.push_str(" - ");
                        out.push_str(&term_text(inner));
                    }
                    node => {
                        if i > 0 {
                            out.push_str(" + ");
                        }
                        if matches!(node, LimitExpr::Add(_)) {
                            out.push_str(&format!("({})", child.text));
                        } else {
                            out.push_str(&child.text);
                        }
                    }
                }
            }
            out
        }
        LimitExpr::Min(children) => call("min", children),
        LimitExpr::Max(children) => call("max", children),
    }
}

/// Text of the operand of a binary minus; sums need parentheses.
fn term_text(e: &LimitExpr) -> String {
    match e {
        LimitExpr::Add(_) => format!("({})", render(e)),
        other => render(other),
    }
}

fn call(name: &str, children: &[LimitExpr]) -> String {
    let args: Vec<String> = sorted(children).into_iter().map(|r| r.text).collect();
    format!("{name}({})", args.join(", "))
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    #[test]
    fn prints_constants_and_calls() {
        assert_eq!(LimitExpr::Const(915.0).to_string(), "915");
        let e = LimitExpr::Max(vec![LimitExpr::Const(1000.0), LimitExpr::var("P_m")]);
        assert_eq!(e.to_string(), "max(1000, P_m)");
    }

    #[test]
    fn round_trips_power_interface_limit() {
        let e = parse("max(1000, min(-P_m+6000, -2*P_m+7000, -4*P_m+11000))").unwrap();
        let text = e.to_string();
        assert_eq!(
            text,
            "max(1000, min(11000 + -4*P_m, 6000 - P_m, 7000 + -2*P_m))"
        );
        assert_eq!(parse(&text).unwrap(), e.canonical());
    }

    #[test]
    fn awkward_shapes_round_trip() {
        use LimitExpr::*;
        let x = || LimitExpr::var("x");
        let cases = vec![
            LimitExpr::neg(Const(5.0)),
            LimitExpr::neg(Const(-5.0)),
            LimitExpr::neg(LimitExpr::neg(Const(5.0))),
            LimitExpr::neg(LimitExpr::mul(2.0, x())),
            LimitExpr::mul(2.0, LimitExpr::mul(3.0, x())),
            LimitExpr::mul(2.0, Const(-3.0)),
            LimitExpr::mul(-0.5, LimitExpr::neg(x())),
            Add(vec![x(), Add(vec![LimitExpr::var("y"), Const(1.0)])]),
            Add(vec![x(), LimitExpr::neg(Add(vec![LimitExpr::var("y"), Const(1.0)]))]),
            Add(vec![Const(-1.0), Const(-3.0), LimitExpr::neg(Const(2.0))]),
            Min(vec![LimitExpr::neg(Max(vec![x(), Const(1e-7)])), Const(2.5e14)]),
        ];
        for e in cases {
            let text = e.to_string();
            assert_eq!(parse(&text).unwrap(), e.canonical(), "{text}");
        }
    }
}
