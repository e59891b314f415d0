//! Recursive-descent parser for the limit-expression grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := NUMBER | IDENT | '-' factor | '(' expr ')'
//!         | ('min' | 'max') '(' expr (',' expr)+ ')'
//! IDENT  := [A-Za-z_][A-Za-z0-9_]* ('[' [A-Za-z0-9_.]+ ']')?
//! ```
//!
//! Products must have a constant side and divisors must be nonzero
//! constants, which keeps every parsed tree piecewise-linear.

use thiserror::Error;

use super::{LimitExpr, MAX_LITERAL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: unknown function `{name}`")]
    UnknownFunction {
        line: usize,
        column: usize,
        name: String,
    },
    #[error("{line}:{column}: literal `{text}` is not a finite number within ±1e15")]
    BadLiteral {
        line: usize,
        column: usize,
        text: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let single = match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
                continue;
            }
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token {
                tok,
                line: start_line,
                column: start_col,
            });
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[begin..i].iter().collect();
            col += i - begin;
            let value: f64 = s.parse().map_err(|_| ParseError::Syntax {
                line: start_line,
                column: start_col,
                message: format!("malformed number `{s}`"),
            })?;
            if !value.is_finite() || value.abs() > MAX_LITERAL {
                return Err(ParseError::BadLiteral {
                    line: start_line,
                    column: start_col,
                    text: s,
                });
            }
            out.push(Token {
                tok: Tok::Num(value, s),
                line: start_line,
                column: start_col,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            if i < chars.len() && chars[i] == '[' {
                let mut j = i + 1;
                while j < chars.len()
                    && (chars[j].is_ascii_alphanumeric() || chars[j] == '_' || chars[j] == '.')
                {
                    j += 1;
                }
                if j == i + 1 || j >= chars.len() || chars[j] != ']' {
                    return Err(ParseError::Syntax {
                        line: start_line,
                        column: start_col + (j - begin),
                        message: "malformed index, expected `name[index]`".into(),
                    });
                }
                i = j + 1;
            }
            let s: String = chars[begin..i].iter().collect();
            col += i - begin;
            out.push(Token {
                tok: Tok::Ident(s),
                line: start_line,
                column: start_col,
            });
            continue;
        }
        return Err(ParseError::Syntax {
            line: start_line,
            column: start_col,
            message: format!("unexpected character `{c}`"),
        });
    }
    out.push(Token {
        tok: Tok::End,
        line,
        column: col,
    });
    Ok(out)
}

/// Parses a limit expression.
///
/// ```
/// use stablim::expr::{parse, LimitExpr};
///
/// let e = parse("min(x)").unwrap();
/// assert_eq!(e, LimitExpr::var("x"));
/// assert!(parse("x * y").is_err());
/// ```
pub fn parse(text: &str) -> Result<LimitExpr, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.expr()?;
    if p.peek().tok != Tok::End {
        return Err(p.error("expected operator or end of input"));
    }
    Ok(e)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: &str) -> ParseError {
        let t = self.peek();
        let found = match &t.tok {
            Tok::Num(_, s) | Tok::Ident(s) => format!("`{s}`"),
            Tok::End => "end of input".to_string(),
            other => format!("{other:?}"),
        };
        ParseError::Syntax {
            line: t.line,
            column: t.column,
            message: format!("{message}, found {found}"),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek().tok == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<LimitExpr, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek().tok {
                Tok::Plus => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    terms.push(LimitExpr::neg(self.term()?));
                }
                _ => break,
            }
        }
        Ok(LimitExpr::sum_of(terms))
    }

    fn term(&mut self) -> Result<LimitExpr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek().tok {
                Tok::Star => {
                    let at = self.bump();
                    let rhs = self.factor()?;
                    acc = product(acc, rhs).ok_or_else(|| ParseError::Syntax {
                        line: at.line,
                        column: at.column,
                        message: "product of two non-constant expressions is not piecewise-linear"
                            .into(),
                    })?;
                }
                Tok::Slash => {
                    let at = self.bump();
                    let rhs = self.factor()?;
                    let divisor = constant_value(&rhs).filter(|d| *d != 0.0).ok_or_else(|| {
                        ParseError::Syntax {
                            line: at.line,
                            column: at.column,
                            message: "divisor must be a nonzero constant".into(),
                        }
                    })?;
                    acc = match acc {
                        LimitExpr::Mul(c, inner) => LimitExpr::Mul(c / divisor, inner),
                        other => LimitExpr::mul(1.0 / divisor, other),
                    };
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<LimitExpr, ParseError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(v, _) => {
                self.bump();
                Ok(LimitExpr::Const(v))
            }
            Tok::Minus => {
                self.bump();
                // A minus sign directly on a literal is part of the literal.
                if let Tok::Num(v, _) = self.peek().tok {
                    self.bump();
                    return Ok(LimitExpr::Const(-v));
                }
                Ok(LimitExpr::neg(self.factor()?))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if self.peek().tok != Tok::LParen {
                    return Ok(LimitExpr::Var(name));
                }
                let is_min = match name.as_str() {
                    "min" => true,
                    "max" => false,
                    _ => {
                        return Err(ParseError::UnknownFunction {
                            line: t.line,
                            column: t.column,
                            name,
                        })
                    }
                };
                self.bump();
                let mut args = vec![self.expr()?];
                while self.peek().tok == Tok::Comma {
                    self.bump();
                    args.push(self.expr()?);
                }
                self.expect(Tok::RParen, "`,` or `)`")?;
                Ok(if is_min {
                    LimitExpr::min_of(args)
                } else {
                    LimitExpr::max_of(args)
                })
            }
            _ => Err(self.error("expected a number, a name, `-`, `(`, `min` or `max`")),
        }
    }
}

/// Value of a variable-free tree.
fn constant_value(e: &LimitExpr) -> Option<f64> {
    if e.variables().is_empty() {
        e.evaluate_with(&|_| None).ok()
    } else {
        None
    }
}

fn product(lhs: LimitExpr, rhs: LimitExpr) -> Option<LimitExpr> {
    if let LimitExpr::Const(c) = lhs {
        return Some(LimitExpr::mul(c, rhs));
    }
    if let LimitExpr::Const(c) = rhs {
        return Some(LimitExpr::mul(c, lhs));
    }
    if let Some(c) = constant_value(&lhs) {
        return Some(LimitExpr::mul(c, rhs));
    }
    constant_value(&rhs).map(|c| LimitExpr::mul(c, lhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> LimitExpr {
        LimitExpr::Const(v)
    }
    fn v(n: &str) -> LimitExpr {
        LimitExpr::var(n)
    }

    #[test]
    fn parses_power_interface_limit() {
        let e = parse("max(1000, min(-P_m+6000, -2*P_m+7000, -4*P_m+11000))").unwrap();
        let expected = LimitExpr::Max(vec![
            c(1000.0),
            LimitExpr::Min(vec![
                LimitExpr::Add(vec![LimitExpr::neg(v("P_m")), c(6000.0)]),
                LimitExpr::Add(vec![LimitExpr::mul(-2.0, v("P_m")), c(7000.0)]),
                LimitExpr::Add(vec![LimitExpr::mul(-4.0, v("P_m")), c(11000.0)]),
            ]),
        ]);
        assert_eq!(e, expected);
    }

    #[test]
    fn collapses_single_argument_min() {
        assert_eq!(parse("min(x)").unwrap(), v("x"));
        assert_eq!(parse("max( min(x) )").unwrap(), v("x"));
    }

    #[test]
    fn indexed_names() {
        assert_eq!(parse("P[h1] + N[h2]").unwrap(), LimitExpr::Add(vec![v("P[h1]"), v("N[h2]")]));
    }

    #[test]
    fn binary_minus_wraps_term() {
        assert_eq!(
            parse("a - 2*b").unwrap(),
            LimitExpr::Add(vec![v("a"), LimitExpr::neg(LimitExpr::mul(2.0, v("b")))])
        );
    }

    #[test]
    fn constant_division_folds_into_scalar() {
        assert_eq!(parse("x / 4").unwrap(), LimitExpr::mul(0.25, v("x")));
        assert_eq!(parse("3*x/2").unwrap(), LimitExpr::mul(1.5, v("x")));
        assert!(parse("x / 0").is_err());
        assert!(parse("x / y").is_err());
    }

    #[test]
    fn constant_side_may_be_on_the_right_or_computed() {
        assert_eq!(parse("x*3").unwrap(), LimitExpr::mul(3.0, v("x")));
        assert_eq!(
            parse("(1+2)*x").unwrap(),
            LimitExpr::mul(3.0, v("x")),
        );
    }

    #[test]
    fn reports_positions() {
        match parse("min(x,\n  y $)") {
            Err(ParseError::Syntax { line, column, .. }) => assert_eq!((line, column), (2, 5)),
            other => panic!("unexpected {other:?}"),
        }
        match parse("foo(1, 2)") {
            Err(ParseError::UnknownFunction { name, column, .. }) => {
                assert_eq!(name, "foo");
                assert_eq!(column, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("1e16 + x"), Err(ParseError::BadLiteral { .. })));
        assert!(matches!(parse("x +"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("x y"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("x * y"), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("P[]"), Err(ParseError::Syntax { .. })));
    }
}
