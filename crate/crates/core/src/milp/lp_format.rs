//! Reading and writing the CPLEX LP text format.

use std::collections::{HashMap, HashSet};
use std::fmt::Write;

use thiserror::Error;

use super::model::{LinExpr, MilpModel, ModelError, Relation, Sense, VarKind};

const TERMS_PER_LINE: usize = 8;
const KEYWORDS: &[&str] = &[
    "max", "maximize", "maximum", "min", "minimize", "minimum", "st", "s.t.", "st.", "subject",
    "such", "bound", "bounds", "bin", "binary", "binaries", "gen", "general", "generals", "end",
    "free", "inf", "infinity",
];

/// Rounds to 12 significant digits and prints the shortest form that reads
/// back to the rounded value.
pub fn format_number(v: f64) -> String {
    let r: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    if r == 0.0 {
        "0".to_string()
    } else {
        format!("{r}")
    }
}

fn allowed(c: char) -> bool {
    c.is_ascii_alphanumeric() || "!\"#$%&()/,.;?@_`'{}|~".contains(c)
}

fn sanitize(name: &str) -> String {
    let mut out: String = name.chars().map(|c| if allowed(c) { c } else { '_' }).collect();
    let mut chars = out.chars();
    let first = chars.next();
    let second = chars.next();
    let bad_start = match first {
        None => true,
        Some(c) if c.is_ascii_digit() || c == '.' => true,
        Some('e' | 'E') => second.is_some_and(|c| c.is_ascii_digit()),
        _ => false,
    };
    if bad_start || KEYWORDS.contains(&out.to_ascii_lowercase().as_str()) {
        out.insert(0, '_');
    }
    out
}

/// Assigns LP-safe, unique names in order.
fn safe_names<'a>(names: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut used = HashSet::new();
    names
        .map(|n| {
            let base = sanitize(n);
            let mut candidate = base.clone();
            let mut k = 1;
            while !used.insert(candidate.clone()) {
                candidate = format!("{base}~{k}");
                k += 1;
            }
            candidate
        })
        .collect()
}

fn write_terms(out: &mut String, expr: &LinExpr, names: &[String]) {
    let terms = expr.terms();
    if terms.is_empty() {
        if let Some(first) = names.first() {
            let _ = write!(out, " 0 {first}");
        }
        return;
    }
    for (k, &(v, c)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n  ");
        }
        let mag = format_number(c.abs());
        let sign = if c < 0.0 { "-" } else { "+" };
        let name = &names[v.0];
        if k == 0 {
            let lead = if c < 0.0 { "-" } else { "" };
            if mag == "1" {
                let _ = write!(out, " {lead}{name}");
            } else {
                let _ = write!(out, " {lead}{mag} {name}");
            }
        } else if mag == "1" {
            let _ = write!(out, " {sign} {name}");
        } else {
            let _ = write!(out, " {sign} {mag} {name}");
        }
    }
}

fn bound_text(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format_number(v)
    }
}

/// Deterministic LP-format text of `model`.
pub fn export_lp(model: &MilpModel) -> String {
    let names = safe_names(model.variables().iter().map(|v| v.name.as_str()));
    let row_names = safe_names(model.constraints().iter().map(|c| c.name.as_str()));
    let mut out = String::new();
    let _ = writeln!(out, "\\ Model {}", model.name.replace('\n', " "));
    let _ = writeln!(
        out,
        "\\ {} variables ({} binary), {} constraints",
        model.num_vars(),
        model.num_binaries(),
        model.constraints().len()
    );
    out.push_str(match model.sense() {
        Sense::Maximize => "Maximize\n",
        Sense::Minimize => "Minimize\n",
    });
    out.push_str(" obj:");
    write_terms(&mut out, model.objective(), &names);
    let k = model.objective().constant_part();
    if k != 0.0 {
        let _ = write!(
            out,
            " {} {}",
            if k < 0.0 { "-" } else { "+" },
            format_number(k.abs())
        );
    }
    out.push_str("\nSubject To\n");
    for (con, name) in model.constraints().iter().zip(&row_names) {
        let _ = write!(out, " {name}:");
        write_terms(&mut out, &con.lhs, &names);
        let _ = writeln!(out, " {} {}", con.relation, format_number(con.rhs));
    }
    out.push_str("Bounds\n");
    for (v, name) in model.variables().iter().zip(&names) {
        let default = match v.kind {
            VarKind::Binary => v.lb == 0.0 && v.ub == 1.0,
            VarKind::Continuous => v.lb == 0.0 && v.ub == f64::INFINITY,
        };
        if default {
            continue;
        }
        if v.lb == f64::NEG_INFINITY && v.ub == f64::INFINITY {
            let _ = writeln!(out, " {name} free");
        } else if v.lb == v.ub {
            let _ = writeln!(out, " {name} = {}", format_number(v.lb));
        } else {
            let _ = writeln!(out, " {} <= {name} <= {}", bound_text(v.lb), bound_text(v.ub));
        }
    }
    let binaries: Vec<&String> = model.binaries().map(|v| &names[v.0]).collect();
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        for chunk in binaries.chunks(TERMS_PER_LINE) {
            let line: Vec<&str> = chunk.iter().map(|s| s.as_str()).collect();
            let _ = writeln!(out, " {}", line.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpReadError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unsupported section `{0}`")]
    Unsupported(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Num(f64),
    Plus,
    Minus,
    Colon,
    Rel(Relation),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binary,
    Done,
}

fn section_of(line: &str) -> Option<Result<(Section, Option<Sense>), String>> {
    let l = line.trim().to_ascii_lowercase();
    let l = l.split_whitespace().collect::<Vec<_>>().join(" ");
    Some(Ok(match l.as_str() {
        "maximize" | "maximum" | "max" => (Section::Objective, Some(Sense::Maximize)),
        "minimize" | "minimum" | "min" => (Section::Objective, Some(Sense::Minimize)),
        "subject to" | "such that" | "st" | "s.t." | "st." => (Section::Constraints, None),
        "bounds" | "bound" => (Section::Bounds, None),
        "binary" | "binaries" | "bin" => (Section::Binary, None),
        "general" | "generals" | "gen" | "semi-continuous" | "semis" | "semi" | "sos" => {
            return Some(Err(l))
        }
        "end" => (Section::Done, None),
        _ => return None,
    }))
}

fn lex_line(text: &str, line: usize) -> Result<Vec<(Tok, usize)>, LpReadError> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    let err = |m: String| LpReadError::Syntax { line, message: m };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        match c {
            '+' => {
                out.push((Tok::Plus, line));
                i += 1;
            }
            '-' => {
                out.push((Tok::Minus, line));
                i += 1;
            }
            ':' => {
                out.push((Tok::Colon, line));
                i += 1;
            }
            '<' | '>' | '=' => {
                let mut s = String::from(c);
                if i + 1 < chars.len() && "<>=".contains(chars[i + 1]) {
                    s.push(chars[i + 1]);
                }
                i += s.len();
                let rel = match s.as_str() {
                    "<" | "<=" | "=<" => Relation::Le,
                    ">" | ">=" | "=>" => Relation::Ge,
                    "=" | "==" => Relation::Eq,
                    _ => return Err(err(format!("bad operator `{s}`"))),
                };
                out.push((Tok::Rel(rel), line));
            }
            c if c.is_ascii_digit() || c == '.' => {
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
                let v = s.parse().map_err(|_| err(format!("bad number `{s}`")))?;
                out.push((Tok::Num(v), line));
            }
            c if allowed(c) || c == '[' || c == ']' => {
                let begin = i;
                while i < chars.len() && (allowed(chars[i]) || chars[i] == '[' || chars[i] == ']') {
                    i += 1;
                }
                let s: String = chars[begin..i].iter().collect();
                match s.to_ascii_lowercase().as_str() {
                    "inf" | "infinity" => out.push((Tok::Num(f64::INFINITY), line)),
                    _ => out.push((Tok::Name(s), line)),
                }
            }
            _ => return Err(err(format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

#[derive(Default)]
struct Registry {
    order: Vec<String>,
    info: HashMap<String, (f64, f64, bool)>,
}

impl Registry {
    fn touch(&mut self, name: &str) {
        if !self.info.contains_key(name) {
            self.order.push(name.to_string());
            self.info.insert(name.to_string(), (0.0, f64::INFINITY, false));
        }
    }
}

/// `(coef, name)` terms and a constant, read until a relation or the end.
fn read_terms(
    toks: &[(Tok, usize)],
    pos: &mut usize,
) -> Result<(Vec<(f64, String)>, f64), LpReadError> {
    let mut terms = Vec::new();
    let mut constant = 0.0;
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    while *pos < toks.len() {
        let (tok, line) = &toks[*pos];
        match tok {
            Tok::Rel(_) => break,
            Tok::Plus => sign = 1.0,
            Tok::Minus => sign = -sign,
            Tok::Num(v) => {
                if coef.is_some() {
                    return Err(LpReadError::Syntax {
                        line: *line,
                        message: "two numbers in a row".into(),
                    });
                }
                coef = Some(*v);
            }
            Tok::Name(n) => {
                terms.push((sign * coef.take().unwrap_or(1.0), n.clone()));
                sign = 1.0;
            }
            Tok::Colon => {
                return Err(LpReadError::Syntax {
                    line: *line,
                    message: "unexpected `:`".into(),
                })
            }
        }
        *pos += 1;
        if let (Some(c), Some((next, _))) = (coef, toks.get(*pos)) {
            if !matches!(next, Tok::Name(_)) {
                constant += sign * c;
                coef = None;
                sign = 1.0;
            }
        }
    }
    if let Some(c) = coef {
        constant += sign * c;
    }
    Ok((terms, constant))
}

fn strip_label(toks: &[(Tok, usize)]) -> (Option<String>, usize) {
    match (toks.first(), toks.get(1)) {
        (Some((Tok::Name(n), _)), Some((Tok::Colon, _))) => (Some(n.clone()), 2),
        _ => (None, 0),
    }
}

fn signed_number(toks: &[(Tok, usize)], pos: &mut usize) -> Option<f64> {
    let mut sign = 1.0;
    loop {
        match toks.get(*pos).map(|t| &t.0) {
            Some(Tok::Plus) => *pos += 1,
            Some(Tok::Minus) => {
                sign = -sign;
                *pos += 1;
            }
            Some(Tok::Num(v)) => {
                *pos += 1;
                return Some(sign * v);
            }
            _ => return None,
        }
    }
}

/// Parses LP-format text into a model. Variables are registered in order of
/// first appearance.
pub fn import_lp(text: &str) -> Result<MilpModel, LpReadError> {
    let mut section = Section::Preamble;
    let mut sense = Sense::Minimize;
    let mut objective_toks: Vec<(Tok, usize)> = Vec::new();
    let mut constraint_toks: Vec<(Tok, usize)> = Vec::new();
    let mut bound_lines: Vec<(usize, Vec<(Tok, usize)>)> = Vec::new();
    let mut binary_names: Vec<String> = Vec::new();
    let mut name = "model".to_string();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if let Some(rest) = raw.trim_start().strip_prefix("\\ Model ") {
            name = rest.trim().to_string();
        }
        let body = raw.split('\\').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        if let Some(header) = section_of(body) {
            let (s, new_sense) = header.map_err(LpReadError::Unsupported)?;
            section = s;
            if let Some(x) = new_sense {
                sense = x;
            }
            continue;
        }
        let toks = lex_line(body, line)?;
        match section {
            Section::Preamble | Section::Done => {
                return Err(LpReadError::Syntax {
                    line,
                    message: "content outside any section".into(),
                })
            }
            Section::Objective => objective_toks.extend(toks),
            Section::Constraints => constraint_toks.extend(toks),
            Section::Bounds => bound_lines.push((line, toks)),
            Section::Binary => {
                for (t, l) in toks {
                    match t {
                        Tok::Name(n) => binary_names.push(n),
                        _ => {
                            return Err(LpReadError::Syntax {
                                line: l,
                                message: "expected variable names".into(),
                            })
                        }
                    }
                }
            }
        }
    }

    let mut reg = Registry::default();
    let (_, start) = strip_label(&objective_toks);
    let mut pos = start;
    let (obj_terms, obj_const) = read_terms(&objective_toks, &mut pos)?;
    for (_, n) in &obj_terms {
        reg.touch(n);
    }

    // Split the constraint stream at each relation's right-hand side.
    let mut rows = Vec::new();
    let mut pos = 0;
    let mut auto = 0;
    while pos < constraint_toks.len() {
        let (label, skip) = strip_label(&constraint_toks[pos..]);
        pos += skip;
        let (terms, constant) = read_terms(&constraint_toks, &mut pos)?;
        let line = constraint_toks.get(pos).map_or(0, |t| t.1);
        let Some((Tok::Rel(rel), _)) = constraint_toks.get(pos).cloned() else {
            return Err(LpReadError::Syntax {
                line,
                message: "constraint without relation".into(),
            });
        };
        pos += 1;
        let rhs = signed_number(&constraint_toks, &mut pos).ok_or(LpReadError::Syntax {
            line,
            message: "expected a number after the relation".into(),
        })?;
        for (_, n) in &terms {
            reg.touch(n);
        }
        auto += 1;
        rows.push((label.unwrap_or_else(|| format!("R{auto}")), terms, rel, rhs - constant));
    }

    for (line, toks) in &bound_lines {
        apply_bound(&mut reg, toks, *line)?;
    }
    for n in &binary_names {
        reg.touch(n);
        let e = reg.info.get_mut(n).expect("touched");
        e.2 = true;
    }

    let mut model = MilpModel::new(name);
    let mut ids = HashMap::new();
    for n in &reg.order {
        let (lb, ub, bin) = reg.info[n];
        let id = if bin {
            let lb = if lb == 0.0 { 0.0 } else { lb.max(0.0) };
            let ub = if ub.is_infinite() { 1.0 } else { ub.min(1.0) };
            model.add_var(n.clone(), VarKind::Binary, lb, ub)?
        } else {
            model.add_var(n.clone(), VarKind::Continuous, lb, ub)?
        };
        ids.insert(n.clone(), id);
    }
    let to_expr = |terms: &[(f64, String)]| -> LinExpr {
        terms.iter().map(|(c, n)| (*c, ids[n])).collect()
    };
    model.set_objective(sense, to_expr(&obj_terms).plus_constant(obj_const));
    for (label, terms, rel, rhs) in rows {
        model.add_constraint(label, to_expr(&terms), rel, rhs)?;
    }
    Ok(model)
}

fn apply_bound(reg: &mut Registry, toks: &[(Tok, usize)], line: usize) -> Result<(), LpReadError> {
    let err = |m: &str| LpReadError::Syntax {
        line,
        message: m.to_string(),
    };
    // `x free`
    if let [(Tok::Name(n), _), (Tok::Name(f), _)] = toks {
        if f.eq_ignore_ascii_case("free") {
            reg.touch(n);
            let e = reg.info.get_mut(n).expect("touched");
            e.0 = f64::NEG_INFINITY;
            e.1 = f64::INFINITY;
            return Ok(());
        }
    }
    let mut pos = 0;
    let left = signed_number(toks, &mut pos);
    if let Some(lv) = left {
        // `lo <= x [<= hi]` or `hi >= x [>= lo]`
        let Some((Tok::Rel(r1), _)) = toks.get(pos).cloned() else {
            return Err(err("expected relation"));
        };
        pos += 1;
        let Some((Tok::Name(n), _)) = toks.get(pos).cloned() else {
            return Err(err("expected variable"));
        };
        pos += 1;
        reg.touch(&n);
        set_side(reg, &n, flip(r1), lv);
        if let Some((Tok::Rel(r2), _)) = toks.get(pos).cloned() {
            pos += 1;
            let v = signed_number(toks, &mut pos).ok_or_else(|| err("expected number"))?;
            set_side(reg, &n, r2, v);
        }
    } else {
        let Some((Tok::Name(n), _)) = toks.first().cloned() else {
            return Err(err("expected variable"));
        };
        pos = 1;
        let Some((Tok::Rel(r), _)) = toks.get(pos).cloned() else {
            return Err(err("expected relation"));
        };
        pos += 1;
        let v = signed_number(toks, &mut pos).ok_or_else(|| err("expected number"))?;
        reg.touch(&n);
        set_side(reg, &n, r, v);
    }
    if pos != toks.len() {
        return Err(err("trailing tokens in bound"));
    }
    Ok(())
}

fn flip(r: Relation) -> Relation {
    match r {
        Relation::Le => Relation::Ge,
        Relation::Ge => Relation::Le,
        Relation::Eq => Relation::Eq,
    }
}

/// Applies `x rel v`.
fn set_side(reg: &mut Registry, n: &str, rel: Relation, v: f64) {
    let e = reg.info.get_mut(n).expect("touched");
    match rel {
        Relation::Le => e.1 = v,
        Relation::Ge => e.0 = v,
        Relation::Eq => {
            e.0 = v;
            e.1 = v;
        }
    }
}
