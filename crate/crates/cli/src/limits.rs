use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context};
use serde::Serialize;
use serde_json::{json, Value};
use stablim::expr::{parse as parse_expr, LimitExpr};
use stablim::linearize::{attach_lower, attach_upper, Attachment, SymbolTable};
use stablim::milp::{export_lp, LinExpr, MilpModel};
use stablim::transform::{bounds, simplify as run_simplify, DomainMap, Interval, SimplifyReport};

use crate::output;
use crate::ExprInput;

const LIMITS_SCHEMA_VERSION: u32 = 1;

fn read_expr(input: &ExprInput) -> anyhow::Result<LimitExpr> {
    let text = match (&input.expr, &input.file) {
        (Some(t), _) => t.clone(),
        (None, Some(path)) => {
            std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?
        }
        (None, None) => {
            let mut t = String::new();
            std::io::stdin().read_to_string(&mut t)?;
            t
        }
    };
    parse_expr(&text).context("invalid limit expression")
}

/// Reads `{"name": [lo, hi], ...}` on top of the environment default.
fn read_domains(path: &Path) -> anyhow::Result<DomainMap> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let raw: BTreeMap<String, [f64; 2]> =
        serde_json::from_str(&text).with_context(|| format!("{}: expected an object of [lo, hi] pairs", path.display()))?;
    let mut d = DomainMap::from_env()?;
    for (name, [lo, hi]) in raw {
        let i = Interval::new(lo, hi).with_context(|| format!("domain of `{name}`"))?;
        d.insert(name, i);
    }
    Ok(d)
}

fn tree(e: &LimitExpr) -> Value {
    let kids = |cs: &[LimitExpr]| cs.iter().map(tree).collect::<Vec<_>>();
    match e {
        LimitExpr::Const(c) => json!({"const": c}),
        LimitExpr::Var(v) => json!({"var": v}),
        LimitExpr::Neg(c) => json!({"neg": tree(c)}),
        LimitExpr::Mul(s, c) => json!({"mul": [s, tree(c)]}),
        LimitExpr::Add(cs) => json!({"add": kids(cs)}),
        LimitExpr::Min(cs) => json!({"min": kids(cs)}),
        LimitExpr::Max(cs) => json!({"max": kids(cs)}),
    }
}

pub fn parse(input: &ExprInput, out: &Path) -> anyhow::Result<()> {
    let e = read_expr(input)?;
    let report = json!({
        "schema_version": LIMITS_SCHEMA_VERSION,
        "expr": e.to_string(),
        "variables": e.variables(),
        "nodes": e.node_count(),
        "depth": e.depth(),
        "min_max_nodes": e.min_max_count(),
        "tree": tree(&e),
    });
    output::write(out, &output::json(&report))
}

#[derive(Serialize)]
struct SimplifyOutput {
    schema_version: u32,
    input: String,
    expr: String,
    definitions: BTreeMap<String, String>,
    report: SimplifyReport,
}

pub fn simplify(input: &ExprInput, domains: &Path, out: &Path) -> anyhow::Result<()> {
    let e = read_expr(input)?;
    let d = read_domains(domains)?;
    let s = run_simplify(&e, &d);
    let report = SimplifyOutput {
        schema_version: LIMITS_SCHEMA_VERSION,
        input: e.to_string(),
        expr: s.expr.to_string(),
        definitions: s.definitions.iter().map(|def| (def.name.clone(), def.body.to_string())).collect(),
        report: s.report,
    };
    output::write(out, &output::json(&report))
}

#[derive(Serialize)]
struct Manifest {
    schema_version: u32,
    side: &'static str,
    binary_count: usize,
    continuous_count: usize,
    #[serde(flatten)]
    attachment: Attachment,
    lp: String,
}

pub fn linearize(
    input: &ExprInput,
    domains: &Path,
    lower: bool,
    name: &str,
    lp: Option<&Path>,
    out: &Path,
) -> anyhow::Result<()> {
    let e = read_expr(input)?;
    let d = read_domains(domains)?;
    let range = bounds(&e, &d);
    if !range.is_finite() {
        bail!("the expression is unbounded over the given domains: {range}");
    }
    let mut model = MilpModel::new(name);
    let x = model.add_continuous("x", range.lo, range.hi)?;
    let mut st = SymbolTable::new().with_default_domain(d.default_domain());
    for v in e.variables() {
        let i = d.domain(&v);
        let id = model.add_continuous(v.clone(), i.lo, i.hi)?;
        st.bind_var(v, id, i);
    }
    let lhs = LinExpr::from(x);
    let attachment = if lower {
        attach_lower(&mut model, &lhs, &e, &st, name)?
    } else {
        attach_upper(&mut model, &lhs, &e, &st, name)?
    };
    let text = export_lp(&model);
    let manifest = Manifest {
        schema_version: LIMITS_SCHEMA_VERSION,
        side: if lower { "lower" } else { "upper" },
        binary_count: attachment.num_binaries(),
        continuous_count: attachment.variables.len() - attachment.num_binaries(),
        attachment,
        lp: text.clone(),
    };
    let mut outputs = vec![(out, output::json(&manifest))];
    if let Some(p) = lp {
        outputs.push((p, text));
    }
    output::write_all(&outputs)
}
