use serde::Serialize;
use serde_json::{Map, Value};

use super::bnb::{SolveResult, Status};
use super::model::MilpModel;

/// Version of the JSON solution layout.
pub const SOLUTION_SCHEMA_VERSION: u32 = 1;

/// JSON view of a solve: status, objective, gap and every variable value by
/// name in registry order. Timing is left out so dumps are reproducible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionDump {
    pub schema_version: u32,
    pub model: String,
    pub status: Status,
    pub objective: Option<f64>,
    pub best_bound: Option<f64>,
    pub gap: Option<f64>,
    pub nodes: usize,
    pub values: Map<String, Value>,
}

impl SolutionDump {
    pub fn new(model: &MilpModel, result: &SolveResult) -> Self {
        let mut values = Map::new();
        for (v, &x) in model.variables().iter().zip(&result.values) {
            values.insert(v.name.clone(), Value::from(clean(x)));
        }
        SolutionDump {
            schema_version: SOLUTION_SCHEMA_VERSION,
            model: model.name.clone(),
            status: result.status,
            objective: result.objective.map(clean),
            best_bound: result.best_bound.map(clean),
            gap: result.gap().map(clean),
            nodes: result.nodes,
            values,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dump serializes")
    }
}

/// Flushes float noise and negative zero.
pub(crate) fn clean(v: f64) -> f64 {
    if v.abs() < 1e-12 {
        0.0
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve_milp, LinExpr, Limits, Relation, Sense};

    #[test]
    fn dump_lists_values_in_registry_order() {
        let mut m = MilpModel::new("d");
        let z = m.add_continuous("z", 0.0, 2.0).unwrap();
        let a = m.add_binary("a").unwrap();
        m.add_constraint("c", LinExpr::from(z).with(-2.0, a), Relation::Le, 0.0).unwrap();
        m.set_objective(Sense::Maximize, LinExpr::from(z));
        let r = solve_milp(&m, &Limits::exact()).unwrap();
        let text = SolutionDump::new(&m, &r).to_json();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["status"], "optimal");
        assert_eq!(v["objective"], 2.0);
        let keys: Vec<&String> = v["values"].as_object().unwrap().keys().collect();
        assert_eq!(keys, vec!["z", "a"]);
    }
}
