//! Mixed-binary linear programs: model, simplex relaxation, branch-and-bound,
//! brute-force oracle and LP-format input/output.

mod bnb;
mod lp_format;
mod model;
mod oracle;
mod simplex;
mod solution;

pub use bnb::{
    is_integral, solve_lp, solve_milp, Limits, SolveResult, Status, DEFAULT_GAP, FEASIBILITY_TOL,
    INTEGRALITY_TOL,
};
pub use lp_format::{export_lp, format_number, import_lp, LpReadError};
pub use model::{Constraint, LinExpr, MilpModel, ModelError, Relation, Sense, VarId, VarKind, Variable};
pub use oracle::{enumerate_oracle, OracleError, ORACLE_MAX_BINARIES};
pub use simplex::{solve_relaxation, LpError, LpOutcome, LpSolution, PIVOT_TOL};
pub use solution::{SolutionDump, SOLUTION_SCHEMA_VERSION};
