//! Online linear programming: dual-price learning policies for online packing
//! problems, a bounded-variable simplex solver, instance generators and an
//! evaluation harness.

pub mod cli;
pub mod error;
pub mod generators;
pub mod harness;
pub mod io;
pub mod lp;
pub mod model;
pub mod multi;
pub mod online;

pub use error::{Error, Result};
pub use lp::{solve_boxed_lp, solve_boxed_lp_with, BoxedLp, LpSolution, SolverOptions};
pub use model::{Column, DualPrice, Instance, RunResult, Workload};
pub use multi::{MultiColumn, MultiDecision, MultiInstance, MultiRunResult};
pub use online::{
    allocation_rule, check_input_condition, learn_price, run_dpa, run_ola, ConditionVariant,
    OnlineState, Policy,
};
