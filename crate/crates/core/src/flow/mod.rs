//! Per-ε flows, flow tables, closed-form oracles and limit extraction.

pub mod closed_form;
pub mod integrator;
pub mod ivp;
pub mod table;

pub use closed_form::{closed_form_marsden_limit, closed_form_torus, closed_form_torus_limit, heaviside};
pub use integrator::{StepStats, Tolerance};
pub use ivp::{
    euclidean_point, flow_identity_residual, flow_to, operator_norm, solve_ivp, variational_derivative, IvpConfig, Trajectory,
    VariationalResult,
};
pub use table::{extract_limit, flow_table, FlowTable, LimitCandidate};
