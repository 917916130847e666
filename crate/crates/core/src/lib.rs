//! Hodograph-method solutions of the pressureless Euler equation
//! `u_t + (u·∇)u = g + A·u` in n dimensions.
//!
//! The solution is given implicitly by the hodograph equation
//! `x - φ1(A,t)·M - φ2(A,t)·g = φ(M)`, where `M` is the initial velocity of the
//! characteristic through `(t, x)` and `φ` inverts the initial data. Gradient
//! catastrophes occur on `det(φ1(A,t) + ∂φ/∂M) = 0`.

pub mod blowup;
pub mod degenerate;
pub mod error;
pub mod hodograph;
pub mod matops;
pub mod model;
pub mod oracle;
pub mod periodicity;
pub mod poly;
mod optimize;

pub use blowup::{
    auto_sheets, blowup_residual, certify_no_blowup_1d, k_matrix, min_blowup_time, BlowupPoint,
    BlowupSheet, Certificate, MGrid, MinBlowup, SheetEngine, SheetKind, SheetValue,
};
pub use degenerate::{build_basis, degenerate_solve, zaxis_basis, DegenerateBasis};
pub use error::{Error, Result};
pub use hodograph::{
    closed_form, integrals, residual_m, solve_u, sweep_u, to_bar_variables, u_from_m, ClosedForm,
    HodographSolution, IntegralValues, StateSample,
};
pub use matops::{Mat, Vect};
pub use model::{
    Branch, Family, ForceSpec, HodographProblem, InitialData, Pipeline, SolverOptions,
};
pub use oracle::{exact_flow, flow_jacobian_det, pde_residual, rk4_flow, FlowResult};
pub use periodicity::{check_periodic, verify_solution_period, PeriodicityReport};
