//! Continuous-state branching processes: branching mechanisms, the
//! Laplace exponent `u_t(lambda)`, Grey's criterion and path simulation.

mod laplace;
mod mechanism;
mod simulate;

pub use laplace::{
    csbp_speed, extinction_prob, grey_test, survival_prob, u_t_integral, u_t_lambda,
    u_t_lambda_with, u_t_ode, GreyVerdict, URoute, U_TOL,
};
pub use mechanism::{BranchingMechanism, GreyHint, MechanismKind, PsiFn};
pub use simulate::{feller_simulate, lamperti_csbp, CsbpPath};
