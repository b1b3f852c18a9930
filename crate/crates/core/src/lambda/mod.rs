//! Λ-coalescents: measures, merger rates, the branching mechanism `psi`,
//! coming-down and dust criteria, simulation and observables.

mod criteria;
mod exact;
mod measure;
mod observables;
mod parse;
mod poisson;
mod psi;
mod rates;
mod simulate;

pub(crate) use criteria::speed_of;
pub use criteria::{
    cdi_test, dust_test, inverse_psi_tail, speed_v, speed_v_unchecked, CdiVerdict, Certificate,
    DustVerdict,
};
pub use exact::{transition_law, TRANSITION_MAX_N};
pub use measure::{Atom, Component, DensityComponent, DensityFn, DensityShape, LambdaMeasure};
pub use observables::{
    collision_count, first_coagulation_observables, sweep_measure, FirstCoagulation, SweepPoint,
};
pub use parse::parse_measure;
pub use poisson::PoissonSampler;
pub use psi::psi;
pub use rates::{lambda_bk, rate_summaries, RateSummary, RateTable, CUSTOM_SIMULATION_MAX_N};
pub use simulate::{simulate_lambda, LambdaSimulator};
