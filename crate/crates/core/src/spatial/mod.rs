//! Coalescing particle systems on discrete tori: instantaneously coalescing
//! random walks and spatial Λ-coalescents.

mod checks;
mod system;
mod torus;

pub use checks::{
    arratia_dispersion_test, limic_sturm_bound, limic_sturm_time, origin_escape_count,
    DispersionReport,
};
pub use system::{
    log_time_grid, simulate_crw, simulate_spatial_lambda, DensityPoint, Initial, ParticleState,
    SpatialEvent, SpatialRun, SpatialSystem,
};
pub use torus::{density_asymptote, gamma_d, log_star, TorusConfig, MAX_SITES};
