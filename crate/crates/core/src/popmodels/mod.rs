//! Forward population models and the ancestral partitions they induce:
//! Moran and Wright-Fisher lineage tracing, Cannings offspring diagnostics
//! (including the heavy-tailed Galton-Watson model), and the Wright-Fisher
//! diffusion with its moment duality.

mod ancestry;
mod cannings;
mod diffusion;

pub use ancestry::{moran_ancestry, wf_ancestry, AncestryPath};
pub use cannings::{
    cannings_diagnostics, gw_generation, gw_pmerger_prediction, CanningsDiagnostics, CanningsSpec,
    GwSpec, OffspringLaw, OffspringSampler, GW_RETRY_CAP,
};
pub use diffusion::{
    duality_check, kingman_block_count_law, wf_absorption, wf_diffusion, wf_diffusion_at,
    wf_expected_absorption_time, Absorption, DiffusionPath, DualityRow, ABSORPTION_TOL,
};
