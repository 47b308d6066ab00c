//! Exact and cluster-expanded dynamics of central density-matrix elements.

mod cce;
mod dephasing;
mod exact;
mod series;
mod state;

pub use cce::{
    cce_product, cluster_element, irreducible_factor, restricted_cce_product, run_cce, CceEngine, CceResult,
    ClusterDynamics, GuardDiagnostic, RestrictedResult, DENOMINATOR_FLOOR,
};
pub use dephasing::{
    averaged_coherence, conditional_dephasing_element, conditional_hamiltonian, conditional_overlap, exact_with_bath_density,
    sampled_cce,
    SampledCceResult, SamplingPlan,
};
pub use exact::{exact_element, implied_energy_drift, ExactPropagator};
pub use series::{uniform_grid, ElementSeries, SeriesKind};
pub use state::{sample_bath_states, BathState, CentralLevels, CentralState, InitialState, K_B_OVER_HBAR};
