//! Delocalized eta invariants: certified quadrature, the spectral-sum
//! oracle, and convergence along towers of covers.

pub mod oracle;
pub mod quadrature;
pub mod tower;

pub use oracle::{
    classical_eta, default_s_grid, eta_spectral_oracle, one_component_eta, one_component_sector_eta, two_component_sector_eta, OracleResult,
    DEFAULT_S_GRID, TWO_COMPONENT_S_GRID,
};
pub use quadrature::{
    eta_classes, eta_quadrature, local_identity_term, sign_by_quadrature, small_t_envelope, tail_cutoff, EtaResult,
    QuadraturePlan,
};
pub use tower::{converge_tower, ConvergenceReport, ConvergenceRow};
