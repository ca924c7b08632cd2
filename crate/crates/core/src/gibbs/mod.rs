//! Finite-volume Gibbsian spin chains: couplings, heat-bath sampling and
//! exact oracles.

pub mod chain;
pub mod coupling;
pub mod oracle;
pub mod sampler;
pub mod spin;

pub use chain::{heat_bath_site, heat_bath_sweep, Boundary, ChainModel, SpinChainState};
pub use coupling::CouplingFamily;
pub use oracle::{
    exact_enumeration, exact_enumeration_signed, transfer_matrix_oracle, ExactGibbs, HamiltonianSign,
};
pub use sampler::{
    mixing_diagnostic, pair_correlation_profile, replica_rng, sample_ensemble, two_point_estimates,
    SamplingPlan, TwoPointEstimate,
};
pub use spin::{RealLaw, SpinSpace};
