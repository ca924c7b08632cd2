//! Numerical laboratory for Mallows-distance central limit theorems of
//! positively associated processes.
//!
//! * [`transport`] and [`normal`]: exact one-dimensional Mallows and
//!   Kolmogorov distances, the standard-normal toolkit.
//! * [`assoc`]: covariance structure, Cox–Grimmett coefficients and
//!   randomized association tests on replica ensembles.
//! * [`gibbs`]: heat-bath samplers and exact oracles for ferromagnetic spin
//!   chains (product, finite-range, long-range, perturbed long-range).
//! * [`limit`]: stabilized partial sums, block decompositions, Berry–Esseen
//!   and moment diagnostics, convergence reports.

pub mod assoc;
pub mod ensemble;
pub mod error;
pub mod exec;
pub mod gibbs;
pub mod limit;
pub mod normal;
pub mod quadrature;
pub mod stats;
pub mod transport;

pub use ensemble::ReplicaEnsemble;
pub use error::{LabError, Result};
pub use exec::Execution;
pub use normal::NormalLaw;
pub use transport::{DistanceOrder, EmpiricalDF, SortedSample};
