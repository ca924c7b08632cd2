//! Stabilized partial sums and the diagnostics around their normal limit:
//! convergence reports, block decompositions, Berry–Esseen and moment
//! bounds.

pub mod birkel;
pub mod blocks;
pub mod report;
pub mod scheme;
pub mod sums;

pub use birkel::{birkel_moment_check, BirkelReport, BirkelRow, ThetaAdvisory, ThetaClaim};
pub use blocks::{block_diagnostics, BlockDiagnostics, Estimate};
pub use report::{convergence_curve, convergence_curve_with, decreasing_trend, ConvergenceReport, ReportRow, TrendCheck};
pub use scheme::{berry_esseen_bound, coarse_berry_esseen_bound, schedule_trends, BlockScheme};
pub use sums::{stabilized_sums, Centering, PartialSumSpec, Scaling, StabilizedSums, SumMode};
