//! Turning trained generators into distributions, statistics and artifacts.

pub mod emit;
pub mod ks;
pub mod pmf;
pub mod radial;
pub mod sweep;

pub use ks::{ks_statistic, KsResult};
pub use pmf::{default_merge_tol, extract_pmf, Pmf};
pub use radial::{cluster_points, radial_profile, Cluster, RadialProfile};
pub use sweep::{bifurcation_sweep, SweepPoint, SweepResult, SweepRow};
