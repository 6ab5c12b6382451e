//! Payoff clouds, discrete payoff maps, their backward construction and
//! weak-invariance verification.

mod build;
mod cloud;
mod map;
mod verify;

pub use build::{build_nash_map, build_nash_map_within, default_tol_val, BuildReport, NashBuildOptions};
pub use cloud::{box_dist, dist_l1_points, hausdorff_l1, l1, PayoffCloud, PayoffPair, Segment};
pub use map::{CloudSlice, InvariantReport, NashMap, LowerRef};
pub use verify::{directional_derivative, perturbation_samples, tangent_velocities, verify_map, NodeResidual, VerifyOptions, VerifyReport, Worst};
