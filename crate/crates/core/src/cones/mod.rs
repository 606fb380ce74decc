//! Small dense convex solvers: a Hermitian SDP interior-point method and a
//! log-barrier Newton method for the deployment subproblem.

pub mod barrier;
pub mod sdp;

pub use barrier::{solve_subproblem, Affine, BarrierOptions, Constraint, ConvexSubproblem, SubproblemSolution};
pub use sdp::{solve_sdp, HermitianMatrix, SdpConstraint, SdpOptions, SdpSolution, SdpStandardForm};
