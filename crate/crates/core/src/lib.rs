//! Hyperbolic structures on partially truncated triangulations.
//!
//! The crate solves the consistency and completeness equations for a
//! triangulation whose tetrahedra may have ideal vertices, truncated
//! vertices and length-zero edges, and then runs the tilt-driven flip
//! algorithm that turns a geometric triangulation into the Kojima
//! canonical decomposition.

// index loops read better than zips over the fixed-size geometry arrays,
// and `!(a < b)` is deliberate where NaN must count as a failure
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod canonical;
pub mod equations;
pub mod format;
pub mod lorentz;
pub mod perm;
pub mod report;
pub mod solver;
pub mod tetshape;
pub mod tol;
pub mod triangulation;

pub use perm::Perm4;
pub use tetshape::{HoroRadii, Length, TetAngles, TetCombinatorics, TetShape};
pub use triangulation::Triangulation;
