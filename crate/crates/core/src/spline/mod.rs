//! B-spline and NURBS bases, geometric maps and their Jacobians.

mod basis;
mod knots;
mod patch;

pub use basis::{eval_basis, BasisValues};
pub use knots::KnotVector;
pub use patch::{NurbsPatch, PatchEval, PatchJson, PatchKind, RationalBasis, DEFAULT_DELTA};

/// A point in the plane. One-dimensional quantities use the first slot.
pub type Point = [f64; 2];
