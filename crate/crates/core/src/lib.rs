//! Multi-patch isogeometric convolution (C-IGA) analysis: NURBS patches,
//! convolution patch functions, multi-patch meshes with nodal or G0 interface
//! compatibility, Poisson and plane-stress solvers, and the convergence
//! benchmarks behind the `ciga` binary.

pub mod bench;
pub mod conv;
pub mod error;
pub mod fe;
pub mod inverse;
pub mod mesh;
pub mod par;
pub mod spline;

pub use error::{CigaError, Result};
