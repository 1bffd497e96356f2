//! Convolution patch functions: RBF plus reproduced-basis interpolants with
//! the Kronecker-delta property.

mod basis;
mod functions;
mod interface;
mod product;
mod rbf;

pub use basis::{Monomials, PolySpace, ReproducedBasis, Stacked, WeightFn, WeightedMonomials};
pub use functions::{build_conv_functions, ConvFunctions, ConvSpec, BasisKind};
pub use interface::build_interface_conv_1d;
pub use product::{product_rule_conv_2d, ProductConv};
pub use rbf::{rbf_eval, RbfKind};
