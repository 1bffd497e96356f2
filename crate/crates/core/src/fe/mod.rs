//! C-IGA shape functions, assembly, solvers and error norms.

mod assembly;
pub mod exact;
mod interface;
mod norms;
mod quadrature;
mod shape;
mod shape1d;
mod solve;

pub use assembly::{
    assemble_elasticity, assemble_poisson, group_nodes, Csr, DofMap, DofSystem, SolveConfig, SolverKind,
};
pub use interface::{interface_edge_pairs, EdgePair};
pub use norms::{
    compute_error_norms, deviation_on_pairs, elasticity_energy_error, interface_deviation, ErrorNorms,
    InterfaceDeviation, NodalField,
};
pub use quadrature::{gauss_legendre, side_point, PointRule};
pub use shape::{build_shape_table, CompatMode, ElementShapes, NodeKind, ShapeTable};
pub use shape1d::Shape1d;
pub use solve::{solve_system, Solution};
