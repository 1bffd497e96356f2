//! Multi-patch meshes: shared physical nodes, per-patch parametric nodes,
//! interfaces and convolution-patch index sets.

mod generate;
mod index;
mod interfaces;
mod json;
mod multipatch;

pub use generate::{
    generate_1d_two_map, generate_plate_with_hole, generate_single_patch, plate_with_hole_patches, PlateOptions,
    TwoMap1d, PLATE_HALF_WIDTH, PLATE_HOLE_RADIUS,
};
pub use index::{build_conv_patch_sets, ConvPatchIndex, NodeSet};
pub use interfaces::{detect_interfaces, InterfacePair, InterfaceSet, ParamEdge};
pub use json::{BoundaryJson, MeshJson};
pub use multipatch::{BoundaryEdge, BoundaryTag, Grid, MultiPatchMesh, PatchNodes};
