use super::basis::{Monomials, PolySpace, ReproducedBasis, Stacked, WeightFn, WeightedMonomials};
use super::functions::{build_conv_functions, ConvFunctions, ConvSpec};
use crate::error::{CigaError, Result};
use std::sync::Arc;

/// Shared 1D convolution functions along an interface.
///
/// `nodes_a` and `nodes_b` are the abscissae of the same physical interface
/// nodes in the two patches; the regular-grid requirement makes them equal.
/// `traces` are the weighting functions restricted to the interface, or
/// `None` for B-spline sides. The reproduced basis stacks
/// `[t^q / W_a(t)]` and `[t^q / W_b(t)]`, q = 0..=order, dropping rows that
/// coincide at the nodes.
pub fn build_interface_conv_1d(
    center: usize,
    nodes_a: &[f64],
    nodes_b: &[f64],
    traces: [Option<WeightFn>; 2],
    spec: &ConvSpec,
    order: usize,
) -> Result<ConvFunctions> {
    if nodes_a.len() != nodes_b.len()
        || nodes_a.iter().zip(nodes_b).any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(CigaError::Config(
            "interface abscissae of the two patches do not match".into(),
        ));
    }
    let pts: Vec<[f64; 2]> = nodes_a.iter().map(|&t| [t, 0.0]).collect();
    let lo = nodes_a.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = nodes_a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let c = 0.5 * (lo + hi);
    let scale = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };
    let parts: Vec<Arc<dyn ReproducedBasis>> = traces
        .into_iter()
        .map(|t| {
            let mono = Monomials::new(1, order, PolySpace::Tensor, [c, 0.0], scale);
            match t {
                Some(w) => Arc::new(WeightedMonomials { inner: mono, weight: w }) as Arc<dyn ReproducedBasis>,
                None => Arc::new(mono),
            }
        })
        .collect();
    let basis = Stacked::new(parts).dedup_at(&pts, 1e-12);
    build_conv_functions(center, &pts, Arc::new(basis), spec).map_err(|e| match e {
        CigaError::SingularMoment { node } | CigaError::InsufficientNodes { node, .. } => {
            CigaError::SingularInterfaceMoment { node }
        }
        other => other,
    })
}
