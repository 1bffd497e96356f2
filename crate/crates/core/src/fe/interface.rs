//! Quadrature along patch interfaces: matched point pairs on both sides.

use super::quadrature::PointRule;
use crate::error::{CigaError, Result};
use crate::inverse::{invert_bilinear, invert_point, InverseMapConfig};
use crate::mesh::MultiPatchMesh;
use crate::spline::{NurbsPatch, Point};

/// One shared element edge with rules giving the same physical points in the
/// two adjacent elements.
#[derive(Debug, Clone)]
pub struct EdgePair {
    pub patches: [usize; 2],
    pub elements: [usize; 2],
    /// Edge rule on the first element (weights include nothing but the 1D
    /// Gauss weights; the arc length comes from the shape evaluation).
    pub rule_a: PointRule,
    /// Parent points of the same physical points in the second element.
    pub rule_b: PointRule,
}

fn lerp(a: Point, b: Point, l: f64) -> Point {
    [a[0] + l * (b[0] - a[0]), a[1] + l * (b[1] - a[1])]
}

/// Matched `n`-point Gauss rules on every interface edge of the mesh.
pub fn interface_edge_pairs(
    mesh: &MultiPatchMesh,
    patches: &[NurbsPatch],
    interfaces: &crate::mesh::InterfaceSet,
    n: usize,
) -> Result<Vec<EdgePair>> {
    if interfaces.pairs.is_empty() {
        return Err(CigaError::EmptyInterface);
    }
    let cfg = InverseMapConfig {
        tolerance: 1e-12,
        ..InverseMapConfig::default()
    };
    let mut out = Vec::new();
    for pair in &interfaces.pairs {
        for &(ea, sa, eb, sb) in &pair.edges {
            let rule_a = PointRule::edge(n, sa);
            let ca = mesh.element_params(ea);
            let cb = mesh.element_params(eb);
            let same_dir = mesh.elements[ea][sa] == mesh.elements[eb][sb];
            let mut pts_b = Vec::with_capacity(n);
            for (q, st) in rule_a.points.iter().enumerate() {
                let (n4, _) = super::shape::bilinear(*st);
                let mut xi_a = [0.0; 2];
                for k in 0..4 {
                    xi_a[0] += n4[k] * ca[k][0];
                    xi_a[1] += n4[k] * ca[k][1];
                }
                let x = patches[pair.a].map_forward(xi_a)?;
                // fraction along the edge of a
                let l = crate::fe::quadrature::gauss_legendre(n).0[q];
                let lb = if same_dir { l } else { 1.0 - l };
                let guess = lerp(cb[sb], cb[(sb + 1) % 4], lb);
                let xi_b = invert_point(&patches[pair.b], x, &cfg, Some(guess))
                    .or_else(|_| invert_point(&patches[pair.b], x, &InverseMapConfig::default(), Some(guess)))?;
                let (st_b, res) = invert_bilinear(&cb, xi_b);
                if res > 1e-12 {
                    return Err(CigaError::InvalidMesh(format!(
                        "interface point {x:?} not found in element {eb}"
                    )));
                }
                pts_b.push([st_b[0].clamp(0.0, 1.0), st_b[1].clamp(0.0, 1.0)]);
            }
            out.push(EdgePair {
                patches: [pair.a, pair.b],
                elements: [ea, eb],
                rule_a,
                rule_b: PointRule::points(pts_b),
            });
        }
    }
    Ok(out)
}
