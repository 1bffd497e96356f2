//! Error norms over the domain and deviations across interfaces.

use super::assembly::DofMap;
use super::exact::plane_stress;
use super::interface::{interface_edge_pairs, EdgePair};
use super::quadrature::PointRule;
use super::shape::{ElementShapes, ShapeTable};
use crate::error::{CigaError, Result};
use crate::par::try_map_range;
use crate::spline::Point;
use serde::{Deserialize, Serialize};

/// Nodal values as seen from each patch.
#[derive(Debug, Clone, Copy)]
pub struct NodalField<'a> {
    pub dofs: &'a DofMap,
    pub u: &'a [f64],
}

impl NodalField<'_> {
    pub fn value(&self, patch: usize, node: usize, comp: usize) -> f64 {
        self.u[self.dofs.slot(patch, node) * self.dofs.ncomp + comp]
    }

    /// Field value and gradient of component `comp` at point q.
    fn at(&self, sh: &ElementShapes, patch: usize, q: usize, comp: usize) -> (f64, [f64; 2]) {
        sh.interpolate(q, |n| self.value(patch, n, comp))
    }
}

/// Absolute and exact-solution norms over the whole domain. The H1 and
/// energy norms are broken: root-sum-square of patchwise integrals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_broken: f64,
    pub energy: f64,
    pub exact_l2: f64,
    pub exact_h1: f64,
    pub exact_energy: f64,
}

impl ErrorNorms {
    pub fn relative_l2(&self) -> f64 {
        self.l2 / self.exact_l2
    }

    pub fn relative_energy(&self) -> f64 {
        self.energy / self.exact_energy
    }
}

/// Per element: squared integrals [e_l2, e_grad, u_l2, u_grad] summed.
fn accumulate(table: &ShapeTable<'_>, nq: usize, f: impl Fn(usize, &ElementShapes) -> [f64; 4] + Sync) -> Result<Vec<[f64; 4]>> {
    let mesh = table.mesh();
    let rule = PointRule::volume(nq);
    let per = try_map_range(table.exec, mesh.num_elements(), |e| {
        let sh = table.eval_element(e, &rule)?;
        Ok::<_, CigaError>(f(e, &sh))
    })?;
    let mut patches = vec![[0.0; 4]; mesh.patches.len()];
    for (e, v) in per.into_iter().enumerate() {
        let p = &mut patches[mesh.element_patch[e]];
        for k in 0..4 {
            p[k] += v[k];
        }
    }
    Ok(patches)
}

fn finish(patches: &[[f64; 4]]) -> ErrorNorms {
    let s = |k: usize| patches.iter().map(|p| p[k]).sum::<f64>();
    ErrorNorms {
        l2: s(0).sqrt(),
        h1_broken: (s(0) + s(1)).sqrt(),
        energy: s(1).sqrt(),
        exact_l2: s(2).sqrt(),
        exact_h1: (s(2) + s(3)).sqrt(),
        exact_energy: s(3).sqrt(),
    }
}

/// L2, broken H1 and energy (gradient) errors of a scalar field against an
/// exact solution returning (u, grad u).
pub fn compute_error_norms(
    table: &ShapeTable<'_>,
    field: NodalField<'_>,
    exact: &(dyn Fn(Point) -> (f64, [f64; 2]) + Sync),
    nq: usize,
) -> Result<ErrorNorms> {
    let mesh = table.mesh();
    let patches = accumulate(table, nq, |e, sh| {
        let pa = mesh.element_patch[e];
        let mut acc = [0.0; 4];
        for q in 0..sh.nq {
            let (uh, gh) = field.at(sh, pa, q, 0);
            let (u, g) = exact(sh.x[q]);
            let w = sh.jxw[q];
            acc[0] += w * (uh - u).powi(2);
            acc[1] += w * ((gh[0] - g[0]).powi(2) + (gh[1] - g[1]).powi(2));
            acc[2] += w * u * u;
            acc[3] += w * (g[0] * g[0] + g[1] * g[1]);
        }
        acc
    })?;
    Ok(finish(&patches))
}

/// Energy error sqrt(int 1/2 C^-1 (sigma_h - sigma) . (sigma_h - sigma))
/// of a plane-stress displacement field, reported in `energy`;
/// `exact_energy` is the same functional of the exact stress. L2/H1
/// entries are zero.
pub fn elasticity_energy_error(
    table: &ShapeTable<'_>,
    field: NodalField<'_>,
    young: f64,
    poisson: f64,
    exact_stress: &(dyn Fn(Point) -> [f64; 3] + Sync),
    nq: usize,
) -> Result<ErrorNorms> {
    let mesh = table.mesh();
    let d = plane_stress(young, poisson);
    let c = super::exact::plane_stress_compliance(young, poisson);
    let quad = |s: &[f64; 3]| -> f64 {
        let mut v = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                v += s[i] * c[i][j] * s[j];
            }
        }
        0.5 * v
    };
    let patches = accumulate(table, nq, |e, sh| {
        let pa = mesh.element_patch[e];
        let mut acc = [0.0; 4];
        for q in 0..sh.nq {
            let (_, gx) = field.at(sh, pa, q, 0);
            let (_, gy) = field.at(sh, pa, q, 1);
            let eps = [gx[0], gy[1], gx[1] + gy[0]];
            let mut sh_s = [0.0; 3];
            for i in 0..3 {
                sh_s[i] = (0..3).map(|j| d[i][j] * eps[j]).sum();
            }
            let s = exact_stress(sh.x[q]);
            let diff = [sh_s[0] - s[0], sh_s[1] - s[1], sh_s[2] - s[2]];
            let w = sh.jxw[q];
            acc[1] += w * quad(&diff);
            acc[3] += w * quad(&s);
        }
        acc
    })?;
    Ok(finish(&patches))
}

/// Relative L2 deviation between the two traces on every interface:
/// ||u1 - u2|| / (||u1|| + ||u2||), summing components of vector fields.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct InterfaceDeviation {
    pub relative: f64,
    pub jump_l2: f64,
    /// max |u1 - u2| over the quadrature points.
    pub max_jump: f64,
}

pub fn interface_deviation(table: &ShapeTable<'_>, field: NodalField<'_>, nq: usize) -> Result<InterfaceDeviation> {
    let pairs = interface_edge_pairs(table.mesh(), table.patches(), &table.interfaces, nq)?;
    deviation_on_pairs(table, field, &pairs)
}

pub fn deviation_on_pairs(table: &ShapeTable<'_>, field: NodalField<'_>, pairs: &[EdgePair]) -> Result<InterfaceDeviation> {
    if pairs.is_empty() {
        return Err(CigaError::EmptyInterface);
    }
    let nc = field.dofs.ncomp;
    let per = try_map_range(table.exec, pairs.len(), |i| {
        let p = &pairs[i];
        let sa = table.eval_element(p.elements[0], &p.rule_a)?;
        let sb = table.eval_element(p.elements[1], &p.rule_b)?;
        let mut acc = [0.0; 4];
        for q in 0..sa.nq {
            let w = sa.jxw[q];
            let (mut j2, mut a2, mut b2) = (0.0, 0.0, 0.0);
            for c in 0..nc {
                let ua = field.at(&sa, p.patches[0], q, c).0;
                let ub = field.at(&sb, p.patches[1], q, c).0;
                j2 += (ua - ub).powi(2);
                a2 += ua * ua;
                b2 += ub * ub;
            }
            acc[0] += w * j2;
            acc[1] += w * a2;
            acc[2] += w * b2;
            acc[3] = acc[3].max(j2.sqrt());
        }
        Ok::<_, CigaError>(acc)
    })?;
    let mut t = [0.0; 4];
    for a in per {
        for k in 0..3 {
            t[k] += a[k];
        }
        t[3] = t[3].max(a[3]);
    }
    let den = t[1].sqrt() + t[2].sqrt();
    Ok(InterfaceDeviation {
        relative: if den > 0.0 { t[0].sqrt() / den } else { 0.0 },
        jump_l2: t[0].sqrt(),
        max_jump: t[3],
    })
}
