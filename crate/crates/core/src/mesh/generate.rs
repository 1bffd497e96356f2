use super::multipatch::{BoundaryEdge, BoundaryTag, Grid, MultiPatchMesh};
use crate::error::{CigaError, Result};
use crate::inverse::{invert_mesh, InverseMapConfig};
use crate::par::Execution;
use crate::spline::{KnotVector, NurbsPatch, PatchKind, Point, DEFAULT_DELTA};

pub const PLATE_HOLE_RADIUS: f64 = 0.5;
pub const PLATE_HALF_WIDTH: f64 = 4.0;

/// The two quadratic NURBS patches of the quarter plate with a hole,
/// x in [-4, 0], y in [0, 4], hole of radius 0.5 at the origin.
///
/// Both patches run radially in u (u = 0 on the hole) and start at the
/// 45-degree diagonal in v (v = 0). Patch 0 lies below the diagonal and has
/// two knot spans in u; patch 1 lies above it with a single span. Patch 0
/// traces the diagonal affinely, patch 1 with the non-affine speed of the
/// control points 0, 0.3, 1 unless `matched` is set, in which case patch 1
/// is reparameterized to follow patch 0 along the diagonal.
pub fn plate_with_hole_patches(matched: bool) -> Result<[NurbsPatch; 2]> {
    let r = PLATE_HOLE_RADIUS;
    let l = PLATE_HALF_WIDTH;
    let s2 = std::f64::consts::SQRT_2;
    let wmid = (std::f64::consts::PI / 8.0).cos();
    // Arc from 135 to 180 degrees and the matching outer edge x = -l.
    let arc = [([-r / s2, r / s2], 1.0), ([-r, r * (s2 - 1.0)], wmid), ([-r, 0.0], 1.0)];
    let outer = [[-l, l], [-l, l / 2.0], [-l, 0.0]];
    let build = |id: usize, uknots: Vec<f64>, blend: [&[f64]; 3], mirror: bool| -> Result<NurbsPatch> {
        let nu = blend[0].len();
        let mut pts = Vec::new();
        let mut ws = Vec::new();
        for j in 0..3 {
            let (pa, wa) = arc[j];
            let po = outer[j];
            for &g in blend[j] {
                let w = (1.0 - g) * wa + g;
                let x = [
                    ((1.0 - g) * wa * pa[0] + g * po[0]) / w,
                    ((1.0 - g) * wa * pa[1] + g * po[1]) / w,
                ];
                pts.push(if mirror { [-x[1], -x[0]] } else { x });
                ws.push(w);
            }
            debug_assert_eq!(blend[j].len(), nu);
        }
        NurbsPatch::new(
            id,
            vec![KnotVector::new(uknots, 2)?, KnotVector::bezier(2)],
            pts,
            ws,
            PatchKind::Nurbs,
            DEFAULT_DELTA,
        )
    };
    let p0 = build(
        0,
        vec![0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0],
        [&[0.0, 0.25, 0.75, 1.0], &[0.0, 0.2, 0.6, 1.0], &[0.0, 0.15, 0.55, 1.0]],
        false,
    )?;
    let p1 = build(
        1,
        vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
        [&[0.0, if matched { 0.5 } else { 0.3 }, 1.0], &[0.0, 0.4, 1.0], &[0.0, 0.35, 1.0]],
        true,
    )?;
    Ok([p0, p1])
}

/// Plate-with-hole mesh options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateOptions {
    /// Elements per parametric direction in each patch (even).
    pub n: usize,
    /// Both patches; otherwise only the lower patch.
    pub two_patch: bool,
    /// Layout for G0 compatibility: patch 1 follows patch 0's parameterization
    /// of the diagonal, is split at u = 0.5 and both patches carry grids.
    pub g0_layout: bool,
}

impl PlateOptions {
    /// Refinement level L has 10 * 2^L elements per direction per patch.
    pub fn level(level: u32, two_patch: bool) -> Self {
        Self {
            n: 10 << level,
            two_patch,
            g0_layout: false,
        }
    }
}

/// Tensor parametric grids mapped forward. Patch 0 is uniform. Nodes on the
/// diagonal are taken from patch 0 and inverted through patch 1's map, so
/// both patches list identical physical nodes there; patch 1 reuses those
/// u abscissae on every row (uniform again under `g0_layout`).
pub fn generate_plate_with_hole(
    opts: PlateOptions,
    inverse: &InverseMapConfig,
) -> Result<(MultiPatchMesh, Vec<NurbsPatch>)> {
    let n = opts.n;
    if n < 2 || n % 2 != 0 {
        return Err(CigaError::Config(format!("elements per direction must be even and >= 2, got {n}")));
    }
    let [p0, p1] = plate_with_hole_patches(opts.g0_layout)?;
    let t: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let stride = n + 1;
    let mut nodes = Vec::new();
    let mut params0 = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            let xi = [t[i], t[j]];
            params0.push((nodes.len(), xi));
            nodes.push(p0.map_forward(xi)?);
        }
    }
    let mut ids1 = Vec::new();
    let mut params1 = Vec::new();
    let mut u1 = t.clone();
    if opts.two_patch {
        let shared: Vec<Point> = (0..=n).map(|i| nodes[i]).collect();
        let mut inv = invert_mesh(&p1, &shared, inverse, Execution::Sequential)?;
        if opts.g0_layout {
            // Identical parameterizations of the diagonal: snap the inverted
            // abscissae so both patches build bitwise identical 1D functions.
            for (xi, &ti) in inv.iter_mut().zip(&t) {
                if (xi[0] - ti).abs() > 1e-9 || xi[1].abs() > 1e-9 {
                    return Err(CigaError::InvalidMesh(format!("diagonal node inverted to {xi:?}, expected ({ti}, 0)")));
                }
                *xi = [ti, 0.0];
            }
        }
        u1 = inv.iter().map(|xi| xi[0]).collect();
        for (i, xi) in inv.into_iter().enumerate() {
            ids1.push(i);
            params1.push((i, xi));
        }
        for j in 1..=n {
            for i in 0..=n {
                let xi = [u1[i], t[j]];
                ids1.push(nodes.len());
                params1.push((nodes.len(), xi));
                nodes.push(p1.map_forward(xi)?);
            }
        }
    }
    let id0 = |i: usize, j: usize| i + stride * j;
    let mut elements = Vec::new();
    let mut element_patch = Vec::new();
    let mut boundary = Vec::new();
    let quad = |id: &dyn Fn(usize, usize) -> usize, i: usize, j: usize| {
        [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]
    };
    for j in 0..n {
        for i in 0..n {
            elements.push(quad(&id0, i, j));
            element_patch.push(0);
        }
    }
    let edge = |a: usize, b: usize, tag: BoundaryTag, group: &str| BoundaryEdge {
        nodes: [a, b],
        tag,
        group: group.to_string(),
    };
    for k in 0..n {
        boundary.push(edge(id0(0, k), id0(0, k + 1), BoundaryTag::Neumann, "hole"));
        boundary.push(edge(id0(n, k), id0(n, k + 1), BoundaryTag::Neumann, "left"));
        boundary.push(edge(id0(k, n), id0(k + 1, n), BoundaryTag::Dirichlet, "bottom"));
    }
    if !opts.two_patch {
        for k in 0..n {
            boundary.push(edge(id0(k, 0), id0(k + 1, 0), BoundaryTag::Dirichlet, "diagonal"));
        }
    }
    let id1 = |i: usize, j: usize| ids1[i + stride * j];
    if opts.two_patch {
        for j in 0..n {
            for i in 0..n {
                elements.push(quad(&id1, i, j));
                element_patch.push(1);
            }
        }
        for k in 0..n {
            boundary.push(edge(id1(0, k), id1(0, k + 1), BoundaryTag::Neumann, "hole"));
            boundary.push(edge(id1(n, k), id1(n, k + 1), BoundaryTag::Neumann, "top"));
            boundary.push(edge(id1(k, n), id1(k + 1, n), BoundaryTag::Dirichlet, "right"));
        }
    }
    let breaks0 = [p0.knot_vectors()[0].interior_breakpoints(), Vec::new()];
    let mut breaks1 = [p1.knot_vectors()[0].interior_breakpoints(), Vec::new()];
    if opts.g0_layout && !breaks1[0].contains(&0.5) {
        breaks1[0].push(0.5);
    }
    let (patch_params, breaks, patches) = if opts.two_patch {
        (vec![params0, params1], vec![breaks0, breaks1], vec![p0, p1])
    } else {
        (vec![params0], vec![breaks0], vec![p0])
    };
    let mut mesh = MultiPatchMesh::new(nodes, elements, element_patch, boundary, patch_params, breaks)?;
    mesh.set_grid(
        0,
        Grid {
            u: t.clone(),
            v: t.clone(),
            ids: (0..stride * stride).collect(),
        },
    )?;
    if opts.two_patch {
        mesh.set_grid(
            1,
            Grid {
                u: u1,
                v: t.clone(),
                ids: ids1.clone(),
            },
        )?;
    }
    let rt = mesh.round_trip_error(&patches)?;
    if rt >= inverse.tolerance {
        return Err(CigaError::InvalidMesh(format!("round-trip error {rt:e} above tolerance")));
    }
    Ok((mesh, patches))
}

/// Two quadratic maps of [0, 1] onto [0, 10] sharing uniform physical nodes.
#[derive(Debug, Clone)]
pub struct TwoMap1d {
    pub maps: [NurbsPatch; 2],
    /// Uniform physical nodes.
    pub x: Vec<f64>,
    /// Parametric nodes per map.
    pub params: [Vec<f64>; 2],
}

/// Control points 0, 3, 10 and 0, 8, 10 on a single Bezier span; the
/// parametric nodes come from inverting each map.
pub fn generate_1d_two_map(n_elements: usize, inverse: &InverseMapConfig) -> Result<TwoMap1d> {
    if n_elements < 2 {
        return Err(CigaError::Config("at least two elements are required".into()));
    }
    let f1 = NurbsPatch::bspline_1d(0, KnotVector::bezier(2), &[0.0, 3.0, 10.0])?;
    let f2 = NurbsPatch::bspline_1d(1, KnotVector::bezier(2), &[0.0, 8.0, 10.0])?;
    let x: Vec<f64> = (0..=n_elements).map(|i| 10.0 * i as f64 / n_elements as f64).collect();
    let pts: Vec<Point> = x.iter().map(|&v| [v, 0.0]).collect();
    let inv1 = invert_mesh(&f1, &pts, inverse, Execution::Sequential)?;
    let inv2 = invert_mesh(&f2, &pts, inverse, Execution::Sequential)?;
    Ok(TwoMap1d {
        maps: [f1, f2],
        x,
        params: [inv1.iter().map(|p| p[0]).collect(), inv2.iter().map(|p| p[0]).collect()],
    })
}

/// Uniform n x n parametric grid on one patch, every boundary edge tagged
/// Dirichlet with groups "v0", "u1", "v1", "u0".
pub fn generate_single_patch(patch: &NurbsPatch, n: usize) -> Result<MultiPatchMesh> {
    if n == 0 || patch.dim() != 2 {
        return Err(CigaError::Config("need a surface patch and at least one element".into()));
    }
    let t: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let stride = n + 1;
    let id = |i: usize, j: usize| i + stride * j;
    let mut nodes = Vec::new();
    let mut params = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            params.push((nodes.len(), [t[i], t[j]]));
            nodes.push(patch.map_forward([t[i], t[j]])?);
        }
    }
    let mut elements = Vec::new();
    for j in 0..n {
        for i in 0..n {
            elements.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mut boundary = Vec::new();
    for k in 0..n {
        for (a, b, g) in [
            (id(k, 0), id(k + 1, 0), "v0"),
            (id(n, k), id(n, k + 1), "u1"),
            (id(k, n), id(k + 1, n), "v1"),
            (id(0, k), id(0, k + 1), "u0"),
        ] {
            boundary.push(BoundaryEdge {
                nodes: [a, b],
                tag: BoundaryTag::Dirichlet,
                group: g.to_string(),
            });
        }
    }
    let kv = patch.knot_vectors();
    let breaks = [kv[0].interior_breakpoints(), kv[1].interior_breakpoints()];
    let ne = elements.len();
    let mut mesh = MultiPatchMesh::new(nodes, elements, vec![0; ne], boundary, vec![params], vec![breaks])?;
    mesh.set_grid(
        0,
        Grid {
            u: t.clone(),
            v: t,
            ids: (0..stride * stride).collect(),
        },
    )?;
    Ok(mesh)
}
