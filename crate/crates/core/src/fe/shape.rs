//! C-IGA shape functions: a bilinear FEM layer in the parametric domain
//! composed with convolution patch functions,
//! N~_J(xi) = sum_I N_I(xi) W^I_J(xi).
//!
//! Every convolution function is stored in "reduced" form V with
//! W_K(xi) = w_K / w(xi) * V_K(xi), w being the NURBS weighting function.
//! For ordinary (radial) patches V reproduces polynomials, so W reproduces
//! polynomials over w; V then depends only on the local node layout and is
//! shared between translated copies of the same layout.

use super::quadrature::PointRule;
use crate::conv::{
    build_conv_functions, build_interface_conv_1d, ConvFunctions, ConvSpec, Monomials, ReproducedBasis,
    WeightFn,
};
use crate::error::{CigaError, Result};
use crate::mesh::{build_conv_patch_sets, detect_interfaces, ConvPatchIndex, InterfaceSet, MultiPatchMesh};
use crate::par::{map_range, try_map_range, Execution};
use crate::spline::{NurbsPatch, Point};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Arc, RwLock};

/// How neighbouring patches are coupled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompatMode {
    /// Shared interface nodes, ordinary convolution patches on each side.
    #[default]
    Nodal,
    /// Shared nodes plus product-rule functions near interfaces and knot
    /// lines, continuous along the whole interface.
    G0,
    /// Separate interface nodes per patch coupled by a penalty term.
    Penalty,
}

impl std::str::FromStr for CompatMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "nodal" => Ok(CompatMode::Nodal),
            "g0" => Ok(CompatMode::G0),
            "penalty" => Ok(CompatMode::Penalty),
            _ => Err(format!("unknown compatibility mode `{s}` (nodal|g0|penalty)")),
        }
    }
}

impl std::fmt::Display for CompatMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CompatMode::Nodal => "nodal",
            CompatMode::G0 => "g0",
            CompatMode::Penalty => "penalty",
        })
    }
}

/// Construction used for one node's convolution patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// s = 0: W = delta.
    Identity,
    /// Two-dimensional RBF patch.
    Radial,
    /// Product of 1D patches.
    Product,
}

#[derive(Debug)]
struct Trace {
    axis: usize,
    line: f64,
    /// Trace weight at the member abscissae along `axis`.
    at_nodes: Vec<f64>,
}

#[derive(Debug)]
struct ProductNode {
    f: [ConvFunctions; 2],
    center: Point,
    h: [f64; 2],
    n0: usize,
    /// Tensor index (axis-0 fastest) -> member position.
    perm: Vec<usize>,
    trace: Option<Trace>,
}

#[derive(Debug)]
enum NodeFn {
    Identity,
    Radial {
        conv: Arc<ConvFunctions>,
        pattern: u32,
        center: Point,
        h: f64,
    },
    Product(Box<ProductNode>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    pattern: u32,
    rel: [i64; 8],
    rule: u64,
}

const QUANT: f64 = 1e11;

fn quantize(v: f64) -> i64 {
    (v * QUANT).round() as i64
}

/// Shape data of one element at a set of points.
#[derive(Debug, Clone)]
pub struct ElementShapes {
    /// A_s^e, sorted global node ids.
    pub nodes: Vec<usize>,
    pub nq: usize,
    /// `values[q * nodes.len() + j]`
    pub values: Vec<f64>,
    /// Physical gradients, same layout.
    pub grads: Vec<[f64; 2]>,
    pub x: Vec<Point>,
    pub xi: Vec<Point>,
    /// Quadrature weight times the area (or, for edge rules, length) element.
    pub jxw: Vec<f64>,
}

impl ElementShapes {
    pub fn row(&self, q: usize) -> &[f64] {
        let n = self.nodes.len();
        &self.values[q * n..(q + 1) * n]
    }

    pub fn grad_row(&self, q: usize) -> &[[f64; 2]] {
        let n = self.nodes.len();
        &self.grads[q * n..(q + 1) * n]
    }

    /// Interpolated value and gradient of a nodal field at point q.
    pub fn interpolate(&self, q: usize, field: impl Fn(usize) -> f64) -> (f64, [f64; 2]) {
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for ((&n, &s), ds) in self.nodes.iter().zip(self.row(q)).zip(self.grad_row(q)) {
            let u = field(n);
            v += s * u;
            g[0] += ds[0] * u;
            g[1] += ds[1] * u;
        }
        (v, g)
    }
}

/// Lazily evaluated C-IGA shape functions over a multi-patch mesh.
pub struct ShapeTable<'m> {
    mesh: &'m MultiPatchMesh,
    patches: &'m [NurbsPatch],
    pub spec: ConvSpec,
    pub mode: CompatMode,
    pub index: ConvPatchIndex,
    pub interfaces: InterfaceSet,
    pub exec: Execution,
    fns: Vec<NodeFn>,
    /// Weighting function at every patch node (local order).
    node_weights: Vec<Vec<f64>>,
    cache: RwLock<HashMap<CacheKey, Arc<Vec<f64>>>>,
    patterns: usize,
}

impl std::fmt::Debug for ShapeTable<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShapeTable")
            .field("mode", &self.mode)
            .field("spec", &self.spec)
            .field("node_sets", &self.fns.len())
            .field("patterns", &self.patterns)
            .finish()
    }
}

fn full_column_rank(mono: &Monomials, pts: &[Point]) -> bool {
    let m = mono.len();
    let mut a = nalgebra::DMatrix::<f64>::zeros(pts.len(), m);
    let mut v = vec![0.0; m];
    let mut g = vec![[0.0; 2]; m];
    for (i, &p) in pts.iter().enumerate() {
        mono.eval(p, &mut v, &mut g);
        for k in 0..m {
            a[(i, k)] = v[k];
        }
    }
    let sv = a.singular_values();
    let max = sv.max();
    max > 0.0 && sv.min() > 1e-10 * max
}

/// Convolution functions on normalized coordinates, lowering the
/// reproducing order until the polynomial moment matrix has full rank.
fn build_reduced(node: usize, pts: &[Point], dim: usize, spec: &ConvSpec) -> Result<ConvFunctions> {
    for p in (0..=spec.p).rev() {
        let m = Monomials::count(dim, p, spec.space);
        if pts.len() < m {
            continue;
        }
        let mono = Monomials::plain(dim, p, spec.space);
        if !full_column_rank(&mono, pts) {
            continue;
        }
        return build_conv_functions(node, pts, Arc::new(mono), spec);
    }
    Err(CigaError::InsufficientNodes {
        node,
        n: pts.len(),
        m: 1,
    })
}

/// Bilinear parent functions and parent derivatives at (s, t).
pub(crate) fn bilinear(st: Point) -> ([f64; 4], [[f64; 2]; 4]) {
    let (s, t) = (st[0], st[1]);
    (
        [(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t],
        [[-(1.0 - t), -(1.0 - s)], [1.0 - t, -s], [t, s], [-t, 1.0 - s]],
    )
}

/// Parametric point, bilinear functions and their parametric gradients,
/// and |det| of the parent-to-parametric map.
fn element_map(corners: &[Point; 4], st: Point) -> Result<(Point, [f64; 4], [[f64; 2]; 4], f64)> {
    let (n, dn) = bilinear(st);
    let mut xi = [0.0; 2];
    let mut j = [[0.0; 2]; 2];
    for k in 0..4 {
        for r in 0..2 {
            xi[r] += n[k] * corners[k][r];
            j[r][0] += dn[k][0] * corners[k][r];
            j[r][1] += dn[k][1] * corners[k][r];
        }
    }
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det.abs() < 1e-300 {
        return Err(CigaError::InvalidMesh("degenerate parametric element".into()));
    }
    let mut g = [[0.0; 2]; 4];
    for k in 0..4 {
        // J^{-T} dn
        g[k] = [
            (j[1][1] * dn[k][0] - j[1][0] * dn[k][1]) / det,
            (-j[0][1] * dn[k][0] + j[0][0] * dn[k][1]) / det,
        ];
    }
    Ok((xi, n, g, det.abs()))
}

/// Builds the convolution patches of every node for the given mode.
pub fn build_shape_table<'m>(
    mesh: &'m MultiPatchMesh,
    patches: &'m [NurbsPatch],
    spec: ConvSpec,
    mode: CompatMode,
    exec: Execution,
) -> Result<ShapeTable<'m>> {
    if patches.len() != mesh.patches.len() {
        return Err(CigaError::InvalidMesh(format!(
            "{} patch maps for {} mesh patches",
            patches.len(),
            mesh.patches.len()
        )));
    }
    if !(spec.a > 0.0) {
        return Err(CigaError::Config(format!("dilation must be positive, got {}", spec.a)));
    }
    let interfaces = detect_interfaces(mesh)?;
    let index = build_conv_patch_sets(mesh, spec.s, interfaces.node_flags(mesh.num_nodes()), exec);
    let node_weights = try_map_range(exec, patches.len(), |a| {
        mesh.patches[a]
            .params
            .iter()
            .map(|&xi| patches[a].weight_fn(xi).map(|w| w.0))
            .collect::<Result<Vec<f64>>>()
    })?;

    let mut node_elements: Vec<Vec<u32>> = vec![Vec::new(); mesh.num_nodes()];
    for (e, el) in mesh.elements.iter().enumerate() {
        for &n in el {
            node_elements[n].push(e as u32);
        }
    }

    let g0 = mode == CompatMode::G0 && spec.s > 0;
    let lines = if g0 { interface_lines(mesh, patches, &interfaces)? } else { Vec::new() };

    // Decide the construction of every set; radial layouts are deduplicated.
    let kinds: Vec<NodeKind> = map_range(exec, index.sets.len(), |k| {
        if spec.s == 0 {
            NodeKind::Identity
        } else if g0 && touches_line(mesh, &index, k, &lines[index.sets[k].patch]).is_some() {
            NodeKind::Product
        } else {
            NodeKind::Radial
        }
    });
    let radial_geom: Vec<Option<(Point, f64, Vec<Point>)>> = map_range(exec, index.sets.len(), |k| {
        if kinds[k] != NodeKind::Radial {
            return None;
        }
        let set = &index.sets[k];
        let pn = &mesh.patches[set.patch];
        let c = pn.param_of(set.node).unwrap();
        let mut len = 0.0;
        let mut cnt = 0usize;
        for &e in &node_elements[set.node] {
            let e = e as usize;
            if mesh.element_patch[e] != set.patch || mesh.element_cell(e) != set.cell {
                continue;
            }
            let el = &mesh.elements[e];
            let at = el.iter().position(|&n| n == set.node).unwrap();
            for nb in [el[(at + 1) % 4], el[(at + 3) % 4]] {
                let q = pn.param_of(nb).unwrap();
                len += ((q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2)).sqrt();
                cnt += 1;
            }
        }
        let h = if cnt > 0 { len / cnt as f64 } else { 1.0 };
        let z = set
            .members
            .iter()
            .map(|&m| {
                let q = pn.param_of(m).unwrap();
                [(q[0] - c[0]) / h, (q[1] - c[1]) / h]
            })
            .collect();
        Some((c, h, z))
    });
    let mut pattern_of = vec![u32::MAX; index.sets.len()];
    let mut reps: Vec<usize> = Vec::new();
    {
        let mut seen: HashMap<Vec<i64>, u32> = HashMap::new();
        for (k, g) in radial_geom.iter().enumerate() {
            if let Some((_, _, z)) = g {
                let key: Vec<i64> = z.iter().flat_map(|p| [quantize(p[0]), quantize(p[1])]).collect();
                let id = *seen.entry(key).or_insert_with(|| {
                    reps.push(k);
                    (reps.len() - 1) as u32
                });
                pattern_of[k] = id;
            }
        }
    }
    let convs: Vec<Arc<ConvFunctions>> = try_map_range(exec, reps.len(), |r| {
        let k = reps[r];
        let z = &radial_geom[k].as_ref().unwrap().2;
        build_reduced(index.sets[k].node, z, 2, &spec).map(Arc::new)
    })?;
    let fns: Vec<NodeFn> = try_map_range(exec, index.sets.len(), |k| match kinds[k] {
        NodeKind::Identity => Ok(NodeFn::Identity),
        NodeKind::Radial => {
            let (c, h, _) = radial_geom[k].as_ref().unwrap();
            Ok(NodeFn::Radial {
                conv: convs[pattern_of[k] as usize].clone(),
                pattern: pattern_of[k],
                center: *c,
                h: *h,
            })
        }
        NodeKind::Product => build_product(mesh, patches, &index, k, &lines, &spec).map(|p| NodeFn::Product(Box::new(p))),
    })?;
    Ok(ShapeTable {
        mesh,
        patches,
        spec,
        mode,
        index,
        interfaces,
        exec,
        fns,
        node_weights,
        cache: RwLock::new(HashMap::new()),
        patterns: reps.len(),
    })
}

/// A line of a patch's parametric domain that G0 construction treats as an
/// interface: `axis` is the fixed coordinate, `value` its value.
#[derive(Clone)]
struct Line {
    axis: usize,
    value: f64,
    /// For true patch interfaces: trace weights of both patches (ordered by
    /// patch id) as functions of the tangent coordinate.
    traces: Option<[WeightFn; 2]>,
}

fn trace_fn(patch: Arc<NurbsPatch>, tangent: usize, value: f64) -> WeightFn {
    Arc::new(move |t: Point| {
        let mut xi = [0.0; 2];
        xi[tangent] = t[0].clamp(0.0, 1.0);
        xi[1 - tangent] = value;
        let (w, dw) = patch.weight_fn(xi).expect("trace inside the unit square");
        (w, [dw[tangent], 0.0])
    })
}

fn interface_lines(mesh: &MultiPatchMesh, patches: &[NurbsPatch], interfaces: &InterfaceSet) -> Result<Vec<Vec<Line>>> {
    let mut lines: Vec<Vec<Line>> = vec![Vec::new(); patches.len()];
    for (a, pn) in mesh.patches.iter().enumerate() {
        if pn.grid.is_none() {
            return Err(CigaError::InvalidMesh(format!(
                "G0 compatibility needs a regular parametric grid; patch {a} has none"
            )));
        }
        for axis in 0..2 {
            for &v in &pn.span_breaks[axis] {
                lines[a].push(Line {
                    axis,
                    value: v,
                    traces: None,
                });
            }
        }
    }
    let shared: Vec<Arc<NurbsPatch>> = patches.iter().map(|p| Arc::new(p.clone())).collect();
    for pair in &interfaces.pairs {
        let [Some(ea), Some(eb)] = pair.param_edge else {
            return Err(CigaError::InvalidMesh(format!(
                "interface between patches {} and {} is not a full parametric edge",
                pair.a, pair.b
            )));
        };
        let (ta, tb) = (ea.tangent_axis(), eb.tangent_axis());
        for &n in &pair.nodes {
            let pa = mesh.patches[pair.a].param_of(n).unwrap();
            let pb = mesh.patches[pair.b].param_of(n).unwrap();
            if (pa[ta] - pb[tb]).abs() > 1e-9 {
                return Err(CigaError::InvalidMesh(format!(
                    "G0 compatibility needs matching interface abscissae; node {n} has {} and {}",
                    pa[ta], pb[tb]
                )));
            }
        }
        let traces = [
            trace_fn(shared[pair.a].clone(), ta, ea.line_value()),
            trace_fn(shared[pair.b].clone(), tb, eb.line_value()),
        ];
        lines[pair.a].push(Line {
            axis: 1 - ta,
            value: ea.line_value(),
            traces: Some(traces.clone()),
        });
        lines[pair.b].push(Line {
            axis: 1 - tb,
            value: eb.line_value(),
            traces: Some(traces),
        });
    }
    Ok(lines)
}

/// Grid box (i0, i1, j0, j1) of a node set.
fn set_box(mesh: &MultiPatchMesh, index: &ConvPatchIndex, k: usize) -> Result<[usize; 4]> {
    let set = &index.sets[k];
    let pn = &mesh.patches[set.patch];
    let mut b = [usize::MAX, 0, usize::MAX, 0];
    for &m in &set.members {
        let (i, j) = pn.grid_index[pn.local(m).unwrap()];
        let (i, j) = (i as usize, j as usize);
        b = [b[0].min(i), b[1].max(i), b[2].min(j), b[3].max(j)];
    }
    if (b[1] - b[0] + 1) * (b[3] - b[2] + 1) != set.members.len() {
        return Err(CigaError::InvalidMesh(format!(
            "convolution patch of node {} is not a regular tensor box",
            set.node
        )));
    }
    Ok(b)
}

/// Lines whose coordinate is attained on the boundary of the set's box.
fn touches_line<'l>(mesh: &MultiPatchMesh, index: &ConvPatchIndex, k: usize, lines: &'l [Line]) -> Option<Vec<&'l Line>> {
    let pn = &mesh.patches[index.sets[k].patch];
    let grid = pn.grid.as_ref()?;
    let b = set_box(mesh, index, k).ok()?;
    let hits: Vec<&Line> = lines
        .iter()
        .filter(|l| {
            let (lo, hi) = if l.axis == 0 { (grid.u[b[0]], grid.u[b[1]]) } else { (grid.v[b[2]], grid.v[b[3]]) };
            (lo - l.value).abs() < 1e-12 || (hi - l.value).abs() < 1e-12
        })
        .collect();
    if hits.is_empty() {
        None
    } else {
        Some(hits)
    }
}

fn build_product(
    mesh: &MultiPatchMesh,
    patches: &[NurbsPatch],
    index: &ConvPatchIndex,
    k: usize,
    lines: &[Vec<Line>],
    spec: &ConvSpec,
) -> Result<ProductNode> {
    let set = &index.sets[k];
    let pn = &mesh.patches[set.patch];
    let grid = pn.grid.as_ref().unwrap();
    let b = set_box(mesh, index, k)?;
    let hits = touches_line(mesh, index, k, &lines[set.patch]).unwrap_or_default();
    let iface: Vec<&&Line> = hits.iter().filter(|l| l.traces.is_some()).collect();
    if iface.iter().any(|l| l.axis != iface[0].axis) {
        return Err(CigaError::Config(format!(
            "node {} touches two patch interfaces of different orientation",
            set.node
        )));
    }
    let (ic, jc) = pn.grid_index[pn.local(set.node).unwrap()];
    let centre_idx = [ic as usize, jc as usize];
    let absc = [&grid.u, &grid.v];
    let ranges = [(b[0], b[1]), (b[2], b[3])];
    let mut f = Vec::with_capacity(2);
    let mut h = [0.0; 2];
    for axis in 0..2 {
        let t = absc[axis];
        let c = centre_idx[axis];
        let (lo, hi) = ranges[axis];
        let mut gaps = Vec::new();
        if c > 0 {
            gaps.push(t[c] - t[c - 1]);
        }
        if c + 1 < t.len() {
            gaps.push(t[c + 1] - t[c]);
        }
        let ha = gaps.iter().sum::<f64>() / gaps.len() as f64;
        h[axis] = ha;
        let z: Vec<f64> = (lo..=hi).map(|i| (t[i] - t[c]) / ha).collect();
        let order = spec.p.min(z.len() - 1);
        // Interface tangent direction: shared functions on the stacked basis.
        let tangent_iface = iface.iter().find(|l| l.axis == 1 - axis);
        let conv = match tangent_iface {
            Some(l) => {
                let tr = l.traces.as_ref().unwrap();
                let tc = t[c];
                let wrap = |w: &WeightFn| -> WeightFn {
                    let w = w.clone();
                    Arc::new(move |p: Point| {
                        let (v, d) = w([tc + ha * p[0], 0.0]);
                        (v, [d[0] * ha, 0.0])
                    })
                };
                build_interface_conv_1d(set.node, &z, &z, [Some(wrap(&tr[0])), Some(wrap(&tr[1]))], spec, order)?
            }
            None => {
                let pts: Vec<Point> = z.iter().map(|&v| [v, 0.0]).collect();
                build_reduced(set.node, &pts, 1, spec)?
            }
        };
        f.push(conv);
    }
    let n0 = b[1] - b[0] + 1;
    let mut perm = vec![0; set.members.len()];
    for (pos, &m) in set.members.iter().enumerate() {
        let (i, j) = pn.grid_index[pn.local(m).unwrap()];
        perm[(i as usize - b[0]) + n0 * (j as usize - b[2])] = pos;
    }
    let trace = match iface.first() {
        Some(l) => {
            let axis = 1 - l.axis;
            let (lo, hi) = ranges[axis];
            let at_nodes = (lo..=hi)
                .map(|i| {
                    let mut xi = [0.0; 2];
                    xi[axis] = absc[axis][i];
                    xi[l.axis] = l.value;
                    patches[set.patch].weight_fn(xi).map(|w| w.0)
                })
                .collect::<Result<Vec<_>>>()?;
            Some(Trace {
                axis,
                line: l.value,
                at_nodes,
            })
        }
        None => None,
    };
    let f: [ConvFunctions; 2] = f.try_into().unwrap();
    Ok(ProductNode {
        f,
        center: [grid.u[centre_idx[0]], grid.v[centre_idx[1]]],
        h,
        n0,
        perm,
        trace,
    })
}

impl ProductNode {
    /// Reduced values and parametric gradients in member order.
    fn eval(&self, patch: &NurbsPatch, xi: Point, v: &mut [f64], g: &mut [[f64; 2]]) -> Result<()> {
        let (a, da) = self.f[0].eval([(xi[0] - self.center[0]) / self.h[0], 0.0]);
        let (b, db) = self.f[1].eval([(xi[1] - self.center[1]) / self.h[1], 0.0]);
        let tr = match &self.trace {
            Some(t) => {
                let mut p = [0.0; 2];
                p[t.axis] = xi[t.axis];
                p[1 - t.axis] = t.line;
                let (w, dw) = patch.weight_fn(p)?;
                Some((t, w, dw[t.axis]))
            }
            None => None,
        };
        for jb in 0..b.len() {
            for ia in 0..a.len() {
                let k = ia + self.n0 * jb;
                let val = a[ia] * b[jb];
                let mut grad = [da[ia][0] / self.h[0] * b[jb], a[ia] * db[jb][0] / self.h[1]];
                let (fac, dfac) = match tr {
                    Some((t, w, dw)) => {
                        let idx = if t.axis == 0 { ia } else { jb };
                        let wn = t.at_nodes[idx];
                        let mut d = [0.0; 2];
                        d[t.axis] = dw / wn;
                        (w / wn, d)
                    }
                    None => (1.0, [0.0; 2]),
                };
                grad = [fac * grad[0] + dfac[0] * val, fac * grad[1] + dfac[1] * val];
                let pos = self.perm[k];
                v[pos] = fac * val;
                g[pos] = grad;
            }
        }
        Ok(())
    }
}

impl<'m> ShapeTable<'m> {
    pub fn mesh(&self) -> &'m MultiPatchMesh {
        self.mesh
    }

    pub fn patches(&self) -> &'m [NurbsPatch] {
        self.patches
    }

    /// Number of distinct radial layouts (moment systems actually solved).
    pub fn pattern_count(&self) -> usize {
        self.patterns
    }

    pub fn node_kind(&self, set: usize) -> NodeKind {
        match self.fns[set] {
            NodeFn::Identity => NodeKind::Identity,
            NodeFn::Radial { .. } => NodeKind::Radial,
            NodeFn::Product(_) => NodeKind::Product,
        }
    }

    /// Weighting function at a patch node.
    pub fn node_weight(&self, patch: usize, node: usize) -> f64 {
        let pn = &self.mesh.patches[patch];
        self.node_weights[patch][pn.local(node).unwrap()]
    }

    /// Reduced convolution values of set `k` at the parametric points of a
    /// rule on the element with parametric corners `corners`; layout
    /// `[q][member][value, d/dxi0, d/dxi1]`.
    fn set_values(&self, k: usize, corners: &[Point; 4], xis: &[Point], rule: &PointRule) -> Result<Arc<Vec<f64>>> {
        let nm = self.index.sets[k].members.len();
        let patch = &self.patches[self.index.sets[k].patch];
        match &self.fns[k] {
            NodeFn::Radial {
                conv,
                pattern,
                center,
                h,
            } => {
                let key = rule.id.map(|id| {
                    let mut rel = [0i64; 8];
                    for c in 0..4 {
                        rel[2 * c] = quantize((corners[c][0] - center[0]) / h);
                        rel[2 * c + 1] = quantize((corners[c][1] - center[1]) / h);
                    }
                    CacheKey {
                        pattern: *pattern,
                        rel,
                        rule: id,
                    }
                });
                if let Some(key) = &key {
                    if let Some(v) = self.cache.read().unwrap().get(key) {
                        return Ok(v.clone());
                    }
                }
                let mut out = vec![0.0; xis.len() * nm * 3];
                let mut v = vec![0.0; nm];
                let mut g = vec![[0.0; 2]; nm];
                for (q, xi) in xis.iter().enumerate() {
                    conv.eval_into([(xi[0] - center[0]) / h, (xi[1] - center[1]) / h], &mut v, &mut g);
                    for j in 0..nm {
                        let o = (q * nm + j) * 3;
                        out[o] = v[j];
                        out[o + 1] = g[j][0] / h;
                        out[o + 2] = g[j][1] / h;
                    }
                }
                let out = Arc::new(out);
                if let Some(key) = key {
                    self.cache.write().unwrap().insert(key, out.clone());
                }
                Ok(out)
            }
            NodeFn::Product(pnode) => {
                let mut out = vec![0.0; xis.len() * nm * 3];
                let mut v = vec![0.0; nm];
                let mut g = vec![[0.0; 2]; nm];
                for (q, xi) in xis.iter().enumerate() {
                    pnode.eval(patch, *xi, &mut v, &mut g)?;
                    for j in 0..nm {
                        let o = (q * nm + j) * 3;
                        out[o] = v[j];
                        out[o + 1] = g[j][0];
                        out[o + 2] = g[j][1];
                    }
                }
                Ok(Arc::new(out))
            }
            NodeFn::Identity => {
                // V = w(xi) / w_I so that W = delta after weight scaling.
                let set = &self.index.sets[k];
                let wi = self.node_weight(set.patch, set.node);
                let mut out = vec![0.0; xis.len() * 3];
                for (q, xi) in xis.iter().enumerate() {
                    let (w, dw) = patch.weight_fn(*xi)?;
                    out[q * 3] = w / wi;
                    out[q * 3 + 1] = dw[0] / wi;
                    out[q * 3 + 2] = dw[1] / wi;
                }
                Ok(Arc::new(out))
            }
        }
    }

    /// Shape values and physical gradients of element `e` at the rule points.
    pub fn eval_element(&self, e: usize, rule: &PointRule) -> Result<ElementShapes> {
        self.eval_element_inner(e, rule).map_err(|err| err.at_element(e))
    }

    fn eval_element_inner(&self, e: usize, rule: &PointRule) -> Result<ElementShapes> {
        let mesh = self.mesh;
        let pa = mesh.element_patch[e];
        let patch = &self.patches[pa];
        let union = &self.index.element_union[e];
        let ne = union.len();
        let nq = rule.len();
        let corners = mesh.element_params(e);
        let mut xis = Vec::with_capacity(nq);
        let mut nvals = Vec::with_capacity(nq);
        let mut ngrads = Vec::with_capacity(nq);
        let mut pdet = Vec::with_capacity(nq);
        for &st in &rule.points {
            let (xi, n, g, det) = element_map(&corners, st)?;
            xis.push([xi[0].clamp(0.0, 1.0), xi[1].clamp(0.0, 1.0)]);
            nvals.push(n);
            ngrads.push(g);
            pdet.push(det);
        }
        let mut sv = vec![0.0; nq * ne];
        let mut sg = vec![[0.0; 2]; nq * ne];
        for c in 0..4 {
            let k = self.index.element_sets[e][c] as usize;
            let members = &self.index.sets[k].members;
            let nm = members.len();
            let pos: Vec<usize> = members.iter().map(|m| union.binary_search(m).unwrap()).collect();
            let vals = self.set_values(k, &corners, &xis, rule)?;
            for q in 0..nq {
                let nc = nvals[q][c];
                let gc = ngrads[q][c];
                let row = &vals[q * nm * 3..(q + 1) * nm * 3];
                let base = q * ne;
                for (j, &p) in pos.iter().enumerate() {
                    let (v, d0, d1) = (row[3 * j], row[3 * j + 1], row[3 * j + 2]);
                    sv[base + p] += nc * v;
                    let gg = &mut sg[base + p];
                    gg[0] += gc[0] * v + nc * d0;
                    gg[1] += gc[1] * v + nc * d1;
                }
            }
        }
        let wj: Vec<f64> = union.iter().map(|&n| self.node_weight(pa, n)).collect();
        let mut x = Vec::with_capacity(nq);
        let mut jxw = Vec::with_capacity(nq);
        for q in 0..nq {
            let ev = patch.eval(xis[q])?;
            let (w, dw) = (ev.weight, ev.weight_grad);
            let jac = ev.jac;
            let det = ev.det;
            if det.abs() < 1e-300 {
                return Err(CigaError::Bijectivity { det, xi: xis[q] });
            }
            let base = q * ne;
            for j in 0..ne {
                let s = sv[base + j];
                let ds = sg[base + j];
                let f = wj[j] / w;
                let gxi = [f * (ds[0] - s * dw[0] / w), f * (ds[1] - s * dw[1] / w)];
                sv[base + j] = f * s;
                // grad_x = J^{-T} grad_xi
                sg[base + j] = [
                    (jac[1][1] * gxi[0] - jac[1][0] * gxi[1]) / det,
                    (-jac[0][1] * gxi[0] + jac[0][0] * gxi[1]) / det,
                ];
            }
            x.push(ev.x);
            jxw.push(match rule.side {
                None => rule.weights[q] * det.abs() * pdet[q],
                Some(side) => {
                    let (a, b) = (corners[side], corners[(side + 1) % 4]);
                    let t = [b[0] - a[0], b[1] - a[1]];
                    let dx = [jac[0][0] * t[0] + jac[0][1] * t[1], jac[1][0] * t[0] + jac[1][1] * t[1]];
                    rule.weights[q] * (dx[0] * dx[0] + dx[1] * dx[1]).sqrt()
                }
            });
        }
        Ok(ElementShapes {
            nodes: union.clone(),
            nq,
            values: sv,
            grads: sg,
            x,
            xi: xis,
            jxw,
        })
    }

    /// Element of patch `patch` containing parametric point `xi` and the
    /// parent coordinates there (linear scan).
    pub fn locate(&self, patch: usize, xi: Point) -> Option<(usize, Point)> {
        let mesh = self.mesh;
        let mut best: Option<(usize, Point, f64)> = None;
        for e in 0..mesh.num_elements() {
            if mesh.element_patch[e] != patch {
                continue;
            }
            let c = mesh.element_params(e);
            let (lo0, hi0) = c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p[0]), a.1.max(p[0])));
            let (lo1, hi1) = c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p[1]), a.1.max(p[1])));
            let tol = 1e-12;
            if xi[0] < lo0 - tol || xi[0] > hi0 + tol || xi[1] < lo1 - tol || xi[1] > hi1 + tol {
                continue;
            }
            let (st, _) = crate::inverse::invert_bilinear(&c, xi);
            let out = (st[0].clamp(0.0, 1.0) - st[0]).abs() + (st[1].clamp(0.0, 1.0) - st[1]).abs();
            if best.as_ref().map_or(true, |b| out < b.2) {
                best = Some((e, [st[0].clamp(0.0, 1.0), st[1].clamp(0.0, 1.0)], out));
            }
        }
        best.map(|b| (b.0, b.1))
    }

    /// Max over `samples` random parametric points per patch of
    /// |sum_J N~_J(xi) x_J - F(xi)|.
    pub fn geometric_consistency_check(&self, patch: usize, samples: usize, seed: u64) -> Result<f64> {
        let pts = crate::inverse::random_params(2, samples, seed);
        let mut worst: f64 = 0.0;
        for xi in pts {
            let (e, st) = self
                .locate(patch, xi)
                .ok_or_else(|| CigaError::InvalidMesh(format!("no element of patch {patch} contains {xi:?}")))?;
            let sh = self.eval_element(e, &PointRule::points(vec![st]))?;
            let mut x = [0.0; 2];
            for (&n, &v) in sh.nodes.iter().zip(sh.row(0)) {
                x[0] += v * self.mesh.nodes[n][0];
                x[1] += v * self.mesh.nodes[n][1];
            }
            let d = ((x[0] - sh.x[0][0]).powi(2) + (x[1] - sh.x[0][1]).powi(2)).sqrt();
            worst = worst.max(d);
        }
        Ok(worst)
    }
}
