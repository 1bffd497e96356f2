use super::multipatch::MultiPatchMesh;
use crate::error::{CigaError, Result};
use std::collections::HashMap;

/// Side of the unit parametric square an interface occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamEdge {
    U0,
    U1,
    V0,
    V1,
}

impl ParamEdge {
    /// Parametric direction along the edge (0 = u, 1 = v).
    pub fn tangent_axis(self) -> usize {
        match self {
            ParamEdge::U0 | ParamEdge::U1 => 1,
            ParamEdge::V0 | ParamEdge::V1 => 0,
        }
    }

    /// Value of the fixed coordinate.
    pub fn line_value(self) -> f64 {
        match self {
            ParamEdge::U0 | ParamEdge::V0 => 0.0,
            ParamEdge::U1 | ParamEdge::V1 => 1.0,
        }
    }
}

/// The interface between patches `a < b`.
#[derive(Debug, Clone)]
pub struct InterfacePair {
    pub a: usize,
    pub b: usize,
    /// Shared node ids in order along the interface.
    pub nodes: Vec<usize>,
    /// Shared element edges: (element of a, side, element of b, side).
    pub edges: Vec<(usize, usize, usize, usize)>,
    /// Parametric edge per side, when the interface is a full edge.
    pub param_edge: [Option<ParamEdge>; 2],
}

#[derive(Debug, Clone, Default)]
pub struct InterfaceSet {
    pub pairs: Vec<InterfacePair>,
}

impl InterfaceSet {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Flags for every mesh node lying on some interface.
    pub fn node_flags(&self, num_nodes: usize) -> Vec<bool> {
        let mut f = vec![false; num_nodes];
        for p in &self.pairs {
            for &n in &p.nodes {
                f[n] = true;
            }
        }
        f
    }
}

fn param_edge(mesh: &MultiPatchMesh, patch: usize, nodes: &[usize]) -> Option<ParamEdge> {
    let pn = &mesh.patches[patch];
    let params: Vec<_> = nodes.iter().filter_map(|&n| pn.param_of(n)).collect();
    let all = |c: usize, v: f64| params.iter().all(|p| (p[c] - v).abs() < 1e-9);
    if all(0, 0.0) {
        Some(ParamEdge::U0)
    } else if all(0, 1.0) {
        Some(ParamEdge::U1)
    } else if all(1, 0.0) {
        Some(ParamEdge::V0)
    } else if all(1, 1.0) {
        Some(ParamEdge::V1)
    } else {
        None
    }
}

/// Finds element edges shared by two patches and orders them into
/// interfaces. Distinct boundary nodes of different patches that coincide
/// geometrically are reported as a nodal-compatibility violation.
pub fn detect_interfaces(mesh: &MultiPatchMesh) -> Result<InterfaceSet> {
    let edges = mesh.edge_map();
    let mut by_pair: HashMap<(usize, usize), Vec<(usize, usize, usize, usize, [usize; 2])>> =
        HashMap::new();
    let mut boundary_nodes: Vec<(usize, usize)> = Vec::new(); // (node, patch)
    for (&(n0, n1), owners) in &edges {
        match owners.as_slice() {
            [(e, s)] => {
                let pa = mesh.element_patch[*e];
                boundary_nodes.push((n0, pa));
                boundary_nodes.push((n1, pa));
                let _ = s;
            }
            [(e1, s1), (e2, s2)] => {
                let (p1, p2) = (mesh.element_patch[*e1], mesh.element_patch[*e2]);
                if p1 != p2 {
                    let (a, ea, sa, b, eb, sb) = if p1 < p2 {
                        (p1, *e1, *s1, p2, *e2, *s2)
                    } else {
                        (p2, *e2, *s2, p1, *e1, *s1)
                    };
                    by_pair.entry((a, b)).or_default().push((ea, sa, eb, sb, [n0, n1]));
                }
            }
            _ => {
                return Err(CigaError::InvalidMesh(format!(
                    "edge ({n0}, {n1}) shared by {} elements",
                    owners.len()
                )))
            }
        }
    }

    // Geometric matching of open boundary nodes across patches.
    boundary_nodes.sort_unstable();
    boundary_nodes.dedup();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for x in &mesh.nodes {
        for c in 0..2 {
            lo[c] = lo[c].min(x[c]);
            hi[c] = hi[c].max(x[c]);
        }
    }
    let diam = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt().max(1e-300);
    let tol = 1e-8 * diam;
    let mut sorted = boundary_nodes.clone();
    sorted.sort_by(|a, b| mesh.nodes[a.0][0].total_cmp(&mesh.nodes[b.0][0]));
    for i in 0..sorted.len() {
        let (ni, pi) = sorted[i];
        let xi = mesh.nodes[ni];
        for &(nj, pj) in &sorted[i + 1..] {
            let xj = mesh.nodes[nj];
            if xj[0] - xi[0] > tol {
                break;
            }
            if ni != nj && pi != pj && (xj[1] - xi[1]).abs() <= tol {
                return Err(CigaError::NodalCompatibility(format!(
                    "nodes {ni} (patch {pi}) and {nj} (patch {pj}) coincide but are distinct"
                )));
            }
        }
    }

    let mut pairs = Vec::new();
    let mut keys: Vec<_> = by_pair.keys().cloned().collect();
    keys.sort_unstable();
    for (a, b) in keys {
        let list = &by_pair[&(a, b)];
        // Chain the edges into an ordered node list.
        let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
        for (_, _, _, _, [n0, n1]) in list {
            adj.entry(*n0).or_default().push(*n1);
            adj.entry(*n1).or_default().push(*n0);
        }
        let mut start = *adj.keys().min().unwrap();
        if let Some((&s, _)) = adj.iter().filter(|(_, v)| v.len() == 1).min_by_key(|(k, _)| **k) {
            start = s;
        }
        let mut order = vec![start];
        let mut prev = usize::MAX;
        let mut cur = start;
        loop {
            let next = adj[&cur].iter().find(|&&n| n != prev && !(order.len() > 1 && n == order[0]));
            match next {
                Some(&n) if !order.contains(&n) => {
                    order.push(n);
                    prev = cur;
                    cur = n;
                }
                _ => break,
            }
        }
        if order.len() != adj.len() {
            return Err(CigaError::InvalidMesh(format!(
                "interface between patches {a} and {b} is not a single curve"
            )));
        }
        let pe = [param_edge(mesh, a, &order), param_edge(mesh, b, &order)];
        pairs.push(InterfacePair {
            a,
            b,
            nodes: order,
            edges: list.iter().map(|&(ea, sa, eb, sb, _)| (ea, sa, eb, sb)).collect(),
            param_edge: pe,
        });
    }
    Ok(InterfaceSet { pairs })
}
