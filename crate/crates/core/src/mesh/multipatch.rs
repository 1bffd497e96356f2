use crate::error::{CigaError, Result};
use crate::spline::{NurbsPatch, Point};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

/// A boundary edge of the physical domain. `group` names the curve it lies
/// on (e.g. "hole", "left") so problems can choose their own conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
    #[serde(default)]
    pub group: String,
}

/// Regular parametric grid of a generated patch: node (i, j) has parameters
/// (u[i], v[j]) and global id `ids[i + (u.len()) * j]`.
#[derive(Debug, Clone)]
pub struct Grid {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub ids: Vec<usize>,
}

impl Grid {
    pub fn id(&self, i: usize, j: usize) -> usize {
        self.ids[i + self.u.len() * j]
    }
}

/// Nodes of one CAD patch with their parametric coordinates.
#[derive(Debug, Clone)]
pub struct PatchNodes {
    /// Global ids of the patch's nodes.
    pub nodes: Vec<usize>,
    /// Parametric coordinates aligned with `nodes`.
    pub params: Vec<Point>,
    /// Global id -> local index (u32::MAX when absent).
    local: Vec<u32>,
    /// Interior span boundaries per parametric direction that convolution
    /// patches may not cross.
    pub span_breaks: [Vec<f64>; 2],
    pub grid: Option<Grid>,
    /// (i, j) grid index of each local node when `grid` is present.
    pub grid_index: Vec<(u32, u32)>,
}

impl PatchNodes {
    pub fn local(&self, global: usize) -> Option<usize> {
        match self.local.get(global) {
            Some(&l) if l != u32::MAX => Some(l as usize),
            _ => None,
        }
    }

    pub fn param_of(&self, global: usize) -> Option<Point> {
        self.local(global).map(|l| self.params[l])
    }

    /// Span cell (per-direction span index) containing a parametric point,
    /// using the half-open convention.
    pub fn cell_of(&self, xi: Point) -> (u32, u32) {
        let f = |b: &Vec<f64>, t: f64| b.iter().filter(|&&k| t >= k).count() as u32;
        (f(&self.span_breaks[0], xi[0]), f(&self.span_breaks[1], xi[1]))
    }
}

/// Conforming quadrilateral mesh over several CAD patches.
#[derive(Debug, Clone)]
pub struct MultiPatchMesh {
    pub nodes: Vec<Point>,
    /// Corner node ids, counter-clockwise in the parametric domain.
    pub elements: Vec<[usize; 4]>,
    pub element_patch: Vec<usize>,
    pub patches: Vec<PatchNodes>,
    pub boundary: Vec<BoundaryEdge>,
    /// Local (patch) indices of each element's corners.
    pub element_local: Vec<[u32; 4]>,
}

impl MultiPatchMesh {
    /// Assembles a mesh from per-patch node parameter lists.
    ///
    /// `patch_params[a]` lists (global id, parametric point) for every node of
    /// patch `a`; `span_breaks[a]` are the knot lines convolution patches may
    /// not cross.
    pub fn new(
        nodes: Vec<Point>,
        elements: Vec<[usize; 4]>,
        element_patch: Vec<usize>,
        boundary: Vec<BoundaryEdge>,
        patch_params: Vec<Vec<(usize, Point)>>,
        span_breaks: Vec<[Vec<f64>; 2]>,
    ) -> Result<Self> {
        if elements.len() != element_patch.len() {
            return Err(CigaError::InvalidMesh("patch_of_element length differs from elements".into()));
        }
        if span_breaks.len() != patch_params.len() {
            return Err(CigaError::InvalidMesh("span breaks per patch missing".into()));
        }
        let nn = nodes.len();
        let mut patches = Vec::with_capacity(patch_params.len());
        for (pp, breaks) in patch_params.into_iter().zip(span_breaks) {
            let mut local = vec![u32::MAX; nn];
            let mut ids = Vec::with_capacity(pp.len());
            let mut params = Vec::with_capacity(pp.len());
            for (k, (g, xi)) in pp.into_iter().enumerate() {
                if g >= nn {
                    return Err(CigaError::InvalidMesh(format!("node id {g} out of range")));
                }
                if local[g] != u32::MAX {
                    return Err(CigaError::InvalidMesh(format!("node {g} listed twice in a patch")));
                }
                local[g] = k as u32;
                ids.push(g);
                params.push(xi);
            }
            patches.push(PatchNodes {
                nodes: ids,
                params,
                local,
                span_breaks: breaks,
                grid: None,
                grid_index: Vec::new(),
            });
        }
        let mut element_local = Vec::with_capacity(elements.len());
        for (e, (el, &pa)) in elements.iter().zip(&element_patch).enumerate() {
            let patch = patches
                .get(pa)
                .ok_or_else(|| CigaError::InvalidMesh(format!("element {e} refers to patch {pa}")))?;
            let mut loc = [0u32; 4];
            for (k, &g) in el.iter().enumerate() {
                if g >= nn {
                    return Err(CigaError::InvalidMesh(format!("element {e} refers to node {g}")));
                }
                loc[k] = patch.local(g).ok_or_else(|| {
                    CigaError::InvalidMesh(format!("node {g} of element {e} has no parameters in patch {pa}"))
                })? as u32;
            }
            element_local.push(loc);
        }
        Ok(Self {
            nodes,
            elements,
            element_patch,
            patches,
            boundary,
            element_local,
        })
    }

    /// Attaches regular-grid structure to a patch (generators only).
    pub fn set_grid(&mut self, patch: usize, grid: Grid) -> Result<()> {
        let pn = &mut self.patches[patch];
        let mut gi = vec![(u32::MAX, u32::MAX); pn.nodes.len()];
        let nu = grid.u.len();
        for (k, &g) in grid.ids.iter().enumerate() {
            let l = pn
                .local(g)
                .ok_or_else(|| CigaError::InvalidMesh(format!("grid node {g} not in patch {patch}")))?;
            gi[l] = ((k % nu) as u32, (k / nu) as u32);
            let xi = pn.params[l];
            let (u, v) = (grid.u[k % nu], grid.v[k / nu]);
            if (xi[0] - u).abs() > 1e-9 || (xi[1] - v).abs() > 1e-9 {
                return Err(CigaError::InvalidMesh(format!(
                    "node {g} parameters {xi:?} off the regular grid ({u}, {v})"
                )));
            }
        }
        if gi.iter().any(|&(i, _)| i == u32::MAX) {
            return Err(CigaError::InvalidMesh(format!("grid does not cover patch {patch}")));
        }
        pn.grid_index = gi;
        pn.grid = Some(grid);
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Parametric corner coordinates of an element.
    pub fn element_params(&self, e: usize) -> [Point; 4] {
        let p = &self.patches[self.element_patch[e]];
        let l = self.element_local[e];
        [0, 1, 2, 3].map(|k| p.params[l[k] as usize])
    }

    /// Span cell of an element, from its parametric centroid.
    pub fn element_cell(&self, e: usize) -> (u32, u32) {
        let c = self.element_params(e);
        let m = [
            0.25 * (c[0][0] + c[1][0] + c[2][0] + c[3][0]),
            0.25 * (c[0][1] + c[1][1] + c[2][1] + c[3][1]),
        ];
        self.patches[self.element_patch[e]].cell_of(m)
    }

    /// Patches that list a node.
    pub fn patches_of(&self, node: usize) -> Vec<usize> {
        (0..self.patches.len()).filter(|&a| self.patches[a].local(node).is_some()).collect()
    }

    /// Max round-trip error ||F(xi_I) - x_I|| over all patch nodes.
    pub fn round_trip_error(&self, patches: &[NurbsPatch]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (pn, patch) in self.patches.iter().zip(patches) {
            for (&g, &xi) in pn.nodes.iter().zip(&pn.params) {
                let x = patch.map_forward(xi)?;
                let d = ((x[0] - self.nodes[g][0]).powi(2) + (x[1] - self.nodes[g][1]).powi(2)).sqrt();
                worst = worst.max(d);
            }
        }
        Ok(worst)
    }

    /// Nodes lying on boundary edges with the given tag.
    pub fn boundary_nodes(&self, tag: Option<BoundaryTag>) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .boundary
            .iter()
            .filter(|b| tag.is_none_or(|t| t == b.tag))
            .flat_map(|b| b.nodes)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Map from undirected edge to (element, side); side k joins corners k
    /// and k+1.
    pub fn edge_map(&self) -> std::collections::HashMap<(usize, usize), Vec<(usize, usize)>> {
        let mut m: std::collections::HashMap<(usize, usize), Vec<(usize, usize)>> = Default::default();
        for (e, el) in self.elements.iter().enumerate() {
            for k in 0..4 {
                let (a, b) = (el[k], el[(k + 1) % 4]);
                m.entry((a.min(b), a.max(b))).or_default().push((e, k));
            }
        }
        m
    }
}
