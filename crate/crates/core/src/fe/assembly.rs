//! Degree-of-freedom numbering, sparse assembly and Dirichlet constraints.

use super::exact::plane_stress;
use super::interface::{interface_edge_pairs, EdgePair};
use super::quadrature::PointRule;
use super::shape::{CompatMode, ElementShapes, ShapeTable};
use crate::error::{CigaError, Result};
use crate::mesh::{BoundaryTag, MultiPatchMesh};
use crate::par::{try_map_range, Execution};
use crate::spline::Point;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;

/// Node-to-unknown numbering. Interface nodes share one slot unless the
/// coupling is by penalty, in which case every patch gets its own copy.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub ncomp: usize,
    node_slot: Vec<usize>,
    copies: HashMap<(usize, usize), usize>,
    slots: usize,
}

impl DofMap {
    pub fn new(mesh: &MultiPatchMesh, ncomp: usize, split_interfaces: bool) -> Self {
        let nn = mesh.num_nodes();
        let mut copies = HashMap::new();
        let mut slots = nn;
        if split_interfaces {
            for node in 0..nn {
                for &pa in mesh.patches_of(node).iter().skip(1) {
                    copies.insert((pa, node), slots);
                    slots += 1;
                }
            }
        }
        DofMap {
            ncomp,
            node_slot: (0..nn).collect(),
            copies,
            slots,
        }
    }

    /// Unknown block of `node` as seen from `patch`.
    pub fn slot(&self, patch: usize, node: usize) -> usize {
        self.copies.get(&(patch, node)).copied().unwrap_or(self.node_slot[node])
    }

    /// All slots carrying values of `node`.
    pub fn slots_of(&self, mesh: &MultiPatchMesh, node: usize) -> Vec<usize> {
        let mut v: Vec<usize> = mesh.patches_of(node).iter().map(|&p| self.slot(p, node)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn num_slots(&self) -> usize {
        self.slots
    }

    pub fn num_dofs(&self) -> usize {
        self.slots * self.ncomp
    }
}

/// Compressed sparse rows with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        r.binary_search(&j).map_or(0.0, |k| self.vals[self.row_ptr[i] + k])
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    /// max |K_ij - K_ji|.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                worst = worst.max((self.vals[k] - self.get(self.cols[k], i)).abs());
            }
        }
        worst
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Matrix Market coordinate format.
    pub fn write_matrix_market(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                writeln!(out, "{} {} {:.17e}", i + 1, self.cols[k] + 1, self.vals[k])?;
            }
        }
        Ok(())
    }
}

/// Sparsity of the union of dense blocks over slot lists, expanded to
/// `ncomp` unknowns per slot.
struct Pattern {
    ncomp: usize,
    slot_ptr: Vec<usize>,
    slot_cols: Vec<usize>,
}

impl Pattern {
    fn new(nslots: usize, ncomp: usize, blocks: &[&[usize]]) -> Self {
        let mut member_of: Vec<Vec<u32>> = vec![Vec::new(); nslots];
        for (b, slots) in blocks.iter().enumerate() {
            for &s in slots.iter() {
                member_of[s].push(b as u32);
            }
        }
        let mut slot_ptr = Vec::with_capacity(nslots + 1);
        let mut slot_cols = Vec::new();
        slot_ptr.push(0);
        let mut stamp = vec![usize::MAX; nslots];
        let mut row = Vec::new();
        for s in 0..nslots {
            row.clear();
            for &b in &member_of[s] {
                for &c in blocks[b as usize] {
                    if stamp[c] != s {
                        stamp[c] = s;
                        row.push(c);
                    }
                }
            }
            if row.is_empty() {
                // keep the diagonal so that unused unknowns stay addressable
                row.push(s);
            }
            row.sort_unstable();
            slot_cols.extend_from_slice(&row);
            slot_ptr.push(slot_cols.len());
        }
        Pattern {
            ncomp,
            slot_ptr,
            slot_cols,
        }
    }

    fn matrix(&self) -> Csr {
        let nc = self.ncomp;
        let nslots = self.slot_ptr.len() - 1;
        let mut row_ptr = Vec::with_capacity(nslots * nc + 1);
        let mut cols = Vec::with_capacity(self.slot_cols.len() * nc * nc);
        row_ptr.push(0);
        for s in 0..nslots {
            let sc = &self.slot_cols[self.slot_ptr[s]..self.slot_ptr[s + 1]];
            for _ in 0..nc {
                for &c in sc {
                    for d in 0..nc {
                        cols.push(c * nc + d);
                    }
                }
                row_ptr.push(cols.len());
            }
        }
        let nnz = cols.len();
        Csr {
            n: nslots * nc,
            row_ptr,
            cols,
            vals: vec![0.0; nnz],
        }
    }

    /// Adds a dense block with local ordering (slot index, component).
    fn scatter(&self, k: &mut Csr, slots: &[usize], block: &[f64]) {
        let nc = self.ncomp;
        let nl = slots.len() * nc;
        let mut pos = vec![0usize; slots.len()];
        for (a, &sa) in slots.iter().enumerate() {
            let sc = &self.slot_cols[self.slot_ptr[sa]..self.slot_ptr[sa + 1]];
            for (b, &sb) in slots.iter().enumerate() {
                pos[b] = sc.binary_search(&sb).expect("block outside the sparsity pattern");
            }
            for ca in 0..nc {
                let row = sa * nc + ca;
                let base = k.row_ptr[row];
                let brow = &block[(a * nc + ca) * nl..(a * nc + ca + 1) * nl];
                for (b, &p) in pos.iter().enumerate() {
                    for cb in 0..nc {
                        k.vals[base + p * nc + cb] += brow[b * nc + cb];
                    }
                }
            }
        }
    }
}

/// Assembly options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub compat_mode: CompatMode,
    /// Penalty factor c with rho = c / h_edge (penalty mode only).
    pub penalty_rho: f64,
    /// Gauss points per direction; `None` means p + 2.
    pub quadrature_order: Option<usize>,
    pub solver: SolverKind,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            compat_mode: CompatMode::Nodal,
            penalty_rho: 1e4,
            quadrature_order: None,
            solver: SolverKind::Direct,
            exec: Execution::default(),
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.compat_mode == CompatMode::Penalty && !(self.penalty_rho > 0.0) {
            return Err(CigaError::Config(format!("penalty_rho must be positive, got {}", self.penalty_rho)));
        }
        if self.quadrature_order == Some(0) {
            return Err(CigaError::Config("quadrature order must be at least 1".into()));
        }
        Ok(())
    }

    pub fn quadrature(&self, p: usize) -> usize {
        self.quadrature_order.unwrap_or(p + 2)
    }
}

/// Linear solver choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Sparse Cholesky.
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    ConjugateGradient { tolerance: f64, max_iterations: usize },
}

/// Assembled system before constraints.
#[derive(Debug, Clone)]
pub struct DofSystem {
    pub dofs: DofMap,
    pub k: Csr,
    pub f: Vec<f64>,
    /// (dof, prescribed value), sorted and unique.
    pub fixed: Vec<(usize, f64)>,
}

/// Volume and boundary integrands of a linear problem.
trait Physics: Sync {
    fn ncomp(&self) -> usize;
    /// Adds element stiffness (local layout (node, comp) x (node, comp)) and load.
    fn volume(&self, sh: &ElementShapes, ke: &mut [f64], fe: &mut [f64]);
    /// Traction/flux on a Neumann edge of group `group`.
    fn neumann(&self, group: &str, x: Point) -> Option<[f64; 2]>;
}

struct Poisson<'a> {
    source: &'a (dyn Fn(Point) -> f64 + Sync),
}

impl Physics for Poisson<'_> {
    fn ncomp(&self) -> usize {
        1
    }

    fn volume(&self, sh: &ElementShapes, ke: &mut [f64], fe: &mut [f64]) {
        let n = sh.nodes.len();
        for q in 0..sh.nq {
            let w = sh.jxw[q];
            let g = sh.grad_row(q);
            let v = sh.row(q);
            let b = (self.source)(sh.x[q]) * w;
            for a in 0..n {
                fe[a] += v[a] * b;
                let ga = [g[a][0] * w, g[a][1] * w];
                let row = &mut ke[a * n..(a + 1) * n];
                for (kb, gb) in row.iter_mut().zip(g) {
                    *kb += ga[0] * gb[0] + ga[1] * gb[1];
                }
            }
        }
    }

    fn neumann(&self, _group: &str, _x: Point) -> Option<[f64; 2]> {
        None
    }
}

struct Elasticity<'a> {
    d: [[f64; 3]; 3],
    traction: &'a (dyn Fn(&str, Point) -> Option<[f64; 2]> + Sync),
}

impl Physics for Elasticity<'_> {
    fn ncomp(&self) -> usize {
        2
    }

    fn volume(&self, sh: &ElementShapes, ke: &mut [f64], _fe: &mut [f64]) {
        let n = sh.nodes.len();
        let nl = 2 * n;
        let d = &self.d;
        for q in 0..sh.nq {
            let w = sh.jxw[q];
            let g = sh.grad_row(q);
            for a in 0..n {
                let (xa, ya) = (g[a][0] * w, g[a][1] * w);
                for b in 0..n {
                    let (xb, yb) = (g[b][0], g[b][1]);
                    let r0 = (2 * a) * nl + 2 * b;
                    let r1 = (2 * a + 1) * nl + 2 * b;
                    ke[r0] += xa * d[0][0] * xb + ya * d[2][2] * yb;
                    ke[r0 + 1] += xa * d[0][1] * yb + ya * d[2][2] * xb;
                    ke[r1] += ya * d[1][0] * xb + xa * d[2][2] * yb;
                    ke[r1 + 1] += ya * d[1][1] * yb + xa * d[2][2] * xb;
                }
            }
        }
    }

    fn neumann(&self, group: &str, x: Point) -> Option<[f64; 2]> {
        (self.traction)(group, x)
    }
}

/// Element owning each boundary edge and its side.
fn boundary_sides(mesh: &MultiPatchMesh) -> Result<Vec<(usize, usize)>> {
    let map = mesh.edge_map();
    mesh.boundary
        .iter()
        .map(|b| {
            let key = (b.nodes[0].min(b.nodes[1]), b.nodes[0].max(b.nodes[1]));
            map.get(&key)
                .and_then(|v| v.first().copied())
                .ok_or_else(|| CigaError::InvalidMesh(format!("boundary edge {:?} is not an element edge", b.nodes)))
        })
        .collect()
}

const CHUNK: usize = 1024;

fn assemble<P: Physics>(table: &ShapeTable<'_>, physics: &P, cfg: &SolveConfig, fixed: Vec<(usize, usize, f64)>) -> Result<DofSystem> {
    cfg.validate()?;
    let mesh = table.mesh();
    let nc = physics.ncomp();
    let penalty = cfg.compat_mode == CompatMode::Penalty;
    if penalty != (table.mode == CompatMode::Penalty) {
        return Err(CigaError::Config("shape table and solve config disagree on penalty coupling".into()));
    }
    let dofs = DofMap::new(mesh, nc, penalty);
    let ne = mesh.num_elements();
    let elem_slots: Vec<Vec<usize>> = (0..ne)
        .map(|e| {
            let pa = mesh.element_patch[e];
            table.index.element_union[e].iter().map(|&n| dofs.slot(pa, n)).collect()
        })
        .collect();
    let nq = cfg.quadrature(table.spec.p);
    let pairs: Vec<EdgePair> = if penalty && !table.interfaces.pairs.is_empty() {
        interface_edge_pairs(mesh, table.patches(), &table.interfaces, nq)?
    } else {
        Vec::new()
    };
    let pair_slots: Vec<Vec<usize>> = pairs
        .iter()
        .map(|p| {
            let mut v = elem_slots[p.elements[0]].clone();
            v.extend_from_slice(&elem_slots[p.elements[1]]);
            v
        })
        .collect();
    let blocks: Vec<&[usize]> = elem_slots.iter().chain(&pair_slots).map(|v| v.as_slice()).collect();
    let pattern = Pattern::new(dofs.num_slots(), nc, &blocks);
    let mut k = pattern.matrix();
    let mut f = vec![0.0; dofs.num_dofs()];
    let rule = PointRule::volume(nq);
    let exec = cfg.exec;

    let add_load = |f: &mut Vec<f64>, slots: &[usize], fe: &[f64]| {
        for (a, &s) in slots.iter().enumerate() {
            for c in 0..nc {
                f[s * nc + c] += fe[a * nc + c];
            }
        }
    };
    for start in (0..ne).step_by(CHUNK) {
        let end = (start + CHUNK).min(ne);
        let blocks = try_map_range(exec, end - start, |i| {
            let e = start + i;
            let sh = table.eval_element(e, &rule)?;
            let nl = sh.nodes.len() * nc;
            let mut ke = vec![0.0; nl * nl];
            let mut fe = vec![0.0; nl];
            physics.volume(&sh, &mut ke, &mut fe);
            Ok::<_, CigaError>((ke, fe))
        })?;
        for (i, (ke, fe)) in blocks.into_iter().enumerate() {
            let e = start + i;
            pattern.scatter(&mut k, &elem_slots[e], &ke);
            add_load(&mut f, &elem_slots[e], &fe);
        }
    }

    // Neumann data
    let sides = boundary_sides(mesh)?;
    for (b, &(e, side)) in mesh.boundary.iter().zip(&sides) {
        if b.tag != BoundaryTag::Neumann {
            continue;
        }
        let sh = table.eval_element(e, &PointRule::edge(nq, side))?;
        let n = sh.nodes.len();
        let mut fe = vec![0.0; n * nc];
        let mut any = false;
        for q in 0..sh.nq {
            let Some(t) = physics.neumann(&b.group, sh.x[q]) else {
                continue;
            };
            any = true;
            for (a, v) in sh.row(q).iter().enumerate() {
                for c in 0..nc {
                    fe[a * nc + c] += v * t[c] * sh.jxw[q];
                }
            }
        }
        if any {
            add_load(&mut f, &elem_slots[e], &fe);
        }
    }

    // Interface penalty rho ([w], [u])
    for (p, slots) in pairs.iter().zip(&pair_slots) {
        let sa = table.eval_element(p.elements[0], &p.rule_a)?;
        let sb = table.eval_element(p.elements[1], &p.rule_b)?;
        let len: f64 = sa.jxw.iter().sum();
        let rho = cfg.penalty_rho / len;
        let (na, nb) = (sa.nodes.len(), sb.nodes.len());
        let nloc = (na + nb) * nc;
        let mut ke = vec![0.0; nloc * nloc];
        let mut phi = vec![0.0; na + nb];
        for q in 0..sa.nq {
            phi[..na].copy_from_slice(sa.row(q));
            for (d, v) in phi[na..].iter_mut().zip(sb.row(q)) {
                *d = -v;
            }
            let w = rho * sa.jxw[q];
            for i in 0..na + nb {
                for j in 0..na + nb {
                    let v = w * (phi[i] * phi[j]);
                    for c in 0..nc {
                        ke[(i * nc + c) * nloc + j * nc + c] += v;
                    }
                }
            }
        }
        pattern.scatter(&mut k, slots, &ke);
    }

    let mut fx: Vec<(usize, f64)> = Vec::new();
    for (node, comp, v) in fixed {
        for s in dofs.slots_of(mesh, node) {
            fx.push((s * nc + comp, v));
        }
    }
    fx.sort_by(|a, b| a.0.cmp(&b.0));
    fx.dedup_by(|a, b| a.0 == b.0);
    if fx.is_empty() {
        return Err(CigaError::Unconstrained);
    }
    Ok(DofSystem { dofs, k, f, fixed: fx })
}

/// -Laplace(u) = b with u = g on every boundary edge.
pub fn assemble_poisson(
    table: &ShapeTable<'_>,
    source: &(dyn Fn(Point) -> f64 + Sync),
    dirichlet: &dyn Fn(Point) -> f64,
    cfg: &SolveConfig,
) -> Result<DofSystem> {
    let mesh = table.mesh();
    let fixed = mesh
        .boundary_nodes(None)
        .into_iter()
        .map(|n| (n, 0, dirichlet(mesh.nodes[n])))
        .collect();
    assemble(table, &Poisson { source }, cfg, fixed)
}

/// Plane-stress elasticity. `fixed` lists (node, component, value);
/// `traction` gives the applied traction on Neumann edges by group.
pub fn assemble_elasticity(
    table: &ShapeTable<'_>,
    young: f64,
    poisson: f64,
    fixed: Vec<(usize, usize, f64)>,
    traction: &(dyn Fn(&str, Point) -> Option<[f64; 2]> + Sync),
    cfg: &SolveConfig,
) -> Result<DofSystem> {
    if !(young > 0.0) || !(poisson > -1.0 && poisson < 0.5) {
        return Err(CigaError::Config(format!("invalid material E = {young}, nu = {poisson}")));
    }
    let physics = Elasticity {
        d: plane_stress(young, poisson),
        traction,
    };
    assemble(table, &physics, cfg, fixed)
}

/// Nodes of the boundary edges in `group`.
pub fn group_nodes(mesh: &MultiPatchMesh, group: &str) -> Vec<usize> {
    let mut v: Vec<usize> = mesh.boundary.iter().filter(|b| b.group == group).flat_map(|b| b.nodes).collect();
    v.sort_unstable();
    v.dedup();
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_scatter_accumulates_dense_blocks() {
        let blocks: Vec<&[usize]> = vec![&[0, 1], &[1, 2]];
        let p = Pattern::new(3, 2, &blocks);
        let mut k = p.matrix();
        assert_eq!(k.n, 6);
        let ones = vec![1.0; 16];
        p.scatter(&mut k, &[0, 1], &ones);
        p.scatter(&mut k, &[1, 2], &ones);
        assert_eq!(k.get(2, 3), 2.0);
        assert_eq!(k.get(0, 5), 0.0);
        assert_eq!(k.get(5, 2), 1.0);
        assert_eq!(k.max_asymmetry(), 0.0);
    }

    #[test]
    fn matrix_market_lists_every_entry() {
        let blocks: Vec<&[usize]> = vec![&[0, 1]];
        let p = Pattern::new(2, 1, &blocks);
        let mut k = p.matrix();
        p.scatter(&mut k, &[0, 1], &[2.0, -1.0, -1.0, 2.0]);
        let mut out = Vec::new();
        k.write_matrix_market(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.contains("2 2 4"));
    }
}
