use super::multipatch::MultiPatchMesh;
use crate::par::{map_range, Execution};
use std::collections::HashMap;

/// Convolution patch A_s of one node, restricted to one patch and one
/// coarse knot-span cell.
#[derive(Debug, Clone)]
pub struct NodeSet {
    pub node: usize,
    pub patch: usize,
    pub cell: (u32, u32),
    /// Member node ids, sorted ascending; always contains `node`.
    pub members: Vec<usize>,
}

/// Node and element convolution patches of a mesh.
#[derive(Debug, Clone)]
pub struct ConvPatchIndex {
    pub s: usize,
    pub sets: Vec<NodeSet>,
    /// Set index used by each element corner.
    pub element_sets: Vec<[u32; 4]>,
    /// A_s^e: union of the corner sets, sorted.
    pub element_union: Vec<Vec<usize>>,
    /// Flags for nodes on a patch interface.
    pub on_interface: Vec<bool>,
}

impl ConvPatchIndex {
    /// Splits a node set into members on an interface (shared ids) and the
    /// remaining internal ids.
    pub fn partition(&self, set: usize) -> (Vec<usize>, Vec<usize>) {
        self.sets[set].members.iter().partition(|&&m| self.on_interface[m])
    }
}

/// Grows every node's patch by `s` element layers without leaving its CAD
/// patch or the coarse knot-span cell of the element being evaluated.
/// `on_interface` flags interface nodes (see `InterfaceSet::node_flags`).
pub fn build_conv_patch_sets(
    mesh: &MultiPatchMesh,
    s: usize,
    on_interface: Vec<bool>,
    exec: Execution,
) -> ConvPatchIndex {
    let ne = mesh.num_elements();
    let cells: Vec<(u32, u32)> = (0..ne).map(|e| mesh.element_cell(e)).collect();
    let mut node_elements: Vec<Vec<u32>> = vec![Vec::new(); mesh.num_nodes()];
    for (e, el) in mesh.elements.iter().enumerate() {
        for &n in el {
            node_elements[n].push(e as u32);
        }
    }
    let mut keys: HashMap<(usize, usize, (u32, u32)), u32> = HashMap::new();
    let mut order: Vec<(usize, usize, (u32, u32))> = Vec::new();
    let mut element_sets = Vec::with_capacity(ne);
    for (e, el) in mesh.elements.iter().enumerate() {
        let key_base = (mesh.element_patch[e], cells[e]);
        let ids = el.map(|n| {
            let key = (n, key_base.0, key_base.1);
            *keys.entry(key).or_insert_with(|| {
                order.push(key);
                (order.len() - 1) as u32
            })
        });
        element_sets.push(ids);
    }
    let sets = map_range(exec, order.len(), |k| {
        let (node, patch, cell) = order[k];
        let mut members = vec![node];
        let mut frontier = vec![node];
        for _ in 0..s {
            let mut next = Vec::new();
            for &n in &frontier {
                for &e in &node_elements[n] {
                    let e = e as usize;
                    if mesh.element_patch[e] != patch || cells[e] != cell {
                        continue;
                    }
                    for &m in &mesh.elements[e] {
                        if !members.contains(&m) {
                            members.push(m);
                            next.push(m);
                        }
                    }
                }
            }
            frontier = next;
        }
        members.sort_unstable();
        NodeSet {
            node,
            patch,
            cell,
            members,
        }
    });
    let element_union = map_range(exec, ne, |e| {
        let mut u: Vec<usize> = element_sets[e]
            .iter()
            .flat_map(|&k| sets[k as usize].members.iter().copied())
            .collect();
        u.sort_unstable();
        u.dedup();
        u
    });
    ConvPatchIndex {
        s,
        sets,
        element_sets,
        element_union,
        on_interface,
    }
}
