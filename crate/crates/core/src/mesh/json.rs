use super::multipatch::{BoundaryEdge, BoundaryTag, MultiPatchMesh};
use crate::error::{CigaError, Result};
use crate::inverse::{invert_mesh, InverseMapConfig};
use crate::par::Execution;
use crate::spline::{NurbsPatch, Point};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryJson {
    pub edge: [usize; 2],
    pub tag: BoundaryTag,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub group: String,
}

/// On-disk mesh description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshJson {
    pub nodes: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 4]>,
    pub patch_of_element: Vec<usize>,
    #[serde(default)]
    pub boundary: Vec<BoundaryJson>,
}

impl MultiPatchMesh {
    pub fn to_json(&self) -> MeshJson {
        MeshJson {
            nodes: self.nodes.clone(),
            elements: self.elements.clone(),
            patch_of_element: self.element_patch.clone(),
            boundary: self
                .boundary
                .iter()
                .map(|b| BoundaryJson {
                    edge: b.nodes,
                    tag: b.tag,
                    group: b.group.clone(),
                })
                .collect(),
        }
    }

    /// Builds a mesh from physical data, obtaining every node's parameters
    /// by inverting the owning patch maps. Knot lines of each patch become
    /// the span breaks.
    pub fn from_json(json: &MeshJson, patches: &[NurbsPatch], inverse: &InverseMapConfig) -> Result<Self> {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); patches.len()];
        for (e, (el, &pa)) in json.elements.iter().zip(&json.patch_of_element).enumerate() {
            let list = members
                .get_mut(pa)
                .ok_or_else(|| CigaError::InvalidMesh(format!("element {e} refers to patch {pa}")))?;
            list.extend_from_slice(el);
        }
        let mut patch_params = Vec::with_capacity(patches.len());
        for (pa, list) in members.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            if let Some(&bad) = list.iter().find(|&&n| n >= json.nodes.len()) {
                return Err(CigaError::InvalidMesh(format!("node id {bad} out of range")));
            }
            let pts: Vec<Point> = list.iter().map(|&n| json.nodes[n]).collect();
            let xi = invert_mesh(&patches[pa], &pts, inverse, Execution::default()).map_err(|e| match e {
                CigaError::MeshInversion { failures } => CigaError::MeshInversion {
                    failures: failures.into_iter().map(|(i, r)| (list[i], r)).collect(),
                },
                other => other,
            })?;
            patch_params.push(list.iter().copied().zip(xi).collect());
        }
        let breaks = patches
            .iter()
            .map(|p| {
                let kv = p.knot_vectors();
                [kv[0].interior_breakpoints(), kv.get(1).map(|k| k.interior_breakpoints()).unwrap_or_default()]
            })
            .collect();
        let boundary = json
            .boundary
            .iter()
            .map(|b| BoundaryEdge {
                nodes: b.edge,
                tag: b.tag,
                group: b.group.clone(),
            })
            .collect();
        MultiPatchMesh::new(
            json.nodes.clone(),
            json.elements.clone(),
            json.patch_of_element.clone(),
            boundary,
            patch_params,
            breaks,
        )
    }
}
