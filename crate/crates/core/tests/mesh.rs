use ciga::inverse::InverseMapConfig;
use ciga::mesh::{
    build_conv_patch_sets, detect_interfaces, generate_1d_two_map, generate_plate_with_hole, generate_single_patch,
    BoundaryEdge, BoundaryTag, MeshJson, MultiPatchMesh, PlateOptions, PLATE_HOLE_RADIUS,
};
use ciga::par::Execution;
use ciga::spline::{KnotVector, NurbsPatch, PatchKind, DEFAULT_DELTA};
use ciga::CigaError;

fn square(id: usize, x0: f64) -> NurbsPatch {
    NurbsPatch::new(
        id,
        vec![KnotVector::bezier(1), KnotVector::bezier(1)],
        vec![[x0, 0.0], [x0 + 1.0, 0.0], [x0, 1.0], [x0 + 1.0, 1.0]],
        vec![],
        PatchKind::Bspline,
        DEFAULT_DELTA,
    )
    .unwrap()
}

/// Two unit squares side by side. The right square lists its own copies of
/// the shared edge nodes, shifted by `gap`, when `duplicate` is set.
fn two_squares(duplicate: bool, gap: f64) -> MultiPatchMesh {
    let mut nodes = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [2.0, 0.0], [2.0, 1.0]];
    let (s0, s1) = if duplicate {
        nodes.push([1.0 + gap, 0.0]);
        nodes.push([1.0 + gap, 1.0]);
        (6, 7)
    } else {
        (1, 2)
    };
    let p0 = vec![(0, [0.0, 0.0]), (1, [1.0, 0.0]), (2, [1.0, 1.0]), (3, [0.0, 1.0])];
    let p1 = vec![(s0, [0.0, 0.0]), (4, [1.0, 0.0]), (5, [1.0, 1.0]), (s1, [0.0, 1.0])];
    let boundary = vec![BoundaryEdge { nodes: [0, 3], tag: BoundaryTag::Dirichlet, group: "left".into() }];
    MultiPatchMesh::new(
        nodes,
        vec![[0, 1, 2, 3], [s0, 4, 5, s1]],
        vec![0, 1],
        boundary,
        vec![p0, p1],
        vec![[vec![], vec![]], [vec![], vec![]]],
    )
    .unwrap()
}

#[test]
fn plate_level_zero_counts() {
    let (mesh, patches) = generate_plate_with_hole(PlateOptions::level(0, true), &InverseMapConfig::default()).unwrap();
    assert_eq!(patches.len(), 2);
    assert_eq!(mesh.num_nodes(), 2 * 11 * 11 - 11);
    assert_eq!(mesh.num_elements(), 200);
    let (single, _) = generate_plate_with_hole(PlateOptions::level(0, false), &InverseMapConfig::default()).unwrap();
    assert_eq!(single.num_nodes(), 121);
}

#[test]
fn plate_nodes_lie_on_their_patches() {
    for g0 in [false, true] {
        let opts = PlateOptions { g0_layout: g0, ..PlateOptions::level(0, true) };
        let (mesh, patches) = generate_plate_with_hole(opts, &InverseMapConfig::default()).unwrap();
        let mut on_hole = 0;
        for (a, pn) in mesh.patches.iter().enumerate() {
            for (&g, &xi) in pn.nodes.iter().zip(&pn.params) {
                let x = patches[a].map_forward(xi).unwrap();
                let d = ((x[0] - mesh.nodes[g][0]).powi(2) + (x[1] - mesh.nodes[g][1]).powi(2)).sqrt();
                assert!(d < 1e-10, "node {g} patch {a}: {d:e}");
                if xi[0] < 1e-12 {
                    on_hole += 1;
                    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                    assert!((r - PLATE_HOLE_RADIUS).abs() < 1e-10);
                }
            }
        }
        // the shared corner on the diagonal is counted once per patch
        assert_eq!(on_hole, 22);
    }
}

#[test]
fn plate_has_one_interface() {
    let (mesh, _) = generate_plate_with_hole(PlateOptions::level(1, true), &InverseMapConfig::default()).unwrap();
    let set = detect_interfaces(&mesh).unwrap();
    assert_eq!(set.pairs.len(), 1);
    let pair = &set.pairs[0];
    assert_eq!((pair.a, pair.b), (0, 1));
    assert_eq!(pair.nodes.len(), 21);
    assert_eq!(pair.edges.len(), 20);
    // the diagonal is y = -x
    for &n in &pair.nodes {
        let x = mesh.nodes[n];
        assert!((x[0] + x[1]).abs() < 1e-10);
    }
    let flags = set.node_flags(mesh.num_nodes());
    assert_eq!(flags.iter().filter(|&&f| f).count(), 21);
}

#[test]
fn single_patch_has_no_interfaces() {
    let mesh = generate_single_patch(&square(0, 0.0), 4).unwrap();
    assert!(detect_interfaces(&mesh).unwrap().is_empty());
    assert_eq!(mesh.boundary.len(), 16);
}

#[test]
fn shared_edge_is_an_interface() {
    let mesh = two_squares(false, 0.0);
    let set = detect_interfaces(&mesh).unwrap();
    assert_eq!(set.pairs.len(), 1);
    let mut nodes = set.pairs[0].nodes.clone();
    nodes.sort();
    assert_eq!(nodes, vec![1, 2]);
}

#[test]
fn coincident_distinct_nodes_break_nodal_compatibility() {
    for gap in [0.0, 1e-12] {
        let err = detect_interfaces(&two_squares(true, gap)).unwrap_err();
        assert!(matches!(err, CigaError::NodalCompatibility(_)), "{err}");
    }
    // a visible gap is just two separate boundaries
    assert!(detect_interfaces(&two_squares(true, 1e-3)).unwrap().is_empty());
}

#[test]
fn conv_patch_sizes_on_a_grid() {
    let mesh = generate_single_patch(&square(0, 0.0), 8).unwrap();
    for s in 1..=3 {
        let index = build_conv_patch_sets(&mesh, s, vec![false; mesh.num_nodes()], Execution::Sequential);
        let grid = mesh.patches[0].grid.as_ref().unwrap();
        let size = |i: usize, j: usize| {
            let set = index.sets.iter().find(|ns| ns.node == grid.id(i, j)).unwrap();
            assert!(set.members.contains(&set.node));
            assert!(set.members.windows(2).all(|w| w[0] < w[1]));
            set.members.len()
        };
        assert_eq!(size(4, 4), (2 * s + 1).pow(2));
        assert_eq!(size(0, 0), (s + 1).pow(2));
        assert_eq!(size(0, 4), (s + 1) * (2 * s + 1));
        for (e, union) in index.element_union.iter().enumerate() {
            for &n in &mesh.elements[e] {
                assert!(union.contains(&n));
            }
        }
    }
}

#[test]
fn conv_patches_stay_inside_their_patch() {
    let (mesh, _) = generate_plate_with_hole(PlateOptions::level(0, true), &InverseMapConfig::default()).unwrap();
    let flags = detect_interfaces(&mesh).unwrap().node_flags(mesh.num_nodes());
    let index = build_conv_patch_sets(&mesh, 2, flags, Execution::Parallel);
    for set in &index.sets {
        let pn = &mesh.patches[set.patch];
        assert!(set.members.iter().all(|&m| pn.local(m).is_some()));
    }
    let seq = build_conv_patch_sets(&mesh, 2, index.on_interface.clone(), Execution::Sequential);
    assert_eq!(seq.element_union, index.element_union);
}

#[test]
fn json_round_trip() {
    let cfg = InverseMapConfig::default();
    let (mesh, patches) = generate_plate_with_hole(PlateOptions::level(0, true), &cfg).unwrap();
    let text = serde_json::to_string(&mesh.to_json()).unwrap();
    let parsed: MeshJson = serde_json::from_str(&text).unwrap();
    let back = MultiPatchMesh::from_json(&parsed, &patches, &cfg).unwrap();
    assert_eq!(back.elements, mesh.elements);
    assert_eq!(back.element_patch, mesh.element_patch);
    assert_eq!(back.boundary.len(), mesh.boundary.len());
    for (a, pn) in back.patches.iter().enumerate() {
        for (&g, &xi) in pn.nodes.iter().zip(&pn.params) {
            let orig = mesh.patches[a].param_of(g).unwrap();
            assert!((orig[0] - xi[0]).abs() < 1e-9 && (orig[1] - xi[1]).abs() < 1e-9);
            let x = patches[a].map_forward(xi).unwrap();
            assert!((x[0] - back.nodes[g][0]).hypot(x[1] - back.nodes[g][1]) < 1e-10);
        }
    }
}

#[test]
fn one_dimensional_two_map_mesh() {
    let m = generate_1d_two_map(4, &InverseMapConfig::default()).unwrap();
    assert_eq!(m.x, vec![0.0, 2.5, 5.0, 7.5, 10.0]);
    for (k, map) in m.maps.iter().enumerate() {
        for (&t, &x) in m.params[k].iter().zip(&m.x) {
            assert!((map.map_forward([t, 0.0]).unwrap()[0] - x).abs() < 1e-10);
        }
    }
    assert!(generate_1d_two_map(1, &InverseMapConfig::default()).is_err());
}
