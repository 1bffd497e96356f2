use ciga::conv::ConvSpec;
use ciga::fe::{
    assemble_elasticity, assemble_poisson, build_shape_table, compute_error_norms, interface_deviation, solve_system,
    CompatMode, NodalField, NodeKind, PointRule, ShapeTable, SolveConfig, SolverKind,
};
use ciga::inverse::{random_params, InverseMapConfig};
use ciga::mesh::{generate_plate_with_hole, generate_single_patch, MultiPatchMesh, PlateOptions};
use ciga::par::Execution;
use ciga::spline::{KnotVector, NurbsPatch, PatchKind, Point, DEFAULT_DELTA};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn plate(level: u32, g0: bool) -> (MultiPatchMesh, Vec<NurbsPatch>) {
    let opts = PlateOptions { g0_layout: g0, ..PlateOptions::level(level, true) };
    generate_plate_with_hole(opts, &InverseMapConfig::default()).unwrap()
}

fn table<'m>(mesh: &'m MultiPatchMesh, patches: &'m [NurbsPatch], s: usize, p: usize, mode: CompatMode) -> ShapeTable<'m> {
    build_shape_table(mesh, patches, ConvSpec::new(s, p), mode, Execution::Parallel).unwrap()
}

/// Parent points covering corners, edges and the interior.
fn probe_rule() -> PointRule {
    let mut pts = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.0], [1.0, 0.37]];
    pts.extend([[0.21, 0.74], [0.5, 0.5], [0.93, 0.08]]);
    PointRule::points(pts)
}

fn sheared_square() -> NurbsPatch {
    // bilinear map of a non-rectangular quadrilateral
    NurbsPatch::new(
        0,
        vec![KnotVector::bezier(1), KnotVector::bezier(1)],
        vec![[0.0, 0.0], [2.0, 0.2], [0.3, 1.0], [2.4, 1.5]],
        vec![],
        PatchKind::Bspline,
        DEFAULT_DELTA,
    )
    .unwrap()
}

#[test]
fn partition_of_unity_and_linear_reproduction() {
    let (mesh, patches) = plate(0, true);
    for (mode, s, p) in [(CompatMode::Nodal, 2, 2), (CompatMode::Nodal, 3, 3), (CompatMode::G0, 2, 2), (CompatMode::G0, 3, 3)] {
        let t = table(&mesh, &patches, s, p, mode);
        for rule in [PointRule::volume(p + 2), probe_rule()] {
            for e in 0..mesh.num_elements() {
                let sh = t.eval_element(e, &rule).unwrap();
                for q in 0..sh.nq {
                    let row = sh.row(q);
                    let g = sh.grad_row(q);
                    let sum: f64 = row.iter().sum();
                    assert!((sum - 1.0).abs() < 1e-10, "{mode} p{p} e{e}: sum {sum}");
                    let (mut x, mut dx) = ([0.0; 2], [[0.0; 2]; 2]);
                    for (k, &n) in sh.nodes.iter().enumerate() {
                        for c in 0..2 {
                            x[c] += row[k] * mesh.nodes[n][c];
                            for d in 0..2 {
                                dx[c][d] += g[k][d] * mesh.nodes[n][c];
                            }
                        }
                    }
                    assert!((x[0] - sh.x[q][0]).hypot(x[1] - sh.x[q][1]) < 1e-9);
                    assert!((dx[0][0] - 1.0).abs() < 1e-8 && dx[0][1].abs() < 1e-8);
                    assert!(dx[1][0].abs() < 1e-8 && (dx[1][1] - 1.0).abs() < 1e-8);
                }
            }
        }
    }
}

#[test]
fn kronecker_delta_at_nodes() {
    let (mesh, patches) = plate(0, true);
    for mode in [CompatMode::Nodal, CompatMode::G0] {
        let t = table(&mesh, &patches, 2, 2, mode);
        let corners = PointRule::points(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        for e in 0..mesh.num_elements() {
            let sh = t.eval_element(e, &corners).unwrap();
            for (q, &node) in mesh.elements[e].iter().enumerate() {
                for (k, &v) in sh.row(q).iter().enumerate() {
                    let expect = if sh.nodes[k] == node { 1.0 } else { 0.0 };
                    assert!((v - expect).abs() < 1e-10, "{mode} e{e} node {node}: N_{} = {v}", sh.nodes[k]);
                }
            }
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    let (mesh, patches) = plate(0, true);
    let h = 1e-6;
    for mode in [CompatMode::Nodal, CompatMode::G0] {
        let t = table(&mesh, &patches, 2, 2, mode);
        for e in [0, 37, 99, 100, 163, 199] {
            for st in [[0.3, 0.6], [0.71, 0.18]] {
                let pts = vec![st, [st[0] + h, st[1]], [st[0] - h, st[1]], [st[0], st[1] + h], [st[0], st[1] - h]];
                let sh = t.eval_element(e, &PointRule::points(pts)).unwrap();
                // chain rule: dN/dst = grad N . dx/dst
                for dir in 0..2 {
                    let (qp, qm) = (1 + 2 * dir, 2 + 2 * dir);
                    let dxds = [(sh.x[qp][0] - sh.x[qm][0]) / (2.0 * h), (sh.x[qp][1] - sh.x[qm][1]) / (2.0 * h)];
                    for k in 0..sh.nodes.len() {
                        let fd = (sh.row(qp)[k] - sh.row(qm)[k]) / (2.0 * h);
                        let g = sh.grad_row(0)[k];
                        let an = g[0] * dxds[0] + g[1] * dxds[1];
                        let scale = an.abs().max(1.0);
                        assert!((an - fd).abs() / scale < 1e-6, "{mode} e{e} k{k}: {an} vs {fd}");
                    }
                }
            }
        }
    }
}

#[test]
fn node_kinds_follow_the_mode() {
    let (mesh, patches) = plate(0, true);
    let nodal = table(&mesh, &patches, 2, 2, CompatMode::Nodal);
    assert!((0..nodal.index.sets.len()).all(|i| nodal.node_kind(i) == NodeKind::Radial));
    let g0 = table(&mesh, &patches, 2, 2, CompatMode::G0);
    let kinds: Vec<NodeKind> = (0..g0.index.sets.len()).map(|i| g0.node_kind(i)).collect();
    assert!(kinds.contains(&NodeKind::Product) && kinds.contains(&NodeKind::Radial));
    let zero = table(&mesh, &patches, 0, 0, CompatMode::Nodal);
    assert!((0..zero.index.sets.len()).all(|i| zero.node_kind(i) == NodeKind::Identity));
}

#[test]
fn geometric_consistency_on_the_plate() {
    let (mesh, patches) = plate(0, false);
    let t = table(&mesh, &patches, 2, 2, CompatMode::Nodal);
    for a in 0..2 {
        let worst = t.geometric_consistency_check(a, 200, 5).unwrap();
        assert!(worst < 1e-9, "patch {a}: {worst:e}");
    }
}

#[test]
fn zero_patch_size_is_bilinear_fem() {
    let mesh = generate_single_patch(&sheared_square(), 4).unwrap();
    let patches = vec![sheared_square()];
    let t = table(&mesh, &patches, 0, 0, CompatMode::Nodal);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for e in 0..mesh.num_elements() {
        let st: Point = [rng.gen(), rng.gen()];
        let sh = t.eval_element(e, &PointRule::points(vec![st])).unwrap();
        assert_eq!(sh.nodes.len(), 4);
        let hats = [(1.0 - st[0]) * (1.0 - st[1]), st[0] * (1.0 - st[1]), st[0] * st[1], (1.0 - st[0]) * st[1]];
        for (c, &node) in mesh.elements[e].iter().enumerate() {
            let k = sh.nodes.iter().position(|&n| n == node).unwrap();
            assert!((sh.row(0)[k] - hats[c]).abs() < 1e-12);
        }
    }
}

#[test]
fn stiffness_is_symmetric() {
    let (mesh, patches) = plate(0, true);
    for mode in [CompatMode::Nodal, CompatMode::G0, CompatMode::Penalty] {
        let t = table(&mesh, &patches, 2, 2, mode);
        let cfg = SolveConfig { compat_mode: mode, ..SolveConfig::default() };
        let sys = assemble_poisson(&t, &|_| 1.0, &|_| 0.0, &cfg).unwrap();
        assert!(sys.k.max_asymmetry() < 1e-12, "{mode}: {:e}", sys.k.max_asymmetry());
        let fixed: Vec<_> = mesh.boundary_nodes(None).into_iter().flat_map(|n| [(n, 0, 0.0), (n, 1, 0.0)]).collect();
        let sys = assemble_elasticity(&t, 1e3, 0.3, fixed, &|_, _| None, &cfg).unwrap();
        assert!(sys.k.max_asymmetry() < 1e-12 * 1e3, "{mode}: {:e}", sys.k.max_asymmetry());
    }
}

fn linear(x: Point) -> f64 {
    0.7 + 1.3 * x[0] - 0.4 * x[1]
}

fn max_nodal_error(mesh: &MultiPatchMesh, dofs: &ciga::fe::DofMap, u: &[f64], exact: impl Fn(Point) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, pn) in mesh.patches.iter().enumerate() {
        for &n in &pn.nodes {
            worst = worst.max((u[dofs.slot(a, n)] - exact(mesh.nodes[n])).abs());
        }
    }
    worst
}

#[test]
fn bilinear_patch_tests_are_exact() {
    let mesh = generate_single_patch(&sheared_square(), 5).unwrap();
    let patches = vec![sheared_square()];
    let t = table(&mesh, &patches, 0, 0, CompatMode::Nodal);
    let cfg = SolveConfig::default();
    let sys = assemble_poisson(&t, &|_| 0.0, &linear, &cfg).unwrap();
    let sol = solve_system(&sys, &cfg).unwrap();
    assert!(max_nodal_error(&mesh, &sys.dofs, &sol.u, linear) < 1e-10);

    let disp = |x: Point| [1e-3 * x[0] + 2e-3 * x[1], -5e-4 * x[0] + 1e-3 * x[1]];
    let fixed: Vec<_> = mesh
        .boundary_nodes(None)
        .into_iter()
        .flat_map(|n| {
            let u = disp(mesh.nodes[n]);
            [(n, 0, u[0]), (n, 1, u[1])]
        })
        .collect();
    let sys = assemble_elasticity(&t, 2e5, 0.3, fixed, &|_, _| None, &cfg).unwrap();
    let sol = solve_system(&sys, &cfg).unwrap();
    for c in 0..2 {
        let comp: Vec<f64> = sol.u.iter().skip(c).step_by(2).copied().collect();
        let dofs = ciga::fe::DofMap::new(&mesh, 1, false);
        assert!(max_nodal_error(&mesh, &dofs, &comp, |x| disp(x)[c]) < 1e-10);
    }
}

/// Convolution functions are not piecewise polynomial and interior test
/// functions do not vanish along boundary edges, so the Galerkin solution
/// of a linear problem is only close to the linear field.
#[test]
fn linear_poisson_solutions_stay_close() {
    for (mode, g0) in [(CompatMode::Nodal, false), (CompatMode::G0, true), (CompatMode::Penalty, false)] {
        let (mesh, patches) = plate(0, g0);
        let t = table(&mesh, &patches, 2, 2, mode);
        let cfg = SolveConfig { compat_mode: mode, ..SolveConfig::default() };
        let sys = assemble_poisson(&t, &|_| 0.0, &linear, &cfg).unwrap();
        let sol = solve_system(&sys, &cfg).unwrap();
        let err = max_nodal_error(&mesh, &sys.dofs, &sol.u, linear);
        assert!(err < 5e-2, "{mode}: {err:e}");
        let field = NodalField { dofs: &sys.dofs, u: &sol.u };
        let exact = |x: Point| (linear(x), [1.3, -0.4]);
        let norms = compute_error_norms(&t, field, &exact, 4).unwrap();
        assert!(norms.relative_l2() < 1e-2, "{mode}: {norms:?}");
    }
}

#[test]
fn conjugate_gradients_agree_with_the_direct_solver() {
    let (mesh, patches) = plate(0, false);
    let t = table(&mesh, &patches, 2, 2, CompatMode::Nodal);
    let direct = SolveConfig::default();
    let cg = SolveConfig { solver: SolverKind::ConjugateGradient { tolerance: 1e-12, max_iterations: 5000 }, ..direct };
    let sys = assemble_poisson(&t, &|x| x[0] * x[1], &|x| x[0], &direct).unwrap();
    let a = solve_system(&sys, &direct).unwrap();
    let b = solve_system(&sys, &cg).unwrap();
    assert!(a.relative_residual < 1e-10);
    assert!(b.iterations > 0);
    let diff = a.u.iter().zip(&b.u).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-8, "{diff:e}");
}

#[test]
fn g0_traces_agree_pointwise() {
    let (mesh, patches) = plate(0, true);
    let t = table(&mesh, &patches, 2, 2, CompatMode::G0);
    let cfg = SolveConfig { compat_mode: CompatMode::G0, ..SolveConfig::default() };
    let sys = assemble_poisson(&t, &|_| 0.0, &|_| 0.0, &cfg).unwrap();
    // arbitrary nodal values: continuity must not depend on the field
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let u: Vec<f64> = (0..sys.dofs.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let field = NodalField { dofs: &sys.dofs, u: &u };
    // 10 interface edges x 20 points
    let dev = interface_deviation(&t, field, 20).unwrap();
    assert!(dev.max_jump < 1e-10, "{dev:?}");
    let nodal = table(&mesh, &patches, 2, 2, CompatMode::Nodal);
    let dev = interface_deviation(&nodal, field, 20).unwrap();
    assert!(dev.max_jump > 1e-6, "nodal mode should not be continuous for random data");
}

#[test]
fn sequential_and_parallel_tables_agree() {
    let (mesh, patches) = plate(0, true);
    let par = table(&mesh, &patches, 2, 2, CompatMode::G0);
    let seq = build_shape_table(&mesh, &patches, ConvSpec::new(2, 2), CompatMode::G0, Execution::Sequential).unwrap();
    let rule = PointRule::volume(4);
    for e in 0..mesh.num_elements() {
        let a = par.eval_element(e, &rule).unwrap();
        let b = seq.eval_element(e, &rule).unwrap();
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.values, b.values);
    }
}

#[test]
fn random_points_locate_into_their_elements() {
    let (mesh, patches) = plate(0, false);
    let t = table(&mesh, &patches, 1, 1, CompatMode::Nodal);
    for a in 0..2 {
        for xi in random_params(2, 50, 2) {
            let (e, st) = t.locate(a, xi).unwrap();
            assert_eq!(mesh.element_patch[e], a);
            let sh = t.eval_element(e, &PointRule::points(vec![st])).unwrap();
            assert!((sh.xi[0][0] - xi[0]).abs() < 1e-12 && (sh.xi[0][1] - xi[1]).abs() < 1e-12);
        }
    }
}
