use ciga::conv::ConvSpec;
use ciga::fe::{assemble_poisson, build_shape_table, CompatMode, SolveConfig};
use ciga::inverse::{invert_mesh, InverseMapConfig};
use ciga::mesh::{build_conv_patch_sets, detect_interfaces, generate_plate_with_hole, PlateOptions};
use ciga::par::Execution;
use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn element_loops(c: &mut Criterion) {
    let cfg = InverseMapConfig::default();
    let (mesh, patches) = generate_plate_with_hole(PlateOptions::level(1, true), &cfg).unwrap();
    let spec = ConvSpec::new(2, 2);

    let mut g = c.benchmark_group("shape_table");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(build_shape_table(&mesh, &patches, spec, CompatMode::Nodal, exec).unwrap()))
        });
    }
    g.finish();

    // A fresh table per sample so the shape cache starts cold.
    let mut g = c.benchmark_group("poisson_assembly");
    g.sample_size(10);
    for (name, exec) in MODES {
        let solve = SolveConfig { exec, ..SolveConfig::default() };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter_batched(
                || build_shape_table(&mesh, &patches, spec, CompatMode::Nodal, exec).unwrap(),
                |t| black_box(assemble_poisson(&t, &|x| x[0] * x[1], &|x| x[0], &solve).unwrap()),
                BatchSize::LargeInput,
            )
        });
    }
    g.finish();

    let flags = detect_interfaces(&mesh).unwrap().node_flags(mesh.num_nodes());
    let mut g = c.benchmark_group("conv_patch_sweep");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(build_conv_patch_sets(&mesh, 2, flags.clone(), exec)))
        });
    }
    g.finish();

    let pts: Vec<_> = mesh.patches[0].nodes.iter().map(|&n| mesh.nodes[n]).collect();
    let mut g = c.benchmark_group("inversion_sweep");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(invert_mesh(&patches[0], &pts, &cfg, exec).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, element_loops);
criterion_main!(benches);
