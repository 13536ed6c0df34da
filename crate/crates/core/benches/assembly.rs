//! Stiffness assembly on one worker versus the full rayon pool.
//!
//! Built without the `parallel` feature both variants run the sequential loop.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use elastic_cloak::fem::assembly::{assemble_with, AssemblyOptions};
use elastic_cloak::fem::{CoefficientField, Space, TensorSource};
use elastic_cloak::materials::IsotropicMaterial;
use elastic_cloak::mesh::{build_mesh, region, GeometrySpec, Shape};
use elastic_cloak::par;
use elastic_cloak::transform::CosseratCloak;

fn cloak_problem(h: f64) -> (Arc<Space>, CoefficientField) {
    let spec = GeometrySpec::disk(10.0, h)
        .with_inclusion(Shape::Disk { r: 2.0 })
        .with_cloak(2.0, 4.0);
    let space = Space::new(Arc::new(build_mesh(&spec).unwrap()), 2).unwrap();
    let steel = IsotropicMaterial::steel();
    let cloak = CosseratCloak::new(0.2, steel, 2.0).unwrap();
    let coeff = CoefficientField::uniform(&steel, &[region::BACKGROUND, region::INCLUSION])
        .with(region::layer(0), TensorSource::Cosserat(cloak));
    (space, coeff)
}

fn assembly(c: &mut Criterion) {
    let opts = AssemblyOptions::default();
    let mut group = c.benchmark_group("assemble_cosserat_p2");
    group.sample_size(20);
    for h in [0.6, 0.3] {
        let (space, coeff) = cloak_problem(h);
        let tris = space.mesh.num_triangles();
        group.bench_with_input(BenchmarkId::new("sequential", tris), &h, |b, _| {
            par::with_threads(1, || b.iter(|| black_box(assemble_with(&space, &coeff, &opts).unwrap())))
        });
        group.bench_with_input(BenchmarkId::new("parallel", tris), &h, |b, _| {
            b.iter(|| black_box(assemble_with(&space, &coeff, &opts).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, assembly);
criterion_main!(benches);
