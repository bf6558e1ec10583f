//! Cost of assembling the global SBP-SAT system, solving it with iterative
//! refinement, and certifying interface stability.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use sbp_sat_core::assembly::{
    assemble_primal, residual_form_primal, solve_refined, BcKind, BoundarySpec, Mesh1D, SatChoice,
};
use sbp_sat_core::operators::{build_csbp_narrow_d2, map_to_element};
use sbp_sat_core::sats::{br2_coeffs, check_stability, InterfaceContext, SatFamily};

fn forcing(x: f64) -> f64 {
    900.0 * (30.0 * x).cos()
}

fn bench_assembly(c: &mut Criterion) {
    let op = build_csbp_narrow_d2(2, 20).unwrap();
    let mesh = Mesh1D::uniform(&op, 0.0, 1.0, 16).unwrap();
    let bc = BoundarySpec {
        left: BcKind::Dirichlet(1.0),
        right: BcKind::Neumann(-30.0 * 30.0_f64.sin()),
    };
    let sat = SatChoice::family(SatFamily::Br2);

    let mut group = c.benchmark_group("assembly and solve");
    group.sample_size(20);

    group.bench_function("assemble csbp p2 n20 x16 elements (320 dof)", |b| {
        b.iter(|| assemble_primal(black_box(&mesh), &bc, &sat, &forcing).unwrap())
    });

    let sys = assemble_primal(&mesh, &bc, &sat, &forcing).unwrap();
    let form = residual_form_primal(&mesh, &bc, &sat, &forcing).unwrap();
    group.bench_function("solve with refinement (320 dof)", |b| {
        b.iter(|| solve_refined(black_box(&sys), black_box(&form)).unwrap())
    });

    let left = map_to_element(&op, 0.0, 0.5).unwrap();
    let right = map_to_element(&op, 0.5, 1.0).unwrap();
    let ctx = InterfaceContext::between(&left, &right, 0.5, 0.5).unwrap();
    let coeffs = br2_coeffs(&ctx);
    group.bench_function("stability certificate p2 n20 interface", |b| {
        b.iter(|| check_stability(black_box(&ctx), &coeffs, None, 1e-10).unwrap())
    });

    group.finish();
}

criterion_group!(benches, bench_assembly);
criterion_main!(benches);
