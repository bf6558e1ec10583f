//! Construction cost of the stock operators: finite-difference first
//! derivatives, narrow second derivatives (with the borrowing matrix and its
//! pseudoinverse), and the collocation wide-stencil operators.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use sbp_sat_core::operators::{
    build_csbp_d1, build_csbp_narrow_d2, build_lg_op, build_lgl_op, build_wide_d2,
};
use sbp_sat_core::DVector;

fn bench_operators(c: &mut Criterion) {
    let mut group = c.benchmark_group("operator construction");

    for degree in [2usize, 4] {
        group.bench_function(format!("csbp first derivative p{degree} n20"), |b| {
            b.iter(|| build_csbp_d1(black_box(degree), black_box(20)).unwrap())
        });
        group.bench_function(format!("csbp narrow second derivative p{degree} n20"), |b| {
            b.iter(|| build_csbp_narrow_d2(black_box(degree), black_box(20)).unwrap())
        });
    }

    group.bench_function("lgl wide second derivative p4", |b| {
        b.iter(|| {
            let first = build_lgl_op(black_box(4)).unwrap();
            let lambda = DVector::from_element(first.n(), 1.0);
            build_wide_d2(&first, &lambda).unwrap()
        })
    });
    group.bench_function("lg wide second derivative p4", |b| {
        b.iter(|| {
            let first = build_lg_op(black_box(4)).unwrap();
            let lambda = DVector::from_element(first.n(), 1.0);
            build_wide_d2(&first, &lambda).unwrap()
        })
    });

    group.finish();
}

criterion_group!(benches, bench_operators);
criterion_main!(benches);
