use criterion::{criterion_group, criterion_main, Criterion};
use hodograph_bench::{coriolis_2d, dense, tanh_1d};
use hodograph_core::blowup::sheets_coriolis2d;
use hodograph_core::matops::phi_functions;
use hodograph_core::oracle::linear_force;
use hodograph_core::{auto_sheets, min_blowup_time, rk4_flow, solve_u, sweep_u, MGrid, Vect};
use std::hint::black_box;

fn kernels(c: &mut Criterion) {
    for n in [2, 4, 8] {
        let a = dense(n);
        c.bench_function(&format!("phi_functions_{n}x{n}"), |b| {
            b.iter(|| phi_functions(black_box(&a), black_box(1.3)).unwrap())
        });
    }

    let p = tanh_1d();
    let x = Vect::from_element(1, 0.4);
    c.bench_function("solve_u_tanh_1d", |b| b.iter(|| solve_u(&p, black_box(0.5), black_box(&x), None).unwrap()));
    let times: Vec<f64> = (0..=60).map(|k| k as f64 * 0.01).collect();
    c.bench_function("sweep_u_tanh_1d_61_times", |b| b.iter(|| sweep_u(&p, black_box(&x), &times)));
    c.bench_function("min_blowup_tanh_1d", |b| {
        b.iter(|| min_blowup_time(&p, &auto_sheets(&p).unwrap()).unwrap())
    });

    let q = coriolis_2d();
    let x2 = Vect::from_column_slice(&[0.6, 0.3]);
    c.bench_function("solve_u_coriolis_2d", |b| b.iter(|| solve_u(&q, black_box(0.4), black_box(&x2), None).unwrap()));
    let grid = MGrid::for_problem(&q);
    c.bench_function("coriolis_2d_sheets_201x201", |b| {
        b.iter(|| sheets_coriolis2d(&q, black_box(&grid), 0..=1).unwrap())
    });

    let f = linear_force(q.spec());
    let (x0, u0) = (Vect::from_column_slice(&[0.1, -0.2]), Vect::from_column_slice(&[1.0, 0.3]));
    c.bench_function("rk4_flow_2000_steps", |b| b.iter(|| rk4_flow(&f, &x0, &u0, black_box(2.0), 1e-3).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = kernels
}
criterion_main!(benches);
