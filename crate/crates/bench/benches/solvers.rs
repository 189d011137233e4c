use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fixgame_bench::{chained_program, ring_system};
use fixgame_core::cpflow;
use fixgame_core::eqsys::solve_kleene;
use fixgame_core::pm::{solve_measure, Backend, Mode, Order};
use fixgame_core::smtreal::{derive_decrease_params, emit_smtlib, parse_real_system, Query};

fn bench_measure_vs_kleene(c: &mut Criterion) {
    let mut group = c.benchmark_group("ring");
    for n in [2usize, 4, 6, 8] {
        let sys = ring_system(n);
        group.bench_with_input(BenchmarkId::new("measure_global", n), &sys, |b, sys| {
            b.iter(|| solve_measure(sys, Backend::Formula, Mode::Global, Order::Fifo).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("kleene", n), &sys, |b, sys| {
            b.iter(|| solve_kleene(sys))
        });
    }
    group.finish();
}

fn bench_cp_pipeline(c: &mut Criterion) {
    let mut group = c.benchmark_group("cp");
    for k in [2usize, 4, 8] {
        let text = chained_program(k);
        group.bench_with_input(BenchmarkId::new("build_and_solve", k), &text, |b, text| {
            b.iter(|| {
                let program = cpflow::parse_while(text).unwrap();
                let eqs = cpflow::build_equations(&program);
                cpflow::solve_cp(&eqs)
            })
        });
    }
    group.finish();
}

fn bench_smt_emission(c: &mut Criterion) {
    let sys = parse_real_system(
        "x1 =mu min(pw([0,1]: 1/4 + 1/2*x1), x2)\nx2 =nu max(x1, pw([0,1]: 1/2*x2))\n",
    )
    .unwrap();
    let (params, _) = derive_decrease_params(&sys);
    c.bench_function("smt_emit_two_equations", |b| {
        b.iter(|| emit_smtlib(&sys, &params, &Query::Optimize { index: 1 }).unwrap())
    });
}

criterion_group!(benches, bench_measure_vs_kleene, bench_cp_pipeline, bench_smt_emission);
criterion_main!(benches);
