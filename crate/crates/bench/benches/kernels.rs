use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use surrosel::fem::{assemble_constant_load, SolverKind};
use surrosel::surrogate::{minimize_box, BoxQuadratic};
use surrosel::{ParameterPoint, SpdSolver, SurrogateEvaluator};
use surrosel_bench::fixture;

fn forward_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("forward_solve");
    g.sample_size(10);
    for level in [5u32, 6, 7] {
        let (problem, _, _) = fixture(level);
        let a = problem.instantiate(&ParameterPoint::zeros(16)).unwrap();
        let f = assemble_constant_load(problem.mesh(), 1.0);
        g.bench_with_input(BenchmarkId::new("banded_factor_and_solve", level), &level, |b, _| {
            b.iter(|| SpdSolver::new(&a, SolverKind::BandedCholesky, 1e-10).unwrap().solve(black_box(&f)).unwrap())
        });
        let solver = SpdSolver::new(&a, SolverKind::BandedCholesky, 1e-10).unwrap();
        g.bench_with_input(BenchmarkId::new("banded_solve_only", level), &level, |b, _| {
            b.iter(|| solver.solve(black_box(&f)).unwrap())
        });
    }
    g.finish();
}

fn surrogate(c: &mut Criterion) {
    let mut g = c.benchmark_group("surrogate");
    g.sample_size(20);
    let (problem, levels, v) = fixture(7);
    let ev = SurrogateEvaluator::new(&problem, &levels).unwrap();
    let fine = ev.fine_residuals(&v).unwrap();
    for s in 2..=7u32 {
        g.bench_with_input(BenchmarkId::new("from_fine_residuals", s), &s, |b, &s| {
            b.iter(|| ev.surrogate_from_residuals(black_box(&fine), s).unwrap())
        });
    }
    g.bench_function("fine_residuals", |b| b.iter(|| ev.fine_residuals(black_box(&v)).unwrap()));
    g.finish();
}

fn box_qp(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = 16;
    let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
    let q = &a * a.transpose();
    let b = DVector::from_fn(d, |_, _| rng.gen_range(-4.0..4.0));
    let qp = BoxQuadratic::new(q, b, 50.0, DVector::from_element(d, -1.0), DVector::from_element(d, 1.0)).unwrap();
    c.bench_function("minimize_box_d16", |bch| bch.iter(|| minimize_box(black_box(&qp))));
}

criterion_group!(benches, forward_solve, surrogate, box_qp);
criterion_main!(benches);
