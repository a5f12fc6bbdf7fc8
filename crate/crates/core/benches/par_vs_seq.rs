use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use pathology_forge::certify::series_verdict;
use pathology_forge::constructions::build_ha;
use pathology_forge::exactnum::rational::{pow2, rat};
use pathology_forge::exactnum::{enclose_sum, ExactPosReal, GeometricTerms};
use pathology_forge::par;
use pathology_forge::spaces::SpaceModel;
use pathology_forge::transport::level_value;

fn rademacher_levels(c: &mut Criterion) {
    let mut g = c.benchmark_group("rademacher_levels");
    for k in [10usize, 14] {
        let a: Vec<_> = (1..=k as i64).map(|i| rat(i, i + 1)).collect();
        let n = 1u64 << k;
        g.bench_with_input(BenchmarkId::new("par", k), &a, |b, a| b.iter(|| par::map_range(0, n, |j| level_value(a, j))));
        g.bench_with_input(BenchmarkId::new("seq", k), &a, |b, a| b.iter(|| par::seq::map_range(0, n, |j| level_value(a, j))));
    }
    g.finish();
}

fn strand_verdicts(c: &mut Criterion) {
    let w = build_ha(SpaceModel::UnitInterval, rat(1, 1), None, 30).unwrap();
    let q = rat(2, 1);
    let verdict = |n: u64| {
        let g = w.group(n).unwrap();
        series_verdict(&w.strand_terms(g, 2, &q).unwrap().family).unwrap()
    };
    let mut g = c.benchmark_group("strand_verdicts");
    g.bench_function("par", |b| b.iter(|| par::map_range(0, 31, verdict)));
    g.bench_function("seq", |b| b.iter(|| par::seq::map_range(0, 31, verdict)));
    g.finish();
}

fn partial_sums(c: &mut Criterion) {
    let src = GeometricTerms {
        constant: ExactPosReal::one(),
        poly_exponent: rat(-3, 2),
        ratio: ExactPosReal::power_of(rat(1, 2), rat(1, 3)),
    };
    // enclose_sum fans out internally; compare against summing term by term
    c.bench_function("enclose_sum/par", |b| b.iter(|| enclose_sum(black_box(&src), &pow2(-40)).unwrap()));
    c.bench_function("exact_terms/seq", |b| {
        b.iter(|| par::seq::map_range(1, 1024, |m| src.exact_term(m).enclose(96)))
    });
}

criterion_group!(benches, rademacher_levels, strand_verdicts, partial_sums);
criterion_main!(benches);
