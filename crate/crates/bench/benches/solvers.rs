//! Solver, heuristic, and generator throughput on fixed random instances.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use satkit_core::cnf::{simplified_view, Assignment, CnfFormula};
use satkit_core::dataset::{gen_sr_pair, label_policy};
use satkit_core::heuristics::{dlis, jw_os};
use satkit_core::solvers::{brute_force, cdcl, dpll};

/// Both members of `count` SR(n) pairs from one seeded stream.
fn sr_instances(n: usize, count: usize, seed: u64) -> Vec<CnfFormula> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .flat_map(|_| {
            let (unsat, sat) = gen_sr_pair(n, &mut rng);
            [unsat, sat]
        })
        .collect()
}

fn solver_throughput(c: &mut Criterion) {
    let instances = sr_instances(12, 10, 11);
    c.bench_function("dpll_jw_os_sr12_x20", |b| {
        b.iter(|| {
            let mut decisions = 0u64;
            for f in &instances {
                decisions += dpll(black_box(f), &mut jw_os, None).decisions;
            }
            decisions
        })
    });
    c.bench_function("dpll_dlis_sr12_x20", |b| {
        b.iter(|| {
            let mut decisions = 0u64;
            for f in &instances {
                decisions += dpll(black_box(f), &mut dlis, None).decisions;
            }
            decisions
        })
    });
    c.bench_function("cdcl_jw_os_sr12_x20", |b| {
        b.iter(|| {
            let mut decisions = 0u64;
            for f in &instances {
                decisions += cdcl(black_box(f), &mut jw_os, None).decisions;
            }
            decisions
        })
    });
    let (_, sat_twin) = gen_sr_pair(14, &mut ChaCha8Rng::seed_from_u64(17));
    c.bench_function("brute_force_sr14", |b| {
        b.iter(|| brute_force(black_box(&sat_twin)).unwrap())
    });
}

fn heuristic_cost(c: &mut Criterion) {
    let (unsat, _) = gen_sr_pair(30, &mut ChaCha8Rng::seed_from_u64(5));
    let view = simplified_view(&unsat, &Assignment::new(30));
    c.bench_function("jw_os_choice_sr30", |b| b.iter(|| jw_os(black_box(&view))));
    c.bench_function("dlis_choice_sr30", |b| b.iter(|| dlis(black_box(&view))));
}

fn generation(c: &mut Criterion) {
    c.bench_function("gen_sr_pair_10", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        b.iter(|| gen_sr_pair(10, &mut rng))
    });
    let (_, sat_twin) = gen_sr_pair(10, &mut ChaCha8Rng::seed_from_u64(29));
    c.bench_function("label_policy_sr10", |b| {
        b.iter(|| label_policy(black_box(&sat_twin)))
    });
}

criterion_group!(benches, solver_throughput, heuristic_cost, generation);
criterion_main!(benches);
