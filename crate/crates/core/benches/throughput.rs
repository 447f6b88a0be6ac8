//! Compares the data-parallel sweep against the sequential path on the three
//! hot loops: the profile fit, the bootstrap, and the multiplier simulation.
//!
//! With the default `parallel` feature the same closure runs under rayon
//! pools of 1, 2, and 4 threads; building with `--no-default-features`
//! benches the true sequential fallback (no pool, no scheduling overhead).
//! Results are bitwise identical across all of these configurations.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use segccr_core::{
    bootstrap, default_tau_grid, fit_segmented, generate_scenario1, qlr_null_pvalue, CutoffGrid,
    DesignSet, Orientation, ScenarioSpec, ScorePairs, SeededRng,
};

struct Fixture {
    pairs: ScorePairs,
    data: DesignSet,
    grid: CutoffGrid,
    tau_grid: Vec<f64>,
}

fn fixture(n: usize) -> Fixture {
    let spec = ScenarioSpec::scenario1(n, 0.8, 1.5);
    let pairs = generate_scenario1(&spec, SeededRng::new(1234)).unwrap();
    let grid = CutoffGrid::uniform(50).unwrap();
    let tau_grid = default_tau_grid(&grid);
    let data = DesignSet::from_score_pairs(
        std::slice::from_ref(&pairs),
        Orientation::HigherIsStronger,
        &grid,
    )
    .unwrap();
    Fixture {
        pairs,
        data,
        grid,
        tau_grid,
    }
}

fn bench_workloads(c: &mut Criterion, suffix: &str, run: &dyn Fn(&(dyn Fn() + Sync))) {
    let fx = fixture(4000);

    c.bench_function(&format!("fit_segmented/{suffix}"), |b| {
        b.iter(|| {
            run(&|| {
                black_box(fit_segmented(&fx.data, &fx.grid, &fx.tau_grid).unwrap());
            })
        })
    });

    c.bench_function(&format!("bootstrap_b20/{suffix}"), |b| {
        b.iter(|| {
            run(&|| {
                black_box(
                    bootstrap(
                        std::slice::from_ref(&fx.pairs),
                        Orientation::HigherIsStronger,
                        &fx.grid,
                        &fx.tau_grid,
                        20,
                        SeededRng::new(7),
                    )
                    .unwrap(),
                );
            })
        })
    });

    c.bench_function(&format!("qlr_nb200/{suffix}"), |b| {
        b.iter(|| {
            run(&|| {
                black_box(
                    qlr_null_pvalue(
                        &fx.pairs,
                        Orientation::HigherIsStronger,
                        &fx.grid,
                        &fx.tau_grid,
                        200,
                        SeededRng::new(7),
                    )
                    .unwrap(),
                );
            })
        })
    });
}

#[cfg(feature = "parallel")]
fn benches(c: &mut Criterion) {
    for threads in [1usize, 2, 4] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        bench_workloads(c, &format!("threads{threads}"), &|work| {
            pool.install(move || work())
        });
    }
}

#[cfg(not(feature = "parallel"))]
fn benches(c: &mut Criterion) {
    bench_workloads(c, "sequential", &|work| work());
}

criterion_group! {
    name = suite;
    config = Criterion::default().sample_size(10);
    targets = benches
}
criterion_main!(suite);
