//! Parallel core against a single worker thread. Build with
//! `--no-default-features` to time the sequential fallback itself.

use std::hint::black_box;
use std::path::PathBuf;

use criterion::{criterion_group, criterion_main, Criterion};
use qdcover::coverage::{evaluate, DEFAULT_RESOLUTION};
use qdcover::mesh::io::load_mesh_file;
use qdcover::one_forms::harmonic_basis;
use qdcover::pipeline::{analyze, prepare, PhiChoice};
use qdcover::planner::{plan_coverage, PlannerOptions};

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/golden")
        .join(name)
}

#[cfg(feature = "parallel")]
fn run<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
    }
}

#[cfg(not(feature = "parallel"))]
fn run<T: Send>(_threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    f()
}

fn modes() -> Vec<(&'static str, Option<usize>)> {
    if qdcover::par::is_parallel() {
        vec![("parallel", None), ("one_thread", Some(1))]
    } else {
        vec![("sequential", None)]
    }
}

fn bench(c: &mut Criterion) {
    let genus2 = load_mesh_file(&golden("genus2.obj"), None).expect("mesh");
    let pants = prepare(
        load_mesh_file(&golden("pants.obj"), None).expect("mesh"),
        &PhiChoice::Default,
        50.0,
    )
    .expect("surface");
    let analysis = analyze(&pants).expect("analysis");
    let plan = plan_coverage(&pants, &analysis, PlannerOptions { epsilon: 4.0 }).expect("plan");

    let mut g = c.benchmark_group("harmonic_basis_genus2");
    g.sample_size(10);
    for (name, threads) in modes() {
        g.bench_function(name, |b| {
            b.iter(|| run(threads, || harmonic_basis(black_box(&genus2)).expect("basis")))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("coverage_pants");
    g.sample_size(10);
    for (name, threads) in modes() {
        g.bench_function(name, |b| {
            b.iter(|| {
                run(threads, || {
                    evaluate(&pants.mesh, black_box(&plan.path), 0.01, DEFAULT_RESOLUTION, None).expect("coverage")
                })
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
