use covisloop::harness::run_online;
use covisloop::{detect_loop, DetectionParams, MapDatabase, Scenario};
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn detection(c: &mut Criterion) {
    let params = DetectionParams::default();
    let sim = Scenario::single_loop().generate(0).unwrap();
    let records = sim.keyframes();
    let run = run_online(records, &params).unwrap();
    let query = run.closing_report().expect("fixture closes its loop").current_kf;
    let mut db = MapDatabase::new();
    for r in records.iter().take_while(|r| r.id <= query) {
        db.integrate(r.clone()).unwrap();
    }

    c.bench_function("detect_loop/closing_keyframe", |b| {
        b.iter(|| detect_loop(black_box(&db), query, &params))
    });
    let mut group = c.benchmark_group("run_online");
    group.sample_size(10);
    group.bench_function("single_loop", |b| {
        b.iter(|| run_online(black_box(records), &params).unwrap())
    });
    group.finish();
}

criterion_group!(benches, detection);
criterion_main!(benches);
