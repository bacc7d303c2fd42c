use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use splatrig_bench::Scenario;
use splatrig_core::runtime::{update_splats, AvatarRuntime};
use splatrig_core::{full_sort, group_sort};

const SIZES: [usize; 2] = [100_000, 500_000];

fn update(c: &mut Criterion) {
    let mut group = c.benchmark_group("update_splats");
    group.sample_size(10);
    for n in SIZES {
        let sc = Scenario::new(n);
        let pose = sc.pose_at(0.7);
        let mut rt = AvatarRuntime::new(&sc.avatar.bundle, &sc.avatar.rig).unwrap();
        let (mut p, mut r) = (Vec::new(), Vec::new());
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &pose, |b, pose| {
            b.iter(|| rt.update(black_box(pose), &mut p, &mut r).unwrap())
        });
    }
    group.finish();
}

fn sort(c: &mut Criterion) {
    let mut group = c.benchmark_group("sort");
    group.sample_size(10);
    for n in SIZES {
        let sc = Scenario::new(n);
        let (positions, _) = update_splats(&sc.avatar.bundle, &sc.avatar.rig, &sc.pose_at(0.7)).unwrap();
        let camera = sc.camera(0.6);
        let groups = &sc.avatar.bundle.groups;
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::new("full", n), &positions, |b, p| b.iter(|| full_sort(black_box(p), &camera)));
        group.bench_with_input(BenchmarkId::new("group", n), &positions, |b, p| {
            b.iter(|| group_sort(black_box(p), groups, &camera))
        });
    }
    group.finish();
}

criterion_group!(benches, update, sort);
criterion_main!(benches);
