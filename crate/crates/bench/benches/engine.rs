use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use flowdec_bench::{diamond, diamond_channel};
use flowdec_core::channel::{
    joint_distribution, mutual_info, sample_boundary, RateVector,
};
use flowdec_core::decomposition::construct_complete;
use flowdec_core::node::{nodes, NodeId};
use flowdec_core::region::{df_region, outer_region, MiTerm};
use flowdec_core::shift::{cover, default_max_steps};

fn bench_mutual_info(c: &mut Criterion) {
    let (ch, inp) = diamond_channel(1);
    let joint = joint_distribution(&ch, &inp).unwrap();
    let term = MiTerm::new(nodes([1, 2]), nodes([3, 4]), NodeId(5));
    c.bench_function("mutual_info diamond term", |b| {
        b.iter(|| mutual_info(black_box(&term), black_box(&joint)).unwrap())
    });
}

fn bench_df_region(c: &mut Criterion) {
    let (set, roles) = diamond();
    let decomp = construct_complete(&set, NodeId(5)).unwrap();
    c.bench_function("df_region diamond", |b| {
        b.iter(|| df_region(black_box(&decomp), black_box(&roles)))
    });
}

fn bench_construct_complete(c: &mut Criterion) {
    let (set, _) = diamond();
    c.bench_function("construct_complete diamond", |b| {
        b.iter(|| construct_complete(black_box(&set), NodeId(5)).unwrap())
    });
}

fn bench_cover(c: &mut Criterion) {
    let (set, roles) = diamond();
    let (ch, inp) = diamond_channel(2);
    let joint = joint_distribution(&ch, &inp).unwrap();
    let outer = outer_region(&set, &roles, NodeId(5));
    let sample: RateVector = sample_boundary(&outer, &joint, 0.99, 1, 5)
        .unwrap()
        .pop()
        .unwrap();
    let max_steps = default_max_steps(&set, NodeId(5));
    c.bench_function("cover diamond boundary sample", |b| {
        b.iter(|| {
            cover(
                black_box(&set),
                &roles,
                NodeId(5),
                black_box(&sample),
                &ch,
                &inp,
                1e-6,
                max_steps,
            )
            .unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_mutual_info,
    bench_df_region,
    bench_construct_complete,
    bench_cover
);
criterion_main!(benches);
