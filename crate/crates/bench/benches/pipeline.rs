use criterion::{black_box, criterion_group, criterion_main, Criterion};
use msreg_bench::{shifted_texture, texture};
use msreg_core::harris::{cornerness_map, detect, HarrisParams};
use msreg_core::matching::match_layer;
use msreg_core::pmom::{pmom, ScaleBank};
use msreg_core::{Pipeline, PipelineConfig};

fn orientation(c: &mut Criterion) {
    let img = texture(256, 256);
    let bank = ScaleBank::evenly_spaced(9.6, 48.0, 10).unwrap();
    c.bench_function("pmom 256x256, 10 scales", |b| b.iter(|| pmom(black_box(&img), &bank).unwrap()));
}

fn corners(c: &mut Criterion) {
    let img = texture(512, 512);
    c.bench_function("cornerness 512x512", |b| b.iter(|| cornerness_map(black_box(&img), 1.5)));
    let params = HarrisParams::default();
    c.bench_function("harris detect 512x512", |b| b.iter(|| detect(black_box(&img), &params, 1.0)));
}

fn matching(c: &mut Criterion) {
    let p = Pipeline::new(PipelineConfig::default()).unwrap();
    let fa = p.features(&texture(384, 384), 1.0).unwrap();
    let fb = p.features(&shifted_texture(384, 384, 7, 3), 1.0).unwrap();
    let (da, db) = (fa.descriptors.get(0, 0).unwrap(), fb.descriptors.get(0, 0).unwrap());
    c.bench_function("match one layer pair", |b| b.iter(|| match_layer(black_box(da), db, 0.9).unwrap()));
}

fn end_to_end(c: &mut Criterion) {
    let p = Pipeline::new(PipelineConfig { max_points: 300, ..Default::default() }).unwrap();
    let (a, b) = (texture(320, 320), shifted_texture(320, 320, 5, 9));
    let mut g = c.benchmark_group("register");
    g.sample_size(10);
    g.bench_function("320x320 shifted pair", |bn| bn.iter(|| p.register(black_box(&a), &b)));
    g.finish();
}

criterion_group!(benches, orientation, corners, matching, end_to_end);
criterion_main!(benches);
