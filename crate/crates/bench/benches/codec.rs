use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use ewsp_bench::cif_fixture;
use ewsp_core::codec::{decode_stream, encode_clip, CodecParams};
use ewsp_core::coder::{decode_gop, encode_gop, DEFAULT_TERMINATION_EXPONENT};
use ewsp_core::{forward_gop, inverse_gop};

fn transform(c: &mut Criterion) {
    let (clip, coder) = cif_fixture(16);
    let samples = coder.gop_samples(&clip, 0, 0);
    let coeffs = forward_gop(&samples, &coder.spec).unwrap();
    let mut group = c.benchmark_group("transform");
    group.throughput(Throughput::Elements(samples.len() as u64));
    group.bench_function("forward cif gop", |b| {
        b.iter(|| forward_gop(black_box(&samples), &coder.spec).unwrap())
    });
    group.bench_function("inverse cif gop", |b| {
        b.iter(|| inverse_gop(black_box(&coeffs)).unwrap())
    });
    group.finish();
}

fn coder(c: &mut Criterion) {
    let (clip, coder) = cif_fixture(16);
    let weighted = coder.analyze(&coder.gop_samples(&clip, 0, 0)).unwrap();
    let mut group = c.benchmark_group("coder");
    for kbps in [256.0, 1500.0] {
        let budget = (kbps * 1000.0 * 16.0 / 30.0) as u64;
        let enc = encode_gop(&weighted, &coder.topology, Some(budget), DEFAULT_TERMINATION_EXPONENT).unwrap();
        group.throughput(Throughput::Bytes(enc.payload.len() as u64));
        group.bench_function(format!("encode luma gop {kbps} kbps"), |b| {
            b.iter(|| {
                encode_gop(
                    black_box(&weighted),
                    &coder.topology,
                    Some(budget),
                    DEFAULT_TERMINATION_EXPONENT,
                )
                .unwrap()
            })
        });
        group.bench_function(format!("decode luma gop {kbps} kbps"), |b| {
            b.iter(|| {
                decode_gop(
                    enc.exponent,
                    black_box(&enc.payload),
                    enc.bit_len,
                    &coder.topology,
                    None,
                    DEFAULT_TERMINATION_EXPONENT,
                )
            })
        });
    }
    group.finish();
}

fn clip(c: &mut Criterion) {
    let (clip, _) = cif_fixture(32);
    let params = CodecParams {
        bitrate_kbps: Some(1000.0),
        ..CodecParams::default()
    };
    let stream = encode_clip(&clip, &params).unwrap();
    let mut group = c.benchmark_group("clip");
    group.sample_size(10);
    group.bench_function("encode 32 cif frames", |b| {
        b.iter(|| encode_clip(black_box(&clip), &params).unwrap())
    });
    group.bench_function("decode 32 cif frames", |b| {
        b.iter_batched(
            || stream.clone(),
            |s| decode_stream(&s, None).unwrap(),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().warm_up_time(Duration::from_secs(1)).measurement_time(Duration::from_secs(3));
    targets = transform, coder, clip
}
criterion_main!(benches);
