use std::hint::black_box;

use aged_core::decode::decode_slot;
use aged_core::{evaluate, AnnotatedInstance, Argument, InstancePrediction, SpanPrediction};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..=n).map(|_| rng.gen_range(0.01..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / sum).collect()
}

fn decoding(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("decode_slot");
    for n in [8, 32, 128, 512] {
        let (start, end) = (distribution(&mut rng, n), distribution(&mut rng, n));
        group.bench_with_input(
            BenchmarkId::from_parameter(n),
            &(start, end),
            |b, (s, e)| b.iter(|| decode_slot("A", black_box(s), black_box(e))),
        );
    }
    group.finish();
}

fn scoring(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let fes = ["A", "B", "C", "D"];
    let mut gold = Vec::new();
    let mut preds = Vec::new();
    for _ in 0..1000 {
        let mut arguments = Vec::new();
        let mut predictions = Vec::new();
        for fe in fes {
            let s = rng.gen_range(1..=20);
            if rng.gen_bool(0.6) {
                arguments.push(Argument {
                    fe: fe.into(),
                    start: s,
                    end: s,
                });
            }
            let span = rng.gen_bool(0.6).then_some((s, s));
            predictions.push(SpanPrediction {
                fe: fe.into(),
                span,
                score: 0.5,
            });
        }
        gold.push(AnnotatedInstance {
            tokens: vec!["w".into(); 20],
            target: 1,
            frame: "F".into(),
            arguments,
        });
        preds.push(InstancePrediction {
            frame: "F".into(),
            predictions,
        });
    }
    c.bench_function("evaluate/1000-instances", |b| {
        b.iter(|| evaluate(black_box(&preds), &gold).unwrap())
    });
}

criterion_group!(benches, decoding, scoring);
criterion_main!(benches);
