use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use masklab::codec::{binomial_rank, binomial_unrank, decode_coarse, encode_coarse, encode_fine};
use masklab::decoders::{LocalHash, Registry};
use masklab::ensemble::{count_solutions_capped, sample_block, sample_tuple, EnsembleParams, Instance};
use masklab::gf2::BitVector;
use masklab::rng::{tag, LabRng};
use masklab::sils::{extract_sils, SilsSpec};

fn tuple(m: usize, t: usize) -> (Vec<Instance>, Vec<BitVector>) {
    let blocks = sample_tuple(t, &EnsembleParams::with_m(m), 11, 0).unwrap();
    let truths = blocks.iter().map(|b| b.witness.x.clone()).collect();
    (blocks.into_iter().map(|b| b.instance).collect(), truths)
}

fn sampling(c: &mut Criterion) {
    for m in [12, 16] {
        let p = EnsembleParams::with_m(m);
        let mut i = 0u64;
        c.bench_function(&format!("sample_block/m={m}"), |b| {
            b.iter(|| {
                i += 1;
                let mut rng = LabRng::for_stream(1, tag::BLOCK, i);
                black_box(sample_block(&p, &mut rng).unwrap())
            })
        });
    }
}

fn sketches_and_counts(c: &mut Criterion) {
    let (blocks, _) = tuple(16, 8);
    let spec = SilsSpec::default();
    c.bench_function("extract_sils/m=16", |b| {
        b.iter(|| black_box(extract_sils(&blocks[0].cnf, &spec)))
    });
    c.bench_function("coset_count/m=16", |b| {
        b.iter(|| black_box(count_solutions_capped(&blocks[0], 2).unwrap()))
    });
}

fn codec(c: &mut Criterion) {
    let (blocks, truths) = tuple(12, 16);
    let d = LocalHash::new(SilsSpec::default(), 7);
    let registry = Registry::standard();
    c.bench_function("encode_coarse/t=16", |b| {
        b.iter(|| black_box(encode_coarse(&d, &blocks, &truths).unwrap()))
    });
    c.bench_function("encode_fine/t=16", |b| {
        b.iter(|| black_box(encode_fine(&d, &blocks, &truths).unwrap()))
    });
    let (cw, _) = encode_coarse(&d, &blocks, &truths).unwrap();
    c.bench_function("decode_coarse/t=16", |b| {
        b.iter(|| black_box(decode_coarse(&cw, &blocks, &registry).unwrap()))
    });
}

fn ranks(c: &mut Criterion) {
    let n = 256;
    let subset: Vec<usize> = (0..n).filter(|i| i % 3 == 0).collect();
    c.bench_function("colex_rank/n=256", |b| {
        b.iter(|| black_box(binomial_rank(&subset, n).unwrap()))
    });
    let r = binomial_rank(&subset, n).unwrap();
    c.bench_function("colex_unrank/n=256", |b| {
        b.iter_batched(|| r.clone(), |r| binomial_unrank(n, subset.len(), &r).unwrap(), BatchSize::SmallInput)
    });
}

criterion_group!(benches, sampling, sketches_and_counts, codec, ranks);
criterion_main!(benches);
