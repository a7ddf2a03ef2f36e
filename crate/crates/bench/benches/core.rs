use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use molspace::descriptors::{compute_properties, fingerprint, tanimoto_distance};
use molspace::ged_exact;
use molspace::model::{train_step, Adam, Membership, Model, ModelConfig, TrainConfig, TrainingBatch};
use molspace::smiles::{self, canonicalize, tokenize};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MOLECULES: [&str; 4] =
    ["CC(=O)Oc1ccccc1C(=O)O", "Cn1cnc2c1ncn2C", "OC1CCN(CC1)Cc1ccccc1", "CC(C)Cc1ccc(cc1)C(C)C(=O)O"];

fn chemistry(c: &mut Criterion) {
    c.bench_function("canonicalize", |b| {
        b.iter(|| MOLECULES.iter().map(|s| canonicalize(black_box(s)).unwrap()).collect::<Vec<_>>())
    });
    let graphs: Vec<_> = MOLECULES.iter().map(|s| smiles::parse(s).unwrap()).collect();
    c.bench_function("fingerprint_and_tanimoto", |b| {
        b.iter(|| tanimoto_distance(&fingerprint(black_box(&graphs[0])), &fingerprint(black_box(&graphs[2]))))
    });
    c.bench_function("properties", |b| b.iter(|| compute_properties(black_box(&graphs[3])).unwrap()));
    let a = smiles::parse("CC(=O)NC1CCCCC1").unwrap();
    let z = smiles::parse("CC(=O)OC1CCNCC1").unwrap();
    c.bench_function("ged_exact_distance_2", |b| b.iter(|| ged_exact(black_box(&a), black_box(&z), 4).unwrap()));
}

fn training(c: &mut Criterion) {
    let config = ModelConfig { max_len: 36, lambda: 0.5, seed: 1, ..ModelConfig::default() };
    let mut model = Model::new(config).unwrap();
    let mut opt = Adam::new(&model);
    let tokens: Vec<_> = MOLECULES.iter().chain(MOLECULES.iter()).map(|s| tokenize(s)).collect();
    let batch = TrainingBatch {
        tokens,
        membership: Membership {
            anchor: vec![0, 1, 2, 3, 0, 1, 2, 3],
            is_anchor: vec![true, true, true, true, false, false, false, false],
        },
    };
    let cfg = TrainConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut group = c.benchmark_group("model");
    group.sample_size(10);
    group.bench_function("train_step_batch_8", |b| {
        b.iter(|| train_step(&mut model, &mut opt, &batch, &cfg, &mut rng).unwrap())
    });
    group.finish();
}

criterion_group!(benches, chemistry, training);
criterion_main!(benches);
