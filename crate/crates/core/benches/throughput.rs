//! Throughput comparison of the rayon dispatcher against its sequential
//! twin on the two regimes that matter: compute-heavy per-user ranking
//! and cheap per-user shuffling, plus a tracking benchmark for full
//! factorization epochs.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use mixtape_core::corpus::PlaycountMatrix;
use mixtape_core::parallel::{map_indexed, map_indexed_seq};
use mixtape_core::recsys::{
    bm25_weight, random_rank, recommend_factors, train_ials, Bm25Params, FactorModel, IalsConfig,
};
use mixtape_core::rng::rng_from;

use rand::seq::SliceRandom;
use rand::Rng;

const N_USERS: usize = 200;
const N_ARTISTS: usize = 400;

fn bench_matrix() -> PlaycountMatrix {
    let mut rng = rng_from(77);
    let mut tsv = String::from("user_id\tartist_id\tcount");
    for u in 0..N_USERS {
        let n = rng.random_range(10..=40usize);
        let mut artists: Vec<u32> = (0..N_ARTISTS as u32).collect();
        artists.shuffle(&mut rng);
        for &a in &artists[..n] {
            tsv.push_str(&format!("\nu{u:03}\ta{a:03}\t{}", rng.random_range(1..=40u32)));
        }
    }
    PlaycountMatrix::from_tsv(tsv.as_bytes()).unwrap()
}

fn bench_model(m: &PlaycountMatrix) -> FactorModel {
    let weighted = bm25_weight(m, &Bm25Params::default()).unwrap();
    let config = IalsConfig { factors: 16, epochs: 4, seed: 7, ..Default::default() };
    train_ials(&weighted, &config).unwrap()
}

/// Full-catalog factor ranking for every user: heavy work per element,
/// the case the parallel dispatcher exists for.
fn factor_ranking(c: &mut Criterion) {
    let m = bench_matrix();
    let model = bench_model(&m);
    let mut group = c.benchmark_group("factor_ranking");
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(map_indexed(N_USERS, |u| recommend_factors(&model, u, 100, &[]))))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(map_indexed_seq(N_USERS, |u| recommend_factors(&model, u, 100, &[]))))
    });
    group.finish();
}

/// Seeded shuffles: cheap per element, measures dispatch overhead.
fn random_ranking(c: &mut Criterion) {
    let mut group = c.benchmark_group("random_ranking");
    group.bench_function("parallel", |b| {
        b.iter(|| black_box(map_indexed(N_USERS, |u| random_rank(N_ARTISTS, u, 100, &[], 3))))
    });
    group.bench_function("sequential", |b| {
        b.iter(|| black_box(map_indexed_seq(N_USERS, |u| random_rank(N_ARTISTS, u, 100, &[], 3))))
    });
    group.finish();
}

/// End-to-end factorization epochs (row solves run through the parallel
/// dispatcher internally); tracked for regressions over time.
fn training_epochs(c: &mut Criterion) {
    let m = bench_matrix();
    let weighted = bm25_weight(&m, &Bm25Params::default()).unwrap();
    let config = IalsConfig { factors: 16, epochs: 4, seed: 7, ..Default::default() };
    c.bench_function("train_ials_4_epochs", |b| {
        b.iter(|| black_box(train_ials(&weighted, &config).unwrap()))
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = factor_ranking, random_ranking, training_epochs
}
criterion_main!(benches);
