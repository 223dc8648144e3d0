//! Cross-module protocol tests over the public API only: every
//! serialized artifact that crosses a stage boundary must round-trip
//! losslessly, and the whole in-memory experiment must be a pure
//! function of the seed.

use mixtape_core::behavior::{
    build_feature_matrix, BehaviorParams, FeatureMatrix, FeatureSchema, PercentileTables, Vocab,
};
use mixtape_core::corpus::{
    build_playcounts, filter_min_listeners, make_split, parse_events, parse_songs, parse_split,
    split_to_json, EventLog, PlaycountMatrix, SongCatalog, SplitPlan,
};
use mixtape_core::hybrid::{run_matrix, HybridOutcome, PredictionSource};
use mixtape_core::metrics::{rank_all, EvalContext};
use mixtape_core::perfreg::{
    fit_all, parse_regmodels, regmodels_to_json, train_counterparts, RegressionModel,
};
use mixtape_core::recsys::{
    bm25_weight, parse_model, random_rank, recommend_factors, train_ials, Bm25Params, FactorModel,
    IalsConfig, PopBy, PopModel,
};
use mixtape_core::rng::substream_seed;
use mixtape_core::synth::{synth_generate, SynthSpec};

struct Protocol {
    matrix: PlaycountMatrix,
    plan: SplitPlan,
    model: FactorModel,
    features: FeatureMatrix,
    regmodels: Vec<RegressionModel>,
    outcome: HybridOutcome,
}

/// The whole experiment, in memory, from one seed.
fn run_protocol(seed: u64) -> (EventLog, SongCatalog, Protocol) {
    let spec = SynthSpec {
        n_users: 150,
        n_artists: 30,
        n_genres: 6,
        taste_dim: 3,
        events_per_user: (40, 80),
        songs_per_artist: 2,
        session_len: (3, 8),
        seed,
        ..SynthSpec::default()
    };
    let (events, songs) = synth_generate(&spec).unwrap();
    let log = parse_events(events.as_bytes()).unwrap();
    let catalog = parse_songs(songs.as_bytes()).unwrap();
    let (full, _) = build_playcounts(&log, &catalog);
    let matrix = filter_min_listeners(&full, 3).unwrap();
    let plan = make_split(&matrix, 0.2, 0.2, 0.3, seed).unwrap();

    let training = matrix.minus_entries(&plan.test_hidden);
    let weighted = bm25_weight(&training, &Bm25Params::default()).unwrap();
    let config =
        IalsConfig { factors: 4, epochs: 6, seed: substream_seed(seed, "init"), ..Default::default() };
    let model = train_ials(&weighted, &config).unwrap();

    let tables = PercentileTables::from_log(&log, &catalog);
    let vocab = Vocab::from_corpus(&log, &catalog);
    let features = build_feature_matrix(
        matrix.user_ids(),
        &log,
        &catalog,
        &vocab,
        &tables,
        &BehaviorParams::default(),
    )
    .unwrap();

    let counterpart = IalsConfig {
        seed: substream_seed(seed, "init-counterpart"),
        ..config
    };
    let targets =
        train_counterparts(&matrix, &plan, &Bm25Params::default(), &counterpart, PopBy::Playcounts)
            .unwrap();
    let regmodels = fit_all(&features, &targets, seed).unwrap();

    let ctx = EvalContext::for_test_users(&matrix, &plan);
    let pop = PopModel::from_matrix(&training, PopBy::Playcounts);
    let random_lists = rank_all(&ctx, |u, ex, k| random_rank(matrix.n_artists(), u, k, ex, seed));
    let pop_lists = rank_all(&ctx, |u, ex, k| pop.rank(u, k, ex));
    let svd_lists = rank_all(&ctx, |u, ex, k| recommend_factors(&model, u, k, ex));
    let outcome = run_matrix(
        &ctx,
        &random_lists,
        &pop_lists,
        &svd_lists,
        &PredictionSource::Models { models: &regmodels, features: &features },
    )
    .unwrap();

    (log, catalog, Protocol { matrix, plan, model, features, regmodels, outcome })
}

#[test]
fn serialized_artifacts_round_trip_losslessly() {
    let (_, _, p) = run_protocol(21);

    let matrix2 = PlaycountMatrix::from_tsv(p.matrix.to_tsv().as_bytes()).unwrap();
    assert_eq!(matrix2, p.matrix);

    let plan2 = parse_split(&split_to_json(&p.plan, &p.matrix).unwrap(), &matrix2).unwrap();
    assert_eq!(plan2, p.plan);

    let model_json = p.model.to_json(p.matrix.user_ids(), p.matrix.artist_ids()).unwrap();
    let model2 =
        parse_model(&model_json, Some((matrix2.user_ids(), matrix2.artist_ids()))).unwrap();
    assert_eq!(model2, p.model);

    let schema2 = FeatureSchema::parse(&p.features.schema.to_json().unwrap()).unwrap();
    let features2 = FeatureMatrix::from_tsv(&p.features.to_tsv(), schema2).unwrap();
    assert_eq!(features2, p.features);

    let regmodels2 = parse_regmodels(&regmodels_to_json(&p.regmodels).unwrap()).unwrap();
    assert_eq!(regmodels2, p.regmodels);
}

#[test]
fn reloaded_model_ranks_identically() {
    let (_, _, p) = run_protocol(22);
    let json = p.model.to_json(p.matrix.user_ids(), p.matrix.artist_ids()).unwrap();
    let reloaded = parse_model(&json, None).unwrap();
    let exclude = [1u32, 4, 7];
    for u in 0..p.matrix.n_users().min(25) {
        let a = recommend_factors(&p.model, u, 10, &exclude);
        let b = recommend_factors(&reloaded, u, 10, &exclude);
        assert_eq!(a.items, b.items, "user {u}");
        assert_eq!(a.scores, b.scores, "user {u}");
    }
}

#[test]
fn whole_experiment_is_a_function_of_the_seed() {
    let (log_a, cat_a, a) = run_protocol(23);
    let (log_b, cat_b, b) = run_protocol(23);
    assert_eq!(log_a.events, log_b.events);
    assert_eq!(cat_a.len(), cat_b.len());
    assert_eq!(a.matrix, b.matrix);
    assert_eq!(a.plan, b.plan);
    assert_eq!(a.model, b.model);
    assert_eq!(a.features, b.features);
    assert_eq!(a.regmodels, b.regmodels);
    assert_eq!(a.outcome, b.outcome);

    let (_, _, c) = run_protocol(24);
    assert_ne!(a.outcome, c.outcome, "different seeds must differ somewhere");
}

#[test]
fn mismatched_split_artifact_is_rejected() {
    let (_, _, p) = run_protocol(25);
    let json = split_to_json(&p.plan, &p.matrix).unwrap();

    // A split persisted against one matrix must not silently attach to
    // another (different filtering → different row indices).
    let (full, _) = {
        let spec = SynthSpec {
            n_users: 150,
            n_artists: 30,
            n_genres: 6,
            taste_dim: 3,
            events_per_user: (40, 80),
            songs_per_artist: 2,
            session_len: (3, 8),
            seed: 26,
            ..SynthSpec::default()
        };
        let (events, songs) = synth_generate(&spec).unwrap();
        let log = parse_events(events.as_bytes()).unwrap();
        let catalog = parse_songs(songs.as_bytes()).unwrap();
        build_playcounts(&log, &catalog)
    };
    assert!(parse_split(&json, &full).is_err());
}
