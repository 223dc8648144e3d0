//! Pipeline stages and the artifacts they exchange. Every stage reads
//! its inputs from disk and writes its outputs to disk, so any stage can
//! be rerun from its persisted predecessors; a missing predecessor names
//! the stage that produces it.

use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use mixtape_core::behavior::{
    build_feature_matrix, FeatureMatrix, FeatureSchema, PercentileTables, Vocab,
};
use mixtape_core::corpus::{
    build_playcounts, filter_min_listeners, make_split, parse_events, parse_songs, parse_split,
    split_to_json, EventLog, PlaycountMatrix, SongCatalog, SplitPlan,
};
use mixtape_core::hybrid::{run_matrix, HybridOutcome, PredictionSource};
use mixtape_core::metrics::EvalContext;
use mixtape_core::perfreg::{fit_all, parse_regmodels, regmodels_to_json, train_counterparts};
use mixtape_core::recsys::{
    bm25_weight, parse_model, random_rank, recommend_factors, train_ials, FactorModel, PopModel,
    RankedList,
};
use mixtape_core::report;
use mixtape_core::rng::substream_seed;
use mixtape_core::synth::synth_generate;

use crate::config::{ConfigError, PipelineConfig};

/// Errors with process exit codes: 2 config, 3 data, 4 missing stage
/// dependency.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Dependency(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Dependency(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Dependency(m) => write!(f, "stage dependency: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<mixtape_core::Error> for CliError {
    fn from(e: mixtape_core::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Synth,
    Ingest,
    Split,
    Train,
    Features,
    Regress,
    Hybrid,
    Report,
    Pipeline,
}

impl FromStr for Stage {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Stage, CliError> {
        Ok(match s {
            "synth" => Stage::Synth,
            "ingest" => Stage::Ingest,
            "split" => Stage::Split,
            "train" => Stage::Train,
            "features" => Stage::Features,
            "regress" => Stage::Regress,
            // The evaluation lives in the hybrid stage, so the metric
            // stage name routes there too.
            "hybrid" | "hybridize" | "metrics" => Stage::Hybrid,
            "report" => Stage::Report,
            "pipeline" => Stage::Pipeline,
            other => {
                return Err(CliError::Config(format!(
                    "unknown stage `{other}` (expected synth, ingest, split, train, features, \
                     regress, hybrid, report, or pipeline)"
                )))
            }
        })
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Features => "features",
            Stage::Regress => "regress",
            Stage::Hybrid => "hybrid",
            Stage::Report => "report",
            Stage::Pipeline => "pipeline",
        })
    }
}

/// Canonical artifact locations under the output directory.
struct Artifacts {
    out: PathBuf,
}

impl Artifacts {
    fn new(cfg: &PipelineConfig) -> Artifacts {
        Artifacts { out: cfg.paths.out.clone() }
    }

    fn playcounts(&self) -> PathBuf {
        self.out.join("playcounts.tsv")
    }

    fn split(&self) -> PathBuf {
        self.out.join("split.json")
    }

    fn model(&self) -> PathBuf {
        self.out.join("model.json")
    }

    fn features(&self) -> PathBuf {
        self.out.join("features.tsv")
    }

    fn schema(&self) -> PathBuf {
        self.out.join("schema.json")
    }

    fn regmodels(&self) -> PathBuf {
        self.out.join("regmodels.json")
    }

    fn hybrid_eval(&self) -> PathBuf {
        self.out.join("hybrid_eval.json")
    }

    fn recommendations(&self) -> PathBuf {
        self.out.join("recommendations.tsv")
    }

    fn report_csv(&self) -> PathBuf {
        self.out.join("report.csv")
    }

    fn hybrid_report(&self) -> PathBuf {
        self.out.join("hybrid_report.csv")
    }

    fn annotations(&self) -> PathBuf {
        self.out.join("hybrid_annotations.csv")
    }

    fn select_shares(&self) -> PathBuf {
        self.out.join("select_shares.csv")
    }

    fn fuse_avg(&self) -> PathBuf {
        self.out.join("fuse_avg_weights.csv")
    }

    fn r2_table(&self) -> PathBuf {
        self.out.join("r2_table.csv")
    }

    fn class_summary(&self) -> PathBuf {
        self.out.join("class_summary.csv")
    }

    fn manifest(&self) -> PathBuf {
        self.out.join("run_manifest.json")
    }

    fn per_user_dir(&self) -> PathBuf {
        self.out.join("per_user")
    }

    fn weights_dir(&self) -> PathBuf {
        self.out.join("weights")
    }
}

/// Persisted hybrid evaluation: everything the report stage needs.
#[derive(Serialize, Deserialize)]
struct HybridEvalFile {
    version: u32,
    oracle_mode: bool,
    list_k: usize,
    /// Evaluation users as playcount-matrix row indices.
    users: Vec<usize>,
    outcome: HybridOutcome,
}

/// Run manifest: config, root seed, derived substream seeds, and crate
/// versions. Deliberately free of timestamps and worker counts so a
/// rerun produces the identical file.
#[derive(Serialize)]
struct RunManifest<'a> {
    version: u32,
    seed: u64,
    substreams: std::collections::BTreeMap<&'static str, u64>,
    versions: std::collections::BTreeMap<&'static str, &'a str>,
    config: &'a PipelineConfig,
}

fn write_artifact(path: &Path, bytes: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| CliError::Data(format!("creating {}: {e}", parent.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Data(format!("writing {}: {e}", path.display())))
}

/// Existence gate for a stage input; points at the producing stage.
fn require(path: &Path, producer: Stage) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Dependency(format!(
            "missing {}; run stage `{producer}` first",
            path.display()
        )))
    }
}

fn read_artifact(path: &Path, producer: Stage) -> Result<String, CliError> {
    require(path, producer)?;
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_playcounts(a: &Artifacts) -> Result<PlaycountMatrix, CliError> {
    let path = a.playcounts();
    require(&path, Stage::Ingest)?;
    let file =
        fs::File::open(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(PlaycountMatrix::from_tsv(BufReader::new(file))?)
}

fn load_split(a: &Artifacts, m: &PlaycountMatrix) -> Result<SplitPlan, CliError> {
    let text = read_artifact(&a.split(), Stage::Split)?;
    Ok(parse_split(&text, m)?)
}

fn load_model(a: &Artifacts, m: &PlaycountMatrix) -> Result<FactorModel, CliError> {
    let text = read_artifact(&a.model(), Stage::Train)?;
    Ok(parse_model(&text, Some((m.user_ids(), m.artist_ids())))?)
}

fn load_features(a: &Artifacts) -> Result<FeatureMatrix, CliError> {
    let schema = FeatureSchema::parse(&read_artifact(&a.schema(), Stage::Features)?)?;
    let text = read_artifact(&a.features(), Stage::Features)?;
    Ok(FeatureMatrix::from_tsv(&text, schema)?)
}

/// Raw corpus files. When the pipeline is configured to synthesize its
/// corpus, their absence is a missing-stage condition; otherwise the
/// user simply pointed at files that do not exist.
fn load_corpus(cfg: &PipelineConfig) -> Result<(EventLog, SongCatalog), CliError> {
    for (path, what) in [(&cfg.paths.events, "events"), (&cfg.paths.songs, "songs")] {
        if !path.exists() {
            return Err(if cfg.synth.is_some() {
                CliError::Dependency(format!(
                    "missing {}; run stage `synth` first",
                    path.display()
                ))
            } else {
                CliError::Data(format!("{what} file not found: {}", path.display()))
            });
        }
    }
    let open = |path: &PathBuf| {
        fs::File::open(path)
            .map(BufReader::new)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    };
    let log = parse_events(open(&cfg.paths.events)?)?;
    let catalog = parse_songs(open(&cfg.paths.songs)?)?;
    Ok((log, catalog))
}

/// Training matrix for the production recommenders: all plays except the
/// test users' hidden halves, so test-visible history shapes both the
/// BM25 statistics and the factors.
fn production_training(m: &PlaycountMatrix, plan: &SplitPlan) -> PlaycountMatrix {
    m.minus_entries(&plan.test_hidden)
}

pub fn run_stage(stage: Stage, cfg: &PipelineConfig) -> Result<(), CliError> {
    match stage {
        Stage::Synth => stage_synth(cfg),
        Stage::Ingest => stage_ingest(cfg),
        Stage::Split => stage_split(cfg),
        Stage::Train => stage_train(cfg),
        Stage::Features => stage_features(cfg),
        Stage::Regress => stage_regress(cfg),
        Stage::Hybrid => stage_hybrid(cfg),
        Stage::Report => stage_report(cfg),
        Stage::Pipeline => stage_pipeline(cfg),
    }
}

fn stage_synth(cfg: &PipelineConfig) -> Result<(), CliError> {
    let Some(synth) = &cfg.synth else {
        return Err(CliError::Config(
            "synth stage requires a [synth] section in the config".into(),
        ));
    };
    let spec = synth.spec(cfg.seed());
    let (events, songs) = synth_generate(&spec)?;
    write_artifact(&cfg.paths.events, &events)?;
    write_artifact(&cfg.paths.songs, &songs)?;
    println!(
        "synth: wrote {} and {} ({} users, {} artists)",
        cfg.paths.events.display(),
        cfg.paths.songs.display(),
        spec.n_users,
        spec.n_artists
    );
    Ok(())
}

fn stage_ingest(cfg: &PipelineConfig) -> Result<(), CliError> {
    let a = Artifacts::new(cfg);
    let (log, catalog) = load_corpus(cfg)?;
    let (full, stats) = build_playcounts(&log, &catalog);
    let filtered = filter_min_listeners(&full, cfg.corpus.min_listeners)?;
    write_artifact(&a.playcounts(), &filtered.to_tsv())?;
    println!(
        "ingest: wrote {} ({} users x {} artists, {} events resolved, {} dropped)",
        a.playcounts().display(),
        filtered.n_users(),
        filtered.n_artists(),
        stats.resolved_events,
        stats.dropped_events
    );
    Ok(())
}

fn stage_split(cfg: &PipelineConfig) -> Result<(), CliError> {
    let a = Artifacts::new(cfg);
    let m = load_playcounts(&a)?;
    let plan = make_split(
        &m,
        cfg.split.test_frac,
        cfg.split.reg_frac(),
        cfg.split.hidden_frac,
        cfg.seed(),
    )?;
    write_artifact(&a.split(), &split_to_json(&plan, &m)?)?;
    println!(
        "split: wrote {} ({} train / {} test / {} reg users)",
        a.split().display(),
        plan.users_train.len(),
        plan.users_test.len(),
        plan.users_reg.len()
    );
    Ok(())
}

fn stage_train(cfg: &PipelineConfig) -> Result<(), CliError> {
    let a = Artifacts::new(cfg);
    let m = load_playcounts(&a)?;
    let plan = load_split(&a, &m)?;
    let training = production_training(&m, &plan);
    let weighted = bm25_weight(&training, &cfg.bm25.params())?;
    let ials = cfg.ials.config(substream_seed(cfg.seed(), "init"));
    let model = train_ials(&weighted, &ials)?;
    write_artifact(&a.model(), &model.to_json(m.user_ids(), m.artist_ids())?)?;
    println!(
        "train: wrote {} ({} factors, {} epochs, final loss {:.6})",
        a.model().display(),
        ials.factors,
        ials.epochs,
        model.loss_trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn stage_features(cfg: &PipelineConfig) -> Result<(), CliError> {
    let a = Artifacts::new(cfg);
    let m = load_playcounts(&a)?;
    let (log, catalog) = load_corpus(cfg)?;
    let tables = PercentileTables::from_log(&log, &catalog);
    let vocab = Vocab::from_corpus(&log, &catalog);
    let features =
        build_feature_matrix(m.user_ids(), &log, &catalog, &vocab, &tables, &cfg.behavior.params())?;
    write_artifact(&a.schema(), &features.schema.to_json()?)?;
    write_artifact(&a.features(), &features.to_tsv())?;
    println!(
        "features: wrote {} ({} users x {} features)",
        a.features().display(),
        features.user_ids.len(),
        features.schema.len()
    );
    Ok(())
}

fn stage_regress(cfg: &PipelineConfig) -> Result<(), CliError> {
    let a = Artifacts::new(cfg);
    let m = load_playcounts(&a)?;
    let plan = load_split(&a, &m)?;
    let features = load_features(&a)?;
    let ials = cfg.ials.config(substream_seed(cfg.seed(), "init-counterpart"));
    let targets = train_counterparts(&m, &plan, &cfg.bm25.params(), &ials, cfg.run.pop_by)?;
    let models = fit_all(&features, &targets, cfg.seed())?;
    write_artifact(&a.regmodels(), &regmodels_to_json(&models)?)?;
    println!("regress: wrote {} ({} models)", a.regmodels().display(), models.len());
    Ok(())
}

fn stage_hybrid(cfg: &PipelineConfig) -> Result<(), CliError> {
    let a = Artifacts::new(cfg);
    let m = load_playcounts(&a)?;
    let plan = load_split(&a, &m)?;
    let model = load_model(&a, &m)?;

    let mut ctx = EvalContext::for_test_users(&m, &plan);
    ctx.list_k = cfg.run.list_k;

    let training = production_training(&m, &plan);
    let pop = PopModel::from_matrix(&training, cfg.run.pop_by);
    let seed = cfg.seed();

    let random_lists: Vec<RankedList> = mixtape_core::metrics::rank_all(&ctx, |u, ex, k| {
        random_rank(m.n_artists(), u, k, ex, seed)
    });
    let pop_lists: Vec<RankedList> =
        mixtape_core::metrics::rank_all(&ctx, |u, ex, k| pop.rank(u, k, ex));
    let svd_lists: Vec<RankedList> =
        mixtape_core::metrics::rank_all(&ctx, |u, ex, k| recommend_factors(&model, u, k, ex));

    let outcome = if cfg.run.oracle_mode {
        run_matrix(&ctx, &random_lists, &pop_lists, &svd_lists, &PredictionSource::Oracle)?
    } else {
        let regmodels = parse_regmodels(&read_artifact(&a.regmodels(), Stage::Regress)?)?;
        let features = load_features(&a)?;
        run_matrix(
            &ctx,
            &random_lists,
            &pop_lists,
            &svd_lists,
            &PredictionSource::Models { models: &regmodels, features: &features },
        )?
    };

    let eval = HybridEvalFile {
        version: 1,
        oracle_mode: cfg.run.oracle_mode,
        list_k: ctx.list_k,
        users: ctx.users.clone(),
        outcome,
    };
    write_artifact(&a.hybrid_eval(), &report::to_sorted_json_string(&eval)?)?;
    write_artifact(
        &a.recommendations(),
        &report::recommendations_tsv(&svd_lists, m.user_ids(), m.artist_ids(), ctx.list_k),
    )?;
    println!(
        "hybrid: wrote {} ({} systems over {} test users{})",
        a.hybrid_eval().display(),
        eval.outcome.reports.len(),
        eval.users.len(),
        if cfg.run.oracle_mode { ", oracle mode" } else { "" }
    );
    Ok(())
}

fn stage_report(cfg: &PipelineConfig) -> Result<(), CliError> {
    let a = Artifacts::new(cfg);
    let m = load_playcounts(&a)?;
    let eval: HybridEvalFile = serde_json::from_str(&read_artifact(&a.hybrid_eval(), Stage::Hybrid)?)
        .map_err(|e| CliError::Data(format!("hybrid_eval file: {e}")))?;
    let outcome = &eval.outcome;

    write_artifact(&a.report_csv(), &report::report_csv(&outcome.reports[..3]))?;
    write_artifact(&a.hybrid_report(), &report::report_csv(&outcome.reports))?;
    write_artifact(&a.annotations(), &report::annotations_csv(&outcome.reports))?;
    write_artifact(&a.select_shares(), &report::select_shares_csv(&outcome.select_shares))?;

    for rep in &outcome.reports {
        let path = a.per_user_dir().join(format!("{}.csv", rep.system));
        write_artifact(&path, &report::per_user_csv(rep, m.user_ids()))?;
    }
    for (metric, weights) in &outcome.fuse_weights {
        let path = a.weights_dir().join(format!("FUSE-{metric}.tsv"));
        write_artifact(&path, &report::weights_tsv(&eval.users, weights, m.user_ids()))?;
    }
    let mut fuse_avg = String::from("metric,w_s,w_p\n");
    for (metric, w) in &outcome.fuse_avg_weights {
        fuse_avg.push_str(&format!("{metric},{:?},{:?}\n", w.w_s, w.w_p));
    }
    write_artifact(&a.fuse_avg(), &fuse_avg)?;

    // The regression table is meaningful only when regressions ran;
    // an oracle-mode run may not have any.
    if a.regmodels().exists() {
        let models = parse_regmodels(&read_artifact(&a.regmodels(), Stage::Regress)?)?;
        write_artifact(&a.r2_table(), &report::r2_table_csv(&models))?;
    } else if !eval.oracle_mode {
        return Err(CliError::Dependency(format!(
            "missing {}; run stage `regress` first",
            a.regmodels().display()
        )));
    }

    let (log, catalog) = load_corpus(cfg)?;
    write_artifact(&a.class_summary(), &report::class_summary_csv(&log, &catalog))?;

    let seed = cfg.seed();
    let manifest = RunManifest {
        version: 1,
        seed,
        substreams: [
            ("init", substream_seed(seed, "init")),
            ("init-counterpart", substream_seed(seed, "init-counterpart")),
            ("random_rank", substream_seed(seed, "random_rank")),
            ("synth/user", substream_seed(seed, "synth/user")),
        ]
        .into_iter()
        .collect(),
        versions: [
            ("mixtape-core", mixtape_core::VERSION),
            ("mixtape-cli", env!("CARGO_PKG_VERSION")),
        ]
        .into_iter()
        .collect(),
        config: cfg,
    };
    write_artifact(&a.manifest(), &report::to_sorted_json_string(&manifest)?)?;
    println!(
        "report: wrote {} and {} ({} systems)",
        a.hybrid_report().display(),
        a.manifest().display(),
        outcome.reports.len()
    );
    Ok(())
}

fn stage_pipeline(cfg: &PipelineConfig) -> Result<(), CliError> {
    if cfg.synth.is_some() {
        stage_synth(cfg)?;
    }
    stage_ingest(cfg)?;
    stage_split(cfg)?;
    stage_train(cfg)?;
    stage_features(cfg)?;
    stage_regress(cfg)?;
    stage_hybrid(cfg)?;
    stage_report(cfg)?;
    Ok(())
}
