//! Pipeline configuration: a TOML file supplies values, command-line
//! flags override the file, and built-in defaults cover the rest. The
//! root seed is the one field with no default, so no run ever depends on
//! wall-clock state.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mixtape_core::behavior::{BehaviorParams, ExploreBy};
use mixtape_core::recsys::{Bm25Params, IalsConfig, PopBy};
use mixtape_core::synth::SynthSpec;

/// Fully resolved configuration. Serialized verbatim into the run
/// manifest; the worker count is deliberately not part of it, because
/// worker count must never influence outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub corpus: CorpusCfg,
    #[serde(default)]
    pub split: SplitCfg,
    #[serde(default)]
    pub bm25: Bm25Cfg,
    #[serde(default)]
    pub ials: IalsCfg,
    #[serde(default)]
    pub behavior: BehaviorCfg,
    #[serde(default)]
    pub run: RunCfg,
    /// Present iff the pipeline should generate its own corpus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthCfg>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            paths: Paths::default(),
            corpus: CorpusCfg::default(),
            split: SplitCfg::default(),
            bm25: Bm25Cfg::default(),
            ials: IalsCfg::default(),
            behavior: BehaviorCfg::default(),
            run: RunCfg::default(),
            synth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub events: PathBuf,
    pub songs: PathBuf,
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            events: PathBuf::from("out/events.tsv"),
            songs: PathBuf::from("out/songs.tsv"),
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusCfg {
    /// Artists with fewer distinct listeners are dropped.
    pub min_listeners: u32,
}

impl Default for CorpusCfg {
    fn default() -> Self {
        CorpusCfg { min_listeners: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitCfg {
    pub test_frac: f64,
    /// Defaults to `test_frac`, giving equally many regression users.
    pub reg_frac: Option<f64>,
    pub hidden_frac: f64,
}

impl Default for SplitCfg {
    fn default() -> Self {
        SplitCfg { test_frac: 0.10, reg_frac: None, hidden_frac: 0.15 }
    }
}

impl SplitCfg {
    pub fn reg_frac(&self) -> f64 {
        self.reg_frac.unwrap_or(self.test_frac)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Cfg {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Cfg {
    fn default() -> Self {
        let p = Bm25Params::default();
        Bm25Cfg { k1: p.k1, b: p.b }
    }
}

impl Bm25Cfg {
    pub fn params(&self) -> Bm25Params {
        Bm25Params { k1: self.k1, b: self.b }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IalsCfg {
    pub factors: usize,
    pub regularization: f64,
    pub epochs: usize,
}

impl Default for IalsCfg {
    fn default() -> Self {
        let c = IalsConfig::default();
        IalsCfg { factors: c.factors, regularization: c.regularization, epochs: c.epochs }
    }
}

impl IalsCfg {
    pub fn config(&self, seed: u64) -> IalsConfig {
        IalsConfig {
            factors: self.factors,
            regularization: self.regularization,
            epochs: self.epochs,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BehaviorCfg {
    pub session_gap_secs: i64,
    pub skip_threshold_secs: i64,
    pub complete_fraction: f64,
    pub explore_by: ExploreBy,
}

impl Default for BehaviorCfg {
    fn default() -> Self {
        let p = BehaviorParams::default();
        BehaviorCfg {
            session_gap_secs: p.session_gap_secs,
            skip_threshold_secs: p.skip_threshold_secs,
            complete_fraction: p.complete_fraction,
            explore_by: p.explore_by,
        }
    }
}

impl BehaviorCfg {
    pub fn params(&self) -> BehaviorParams {
        BehaviorParams {
            session_gap_secs: self.session_gap_secs,
            skip_threshold_secs: self.skip_threshold_secs,
            complete_fraction: self.complete_fraction,
            explore_by: self.explore_by,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunCfg {
    /// Root seed; every stage derives named substreams from it.
    pub seed: Option<u64>,
    pub oracle_mode: bool,
    pub pop_by: PopBy,
    /// Recommendation list length used for evaluation.
    pub list_k: usize,
}

impl Default for RunCfg {
    fn default() -> Self {
        RunCfg { seed: None, oracle_mode: false, pop_by: PopBy::Playcounts, list_k: 500 }
    }
}

/// Synth section: `SynthSpec` minus the seed, which always comes from
/// the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthCfg {
    pub n_users: usize,
    pub n_artists: usize,
    pub n_genres: usize,
    pub zipf_exponent: f64,
    pub taste_dim: usize,
    pub taste_weight: f64,
    pub events_per_user: (usize, usize),
    pub songs_per_artist: usize,
    pub session_len: (usize, usize),
}

impl Default for SynthCfg {
    fn default() -> Self {
        let s = SynthSpec::default();
        SynthCfg {
            n_users: s.n_users,
            n_artists: s.n_artists,
            n_genres: s.n_genres,
            zipf_exponent: s.zipf_exponent,
            taste_dim: s.taste_dim,
            taste_weight: s.taste_weight,
            events_per_user: s.events_per_user,
            songs_per_artist: s.songs_per_artist,
            session_len: s.session_len,
        }
    }
}

impl SynthCfg {
    pub fn spec(&self, seed: u64) -> SynthSpec {
        SynthSpec {
            n_users: self.n_users,
            n_artists: self.n_artists,
            n_genres: self.n_genres,
            zipf_exponent: self.zipf_exponent,
            taste_dim: self.taste_dim,
            taste_weight: self.taste_weight,
            events_per_user: self.events_per_user,
            songs_per_artist: self.songs_per_artist,
            session_len: self.session_len,
            seed,
        }
    }
}

/// Command-line overrides; every field beats the file when present.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides<'a> {
    pub seed: Option<u64>,
    pub out: Option<&'a Path>,
    pub oracle_mode: bool,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<PipelineConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string_pretty(self).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn apply(&mut self, ov: &Overrides<'_>) {
        if let Some(seed) = ov.seed {
            self.run.seed = Some(seed);
        }
        if let Some(out) = ov.out {
            // Relocating the output directory also relocates default
            // corpus paths that point into it.
            let default_paths = Paths::default();
            if self.paths.events == default_paths.events {
                self.paths.events = out.join("events.tsv");
            }
            if self.paths.songs == default_paths.songs {
                self.paths.songs = out.join("songs.tsv");
            }
            self.paths.out = out.to_path_buf();
        }
        if ov.oracle_mode {
            self.run.oracle_mode = true;
        }
    }

    /// The root seed; call only after validate.
    pub fn seed(&self) -> u64 {
        self.run.seed.expect("validated config carries a seed")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fraction = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(ConfigError(format!("{name} must be in (0, 1), got {v}")))
            }
        };
        fraction("split.test_frac", self.split.test_frac)?;
        fraction("split.hidden_frac", self.split.hidden_frac)?;
        if let Some(r) = self.split.reg_frac {
            fraction("split.reg_frac", r)?;
        }
        if self.run.seed.is_none() {
            return Err(ConfigError(
                "run.seed is required (set it in the config file or pass --seed)".into(),
            ));
        }
        if self.corpus.min_listeners < 1 {
            return Err(ConfigError("corpus.min_listeners must be ≥ 1".into()));
        }
        if self.bm25.k1 <= 0.0 || !(0.0..=1.0).contains(&self.bm25.b) {
            return Err(ConfigError(format!(
                "bm25 parameters out of range: k1 = {}, b = {}",
                self.bm25.k1, self.bm25.b
            )));
        }
        if self.ials.factors == 0 || self.ials.epochs == 0 {
            return Err(ConfigError("ials.factors and ials.epochs must be ≥ 1".into()));
        }
        if !(self.ials.regularization >= 0.0) {
            return Err(ConfigError("ials.regularization must be ≥ 0".into()));
        }
        if self.behavior.session_gap_secs < 0 || self.behavior.skip_threshold_secs < 0 {
            return Err(ConfigError("behavior durations must be ≥ 0".into()));
        }
        if !(self.behavior.complete_fraction > 0.0 && self.behavior.complete_fraction <= 1.0) {
            return Err(ConfigError("behavior.complete_fraction must be in (0, 1]".into()));
        }
        if self.run.list_k == 0 {
            return Err(ConfigError("run.list_k must be ≥ 1".into()));
        }
        Ok(())
    }
}
