//! Listening-behavior features: each user's event history is segmented
//! into sessions, per-session features are summarized by mean and
//! standard deviation, and global history features (repetition rates,
//! play distributions over decades/classes/genres/hours/weekdays) are
//! appended. The resulting fixed-schema vectors feed the performance
//! regressions.

mod features;
mod session;

pub use features::{build_feature_matrix, global_features, FeatureMatrix};
pub use session::{segment_sessions, session_features, Session, SESSION_FEATURE_NAMES};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{EventLog, SongCatalog, SongMeta};
use crate::Result;

/// What "exploratoryness" counts unique items over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExploreBy {
    Artist,
    Song,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorParams {
    /// Maximum end-to-start gap inside one session. A gap of exactly this
    /// many seconds still continues the session.
    pub session_gap_secs: i64,
    /// Plays shorter than this count as skipped.
    pub skip_threshold_secs: i64,
    /// Fraction of the song duration that counts as a complete listen.
    pub complete_fraction: f64,
    pub explore_by: ExploreBy,
}

impl Default for BehaviorParams {
    fn default() -> Self {
        BehaviorParams {
            session_gap_secs: 900,
            skip_threshold_secs: 30,
            complete_fraction: 0.95,
            explore_by: ExploreBy::Artist,
        }
    }
}

/// Seconds of the song the user actually heard: known listened time is
/// capped by the song duration; unknown listened time counts as the full
/// duration (0 when that is unknown too).
pub(crate) fn effective_listened(listened: i64, meta: Option<&SongMeta>) -> i64 {
    let duration = meta.and_then(|m| m.duration).map(i64::from);
    if listened >= 0 {
        match duration {
            Some(d) => listened.min(d),
            None => listened,
        }
    } else {
        duration.unwrap_or(0)
    }
}

/// Lexicographically-first tag, the single value a multi-tag attribute
/// contributes to repetition, change and distribution features.
pub(crate) fn first_tag(tags: &[String]) -> Option<&str> {
    tags.first().map(String::as_str)
}

/// Global per-artist percentile tables, built once over every resolvable
/// event in the corpus (pre-filter, so session histories always resolve).
/// percentile(a) = |{b : m(b) ≤ m(a)}| / N.
#[derive(Debug, Clone, Default)]
pub struct PercentileTables {
    /// By total playcounts.
    popularity: HashMap<String, f64>,
    /// By distinct listeners.
    mainstreamness: HashMap<String, f64>,
}

impl PercentileTables {
    pub fn from_log(log: &EventLog, catalog: &SongCatalog) -> PercentileTables {
        let mut plays: BTreeMap<&str, u64> = BTreeMap::new();
        let mut listeners: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for ev in &log.events {
            if let Some(meta) = catalog.get(&ev.song_id) {
                *plays.entry(&meta.artist_id).or_insert(0) += 1;
                listeners.entry(&meta.artist_id).or_default().insert(&ev.user_id);
            }
        }
        let listener_counts: BTreeMap<&str, u64> =
            listeners.into_iter().map(|(a, s)| (a, s.len() as u64)).collect();
        PercentileTables {
            popularity: percentile_map(&plays),
            mainstreamness: percentile_map(&listener_counts),
        }
    }

    pub fn popularity(&self, artist_id: &str) -> f64 {
        self.popularity.get(artist_id).copied().unwrap_or(0.0)
    }

    pub fn mainstreamness(&self, artist_id: &str) -> f64 {
        self.mainstreamness.get(artist_id).copied().unwrap_or(0.0)
    }
}

fn percentile_map(stats: &BTreeMap<&str, u64>) -> HashMap<String, f64> {
    let n = stats.len();
    let mut values: Vec<u64> = stats.values().copied().collect();
    values.sort_unstable();
    stats
        .iter()
        .map(|(&a, &v)| {
            // rank of the last occurrence of v = |{b : m(b) ≤ v}|
            let le = values.partition_point(|&x| x <= v);
            (a.to_string(), le as f64 / n as f64)
        })
        .collect()
}

/// Fixed category lists for the distribution blocks, built from the
/// corpus the features are computed on. Out-of-vocabulary (or unknown)
/// mass lands in each block's trailing "other" bin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    pub decades: Vec<String>,
    pub classes: Vec<String>,
    pub genres: Vec<String>,
}

impl Vocab {
    /// Collect the decades, first-class tags and first-genre tags of every
    /// played song, sorted for stable schemas.
    pub fn from_corpus(log: &EventLog, catalog: &SongCatalog) -> Vocab {
        let mut decades = BTreeSet::new();
        let mut classes = BTreeSet::new();
        let mut genres = BTreeSet::new();
        for ev in &log.events {
            if let Some(meta) = catalog.get(&ev.song_id) {
                if let Some(y) = meta.year {
                    decades.insert(decade_label(y));
                }
                if let Some(c) = first_tag(&meta.classes) {
                    classes.insert(c.to_string());
                }
                if let Some(g) = first_tag(&meta.genres) {
                    genres.insert(g.to_string());
                }
            }
        }
        Vocab {
            decades: decades.into_iter().collect(),
            classes: classes.into_iter().collect(),
            genres: genres.into_iter().collect(),
        }
    }
}

pub(crate) fn decade_label(year: i32) -> String {
    format!("{}s", year.div_euclid(10) * 10)
}

/// Ordered feature names with named block boundaries; identical for every
/// user of one corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub names: Vec<String>,
    pub blocks: Vec<FeatureBlock>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureBlock {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

const WEEKDAY_LABELS: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];

impl FeatureSchema {
    pub fn from_vocab(vocab: &Vocab) -> FeatureSchema {
        let mut names: Vec<String> = Vec::new();
        let mut blocks = Vec::new();
        let mut block = |names: &mut Vec<String>, label: &str, add: Vec<String>| {
            blocks.push(FeatureBlock { name: label.to_string(), start: names.len(), len: add.len() });
            names.extend(add);
        };

        block(&mut names, "flags", vec!["has_data".to_string()]);
        block(
            &mut names,
            "session_mean",
            SESSION_FEATURE_NAMES.iter().map(|n| format!("sess_mean_{n}")).collect(),
        );
        block(
            &mut names,
            "session_std",
            SESSION_FEATURE_NAMES.iter().map(|n| format!("sess_std_{n}")).collect(),
        );
        block(
            &mut names,
            "history_repeated",
            ["artist", "song", "album", "genre", "style", "class", "year"]
                .iter()
                .map(|n| format!("hist_repeated_{n}"))
                .collect(),
        );
        let with_other = |prefix: &str, cats: &[String]| -> Vec<String> {
            cats.iter()
                .map(|c| format!("{prefix}_{c}"))
                .chain(std::iter::once(format!("{prefix}_other")))
                .collect()
        };
        block(&mut names, "decade", with_other("decade", &vocab.decades));
        block(&mut names, "class", with_other("class", &vocab.classes));
        block(&mut names, "genre", with_other("genre", &vocab.genres));
        block(&mut names, "hour", (0..24).map(|h| format!("hour_{h:02}")).collect());
        block(
            &mut names,
            "weekday",
            WEEKDAY_LABELS.iter().map(|d| format!("weekday_{d}")).collect(),
        );
        FeatureSchema { names, blocks }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn block(&self, name: &str) -> Option<&FeatureBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        crate::report::to_sorted_json_string(&SchemaFile { version: 1, schema: self.clone() })
    }

    pub fn parse(text: &str) -> Result<FeatureSchema> {
        let file: SchemaFile = serde_json::from_str(text)
            .map_err(|e| crate::Error::Serde(format!("schema file: {e}")))?;
        Ok(file.schema)
    }
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    version: u32,
    schema: FeatureSchema,
}
