//! User-level feature vectors: session summaries plus whole-history
//! repetition and play-distribution blocks.

use std::collections::{HashMap, HashSet};

use super::{
    decade_label, first_tag, segment_sessions, session_features, BehaviorParams, FeatureSchema,
    PercentileTables, Vocab, SESSION_FEATURE_NAMES,
};
use crate::corpus::{EventLog, ListeningEvent, SongCatalog};
use crate::parallel::try_map_indexed;
use crate::{Error, Result};

/// One row per user, aligned with a shared schema. Row order follows the
/// user id list the matrix was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub schema: FeatureSchema,
    pub user_ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn row(&self, user: usize) -> &[f64] {
        &self.rows[user]
    }

    pub fn user_index(&self, user_id: &str) -> Option<usize> {
        self.user_ids.iter().position(|u| u == user_id)
    }

    /// Tab-separated dump: header of feature names, one row per user.
    /// Floats use shortest round-trip formatting, so parsing the dump
    /// reproduces the exact values.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("user_id");
        for name in &self.schema.names {
            out.push('\t');
            out.push_str(name);
        }
        out.push('\n');
        for (user_id, row) in self.user_ids.iter().zip(&self.rows) {
            out.push_str(user_id);
            for v in row {
                out.push('\t');
                out.push_str(&format!("{v:?}"));
            }
            out.push('\n');
        }
        out
    }

    /// Parse a `to_tsv` dump against the schema that produced it.
    pub fn from_tsv(text: &str, schema: FeatureSchema) -> Result<FeatureMatrix> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "missing feature header".to_string()))?;
        let mut expect = String::from("user_id");
        for name in &schema.names {
            expect.push('\t');
            expect.push_str(name);
        }
        if header != expect {
            return Err(Error::parse(1, "feature header does not match schema".to_string()));
        }
        let mut user_ids = Vec::new();
        let mut rows = Vec::new();
        for (idx, line) in lines {
            let mut fields = line.split('\t');
            let user_id = fields
                .next()
                .filter(|u| !u.is_empty())
                .ok_or_else(|| Error::parse(idx + 1, "missing user id".to_string()))?;
            let row: Vec<f64> = fields
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::parse(idx + 1, format!("bad feature value `{f}`: {e}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != schema.len() {
                return Err(Error::parse(
                    idx + 1,
                    format!("expected {} features, found {}", schema.len(), row.len()),
                ));
            }
            user_ids.push(user_id.to_string());
            rows.push(row);
        }
        Ok(FeatureMatrix { schema, user_ids, rows })
    }
}

/// Whole-history features for one user: seven repetition rates followed by
/// normalized play distributions over decades, classes, genres, hours of
/// day and weekdays (UTC). Each distribution block ends in an "other" bin
/// that absorbs unknown and out-of-vocabulary values, so for a non-empty
/// history every block sums to 1.
pub fn global_features(
    events: &[ListeningEvent],
    catalog: &SongCatalog,
    vocab: &Vocab,
) -> Result<Vec<f64>> {
    let n = events.len();
    if n == 0 {
        return Err(Error::data("history has no events"));
    }
    let nf = n as f64;

    let mut artists = HashSet::new();
    let mut songs = HashSet::new();
    let mut albums = HashSet::new();
    let mut genres = HashSet::new();
    let mut styles = HashSet::new();
    let mut classes = HashSet::new();
    let mut years = HashSet::new();

    let mut decade_bins = vec![0u32; vocab.decades.len() + 1];
    let mut class_bins = vec![0u32; vocab.classes.len() + 1];
    let mut genre_bins = vec![0u32; vocab.genres.len() + 1];
    let mut hour_bins = [0u32; 24];
    let mut weekday_bins = [0u32; 7];

    // vocab lists are sorted, so membership is a binary search; misses
    // land in the trailing "other" bin.
    fn bin_of(vocab: &[String], value: Option<&str>) -> usize {
        match value {
            Some(v) => vocab.binary_search_by(|c| c.as_str().cmp(v)).unwrap_or(vocab.len()),
            None => vocab.len(),
        }
    }

    for ev in events {
        let meta = catalog.get(&ev.song_id).ok_or_else(|| {
            Error::data(format!("history references unknown song `{}`", ev.song_id))
        })?;
        artists.insert(meta.artist_id.as_str());
        songs.insert(ev.song_id.as_str());
        albums.insert(meta.album_id.as_str());
        genres.insert(first_tag(&meta.genres));
        styles.insert(first_tag(&meta.styles));
        classes.insert(first_tag(&meta.classes));
        years.insert(meta.year);

        let decade = meta.year.map(decade_label);
        decade_bins[bin_of(&vocab.decades, decade.as_deref())] += 1;
        class_bins[bin_of(&vocab.classes, first_tag(&meta.classes))] += 1;
        genre_bins[bin_of(&vocab.genres, first_tag(&meta.genres))] += 1;

        hour_bins[(ev.timestamp.rem_euclid(86_400) / 3_600) as usize] += 1;
        // 1970-01-01 was a Thursday; weekday block starts at Monday.
        weekday_bins[(ev.timestamp.div_euclid(86_400) + 3).rem_euclid(7) as usize] += 1;
    }

    let mut out = Vec::with_capacity(7 + decade_bins.len() + class_bins.len() + genre_bins.len() + 31);
    for unique in [
        artists.len(),
        songs.len(),
        albums.len(),
        genres.len(),
        styles.len(),
        classes.len(),
        years.len(),
    ] {
        out.push(1.0 - unique as f64 / nf);
    }
    for bins in [decade_bins.as_slice(), class_bins.as_slice(), genre_bins.as_slice()] {
        out.extend(bins.iter().map(|&c| f64::from(c) / nf));
    }
    out.extend(hour_bins.iter().map(|&c| f64::from(c) / nf));
    out.extend(weekday_bins.iter().map(|&c| f64::from(c) / nf));
    Ok(out)
}

/// Build the full feature matrix for the given users, in the given order.
///
/// Events referencing songs outside the catalog are dropped up front
/// (ingestion already reported them); a user left with no events gets an
/// all-zero row, distinguished by the leading has_data flag staying 0.
/// Session features are aggregated as mean and population standard
/// deviation over the user's sessions (std 0 for a single session).
pub fn build_feature_matrix(
    user_ids: &[String],
    log: &EventLog,
    catalog: &SongCatalog,
    vocab: &Vocab,
    tables: &PercentileTables,
    params: &BehaviorParams,
) -> Result<FeatureMatrix> {
    let schema = FeatureSchema::from_vocab(vocab);
    let n_session = SESSION_FEATURE_NAMES.len();

    let mut by_user: HashMap<&str, Vec<ListeningEvent>> = HashMap::new();
    for ev in &log.events {
        if catalog.get(&ev.song_id).is_some() {
            if let Some(bucket) = by_user.get_mut(ev.user_id.as_str()) {
                bucket.push(ev.clone());
            } else if user_ids.iter().any(|u| u == &ev.user_id) {
                by_user.insert(&ev.user_id, vec![ev.clone()]);
            }
        }
    }

    let rows = try_map_indexed(user_ids.len(), |u| {
        let events = by_user.get(user_ids[u].as_str()).map(Vec::as_slice).unwrap_or(&[]);
        if events.is_empty() {
            return Ok(vec![0.0; schema.len()]);
        }
        let sessions = segment_sessions(events, catalog, params);
        let per_session: Vec<Vec<f64>> = sessions
            .iter()
            .map(|s| session_features(s, catalog, tables, params))
            .collect::<Result<_>>()?;
        let k = per_session.len() as f64;
        let mut means = vec![0.0; n_session];
        for f in &per_session {
            for (m, v) in means.iter_mut().zip(f) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= k;
        }
        let mut stds = vec![0.0; n_session];
        for f in &per_session {
            for ((s, v), m) in stds.iter_mut().zip(f).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut stds {
            *s = (*s / k).sqrt();
        }

        let mut row = Vec::with_capacity(schema.len());
        row.push(1.0);
        row.extend(means);
        row.extend(stds);
        row.extend(global_features(events, catalog, vocab)?);
        debug_assert_eq!(row.len(), schema.len());
        Ok(row)
    })?;

    Ok(FeatureMatrix { schema, user_ids: user_ids.to_vec(), rows })
}
