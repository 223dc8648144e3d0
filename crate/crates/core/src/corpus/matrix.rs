//! The user-artist playcount matrix. Users and artists are interned in
//! lexicographic id order, which makes construction independent of event
//! order and reruns byte-stable.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use crate::{Error, Result};

use super::events::{EventLog, SongCatalog};

pub const PLAYCOUNTS_HEADER: &str = "user_id\tartist_id\tcount";

/// Sparse row-major playcounts. Row entries are sorted by artist column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaycountMatrix {
    user_ids: Vec<String>,
    artist_ids: Vec<String>,
    rows: Vec<Vec<(u32, u32)>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildStats {
    /// Events whose song_id was not in the catalog; counted and dropped.
    pub dropped_events: usize,
    pub resolved_events: usize,
}

impl PlaycountMatrix {
    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_artists(&self) -> usize {
        self.artist_ids.len()
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn artist_ids(&self) -> &[String] {
        &self.artist_ids
    }

    pub fn user_id(&self, row: usize) -> &str {
        &self.user_ids[row]
    }

    pub fn artist_id(&self, col: u32) -> &str {
        &self.artist_ids[col as usize]
    }

    /// Row index for a user id; ids are interned sorted, so lookup is a
    /// binary search.
    pub fn user_index(&self, user_id: &str) -> Option<usize> {
        self.user_ids.binary_search_by(|u| u.as_str().cmp(user_id)).ok()
    }

    pub fn artist_index(&self, artist_id: &str) -> Option<u32> {
        self.artist_ids
            .binary_search_by(|a| a.as_str().cmp(artist_id))
            .ok()
            .map(|i| i as u32)
    }

    /// Entries `(artist column, count)` for one user, sorted by column.
    pub fn row(&self, user: usize) -> &[(u32, u32)] {
        &self.rows[user]
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, u32, u32)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(u, row)| row.iter().map(move |&(a, c)| (u, a, c)))
    }

    /// Total playcount mass; equals the number of resolvable events when
    /// built by [`build_playcounts`].
    pub fn total_mass(&self) -> u64 {
        self.iter_entries().map(|(_, _, c)| u64::from(c)).sum()
    }

    pub fn n_entries(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Distinct listeners per artist column.
    pub fn listeners_per_artist(&self) -> Vec<u32> {
        let mut listeners = vec![0u32; self.artist_ids.len()];
        for row in &self.rows {
            for &(a, _) in row {
                listeners[a as usize] += 1;
            }
        }
        listeners
    }

    /// Total plays per artist column.
    pub fn plays_per_artist(&self) -> Vec<u64> {
        let mut plays = vec![0u64; self.artist_ids.len()];
        for row in &self.rows {
            for &(a, c) in row {
                plays[a as usize] += u64::from(c);
            }
        }
        plays
    }

    /// Copy of the matrix with the given entries removed. Dimensions and
    /// index assignments are preserved so rankings stay aligned; only row
    /// contents shrink. Used to hide held-out entries before training.
    pub fn minus_entries(&self, holdout: &BTreeMap<usize, Vec<u32>>) -> PlaycountMatrix {
        let mut rows = self.rows.clone();
        for (&user, cols) in holdout {
            let drop: BTreeSet<u32> = cols.iter().copied().collect();
            rows[user].retain(|(a, _)| !drop.contains(a));
        }
        PlaycountMatrix {
            user_ids: self.user_ids.clone(),
            artist_ids: self.artist_ids.clone(),
            rows,
        }
    }

    fn from_counts(counts: BTreeMap<(String, String), u32>) -> PlaycountMatrix {
        let user_set: BTreeSet<&String> = counts.keys().map(|(u, _)| u).collect();
        let artist_set: BTreeSet<&String> = counts.keys().map(|(_, a)| a).collect();
        let user_ids: Vec<String> = user_set.into_iter().cloned().collect();
        let artist_ids: Vec<String> = artist_set.into_iter().cloned().collect();
        let mut rows: Vec<Vec<(u32, u32)>> = vec![Vec::new(); user_ids.len()];
        // BTreeMap iteration is (user, artist)-sorted, so each row fills in
        // ascending column order.
        for ((u, a), c) in counts {
            let row = user_ids.binary_search(&u).expect("interned user");
            let col = artist_ids.binary_search(&a).expect("interned artist") as u32;
            rows[row].push((col, c));
        }
        PlaycountMatrix { user_ids, artist_ids, rows }
    }

    /// Serialize as TSV, row-major. Exact integer counts round-trip.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(PLAYCOUNTS_HEADER);
        out.push('\n');
        for (u, a, c) in self.iter_entries() {
            out.push_str(&format!("{}\t{}\t{}\n", self.user_ids[u], self.artist_id(a), c));
        }
        out
    }

    /// Parse the TSV written by [`PlaycountMatrix::to_tsv`].
    pub fn from_tsv(reader: impl BufRead) -> Result<PlaycountMatrix> {
        let mut counts: BTreeMap<(String, String), u32> = BTreeMap::new();
        let mut lines = reader.lines().enumerate();
        match lines.next() {
            None => return Err(Error::parse(1, "empty playcounts file")),
            Some((_, line)) => {
                let line = line?;
                if line != PLAYCOUNTS_HEADER {
                    return Err(Error::parse(1, format!("expected header `{PLAYCOUNTS_HEADER}`")));
                }
            }
        }
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line?;
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(
                    lineno,
                    format!("expected 3 tab-separated fields, found {}", fields.len()),
                ));
            }
            let count: u32 = fields[2]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("invalid count `{}`", fields[2])))?;
            if count == 0 {
                return Err(Error::parse(lineno, "count must be positive"));
            }
            let key = (fields[0].to_string(), fields[1].to_string());
            if counts.insert(key, count).is_some() {
                return Err(Error::parse(lineno, "duplicate (user, artist) entry"));
            }
        }
        Ok(PlaycountMatrix::from_counts(counts))
    }
}

/// Aggregate events to artist-level playcounts via the song catalog.
/// Events whose song is missing from the catalog are dropped and counted.
pub fn build_playcounts(log: &EventLog, catalog: &SongCatalog) -> (PlaycountMatrix, BuildStats) {
    let mut stats = BuildStats::default();
    let mut counts: BTreeMap<(String, String), u32> = BTreeMap::new();
    for ev in &log.events {
        match catalog.get(&ev.song_id) {
            Some(meta) => {
                stats.resolved_events += 1;
                *counts
                    .entry((ev.user_id.clone(), meta.artist_id.clone()))
                    .or_insert(0) += 1;
            }
            None => stats.dropped_events += 1,
        }
    }
    (PlaycountMatrix::from_counts(counts), stats)
}

/// Drop artists with fewer than `min_listeners` distinct listeners, then
/// users left with no entries, and re-intern indices densely.
pub fn filter_min_listeners(m: &PlaycountMatrix, min_listeners: u32) -> Result<PlaycountMatrix> {
    if min_listeners < 1 {
        return Err(Error::data("min_listeners must be ≥ 1"));
    }
    let listeners = m.listeners_per_artist();
    let mut counts: BTreeMap<(String, String), u32> = BTreeMap::new();
    for (u, a, c) in m.iter_entries() {
        if listeners[a as usize] >= min_listeners {
            counts.insert((m.user_id(u).to_string(), m.artist_id(a).to_string()), c);
        }
    }
    if counts.is_empty() {
        return Err(Error::data("catalog empty after filtering"));
    }
    Ok(PlaycountMatrix::from_counts(counts))
}
