//! Artifact formatting: JSON with sorted keys, and the CSV/TSV tables
//! the pipeline persists. Everything returns strings; writing files is
//! the caller's job. Floats print in shortest round-trip form so equal
//! values always produce equal bytes.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::corpus::{EventLog, SongCatalog};
use crate::hybrid::{FusionWeights, SelectShares};
use crate::metrics::{MetricReport, ALL_METRICS};
use crate::perfreg::RegressionModel;
use crate::recsys::RankedList;
use crate::Result;

/// Serialize with sorted object keys at every level and a trailing
/// newline. Floats round-trip bit-exactly through shortest-form decimal.
pub fn to_sorted_json_string<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

/// Aggregate table: one row per system, the 14 metrics in report column
/// order. A metric every user skipped leaves an empty cell.
pub fn report_csv(reports: &[MetricReport]) -> String {
    let mut out = String::from("system");
    for m in ALL_METRICS {
        out.push(',');
        out.push_str(m.as_str());
    }
    out.push('\n');
    for r in reports {
        out.push_str(&r.system);
        for m in ALL_METRICS {
            out.push(',');
            if let Some(&v) = r.aggregate.get(&m) {
                out.push_str(&fmt(v));
            }
        }
        out.push('\n');
    }
    out
}

/// Cell annotations for the aggregate table: `best` marks the best value
/// in a metric column across all systems (orientation-aware), `beats`
/// marks a non-baseline system improving on both POP and SVD-I. Both
/// combine as `best+beats`.
pub fn annotations_csv(reports: &[MetricReport]) -> String {
    let find = |name: &str| reports.iter().find(|r| r.system == name);
    let pop = find("POP");
    let svd = find("SVD-I");

    let mut out = String::from("system");
    for m in ALL_METRICS {
        out.push(',');
        out.push_str(m.as_str());
    }
    out.push('\n');

    for r in reports {
        out.push_str(&r.system);
        for m in ALL_METRICS {
            out.push(',');
            let Some(&v) = r.aggregate.get(&m) else { continue };
            let better = |a: f64, b: f64| if m.higher_is_better() { a > b } else { a < b };

            let best = reports
                .iter()
                .filter_map(|o| o.aggregate.get(&m))
                .all(|&o| !better(o, v));
            let is_baseline = matches!(r.system.as_str(), "RANDOM" | "POP" | "SVD-I");
            let beats = !is_baseline
                && match (pop.and_then(|p| p.aggregate.get(&m)), svd.and_then(|s| s.aggregate.get(&m))) {
                    (Some(&p), Some(&s)) => better(v, p) && better(v, s),
                    _ => false,
                };
            match (best, beats) {
                (true, true) => out.push_str("best+beats"),
                (true, false) => out.push_str("best"),
                (false, true) => out.push_str("beats"),
                (false, false) => {}
            }
        }
        out.push('\n');
    }
    out
}

/// Long-form per-user values for one system.
pub fn per_user_csv(report: &MetricReport, user_ids: &[String]) -> String {
    let mut out = String::from("user_id,metric,value\n");
    for (&u, values) in &report.per_user {
        for (m, &v) in values {
            out.push_str(&user_ids[u]);
            out.push(',');
            out.push_str(m.as_str());
            out.push(',');
            out.push_str(&fmt(v));
            out.push('\n');
        }
    }
    out
}

/// SELECT routing table: per target metric, share of users sent to each
/// component.
pub fn select_shares_csv(shares: &[SelectShares]) -> String {
    let mut out = String::from("system,svd_users,pop_users,svd_pct,pop_pct\n");
    for s in shares {
        out.push_str(&format!(
            "SELECT-{},{},{},{},{}\n",
            s.metric,
            s.svd_users,
            s.pop_users,
            fmt(s.svd_pct()),
            fmt(s.pop_pct()),
        ));
    }
    out
}

/// Per-user fusion weights of one FUSE run.
pub fn weights_tsv(users: &[usize], weights: &[FusionWeights], user_ids: &[String]) -> String {
    let mut out = String::from("user_id\tw_s\tw_p\n");
    for (&u, w) in users.iter().zip(weights) {
        out.push_str(&format!("{}\t{}\t{}\n", user_ids[u], fmt(w.w_s), fmt(w.w_p)));
    }
    out
}

/// R² table: rows = metrics, columns = systems. The first two value
/// columns are in-sample; the cross-validated pair follows.
pub fn r2_table_csv(models: &[RegressionModel]) -> String {
    let mut systems: Vec<&str> = models.iter().map(|m| m.system.as_str()).collect();
    systems.sort_unstable();
    systems.dedup();

    let mut out = String::from("metric");
    for s in &systems {
        out.push_str(&format!(",{s}"));
    }
    for s in &systems {
        out.push_str(&format!(",{s}_cv"));
    }
    out.push('\n');

    let mut metrics: Vec<_> = models.iter().map(|m| m.metric).collect();
    metrics.dedup();
    for metric in metrics {
        out.push_str(metric.as_str());
        let cell = |pick: fn(&RegressionModel) -> f64, system: &str| {
            models
                .iter()
                .find(|m| m.metric == metric && m.system == system)
                .map(|m| fmt(pick(m)))
                .unwrap_or_default()
        };
        for s in &systems {
            out.push(',');
            out.push_str(&cell(|m| m.r2_train, s));
        }
        for s in &systems {
            out.push(',');
            out.push_str(&cell(|m| m.r2_cv, s));
        }
        out.push('\n');
    }
    out
}

/// Ranked lists, truncated to `k` rows per user. Lists without scores
/// leave the score column empty.
pub fn recommendations_tsv(
    lists: &[RankedList],
    user_ids: &[String],
    artist_ids: &[String],
    k: usize,
) -> String {
    let mut out = String::from("user_id\trank\tartist_id\tscore\n");
    for list in lists {
        for (pos, &a) in list.items.iter().take(k).enumerate() {
            out.push_str(&format!("{}\t{}\t{}\t", user_ids[list.user], pos + 1, artist_ids[a as usize]));
            if let Some(scores) = &list.scores {
                out.push_str(&fmt(scores[pos]));
            }
            out.push('\n');
        }
    }
    out
}

/// Per class tag: average plays per distinct listener and number of
/// distinct songs carrying the tag. Songs with several class tags count
/// under each; untagged songs fall under `untagged`.
pub fn class_summary_csv(log: &EventLog, catalog: &SongCatalog) -> String {
    const UNTAGGED: &str = "untagged";
    let mut songs_per_class: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (song_id, meta) in catalog.iter() {
        if meta.classes.is_empty() {
            songs_per_class.entry(UNTAGGED).or_default().insert(song_id);
        } else {
            for c in &meta.classes {
                songs_per_class.entry(c).or_default().insert(song_id);
            }
        }
    }

    let mut plays: BTreeMap<&str, u64> = BTreeMap::new();
    let mut listeners: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for ev in &log.events {
        let Some(meta) = catalog.get(&ev.song_id) else { continue };
        let classes: Vec<&str> = if meta.classes.is_empty() {
            vec![UNTAGGED]
        } else {
            meta.classes.iter().map(String::as_str).collect()
        };
        for c in classes {
            *plays.entry(c).or_insert(0) += 1;
            listeners.entry(c).or_default().insert(&ev.user_id);
        }
    }

    let mut out = String::from("class,avg_plays_per_listener,n_songs\n");
    for (class, songs) in &songs_per_class {
        let p = plays.get(class).copied().unwrap_or(0);
        let l = listeners.get(class).map(BTreeSet::len).unwrap_or(0);
        let avg = if l == 0 { 0.0 } else { p as f64 / l as f64 };
        out.push_str(&format!("{class},{},{}\n", fmt(avg), songs.len()));
    }
    out
}
