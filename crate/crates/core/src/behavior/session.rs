//! Session segmentation and per-session feature extraction.

use std::collections::HashSet;

use super::{effective_listened, first_tag, BehaviorParams, ExploreBy, PercentileTables};
use crate::corpus::{ListeningEvent, SongCatalog};
use crate::{Error, Result};

/// A maximal run of one user's events where each event starts no more
/// than the session gap after the previous event ended.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub events: Vec<ListeningEvent>,
    /// Timestamp of the first event.
    pub start: i64,
    /// End of the last event (its timestamp plus effective listened time).
    pub end: i64,
}

/// Per-session feature names, in the order `session_features` emits them.
pub const SESSION_FEATURE_NAMES: [&str; 19] = [
    "repeated_artist",
    "repeated_song",
    "repeated_album",
    "repeated_genre",
    "repeated_style",
    "repeated_class",
    "repeated_year",
    "exploratoryness",
    "complete_fraction",
    "skip_fraction",
    "inactive_fraction",
    "listened_fraction",
    "change_artist",
    "change_album",
    "change_genre",
    "change_style",
    "change_class",
    "popularity_percentile",
    "mainstreamness",
];

/// Split one user's events into sessions. Events are ordered by timestamp
/// first (stable, so equal timestamps keep their input order). A new
/// session starts when the gap from the previous event's end to the next
/// event's start exceeds the configured gap; a gap of exactly the limit
/// continues the session. Songs missing from the catalog get an unknown
/// duration here; feature extraction is where they are rejected.
pub fn segment_sessions(
    events: &[ListeningEvent],
    catalog: &SongCatalog,
    params: &BehaviorParams,
) -> Vec<Session> {
    let mut ordered: Vec<&ListeningEvent> = events.iter().collect();
    ordered.sort_by_key(|ev| ev.timestamp);

    let mut sessions: Vec<Session> = Vec::new();
    for ev in ordered {
        let end = ev.timestamp + effective_listened(ev.listened_duration, catalog.get(&ev.song_id));
        match sessions.last_mut() {
            Some(open) if ev.timestamp - open.end <= params.session_gap_secs => {
                open.events.push(ev.clone());
                open.end = end;
            }
            _ => sessions.push(Session { events: vec![ev.clone()], start: ev.timestamp, end }),
        }
    }
    sessions
}

/// The 19 features of one session, in `SESSION_FEATURE_NAMES` order.
/// Errors if any event references a song the catalog does not know.
pub fn session_features(
    session: &Session,
    catalog: &SongCatalog,
    tables: &PercentileTables,
    params: &BehaviorParams,
) -> Result<Vec<f64>> {
    let n = session.events.len();
    if n == 0 {
        return Err(Error::data("session has no events"));
    }
    let nf = n as f64;

    // Attribute tuple per event; tag-valued attributes collapse to their
    // lexicographically-first tag.
    struct Attrs<'a> {
        artist: &'a str,
        song: &'a str,
        album: &'a str,
        genre: Option<&'a str>,
        style: Option<&'a str>,
        class: Option<&'a str>,
        year: Option<i32>,
    }
    let mut attrs: Vec<Attrs> = Vec::with_capacity(n);
    for ev in &session.events {
        let meta = catalog
            .get(&ev.song_id)
            .ok_or_else(|| Error::data(format!("session references unknown song `{}`", ev.song_id)))?;
        attrs.push(Attrs {
            artist: &meta.artist_id,
            song: &ev.song_id,
            album: &meta.album_id,
            genre: first_tag(&meta.genres),
            style: first_tag(&meta.styles),
            class: first_tag(&meta.classes),
            year: meta.year,
        });
    }

    fn repeated<T: std::hash::Hash + Eq>(values: impl Iterator<Item = T>, n: f64) -> f64 {
        let unique: HashSet<T> = values.collect();
        1.0 - unique.len() as f64 / n
    }
    fn changes<T: PartialEq>(values: &[T]) -> f64 {
        if values.len() < 2 {
            return 0.0;
        }
        let flips = values.windows(2).filter(|w| w[0] != w[1]).count();
        flips as f64 / (values.len() - 1) as f64
    }

    let artists: Vec<&str> = attrs.iter().map(|a| a.artist).collect();
    let albums: Vec<&str> = attrs.iter().map(|a| a.album).collect();
    let genres: Vec<Option<&str>> = attrs.iter().map(|a| a.genre).collect();
    let styles: Vec<Option<&str>> = attrs.iter().map(|a| a.style).collect();
    let classes: Vec<Option<&str>> = attrs.iter().map(|a| a.class).collect();

    let explore_unique = match params.explore_by {
        ExploreBy::Artist => artists.iter().collect::<HashSet<_>>().len(),
        ExploreBy::Song => attrs.iter().map(|a| a.song).collect::<HashSet<_>>().len(),
    };

    let mut complete = 0usize;
    let mut skipped = 0usize;
    let mut active: i64 = 0;
    let mut listened_fraction_sum = 0.0;
    for ev in &session.events {
        let meta = catalog.get(&ev.song_id);
        let eff = effective_listened(ev.listened_duration, meta);
        active += eff;
        match meta.and_then(|m| m.duration) {
            Some(d) => {
                if eff as f64 >= params.complete_fraction * f64::from(d) {
                    complete += 1;
                }
                listened_fraction_sum += eff as f64 / f64::from(d);
            }
            None => {
                // No duration to compare against: an unreported listened
                // time is taken as a complete, full-length play.
                if ev.listened_duration < 0 {
                    complete += 1;
                }
                listened_fraction_sum += 1.0;
            }
        }
        if (0..params.skip_threshold_secs).contains(&ev.listened_duration) {
            skipped += 1;
        }
    }

    let span = session.end - session.start;
    let inactive = if span > 0 {
        ((span - active) as f64 / span as f64).max(0.0)
    } else {
        0.0
    };

    let pop_mean = attrs.iter().map(|a| tables.popularity(a.artist)).sum::<f64>() / nf;
    let mainstream_mean = attrs.iter().map(|a| tables.mainstreamness(a.artist)).sum::<f64>() / nf;

    Ok(vec![
        repeated(artists.iter(), nf),
        repeated(attrs.iter().map(|a| a.song), nf),
        repeated(albums.iter(), nf),
        repeated(genres.iter(), nf),
        repeated(styles.iter(), nf),
        repeated(classes.iter(), nf),
        repeated(attrs.iter().map(|a| a.year), nf),
        explore_unique as f64 / nf,
        complete as f64 / nf,
        skipped as f64 / nf,
        inactive,
        listened_fraction_sum / nf,
        changes(&artists),
        changes(&albums),
        changes(&genres),
        changes(&styles),
        changes(&classes),
        pop_mean,
        mainstream_mean,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_songs, SONGS_HEADER};
    use approx::assert_relative_eq;

    fn ev(song: &str, ts: i64, listened: i64) -> ListeningEvent {
        ListeningEvent {
            user_id: "u".into(),
            song_id: song.into(),
            timestamp: ts,
            listened_duration: listened,
        }
    }

    fn catalog_one(duration: &str) -> SongCatalog {
        let text = format!("{SONGS_HEADER}\ns1\ta1\talb1\t\t{duration}\t\t\t");
        parse_songs(text.as_bytes()).unwrap()
    }

    #[test]
    fn gap_of_exactly_the_limit_continues_the_session() {
        let catalog = catalog_one("300");
        let params = BehaviorParams::default();
        // e1 ends at 0 + 300; gap to 1200 is exactly 900.
        let events = vec![ev("s1", 0, 300), ev("s1", 1200, 100)];
        let sessions = segment_sessions(&events, &catalog, &params);
        assert_eq!(sessions.len(), 1);
        assert_eq!(sessions[0].start, 0);
        assert_eq!(sessions[0].end, 1300);

        let events = vec![ev("s1", 0, 300), ev("s1", 1201, 100)];
        let sessions = segment_sessions(&events, &catalog, &params);
        assert_eq!(sessions.len(), 2);
        assert_eq!(sessions[1].start, 1201);
    }

    #[test]
    fn unknown_listened_time_counts_as_full_duration() {
        let catalog = catalog_one("300");
        let params = BehaviorParams::default();
        // e1 listened unknown → end 300; 1200 − 300 = 900 → same session.
        let events = vec![ev("s1", 0, -1), ev("s1", 1200, 10)];
        assert_eq!(segment_sessions(&events, &catalog, &params).len(), 1);
        // With listened = 100 the gap is 1100 → split.
        let events = vec![ev("s1", 0, 100), ev("s1", 1200, 10)];
        assert_eq!(segment_sessions(&events, &catalog, &params).len(), 2);
    }

    #[test]
    fn segmentation_sorts_by_timestamp_first() {
        let catalog = catalog_one("60");
        let params = BehaviorParams::default();
        let events = vec![ev("s1", 5000, 60), ev("s1", 0, 60), ev("s1", 5100, 60)];
        let sessions = segment_sessions(&events, &catalog, &params);
        assert_eq!(sessions.len(), 2);
        assert_eq!(sessions[0].events.len(), 1);
        assert_eq!(sessions[1].events.len(), 2);
    }

    #[test]
    fn segmentation_matches_linear_scan_oracle() {
        use rand::Rng;
        let catalog = catalog_one("200");
        let params = BehaviorParams::default();
        let mut rng = crate::rng::rng_from(11);
        let mut ts = 0i64;
        let mut events = Vec::new();
        for _ in 0..100 {
            events.push(ev("s1", ts, rng.random_range(0..250)));
            ts += rng.random_range(0..2000);
        }
        let sessions = segment_sessions(&events, &catalog, &params);

        // Oracle: walk the sorted list, cutting when gap > limit.
        let mut cuts = 1;
        for w in events.windows(2) {
            let end = w[0].timestamp + w[0].listened_duration.min(200);
            if w[1].timestamp - end > 900 {
                cuts += 1;
            }
        }
        assert_eq!(sessions.len(), cuts);
        let total: usize = sessions.iter().map(|s| s.events.len()).sum();
        assert_eq!(total, events.len());
        // Sessions tile the event list in order.
        let flat: Vec<i64> =
            sessions.iter().flat_map(|s| s.events.iter().map(|e| e.timestamp)).collect();
        let mut sorted: Vec<i64> = events.iter().map(|e| e.timestamp).collect();
        sorted.sort_unstable();
        assert_eq!(flat, sorted);
    }

    fn six_event_fixture() -> (SongCatalog, Session, PercentileTables) {
        let text = format!(
            "{SONGS_HEADER}\n\
             s1\tA\tX\t1991\t200\trock\talt\tc1\n\
             s2\tA\tX\t1992\t100\tpop|rock\talt\tc1\n\
             s3\tB\tY\t1991\t300\trock\t\tc2\n\
             s4\tB\tZ\t2005\t240\tjazz\tsmooth\tc2"
        );
        let catalog = parse_songs(text.as_bytes()).unwrap();
        let events = vec![
            ev("s1", 1000, 200),
            ev("s2", 1260, 25),
            ev("s1", 1300, 150),
            ev("s3", 1500, -1),
            ev("s4", 2000, 230),
            ev("s3", 2400, 60),
        ];
        let session = Session { events, start: 1000, end: 2460 };
        let mut tables = PercentileTables::default();
        tables.popularity.insert("A".into(), 0.6);
        tables.popularity.insert("B".into(), 1.0);
        tables.mainstreamness.insert("A".into(), 0.5);
        tables.mainstreamness.insert("B".into(), 0.9);
        (catalog, session, tables)
    }

    #[test]
    fn six_event_session_matches_hand_computation() {
        let (catalog, session, tables) = six_event_fixture();
        let params = BehaviorParams::default();
        // The session tiles contiguously under the default gap.
        let segmented = segment_sessions(&session.events, &catalog, &params);
        assert_eq!(segmented.len(), 1);
        assert_eq!(segmented[0], session);

        let f = session_features(&session, &catalog, &tables, &params).unwrap();
        assert_eq!(f.len(), SESSION_FEATURE_NAMES.len());
        let expect = [
            ("repeated_artist", 1.0 - 2.0 / 6.0),
            ("repeated_song", 1.0 - 4.0 / 6.0),
            ("repeated_album", 1.0 - 3.0 / 6.0),
            // lex-first genres: rock, pop, rock, rock, jazz, rock
            ("repeated_genre", 1.0 - 3.0 / 6.0),
            // styles: alt, alt, alt, none, smooth, none
            ("repeated_style", 1.0 - 3.0 / 6.0),
            ("repeated_class", 1.0 - 2.0 / 6.0),
            // years: 1991, 1992, 1991, 1991, 2005, 1991
            ("repeated_year", 1.0 - 3.0 / 6.0),
            ("exploratoryness", 2.0 / 6.0),
            // complete (≥ 0.95·dur): 200/200, 300/300 (unknown), 230/240
            ("complete_fraction", 3.0 / 6.0),
            ("skip_fraction", 1.0 / 6.0),
            // span 1460, active 200+25+150+300+230+60 = 965
            ("inactive_fraction", 495.0 / 1460.0),
            (
                "listened_fraction",
                (1.0 + 0.25 + 0.75 + 1.0 + 230.0 / 240.0 + 0.2) / 6.0,
            ),
            ("change_artist", 1.0 / 5.0),
            ("change_album", 3.0 / 5.0),
            ("change_genre", 4.0 / 5.0),
            ("change_style", 3.0 / 5.0),
            ("change_class", 1.0 / 5.0),
            ("popularity_percentile", 0.8),
            ("mainstreamness", 0.7),
        ];
        for (i, (name, want)) in expect.iter().enumerate() {
            assert_eq!(SESSION_FEATURE_NAMES[i], *name);
            assert_relative_eq!(f[i], *want, max_relative = 1e-12);
        }
    }

    #[test]
    fn single_artist_session_has_max_repetition_and_no_changes() {
        let text = format!(
            "{SONGS_HEADER}\n\
             s1\ta1\talb\t1990\t100\tg\tst\tc\n\
             s2\ta1\talb\t1990\t100\tg\tst\tc"
        );
        let catalog = parse_songs(text.as_bytes()).unwrap();
        let params = BehaviorParams::default();
        let tables = PercentileTables::default();
        for n in [1usize, 2, 5] {
            let events: Vec<_> = (0..n).map(|i| ev(if i % 2 == 0 { "s1" } else { "s2" }, i as i64 * 120, 100)).collect();
            let sessions = segment_sessions(&events, &catalog, &params);
            assert_eq!(sessions.len(), 1);
            let f = session_features(&sessions[0], &catalog, &tables, &params).unwrap();
            assert_relative_eq!(f[0], (n as f64 - 1.0) / n as f64); // repeated_artist
            assert_eq!(f[12], 0.0); // change_artist
            assert_eq!(f[7], 1.0 / n as f64); // exploratoryness
        }
    }

    #[test]
    fn all_distinct_artists_session_has_no_repetition_and_full_changes() {
        let mut text = String::from(SONGS_HEADER);
        for i in 0..5 {
            text.push_str(&format!("\ns{i}\ta{i}\talb{i}\t{}\t100\tg{i}\t\t", 1990 + i));
        }
        let catalog = parse_songs(text.as_bytes()).unwrap();
        let params = BehaviorParams::default();
        let tables = PercentileTables::default();
        let events: Vec<_> = (0..5).map(|i| ev(&format!("s{i}"), i as i64 * 120, 100)).collect();
        let sessions = segment_sessions(&events, &catalog, &params);
        assert_eq!(sessions.len(), 1);
        let f = session_features(&sessions[0], &catalog, &tables, &params).unwrap();
        assert_eq!(f[0], 0.0); // repeated_artist
        assert_eq!(f[1], 0.0); // repeated_song
        assert_eq!(f[7], 1.0); // exploratoryness
        assert_eq!(f[12], 1.0); // change_artist
        assert_eq!(f[14], 1.0); // change_genre
    }

    #[test]
    fn singleton_session_reports_zero_changes_and_zero_inactive() {
        let catalog = catalog_one("300");
        let params = BehaviorParams::default();
        let tables = PercentileTables::default();
        let sessions = segment_sessions(&[ev("s1", 50, 120)], &catalog, &params);
        let f = session_features(&sessions[0], &catalog, &tables, &params).unwrap();
        for idx in 12..17 {
            assert_eq!(f[idx], 0.0, "{}", SESSION_FEATURE_NAMES[idx]);
        }
        // span 120, active 120
        assert_eq!(f[10], 0.0);
        assert_eq!(f[11], 0.4); // 120/300
    }

    #[test]
    fn exploratoryness_can_count_songs_instead_of_artists() {
        let text = format!(
            "{SONGS_HEADER}\ns1\ta1\talb\t\t100\t\t\t\ns2\ta1\talb\t\t100\t\t\t"
        );
        let catalog = parse_songs(text.as_bytes()).unwrap();
        let tables = PercentileTables::default();
        let events = vec![ev("s1", 0, 100), ev("s2", 150, 100)];
        let mut params = BehaviorParams::default();
        let sessions = segment_sessions(&events, &catalog, &params);
        let by_artist = session_features(&sessions[0], &catalog, &tables, &params).unwrap();
        assert_eq!(by_artist[7], 0.5);
        params.explore_by = ExploreBy::Song;
        let by_song = session_features(&sessions[0], &catalog, &tables, &params).unwrap();
        assert_eq!(by_song[7], 1.0);
    }

    #[test]
    fn unknown_song_in_session_is_rejected() {
        let catalog = catalog_one("300");
        let params = BehaviorParams::default();
        let tables = PercentileTables::default();
        let session = Session { events: vec![ev("ghost", 0, 10)], start: 0, end: 10 };
        let err = session_features(&session, &catalog, &tables, &params).unwrap_err();
        assert!(err.to_string().contains("unknown song `ghost`"), "{err}");
    }

    #[test]
    fn overlapping_events_floor_inactive_time_at_zero() {
        let catalog = catalog_one("300");
        let params = BehaviorParams::default();
        let tables = PercentileTables::default();
        // Second play starts before the first ends: active 600 > span 400.
        let events = vec![ev("s1", 0, 300), ev("s1", 100, 300)];
        let sessions = segment_sessions(&events, &catalog, &params);
        assert_eq!(sessions.len(), 1);
        let f = session_features(&sessions[0], &catalog, &tables, &params).unwrap();
        assert_eq!(f[10], 0.0);
    }
}
