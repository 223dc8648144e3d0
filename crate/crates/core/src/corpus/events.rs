//! Line-oriented parsers for the two raw inputs: listening events and the
//! song catalog. Both are strict TSV with a fixed header; parse errors
//! carry the 1-based file line number (the header is line 1).

use std::collections::HashMap;
use std::io::BufRead;

use crate::{Error, Result};

pub const EVENTS_HEADER: &str = "user_id\tsong_id\ttimestamp\tlistened_duration";
pub const SONGS_HEADER: &str = "song_id\tartist_id\talbum_id\tyear\tduration\tgenres\tstyles\tclasses";

/// One play of one song. `listened_duration` is -1 when the source did not
/// record how long the user actually listened.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListeningEvent {
    pub user_id: String,
    pub song_id: String,
    pub timestamp: i64,
    pub listened_duration: i64,
}

#[derive(Debug, Clone, Default)]
pub struct EventLog {
    pub events: Vec<ListeningEvent>,
}

/// Song metadata. Tag lists are kept sorted and deduplicated so they
/// behave as sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SongMeta {
    pub artist_id: String,
    pub album_id: String,
    pub year: Option<i32>,
    pub duration: Option<u32>,
    pub genres: Vec<String>,
    pub styles: Vec<String>,
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct SongCatalog {
    songs: HashMap<String, SongMeta>,
}

impl SongCatalog {
    pub fn get(&self, song_id: &str) -> Option<&SongMeta> {
        self.songs.get(song_id)
    }

    pub fn len(&self) -> usize {
        self.songs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.songs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &SongMeta)> {
        self.songs.iter()
    }
}

/// Parse the events TSV. Empty input yields an empty log; any content must
/// start with the exact header. Input order is preserved.
pub fn parse_events(reader: impl BufRead) -> Result<EventLog> {
    let mut events = Vec::new();
    let mut lines = reader.lines().enumerate();

    match lines.next() {
        None => return Ok(EventLog { events }),
        Some((_, line)) => {
            let line = line?;
            if line != EVENTS_HEADER {
                return Err(Error::parse(1, format!("expected header `{EVENTS_HEADER}`")));
            }
        }
    }

    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                lineno,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        let user_id = fields[0];
        let song_id = fields[1];
        if user_id.is_empty() {
            return Err(Error::parse(lineno, "empty user_id"));
        }
        if song_id.is_empty() {
            return Err(Error::parse(lineno, "empty song_id"));
        }
        let timestamp: i64 = fields[2]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("invalid timestamp `{}`", fields[2])))?;
        if timestamp < 0 {
            return Err(Error::parse(lineno, format!("negative timestamp {timestamp}")));
        }
        let listened_duration: i64 = fields[3].parse().map_err(|_| {
            Error::parse(lineno, format!("invalid listened_duration `{}`", fields[3]))
        })?;
        if listened_duration < -1 {
            return Err(Error::parse(
                lineno,
                format!("listened_duration must be ≥ -1, found {listened_duration}"),
            ));
        }
        events.push(ListeningEvent {
            user_id: user_id.to_string(),
            song_id: song_id.to_string(),
            timestamp,
            listened_duration,
        });
    }
    Ok(EventLog { events })
}

/// Parse the song catalog TSV. Tag columns hold `|`-separated lists;
/// empty `year` or `duration` means unknown.
pub fn parse_songs(reader: impl BufRead) -> Result<SongCatalog> {
    let mut songs = HashMap::new();
    let mut lines = reader.lines().enumerate();

    match lines.next() {
        None => return Ok(SongCatalog { songs }),
        Some((_, line)) => {
            let line = line?;
            if line != SONGS_HEADER {
                return Err(Error::parse(1, format!("expected header `{SONGS_HEADER}`")));
            }
        }
    }

    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 8 {
            return Err(Error::parse(
                lineno,
                format!("expected 8 tab-separated fields, found {}", fields.len()),
            ));
        }
        let song_id = fields[0];
        if song_id.is_empty() {
            return Err(Error::parse(lineno, "empty song_id"));
        }
        if fields[1].is_empty() {
            return Err(Error::parse(lineno, "empty artist_id"));
        }
        let year = if fields[3].is_empty() {
            None
        } else {
            Some(fields[3].parse::<i32>().map_err(|_| {
                Error::parse(lineno, format!("invalid year `{}`", fields[3]))
            })?)
        };
        let duration = if fields[4].is_empty() {
            None
        } else {
            let d: u32 = fields[4].parse().map_err(|_| {
                Error::parse(lineno, format!("invalid duration `{}`", fields[4]))
            })?;
            if d == 0 {
                return Err(Error::parse(lineno, "duration must be > 0 when known"));
            }
            Some(d)
        };
        let meta = SongMeta {
            artist_id: fields[1].to_string(),
            album_id: fields[2].to_string(),
            year,
            duration,
            genres: parse_tags(fields[5]),
            styles: parse_tags(fields[6]),
            classes: parse_tags(fields[7]),
        };
        if songs.insert(song_id.to_string(), meta).is_some() {
            return Err(Error::parse(lineno, format!("duplicate song_id `{song_id}`")));
        }
    }
    Ok(SongCatalog { songs })
}

fn parse_tags(field: &str) -> Vec<String> {
    let mut tags: Vec<String> = field
        .split('|')
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect();
    tags.sort();
    tags.dedup();
    tags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(text: &str) -> Result<EventLog> {
        parse_events(text.as_bytes())
    }

    #[test]
    fn direct_field_mapping() {
        let log = ev("user_id\tsong_id\ttimestamp\tlistened_duration\nu1\ts9\t100\t-1\n").unwrap();
        assert_eq!(
            log.events,
            vec![ListeningEvent {
                user_id: "u1".into(),
                song_id: "s9".into(),
                timestamp: 100,
                listened_duration: -1,
            }]
        );
    }

    #[test]
    fn non_numeric_timestamp_is_a_parse_error() {
        let err = ev("user_id\tsong_id\ttimestamp\tlistened_duration\nu1\ts9\tabc\t-1\n")
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "got {err}");
    }

    #[test]
    fn error_names_the_malformed_line() {
        // 3-line file: header, good line, bad line at file line 3... and a
        // variant with the bad line at file line 2.
        let err = ev("user_id\tsong_id\ttimestamp\tlistened_duration\nu1\ts1\tbroken\t-1\nu1\ts2\t5\t-1\n")
            .unwrap_err();
        assert_eq!(err.to_string(), "line 2: invalid timestamp `broken`");
        let err = ev("user_id\tsong_id\ttimestamp\tlistened_duration\nu1\ts1\t5\t-1\nu1\ts2\t\n")
            .unwrap_err();
        assert!(err.to_string().starts_with("line 3:"), "got {err}");
    }

    #[test]
    fn empty_file_is_an_empty_log() {
        assert!(ev("").unwrap().events.is_empty());
    }

    #[test]
    fn header_only_is_an_empty_log() {
        assert!(ev("user_id\tsong_id\ttimestamp\tlistened_duration\n").unwrap().events.is_empty());
    }

    #[test]
    fn wrong_header_is_rejected_at_line_1() {
        let err = ev("user\tsong\tts\tdur\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn negative_timestamp_rejected() {
        let err = ev("user_id\tsong_id\ttimestamp\tlistened_duration\nu1\ts1\t-4\t-1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn input_order_preserved() {
        let log = ev("user_id\tsong_id\ttimestamp\tlistened_duration\nu1\ts2\t50\t10\nu1\ts1\t20\t10\n")
            .unwrap();
        assert_eq!(log.events[0].song_id, "s2");
        assert_eq!(log.events[1].song_id, "s1");
    }

    #[test]
    fn songs_parse_tags_years_and_durations() {
        let cat = parse_songs(
            format!("{SONGS_HEADER}\ns1\ta1\talb1\t1994\t240\trock|pop\tgrunge\tclassic\ns2\ta1\talb1\t\t\t\t\t\n").as_bytes(),
        )
        .unwrap();
        let s1 = cat.get("s1").unwrap();
        assert_eq!(s1.artist_id, "a1");
        assert_eq!(s1.year, Some(1994));
        assert_eq!(s1.duration, Some(240));
        assert_eq!(s1.genres, vec!["pop".to_string(), "rock".to_string()]);
        assert_eq!(s1.styles, vec!["grunge".to_string()]);
        let s2 = cat.get("s2").unwrap();
        assert_eq!(s2.year, None);
        assert_eq!(s2.duration, None);
        assert!(s2.genres.is_empty());
    }

    #[test]
    fn duplicate_song_id_rejected() {
        let err = parse_songs(
            format!("{SONGS_HEADER}\ns1\ta1\tal\t\t\t\t\t\ns1\ta2\tal\t\t\t\t\t\n").as_bytes(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn zero_duration_rejected() {
        let err = parse_songs(format!("{SONGS_HEADER}\ns1\ta1\tal\t\t0\t\t\t\n").as_bytes())
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn tag_sets_are_sorted_and_deduplicated() {
        let cat = parse_songs(format!("{SONGS_HEADER}\ns1\ta1\tal\t\t\tb|a|b\t\t\n").as_bytes())
            .unwrap();
        assert_eq!(cat.get("s1").unwrap().genres, vec!["a".to_string(), "b".to_string()]);
    }
}
