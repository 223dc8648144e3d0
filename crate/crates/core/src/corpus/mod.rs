//! Corpus ingestion: raw listening events and song metadata in, a filtered
//! user-artist playcount matrix and train/test/reg split out.

mod events;
mod matrix;
mod split;

pub use events::{
    parse_events, parse_songs, EventLog, ListeningEvent, SongCatalog, SongMeta, EVENTS_HEADER,
    SONGS_HEADER,
};
pub use matrix::{build_playcounts, filter_min_listeners, BuildStats, PlaycountMatrix};
pub use split::{make_split, parse_split, split_to_json, SplitPlan};
