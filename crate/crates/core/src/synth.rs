//! Synthetic listening-corpus generator. Artist popularity follows a
//! Zipf law; each user draws artists from a mixture of that global
//! popularity and one of a few taste components (popularity renormalized
//! over a component's artist group). Events are laid out in sessions
//! with realistic in-session and between-session gaps so the behavior
//! features have something to measure.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{mix, rng_from, substream_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_users: usize,
    pub n_artists: usize,
    pub n_genres: usize,
    /// Popularity skew; weight of the rank-r artist ∝ r^(−zipf_exponent).
    pub zipf_exponent: f64,
    /// Number of taste components users choose between.
    pub taste_dim: usize,
    /// Mixture weight on the user's taste component; 0 makes every user
    /// sample from pure global popularity.
    pub taste_weight: f64,
    /// Inclusive range of events per user.
    pub events_per_user: (usize, usize),
    pub songs_per_artist: usize,
    /// Inclusive range of events per listening session.
    pub session_len: (usize, usize),
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_users: 2_000,
            n_artists: 500,
            n_genres: 12,
            zipf_exponent: 1.1,
            taste_dim: 4,
            taste_weight: 0.72,
            events_per_user: (60, 180),
            songs_per_artist: 3,
            session_len: (3, 12),
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_artists == 0 || self.n_genres == 0 {
            return Err(Error::data("infeasible spec: users, artists and genres must be ≥ 1"));
        }
        if self.n_artists < self.n_genres {
            return Err(Error::data(format!(
                "infeasible spec: {} artists cannot cover {} genres",
                self.n_artists, self.n_genres
            )));
        }
        if self.zipf_exponent <= 0.0 {
            return Err(Error::data("infeasible spec: zipf exponent must be > 0"));
        }
        if self.taste_dim == 0 {
            return Err(Error::data("infeasible spec: taste_dim must be ≥ 1"));
        }
        if !(0.0..=1.0).contains(&self.taste_weight) {
            return Err(Error::data("infeasible spec: taste_weight must be in [0, 1]"));
        }
        if self.events_per_user.0 < 1 || self.events_per_user.0 > self.events_per_user.1 {
            return Err(Error::data(
                "infeasible spec: fewer events than users (each user needs at least one event)",
            ));
        }
        if self.songs_per_artist == 0 {
            return Err(Error::data("infeasible spec: songs_per_artist must be ≥ 1"));
        }
        if self.session_len.0 < 1 || self.session_len.0 > self.session_len.1 {
            return Err(Error::data("infeasible spec: empty session length range"));
        }
        Ok(())
    }
}

/// Cumulative weights for inverse-CDF sampling over a fixed artist set.
struct Sampler {
    artists: Vec<u32>,
    cumulative: Vec<f64>,
}

impl Sampler {
    fn new(artists: Vec<u32>, weight_of: impl Fn(u32) -> f64) -> Sampler {
        let mut cumulative = Vec::with_capacity(artists.len());
        let mut acc = 0.0;
        for &a in &artists {
            acc += weight_of(a);
            cumulative.push(acc);
        }
        Sampler { artists, cumulative }
    }

    fn draw(&self, rng: &mut impl Rng) -> u32 {
        let total = *self.cumulative.last().expect("sampler must not be empty");
        let x = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= x).min(self.artists.len() - 1);
        self.artists[idx]
    }
}

/// Generate `(events.tsv, songs.tsv)` contents. Byte-identical for equal
/// specs: the catalog is a pure function of the spec and each user's
/// history comes from a per-user substream of the seed.
pub fn synth_generate(spec: &SynthSpec) -> Result<(String, String)> {
    spec.validate()?;

    let zipf_weight = |a: u32| f64::from(a + 1).powf(-spec.zipf_exponent);

    // Catalog: artist index equals popularity rank; components interleave
    // across ranks so every taste group spans the popularity spectrum.
    let mut songs = String::from(crate::corpus::SONGS_HEADER);
    let n_classes = spec.n_genres.div_ceil(3).max(1);
    for a in 0..spec.n_artists {
        let genre = (a * 7 + 3) % spec.n_genres;
        for s in 0..spec.songs_per_artist {
            let song_id = format!("sng{a:04}_{s}");
            let album = format!("al{a:04}_{}", s / 4);
            let year = if (a + s) % 19 == 0 {
                String::new()
            } else {
                (1958 + (a * 13 + s * 5) % 65).to_string()
            };
            let duration = if (a * 3 + s) % 23 == 0 {
                String::new()
            } else {
                (90 + (a * 31 + s * 17) % 270).to_string()
            };
            let genres = if (a + s) % 11 == 0 {
                format!("gen{:02}|gen{:02}", genre, (genre + 5) % spec.n_genres)
            } else {
                format!("gen{genre:02}")
            };
            let style = format!("sty{:02}{}", genre, if a % 2 == 0 { "a" } else { "b" });
            let class = format!("cls{:02}", genre % n_classes);
            songs.push_str(&format!(
                "\n{song_id}\tart{a:04}\t{album}\t{year}\t{duration}\t{genres}\t{style}\t{class}"
            ));
        }
    }
    songs.push('\n');

    let global = Sampler::new((0..spec.n_artists as u32).collect(), zipf_weight);
    let components: Vec<Sampler> = (0..spec.taste_dim)
        .map(|c| {
            let members: Vec<u32> = (0..spec.n_artists as u32)
                .filter(|a| (*a as usize) % spec.taste_dim == c)
                .collect();
            Sampler::new(members, zipf_weight)
        })
        .collect();

    let user_stream = substream_seed(spec.seed, "synth/user");
    let mut events = String::from(crate::corpus::EVENTS_HEADER);
    for u in 0..spec.n_users {
        let mut rng = rng_from(mix(user_stream, u as u64));
        let component = &components[rng.random_range(0..spec.taste_dim)];
        let n_events = rng.random_range(spec.events_per_user.0..=spec.events_per_user.1);

        // Histories start at distinct points over a two-year window so
        // hour and weekday distributions vary between users.
        let mut t: i64 = 1_500_000_000 + rng.random_range(0..63_072_000);
        let mut left_in_session = 0usize;
        for _ in 0..n_events {
            if left_in_session == 0 {
                left_in_session = rng.random_range(spec.session_len.0..=spec.session_len.1);
                t += rng.random_range(3_600..129_600); // 1h..36h pause
            }
            left_in_session -= 1;

            let artist = if rng.random::<f64>() < spec.taste_weight {
                component.draw(&mut rng)
            } else {
                global.draw(&mut rng)
            };
            let song = rng.random_range(0..spec.songs_per_artist);
            // Duration mirrors the catalog formula; unknown stays unknown.
            let a = artist as usize;
            let known_duration = (a * 3 + song) % 23 != 0;
            let duration = 90 + (a * 31 + song * 17) as i64 % 270;

            let roll = rng.random::<f64>();
            let listened: i64 = if roll < 0.10 {
                -1
            } else if roll < 0.20 {
                rng.random_range(0..30)
            } else if !known_duration {
                rng.random_range(30..300)
            } else if roll < 0.40 {
                (duration as f64 * rng.random_range(0.30..0.95)) as i64
            } else {
                duration
            };
            events.push_str(&format!("\nusr{u:05}\tsng{artist:04}_{song}\t{t}\t{listened}"));

            let advance = if listened >= 0 { listened } else { duration };
            t += advance + rng.random_range(0..120);
        }
    }
    events.push('\n');
    Ok((events, songs))
}
