//! Ranked-list production. All three systems rank the full candidate
//! catalog minus the user's excluded (visible training) artists; ties
//! break by ascending artist index so output is total-ordered.

use rand::seq::SliceRandom;

use crate::recsys::FactorModel;
use crate::rng::{mix, rng_from, substream_seed};
use crate::corpus::PlaycountMatrix;

/// An ordered recommendation list for one user, best first. Scores are
/// present for score-based rankers and non-increasing when present.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub user: usize,
    pub items: Vec<u32>,
    pub scores: Option<Vec<f64>>,
}

/// Membership bitmap for an exclusion set over the artist columns.
fn exclusion_mask(n_artists: usize, exclude: &[u32]) -> Vec<bool> {
    let mut mask = vec![false; n_artists];
    for &a in exclude {
        mask[a as usize] = true;
    }
    mask
}

/// Top-k artists by descending x_u·y_i. Shorter than k when fewer
/// artists are rankable after exclusion.
pub fn recommend_factors(
    model: &FactorModel,
    user: usize,
    k: usize,
    exclude: &[u32],
) -> RankedList {
    assert!(user < model.n_users, "user {user} not in model");
    assert!(k >= 1, "k must be ≥ 1");
    let mask = exclusion_mask(model.n_items, exclude);
    let mut scored: Vec<(u32, f64)> = (0..model.n_items as u32)
        .filter(|&i| !mask[i as usize])
        .map(|i| (i, model.score(user, i as usize)))
        .collect();
    // Descending score, ties by ascending artist index. total_cmp is safe:
    // trained factors are finite by construction.
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    RankedList {
        user,
        items: scored.iter().map(|&(i, _)| i).collect(),
        scores: Some(scored.iter().map(|&(_, s)| s).collect()),
    }
}

/// Which column statistic defines popularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopBy {
    Playcounts,
    Listeners,
}

/// Global popularity ranker. The base ordering is computed once from the
/// training matrix and is identical for every user; only the exclusion
/// filter is per-user.
#[derive(Debug, Clone)]
pub struct PopModel {
    pub by: PopBy,
    scores: Vec<f64>,
    order: Vec<u32>,
}

impl PopModel {
    pub fn from_matrix(train: &PlaycountMatrix, by: PopBy) -> PopModel {
        let scores: Vec<f64> = match by {
            PopBy::Playcounts => train.plays_per_artist().iter().map(|&c| c as f64).collect(),
            PopBy::Listeners => train.listeners_per_artist().iter().map(|&c| f64::from(c)).collect(),
        };
        let mut order: Vec<u32> = (0..scores.len() as u32).collect();
        order.sort_by(|&a, &b| {
            scores[b as usize].total_cmp(&scores[a as usize]).then(a.cmp(&b))
        });
        PopModel { by, scores, order }
    }

    pub fn rank(&self, user: usize, k: usize, exclude: &[u32]) -> RankedList {
        assert!(k >= 1, "k must be ≥ 1");
        let mask = exclusion_mask(self.scores.len(), exclude);
        let items: Vec<u32> = self
            .order
            .iter()
            .copied()
            .filter(|&a| !mask[a as usize])
            .take(k)
            .collect();
        let scores = items.iter().map(|&a| self.scores[a as usize]).collect();
        RankedList { user, items, scores: Some(scores) }
    }
}

/// Seeded uniform shuffle of the non-excluded artists, truncated to k.
/// Deterministic per (user, seed); scores are meaningless and omitted.
pub fn random_rank(
    n_artists: usize,
    user: usize,
    k: usize,
    exclude: &[u32],
    seed: u64,
) -> RankedList {
    assert!(k >= 1, "k must be ≥ 1");
    let mask = exclusion_mask(n_artists, exclude);
    let mut items: Vec<u32> =
        (0..n_artists as u32).filter(|&a| !mask[a as usize]).collect();
    let mut rng = rng_from(mix(substream_seed(seed, "random_rank"), user as u64));
    items.shuffle(&mut rng);
    items.truncate(k);
    RankedList { user, items, scores: None }
}
