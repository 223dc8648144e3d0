//! BM25 weighting of raw playcounts. Dampens heavy listeners and
//! down-weights artists everyone has heard, in the spirit of document
//! length normalization and inverse document frequency.

use serde::{Deserialize, Serialize};

use crate::corpus::PlaycountMatrix;
use crate::parallel;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

/// Widely published defaults for listening data.
impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 100.0, b: 0.8 }
    }
}

/// Same sparsity pattern as the playcount matrix, real-valued entries.
/// Entries can be negative: idf = ln(U/(1+listeners)) dips below zero for
/// artists heard by more than half the users.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMatrix {
    n_users: usize,
    n_artists: usize,
    rows: Vec<Vec<(u32, f64)>>,
}

impl WeightedMatrix {
    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_artists(&self) -> usize {
        self.n_artists
    }

    pub fn row(&self, user: usize) -> &[(u32, f64)] {
        &self.rows[user]
    }

    pub fn n_entries(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Build directly from rows; used by tests and the trainer's internals.
    pub fn from_rows(n_artists: usize, rows: Vec<Vec<(u32, f64)>>) -> WeightedMatrix {
        WeightedMatrix { n_users: rows.len(), n_artists, rows }
    }
}

/// w(u,i) = idf(i) · (k1+1)·x / (k1·(1 − b + b·len(u)/avg_len) + x)
/// with len(u) = Σ_i x(u,i), avg_len its mean over users, and
/// idf(i) = ln(U / (1 + listeners(i))).
pub fn bm25_weight(m: &PlaycountMatrix, p: &Bm25Params) -> Result<WeightedMatrix> {
    if !(p.k1 > 0.0) {
        return Err(Error::data(format!("bm25 k1 must be > 0, got {}", p.k1)));
    }
    if !(0.0..=1.0).contains(&p.b) {
        return Err(Error::data(format!("bm25 b must be in [0, 1], got {}", p.b)));
    }
    let n_users = m.n_users();
    if n_users == 0 || m.n_artists() == 0 {
        return Err(Error::data("bm25_weight: empty matrix"));
    }

    let lengths: Vec<f64> = (0..n_users)
        .map(|u| m.row(u).iter().map(|&(_, c)| f64::from(c)).sum())
        .collect();
    let avg_len = lengths.iter().sum::<f64>() / n_users as f64;
    let idf: Vec<f64> = m
        .listeners_per_artist()
        .iter()
        .map(|&l| (n_users as f64 / (1.0 + f64::from(l))).ln())
        .collect();

    let rows = parallel::map_indexed(n_users, |u| {
        let norm = p.k1 * (1.0 - p.b + p.b * lengths[u] / avg_len);
        m.row(u)
            .iter()
            .map(|&(a, c)| {
                let x = f64::from(c);
                (a, idf[a as usize] * (p.k1 + 1.0) * x / (norm + x))
            })
            .collect()
    });
    Ok(WeightedMatrix { n_users, n_artists: m.n_artists(), rows })
}
