//! Alternating least squares for implicit feedback. Observed entries get
//! preference 1 with confidence 1 + max(w, 0); every unobserved pair keeps
//! preference 0 at confidence 1. Per epoch all user rows are solved
//! against fixed item factors, then symmetrically all item rows.
//!
//! The minimized objective, recorded per epoch, is
//! L = Σ_{u,i over all pairs} c(u,i)·(p(u,i) − x_u·y_i)² + λ(Σ‖x_u‖² + Σ‖y_i‖²).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{relative_residual, solve_spd};
use crate::parallel;
use crate::recsys::bm25::WeightedMatrix;
use crate::rng::rng_from;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IalsConfig {
    pub factors: usize,
    pub regularization: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for IalsConfig {
    fn default() -> Self {
        IalsConfig { factors: 20, regularization: 0.1, epochs: 50, seed: 0 }
    }
}

/// Trained factors plus the training record. Factor matrices are row-major
/// with stride `factors`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub config: IalsConfig,
    pub n_users: usize,
    pub n_items: usize,
    pub user_factors: Vec<f64>,
    pub item_factors: Vec<f64>,
    pub loss_trace: Vec<f64>,
    /// Worst relative residual ‖Ax−b‖/‖b‖ over every row solve.
    pub max_solve_residual: f64,
}

impl FactorModel {
    pub fn user_vec(&self, u: usize) -> &[f64] {
        &self.user_factors[u * self.config.factors..(u + 1) * self.config.factors]
    }

    pub fn item_vec(&self, i: usize) -> &[f64] {
        &self.item_factors[i * self.config.factors..(i + 1) * self.config.factors]
    }

    pub fn score(&self, user: usize, item: usize) -> f64 {
        dot(self.user_vec(user), self.item_vec(item))
    }
}

/// Confidence for one observed weighted entry. Negative weights (possible
/// under BM25 when idf < 0) clamp to confidence 1 so observed pairs never
/// fall below the background confidence.
pub fn confidence(weight: f64) -> f64 {
    1.0 + weight.max(0.0)
}

pub fn train_ials(w: &WeightedMatrix, config: &IalsConfig) -> Result<FactorModel> {
    if config.factors < 1 {
        return Err(Error::data("ials factors must be ≥ 1"));
    }
    if !(config.regularization > 0.0) {
        return Err(Error::data("ials regularization must be > 0"));
    }
    if config.epochs < 1 {
        return Err(Error::data("ials epochs must be ≥ 1"));
    }
    let n_users = w.n_users();
    let n_items = w.n_artists();
    if n_users == 0 || n_items == 0 {
        return Err(Error::data("train_ials: empty matrix"));
    }
    let f = config.factors;
    let lambda = config.regularization;

    // Confidence views of the matrix, by user and transposed by item.
    let user_rows: Vec<Vec<(u32, f64)>> = (0..n_users)
        .map(|u| w.row(u).iter().map(|&(a, wv)| (a, confidence(wv))).collect())
        .collect();
    let mut item_rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n_items];
    for (u, row) in user_rows.iter().enumerate() {
        for &(a, c) in row {
            item_rows[a as usize].push((u as u32, c));
        }
    }

    // Seeded uniform [0, 0.01): small positive init keeps the first epoch
    // finite and the run deterministic.
    let mut rng = rng_from(config.seed);
    let mut x: Vec<f64> = (0..n_users * f).map(|_| rng.random::<f64>() * 0.01).collect();
    let mut y: Vec<f64> = (0..n_items * f).map(|_| rng.random::<f64>() * 0.01).collect();

    let mut loss_trace = Vec::with_capacity(config.epochs);
    let mut max_residual = 0.0f64;
    let mut gram_y = gram(&y, n_items, f);

    for epoch in 1..=config.epochs {
        let r = solve_side(&user_rows, &gram_y, &y, &mut x, f, lambda)
            .map_err(|e| Error::numeric(format!("epoch {epoch}, user step: {e}")))?;
        max_residual = max_residual.max(r);

        let gram_x = gram(&x, n_users, f);
        let r = solve_side(&item_rows, &gram_x, &x, &mut y, f, lambda)
            .map_err(|e| Error::numeric(format!("epoch {epoch}, item step: {e}")))?;
        max_residual = max_residual.max(r);

        gram_y = gram(&y, n_items, f);
        let loss = total_loss(&user_rows, &gram_y, &x, &y, f, lambda);
        if !loss.is_finite() {
            return Err(Error::numeric(format!("non-finite loss at epoch {epoch}")));
        }
        loss_trace.push(loss);
    }

    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::numeric("non-finite factor after training"));
    }
    Ok(FactorModel {
        config: *config,
        n_users,
        n_items,
        user_factors: x,
        item_factors: y,
        loss_trace,
        max_solve_residual: max_residual,
    })
}

/// Solve every row on one side against the fixed `other` factors. Rows are
/// independent and solved in parallel; writes land index-ordered. Returns
/// the worst relative residual.
fn solve_side(
    rows: &[Vec<(u32, f64)>],
    gram_other: &[f64],
    other: &[f64],
    out: &mut Vec<f64>,
    f: usize,
    lambda: f64,
) -> Result<f64> {
    let solved = parallel::try_map_indexed(rows.len(), |r| {
        solve_row(&rows[r], gram_other, other, f, lambda)
            .map_err(|e| Error::numeric(format!("row {r}: {e}")))
    })?;
    let mut worst = 0.0f64;
    for (r, (vec, residual)) in solved.into_iter().enumerate() {
        out[r * f..(r + 1) * f].copy_from_slice(&vec);
        worst = worst.max(residual);
    }
    Ok(worst)
}

/// One normal-equation solve:
/// A = YᵀY + Yᵀ(Cᵘ−I)Y + λI, b = YᵀCᵘp(u), x = A⁻¹b.
/// The YᵀY term is the cached gram matrix, so cost scales with the row's
/// observed entries only.
fn solve_row(
    row: &[(u32, f64)],
    gram_other: &[f64],
    other: &[f64],
    f: usize,
    lambda: f64,
) -> Result<(Vec<f64>, f64)> {
    let mut a = gram_other.to_vec();
    for i in 0..f {
        a[i * f + i] += lambda;
    }
    let mut b = vec![0.0; f];
    for &(j, c) in row {
        let v = &other[j as usize * f..(j as usize + 1) * f];
        let cm1 = c - 1.0;
        for p in 0..f {
            b[p] += c * v[p];
            for q in 0..=p {
                a[p * f + q] += cm1 * v[p] * v[q];
            }
        }
    }
    for p in 0..f {
        for q in (p + 1)..f {
            a[p * f + q] = a[q * f + p];
        }
    }
    let x = solve_spd(&a, &b)?;
    let residual = relative_residual(&a, &x, &b);
    Ok((x, residual))
}

/// Full objective. The quadratic term over all user-item pairs collapses
/// through Σ_all (x_u·y_i)² = Σ_u x_uᵀ(YᵀY)x_u, so cost stays sparse.
fn total_loss(
    user_rows: &[Vec<(u32, f64)>],
    gram_y: &[f64],
    x: &[f64],
    y: &[f64],
    f: usize,
    lambda: f64,
) -> f64 {
    let per_user = parallel::map_indexed(user_rows.len(), |u| {
        let xu = &x[u * f..(u + 1) * f];
        let mut quad = 0.0;
        for p in 0..f {
            for q in 0..f {
                quad += xu[p] * gram_y[p * f + q] * xu[q];
            }
        }
        let mut obs = 0.0;
        for &(i, c) in &user_rows[u] {
            let s = dot(xu, &y[i as usize * f..(i as usize + 1) * f]);
            // Replace the background (1−0·s)² ≡ s² term with the observed
            // c·(1−s)² term for this pair.
            obs += c * (1.0 - s) * (1.0 - s) - s * s;
        }
        let norm: f64 = xu.iter().map(|v| v * v).sum();
        quad + obs + lambda * norm
    });
    let mut loss: f64 = per_user.iter().sum();
    loss += lambda * y.iter().map(|v| v * v).sum::<f64>();
    loss
}

/// Gram matrix MᵀM for row-major M. Accumulated sequentially in row order
/// so results never depend on thread count.
fn gram(m: &[f64], rows: usize, f: usize) -> Vec<f64> {
    let mut g = vec![0.0; f * f];
    for r in 0..rows {
        let v = &m[r * f..(r + 1) * f];
        for p in 0..f {
            for q in 0..=p {
                g[p * f + q] += v[p] * v[q];
            }
        }
    }
    for p in 0..f {
        for q in (p + 1)..f {
            g[p * f + q] = g[q * f + p];
        }
    }
    g
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Versioned text dump of the model; round-trips bit-exactly because every
/// float is written in shortest round-trip decimal form.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    config: IalsConfig,
    n_users: usize,
    n_items: usize,
    user_ids: Vec<String>,
    artist_ids: Vec<String>,
    user_factors: Vec<f64>,
    item_factors: Vec<f64>,
    loss_trace: Vec<f64>,
    max_solve_residual: f64,
}

const MODEL_VERSION: u32 = 1;

impl FactorModel {
    /// Serialize together with the id spaces the rows refer to.
    pub fn to_json(&self, user_ids: &[String], artist_ids: &[String]) -> Result<String> {
        if user_ids.len() != self.n_users || artist_ids.len() != self.n_items {
            return Err(Error::data("model/id-space size mismatch"));
        }
        crate::report::to_sorted_json_string(&ModelFile {
            version: MODEL_VERSION,
            config: self.config,
            n_users: self.n_users,
            n_items: self.n_items,
            user_ids: user_ids.to_vec(),
            artist_ids: artist_ids.to_vec(),
            user_factors: self.user_factors.clone(),
            item_factors: self.item_factors.clone(),
            loss_trace: self.loss_trace.clone(),
            max_solve_residual: self.max_solve_residual,
        })
    }
}

/// Parse a model dump, checking shape consistency and, when provided, that
/// the id spaces match the matrix the caller is about to rank against.
pub fn parse_model(
    text: &str,
    expect_ids: Option<(&[String], &[String])>,
) -> Result<FactorModel> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::Serde(format!("model file: {e}")))?;
    if file.version != MODEL_VERSION {
        return Err(Error::data(format!("unsupported model version {}", file.version)));
    }
    let f = file.config.factors;
    if file.user_factors.len() != file.n_users * f
        || file.item_factors.len() != file.n_items * f
        || file.user_ids.len() != file.n_users
        || file.artist_ids.len() != file.n_items
    {
        return Err(Error::data("model file has inconsistent shapes"));
    }
    if let Some((users, artists)) = expect_ids {
        if users != file.user_ids.as_slice() || artists != file.artist_ids.as_slice() {
            return Err(Error::data("model id spaces do not match the matrix"));
        }
    }
    Ok(FactorModel {
        config: file.config,
        n_users: file.n_users,
        n_items: file.n_items,
        user_factors: file.user_factors,
        item_factors: file.item_factors,
        loss_trace: file.loss_trace,
        max_solve_residual: file.max_solve_residual,
    })
}
