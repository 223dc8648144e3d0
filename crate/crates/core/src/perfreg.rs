//! Per-user performance regressions: one linear model per
//! (system, metric) pair mapping behavior features to that system's
//! measured metric value for the user. Targets come from counterpart
//! recommenders retrained without the regression users' held-out plays.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::behavior::FeatureMatrix;
use crate::corpus::{PlaycountMatrix, SplitPlan};
use crate::linalg::solve_spd;
use crate::metrics::{
    evaluate_lists, rank_all, EvalContext, MetricId, MetricReport, RANKING_METRICS,
};
use crate::parallel::try_map_indexed;
use crate::recsys::{
    bm25_weight, recommend_factors, train_ials, Bm25Params, IalsConfig, PopBy, PopModel,
};
use crate::rng::{rng_from, substream_seed};
use crate::{Error, Result};

/// Diagonal jitter on the normal equations. Purely for conditioning: it
/// also gives a ridge-flavored minimum-norm solution when there are fewer
/// users than features.
const RIDGE_JITTER: f64 = 1e-8;

/// Folds used for the cross-validated R².
const CV_FOLDS: usize = 5;

/// Ordinary least squares on z-scored features.
///
/// Zero-variance features keep std 0 in the standardization vector, are
/// treated as constantly 0 by scoring, and carry coefficient 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub metric: MetricId,
    pub system: String,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
    pub r2_train: f64,
    pub r2_cv: f64,
    pub n_users: usize,
}

impl RegressionModel {
    /// Clamped prediction: all modeled metrics live in [0, 1].
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict_raw(x)?.clamp(0.0, 1.0))
    }

    fn predict_raw(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.coefficients.len() {
            return Err(Error::data(format!(
                "feature vector has {} values, model {}/{} expects {}",
                x.len(),
                self.system,
                self.metric,
                self.coefficients.len()
            )));
        }
        let mut acc = self.intercept;
        for j in 0..x.len() {
            if self.feature_stds[j] > 0.0 {
                acc += self.coefficients[j] * (x[j] - self.feature_means[j]) / self.feature_stds[j];
            }
        }
        Ok(acc)
    }
}

/// Column means and population standard deviations.
fn standardize_stats(rows: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mut means = vec![0.0; d];
    for row in rows {
        for (m, v) in means.iter_mut().zip(*row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut vars = vec![0.0; d];
    for row in rows {
        for ((s, v), m) in vars.iter_mut().zip(*row).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    let stds = vars.iter().map(|&s| (s / n).sqrt()).collect();
    (means, stds)
}

fn zscore(x: f64, mean: f64, std: f64) -> f64 {
    if std > 0.0 {
        (x - mean) / std
    } else {
        0.0
    }
}

/// Normal-equation solve on the z-scored design. Centering the target
/// decouples the intercept (z columns have zero mean), so
/// intercept = mean(target).
fn ols(rows: &[&[f64]], targets: &[f64]) -> Result<(Vec<f64>, f64, Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = rows.len();
    let d = rows[0].len();
    let (means, stds) = standardize_stats(rows);
    let z: Vec<Vec<f64>> = rows
        .iter()
        .map(|row| row.iter().zip(means.iter().zip(&stds)).map(|(&x, (&m, &s))| zscore(x, m, s)).collect())
        .collect();

    let intercept = targets.iter().sum::<f64>() / n as f64;
    let mut a = vec![0.0; d * d];
    for zi in &z {
        for j in 0..d {
            if zi[j] == 0.0 {
                continue;
            }
            for k in j..d {
                a[j * d + k] += zi[j] * zi[k];
            }
        }
    }
    for j in 0..d {
        for k in 0..j {
            a[j * d + k] = a[k * d + j];
        }
        a[j * d + j] += RIDGE_JITTER;
    }
    let mut b = vec![0.0; d];
    for (zi, &y) in z.iter().zip(targets) {
        let yc = y - intercept;
        for (bj, &zij) in b.iter_mut().zip(zi) {
            *bj += zij * yc;
        }
    }
    let coefficients = solve_spd(&a, &b)?;
    let fitted: Vec<f64> = z
        .iter()
        .map(|zi| intercept + zi.iter().zip(&coefficients).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    Ok((coefficients, intercept, means, stds, fitted))
}

/// 1 − SSE/SST with the convention that a zero-variance target scores 0.
fn r_squared(targets: &[f64], predictions: &[f64]) -> f64 {
    let mean = targets.iter().sum::<f64>() / targets.len() as f64;
    let sst: f64 = targets.iter().map(|y| (y - mean) * (y - mean)).sum();
    if sst == 0.0 {
        return 0.0;
    }
    let sse: f64 = targets.iter().zip(predictions).map(|(y, p)| (y - p) * (y - p)).sum();
    1.0 - sse / sst
}

/// Fit one regression. `user_labels` is only consulted for error
/// messages; rows, targets and labels are index-aligned.
pub fn fit(
    metric: MetricId,
    system: &str,
    rows: &[&[f64]],
    targets: &[f64],
    user_labels: &[&str],
    seed: u64,
) -> Result<RegressionModel> {
    assert_eq!(rows.len(), targets.len());
    assert_eq!(rows.len(), user_labels.len());
    if rows.len() < 2 {
        return Err(Error::data(format!(
            "regression {system}/{metric} needs at least 2 users, got {}",
            rows.len()
        )));
    }
    for (t, u) in targets.iter().zip(user_labels) {
        if !t.is_finite() {
            return Err(Error::numeric(format!(
                "non-finite target {t} for user `{u}` in regression {system}/{metric}"
            )));
        }
    }

    let (coefficients, intercept, feature_means, feature_stds, fitted) = ols(rows, targets)?;
    let r2_train = r_squared(targets, &fitted);
    let r2_cv = cross_validate(metric, system, rows, targets, seed)?;

    Ok(RegressionModel {
        metric,
        system: system.to_string(),
        coefficients,
        intercept,
        feature_means,
        feature_stds,
        r2_train,
        r2_cv,
        n_users: rows.len(),
    })
}

/// Pooled k-fold R²: every user is predicted by the model trained on the
/// other folds, and the pooled residuals are compared against the global
/// target variance. Fold assignment is a seeded shuffle, deterministic
/// per (system, metric).
fn cross_validate(
    metric: MetricId,
    system: &str,
    rows: &[&[f64]],
    targets: &[f64],
    seed: u64,
) -> Result<f64> {
    use rand::seq::SliceRandom;
    let n = rows.len();
    let k = CV_FOLDS.min(n);
    let stream = substream_seed(seed, &format!("perfreg/cv/{system}/{metric}"));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(stream));

    let mut predictions = vec![0.0; n];
    for fold in 0..k {
        let holdout: Vec<usize> = order.iter().copied().skip(fold).step_by(k).collect();
        let train: Vec<usize> =
            order.iter().copied().filter(|i| !holdout.contains(i)).collect();
        let train_rows: Vec<&[f64]> = train.iter().map(|&i| rows[i]).collect();
        let train_targets: Vec<f64> = train.iter().map(|&i| targets[i]).collect();
        if train_rows.is_empty() {
            continue;
        }
        let (coefficients, intercept, means, stds, _) = ols(&train_rows, &train_targets)?;
        for &i in &holdout {
            let mut acc = intercept;
            for j in 0..rows[i].len() {
                acc += coefficients[j] * zscore(rows[i][j], means[j], stds[j]);
            }
            predictions[i] = acc.clamp(0.0, 1.0);
        }
    }
    Ok(r_squared(targets, &predictions))
}

/// Counterpart evaluations keyed by system name: the per-user metric
/// values that become regression targets.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterpartTargets {
    pub reports: BTreeMap<String, MetricReport>,
}

/// Retrain both component systems without the regression users' held-out
/// plays, then score those plays as hidden ground truth. Uses the same
/// weighting and training configuration as the production models so the
/// regressions learn from honestly estimated performance.
pub fn train_counterparts(
    matrix: &PlaycountMatrix,
    plan: &SplitPlan,
    bm25: &Bm25Params,
    ials: &IalsConfig,
    pop_by: PopBy,
) -> Result<CounterpartTargets> {
    if plan.users_reg.is_empty() {
        return Err(Error::data("no regression users"));
    }
    let counterpart = matrix.minus_entries(&plan.reg_test);
    let weighted = bm25_weight(&counterpart, bm25)?;
    let factors = train_ials(&weighted, ials)?;
    let pop = PopModel::from_matrix(&counterpart, pop_by);

    let ctx = EvalContext::for_reg_users(matrix, plan);
    let svd_lists = rank_all(&ctx, |u, exclude, k| recommend_factors(&factors, u, k, exclude));
    let pop_lists = rank_all(&ctx, |u, exclude, k| pop.rank(u, k, exclude));

    let mut reports = BTreeMap::new();
    reports.insert("SVD-I".to_string(), evaluate_lists("SVD-I", &ctx, &svd_lists)?);
    reports.insert("POP".to_string(), evaluate_lists("POP", &ctx, &pop_lists)?);
    Ok(CounterpartTargets { reports })
}

/// Fit the full model table: one regression per (system, metric) over the
/// users that scored that metric. Feature rows are looked up by matrix
/// user index, so `features` must be built over the full user list.
pub fn fit_all(
    features: &FeatureMatrix,
    targets: &CounterpartTargets,
    seed: u64,
) -> Result<Vec<RegressionModel>> {
    let mut jobs: Vec<(&str, MetricId, Vec<usize>)> = Vec::new();
    for (system, report) in &targets.reports {
        for &metric in &RANKING_METRICS {
            let users: Vec<usize> = report
                .per_user
                .iter()
                .filter(|(_, m)| m.contains_key(&metric))
                .map(|(&u, _)| u)
                .collect();
            jobs.push((system, metric, users));
        }
    }

    try_map_indexed(jobs.len(), |i| {
        let (system, metric, users) = &jobs[i];
        let rows: Vec<&[f64]> = users.iter().map(|&u| features.row(u)).collect();
        let labels: Vec<&str> = users.iter().map(|&u| features.user_ids[u].as_str()).collect();
        let report = &targets.reports[*system];
        let ys: Vec<f64> = users.iter().map(|&u| report.per_user[&u][metric]).collect();
        fit(*metric, system, &rows, &ys, &labels, seed)
    })
}

/// Serialized model table.
#[derive(Serialize, Deserialize)]
struct RegModelsFile {
    version: u32,
    models: Vec<RegressionModel>,
}

pub fn regmodels_to_json(models: &[RegressionModel]) -> Result<String> {
    crate::report::to_sorted_json_string(&RegModelsFile { version: 1, models: models.to_vec() })
}

pub fn parse_regmodels(text: &str) -> Result<Vec<RegressionModel>> {
    let file: RegModelsFile =
        serde_json::from_str(text).map_err(|e| Error::Serde(format!("regmodels file: {e}")))?;
    Ok(file.models)
}
