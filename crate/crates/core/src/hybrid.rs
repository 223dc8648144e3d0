//! Per-user hybridization of the two component systems: SELECT switches
//! to the system with the better predicted metric, FUSE combines both
//! rankings with per-user weights, FUSE-Avg applies one globally
//! averaged weight pair. Predictions come from the performance
//! regressions, or from true measured metrics in oracle mode.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::behavior::FeatureMatrix;
use crate::metrics::{evaluate_lists, EvalContext, MetricId, MetricReport, RANKING_METRICS};
use crate::parallel::try_map_indexed;
use crate::perfreg::RegressionModel;
use crate::recsys::RankedList;
use crate::{Error, Result};

/// Normalized fusion weights for the two components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    /// SVD-I weight.
    pub w_s: f64,
    /// POP weight.
    pub w_p: f64,
}

/// Turn two predicted metric values into fusion weights. For
/// lower-is-better metrics the complements 1−m drive the weights, so the
/// better system still gets the larger weight. Two zero stakes mean no
/// information, giving equal weights.
pub fn weights_from_predictions(
    m_s: f64,
    m_p: f64,
    higher_is_better: bool,
) -> Result<FusionWeights> {
    for m in [m_s, m_p] {
        if !(0.0..=1.0).contains(&m) {
            return Err(Error::data(format!("predicted metric {m} outside [0, 1]")));
        }
    }
    let (a, b) = if higher_is_better { (m_s, m_p) } else { (1.0 - m_s, 1.0 - m_p) };
    if a + b == 0.0 {
        return Ok(FusionWeights { w_s: 0.5, w_p: 0.5 });
    }
    let w_s = a / (a + b);
    Ok(FusionWeights { w_s, w_p: 1.0 - w_s })
}

/// Merge two full rankings of the same candidate set: each artist's
/// combined score is its weighted mean rank (1-based), lists are sorted
/// ascending by that score, ties broken by SVD-I rank then artist index.
/// The halving matches the printed equation; it never changes the order.
pub fn fuse_rankings(
    r_s: &RankedList,
    r_p: &RankedList,
    w: &FusionWeights,
) -> Result<RankedList> {
    if r_s.user != r_p.user {
        return Err(Error::data(format!(
            "fuse: rankings for different users ({} vs {})",
            r_s.user, r_p.user
        )));
    }
    if r_s.items.len() != r_p.items.len() {
        return Err(Error::data(format!(
            "fuse: candidate sets differ for user {} ({} vs {} items)",
            r_s.user,
            r_s.items.len(),
            r_p.items.len()
        )));
    }
    let mut pop_rank: HashMap<u32, u32> = HashMap::with_capacity(r_p.items.len());
    for (pos, &a) in r_p.items.iter().enumerate() {
        pop_rank.insert(a, pos as u32 + 1);
    }

    let mut scored: Vec<(f64, u32, u32)> = Vec::with_capacity(r_s.items.len());
    for (pos, &a) in r_s.items.iter().enumerate() {
        let rank_s = pos as u32 + 1;
        let rank_p = *pop_rank.get(&a).ok_or_else(|| {
            Error::data(format!("fuse: candidate sets differ for user {}: artist {a} missing", r_s.user))
        })?;
        let combined = (f64::from(rank_p) * w.w_p + f64::from(rank_s) * w.w_s) / 2.0;
        scored.push((combined, rank_s, a));
    }
    scored.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    Ok(RankedList { user: r_s.user, items: scored.into_iter().map(|(_, _, a)| a).collect(), scores: None })
}

/// Predicted (SVD-I, POP) values of one metric, index-aligned with the
/// evaluation context's users.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricPredictions {
    pub metric: MetricId,
    pub per_user: Vec<(f64, f64)>,
}

/// Regression predictions for every context user. Feature rows are
/// addressed by matrix user index, so the feature matrix must cover the
/// full user list.
pub fn predictions_from_models(
    models: &[RegressionModel],
    features: &FeatureMatrix,
    ctx: &EvalContext,
    metric: MetricId,
) -> Result<MetricPredictions> {
    let find = |system: &str| {
        models
            .iter()
            .find(|m| m.system == system && m.metric == metric)
            .ok_or_else(|| Error::data(format!("no regression model for {system}/{metric}")))
    };
    let svd = find("SVD-I")?;
    let pop = find("POP")?;
    let per_user = ctx
        .users
        .iter()
        .map(|&u| Ok((svd.predict(features.row(u))?, pop.predict(features.row(u))?)))
        .collect::<Result<_>>()?;
    Ok(MetricPredictions { metric, per_user })
}

/// Oracle predictions: each component's true measured per-user value on
/// this very evaluation set. Users the metric skipped (no qualifying
/// hidden artists) predict 0 for both systems, which degrades to equal
/// weights and the SVD-I tie rule; they do not score the target metric
/// either way.
pub fn predictions_from_reports(
    svd: &MetricReport,
    pop: &MetricReport,
    ctx: &EvalContext,
    metric: MetricId,
) -> MetricPredictions {
    let value = |rep: &MetricReport, u: usize| {
        rep.per_user.get(&u).and_then(|m| m.get(&metric)).copied().unwrap_or(0.0)
    };
    let per_user = ctx.users.iter().map(|&u| (value(svd, u), value(pop, u))).collect();
    MetricPredictions { metric, per_user }
}

/// How many users SELECT routed to each component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectShares {
    pub metric: MetricId,
    pub svd_users: usize,
    pub pop_users: usize,
}

impl SelectShares {
    pub fn svd_pct(&self) -> f64 {
        100.0 * self.svd_users as f64 / (self.svd_users + self.pop_users) as f64
    }

    pub fn pop_pct(&self) -> f64 {
        100.0 * self.pop_users as f64 / (self.svd_users + self.pop_users) as f64
    }
}

/// Per user, emit the component list with the better predicted metric.
/// Ties go to SVD-I.
pub fn run_select(
    preds: &MetricPredictions,
    svd_lists: &[RankedList],
    pop_lists: &[RankedList],
) -> Result<(Vec<RankedList>, SelectShares)> {
    check_alignment(preds, svd_lists, pop_lists)?;
    let hib = preds.metric.higher_is_better();
    let mut lists = Vec::with_capacity(preds.per_user.len());
    let mut svd_users = 0;
    for (i, &(m_s, m_p)) in preds.per_user.iter().enumerate() {
        let take_svd = if hib { m_s >= m_p } else { m_s <= m_p };
        if take_svd {
            svd_users += 1;
            lists.push(svd_lists[i].clone());
        } else {
            lists.push(pop_lists[i].clone());
        }
    }
    let shares = SelectShares {
        metric: preds.metric,
        svd_users,
        pop_users: preds.per_user.len() - svd_users,
    };
    Ok((lists, shares))
}

/// Fuse both rankings per user. With `averaged` the per-user weight
/// pairs are first averaged component-wise into one pair applied to
/// everyone. Returns the fused lists plus the weights actually applied,
/// index-aligned with the context users.
pub fn run_fuse(
    preds: &MetricPredictions,
    svd_lists: &[RankedList],
    pop_lists: &[RankedList],
    averaged: bool,
) -> Result<(Vec<RankedList>, Vec<FusionWeights>)> {
    check_alignment(preds, svd_lists, pop_lists)?;
    let n = preds.per_user.len();
    let hib = preds.metric.higher_is_better();
    let mut weights = Vec::with_capacity(n);
    for &(m_s, m_p) in &preds.per_user {
        weights.push(weights_from_predictions(m_s, m_p, hib)?);
    }
    if averaged {
        let mean_s = weights.iter().map(|w| w.w_s).sum::<f64>() / n as f64;
        let mean_p = weights.iter().map(|w| w.w_p).sum::<f64>() / n as f64;
        weights = vec![FusionWeights { w_s: mean_s, w_p: mean_p }; n];
    }
    let lists =
        try_map_indexed(n, |i| fuse_rankings(&svd_lists[i], &pop_lists[i], &weights[i]))?;
    Ok((lists, weights))
}

fn check_alignment(
    preds: &MetricPredictions,
    svd_lists: &[RankedList],
    pop_lists: &[RankedList],
) -> Result<()> {
    if svd_lists.len() != preds.per_user.len() || pop_lists.len() != preds.per_user.len() {
        return Err(Error::data(format!(
            "hybrid: {} predictions for {} SVD-I and {} POP lists",
            preds.per_user.len(),
            svd_lists.len(),
            pop_lists.len()
        )));
    }
    Ok(())
}

/// Where per-user metric predictions come from.
pub enum PredictionSource<'a> {
    /// Performance regressions over behavior features.
    Models { models: &'a [RegressionModel], features: &'a FeatureMatrix },
    /// True measured component metrics on the evaluation set itself.
    Oracle,
}

/// Everything the full hybrid experiment produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridOutcome {
    /// 39 evaluations: RANDOM, POP, SVD-I, then SELECT/FUSE/FUSE-AVG per
    /// ranking metric, strategy-major.
    pub reports: Vec<MetricReport>,
    /// SELECT routing counts, one per ranking metric.
    pub select_shares: Vec<SelectShares>,
    /// FUSE per-user weights, one vector per ranking metric.
    pub fuse_weights: Vec<(MetricId, Vec<FusionWeights>)>,
    /// The single averaged pair each FUSE-AVG run applied.
    pub fuse_avg_weights: Vec<(MetricId, FusionWeights)>,
}

/// Evaluate the three baselines and all 36 hybrid systems on one
/// evaluation context.
pub fn run_matrix(
    ctx: &EvalContext,
    random_lists: &[RankedList],
    pop_lists: &[RankedList],
    svd_lists: &[RankedList],
    source: &PredictionSource<'_>,
) -> Result<HybridOutcome> {
    let rep_random = evaluate_lists("RANDOM", ctx, random_lists)?;
    let rep_pop = evaluate_lists("POP", ctx, pop_lists)?;
    let rep_svd = evaluate_lists("SVD-I", ctx, svd_lists)?;

    let predictions: Vec<MetricPredictions> = RANKING_METRICS
        .iter()
        .map(|&metric| match source {
            PredictionSource::Models { models, features } => {
                predictions_from_models(models, features, ctx, metric)
            }
            PredictionSource::Oracle => {
                Ok(predictions_from_reports(&rep_svd, &rep_pop, ctx, metric))
            }
        })
        .collect::<Result<_>>()?;

    let mut select_reports = Vec::new();
    let mut fuse_reports = Vec::new();
    let mut fuse_avg_reports = Vec::new();
    let mut select_shares = Vec::new();
    let mut fuse_weights = Vec::new();
    let mut fuse_avg_weights = Vec::new();

    for preds in &predictions {
        let metric = preds.metric;
        let (lists, shares) = run_select(preds, svd_lists, pop_lists)?;
        select_reports.push(evaluate_lists(&format!("SELECT-{metric}"), ctx, &lists)?);
        select_shares.push(shares);

        let (lists, weights) = run_fuse(preds, svd_lists, pop_lists, false)?;
        fuse_reports.push(evaluate_lists(&format!("FUSE-{metric}"), ctx, &lists)?);
        fuse_weights.push((metric, weights));

        let (lists, weights) = run_fuse(preds, svd_lists, pop_lists, true)?;
        fuse_avg_reports.push(evaluate_lists(&format!("FUSE-AVG-{metric}"), ctx, &lists)?);
        fuse_avg_weights.push((metric, weights[0]));
    }

    let mut reports = vec![rep_random, rep_pop, rep_svd];
    reports.extend(select_reports);
    reports.extend(fuse_reports);
    reports.extend(fuse_avg_reports);
    Ok(HybridOutcome { reports, select_shares, fuse_weights, fuse_avg_weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn list(user: usize, items: &[u32]) -> RankedList {
        RankedList { user, items: items.to_vec(), scores: None }
    }

    #[test]
    fn weights_follow_the_published_arithmetic() {
        let w = weights_from_predictions(0.268, 0.227, true).unwrap();
        assert_relative_eq!(w.w_s, 0.268 / 0.495, epsilon = 1e-15);
        assert_relative_eq!(w.w_s, 0.5414, epsilon = 1e-4);
        assert_relative_eq!(w.w_p, 0.4586, epsilon = 1e-4);

        // Lower-is-better metrics weight the complements.
        let w = weights_from_predictions(0.027, 0.036, false).unwrap();
        assert_relative_eq!(w.w_s, 0.973 / 1.937, epsilon = 1e-15);
        assert_relative_eq!(w.w_s, 0.5023, epsilon = 1e-4);
    }

    #[test]
    fn equal_predictions_give_equal_weights() {
        for &m in &[0.0, 0.3, 1.0] {
            for &hib in &[true, false] {
                let w = weights_from_predictions(m, m, hib).unwrap();
                assert_eq!((w.w_s, w.w_p), (0.5, 0.5));
            }
        }
        // Zero stakes in both orientations.
        assert_eq!(weights_from_predictions(0.0, 0.0, true).unwrap().w_s, 0.5);
        assert_eq!(weights_from_predictions(1.0, 1.0, false).unwrap().w_s, 0.5);
    }

    #[test]
    fn weights_are_symmetric_normalized_and_validated() {
        let mut rng = crate::rng::rng_from(1);
        use rand::Rng;
        for _ in 0..200 {
            let (m_s, m_p) = (rng.random::<f64>(), rng.random::<f64>());
            let hib = rng.random::<f64>() < 0.5;
            let w = weights_from_predictions(m_s, m_p, hib).unwrap();
            assert!(w.w_s >= 0.0 && w.w_p >= 0.0);
            assert!((w.w_s + w.w_p - 1.0).abs() <= 1e-12);
            let swapped = weights_from_predictions(m_p, m_s, hib).unwrap();
            assert_relative_eq!(w.w_s, swapped.w_p, epsilon = 1e-12);
        }
        assert!(weights_from_predictions(1.2, 0.5, true).is_err());
        assert!(weights_from_predictions(0.5, -0.1, false).is_err());
    }

    #[test]
    fn degenerate_weights_reproduce_either_input_order() {
        let r_s = list(0, &[3, 1, 4, 0, 2]);
        let r_p = list(0, &[2, 0, 4, 1, 3]);
        let svd_only = fuse_rankings(&r_s, &r_p, &FusionWeights { w_s: 1.0, w_p: 0.0 }).unwrap();
        assert_eq!(svd_only.items, r_s.items);
        let pop_only = fuse_rankings(&r_s, &r_p, &FusionWeights { w_s: 0.0, w_p: 1.0 }).unwrap();
        assert_eq!(pop_only.items, r_p.items);
    }

    #[test]
    fn reversed_lists_at_equal_weights_fall_back_to_svd_order() {
        // rank_s(i) + rank_p(i) = 5 for every artist → constant score.
        let r_s = list(0, &[7, 5, 6, 8]);
        let r_p = list(0, &[8, 6, 5, 7]);
        let w = FusionWeights { w_s: 0.5, w_p: 0.5 };
        let fused = fuse_rankings(&r_s, &r_p, &w).unwrap();
        assert_eq!(fused.items, r_s.items);
    }

    #[test]
    fn six_item_fusion_matches_score_and_sort_oracle() {
        let r_s = list(3, &[10, 11, 12, 13, 14, 15]);
        let r_p = list(3, &[15, 13, 11, 10, 14, 12]);
        let w = FusionWeights { w_s: 0.7, w_p: 0.3 };
        let fused = fuse_rankings(&r_s, &r_p, &w).unwrap();

        // Independent oracle: walk artists in index order, compute the
        // combined score from scratch, insertion-sort with the tie rule.
        let mut oracle: Vec<(f64, usize, u32)> = Vec::new();
        for a in [10u32, 11, 12, 13, 14, 15] {
            let rank_s = r_s.items.iter().position(|&x| x == a).unwrap() + 1;
            let rank_p = r_p.items.iter().position(|&x| x == a).unwrap() + 1;
            let score = (rank_p as f64 * 0.3 + rank_s as f64 * 0.7) / 2.0;
            oracle.push((score, rank_s, a));
        }
        oracle.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let want: Vec<u32> = oracle.into_iter().map(|(_, _, a)| a).collect();
        assert_eq!(fused.items, want);
    }

    #[test]
    fn mismatched_candidates_or_users_are_rejected() {
        let w = FusionWeights { w_s: 0.5, w_p: 0.5 };
        let err = fuse_rankings(&list(0, &[1, 2]), &list(0, &[1, 2, 3]), &w).unwrap_err();
        assert!(err.to_string().contains("candidate sets differ"), "{err}");
        let err = fuse_rankings(&list(0, &[1, 2]), &list(0, &[1, 3]), &w).unwrap_err();
        assert!(err.to_string().contains("artist 2 missing"), "{err}");
        let err = fuse_rankings(&list(0, &[1]), &list(1, &[1]), &w).unwrap_err();
        assert!(err.to_string().contains("different users"), "{err}");
    }

    #[test]
    fn improving_an_input_rank_never_worsens_the_combined_score() {
        use rand::seq::SliceRandom;
        let mut rng = crate::rng::rng_from(5);
        let w = FusionWeights { w_s: 0.6, w_p: 0.4 };
        for _ in 0..50 {
            let mut items: Vec<u32> = (0..12).collect();
            items.shuffle(&mut rng);
            let r_p = list(0, &items);
            let mut svd_items = items.clone();
            svd_items.shuffle(&mut rng);

            let fused = fuse_rankings(&list(0, &svd_items), &r_p, &w).unwrap();
            let score_of = |fused: &RankedList, a: u32, svd: &[u32], pop: &[u32]| {
                let rs = svd.iter().position(|&x| x == a).unwrap() as f64 + 1.0;
                let rp = pop.iter().position(|&x| x == a).unwrap() as f64 + 1.0;
                let _ = fused;
                (rp * w.w_p + rs * w.w_s) / 2.0
            };
            // Swap a random non-leading artist one step up in the SVD list.
            let pos = 1 + (rng.next_u32() as usize % 11);
            let a = svd_items[pos];
            let before = score_of(&fused, a, &svd_items, &items);
            svd_items.swap(pos, pos - 1);
            let after = score_of(&fused, a, &svd_items, &items);
            assert!(after <= before);
        }
        use rand::RngCore;
    }

    fn three_user_lists() -> (Vec<RankedList>, Vec<RankedList>) {
        let svd = vec![list(0, &[0, 1, 2]), list(1, &[2, 0, 1]), list(2, &[1, 2, 0])];
        let pop = vec![list(0, &[2, 1, 0]), list(1, &[0, 1, 2]), list(2, &[0, 1, 2])];
        (svd, pop)
    }

    #[test]
    fn select_routes_by_orientation_and_breaks_ties_toward_svd() {
        let (svd, pop) = three_user_lists();
        // Higher-better: user0 SVD wins, user1 POP wins, user2 ties → SVD.
        let preds = MetricPredictions {
            metric: MetricId::P1At10,
            per_user: vec![(0.9, 0.1), (0.2, 0.6), (0.4, 0.4)],
        };
        let (lists, shares) = run_select(&preds, &svd, &pop).unwrap();
        assert_eq!(lists[0].items, svd[0].items);
        assert_eq!(lists[1].items, pop[1].items);
        assert_eq!(lists[2].items, svd[2].items);
        assert_eq!((shares.svd_users, shares.pop_users), (2, 1));
        assert_relative_eq!(shares.svd_pct(), 200.0 / 3.0);

        // Lower-better flips the comparison.
        let preds = MetricPredictions {
            metric: MetricId::Rank1,
            per_user: vec![(0.9, 0.1), (0.2, 0.6), (0.4, 0.4)],
        };
        let (lists, shares) = run_select(&preds, &svd, &pop).unwrap();
        assert_eq!(lists[0].items, pop[0].items);
        assert_eq!(lists[1].items, svd[1].items);
        assert_eq!(lists[2].items, svd[2].items);
        assert_eq!(shares.svd_users, 2);
    }

    #[test]
    fn all_svd_predictions_give_a_full_share() {
        let (svd, pop) = three_user_lists();
        let preds = MetricPredictions {
            metric: MetricId::NdcgAt500,
            per_user: vec![(0.9, 0.1), (0.8, 0.2), (0.7, 0.3)],
        };
        let (_, shares) = run_select(&preds, &svd, &pop).unwrap();
        assert_eq!(shares.svd_pct(), 100.0);
        assert_eq!(shares.pop_pct(), 0.0);
    }

    #[test]
    fn fuse_avg_weight_is_the_mean_of_fuse_weights() {
        let n = 10;
        let svd: Vec<RankedList> = (0..n).map(|u| list(u, &[0, 1, 2, 3])).collect();
        let pop: Vec<RankedList> = (0..n).map(|u| list(u, &[3, 2, 1, 0])).collect();
        let mut rng = crate::rng::rng_from(9);
        use rand::Rng;
        let preds = MetricPredictions {
            metric: MetricId::Map1At500,
            per_user: (0..n).map(|_| (rng.random(), rng.random())).collect(),
        };
        let (_, per_user) = run_fuse(&preds, &svd, &pop, false).unwrap();
        let (_, averaged) = run_fuse(&preds, &svd, &pop, true).unwrap();
        let mean_s = per_user.iter().map(|w| w.w_s).sum::<f64>() / n as f64;
        let mean_p = per_user.iter().map(|w| w.w_p).sum::<f64>() / n as f64;
        for w in &averaged {
            assert_relative_eq!(w.w_s, mean_s, epsilon = 1e-12);
            assert_relative_eq!(w.w_p, mean_p, epsilon = 1e-12);
        }
    }

    #[test]
    fn identical_predictions_make_fuse_and_fuse_avg_agree() {
        let (svd, pop) = three_user_lists();
        let preds = MetricPredictions {
            metric: MetricId::R1At500,
            per_user: vec![(0.6, 0.2); 3],
        };
        let (fuse_lists, _) = run_fuse(&preds, &svd, &pop, false).unwrap();
        let (avg_lists, _) = run_fuse(&preds, &svd, &pop, true).unwrap();
        assert_eq!(fuse_lists, avg_lists);
    }

    mod experiment {
        use super::*;
        use crate::corpus::{
            build_playcounts, make_split, parse_events, parse_songs, EVENTS_HEADER, SONGS_HEADER,
        };
        use crate::metrics::{rank_all, ALL_METRICS};
        use crate::recsys::{
            bm25_weight, random_rank, recommend_factors, train_ials, Bm25Params, IalsConfig,
            PopBy, PopModel,
        };

        struct Fixture {
            ctx: EvalContext,
            random: Vec<RankedList>,
            pop: Vec<RankedList>,
            svd: Vec<RankedList>,
        }

        fn fixture(seed: u64) -> Fixture {
            use rand::Rng;
            let mut rng = crate::rng::rng_from(seed);
            let mut songs = String::from(SONGS_HEADER);
            for a in 0..15 {
                songs.push_str(&format!("\ns{a}\ta{a:02}\talb{a}\t199{}\t200\tg\t\tc", a % 10));
            }
            let catalog = parse_songs(songs.as_bytes()).unwrap();
            let mut events = String::from(EVENTS_HEADER);
            let mut t = 0;
            for u in 0..40 {
                for _ in 0..rng.random_range(60..120) {
                    let s = (rng.random::<f64>().powi(2) * 15.0) as usize % 15;
                    events.push_str(&format!("\nu{u:02}\ts{s}\t{t}\t150"));
                    t += 500;
                }
            }
            let log = parse_events(events.as_bytes()).unwrap();
            let (matrix, _) = build_playcounts(&log, &catalog);
            let plan = make_split(&matrix, 0.25, 0.3, 0.2, seed).unwrap();

            let training = matrix.minus_entries(&plan.test_hidden);
            let factors = train_ials(
                &bm25_weight(&training, &Bm25Params::default()).unwrap(),
                &IalsConfig { factors: 4, epochs: 6, ..Default::default() },
            )
            .unwrap();
            let pop_model = PopModel::from_matrix(&training, PopBy::Playcounts);

            let ctx = EvalContext::for_test_users(&matrix, &plan);
            let n_artists = matrix.n_artists();
            let random = rank_all(&ctx, |u, e, k| random_rank(n_artists, u, k, e, seed));
            let pop = rank_all(&ctx, |u, e, k| pop_model.rank(u, k, e));
            let svd = rank_all(&ctx, |u, e, k| recommend_factors(&factors, u, k, e));
            Fixture { ctx, random, pop, svd }
        }

        #[test]
        fn oracle_matrix_has_39_rows_and_select_dominates_componentwise() {
            let f = fixture(77);
            let out = run_matrix(&f.ctx, &f.random, &f.pop, &f.svd, &PredictionSource::Oracle)
                .unwrap();
            assert_eq!(out.reports.len(), 39);
            assert_eq!(out.select_shares.len(), 12);
            assert_eq!(out.fuse_weights.len(), 12);
            assert_eq!(out.fuse_avg_weights.len(), 12);

            let names: Vec<&str> = out.reports.iter().map(|r| r.system.as_str()).collect();
            assert_eq!(&names[..3], &["RANDOM", "POP", "SVD-I"]);
            assert_eq!(names[3], "SELECT-P1@10");
            assert_eq!(names[15], "FUSE-P1@10");
            assert_eq!(names[27], "FUSE-AVG-P1@10");
            assert_eq!(names[38], "FUSE-AVG-nDCG@10");
            for r in &out.reports {
                assert_eq!(r.aggregate.len(), ALL_METRICS.len(), "system {}", r.system);
            }

            let pop_rep = &out.reports[1];
            let svd_rep = &out.reports[2];
            for (k, &metric) in RANKING_METRICS.iter().enumerate() {
                let select = &out.reports[3 + k];
                assert_eq!(select.system, format!("SELECT-{metric}"));
                let hib = metric.higher_is_better();
                // Per scoring user: oracle SELECT achieves the better of
                // the two component values. Users without a qualifying
                // hidden set for this metric carry no value anywhere.
                let mut scored = 0;
                for (u, values) in &select.per_user {
                    let Some(&got) = values.get(&metric) else { continue };
                    scored += 1;
                    let s = svd_rep.per_user[u][&metric];
                    let p = pop_rep.per_user[u][&metric];
                    let best = if hib { s.max(p) } else { s.min(p) };
                    assert_eq!(got, best, "user {u} metric {metric}");
                }
                assert!(scored > 0, "no users scored {metric}");
                // And therefore at least matches both aggregates.
                let agg = select.aggregate[&metric];
                let (s, p) = (svd_rep.aggregate[&metric], pop_rep.aggregate[&metric]);
                if hib {
                    assert!(agg >= s.max(p) - 1e-15, "{metric}: {agg} vs {s}/{p}");
                } else {
                    assert!(agg <= s.min(p) + 1e-15, "{metric}: {agg} vs {s}/{p}");
                }
            }
        }

        #[test]
        fn degenerate_fusion_weights_reproduce_component_reports() {
            let f = fixture(78);
            let svd_rep = evaluate_lists("X", &f.ctx, &f.svd).unwrap();
            let pop_rep = evaluate_lists("X", &f.ctx, &f.pop).unwrap();

            let all_svd = MetricPredictions {
                metric: MetricId::NdcgAt500,
                per_user: vec![(1.0, 0.0); f.ctx.users.len()],
            };
            let (lists, w) = run_fuse(&all_svd, &f.svd, &f.pop, false).unwrap();
            assert!(w.iter().all(|w| w.w_s == 1.0 && w.w_p == 0.0));
            let rep = evaluate_lists("X", &f.ctx, &lists).unwrap();
            assert_eq!(rep, svd_rep);

            let all_pop = MetricPredictions {
                metric: MetricId::NdcgAt500,
                per_user: vec![(0.0, 1.0); f.ctx.users.len()],
            };
            let (lists, w) = run_fuse(&all_pop, &f.svd, &f.pop, false).unwrap();
            assert!(w.iter().all(|w| w.w_s == 0.0 && w.w_p == 1.0));
            let rep = evaluate_lists("X", &f.ctx, &lists).unwrap();
            assert_eq!(rep, pop_rep);
        }

        #[test]
        fn missing_regression_model_is_reported() {
            let f = fixture(79);
            use crate::behavior::{
                build_feature_matrix, BehaviorParams, PercentileTables, Vocab,
            };
            // Empty model list: the first metric lookup must fail by name.
            let vocab = Vocab { decades: vec![], classes: vec![], genres: vec![] };
            let log = parse_events(EVENTS_HEADER.as_bytes()).unwrap();
            let catalog = parse_songs(SONGS_HEADER.as_bytes()).unwrap();
            let features = build_feature_matrix(
                &[],
                &log,
                &catalog,
                &vocab,
                &PercentileTables::default(),
                &BehaviorParams::default(),
            )
            .unwrap();
            let err = run_matrix(
                &f.ctx,
                &f.random,
                &f.pop,
                &f.svd,
                &PredictionSource::Models { models: &[], features: &features },
            )
            .unwrap_err();
            assert_eq!(err.to_string(), "no regression model for SVD-I/P1@10");
        }
    }
}
