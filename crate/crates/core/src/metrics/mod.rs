//! Ranking quality measures over held-out listening data, under two
//! relevance thresholds (any playcount vs at least ten), plus the two
//! corpus-level list statistics DIV and REP. A brute-force oracle twin of
//! every measure lives in [`oracle`] for equivalence testing.

pub mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::parallel;
use crate::recsys::RankedList;
use crate::{Error, Result};

/// The fourteen reported measures, declared in report column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetricId {
    P1At10,
    P10At10,
    Map1At500,
    Map10At500,
    R1At10,
    R10At10,
    R1At500,
    R10At500,
    Rank1,
    Rank10,
    NdcgAt500,
    NdcgAt10,
    Div,
    Rep,
}

pub const ALL_METRICS: [MetricId; 14] = [
    MetricId::P1At10,
    MetricId::P10At10,
    MetricId::Map1At500,
    MetricId::Map10At500,
    MetricId::R1At10,
    MetricId::R10At10,
    MetricId::R1At500,
    MetricId::R10At500,
    MetricId::Rank1,
    MetricId::Rank10,
    MetricId::NdcgAt500,
    MetricId::NdcgAt10,
    MetricId::Div,
    MetricId::Rep,
];

/// The twelve per-user ranking measures (everything except DIV/REP);
/// these are the regression targets.
pub const RANKING_METRICS: [MetricId; 12] = [
    MetricId::P1At10,
    MetricId::P10At10,
    MetricId::Map1At500,
    MetricId::Map10At500,
    MetricId::R1At10,
    MetricId::R10At10,
    MetricId::R1At500,
    MetricId::R10At500,
    MetricId::Rank1,
    MetricId::Rank10,
    MetricId::NdcgAt500,
    MetricId::NdcgAt10,
];

impl MetricId {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::P1At10 => "P1@10",
            MetricId::P10At10 => "P10@10",
            MetricId::Map1At500 => "MAP1@500",
            MetricId::Map10At500 => "MAP10@500",
            MetricId::R1At10 => "R1@10",
            MetricId::R10At10 => "R10@10",
            MetricId::R1At500 => "R1@500",
            MetricId::R10At500 => "R10@500",
            MetricId::Rank1 => "Rank1",
            MetricId::Rank10 => "Rank10",
            MetricId::NdcgAt500 => "nDCG@500",
            MetricId::NdcgAt10 => "nDCG@10",
            MetricId::Div => "DIV",
            MetricId::Rep => "REP",
        }
    }

    /// Orientation: percentile ranks and repetition improve downward.
    pub fn higher_is_better(self) -> bool {
        !matches!(self, MetricId::Rank1 | MetricId::Rank10 | MetricId::Rep)
    }

    /// Playcount threshold defining the relevance set, where applicable.
    pub fn threshold(self) -> Option<u32> {
        match self {
            MetricId::P1At10 | MetricId::Map1At500 | MetricId::R1At10 | MetricId::R1At500
            | MetricId::Rank1 => Some(1),
            MetricId::P10At10 | MetricId::Map10At500 | MetricId::R10At10
            | MetricId::R10At500 | MetricId::Rank10 => Some(10),
            _ => None,
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ALL_METRICS
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

impl Serialize for MetricId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for MetricId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(D::Error::custom)
    }
}

/// |top-k ∩ relevant| / k. Denominator stays k even when the list is
/// shorter; the shortfall counts as misses.
pub fn precision_at_k(items: &[u32], relevant: &BTreeSet<u32>, k: usize) -> f64 {
    let hits = items.iter().take(k).filter(|a| relevant.contains(a)).count();
    hits as f64 / k as f64
}

/// |top-k ∩ relevant| / |relevant|. Callers guarantee a non-empty
/// relevant set (users without one are skipped upstream).
pub fn recall_at_k(items: &[u32], relevant: &BTreeSet<u32>, k: usize) -> f64 {
    debug_assert!(!relevant.is_empty());
    let hits = items.iter().take(k).filter(|a| relevant.contains(a)).count();
    hits as f64 / relevant.len() as f64
}

/// Mean of P@r over the ranks r ≤ k holding a relevant item, normalized
/// by min(|relevant|, k) so a perfect prefix scores 1.
pub fn average_precision_at_k(items: &[u32], relevant: &BTreeSet<u32>, k: usize) -> f64 {
    debug_assert!(!relevant.is_empty());
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (idx, a) in items.iter().take(k).enumerate() {
        if relevant.contains(a) {
            hits += 1;
            sum += hits as f64 / (idx + 1) as f64;
        }
    }
    sum / relevant.len().min(k) as f64
}

/// Mean percentile position (position−1)/(N−1) of the relevant artists in
/// the full candidate ranking; lower is better. A single-candidate list
/// yields 0.
pub fn percentile_rank(full_list: &[u32], relevant: &BTreeSet<u32>) -> f64 {
    debug_assert!(!relevant.is_empty());
    let n = full_list.len();
    if n <= 1 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut found = 0usize;
    for (idx, a) in full_list.iter().enumerate() {
        if relevant.contains(a) {
            sum += idx as f64 / (n - 1) as f64;
            found += 1;
        }
    }
    debug_assert_eq!(found, relevant.len(), "relevant artist missing from candidate list");
    sum / found as f64
}

/// Playcount-weighted percentile variant: each relevant artist's
/// percentile weighted by its hidden playcount.
pub fn percentile_rank_weighted(
    full_list: &[u32],
    graded: &BTreeMap<u32, u32>,
    relevant: &BTreeSet<u32>,
) -> f64 {
    debug_assert!(!relevant.is_empty());
    let n = full_list.len();
    if n <= 1 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut mass = 0.0;
    for (idx, a) in full_list.iter().enumerate() {
        if relevant.contains(a) {
            let w = f64::from(graded[a]);
            sum += w * idx as f64 / (n - 1) as f64;
            mass += w;
        }
    }
    sum / mass
}

/// DCG@k / IDCG@k with gain = raw hidden playcount and discount
/// 1/log₂(r+1). The ideal ordering sorts by descending playcount, ties by
/// ascending artist index. Zero when nothing is graded.
pub fn ndcg_at_k(items: &[u32], graded: &BTreeMap<u32, u32>, k: usize) -> f64 {
    if graded.is_empty() {
        return 0.0;
    }
    let mut dcg = 0.0;
    for (idx, a) in items.iter().take(k).enumerate() {
        if let Some(&g) = graded.get(a) {
            dcg += f64::from(g) / ((idx + 2) as f64).log2();
        }
    }
    let mut ideal: Vec<(u32, u32)> = graded.iter().map(|(&a, &g)| (a, g)).collect();
    ideal.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
    let mut idcg = 0.0;
    for (idx, &(_, g)) in ideal.iter().take(k).enumerate() {
        idcg += f64::from(g) / ((idx + 2) as f64).log2();
    }
    dcg / idcg
}

/// Percentage of the catalog appearing in at least one list.
pub fn diversity(lists: &[&[u32]], catalog_size: usize) -> f64 {
    if catalog_size == 0 {
        return 0.0;
    }
    let mut seen = vec![false; catalog_size];
    for list in lists {
        for &a in *list {
            seen[a as usize] = true;
        }
    }
    100.0 * seen.iter().filter(|s| **s).count() as f64 / catalog_size as f64
}

/// Average number of users reached per distinct recommended artist. Items
/// are distinct within a list, so total list slots / distinct artists.
pub fn repetition(lists: &[&[u32]]) -> f64 {
    let mut distinct: BTreeSet<u32> = BTreeSet::new();
    let mut slots = 0usize;
    for list in lists {
        slots += list.len();
        distinct.extend(list.iter().copied());
    }
    if distinct.is_empty() {
        return 0.0;
    }
    slots as f64 / distinct.len() as f64
}

/// Everything the evaluation harness needs to know about the held-out
/// data: which users to score, their hidden (artist, playcount) truth,
/// and which artists each system must exclude from its lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalContext {
    pub users: Vec<usize>,
    /// Aligned with `users`: hidden entries with their true playcounts.
    pub hidden: Vec<Vec<(u32, u32)>>,
    /// Aligned with `users`: artists excluded from recommendation
    /// (the user's visible training profile).
    pub exclude: Vec<Vec<u32>>,
    pub catalog_size: usize,
    /// List length for DIV/REP and the widest top-k metric.
    pub list_k: usize,
    /// Use the playcount-weighted percentile-rank variant.
    pub weighted_rank: bool,
}

impl EvalContext {
    /// Build from a split's test role: hidden entries are scored, visible
    /// entries are excluded from lists.
    pub fn for_test_users(
        m: &crate::corpus::PlaycountMatrix,
        plan: &crate::corpus::SplitPlan,
    ) -> EvalContext {
        Self::from_partition(m, &plan.users_test, &plan.test_visible, &plan.test_hidden)
    }

    /// Build from a split's reg role: the reg-test entries act as hidden
    /// truth, the reg-train entries are excluded.
    pub fn for_reg_users(
        m: &crate::corpus::PlaycountMatrix,
        plan: &crate::corpus::SplitPlan,
    ) -> EvalContext {
        Self::from_partition(m, &plan.users_reg, &plan.reg_train, &plan.reg_test)
    }

    fn from_partition(
        m: &crate::corpus::PlaycountMatrix,
        users: &[usize],
        visible: &BTreeMap<usize, Vec<u32>>,
        hidden: &BTreeMap<usize, Vec<u32>>,
    ) -> EvalContext {
        let mut hid = Vec::with_capacity(users.len());
        let mut exc = Vec::with_capacity(users.len());
        for &u in users {
            let counts: BTreeMap<u32, u32> = m.row(u).iter().copied().collect();
            hid.push(hidden[&u].iter().map(|&a| (a, counts[&a])).collect());
            exc.push(visible[&u].clone());
        }
        EvalContext {
            users: users.to_vec(),
            hidden: hid,
            exclude: exc,
            catalog_size: m.n_artists(),
            list_k: 500,
            weighted_rank: false,
        }
    }

    /// Candidate count for the i-th user: full catalog minus exclusions.
    pub fn n_candidates(&self, i: usize) -> usize {
        self.catalog_size - self.exclude[i].len()
    }
}

/// Per-user and aggregate results for one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub system: String,
    pub per_user: BTreeMap<usize, BTreeMap<MetricId, f64>>,
    /// Unweighted means over scoring users, plus corpus-level DIV/REP.
    pub aggregate: BTreeMap<MetricId, f64>,
    /// Users lacking a qualifying relevant set, per metric.
    pub users_skipped: BTreeMap<MetricId, usize>,
}

/// Produce full candidate rankings for every context user, in parallel,
/// index-aligned with `ctx.users`.
pub fn rank_all<F>(ctx: &EvalContext, rank_one: F) -> Vec<RankedList>
where
    F: Fn(usize, &[u32], usize) -> RankedList + Sync + Send,
{
    parallel::map_indexed(ctx.users.len(), |i| {
        rank_one(ctx.users[i], &ctx.exclude[i], ctx.n_candidates(i))
    })
}

/// Score one system's lists. Lists must be index-aligned with the context
/// users and rank the complete candidate set (needed by the percentile
/// metrics; top-k metrics read prefixes).
pub fn evaluate_lists(
    system: &str,
    ctx: &EvalContext,
    lists: &[RankedList],
) -> Result<MetricReport> {
    if ctx.users.is_empty() {
        return Err(Error::data("evaluate_lists: no users to evaluate"));
    }
    if lists.len() != ctx.users.len() {
        return Err(Error::data(format!(
            "evaluate_lists: {} lists for {} users",
            lists.len(),
            ctx.users.len()
        )));
    }
    for (i, list) in lists.iter().enumerate() {
        if list.user != ctx.users[i] {
            return Err(Error::data(format!(
                "evaluate_lists: list {i} is for user {} but context has {}",
                list.user, ctx.users[i]
            )));
        }
        if list.items.len() != ctx.n_candidates(i) {
            return Err(Error::data(format!(
                "evaluate_lists: user {} list ranks {} of {} candidates",
                list.user,
                list.items.len(),
                ctx.n_candidates(i)
            )));
        }
    }

    let per_user_vec: Vec<BTreeMap<MetricId, f64>> =
        parallel::map_indexed(ctx.users.len(), |i| {
            score_user(&lists[i].items, &ctx.hidden[i], ctx.weighted_rank)
        });

    let mut per_user = BTreeMap::new();
    let mut aggregate = BTreeMap::new();
    let mut users_skipped = BTreeMap::new();
    for metric in RANKING_METRICS {
        let mut sum = 0.0;
        let mut count = 0usize;
        for row in &per_user_vec {
            if let Some(v) = row.get(&metric) {
                if !v.is_finite() {
                    return Err(Error::numeric(format!("non-finite {metric} value")));
                }
                sum += v;
                count += 1;
            }
        }
        if count > 0 {
            aggregate.insert(metric, sum / count as f64);
        }
        users_skipped.insert(metric, ctx.users.len() - count);
    }
    for (i, row) in per_user_vec.into_iter().enumerate() {
        if !row.is_empty() {
            per_user.insert(ctx.users[i], row);
        }
    }

    let prefixes: Vec<&[u32]> = lists
        .iter()
        .map(|l| &l.items[..l.items.len().min(ctx.list_k)])
        .collect();
    aggregate.insert(MetricId::Div, diversity(&prefixes, ctx.catalog_size));
    aggregate.insert(MetricId::Rep, repetition(&prefixes));

    Ok(MetricReport { system: system.to_string(), per_user, aggregate, users_skipped })
}

/// The twelve ranking metrics for one user; metrics whose relevance set is
/// empty are absent from the returned map.
fn score_user(
    items: &[u32],
    hidden: &[(u32, u32)],
    weighted_rank: bool,
) -> BTreeMap<MetricId, f64> {
    let mut out = BTreeMap::new();
    let graded: BTreeMap<u32, u32> = hidden.iter().copied().collect();
    for (threshold, p, map, r10s, r500s, rank) in [
        (1, MetricId::P1At10, MetricId::Map1At500, MetricId::R1At10, MetricId::R1At500, MetricId::Rank1),
        (10, MetricId::P10At10, MetricId::Map10At500, MetricId::R10At10, MetricId::R10At500, MetricId::Rank10),
    ] {
        let relevant: BTreeSet<u32> =
            hidden.iter().filter(|&&(_, c)| c >= threshold).map(|&(a, _)| a).collect();
        if relevant.is_empty() {
            continue;
        }
        out.insert(p, precision_at_k(items, &relevant, 10));
        out.insert(map, average_precision_at_k(items, &relevant, 500));
        out.insert(r10s, recall_at_k(items, &relevant, 10));
        out.insert(r500s, recall_at_k(items, &relevant, 500));
        let pr = if weighted_rank {
            percentile_rank_weighted(items, &graded, &relevant)
        } else {
            percentile_rank(items, &relevant)
        };
        out.insert(rank, pr);
    }
    if !graded.is_empty() {
        out.insert(MetricId::NdcgAt500, ndcg_at_k(items, &graded, 500));
        out.insert(MetricId::NdcgAt10, ndcg_at_k(items, &graded, 10));
    }
    out
}
