//! Train/test/reg user split with per-user visible/hidden partitions of
//! matrix entries. Fully determined by (matrix, fractions, seed).

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use serde::{Deserialize, Serialize};

use crate::rng::{mix, rng_from, substream_seed};
use crate::{Error, Result};

use super::matrix::PlaycountMatrix;

/// Role assignments plus the per-user entry partitions. Users are matrix
/// row indices; entries are artist columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub seed: u64,
    pub users_train: Vec<usize>,
    pub users_test: Vec<usize>,
    /// Subset of `users_train` used to fit the performance regressions.
    pub users_reg: Vec<usize>,
    pub test_visible: BTreeMap<usize, Vec<u32>>,
    pub test_hidden: BTreeMap<usize, Vec<u32>>,
    pub reg_train: BTreeMap<usize, Vec<u32>>,
    pub reg_test: BTreeMap<usize, Vec<u32>>,
}

impl SplitPlan {
    /// Test users whose single entry could not be hidden. They receive
    /// recommendations but carry no relevance judgments.
    pub fn unsplittable_test_users(&self) -> Vec<usize> {
        self.users_test
            .iter()
            .copied()
            .filter(|u| self.test_hidden[u].is_empty())
            .collect()
    }

    pub fn unsplittable_reg_users(&self) -> Vec<usize> {
        self.users_reg
            .iter()
            .copied()
            .filter(|u| self.reg_test[u].is_empty())
            .collect()
    }
}

/// Sample test and reg users and partition their entries into visible and
/// hidden parts, hiding `hidden_frac` of each user's entries (at least one
/// when the user has two or more).
pub fn make_split(
    m: &PlaycountMatrix,
    test_frac: f64,
    reg_frac: f64,
    hidden_frac: f64,
    seed: u64,
) -> Result<SplitPlan> {
    for (name, v) in [("test_frac", test_frac), ("reg_frac", reg_frac), ("hidden_frac", hidden_frac)]
    {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::data(format!("{name} must be in (0, 1), got {v}")));
        }
    }
    let n_users = m.n_users();
    let n_test = (test_frac * n_users as f64).round() as usize;
    if n_test == 0 {
        return Err(Error::data("split would leave users_test empty"));
    }
    if n_test >= n_users {
        return Err(Error::data("split would leave users_train empty"));
    }

    let mut pick_rng = rng_from(substream_seed(seed, "split/users"));
    let mut users_test: Vec<usize> =
        rand::seq::index::sample(&mut pick_rng, n_users, n_test).into_iter().collect();
    users_test.sort_unstable();
    let mut users_train: Vec<usize> = Vec::with_capacity(n_users - n_test);
    let mut it = users_test.iter().peekable();
    for u in 0..n_users {
        if it.peek() == Some(&&u) {
            it.next();
        } else {
            users_train.push(u);
        }
    }

    let n_reg = (reg_frac * n_users as f64).round() as usize;
    if n_reg == 0 {
        return Err(Error::data("split would leave users_reg empty"));
    }
    if n_reg > users_train.len() {
        return Err(Error::data(format!(
            "reg_frac requests {n_reg} users but only {} train users exist",
            users_train.len()
        )));
    }
    let mut reg_rng = rng_from(substream_seed(seed, "split/reg"));
    let mut users_reg: Vec<usize> =
        rand::seq::index::sample(&mut reg_rng, users_train.len(), n_reg)
            .into_iter()
            .map(|i| users_train[i])
            .collect();
    users_reg.sort_unstable();

    let test_seed = substream_seed(seed, "split/test_hide");
    let mut test_visible = BTreeMap::new();
    let mut test_hidden = BTreeMap::new();
    for &u in &users_test {
        let (vis, hid) = partition_row(m.row(u), hidden_frac, mix(test_seed, u as u64));
        test_visible.insert(u, vis);
        test_hidden.insert(u, hid);
    }

    let reg_seed = substream_seed(seed, "split/reg_hide");
    let mut reg_train = BTreeMap::new();
    let mut reg_test = BTreeMap::new();
    for &u in &users_reg {
        let (vis, hid) = partition_row(m.row(u), hidden_frac, mix(reg_seed, u as u64));
        reg_train.insert(u, vis);
        reg_test.insert(u, hid);
    }

    Ok(SplitPlan {
        seed,
        users_train,
        users_test,
        users_reg,
        test_visible,
        test_hidden,
        reg_train,
        reg_test,
    })
}

/// Split one user's entries. Single entries stay visible; otherwise the
/// hidden count is `round(hidden_frac * n)` clamped to `[1, n-1]`.
fn partition_row(row: &[(u32, u32)], hidden_frac: f64, seed: u64) -> (Vec<u32>, Vec<u32>) {
    let n = row.len();
    if n <= 1 {
        return (row.iter().map(|&(a, _)| a).collect(), Vec::new());
    }
    let h = ((hidden_frac * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<u32> = row.iter().map(|&(a, _)| a).collect();
    order.shuffle(&mut rng_from(seed));
    let mut hidden: Vec<u32> = order[..h].to_vec();
    let mut visible: Vec<u32> = order[h..].to_vec();
    hidden.sort_unstable();
    visible.sort_unstable();
    (visible, hidden)
}

/// On-disk form: ids instead of indices, sorted keys, trailing newline.
#[derive(Serialize, Deserialize)]
struct SplitFile {
    seed: u64,
    users_train: Vec<String>,
    users_test: Vec<String>,
    users_reg: Vec<String>,
    test_visible: BTreeMap<String, Vec<String>>,
    test_hidden: BTreeMap<String, Vec<String>>,
    reg_train: BTreeMap<String, Vec<String>>,
    reg_test: BTreeMap<String, Vec<String>>,
}

pub fn split_to_json(plan: &SplitPlan, m: &PlaycountMatrix) -> Result<String> {
    let users = |v: &[usize]| v.iter().map(|&u| m.user_id(u).to_string()).collect();
    let entries = |map: &BTreeMap<usize, Vec<u32>>| {
        map.iter()
            .map(|(&u, cols)| {
                (
                    m.user_id(u).to_string(),
                    cols.iter().map(|&a| m.artist_id(a).to_string()).collect(),
                )
            })
            .collect()
    };
    let file = SplitFile {
        seed: plan.seed,
        users_train: users(&plan.users_train),
        users_test: users(&plan.users_test),
        users_reg: users(&plan.users_reg),
        test_visible: entries(&plan.test_visible),
        test_hidden: entries(&plan.test_hidden),
        reg_train: entries(&plan.reg_train),
        reg_test: entries(&plan.reg_test),
    };
    crate::report::to_sorted_json_string(&file)
}

pub fn parse_split(text: &str, m: &PlaycountMatrix) -> Result<SplitPlan> {
    let file: SplitFile =
        serde_json::from_str(text).map_err(|e| Error::Serde(format!("split.json: {e}")))?;
    let users = |v: &[String]| -> Result<Vec<usize>> {
        v.iter()
            .map(|id| {
                m.user_index(id)
                    .ok_or_else(|| Error::data(format!("split references unknown user `{id}`")))
            })
            .collect()
    };
    let entries = |map: &BTreeMap<String, Vec<String>>| -> Result<BTreeMap<usize, Vec<u32>>> {
        map.iter()
            .map(|(id, artists)| {
                let u = m
                    .user_index(id)
                    .ok_or_else(|| Error::data(format!("split references unknown user `{id}`")))?;
                let cols = artists
                    .iter()
                    .map(|a| {
                        m.artist_index(a).ok_or_else(|| {
                            Error::data(format!("split references unknown artist `{a}`"))
                        })
                    })
                    .collect::<Result<Vec<u32>>>()?;
                Ok((u, cols))
            })
            .collect()
    };
    let plan = SplitPlan {
        seed: file.seed,
        users_train: users(&file.users_train)?,
        users_test: users(&file.users_test)?,
        users_reg: users(&file.users_reg)?,
        test_visible: entries(&file.test_visible)?,
        test_hidden: entries(&file.test_hidden)?,
        reg_train: entries(&file.reg_train)?,
        reg_test: entries(&file.reg_test)?,
    };
    validate_partitions(&plan, m)?;
    Ok(plan)
}

/// Per split user, visible and hidden must partition the user's row.
fn validate_partitions(plan: &SplitPlan, m: &PlaycountMatrix) -> Result<()> {
    let check = |users: &[usize],
                 vis: &BTreeMap<usize, Vec<u32>>,
                 hid: &BTreeMap<usize, Vec<u32>>|
     -> Result<()> {
        for &u in users {
            let (v, h) = match (vis.get(&u), hid.get(&u)) {
                (Some(v), Some(h)) => (v, h),
                _ => {
                    return Err(Error::data(format!(
                        "split missing entry partition for user `{}`",
                        m.user_id(u)
                    )))
                }
            };
            let mut merged: Vec<u32> = v.iter().chain(h.iter()).copied().collect();
            merged.sort_unstable();
            let row: Vec<u32> = m.row(u).iter().map(|&(a, _)| a).collect();
            if merged != row {
                return Err(Error::data(format!(
                    "split partition does not cover user `{}`'s entries",
                    m.user_id(u)
                )));
            }
        }
        Ok(())
    };
    check(&plan.users_test, &plan.test_visible, &plan.test_hidden)?;
    check(&plan.users_reg, &plan.reg_train, &plan.reg_test)
}
