//! Brute-force reference implementations of every measure, written as
//! directly from the definitions as possible and sharing no code with the
//! production paths. The equivalence suite drives both over random
//! instances and demands agreement to 1e-12.

/// Count-by-scan precision: walk the top k slots, linear-search the
/// relevant slice for each.
pub fn precision_at_k(items: &[u32], relevant: &[u32], k: usize) -> f64 {
    let mut hits = 0;
    for pos in 0..k.min(items.len()) {
        if relevant.iter().any(|r| *r == items[pos]) {
            hits += 1;
        }
    }
    hits as f64 / k as f64
}

pub fn recall_at_k(items: &[u32], relevant: &[u32], k: usize) -> f64 {
    let mut hits = 0;
    for pos in 0..k.min(items.len()) {
        if relevant.iter().any(|r| *r == items[pos]) {
            hits += 1;
        }
    }
    hits as f64 / relevant.len() as f64
}

/// AP recomputed the quadratic way: at every relevant rank r, re-count
/// the hits in the first r slots from scratch.
pub fn average_precision_at_k(items: &[u32], relevant: &[u32], k: usize) -> f64 {
    let mut sum = 0.0;
    for pos in 0..k.min(items.len()) {
        if relevant.iter().any(|r| *r == items[pos]) {
            let mut hits_so_far = 0;
            for q in 0..=pos {
                if relevant.iter().any(|r| *r == items[q]) {
                    hits_so_far += 1;
                }
            }
            sum += hits_so_far as f64 / (pos + 1) as f64;
        }
    }
    sum / relevant.len().min(k) as f64
}

/// Mean percentile via per-artist linear position search.
pub fn percentile_rank(full_list: &[u32], relevant: &[u32]) -> f64 {
    let n = full_list.len();
    if n <= 1 {
        return 0.0;
    }
    let mut sum = 0.0;
    for r in relevant {
        let pos = full_list.iter().position(|a| a == r).expect("relevant artist in list");
        sum += pos as f64 / (n - 1) as f64;
    }
    sum / relevant.len() as f64
}

pub fn percentile_rank_weighted(full_list: &[u32], graded: &[(u32, u32)]) -> f64 {
    let n = full_list.len();
    if n <= 1 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut mass = 0.0;
    for &(a, g) in graded {
        let pos = full_list.iter().position(|x| *x == a).expect("graded artist in list");
        sum += f64::from(g) * pos as f64 / (n - 1) as f64;
        mass += f64::from(g);
    }
    sum / mass
}

fn dcg(items: &[u32], graded: &[(u32, u32)], k: usize) -> f64 {
    let mut total = 0.0;
    for pos in 0..k.min(items.len()) {
        for &(a, g) in graded {
            if a == items[pos] {
                total += f64::from(g) / ((pos + 2) as f64).log2();
            }
        }
    }
    total
}

/// nDCG with the ideal ordering produced by repeated max extraction
/// (highest gain, then smallest artist index) instead of a sort.
pub fn ndcg_at_k(items: &[u32], graded: &[(u32, u32)], k: usize) -> f64 {
    if graded.is_empty() {
        return 0.0;
    }
    let mut remaining: Vec<(u32, u32)> = graded.to_vec();
    let mut ideal: Vec<u32> = Vec::new();
    while !remaining.is_empty() {
        let mut best = 0;
        for i in 1..remaining.len() {
            let (ba, bg) = remaining[best];
            let (ia, ig) = remaining[i];
            if ig > bg || (ig == bg && ia < ba) {
                best = i;
            }
        }
        ideal.push(remaining.remove(best).0);
    }
    let idcg = dcg(&ideal, graded, k);
    dcg(items, graded, k) / idcg
}

pub fn diversity(lists: &[&[u32]], catalog_size: usize) -> f64 {
    let mut union: Vec<u32> = Vec::new();
    for list in lists {
        for &a in *list {
            if !union.contains(&a) {
                union.push(a);
            }
        }
    }
    100.0 * union.len() as f64 / catalog_size as f64
}

pub fn repetition(lists: &[&[u32]]) -> f64 {
    let mut union: Vec<u32> = Vec::new();
    for list in lists {
        for &a in *list {
            if !union.contains(&a) {
                union.push(a);
            }
        }
    }
    if union.is_empty() {
        return 0.0;
    }
    let mut reached = 0usize;
    for a in &union {
        for list in lists {
            if list.iter().any(|x| x == a) {
                reached += 1;
            }
        }
    }
    reached as f64 / union.len() as f64
}
