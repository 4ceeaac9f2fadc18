//! Interaction ingestion and preprocessing: record parsing with
//! deduplication, rating binarization, iterative k-core filtering,
//! head/tail popularity split, seeded train/val/test splits, and a
//! seeded synthetic world generator for offline experiments.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{bad} of {total} lines malformed (> 50%) in {stream}")]
    TooManyMalformed { stream: &'static str, bad: usize, total: usize },
    #[error("rating {0} outside [1,5]")]
    RatingOutOfRange(i64),
    #[error("empty tail: cannot split")]
    EmptyTail,
    #[error("empty interaction set")]
    EmptyInteractions,
    #[error("malformed manifest line {0}")]
    MalformedManifest(usize),
    #[error("unknown id: {0}")]
    UnknownId(String),
}

/// One deduplicated user-item rating event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub user_id: String,
    pub item_id: String,
    pub rating: u8,
    pub timestamp: i64,
}

/// Item text description (title substitutes when the description is missing).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemMeta {
    pub item_id: String,
    pub description: String,
}

/// Field names for the line-delimited JSON review/metadata inputs.
#[derive(Debug, Clone)]
pub struct FieldConfig {
    pub user_field: String,
    pub item_field: String,
    pub rating_field: String,
    pub timestamp_field: String,
    pub title_field: String,
    pub description_field: String,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            user_field: "reviewerID".into(),
            item_field: "asin".into(),
            rating_field: "overall".into(),
            timestamp_field: "unixReviewTime".into(),
            title_field: "title".into(),
            description_field: "description".into(),
        }
    }
}

#[derive(Debug, Default, Clone)]
pub struct ParseStats {
    pub review_lines: usize,
    pub review_malformed: usize,
    pub meta_lines: usize,
    pub meta_malformed: usize,
}

fn json_str(v: &serde_json::Value, key: &str) -> Option<String> {
    match v.get(key)? {
        serde_json::Value::String(s) => Some(s.clone()),
        // some metadata dumps store descriptions as an array of strings
        serde_json::Value::Array(a) => {
            let joined = a
                .iter()
                .filter_map(|x| x.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            Some(joined)
        }
        other => Some(other.to_string()),
    }
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parse line-delimited review and metadata streams. Malformed lines are
/// counted and skipped; duplicates of a (user, item) pair keep the entry
/// with the latest timestamp. Fails if more than half the lines of either
/// stream are malformed.
pub fn parse_records<R1: BufRead, R2: BufRead>(
    reviews: R1,
    meta: R2,
    fields: &FieldConfig,
) -> Result<(Vec<Interaction>, Vec<ItemMeta>, ParseStats), DatasetError> {
    let mut stats = ParseStats::default();
    let mut dedup: HashMap<(String, String), Interaction> = HashMap::new();

    for line in reviews.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        stats.review_lines += 1;
        let parsed = serde_json::from_str::<serde_json::Value>(&line)
            .ok()
            .and_then(|v| {
                let user_id = v.get(&fields.user_field)?.as_str()?.to_string();
                let item_id = v.get(&fields.item_field)?.as_str()?.to_string();
                let rating = v.get(&fields.rating_field)?.as_f64()?;
                let timestamp = v.get(&fields.timestamp_field)?.as_i64()?;
                if rating.fract() != 0.0 || !(1.0..=5.0).contains(&rating) {
                    return None;
                }
                Some(Interaction { user_id, item_id, rating: rating as u8, timestamp })
            });
        match parsed {
            Some(it) => {
                let key = (it.user_id.clone(), it.item_id.clone());
                match dedup.get(&key) {
                    Some(prev) if prev.timestamp > it.timestamp => {}
                    _ => {
                        dedup.insert(key, it);
                    }
                }
            }
            None => stats.review_malformed += 1,
        }
    }
    if stats.review_lines > 0 && stats.review_malformed * 2 > stats.review_lines {
        return Err(DatasetError::TooManyMalformed {
            stream: "reviews",
            bad: stats.review_malformed,
            total: stats.review_lines,
        });
    }

    let mut metas: BTreeMap<String, String> = BTreeMap::new();
    for line in meta.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        stats.meta_lines += 1;
        let parsed = serde_json::from_str::<serde_json::Value>(&line)
            .ok()
            .and_then(|v| {
                let item_id = v.get(&fields.item_field)?.as_str()?.to_string();
                let desc = json_str(&v, &fields.description_field)
                    .map(|s| normalize_ws(&s))
                    .filter(|s| !s.is_empty());
                let title = json_str(&v, &fields.title_field)
                    .map(|s| normalize_ws(&s))
                    .filter(|s| !s.is_empty());
                let description = desc.or(title)?;
                Some((item_id, description))
            });
        match parsed {
            Some((id, d)) => {
                metas.insert(id, d);
            }
            None => stats.meta_malformed += 1,
        }
    }
    if stats.meta_lines > 0 && stats.meta_malformed * 2 > stats.meta_lines {
        return Err(DatasetError::TooManyMalformed {
            stream: "metadata",
            bad: stats.meta_malformed,
            total: stats.meta_lines,
        });
    }

    let mut interactions: Vec<Interaction> = dedup.into_values().collect();
    interactions.sort_by(|a, b| (&a.user_id, &a.item_id).cmp(&(&b.user_id, &b.item_id)));
    let metas = metas
        .into_iter()
        .map(|(item_id, description)| ItemMeta { item_id, description })
        .collect();
    Ok((interactions, metas, stats))
}

/// Binary label from a 1-5 rating: 1 iff rating >= 4.
pub fn binarize(rating: u8) -> Result<u8, DatasetError> {
    if !(1..=5).contains(&rating) {
        return Err(DatasetError::RatingOutOfRange(rating as i64));
    }
    Ok(if rating >= 4 { 1 } else { 0 })
}

/// Iteratively remove users and items with fewer than `k` interactions
/// until fixpoint. The result may be empty.
pub fn kcore_filter(interactions: Vec<Interaction>, k: usize) -> Vec<Interaction> {
    assert!(k >= 1);
    let mut current = interactions;
    loop {
        let mut user_deg: HashMap<String, usize> = HashMap::new();
        let mut item_deg: HashMap<String, usize> = HashMap::new();
        for it in &current {
            *user_deg.entry(it.user_id.clone()).or_default() += 1;
            *item_deg.entry(it.item_id.clone()).or_default() += 1;
        }
        let before = current.len();
        current.retain(|it| user_deg[it.user_id.as_str()] >= k && item_deg[it.item_id.as_str()] >= k);
        if current.len() == before {
            return current;
        }
    }
}

/// Partition items by popularity: head = top ceil(20%) by interaction
/// count (ties broken by ascending item id), tail = the rest.
pub fn head_tail_split(
    interactions: &[Interaction],
) -> Result<(BTreeSet<String>, BTreeSet<String>), DatasetError> {
    if interactions.is_empty() {
        return Err(DatasetError::EmptyInteractions);
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for it in interactions {
        *counts.entry(&it.item_id).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let n_head = (ranked.len() + 4) / 5; // ceil(0.2 * n)
    let head: BTreeSet<String> = ranked[..n_head].iter().map(|(id, _)| id.to_string()).collect();
    let tail: BTreeSet<String> = ranked[n_head..].iter().map(|(id, _)| id.to_string()).collect();
    Ok((head, tail))
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub head_items: BTreeSet<String>,
    pub tail_items: BTreeSet<String>,
    pub train: Vec<Interaction>,
    pub val: Vec<Interaction>,
    pub test: Vec<Interaction>,
    pub seed: u64,
    /// val/test interactions dropped because their user had no training data
    pub dropped_eval_pairs: usize,
}

/// Head interactions all go to training; tail interactions are shuffled
/// with the given seed and split 70/15/15 into train/val/test. Eval pairs
/// whose user has no training interaction are dropped.
pub fn make_splits(
    interactions: &[Interaction],
    head_items: &BTreeSet<String>,
    tail_items: &BTreeSet<String>,
    seed: u64,
) -> Result<DatasetSplit, DatasetError> {
    if tail_items.is_empty() {
        return Err(DatasetError::EmptyTail);
    }
    let mut train: Vec<Interaction> = Vec::new();
    let mut tail_ints: Vec<Interaction> = Vec::new();
    for it in interactions {
        if head_items.contains(&it.item_id) {
            train.push(it.clone());
        } else {
            tail_ints.push(it.clone());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    tail_ints.shuffle(&mut rng);
    let n = tail_ints.len();
    let n_val = n * 15 / 100;
    let n_test = n * 15 / 100;
    let mut val: Vec<Interaction> = tail_ints.drain(..n_val).collect();
    let mut test: Vec<Interaction> = tail_ints.drain(..n_test).collect();
    train.extend(tail_ints);

    let train_users: HashSet<&str> = train.iter().map(|it| it.user_id.as_str()).collect();
    let before = val.len() + test.len();
    val.retain(|it| train_users.contains(it.user_id.as_str()));
    test.retain(|it| train_users.contains(it.user_id.as_str()));
    let dropped = before - val.len() - test.len();

    Ok(DatasetSplit {
        head_items: head_items.clone(),
        tail_items: tail_items.clone(),
        train,
        val,
        test,
        seed,
        dropped_eval_pairs: dropped,
    })
}

/// Write the split as a line-delimited audit manifest:
/// `user_id \t item_id \t rating \t split_tag`.
pub fn write_manifest<W: std::io::Write>(split: &DatasetSplit, mut w: W) -> std::io::Result<()> {
    for (tag, ints) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        for it in ints {
            writeln!(w, "{}\t{}\t{}\t{}", it.user_id, it.item_id, it.rating, tag)?;
        }
    }
    Ok(())
}

/// Read a split manifest back into per-split interaction lists.
/// Manifest timestamps are not preserved and read back as 0.
pub fn read_manifest<R: BufRead>(
    r: R,
) -> Result<Vec<(Interaction, String)>, DatasetError> {
    let mut out = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 4 {
            return Err(DatasetError::MalformedManifest(lineno + 1));
        }
        let rating: u8 = parts[2]
            .parse()
            .map_err(|_| DatasetError::MalformedManifest(lineno + 1))?;
        if !(1..=5).contains(&rating) {
            return Err(DatasetError::MalformedManifest(lineno + 1));
        }
        out.push((
            Interaction {
                user_id: parts[0].to_string(),
                item_id: parts[1].to_string(),
                rating,
                timestamp: 0,
            },
            parts[3].to_string(),
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Dense reindexing and the rating matrix
// ---------------------------------------------------------------------------

/// Dense integer reindexing of user and item ids, shared across splits.
#[derive(Debug, Clone)]
pub struct IdIndex {
    pub user_ids: Vec<String>,
    pub item_ids: Vec<String>,
    user_map: HashMap<String, usize>,
    item_map: HashMap<String, usize>,
}

impl IdIndex {
    /// Build from the full interaction set; ids are sorted so indices are
    /// a pure function of the id sets.
    pub fn from_interactions(interactions: &[Interaction]) -> Self {
        let users: BTreeSet<&str> = interactions.iter().map(|i| i.user_id.as_str()).collect();
        let items: BTreeSet<&str> = interactions.iter().map(|i| i.item_id.as_str()).collect();
        let user_ids: Vec<String> = users.into_iter().map(str::to_string).collect();
        let item_ids: Vec<String> = items.into_iter().map(str::to_string).collect();
        let user_map = user_ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let item_map = item_ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        IdIndex { user_ids, item_ids, user_map, item_map }
    }

    /// Build from explicit id universes, e.g. a synthetic world where
    /// every user/item should keep its slot even with no interactions.
    /// Ids are sorted, so zero-padded synthetic ids map index-for-index.
    pub fn from_id_lists(user_ids: Vec<String>, item_ids: Vec<String>) -> Self {
        let mut user_ids = user_ids;
        let mut item_ids = item_ids;
        user_ids.sort();
        user_ids.dedup();
        item_ids.sort();
        item_ids.dedup();
        let user_map = user_ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let item_map = item_ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        IdIndex { user_ids, item_ids, user_map, item_map }
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn user_idx(&self, id: &str) -> Result<usize, DatasetError> {
        self.user_map.get(id).copied().ok_or_else(|| DatasetError::UnknownId(id.to_string()))
    }

    pub fn item_idx(&self, id: &str) -> Result<usize, DatasetError> {
        self.item_map.get(id).copied().ok_or_else(|| DatasetError::UnknownId(id.to_string()))
    }

    pub fn item_set_to_indices(&self, ids: &BTreeSet<String>) -> Result<BTreeSet<usize>, DatasetError> {
        ids.iter().map(|id| self.item_idx(id)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserEntry {
    pub item: usize,
    pub rating: u8,
    pub timestamp: i64,
}

/// Sparse user x item rating store over dense indices. Lookup of an
/// absent pair is `None`, never 0.
#[derive(Debug, Clone)]
pub struct RatingMatrix {
    n_users: usize,
    n_items: usize,
    entries: HashMap<(usize, usize), u8>,
    by_user: Vec<Vec<UserEntry>>,
}

impl RatingMatrix {
    pub fn from_interactions(
        index: &IdIndex,
        interactions: &[Interaction],
    ) -> Result<Self, DatasetError> {
        let mut entries = HashMap::new();
        let mut by_user: Vec<Vec<UserEntry>> = vec![Vec::new(); index.n_users()];
        for it in interactions {
            if !(1..=5).contains(&it.rating) {
                return Err(DatasetError::RatingOutOfRange(it.rating as i64));
            }
            let u = index.user_idx(&it.user_id)?;
            let i = index.item_idx(&it.item_id)?;
            entries.insert((u, i), it.rating);
            by_user[u].push(UserEntry { item: i, rating: it.rating, timestamp: it.timestamp });
        }
        for list in &mut by_user {
            list.sort_by(|a, b| a.item.cmp(&b.item));
        }
        Ok(RatingMatrix { n_users: index.n_users(), n_items: index.n_items(), entries, by_user })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_entries(&self) -> usize {
        self.entries.len()
    }

    pub fn rating(&self, user: usize, item: usize) -> Option<u8> {
        self.entries.get(&(user, item)).copied()
    }

    pub fn label(&self, user: usize, item: usize) -> Option<u8> {
        self.rating(user, item).map(|r| binarize(r).expect("stored ratings are in range"))
    }

    pub fn user_entries(&self, user: usize) -> &[UserEntry] {
        &self.by_user[user]
    }
}

// ---------------------------------------------------------------------------
// Synthetic worlds
// ---------------------------------------------------------------------------

pub const CATEGORY_NAMES: [&str; 8] = [
    "kitchen", "garden", "music", "books", "sports", "toys", "office", "outdoors",
];

/// Hidden ground truth behind a synthetic interaction set. Ratings are
/// 5 when the latent dot product is nonnegative and 1 otherwise, so the
/// simulated oracle's "correct answer" is brute-force checkable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticWorld {
    pub seed: u64,
    pub latent_dim: usize,
    pub user_factors: Vec<Vec<f64>>,
    pub item_factors: Vec<Vec<f64>>,
    pub item_category: Vec<usize>,
    pub n_categories: usize,
}

impl SyntheticWorld {
    pub fn n_users(&self) -> usize {
        self.user_factors.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_factors.len()
    }

    /// True binary label for a pair, independent of any sampling.
    pub fn true_label(&self, user: usize, item: usize) -> u8 {
        let dot: f64 = self.user_factors[user]
            .iter()
            .zip(&self.item_factors[item])
            .map(|(a, b)| a * b)
            .sum();
        if dot >= 0.0 {
            1
        } else {
            0
        }
    }

    pub fn user_id(user: usize) -> String {
        format!("synth_u{user:05}")
    }

    pub fn item_id(item: usize) -> String {
        format!("synth_i{item:05}")
    }
}

/// Mean ratings per user. The simulated oracle only sees collaborative
/// evidence through co-rated items, so the testbed is kept dense enough
/// that retrieved users overlap the target user's history.
const INTERACTIONS_PER_USER: usize = 150;

/// Exponent of the per-user activity weight 1/(u+1)^s. Real review data
/// is heavy-tailed on the user side too: a small core of heavy raters
/// provides reliable collaborative evidence while most accounts barely
/// rate anything.
const USER_ACTIVITY_EXPONENT: f64 = 2.0;

/// Deterministic synthetic world: seeded normal latent factors, one
/// category per item (named in the description text), and item exposure
/// counts following a Zipf(`zipf_s`) profile over item rank.
pub fn generate_synthetic(
    seed: u64,
    n_users: usize,
    n_items: usize,
    latent_dim: usize,
    zipf_s: f64,
) -> (Vec<Interaction>, Vec<ItemMeta>, SyntheticWorld) {
    assert!(n_users >= 1 && n_items >= 1 && latent_dim >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal_vec = |rng: &mut ChaCha8Rng, d: usize| -> Vec<f64> {
        (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    };
    let user_factors: Vec<Vec<f64>> = (0..n_users).map(|_| normal_vec(&mut rng, latent_dim)).collect();
    let item_factors: Vec<Vec<f64>> = (0..n_items).map(|_| normal_vec(&mut rng, latent_dim)).collect();

    let n_categories = CATEGORY_NAMES.len().min(n_items);
    let prototypes: Vec<Vec<f64>> = (0..n_categories).map(|_| normal_vec(&mut rng, latent_dim)).collect();
    let item_category: Vec<usize> = item_factors
        .iter()
        .map(|f| {
            let mut best = 0;
            let mut best_dot = f64::NEG_INFINITY;
            for (c, p) in prototypes.iter().enumerate() {
                let dot: f64 = f.iter().zip(p).map(|(a, b)| a * b).sum();
                if dot > best_dot {
                    best_dot = dot;
                    best = c;
                }
            }
            best
        })
        .collect();

    // Exposure counts: floor of a scaled Zipf weight is non-increasing in rank.
    let weights: Vec<f64> = (0..n_items).map(|r| 1.0 / ((r + 1) as f64).powf(zipf_s)).collect();
    let wsum: f64 = weights.iter().sum();
    let total = n_users * INTERACTIONS_PER_USER;
    let counts: Vec<usize> = weights
        .iter()
        .map(|w| (((total as f64) * w / wsum).floor() as usize).clamp(1, n_users))
        .collect();

    let user_weights: Vec<f64> =
        (0..n_users).map(|u| 1.0 / ((u + 1) as f64).powf(USER_ACTIVITY_EXPONENT)).collect();

    let mut interactions = Vec::new();
    let mut ts: i64 = 1_600_000_000;
    for (item, &count) in counts.iter().enumerate() {
        // weighted sampling without replacement (Efraimidis-Spirakis):
        // the `count` users with the largest r^(1/w) keys become raters
        let mut keyed: Vec<(f64, usize)> = user_weights
            .iter()
            .enumerate()
            .map(|(u, &w)| (rng.gen::<f64>().powf(1.0 / w), u))
            .collect();
        keyed.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite keys"));
        let mut raters: Vec<usize> = keyed[..count].iter().map(|&(_, u)| u).collect();
        raters.sort_unstable();
        for user in raters {
            let dot: f64 = user_factors[user]
                .iter()
                .zip(&item_factors[item])
                .map(|(a, b)| a * b)
                .sum();
            let rating = if dot >= 0.0 { 5 } else { 1 };
            interactions.push(Interaction {
                user_id: SyntheticWorld::user_id(user),
                item_id: SyntheticWorld::item_id(item),
                rating,
                timestamp: ts,
            });
            ts += 60;
        }
    }

    let metas: Vec<ItemMeta> = (0..n_items)
        .map(|item| ItemMeta {
            item_id: SyntheticWorld::item_id(item),
            description: format!(
                "{} product no. {}",
                CATEGORY_NAMES[item_category[item]], item
            ),
        })
        .collect();

    let world = SyntheticWorld {
        seed,
        latent_dim,
        user_factors,
        item_factors,
        item_category,
        n_categories,
    };
    (interactions, metas, world)
}
