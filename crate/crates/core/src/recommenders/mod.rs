//! Base recommenders producing the top-z lists that get re-ranked.

mod knn;
mod wrmf;

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub use knn::{cosine_similarity, train_item_knn, train_user_knn, NeighborhoodKind, NeighborhoodModel};
pub use wrmf::{train_wrmf, FactorModel, WrmfParams};

use crate::error::{Error, Result};
use crate::model::{RatingsDataset, ScoredList, UserId};
use crate::par;

/// Anything that can score every item for a user.
pub trait Scorer: Sync {
    /// Predicted score for each item index of `train`.
    fn predict(&self, train: &RatingsDataset, user: UserId) -> Vec<f64>;
}

/// Top-`z` items the user has not rated in `train`, by predicted score
/// descending. Ties keep item-index order.
pub fn recommend<S: Scorer + ?Sized>(
    model: &S,
    train: &RatingsDataset,
    user: &str,
    z: usize,
) -> Result<ScoredList> {
    let uid = train
        .user_id(user)
        .ok_or_else(|| Error::UnknownUser(user.to_owned()))?;
    if train.user_ratings(uid).is_empty() {
        return Err(Error::ColdUser(user.to_owned()));
    }
    Ok(recommend_known(model, train, uid, z))
}

fn recommend_known<S: Scorer + ?Sized>(
    model: &S,
    train: &RatingsDataset,
    user: UserId,
    z: usize,
) -> ScoredList {
    let scores = model.predict(train, user);
    let mut rated = vec![false; train.num_items()];
    for &(item, _) in train.user_ratings(user) {
        rated[item.index()] = true;
    }
    let mut candidates: Vec<(usize, f64)> = scores
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !rated[*i])
        .collect();
    candidates.sort_by(|a, b| b.1.total_cmp(&a.1));
    candidates.truncate(z);
    let entries = candidates
        .into_iter()
        .map(|(i, s)| (train.item_name(crate::ItemId(i as u32)).to_owned(), s))
        .collect();
    ScoredList::new(train.user_name(user), entries).expect("candidates are sorted and distinct")
}

/// [`recommend`] for many users at once, keyed by user identifier.
/// Users without training ratings are skipped.
pub fn recommend_all<S: Scorer + ?Sized>(
    model: &S,
    train: &RatingsDataset,
    users: &[UserId],
    z: usize,
) -> BTreeMap<String, ScoredList> {
    let warm: Vec<UserId> = users
        .iter()
        .copied()
        .filter(|&u| !train.user_ratings(u).is_empty())
        .collect();
    par::map(&warm, |&u| recommend_known(model, train, u, z))
        .into_iter()
        .map(|list| (list.user().to_owned(), list))
        .collect()
}

/// Min-max rescale scores to `[0, 1]`. A constant list maps to all ones.
pub fn normalize_scores(list: &ScoredList) -> ScoredList {
    let (min, max) = list
        .scores()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s), hi.max(s))
        });
    let range = max - min;
    if list.is_empty() || range.is_nan() || range <= 0.0 {
        return list.map_scores(|_| 1.0);
    }
    list.map_scores(|s| ((s - min) / range).clamp(0.0, 1.0))
}

/// Read externally produced `user item score` rows (tab-separated).
pub fn import_rankings(path: impl AsRef<Path>) -> Result<BTreeMap<String, ScoredList>> {
    let path = path.as_ref();
    let reader = File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))?;
    let mut rows: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(Error::parse(path, line_no, "expected `user item score` columns"));
        }
        let score: f64 = fields[2].parse().map_err(|_| {
            Error::parse(path, line_no, format!("score `{}` is not a number", fields[2]))
        })?;
        if !score.is_finite() {
            return Err(Error::parse(path, line_no, format!("score {score} is not finite")));
        }
        match seen.entry((fields[0].to_owned(), fields[1].to_owned())) {
            Entry::Occupied(first) => {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!(
                        "duplicate ({}, {}) first seen on line {}",
                        fields[0],
                        fields[1],
                        first.get()
                    ),
                ));
            }
            Entry::Vacant(slot) => {
                slot.insert(line_no);
            }
        }
        rows.entry(fields[0].to_owned())
            .or_default()
            .push((fields[1].to_owned(), score));
    }
    rows.into_iter()
        .map(|(user, entries)| {
            let list = ScoredList::from_unsorted(user.clone(), entries)?;
            Ok((user, list))
        })
        .collect()
}

/// Write lists as `user item score` rows. Scores use the shortest
/// representation that parses back to the same `f64`.
pub fn export_rankings<'a>(
    path: impl AsRef<Path>,
    lists: impl IntoIterator<Item = &'a ScoredList>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))?;
    for list in lists {
        for (item, score) in list.entries() {
            writeln!(out, "{}\t{item}\t{score:?}", list.user()).map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}
