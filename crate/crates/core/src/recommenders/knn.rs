use crate::error::{Error, Result};
use crate::model::{DenseIndex, ItemId, RatingsDataset, UserId};
use crate::par;

use super::Scorer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborhoodKind {
    Item,
    User,
}

/// Cosine-similarity neighborhoods over raw rating vectors.
#[derive(Debug, Clone)]
pub struct NeighborhoodModel {
    pub kind: NeighborhoodKind,
    /// Per entity: up to N most similar other entities, by similarity
    /// descending. Only positive similarities are kept.
    pub neighbors: Vec<Vec<(u32, f64)>>,
}

impl NeighborhoodModel {
    pub fn neighborhood_size(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// Cosine of two sparse vectors sorted by index. Zero if either vector is zero.
pub fn cosine_similarity<K: Ord + Copy>(a: &[(K, f64)], b: &[(K, f64)]) -> f64 {
    let norm = |v: &[(K, f64)]| v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let (mut i, mut j, mut dot) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Top-`size` cosine neighbors for each of `count` entities.
///
/// `vector(a)` is entity `a`'s sparse rating vector over the other side;
/// `back(o)` lists the entities that rated `o`. Dot products are
/// accumulated through co-rated pairs only.
fn build_neighbors<'a, A, B, V, W>(count: usize, size: usize, vector: V, back: W) -> Vec<Vec<(u32, f64)>>
where
    A: DenseIndex + 'a,
    B: DenseIndex + 'a,
    V: Fn(usize) -> &'a [(B, f64)] + Sync + Send,
    W: Fn(B) -> &'a [(A, f64)] + Sync + Send,
{
    let norms: Vec<f64> = (0..count)
        .map(|a| vector(a).iter().map(|(_, x)| x * x).sum::<f64>().sqrt())
        .collect();
    par::map_range(count, |a| {
        if norms[a] == 0.0 {
            return Vec::new();
        }
        let mut dot = vec![0.0; count];
        for &(o, ra) in vector(a) {
            for &(b, rb) in back(o) {
                dot[b.index()] += ra * rb;
            }
        }
        let mut sims: Vec<(u32, f64)> = dot
            .iter()
            .enumerate()
            .filter(|&(b, &d)| b != a && d > 0.0 && norms[b] > 0.0)
            .map(|(b, &d)| (b as u32, (d / (norms[a] * norms[b])).min(1.0)))
            .collect();
        sims.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        sims.truncate(size);
        sims
    })
}

/// Item-item cosine neighborhoods. Predicts a user's score for an item as
/// the similarity-weighted mean of the user's ratings of that item's
/// neighbors.
pub fn train_item_knn(train: &RatingsDataset, neighborhood: usize) -> Result<NeighborhoodModel> {
    if neighborhood == 0 {
        return Err(Error::InvalidArgument("neighborhood size must be positive".into()));
    }
    if train.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let neighbors = build_neighbors(
        train.num_items(),
        neighborhood,
        |i| train.item_ratings(ItemId(i as u32)),
        |u| train.user_ratings(u),
    );
    Ok(NeighborhoodModel {
        kind: NeighborhoodKind::Item,
        neighbors,
    })
}

/// User-user cosine neighborhoods; the mirror of [`train_item_knn`].
pub fn train_user_knn(train: &RatingsDataset, neighborhood: usize) -> Result<NeighborhoodModel> {
    if neighborhood == 0 {
        return Err(Error::InvalidArgument("neighborhood size must be positive".into()));
    }
    if train.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let neighbors = build_neighbors(
        train.num_users(),
        neighborhood,
        |u| train.user_ratings(UserId(u as u32)),
        |i| train.item_ratings(i),
    );
    Ok(NeighborhoodModel {
        kind: NeighborhoodKind::User,
        neighbors,
    })
}

impl Scorer for NeighborhoodModel {
    fn predict(&self, train: &RatingsDataset, user: UserId) -> Vec<f64> {
        let n = train.num_items();
        match self.kind {
            NeighborhoodKind::Item => {
                let mut profile = vec![None; n];
                for &(i, r) in train.user_ratings(user) {
                    profile[i.index()] = Some(r);
                }
                (0..n)
                    .map(|v| {
                        let (mut num, mut den) = (0.0, 0.0);
                        for &(j, sim) in &self.neighbors[v] {
                            if let Some(r) = profile[j as usize] {
                                num += sim * r;
                                den += sim;
                            }
                        }
                        if den > 0.0 {
                            num / den
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            NeighborhoodKind::User => {
                let mut num = vec![0.0; n];
                let mut den = vec![0.0; n];
                for &(w, sim) in &self.neighbors[user.index()] {
                    for &(v, r) in train.user_ratings(UserId(w)) {
                        num[v.index()] += sim * r;
                        den[v.index()] += sim;
                    }
                }
                num.iter()
                    .zip(&den)
                    .map(|(&a, &b)| if b > 0.0 { a / b } else { 0.0 })
                    .collect()
            }
        }
    }
}
