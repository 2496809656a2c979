//! Seeded generator for explicit-rating datasets with a latent preference
//! structure, skewed item popularity and heavy-tailed user activity.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, LogNormal, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::ingestion::derive_seed;
use crate::model::RatingsDataset;

/// Shape of a generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub users: usize,
    pub items: usize,
    /// Exact number of ratings produced.
    pub ratings: usize,
    /// Latent dimension.
    pub dims: usize,
    /// Exponent of the rank-based item popularity `1 / (rank + 1)^s`.
    pub popularity_exponent: f64,
    /// Log-scale spread of per-user activity.
    pub activity_sigma: f64,
    /// How strongly latent affinity steers which items a user rates.
    pub selection_strength: f64,
    pub rating_min: f64,
    pub rating_max: f64,
    pub rating_step: f64,
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// 1508 users, 2071 items, 35494 half-star ratings in `[0.5, 4.0]`.
    pub fn filmtrust_like(seed: u64) -> Self {
        Self {
            users: 1508,
            items: 2071,
            ratings: 35494,
            dims: 8,
            popularity_exponent: 2.75,
            activity_sigma: 1.0,
            selection_strength: 0.5,
            rating_min: 0.5,
            rating_max: 4.0,
            rating_step: 0.5,
            noise: 0.5,
            seed,
        }
    }
}

/// Split `total` into integer parts proportional to `weights`, part `i`
/// lying in `[lo[i], hi]` (largest remainder rounding).
fn apportion(weights: &[f64], total: usize, lo: &[usize], hi: usize) -> Vec<usize> {
    let mut counts = lo.to_vec();
    let mut remaining = total - lo.iter().sum::<usize>();
    let mut open: Vec<usize> = (0..weights.len()).filter(|&i| counts[i] < hi).collect();
    while remaining > 0 && !open.is_empty() {
        let mass: f64 = open.iter().map(|&i| weights[i]).sum();
        let shares: Vec<f64> = open
            .iter()
            .map(|&i| weights[i] / mass * remaining as f64)
            .collect();
        let mut given = 0;
        for (&i, s) in open.iter().zip(&shares) {
            let add = (s.floor() as usize).min(hi - counts[i]);
            counts[i] += add;
            given += add;
        }
        let mut left = remaining - given;
        if given == 0 {
            // Everything rounded down: hand out single units by remainder.
            let mut order: Vec<usize> = (0..open.len()).collect();
            order.sort_by(|&a, &b| shares[b].fract().total_cmp(&shares[a].fract()).then(a.cmp(&b)));
            for j in order {
                if left == 0 {
                    break;
                }
                let i = open[j];
                if counts[i] < hi {
                    counts[i] += 1;
                    left -= 1;
                }
            }
        }
        remaining = left;
        open.retain(|&i| counts[i] < hi);
    }
    counts
}

/// Generate a dataset. Users are named `u<k>` and items `i<k>`. Every
/// user and every item receives at least one rating.
pub fn generate(spec: &SyntheticSpec) -> Result<RatingsDataset> {
    if spec.users == 0 || spec.items == 0 || spec.dims == 0 {
        return Err(Error::InvalidArgument("synthetic shape must be non-empty".into()));
    }
    if spec.ratings < spec.users + spec.items || spec.ratings > spec.users * spec.items {
        return Err(Error::InvalidArgument(format!(
            "{} ratings cannot cover {} users and {} items",
            spec.ratings, spec.users, spec.items
        )));
    }
    if !(spec.rating_step > 0.0 && spec.rating_min <= spec.rating_max && spec.rating_min >= 0.0) {
        return Err(Error::InvalidArgument("bad rating scale".into()));
    }
    let lognormal = LogNormal::new(0.0, spec.activity_sigma)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 0));
    let latent = |n: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n * spec.dims).map(|_| StandardNormal.sample(rng)).collect()
    };
    let user_vecs = latent(spec.users, &mut rng);
    let item_vecs = latent(spec.items, &mut rng);
    let activity: Vec<f64> = (0..spec.users).map(|_| lognormal.sample(&mut rng)).collect();

    // One rating per item from an activity-weighted user, then top every
    // user up to their share of the total.
    let pick_user = WeightedIndex::new(&activity).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut seeded: Vec<Vec<usize>> = vec![Vec::new(); spec.users];
    for i in 0..spec.items {
        seeded[pick_user.sample(&mut rng)].push(i);
    }
    let lo: Vec<usize> = seeded.iter().map(|s| s.len().max(1)).collect();
    let counts = apportion(&activity, spec.ratings, &lo, spec.items);

    let mut ranks: Vec<usize> = (0..spec.items).collect();
    for i in (1..ranks.len()).rev() {
        ranks.swap(i, rng.random_range(0..=i));
    }
    let popularity: Vec<f64> = ranks
        .iter()
        .map(|&r| ((r + 1) as f64).powf(-spec.popularity_exponent))
        .collect();

    let d = spec.dims;
    let scale = (d as f64).sqrt();
    let steps = ((spec.rating_max - spec.rating_min) / spec.rating_step).round();
    let mut triples = Vec::with_capacity(spec.ratings);
    for (u, &n) in counts.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 1 + u as u64));
        let x = &user_vecs[u * d..(u + 1) * d];
        let affinity: Vec<f64> = (0..spec.items)
            .map(|i| {
                let y = &item_vecs[i * d..(i + 1) * d];
                x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / scale
            })
            .collect();
        // Weighted sampling without replacement via exponential keys.
        let mut keys: Vec<(f64, usize)> = (0..spec.items)
            .map(|i| {
                let w = popularity[i] * (spec.selection_strength * affinity[i]).exp();
                let r: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                (r.ln() / w, i)
            })
            .collect();
        keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut chosen: BTreeSet<usize> = seeded[u].iter().copied().collect();
        let mut ranked = keys.iter().map(|&(_, i)| i);
        while chosen.len() < n {
            chosen.insert(ranked.next().expect("n <= items"));
        }
        for i in chosen {
            let raw = 2.5 + 0.6 * affinity[i] + noise.sample(&mut rng);
            let step = ((raw - spec.rating_min) / spec.rating_step).round().clamp(0.0, steps);
            triples.push((format!("u{u}"), format!("i{i}"), spec.rating_min + step * spec.rating_step));
        }
    }
    RatingsDataset::from_triples(triples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apportion_hits_total_within_bounds() {
        let w = [1.0, 100.0, 0.01, 3.0];
        let c = apportion(&w, 30, &[1, 1, 3, 1], 12);
        assert_eq!(c.iter().sum::<usize>(), 30);
        assert!(c.iter().all(|&x| (1..=12).contains(&x)), "{c:?}");
        assert!(c[2] >= 3);
        assert_eq!(c[1], 12);
    }

    #[test]
    fn small_spec_shape() {
        let spec = SyntheticSpec {
            users: 40,
            items: 60,
            ratings: 500,
            ..SyntheticSpec::filmtrust_like(3)
        };
        let ds = generate(&spec).unwrap();
        assert_eq!(ds.len(), 500);
        assert_eq!(ds.num_users(), 40);
        assert_eq!(ds.num_items(), 60);
        assert!(ds
            .ratings()
            .iter()
            .all(|r| (0.5..=4.0).contains(&r.value) && (r.value * 2.0).fract() == 0.0));
        assert_eq!(ds, generate(&spec).unwrap());
        assert_ne!(ds, generate(&SyntheticSpec { seed: 4, ..spec }).unwrap());
    }

    #[test]
    fn rejects_impossible_shapes() {
        let spec = SyntheticSpec {
            users: 10,
            items: 2,
            ratings: 30,
            ..SyntheticSpec::filmtrust_like(0)
        };
        assert!(generate(&spec).is_err());
    }
}
