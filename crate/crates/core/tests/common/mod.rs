#![allow(dead_code)]

use std::collections::BTreeSet;

use fairrank::{IdMap, ProviderCatalog, ProviderId, ProviderWeights, ScoredList};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A single re-ranking problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub list: ScoredList,
    pub catalog: ProviderCatalog,
    pub weights: ProviderWeights,
    pub lambda: f64,
    pub tau: f64,
    pub k: usize,
}

pub fn provider_table(c: usize) -> IdMap {
    (0..c).map(|d| format!("d{d}")).collect()
}

/// Catalog over items `v0..v{n}` with the given owner sets.
pub fn catalog_from_owners(c: usize, owners: &[Vec<u32>]) -> ProviderCatalog {
    ProviderCatalog::with_providers(
        provider_table(c),
        owners
            .iter()
            .enumerate()
            .map(|(i, o)| (format!("v{i}"), o.iter().map(|&d| ProviderId(d)).collect())),
    )
    .unwrap()
}

pub fn random_owners(rng: &mut ChaCha8Rng, n: usize, c: usize, multi: bool) -> Vec<Vec<u32>> {
    (0..n)
        .map(|_| {
            let first = rng.random_range(0..c as u32);
            let mut set = BTreeSet::from([first]);
            if multi && rng.random_bool(0.3) {
                set.insert(rng.random_range(0..c as u32));
            }
            set.into_iter().collect()
        })
        .collect()
}

/// Descending scores; `coarse` draws from a 0.1 lattice so ties happen.
pub fn random_scores(rng: &mut ChaCha8Rng, n: usize, coarse: bool) -> Vec<f64> {
    let mut s: Vec<f64> = (0..n)
        .map(|_| {
            if coarse {
                rng.random_range(0..=10) as f64 / 10.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn scored_list(user: &str, scores: &[f64]) -> ScoredList {
    ScoredList::new(
        user,
        scores
            .iter()
            .enumerate()
            .map(|(i, s)| (format!("v{i}"), *s))
            .collect(),
    )
    .unwrap()
}

pub fn random_weights(rng: &mut ChaCha8Rng, c: usize) -> ProviderWeights {
    if rng.random_bool(0.5) {
        ProviderWeights::uniform(c)
    } else {
        ProviderWeights::normalized((0..c).map(|_| rng.random_range(0.05..1.0)).collect()).unwrap()
    }
}

pub fn random_instance(rng: &mut ChaCha8Rng, max_items: usize, max_providers: usize) -> Instance {
    let n = rng.random_range(1..=max_items);
    let c = rng.random_range(1..=max_providers);
    let owners = random_owners(rng, n, c, true);
    let coarse = rng.random_bool(0.3);
    let scores = random_scores(rng, n, coarse);
    Instance {
        list: scored_list("u", &scores),
        catalog: catalog_from_owners(c, &owners),
        weights: random_weights(rng, c),
        lambda: rng.random_range(0.0..3.0),
        tau: rng.random_range(0.0..=(c as f64).log2().max(1.0)),
        k: rng.random_range(1..=n),
    }
}

/// Brute-force greedy: every step rescans all remaining candidates and
/// recomputes coverage from the picks so far.
pub fn oracle_rerank(inst: &Instance) -> Vec<String> {
    let entries = inst.list.entries();
    let mut picked: Vec<usize> = Vec::new();
    while picked.len() < inst.k.min(entries.len()) {
        let covered: BTreeSet<ProviderId> = picked
            .iter()
            .flat_map(|&p| inst.catalog.owners(&entries[p].0).unwrap().iter().copied())
            .collect();
        let mut best: Option<(usize, f64)> = None;
        for (pos, (item, score)) in entries.iter().enumerate() {
            if picked.contains(&pos) {
                continue;
            }
            let bonus: f64 = inst
                .catalog
                .owners(item)
                .unwrap()
                .iter()
                .filter(|d| !covered.contains(d))
                .map(|&d| inst.weights.get(d))
                .sum();
            let value = score + inst.lambda * inst.tau * bonus;
            if best.is_none_or(|(_, b)| value > b) {
                best = Some((pos, value));
            }
        }
        picked.push(best.unwrap().0);
    }
    picked.into_iter().map(|p| entries[p].0.clone()).collect()
}
