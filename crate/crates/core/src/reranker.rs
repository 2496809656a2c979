//! Greedy provider-fairness re-ranking.
//!
//! Each step picks the remaining candidate maximizing
//!
//! ```text
//! score(v) + λ · τ_u · Σ_{d ∈ owners(v), d not yet covered} w_d
//! ```
//!
//! where `w_d` is the provider weight and `τ_u` the user's diversity
//! tolerance (fixed at 1 in [`RerankMode::Far`](crate::model::RerankMode::Far)). Ties go to the candidate
//! ranked earlier in the base list.
//!
//! The tolerance is the base-2 entropy of the user's rating mass over
//! providers, so it ranges over `[0, log2 c]`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{
    ProviderCatalog, ProviderId, ProviderWeights, RatingsDataset, RerankParams, RerankedList,
    ScoredList, ToleranceProfile,
};
use crate::par;

/// Providers already owned by some item of the partial output list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageState {
    covered: Vec<bool>,
    count: usize,
}

impl CoverageState {
    pub fn new(providers: usize) -> Self {
        Self {
            covered: vec![false; providers],
            count: 0,
        }
    }

    #[inline]
    pub fn is_covered(&self, provider: ProviderId) -> bool {
        self.covered[provider.index()]
    }

    pub fn cover(&mut self, owners: &[ProviderId]) {
        for d in owners {
            if !self.covered[d.index()] {
                self.covered[d.index()] = true;
                self.count += 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn covered(&self) -> impl Iterator<Item = ProviderId> + '_ {
        self.covered
            .iter()
            .enumerate()
            .filter(|(_, c)| **c)
            .map(|(d, _)| ProviderId(d as u32))
    }
}

/// Share of the user's rating mass falling on each provider. An item with
/// several owners counts once per owner, in numerator and denominator.
/// Returns an empty map when the user has no rating mass on owned items.
pub fn compute_interest(
    train: &RatingsDataset,
    catalog: &ProviderCatalog,
    user: &str,
) -> Result<BTreeMap<ProviderId, f64>> {
    let uid = train
        .user_id(user)
        .ok_or_else(|| Error::UnknownUser(user.to_owned()))?;
    let mut mass = vec![0.0; catalog.num_providers()];
    for &(item, r) in train.user_ratings(uid) {
        if let Some(owners) = catalog.owners(train.item_name(item)) {
            for d in owners {
                mass[d.index()] += r;
            }
        }
    }
    let total: f64 = mass.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Ok(BTreeMap::new());
    }
    Ok(mass
        .into_iter()
        .enumerate()
        .filter(|(_, m)| *m > 0.0)
        .map(|(d, m)| (ProviderId(d as u32), m / total))
        .collect())
}

/// Base-2 entropy of an interest distribution, with `0 log 0 = 0`. An empty
/// distribution (cold user) gets the maximum, `log2 c`.
pub fn compute_tolerance(interest: &BTreeMap<ProviderId, f64>, providers: usize) -> Result<f64> {
    if let Some(v) = interest.values().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "interest value {v} is not a non-negative number"
        )));
    }
    if interest.is_empty() {
        return Ok(max_tolerance(providers));
    }
    let h: f64 = interest
        .values()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    Ok(h.clamp(0.0, max_tolerance(providers)))
}

pub fn max_tolerance(providers: usize) -> f64 {
    (providers.max(1) as f64).log2()
}

/// How tolerances are derived beyond the raw entropy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ToleranceConfig {
    /// Divide by `log2 c` so tolerances lie in `[0, 1]`.
    pub normalize: bool,
    /// Tolerance for users without rating mass on owned items. Defaults to
    /// the maximum (`log2 c`, or 1 when normalized).
    pub cold_fallback: Option<f64>,
}

/// Interest and tolerance for one user, from training ratings only.
pub fn tolerance_profile(
    train: &RatingsDataset,
    catalog: &ProviderCatalog,
    user: &str,
    config: &ToleranceConfig,
) -> Result<ToleranceProfile> {
    let c = catalog.num_providers();
    let interest = compute_interest(train, catalog, user)?;
    let max = max_tolerance(c);
    let tolerance = if interest.is_empty() {
        match config.cold_fallback {
            Some(t) => t,
            None if config.normalize => 1.0,
            None => max,
        }
    } else {
        let raw = compute_tolerance(&interest, c)?;
        if config.normalize {
            if max > 0.0 {
                raw / max
            } else {
                0.0
            }
        } else {
            raw
        }
    };
    Ok(ToleranceProfile {
        user: user.to_owned(),
        interest,
        tolerance,
    })
}

/// [`tolerance_profile`] for many users, keyed by user identifier.
pub fn tolerance_profiles(
    train: &RatingsDataset,
    catalog: &ProviderCatalog,
    users: &[String],
    config: &ToleranceConfig,
) -> Result<BTreeMap<String, ToleranceProfile>> {
    par::try_map(users, |u| tolerance_profile(train, catalog, u, config))
        .map(|profiles| profiles.into_iter().map(|p| (p.user.clone(), p)).collect())
}

/// Summed weight of the item's providers not yet covered.
pub fn fairness_bonus(
    item: &str,
    state: &CoverageState,
    catalog: &ProviderCatalog,
    weights: &ProviderWeights,
) -> Result<f64> {
    let owners = catalog
        .owners(item)
        .ok_or_else(|| Error::UnownedItem(item.to_owned()))?;
    Ok(uncovered_weight(owners, state, weights))
}

#[inline]
fn uncovered_weight(owners: &[ProviderId], state: &CoverageState, weights: &ProviderWeights) -> f64 {
    owners
        .iter()
        .filter(|d| !state.is_covered(**d))
        .map(|d| weights.get(*d))
        .sum()
}

/// A base list with each item's owners resolved once, ready to be
/// re-ranked under many fairness weights.
#[derive(Debug, Clone)]
pub struct PreparedList<'a> {
    list: &'a ScoredList,
    owners: Vec<&'a [ProviderId]>,
    providers: usize,
}

impl<'a> PreparedList<'a> {
    pub fn new(list: &'a ScoredList, catalog: &'a ProviderCatalog) -> Result<Self> {
        if list.is_empty() {
            return Err(Error::EmptyList);
        }
        let owners = list
            .items()
            .map(|item| {
                catalog
                    .owners(item)
                    .ok_or_else(|| Error::UnownedItem(item.to_owned()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            list,
            owners,
            providers: catalog.num_providers(),
        })
    }

    pub fn list(&self) -> &ScoredList {
        self.list
    }

    /// Greedy selection; returns positions into the base list in pick order.
    pub fn select(&self, lambda: f64, tolerance: f64, k: usize, weights: &ProviderWeights) -> Vec<usize> {
        let entries = self.list.entries();
        let k = k.min(entries.len());
        let gain = lambda * tolerance;
        let mut remaining: Vec<usize> = (0..entries.len()).collect();
        let mut state = CoverageState::new(self.providers);
        let mut picked = Vec::with_capacity(k);
        while picked.len() < k {
            let mut best_slot = 0;
            let mut best = f64::NEG_INFINITY;
            for (slot, &pos) in remaining.iter().enumerate() {
                let value = entries[pos].1 + gain * uncovered_weight(self.owners[pos], &state, weights);
                if value > best {
                    best = value;
                    best_slot = slot;
                }
            }
            let pos = remaining.remove(best_slot);
            state.cover(self.owners[pos]);
            picked.push(pos);
        }
        picked
    }

    pub fn rerank(
        &self,
        params: &RerankParams,
        tolerance: f64,
        catalog: &ProviderCatalog,
    ) -> RerankedList {
        let tau = params.effective_tolerance(tolerance);
        let picks = self.select(params.lambda, tau, params.k, &params.weights);
        let entries = self.list.entries();
        RerankedList::new(
            self.list.user(),
            picks.into_iter().map(|p| entries[p].0.clone()).collect(),
            catalog,
        )
    }
}

/// Re-rank one base list. Under FAR the `tolerance` argument is ignored.
pub fn rerank(
    list: &ScoredList,
    params: &RerankParams,
    tolerance: f64,
    catalog: &ProviderCatalog,
) -> Result<RerankedList> {
    if params.weights.len() != catalog.num_providers() {
        return Err(Error::InvalidArgument(format!(
            "{} provider weights for {} providers",
            params.weights.len(),
            catalog.num_providers()
        )));
    }
    Ok(PreparedList::new(list, catalog)?.rerank(params, tolerance, catalog))
}

/// Re-rank every list. Users missing from `tolerances` get tolerance 1.
pub fn rerank_all(
    lists: &BTreeMap<String, ScoredList>,
    params: &RerankParams,
    tolerances: &BTreeMap<String, f64>,
    catalog: &ProviderCatalog,
) -> Result<BTreeMap<String, RerankedList>> {
    let lists: Vec<&ScoredList> = lists.values().collect();
    par::try_map(&lists, |list| {
        let tau = tolerances.get(list.user()).copied().unwrap_or(1.0);
        rerank(list, params, tau, catalog)
    })
    .map(|out| out.into_iter().map(|l| (l.user().to_owned(), l)).collect())
}
