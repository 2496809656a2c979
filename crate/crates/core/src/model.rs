//! Shared data model.
//!
//! Identifiers are opaque strings at the edges and dense `u32` indices for
//! numeric work. Every dataset carries its remap tables so results can be
//! reported with the original identifiers.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! dense_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl DenseIndex for $name {
            #[inline]
            fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

/// A dense `0..n` index newtype.
pub trait DenseIndex: Copy + Send + Sync {
    fn index(self) -> usize;
}

dense_id!(
    /// Dense index of a user within a dataset's user table.
    UserId
);
dense_id!(
    /// Dense index of an item within a dataset's item table.
    ItemId
);
dense_id!(
    /// Dense index of a provider within a catalog.
    ProviderId
);

/// Insertion-ordered identifier table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the existing index for `name`, or appends it.
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&ix) = self.index.get(name) {
            return ix;
        }
        let ix = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), ix);
        ix
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, ix: u32) -> &str {
        &self.names[ix as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

impl<S: AsRef<str>> FromIterator<S> for IdMap {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut map = IdMap::new();
        for name in iter {
            map.intern(name.as_ref());
        }
        map
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: UserId,
    pub item: ItemId,
    pub value: f64,
}

/// Sparse user × item ratings.
///
/// Ratings are kept in canonical `(user, item)` order together with
/// per-user and per-item adjacency lists. A dataset derived with
/// [`RatingsDataset::subset`] shares the parent's identifier tables, so
/// train and test folds index users and items identically.
#[derive(Debug, Clone)]
pub struct RatingsDataset {
    users: Arc<IdMap>,
    items: Arc<IdMap>,
    ratings: Vec<Rating>,
    by_user: Vec<Vec<(ItemId, f64)>>,
    by_item: Vec<Vec<(UserId, f64)>>,
}

/// Equal when both hold the same users, items and `(user, item, value)`
/// triples by identifier, regardless of index assignment.
impl PartialEq for RatingsDataset {
    fn eq(&self, other: &Self) -> bool {
        if Arc::ptr_eq(&self.users, &other.users) && Arc::ptr_eq(&self.items, &other.items) {
            return self.ratings == other.ratings;
        }
        let same_names = |a: &IdMap, b: &IdMap| {
            a.len() == b.len() && a.names().iter().all(|n| b.get(n).is_some())
        };
        same_names(&self.users, &other.users)
            && same_names(&self.items, &other.items)
            && self.len() == other.len()
            && self.ratings.iter().all(|r| {
                let u = other.user_id(self.user_name(r.user));
                let i = other.item_id(self.item_name(r.item));
                matches!((u, i), (Some(u), Some(i)) if other.rating(u, i) == Some(r.value))
            })
    }
}

impl RatingsDataset {
    /// Build from `(user, item, value)` triples. Users and items are
    /// numbered in first-appearance order. Duplicate pairs are an error.
    pub fn from_triples<I, U, V>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (U, V, f64)>,
        U: AsRef<str>,
        V: AsRef<str>,
    {
        let mut users = IdMap::new();
        let mut items = IdMap::new();
        let mut ratings = Vec::new();
        for (u, v, value) in triples {
            let user = UserId(users.intern(u.as_ref()));
            let item = ItemId(items.intern(v.as_ref()));
            ratings.push(Rating { user, item, value });
        }
        Self::with_universe(Arc::new(users), Arc::new(items), ratings)
    }

    /// Build over explicit identifier tables. Users or items without any
    /// rating are allowed.
    pub fn with_universe(
        users: Arc<IdMap>,
        items: Arc<IdMap>,
        mut ratings: Vec<Rating>,
    ) -> Result<Self> {
        for r in &ratings {
            if r.user.index() >= users.len() || r.item.index() >= items.len() {
                return Err(Error::InvalidArgument(format!(
                    "rating references index outside the id tables ({}, {})",
                    r.user.0, r.item.0
                )));
            }
            if !r.value.is_finite() || r.value < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "rating ({}, {}) has invalid value {}",
                    users.name(r.user.0),
                    items.name(r.item.0),
                    r.value
                )));
            }
        }
        ratings.sort_by_key(|r| (r.user, r.item));
        if let Some(w) = ratings
            .windows(2)
            .find(|w| (w[0].user, w[0].item) == (w[1].user, w[1].item))
        {
            return Err(Error::InvalidArgument(format!(
                "duplicate rating for ({}, {})",
                users.name(w[0].user.0),
                items.name(w[0].item.0)
            )));
        }
        let mut by_user = vec![Vec::new(); users.len()];
        let mut by_item = vec![Vec::new(); items.len()];
        for r in &ratings {
            by_user[r.user.index()].push((r.item, r.value));
            by_item[r.item.index()].push((r.user, r.value));
        }
        Ok(Self {
            users,
            items,
            ratings,
            by_user,
            by_item,
        })
    }

    /// Ratings satisfying `keep`, over the same identifier tables.
    pub fn subset(&self, mut keep: impl FnMut(&Rating) -> bool) -> Self {
        let ratings: Vec<Rating> = self.ratings.iter().copied().filter(|r| keep(r)).collect();
        Self::with_universe(self.users.clone(), self.items.clone(), ratings)
            .expect("subset of a valid dataset is valid")
    }

    /// Drop users and items that have no ratings, renumbering the rest in
    /// their original relative order.
    pub fn compact(&self) -> Self {
        let triples = self.ratings.iter().map(|r| {
            (
                self.users.name(r.user.0),
                self.items.name(r.item.0),
                r.value,
            )
        });
        Self::from_triples(triples).expect("compaction of a valid dataset is valid")
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    pub fn users(&self) -> &Arc<IdMap> {
        &self.users
    }

    pub fn items(&self) -> &Arc<IdMap> {
        &self.items
    }

    pub fn user_id(&self, name: &str) -> Option<UserId> {
        self.users.get(name).map(UserId)
    }

    pub fn item_id(&self, name: &str) -> Option<ItemId> {
        self.items.get(name).map(ItemId)
    }

    pub fn user_name(&self, user: UserId) -> &str {
        self.users.name(user.0)
    }

    pub fn item_name(&self, item: ItemId) -> &str {
        self.items.name(item.0)
    }

    /// A user's ratings, sorted by item index.
    pub fn user_ratings(&self, user: UserId) -> &[(ItemId, f64)] {
        &self.by_user[user.index()]
    }

    /// An item's ratings, sorted by user index.
    pub fn item_ratings(&self, item: ItemId) -> &[(UserId, f64)] {
        &self.by_item[item.index()]
    }

    pub fn rating(&self, user: UserId, item: ItemId) -> Option<f64> {
        let row = self.user_ratings(user);
        row.binary_search_by_key(&item, |&(i, _)| i)
            .ok()
            .map(|pos| row[pos].1)
    }

    /// Users with at least one rating, in index order.
    pub fn active_users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.by_user
            .iter()
            .enumerate()
            .filter(|(_, row)| !row.is_empty())
            .map(|(u, _)| UserId(u as u32))
    }
}

/// Item → provider ownership.
///
/// `owns(item, provider)` is the deterministic, binary item/provider
/// likelihood used by the re-ranker. Items may belong to several providers.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderCatalog {
    providers: IdMap,
    ownership: IndexMap<String, Vec<ProviderId>>,
}

impl ProviderCatalog {
    /// Build from `(item, provider)` pairs. Providers are numbered in
    /// first-appearance order; repeated items accumulate providers.
    pub fn from_pairs<I, V, D>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (V, D)>,
        V: AsRef<str>,
        D: AsRef<str>,
    {
        let mut providers = IdMap::new();
        let mut ownership: IndexMap<String, Vec<ProviderId>> = IndexMap::new();
        for (item, provider) in pairs {
            let d = ProviderId(providers.intern(provider.as_ref()));
            let owners = ownership.entry(item.as_ref().to_owned()).or_default();
            if !owners.contains(&d) {
                owners.push(d);
            }
        }
        if providers.is_empty() {
            return Err(Error::InvalidArgument(
                "a provider catalog needs at least one provider".into(),
            ));
        }
        for owners in ownership.values_mut() {
            owners.sort_unstable();
        }
        Ok(Self {
            providers,
            ownership,
        })
    }

    /// Build over an explicit provider table, so providers owning no item
    /// still count towards `c`.
    pub fn with_providers<I>(providers: IdMap, ownership: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<ProviderId>)>,
    {
        if providers.is_empty() {
            return Err(Error::InvalidArgument(
                "a provider catalog needs at least one provider".into(),
            ));
        }
        let mut map: IndexMap<String, Vec<ProviderId>> = IndexMap::new();
        for (item, mut owners) in ownership {
            if owners.is_empty() {
                return Err(Error::InvalidArgument(format!("item {item} has no provider")));
            }
            if let Some(d) = owners.iter().find(|d| d.index() >= providers.len()) {
                return Err(Error::InvalidArgument(format!(
                    "item {item} references unknown provider index {}",
                    d.0
                )));
            }
            let entry = map.entry(item).or_default();
            entry.append(&mut owners);
            entry.sort_unstable();
            entry.dedup();
        }
        Ok(Self {
            providers,
            ownership: map,
        })
    }

    /// Number of providers (`c`).
    pub fn num_providers(&self) -> usize {
        self.providers.len()
    }

    pub fn num_items(&self) -> usize {
        self.ownership.len()
    }

    pub fn providers(&self) -> &IdMap {
        &self.providers
    }

    pub fn provider_name(&self, provider: ProviderId) -> &str {
        self.providers.name(provider.0)
    }

    pub fn provider_id(&self, name: &str) -> Option<ProviderId> {
        self.providers.get(name).map(ProviderId)
    }

    /// Owning providers of `item`, sorted by index.
    pub fn owners(&self, item: &str) -> Option<&[ProviderId]> {
        self.ownership.get(item).map(Vec::as_slice)
    }

    pub fn owns(&self, item: &str, provider: ProviderId) -> bool {
        self.owners(item)
            .is_some_and(|owners| owners.contains(&provider))
    }

    /// `(item, owners)` in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[ProviderId])> {
        self.ownership
            .iter()
            .map(|(item, owners)| (item.as_str(), owners.as_slice()))
    }
}

/// Per-provider weights (the user's provider preference), summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderWeights(Vec<f64>);

impl ProviderWeights {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn uniform(providers: usize) -> Self {
        assert!(providers > 0, "uniform weights need at least one provider");
        Self(vec![1.0 / providers as f64; providers])
    }

    /// Weights indexed by provider. Must be non-negative and sum to one.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("provider weights are empty".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "provider weight {w} is not a non-negative number"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "provider weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self(weights))
    }

    /// Scale raw non-negative weights so they sum to one.
    pub fn normalized(raw: Vec<f64>) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if !(sum.is_finite() && sum > 0.0) || raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(
                "provider weights must be non-negative with a positive sum".into(),
            ));
        }
        Self::new(raw.into_iter().map(|w| w / sum).collect())
    }

    #[inline]
    pub fn get(&self, provider: ProviderId) -> f64 {
        self.0[provider.index()]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RerankMode {
    /// Same fairness weight for everyone (tolerance fixed at 1).
    Far,
    /// Fairness weight scaled by each user's tolerance.
    Pfar,
}

impl fmt::Display for RerankMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RerankMode::Far => "FAR",
            RerankMode::Pfar => "PFAR",
        })
    }
}

impl FromStr for RerankMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "far" => Ok(RerankMode::Far),
            "pfar" => Ok(RerankMode::Pfar),
            other => Err(Error::InvalidArgument(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankParams {
    pub lambda: f64,
    pub k: usize,
    pub mode: RerankMode,
    pub weights: ProviderWeights,
}

impl RerankParams {
    pub fn new(lambda: f64, k: usize, mode: RerankMode, weights: ProviderWeights) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be a non-negative number, got {lambda}"
            )));
        }
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        Ok(Self {
            lambda,
            k,
            mode,
            weights,
        })
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    /// The tolerance actually applied: 1 under FAR, `tolerance` under PFAR.
    pub fn effective_tolerance(&self, tolerance: f64) -> f64 {
        match self.mode {
            RerankMode::Far => 1.0,
            RerankMode::Pfar => tolerance,
        }
    }
}

/// One user's base ranking, sorted by score descending.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredList {
    user: String,
    entries: Vec<(String, f64)>,
}

impl ScoredList {
    /// Entries must already be sorted by non-increasing score.
    pub fn new(user: impl Into<String>, entries: Vec<(String, f64)>) -> Result<Self> {
        let user = user.into();
        let mut seen = HashSet::with_capacity(entries.len());
        for (item, score) in &entries {
            if !score.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "score for ({user}, {item}) is not finite"
                )));
            }
            if !seen.insert(item.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "item {item} appears twice in the list for {user}"
                )));
            }
        }
        if entries.windows(2).any(|w| w[0].1 < w[1].1) {
            return Err(Error::InvalidArgument(format!(
                "scores for {user} are not sorted descending"
            )));
        }
        Ok(Self { user, entries })
    }

    /// Stable-sorts entries by score descending; ties keep input order.
    pub fn from_unsorted(user: impl Into<String>, mut entries: Vec<(String, f64)>) -> Result<Self> {
        if entries.iter().any(|(_, s)| !s.is_finite()) {
            return Self::new(user, entries);
        }
        entries.sort_by(|a, b| b.1.total_cmp(&a.1));
        Self::new(user, entries)
    }

    pub fn user(&self) -> &str {
        &self.user
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn items(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(i, _)| i.as_str())
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|(_, s)| *s)
    }

    /// Replace scores with `f(score)`. `f` must be non-decreasing.
    pub(crate) fn map_scores(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            user: self.user.clone(),
            entries: self
                .entries
                .iter()
                .map(|(i, s)| (i.clone(), f(*s)))
                .collect(),
        }
    }
}

/// A user's provider interest and the entropy-based diversity tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceProfile {
    pub user: String,
    pub interest: BTreeMap<ProviderId, f64>,
    pub tolerance: f64,
}

/// The re-ranked output for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct RerankedList {
    user: String,
    items: Vec<String>,
    covered: Vec<ProviderId>,
}

impl RerankedList {
    /// Items without an owner in `catalog` cover nothing.
    pub fn new(user: impl Into<String>, items: Vec<String>, catalog: &ProviderCatalog) -> Self {
        let mut covered: Vec<ProviderId> = items
            .iter()
            .filter_map(|i| catalog.owners(i))
            .flatten()
            .copied()
            .collect();
        covered.sort_unstable();
        covered.dedup();
        Self {
            user: user.into(),
            items,
            covered,
        }
    }

    pub fn user(&self) -> &str {
        &self.user
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Providers owning at least one listed item, sorted.
    pub fn covered_providers(&self) -> &[ProviderId] {
        &self.covered
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub mean_ndcg: f64,
    pub apcr: f64,
    /// Recommendation count per provider, indexed by [`ProviderId`].
    pub provider_counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub recommender: String,
    pub dataset: String,
    pub mode: RerankMode,
    pub folds: usize,
}

/// Metrics for every point of a fairness-weight sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub summary: SweepSummary,
    pub providers: Vec<String>,
    /// Sorted by lambda ascending, one per grid point.
    pub rows: Vec<SweepRow>,
    /// The base recommender's own top-K metrics.
    pub base_row: SweepRow,
    /// Users whose lists entered APCR.
    pub evaluated_users: usize,
    /// Users without relevant test items (left out of nDCG).
    pub ndcg_excluded_users: usize,
    /// Test users without training data (no list produced).
    pub cold_users: usize,
}
