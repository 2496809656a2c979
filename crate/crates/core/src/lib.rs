//! Provider-fairness-aware re-ranking for recommender systems.
//!
//! The crate covers the whole offline pipeline: loading ratings and
//! provider catalogs ([`ingestion`]), producing base top-z rankings
//! ([`recommenders`]), greedily re-ranking them to cover more providers
//! under a per-user diversity tolerance ([`reranker`]), and measuring the
//! accuracy/coverage trade-off across a sweep of fairness weights
//! ([`evaluation`]). [`harness`] wires everything behind a declarative
//! experiment config.
//!
//! Data-parallel loops run on rayon when the `parallel` feature (default)
//! is enabled and fall back to plain iterators otherwise.

pub mod error;
pub mod evaluation;
pub mod harness;
pub mod ingestion;
pub mod model;
pub mod par;
pub mod recommenders;
pub mod reranker;
pub mod synthetic;

pub use error::{Error, Result};
pub use model::{
    DenseIndex, IdMap, ItemId, ProviderCatalog, ProviderId, ProviderWeights, RatingsDataset, RerankMode,
    RerankParams, RerankedList, ScoredList, SweepReport, SweepRow, ToleranceProfile, UserId,
};
