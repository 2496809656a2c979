//! Declarative experiment configs and the end-to-end pipeline behind them.
//!
//! A config is a TOML file. Relative paths inside it resolve against the
//! directory holding the config.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{
    apcr_at_ndcg_budget, lambda_grid, lambda_sweep, merge_fold_reports, write_histogram_csv,
    write_report_csv, write_summary_csv, BudgetPick, SweepContext,
};
use crate::ingestion::{
    assign_synthetic_providers, build_pseudo_items, derive_seed, k_core_filter, load_provider_map,
    load_provider_weights, load_ratings, load_transactions, resolve, split_folds, Delimiter,
    FoldSplit, PseudoItemSpec, RatingsSchema,
};
use crate::model::{
    ProviderCatalog, ProviderWeights, RatingsDataset, RerankMode, RerankParams, ScoredList,
    SweepReport, SweepSummary, UserId,
};
use crate::recommenders::{
    import_rankings, normalize_scores, recommend_all, train_item_knn, train_user_knn, train_wrmf,
    Scorer, WrmfParams,
};
use crate::reranker::{tolerance_profiles, ToleranceConfig};
use crate::synthetic::{generate, SyntheticSpec};
use crate::par;

const FOLD_SEED_STREAM: u64 = 1;
const PROVIDER_SEED_STREAM: u64 = 2;
const DATASET_SEED_STREAM: u64 = 3;
const MODEL_SEED_STREAM: u64 = 100;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub folds: Option<usize>,
    /// Output directory.
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub providers: ProvidersConfig,
    #[serde(default)]
    pub recommender: RecommenderConfig,
    #[serde(default)]
    pub rerank: RerankConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: Option<String>,
    /// Delimited `user item rating` file.
    pub ratings: Option<PathBuf>,
    pub delimiter: Option<Delimiter>,
    pub user_column: Option<usize>,
    pub item_column: Option<usize>,
    pub rating_column: Option<usize>,
    #[serde(default)]
    pub clamp_negative: bool,
    pub transactions: Option<TransactionsConfig>,
    pub synthetic: Option<SyntheticDatasetConfig>,
    /// Keep only the k-core of the user/item graph.
    pub k_core: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransactionsConfig {
    pub path: Option<PathBuf>,
    pub delimiter: Option<Delimiter>,
    pub user_column: Option<String>,
    #[serde(default)]
    pub grouping: Vec<String>,
    pub amount_attribute: Option<String>,
    pub bins: Option<usize>,
    pub provider_attribute: Option<String>,
}

/// Generated ratings; unset fields take the 1508 × 2071 / 35494 shape.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticDatasetConfig {
    pub users: Option<usize>,
    pub items: Option<usize>,
    pub ratings: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvidersConfig {
    /// `item provider` map file.
    pub map: Option<PathBuf>,
    pub delimiter: Option<Delimiter>,
    pub synthetic: Option<SyntheticProviders>,
    /// Optional `provider weight` file; uniform otherwise.
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticProviders {
    pub count: usize,
    #[serde(default = "default_geometric_p")]
    pub p: f64,
}

fn default_geometric_p() -> f64 {
    0.3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommenderKind {
    ItemKnn,
    UserKnn,
    Wrmf,
    Import,
}

impl fmt::Display for RecommenderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecommenderKind::ItemKnn => "item_knn",
            RecommenderKind::UserKnn => "user_knn",
            RecommenderKind::Wrmf => "wrmf",
            RecommenderKind::Import => "import",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecommenderConfig {
    pub kind: Option<RecommenderKind>,
    pub neighbors: Option<usize>,
    pub factors: Option<usize>,
    pub reg: Option<f64>,
    pub alpha: Option<f64>,
    pub iterations: Option<usize>,
    /// Rankings file for `import`; `{fold}` expands to the fold index.
    pub path: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RerankConfig {
    pub z: Option<usize>,
    pub k: Option<usize>,
    pub mode: Option<RerankMode>,
    #[serde(default)]
    pub normalize_tolerance: bool,
    pub cold_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub lambda_max: Option<f64>,
    pub lambda_step: Option<f64>,
    /// Explicit grid; exclusive with `lambda_max`/`lambda_step`.
    pub lambdas: Option<Vec<f64>>,
    pub budget: Option<f64>,
    pub relevance_threshold: Option<f64>,
}

/// One problem with a config, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Parse a config file. Relative paths will resolve against its directory.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config = parse_config(&text)?;
    config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(config)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| Error::Config(e.message().to_owned()))
}

impl ExperimentConfig {
    fn path(&self, p: &Path) -> PathBuf {
        resolve(&self.base_dir, p)
    }

    fn z(&self) -> usize {
        self.rerank.z.unwrap_or(100)
    }

    fn k(&self) -> usize {
        self.rerank.k.unwrap_or(10)
    }

    fn folds(&self) -> usize {
        self.folds.unwrap_or(5)
    }

    fn import_path(&self, fold: usize) -> Option<PathBuf> {
        self.recommender
            .path
            .as_ref()
            .map(|t| self.path(Path::new(&t.replace("{fold}", &fold.to_string()))))
    }
}

/// Everything wrong with `config`; empty when it can be run.
pub fn validate_config(config: &ExperimentConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut bad = |field: &str, message: String| {
        out.push(Violation {
            field: field.to_owned(),
            message,
        })
    };
    let exists = |p: &Path| config.path(p).exists();

    if config.seed.is_none() {
        bad("seed", "missing; every run needs an explicit seed".into());
    }
    if config.folds() < 2 {
        bad("folds", format!("need at least 2, got {}", config.folds()));
    }
    if config.output.is_none() {
        bad("output", "missing output directory".into());
    }

    let ds = &config.dataset;
    let sources = [ds.ratings.is_some(), ds.transactions.is_some(), ds.synthetic.is_some()];
    match sources.iter().filter(|s| **s).count() {
        0 => bad("dataset", "set one of ratings, transactions or synthetic".into()),
        1 => {}
        _ => bad("dataset", "ratings, transactions and synthetic are mutually exclusive".into()),
    }
    if let Some(p) = &ds.ratings {
        if !exists(p) {
            bad("dataset.ratings", format!("{} does not exist", config.path(p).display()));
        }
    }
    if let Some(t) = &ds.transactions {
        match &t.path {
            None => bad("dataset.transactions.path", "missing".into()),
            Some(p) if !exists(p) => bad(
                "dataset.transactions.path",
                format!("{} does not exist", config.path(p).display()),
            ),
            _ => {}
        }
        if t.user_column.is_none() {
            bad("dataset.transactions.user_column", "missing".into());
        }
        if t.grouping.is_empty() {
            bad("dataset.transactions.grouping", "must name at least one attribute".into());
        }
        if t.provider_attribute.is_none() {
            bad("dataset.transactions.provider_attribute", "missing".into());
        }
        if t.amount_attribute.is_some() && t.bins == Some(0) {
            bad("dataset.transactions.bins", "must be positive".into());
        }
    }
    if let Some(s) = &ds.synthetic {
        let base = SyntheticSpec::filmtrust_like(0);
        let (u, i, r) = (
            s.users.unwrap_or(base.users),
            s.items.unwrap_or(base.items),
            s.ratings.unwrap_or(base.ratings),
        );
        if u == 0 || i == 0 || r < u + i || r > u * i {
            bad(
                "dataset.synthetic",
                format!("{r} ratings do not fit {u} users and {i} items"),
            );
        }
    }
    if ds.k_core == Some(0) {
        bad("dataset.k_core", "must be positive".into());
    }

    let pv = &config.providers;
    if ds.transactions.is_some() {
        if pv.map.is_some() || pv.synthetic.is_some() {
            bad(
                "providers",
                "transaction datasets take providers from provider_attribute".into(),
            );
        }
    } else {
        match (&pv.map, &pv.synthetic) {
            (None, None) => bad("providers", "set one of map or synthetic".into()),
            (Some(_), Some(_)) => bad("providers", "map and synthetic are mutually exclusive".into()),
            _ => {}
        }
    }
    if let Some(p) = &pv.map {
        if !exists(p) {
            bad("providers.map", format!("{} does not exist", config.path(p).display()));
        }
    }
    if let Some(s) = &pv.synthetic {
        if s.count == 0 {
            bad("providers.synthetic.count", "must be positive".into());
        }
        if !(s.p > 0.0 && s.p < 1.0) {
            bad("providers.synthetic.p", format!("must lie in (0, 1), got {}", s.p));
        }
    }
    if let Some(p) = &pv.weights {
        if !exists(p) {
            bad("providers.weights", format!("{} does not exist", config.path(p).display()));
        }
    }

    let rc = &config.recommender;
    match rc.kind {
        None => bad("recommender.kind", "missing".into()),
        Some(RecommenderKind::Import) => match &rc.path {
            None => bad("recommender.path", "import needs a rankings path".into()),
            Some(_) => {
                for fold in 0..config.folds().max(2) {
                    let p = config.import_path(fold).expect("path is set");
                    if !p.exists() {
                        bad("recommender.path", format!("{} does not exist", p.display()));
                        break;
                    }
                }
            }
        },
        Some(_) if rc.path.is_some() => {
            bad("recommender.path", "only used by the import recommender".into())
        }
        Some(_) => {}
    }
    if rc.neighbors == Some(0) {
        bad("recommender.neighbors", "must be positive".into());
    }
    if rc.factors == Some(0) {
        bad("recommender.factors", "must be positive".into());
    }
    if rc.iterations == Some(0) {
        bad("recommender.iterations", "must be positive".into());
    }
    for (field, v) in [("recommender.reg", rc.reg), ("recommender.alpha", rc.alpha)] {
        if let Some(v) = v {
            if !(v > 0.0 && v.is_finite()) {
                bad(field, format!("must be positive, got {v}"));
            }
        }
    }

    let (z, k) = (config.z(), config.k());
    if z == 0 {
        bad("rerank.z", "must be positive".into());
    }
    if k == 0 {
        bad("rerank.k", "must be positive".into());
    } else if k > z {
        bad("rerank.k", format!("K = {k} exceeds z = {z}"));
    }
    if let Some(t) = config.rerank.cold_tolerance {
        if !(t >= 0.0 && t.is_finite()) {
            bad("rerank.cold_tolerance", format!("must be non-negative, got {t}"));
        }
    }

    let sw = &config.sweep;
    if let Some(grid) = &sw.lambdas {
        if grid.first() != Some(&0.0) {
            bad("sweep.lambdas", "must start at 0".into());
        } else if grid.windows(2).any(|w| w[0] >= w[1]) || grid.iter().any(|l| !l.is_finite()) {
            bad("sweep.lambdas", "must be finite and strictly ascending".into());
        }
        if sw.lambda_max.is_some() || sw.lambda_step.is_some() {
            bad("sweep.lambdas", "conflicts with lambda_max/lambda_step".into());
        }
    } else {
        let max = sw.lambda_max.unwrap_or(2.0);
        let step = sw.lambda_step.unwrap_or(0.05);
        if !(max >= 0.0 && max.is_finite()) {
            bad("sweep.lambda_max", format!("must be non-negative, got {max}"));
        }
        if !(step > 0.0 && step.is_finite()) {
            bad("sweep.lambda_step", format!("must be positive, got {step}"));
        }
    }
    if let Some(b) = sw.budget {
        if !(0.0..1.0).contains(&b) {
            bad("sweep.budget", format!("must lie in [0, 1), got {b}"));
        }
    }
    if let Some(t) = sw.relevance_threshold {
        if !t.is_finite() {
            bad("sweep.relevance_threshold", "must be finite".into());
        }
    }
    out
}

/// Where base rankings come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Recommender {
    ItemKnn { neighbors: usize },
    UserKnn { neighbors: usize },
    Wrmf(WrmfParams),
    /// Per-fold rankings files, indexed by fold.
    Import(Vec<PathBuf>),
}

impl Recommender {
    pub fn kind(&self) -> RecommenderKind {
        match self {
            Recommender::ItemKnn { .. } => RecommenderKind::ItemKnn,
            Recommender::UserKnn { .. } => RecommenderKind::UserKnn,
            Recommender::Wrmf(_) => RecommenderKind::Wrmf,
            Recommender::Import(_) => RecommenderKind::Import,
        }
    }
}

/// A fully loaded experiment, ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub dataset: RatingsDataset,
    pub catalog: ProviderCatalog,
    pub weights: ProviderWeights,
    pub recommender: Recommender,
    pub z: usize,
    pub k: usize,
    pub mode: RerankMode,
    pub tolerance: ToleranceConfig,
    pub grid: Vec<f64>,
    pub budget: f64,
    pub relevance_threshold: f64,
    pub folds: usize,
    pub seed: u64,
}

fn violations_error(violations: &[Violation]) -> Error {
    Error::Config(
        violations
            .iter()
            .map(Violation::to_string)
            .collect::<Vec<_>>()
            .join("; "),
    )
}

impl Experiment {
    /// Validate `config` and load every input it names.
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        let violations = validate_config(config);
        if !violations.is_empty() {
            return Err(violations_error(&violations));
        }
        let seed = config.seed.expect("validated");
        let ds = &config.dataset;

        let (mut dataset, mut catalog, default_name) = if let Some(p) = &ds.ratings {
            let schema = RatingsSchema {
                delimiter: ds.delimiter.unwrap_or_default(),
                user_column: ds.user_column.unwrap_or(0),
                item_column: ds.item_column.unwrap_or(1),
                rating_column: ds.rating_column.unwrap_or(2),
                clamp_negative: ds.clamp_negative,
            };
            let loaded = load_ratings(config.path(p), &schema)?;
            if loaded.duplicates > 0 {
                warn!("{} duplicate ratings overwritten", loaded.duplicates);
            }
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned());
            (loaded.dataset, None, name)
        } else if let Some(t) = &ds.transactions {
            let path = config.path(t.path.as_ref().expect("validated"));
            let records = load_transactions(
                &path,
                t.user_column.as_deref().expect("validated"),
                t.delimiter.unwrap_or(Delimiter::Comma),
            )?;
            let spec = PseudoItemSpec {
                grouping: t.grouping.clone(),
                amount_attribute: t.amount_attribute.clone(),
                bins: t.bins.unwrap_or(5),
                provider_attribute: t.provider_attribute.clone().expect("validated"),
            };
            let (dataset, catalog) = build_pseudo_items(&records, &spec)?;
            let name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
            (dataset, Some(catalog), name)
        } else {
            let s = ds.synthetic.as_ref().expect("validated");
            let base = SyntheticSpec::filmtrust_like(derive_seed(seed, DATASET_SEED_STREAM));
            let spec = SyntheticSpec {
                users: s.users.unwrap_or(base.users),
                items: s.items.unwrap_or(base.items),
                ratings: s.ratings.unwrap_or(base.ratings),
                ..base
            };
            (generate(&spec)?, None, Some("synthetic".to_owned()))
        };

        if let Some(k) = ds.k_core {
            let before = dataset.len();
            dataset = k_core_filter(&dataset, k)?;
            info!("{k}-core kept {} of {before} ratings", dataset.len());
        }
        if dataset.is_empty() {
            return Err(Error::InvalidArgument("dataset has no ratings".into()));
        }

        let pv = &config.providers;
        if catalog.is_none() {
            catalog = Some(match (&pv.map, &pv.synthetic) {
                (Some(map), _) => load_provider_map(config.path(map), pv.delimiter.unwrap_or_default())?,
                (None, Some(s)) => assign_synthetic_providers(
                    &dataset,
                    s.count,
                    s.p,
                    derive_seed(seed, PROVIDER_SEED_STREAM),
                )?,
                (None, None) => unreachable!("validated"),
            });
        }
        let catalog = catalog.expect("set above");
        if let Some(item) = dataset
            .items()
            .names()
            .iter()
            .find(|i| catalog.owners(i).is_none())
        {
            return Err(Error::UnownedItem(item.clone()));
        }
        let weights = match &pv.weights {
            Some(p) => load_provider_weights(config.path(p), pv.delimiter.unwrap_or_default(), &catalog)?,
            None => ProviderWeights::uniform(catalog.num_providers()),
        };

        let rc = &config.recommender;
        let neighbors = rc.neighbors.unwrap_or(50);
        let recommender = match rc.kind.expect("validated") {
            RecommenderKind::ItemKnn => Recommender::ItemKnn { neighbors },
            RecommenderKind::UserKnn => Recommender::UserKnn { neighbors },
            RecommenderKind::Wrmf => {
                let d = WrmfParams::default();
                Recommender::Wrmf(WrmfParams {
                    factors: rc.factors.unwrap_or(d.factors),
                    reg: rc.reg.unwrap_or(d.reg),
                    alpha: rc.alpha.unwrap_or(d.alpha),
                    iterations: rc.iterations.unwrap_or(d.iterations),
                    seed: derive_seed(seed, MODEL_SEED_STREAM),
                })
            }
            RecommenderKind::Import => Recommender::Import(
                (0..config.folds())
                    .map(|f| config.import_path(f).expect("validated"))
                    .collect(),
            ),
        };

        let sw = &config.sweep;
        let grid = match &sw.lambdas {
            Some(g) => g.clone(),
            None => lambda_grid(sw.lambda_max.unwrap_or(2.0), sw.lambda_step.unwrap_or(0.05))?,
        };
        Ok(Self {
            name: ds.name.clone().or(default_name).unwrap_or_else(|| "dataset".into()),
            dataset,
            catalog,
            weights,
            recommender,
            z: config.z(),
            k: config.k(),
            mode: config.rerank.mode.unwrap_or(RerankMode::Far),
            tolerance: ToleranceConfig {
                normalize: config.rerank.normalize_tolerance,
                cold_fallback: config.rerank.cold_tolerance,
            },
            grid,
            budget: sw.budget.unwrap_or(0.05),
            relevance_threshold: sw.relevance_threshold.unwrap_or(0.0),
            folds: config.folds(),
            seed,
        })
    }

    pub fn splits(&self) -> Result<Vec<FoldSplit>> {
        split_folds(&self.dataset, self.folds, derive_seed(self.seed, FOLD_SEED_STREAM))
    }

    /// Normalized top-z lists for every user with training ratings.
    pub fn base_lists(&self, split: &FoldSplit) -> Result<BTreeMap<String, ScoredList>> {
        let train = &split.train;
        let users: Vec<UserId> = train.active_users().collect();
        let lists = match &self.recommender {
            Recommender::ItemKnn { neighbors } => {
                self.score(&train_item_knn(train, *neighbors)?, train, &users)
            }
            Recommender::UserKnn { neighbors } => {
                self.score(&train_user_knn(train, *neighbors)?, train, &users)
            }
            Recommender::Wrmf(params) => {
                let params = WrmfParams {
                    seed: derive_seed(params.seed, split.fold_id as u64),
                    ..params.clone()
                };
                self.score(&train_wrmf(train, &params)?, train, &users)
            }
            Recommender::Import(paths) => {
                let path = paths.get(split.fold_id).ok_or_else(|| {
                    Error::InvalidArgument(format!("no rankings file for fold {}", split.fold_id))
                })?;
                let mut lists = import_rankings(path)?;
                for (user, list) in lists.iter_mut() {
                    if train.user_id(user).is_none() {
                        return Err(Error::UnknownUser(user.clone()));
                    }
                    if list.len() > self.z {
                        let head = list.entries()[..self.z].to_vec();
                        *list = ScoredList::new(user.clone(), head)?;
                    }
                }
                lists
            }
        };
        Ok(lists
            .into_iter()
            .map(|(u, l)| (u, normalize_scores(&l)))
            .collect())
    }

    fn score<S: Scorer>(
        &self,
        model: &S,
        train: &RatingsDataset,
        users: &[UserId],
    ) -> BTreeMap<String, ScoredList> {
        recommend_all(model, train, users, self.z)
    }

    /// Training-fold tolerances for the users in `lists`.
    pub fn tolerances(
        &self,
        train: &RatingsDataset,
        lists: &BTreeMap<String, ScoredList>,
    ) -> Result<BTreeMap<String, f64>> {
        let users: Vec<String> = lists.keys().cloned().collect();
        Ok(tolerance_profiles(train, &self.catalog, &users, &self.tolerance)?
            .into_iter()
            .map(|(u, p)| (u, p.tolerance))
            .collect())
    }

    fn sweep_fold(
        &self,
        split: &FoldSplit,
        lists: &BTreeMap<String, ScoredList>,
        tolerances: &BTreeMap<String, f64>,
        mode: RerankMode,
    ) -> Result<SweepReport> {
        let params = RerankParams::new(0.0, self.k, mode, self.weights.clone())?;
        let ctx = SweepContext {
            catalog: &self.catalog,
            test: &split.test,
            tolerances,
            relevance_threshold: self.relevance_threshold,
            summary: SweepSummary {
                recommender: self.recommender.kind().to_string(),
                dataset: self.name.clone(),
                mode,
                folds: 1,
            },
        };
        let mut report = lambda_sweep(lists, &self.grid, &params, &ctx)?;
        report.cold_users = split
            .test
            .active_users()
            .filter(|&u| split.train.user_ratings(u).is_empty())
            .count();
        Ok(report)
    }

    /// Cross-fold reports for each mode. Base lists are built once per fold
    /// and shared by all modes.
    pub fn run_modes(&self, modes: &[RerankMode]) -> Result<Vec<SweepReport>> {
        let splits = self.splits()?;
        let per_fold = par::try_map(&splits, |split| {
            let started = Instant::now();
            let lists = self.base_lists(split)?;
            let tolerances = if modes.contains(&RerankMode::Pfar) {
                self.tolerances(&split.train, &lists)?
            } else {
                BTreeMap::new()
            };
            let reports = modes
                .iter()
                .map(|&m| self.sweep_fold(split, &lists, &tolerances, m))
                .collect::<Result<Vec<_>>>()?;
            info!(
                "fold {}: {} lists in {:.2?}",
                split.fold_id,
                lists.len(),
                started.elapsed()
            );
            Ok::<_, Error>(reports)
        })?;
        (0..modes.len())
            .map(|m| {
                let reports: Vec<SweepReport> = per_fold.iter().map(|r| r[m].clone()).collect();
                merge_fold_reports(&reports)
            })
            .collect()
    }

    pub fn run(&self) -> Result<SweepReport> {
        Ok(self.run_modes(&[self.mode])?.remove(0))
    }
}

/// What a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: SweepReport,
    pub pick: BudgetPick,
    pub output: PathBuf,
}

/// File name of the histogram written at the selected lambda.
pub fn histogram_file_name(lambda: f64) -> String {
    format!("histogram_lambda_{lambda}.csv")
}

fn manifest(config: &ExperimentConfig, exp: &Experiment, pick: &BudgetPick) -> Result<String> {
    let echo = toml::to_string(config).map_err(|e| Error::Config(e.to_string()))?;
    Ok(format!(
        "fairrank {version}\n\
         seed = {seed}\n\
         dataset = {name} ({users} users, {items} items, {ratings} ratings)\n\
         providers = {providers}\n\
         recommender = {rec}\n\
         mode = {mode}\n\
         folds = {folds}\n\
         grid_points = {points}\n\
         relevance_threshold = {threshold}\n\
         budget = {budget}\n\
         lambda_star = {lambda}\n\
         \n[config]\n{echo}",
        version = env!("CARGO_PKG_VERSION"),
        seed = exp.seed,
        name = exp.name,
        users = exp.dataset.num_users(),
        items = exp.dataset.num_items(),
        ratings = exp.dataset.len(),
        providers = exp.catalog.num_providers(),
        rec = exp.recommender.kind(),
        mode = exp.mode,
        folds = exp.folds,
        points = exp.grid.len(),
        threshold = exp.relevance_threshold,
        budget = exp.budget,
        lambda = pick.lambda,
    ))
}

fn write_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    exp: &Experiment,
    report: &SweepReport,
    pick: &BudgetPick,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_report_csv(dir.join("report.csv"), report)?;
    write_summary_csv(dir.join("summary.csv"), pick)?;
    let row = report
        .rows
        .iter()
        .find(|r| r.lambda == pick.lambda)
        .unwrap_or(&report.base_row);
    write_histogram_csv(dir.join(histogram_file_name(pick.lambda)), report, row)?;
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest(config, exp, pick)?).map_err(|e| Error::io(&path, e))
}

/// Run the experiment and write `report.csv`, `summary.csv`, the histogram
/// at the selected lambda and `manifest.txt`. Outputs are staged in a
/// sibling `.partial` directory and only replace the output directory once
/// everything succeeded.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    let exp = Experiment::from_config(config)?;
    info!(
        "{}: {} users, {} items, {} ratings, {} providers",
        exp.name,
        exp.dataset.num_users(),
        exp.dataset.num_items(),
        exp.dataset.len(),
        exp.catalog.num_providers()
    );
    let report = exp.run()?;
    let pick = apcr_at_ndcg_budget(&report, exp.budget)?;
    info!(
        "lambda* = {} with APCR {:.4} ({:+.2}% over base)",
        pick.lambda,
        pick.apcr,
        pick.relative_gain * 100.0
    );

    let output = config.path(config.output.as_deref().expect("validated"));
    let mut staging = output.clone().into_os_string();
    staging.push(".partial");
    let staging = PathBuf::from(staging);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    if let Err(e) = write_outputs(&staging, config, &exp, &report, &pick) {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }
    if output.exists() {
        fs::remove_dir_all(&output).map_err(|e| Error::io(&output, e))?;
    }
    fs::rename(&staging, &output).map_err(|e| Error::io(&output, e))?;
    Ok(RunOutcome {
        report,
        pick,
        output,
    })
}
