//! Loading, synthesizing and splitting the input data.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use log::warn;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IdMap, ProviderCatalog, ProviderId, ProviderWeights, Rating, RatingsDataset};

/// Field separator of a delimited text file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Delimiter {
    #[default]
    Tab,
    Comma,
    /// Any run of spaces or tabs.
    Whitespace,
    Char(char),
}

impl Delimiter {
    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            Delimiter::Tab => line.split('\t').map(str::trim).collect(),
            Delimiter::Comma => line.split(',').map(str::trim).collect(),
            Delimiter::Whitespace => line.split_whitespace().collect(),
            Delimiter::Char(c) => line.split(*c).map(str::trim).collect(),
        }
    }

    fn as_byte(&self) -> u8 {
        match self {
            Delimiter::Tab | Delimiter::Whitespace => b'\t',
            Delimiter::Comma => b',',
            Delimiter::Char(c) => *c as u8,
        }
    }
}

impl std::str::FromStr for Delimiter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "\t" | "tab" => Ok(Delimiter::Tab),
            "," | "comma" => Ok(Delimiter::Comma),
            "whitespace" | "space" | " " => Ok(Delimiter::Whitespace),
            other => {
                let mut chars = other.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) if c.is_ascii() => Ok(Delimiter::Char(c)),
                    _ => Err(Error::InvalidArgument(format!(
                        "unsupported delimiter `{other}`"
                    ))),
                }
            }
        }
    }
}

impl<'de> Deserialize<'de> for Delimiter {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Serialize for Delimiter {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Delimiter::Tab => s.serialize_str("tab"),
            Delimiter::Comma => s.serialize_str("comma"),
            Delimiter::Whitespace => s.serialize_str("whitespace"),
            Delimiter::Char(c) => s.serialize_str(&c.to_string()),
        }
    }
}

/// Column layout of a ratings file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RatingsSchema {
    pub delimiter: Delimiter,
    pub user_column: usize,
    pub item_column: usize,
    pub rating_column: usize,
    /// Clamp negative ratings to zero instead of rejecting them.
    pub clamp_negative: bool,
}

impl Default for RatingsSchema {
    fn default() -> Self {
        Self {
            delimiter: Delimiter::Tab,
            user_column: 0,
            item_column: 1,
            rating_column: 2,
            clamp_negative: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedRatings {
    pub dataset: RatingsDataset,
    /// Rows overwritten by a later row for the same (user, item).
    pub duplicates: usize,
    /// Negative ratings clamped to zero.
    pub clamped: usize,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn data_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        out.push((n + 1, line));
    }
    Ok(out)
}

/// Load `(user, item, rating)` rows. Later rows win over earlier rows for
/// the same pair; `#` lines are comments.
pub fn load_ratings(path: impl AsRef<Path>, schema: &RatingsSchema) -> Result<LoadedRatings> {
    let path = path.as_ref();
    let width = schema
        .user_column
        .max(schema.item_column)
        .max(schema.rating_column)
        + 1;
    let mut rows: IndexMap<(String, String), f64> = IndexMap::new();
    let mut duplicates = 0;
    let mut clamped = 0;
    for (line_no, line) in data_lines(path)? {
        let fields = schema.delimiter.split(&line);
        if fields.len() < width {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected at least {width} columns, found {}", fields.len()),
            ));
        }
        let raw = fields[schema.rating_column];
        let mut value: f64 = raw
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("rating `{raw}` is not a number")))?;
        if !value.is_finite() {
            return Err(Error::parse(path, line_no, "rating is not finite"));
        }
        if value < 0.0 {
            if !schema.clamp_negative {
                return Err(Error::parse(path, line_no, format!("negative rating {value}")));
            }
            value = 0.0;
            clamped += 1;
        }
        let key = (
            fields[schema.user_column].to_owned(),
            fields[schema.item_column].to_owned(),
        );
        if rows.insert(key, value).is_some() {
            duplicates += 1;
        }
    }
    if duplicates > 0 {
        warn!("{}: {duplicates} duplicate (user, item) rows, kept the last", path.display());
    }
    if clamped > 0 {
        warn!("{}: clamped {clamped} negative ratings to 0", path.display());
    }
    let dataset = RatingsDataset::from_triples(rows.into_iter().map(|((u, i), v)| (u, i, v)))?;
    Ok(LoadedRatings {
        dataset,
        duplicates,
        clamped,
    })
}

/// Write ratings as tab-separated `user item rating` rows.
pub fn write_ratings(path: impl AsRef<Path>, dataset: &RatingsDataset) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    for r in dataset.ratings() {
        writeln!(
            out,
            "{}\t{}\t{}",
            dataset.user_name(r.user),
            dataset.item_name(r.item),
            r.value
        )
        .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Load `(item, provider)` rows. Repeated items own several providers.
pub fn load_provider_map(path: impl AsRef<Path>, delimiter: Delimiter) -> Result<ProviderCatalog> {
    let path = path.as_ref();
    let mut pairs = Vec::new();
    for (line_no, line) in data_lines(path)? {
        let fields = delimiter.split(&line);
        if fields.len() < 2 || fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::parse(path, line_no, "expected `item provider` columns"));
        }
        pairs.push((fields[0].to_owned(), fields[1].to_owned()));
    }
    if pairs.is_empty() {
        return Err(Error::parse(path, 0, "provider map is empty"));
    }
    ProviderCatalog::from_pairs(pairs)
}

/// Write one `item provider` row per ownership pair, grouped by provider
/// so that re-loading reproduces the provider order.
pub fn write_provider_map(path: impl AsRef<Path>, catalog: &ProviderCatalog) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    for d in 0..catalog.num_providers() {
        let d = ProviderId(d as u32);
        for (item, owners) in catalog.iter() {
            if owners.contains(&d) {
                writeln!(out, "{item}\t{}", catalog.provider_name(d)).map_err(|e| Error::io(path, e))?;
            }
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Load `(provider, weight)` rows and normalize them to sum to one.
/// Providers absent from the file get weight zero.
pub fn load_provider_weights(
    path: impl AsRef<Path>,
    delimiter: Delimiter,
    catalog: &ProviderCatalog,
) -> Result<ProviderWeights> {
    let path = path.as_ref();
    let mut raw = vec![0.0; catalog.num_providers()];
    for (line_no, line) in data_lines(path)? {
        let fields = delimiter.split(&line);
        if fields.len() < 2 {
            return Err(Error::parse(path, line_no, "expected `provider weight` columns"));
        }
        let d = catalog
            .provider_id(fields[0])
            .ok_or_else(|| Error::parse(path, line_no, format!("unknown provider `{}`", fields[0])))?;
        let w: f64 = fields[1]
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("weight `{}` is not a number", fields[1])))?;
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::parse(path, line_no, format!("invalid weight {w}")));
        }
        raw[d.index()] = w;
    }
    ProviderWeights::normalized(raw)
}

/// Name used for the `j`-th synthetic provider.
pub fn synthetic_provider_name(j: usize) -> String {
    format!("P{j:02}")
}

/// Assign every item one of `c` providers drawn from a truncated geometric
/// distribution: provider `j` has probability proportional to `p (1-p)^j`.
pub fn assign_synthetic_providers(
    dataset: &RatingsDataset,
    c: usize,
    p: f64,
    seed: u64,
) -> Result<ProviderCatalog> {
    if c == 0 {
        return Err(Error::InvalidArgument("provider count must be positive".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "geometric parameter must lie in (0, 1), got {p}"
        )));
    }
    if dataset.num_items() == 0 {
        return Err(Error::InvalidArgument("dataset has no items".into()));
    }
    let pmf = truncated_geometric_pmf(c, p);
    let dist = WeightedIndex::new(&pmf).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let providers: IdMap = (0..c).map(synthetic_provider_name).collect();
    let owners: Vec<ProviderId> = (0..dataset.num_items())
        .map(|_| ProviderId(dist.sample(&mut rng) as u32))
        .collect();
    ProviderCatalog::with_providers(
        providers,
        dataset
            .items()
            .names()
            .iter()
            .zip(owners)
            .map(|(item, d)| (item.clone(), vec![d])),
    )
}

/// `p (1-p)^j / Σ_j' p (1-p)^j'` for `j` in `0..c`.
pub fn truncated_geometric_pmf(c: usize, p: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..c).map(|j| p * (1.0 - p).powi(j as i32)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// One raw transaction: who did it and its categorical/numeric features.
#[derive(Debug, Clone, PartialEq)]
pub struct TransactionRecord {
    pub user: String,
    pub attributes: BTreeMap<String, String>,
}

/// Read a delimited transactions file with a header row. `user_column`
/// names the column holding the user; all other columns become attributes.
pub fn load_transactions(
    path: impl AsRef<Path>,
    user_column: &str,
    delimiter: Delimiter,
) -> Result<Vec<TransactionRecord>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter.as_byte())
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(open(path)?);
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 1, e.to_string()))?
        .clone();
    let user_ix = headers
        .iter()
        .position(|h| h == user_column)
        .ok_or_else(|| Error::parse(path, 1, format!("no `{user_column}` column in header")))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != headers.len() {
            return Err(Error::parse(path, line, "row width differs from header"));
        }
        let attributes = headers
            .iter()
            .zip(record.iter())
            .enumerate()
            .filter(|(i, _)| *i != user_ix)
            .map(|(_, (h, v))| (h.to_owned(), v.to_owned()))
            .collect();
        out.push(TransactionRecord {
            user: record[user_ix].to_owned(),
            attributes,
        });
    }
    Ok(out)
}

/// How transactions collapse into pseudo-items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoItemSpec {
    /// Attributes whose value tuple identifies a pseudo-item.
    pub grouping: Vec<String>,
    /// Numeric attribute replaced by its quantile bucket before grouping.
    pub amount_attribute: Option<String>,
    pub bins: usize,
    /// Attribute naming the provider. Appended to the grouping key if it is
    /// not already there.
    pub provider_attribute: String,
}

/// Equal-count bucket index in `0..bins` for each value. Equal values share
/// the bucket of their first sorted position.
pub fn quantile_buckets(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut buckets = vec![0; n];
    let mut start = 0;
    while start < n {
        let v = values[order[start]];
        let mut end = start;
        while end < n && values[order[end]] == v {
            end += 1;
        }
        let bucket = (start * bins / n).min(bins - 1);
        for &ix in &order[start..end] {
            buckets[ix] = bucket;
        }
        start = end;
    }
    buckets
}

/// Collapse transactions into pseudo-items. The rating of a user for a
/// pseudo-item is the number of their transactions that fall into it.
pub fn build_pseudo_items(
    records: &[TransactionRecord],
    spec: &PseudoItemSpec,
) -> Result<(RatingsDataset, ProviderCatalog)> {
    if spec.grouping.is_empty() {
        return Err(Error::InvalidArgument("pseudo-item grouping is empty".into()));
    }
    if spec.amount_attribute.is_some() && spec.bins == 0 {
        return Err(Error::InvalidArgument("amount binning needs at least one bin".into()));
    }
    let mut key_attrs = spec.grouping.clone();
    if !key_attrs.contains(&spec.provider_attribute) {
        key_attrs.push(spec.provider_attribute.clone());
    }
    let attr = |r: &TransactionRecord, name: &str| -> Result<String> {
        r.attributes.get(name).cloned().ok_or_else(|| {
            Error::InvalidArgument(format!("transaction of `{}` lacks attribute `{name}`", r.user))
        })
    };

    let buckets = match &spec.amount_attribute {
        Some(amount) => {
            let values = records
                .iter()
                .map(|r| {
                    let raw = attr(r, amount)?;
                    match raw.parse::<f64>() {
                        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
                        _ => Err(Error::InvalidArgument(format!(
                            "amount `{raw}` is not a non-negative number"
                        ))),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Some(quantile_buckets(&values, spec.bins))
        }
        None => None,
    };

    let mut counts: IndexMap<(String, String), f64> = IndexMap::new();
    let mut owner: IndexMap<String, String> = IndexMap::new();
    for (ix, record) in records.iter().enumerate() {
        let mut parts = Vec::with_capacity(key_attrs.len());
        for name in &key_attrs {
            let value = match (&spec.amount_attribute, &buckets) {
                (Some(amount), Some(b)) if amount == name => b[ix].to_string(),
                _ => attr(record, name)?,
            };
            parts.push(value);
        }
        let item = parts.join("|");
        let provider = attr(record, &spec.provider_attribute)?;
        owner.entry(item.clone()).or_insert(provider);
        *counts.entry((record.user.clone(), item)).or_insert(0.0) += 1.0;
    }
    let dataset = RatingsDataset::from_triples(counts.into_iter().map(|((u, i), c)| (u, i, c)))?;
    let catalog = ProviderCatalog::from_pairs(owner)?;
    Ok((dataset, catalog))
}

/// Largest sub-dataset where every user and every item has at least `k`
/// ratings. Identifiers that drop out are removed.
pub fn k_core_filter(dataset: &RatingsDataset, k: usize) -> Result<RatingsDataset> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let m = dataset.num_users();
    let n = dataset.num_items();
    let mut user_deg: Vec<usize> = (0..m)
        .map(|u| dataset.user_ratings(crate::UserId(u as u32)).len())
        .collect();
    let mut item_deg: Vec<usize> = (0..n)
        .map(|i| dataset.item_ratings(crate::ItemId(i as u32)).len())
        .collect();
    let mut user_alive = vec![true; m];
    let mut item_alive = vec![true; n];

    // Entries: (is_user, index).
    let mut queue: Vec<(bool, usize)> = Vec::new();
    queue.extend((0..m).filter(|&u| user_deg[u] < k).map(|u| (true, u)));
    queue.extend((0..n).filter(|&i| item_deg[i] < k).map(|i| (false, i)));
    while let Some((is_user, ix)) = queue.pop() {
        if is_user {
            if !user_alive[ix] {
                continue;
            }
            user_alive[ix] = false;
            for &(item, _) in dataset.user_ratings(crate::UserId(ix as u32)) {
                let i = item.index();
                if item_alive[i] {
                    item_deg[i] -= 1;
                    if item_deg[i] < k {
                        queue.push((false, i));
                    }
                }
            }
        } else {
            if !item_alive[ix] {
                continue;
            }
            item_alive[ix] = false;
            for &(user, _) in dataset.item_ratings(crate::ItemId(ix as u32)) {
                let u = user.index();
                if user_alive[u] {
                    user_deg[u] -= 1;
                    if user_deg[u] < k {
                        queue.push((true, u));
                    }
                }
            }
        }
    }
    Ok(dataset
        .subset(|r| user_alive[r.user.index()] && item_alive[r.item.index()])
        .compact())
}

/// One cross-validation fold. Both halves share the source's id tables.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldSplit {
    pub fold_id: usize,
    pub train: RatingsDataset,
    pub test: RatingsDataset,
}

/// Randomly partition the ratings into `folds` parts whose sizes differ by
/// at most one; fold `i` tests on part `i` and trains on the rest.
pub fn split_folds(dataset: &RatingsDataset, folds: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    if folds < 2 {
        return Err(Error::InvalidArgument("need at least two folds".into()));
    }
    if dataset.len() < folds {
        return Err(Error::InvalidArgument(format!(
            "{} ratings cannot fill {folds} folds",
            dataset.len()
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut part = vec![0usize; dataset.len()];
    for (pos, &ix) in order.iter().enumerate() {
        part[ix] = pos % folds;
    }
    let ratings = dataset.ratings();
    let users = dataset.users().clone();
    let items = dataset.items().clone();
    (0..folds)
        .map(|f| {
            let (test, train): (Vec<Rating>, Vec<Rating>) =
                ratings.iter().enumerate().map(|(ix, r)| (part[ix], *r)).fold(
                    (Vec::new(), Vec::new()),
                    |(mut test, mut train), (p, r)| {
                        if p == f {
                            test.push(r);
                        } else {
                            train.push(r);
                        }
                        (test, train)
                    },
                );
            Ok(FoldSplit {
                fold_id: f,
                train: RatingsDataset::with_universe(users.clone(), items.clone(), train)?,
                test: RatingsDataset::with_universe(users.clone(), items.clone(), test)?,
            })
        })
        .collect()
}

/// Resolves a possibly relative path against a base directory.
pub(crate) fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Deterministic per-stream seed derived from a master seed (splitmix64).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
