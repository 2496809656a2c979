//! Accuracy and provider-coverage metrics, fairness-weight sweeps and the
//! best-coverage-under-accuracy-budget summary.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{
    ProviderCatalog, RatingsDataset, RerankParams, RerankedList, ScoredList, SweepReport, SweepRow,
    SweepSummary,
};
use crate::par;
use crate::reranker::PreparedList;

/// Binary-gain nDCG over the first `k` items. An item is relevant when the
/// user's test rating exists and is at least `relevance_threshold`.
///
/// Returns `None` when the user has no relevant test items; such users are
/// left out of nDCG averages.
pub fn ndcg_at_k(
    ranked: &RerankedList,
    test: &RatingsDataset,
    k: usize,
    relevance_threshold: f64,
) -> Result<Option<f64>> {
    if k == 0 {
        return Err(Error::InvalidArgument("nDCG cutoff must be positive".into()));
    }
    let Some(user) = test.user_id(ranked.user()) else {
        return Ok(None);
    };
    let relevant = test
        .user_ratings(user)
        .iter()
        .filter(|(_, r)| *r >= relevance_threshold)
        .count();
    if relevant == 0 {
        return Ok(None);
    }
    let dcg: f64 = ranked
        .items()
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, item)| {
            test.item_id(item)
                .and_then(|i| test.rating(user, i))
                .is_some_and(|r| r >= relevance_threshold)
        })
        .map(|(pos, _)| discount(pos))
        .sum();
    let idcg: f64 = (0..relevant.min(k)).map(discount).sum();
    Ok(Some(dcg / idcg))
}

/// `1 / log2(position + 1)` for a 0-based position.
#[inline]
fn discount(pos: usize) -> f64 {
    1.0 / ((pos + 2) as f64).log2()
}

/// Average provider coverage rate: covered providers per list divided by
/// `c`, averaged over lists.
pub fn apcr<'a>(
    lists: impl IntoIterator<Item = &'a RerankedList>,
    catalog: &ProviderCatalog,
) -> f64 {
    let (covered, users) = lists
        .into_iter()
        .fold((0usize, 0usize), |(c, n), l| (c + l.covered_providers().len(), n + 1));
    if users == 0 {
        return 0.0;
    }
    covered as f64 / (catalog.num_providers() * users) as f64
}

/// Recommendation count per provider; an item with several owners counts
/// for each of them.
pub fn provider_histogram<'a>(
    lists: impl IntoIterator<Item = &'a RerankedList>,
    catalog: &ProviderCatalog,
) -> Vec<u64> {
    let mut counts = vec![0u64; catalog.num_providers()];
    for list in lists {
        for item in list.items() {
            for d in catalog.owners(item).unwrap_or(&[]) {
                counts[d.index()] += 1;
            }
        }
    }
    counts
}

/// `0, step, 2·step, …` up to and including `max`, rounded to 1e-9 so the
/// values print cleanly.
pub fn lambda_grid(max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite() && max >= 0.0 && max.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "bad lambda grid: max {max}, step {step}"
        )));
    }
    let n = (max / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| ((i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

/// Everything a sweep needs besides the grid.
#[derive(Debug, Clone)]
pub struct SweepContext<'a> {
    pub catalog: &'a ProviderCatalog,
    pub test: &'a RatingsDataset,
    /// Per-user tolerance; users absent here use 1.
    pub tolerances: &'a BTreeMap<String, f64>,
    pub relevance_threshold: f64,
    pub summary: SweepSummary,
}

struct ListMetrics {
    ndcg: Option<f64>,
    covered: usize,
}

fn row_from(
    lambda: f64,
    lists: &[RerankedList],
    ctx: &SweepContext<'_>,
    k: usize,
) -> Result<(SweepRow, usize)> {
    let metrics = lists
        .iter()
        .map(|l| {
            Ok(ListMetrics {
                ndcg: ndcg_at_k(l, ctx.test, k, ctx.relevance_threshold)?,
                covered: l.covered_providers().len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let scored: Vec<f64> = metrics.iter().filter_map(|m| m.ndcg).collect();
    let mean_ndcg = if scored.is_empty() {
        0.0
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    };
    let covered: usize = metrics.iter().map(|m| m.covered).sum();
    let apcr = if lists.is_empty() {
        0.0
    } else {
        covered as f64 / (ctx.catalog.num_providers() * lists.len()) as f64
    };
    Ok((
        SweepRow {
            lambda,
            mean_ndcg,
            apcr,
            provider_counts: provider_histogram(lists, ctx.catalog),
        },
        lists.len() - scored.len(),
    ))
}

/// Re-rank every base list at each grid point and measure the outcome.
///
/// `grid` must be non-empty, strictly ascending and start at 0. The base
/// row measures the first `K` items of each base list.
pub fn lambda_sweep(
    base_lists: &BTreeMap<String, ScoredList>,
    grid: &[f64],
    template: &RerankParams,
    ctx: &SweepContext<'_>,
) -> Result<SweepReport> {
    if grid.first() != Some(&0.0) {
        return Err(Error::InvalidArgument("lambda grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("lambda grid must be strictly ascending".into()));
    }
    if template.weights.len() != ctx.catalog.num_providers() {
        return Err(Error::InvalidArgument("provider weights do not match the catalog".into()));
    }
    let lists: Vec<&ScoredList> = base_lists.values().collect();
    let prepared = par::try_map(&lists, |l| PreparedList::new(l, ctx.catalog))?;
    let taus: Vec<f64> = lists
        .iter()
        .map(|l| template.effective_tolerance(ctx.tolerances.get(l.user()).copied().unwrap_or(1.0)))
        .collect();

    let base: Vec<RerankedList> = lists
        .iter()
        .map(|l| {
            RerankedList::new(
                l.user(),
                l.items().take(template.k).map(str::to_owned).collect(),
                ctx.catalog,
            )
        })
        .collect();
    let (base_row, excluded) = row_from(0.0, &base, ctx, template.k)?;

    let rows = par::try_map(grid, |&lambda| {
        let idx: Vec<usize> = (0..prepared.len()).collect();
        let reranked = par::map(&idx, |&u| {
            let p = &prepared[u];
            let picks = p.select(lambda, taus[u], template.k, &template.weights);
            let entries = p.list().entries();
            RerankedList::new(
                p.list().user(),
                picks.into_iter().map(|i| entries[i].0.clone()).collect(),
                ctx.catalog,
            )
        });
        row_from(lambda, &reranked, ctx, template.k).map(|(row, _)| row)
    })?;

    Ok(SweepReport {
        summary: ctx.summary.clone(),
        providers: ctx.catalog.providers().names().to_vec(),
        rows,
        base_row,
        evaluated_users: lists.len(),
        ndcg_excluded_users: excluded,
        cold_users: 0,
    })
}

/// Average per-fold reports: nDCG and APCR are averaged, counts summed.
pub fn merge_fold_reports(reports: &[SweepReport]) -> Result<SweepReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidArgument("no fold reports to merge".into()))?;
    if reports.iter().any(|r| {
        r.rows.len() != first.rows.len()
            || r.providers != first.providers
            || r.rows.iter().zip(&first.rows).any(|(a, b)| a.lambda != b.lambda)
    }) {
        return Err(Error::InvalidArgument("fold reports have different shapes".into()));
    }
    let n = reports.len() as f64;
    let merge = |pick: &dyn Fn(&SweepReport) -> &SweepRow| -> SweepRow {
        let rows: Vec<&SweepRow> = reports.iter().map(pick).collect();
        let mut counts = vec![0u64; first.providers.len()];
        for r in &rows {
            for (c, x) in counts.iter_mut().zip(&r.provider_counts) {
                *c += x;
            }
        }
        SweepRow {
            lambda: rows[0].lambda,
            mean_ndcg: rows.iter().map(|r| r.mean_ndcg).sum::<f64>() / n,
            apcr: rows.iter().map(|r| r.apcr).sum::<f64>() / n,
            provider_counts: counts,
        }
    };
    Ok(SweepReport {
        summary: SweepSummary {
            folds: reports.len(),
            ..first.summary.clone()
        },
        providers: first.providers.clone(),
        rows: (0..first.rows.len()).map(|i| merge(&|r| &r.rows[i])).collect(),
        base_row: merge(&|r| &r.base_row),
        evaluated_users: reports.iter().map(|r| r.evaluated_users).sum(),
        ndcg_excluded_users: reports.iter().map(|r| r.ndcg_excluded_users).sum(),
        cold_users: reports.iter().map(|r| r.cold_users).sum(),
    })
}

/// The grid point with the highest APCR whose nDCG stays within the budget.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetPick {
    pub budget: f64,
    pub lambda: f64,
    pub apcr: f64,
    pub mean_ndcg: f64,
    /// `(apcr - base apcr) / base apcr`.
    pub relative_gain: f64,
}

/// Highest-APCR row with `mean_ndcg >= (1 - budget) · base nDCG`; ties go
/// to the smaller lambda. Only evaluated grid points are considered.
pub fn apcr_at_ndcg_budget(report: &SweepReport, budget: f64) -> Result<BudgetPick> {
    if !(0.0..1.0).contains(&budget) {
        return Err(Error::InvalidArgument(format!("budget {budget} outside [0, 1)")));
    }
    let floor = (1.0 - budget) * report.base_row.mean_ndcg;
    let best = report
        .rows
        .iter()
        .filter(|r| r.mean_ndcg >= floor)
        .fold(None::<&SweepRow>, |best, r| match best {
            Some(b) if b.apcr >= r.apcr => Some(b),
            _ => Some(r),
        })
        .unwrap_or(&report.base_row);
    let base = report.base_row.apcr;
    Ok(BudgetPick {
        budget,
        lambda: best.lambda,
        apcr: best.apcr,
        mean_ndcg: best.mean_ndcg,
        relative_gain: if base > 0.0 { (best.apcr - base) / base } else { 0.0 },
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| to_io(path, e))
}

fn to_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e.to_string()))
}

/// `lambda,mean_ndcg,apcr,<one column per provider>`.
pub fn write_report_csv(path: impl AsRef<Path>, report: &SweepReport) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let mut header = vec!["lambda".to_string(), "mean_ndcg".into(), "apcr".into()];
    header.extend(report.providers.iter().cloned());
    w.write_record(&header).map_err(|e| to_io(path, e))?;
    for row in &report.rows {
        let mut rec = vec![row.lambda.to_string(), row.mean_ndcg.to_string(), row.apcr.to_string()];
        rec.extend(row.provider_counts.iter().map(u64::to_string));
        w.write_record(&rec).map_err(|e| to_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `budget,lambda_star,apcr,relative_gain_pct`.
pub fn write_summary_csv(path: impl AsRef<Path>, pick: &BudgetPick) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["budget", "lambda_star", "apcr", "relative_gain_pct"])
        .map_err(|e| to_io(path, e))?;
    w.write_record([
        pick.budget.to_string(),
        pick.lambda.to_string(),
        pick.apcr.to_string(),
        (pick.relative_gain * 100.0).to_string(),
    ])
    .map_err(|e| to_io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// `provider,base_count,count` at the given grid row.
pub fn write_histogram_csv(path: impl AsRef<Path>, report: &SweepReport, row: &SweepRow) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["provider", "base_count", "count"])
        .map_err(|e| to_io(path, e))?;
    for (i, name) in report.providers.iter().enumerate() {
        w.write_record([
            name.clone(),
            report.base_row.provider_counts[i].to_string(),
            row.provider_counts[i].to_string(),
        ])
        .map_err(|e| to_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
