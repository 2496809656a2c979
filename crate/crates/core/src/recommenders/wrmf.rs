use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{DenseIndex, ItemId, RatingsDataset, UserId};
use crate::par;

use super::Scorer;

/// Hyperparameters for implicit-feedback matrix factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct WrmfParams {
    pub factors: usize,
    pub reg: f64,
    /// Confidence slope: `c = 1 + alpha * r`.
    pub alpha: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for WrmfParams {
    fn default() -> Self {
        Self {
            factors: 10,
            reg: 0.01,
            alpha: 40.0,
            iterations: 15,
            seed: 0,
        }
    }
}

/// Weighted regularized matrix factorization trained by alternating
/// least squares. Factors are stored row-major.
#[derive(Debug, Clone)]
pub struct FactorModel {
    pub user_factors: Vec<f64>,
    pub item_factors: Vec<f64>,
    pub factors: usize,
    pub params: WrmfParams,
    /// Objective after initialization, then after each full sweep.
    pub objective_trace: Vec<f64>,
}

impl FactorModel {
    pub fn user_vector(&self, user: UserId) -> &[f64] {
        let f = self.factors;
        &self.user_factors[user.index() * f..(user.index() + 1) * f]
    }

    pub fn item_vector(&self, item: ItemId) -> &[f64] {
        let f = self.factors;
        &self.item_factors[item.index() * f..(item.index() + 1) * f]
    }

    pub fn score(&self, user: UserId, item: ItemId) -> f64 {
        dot(self.user_vector(user), self.item_vector(item))
    }
}

impl Scorer for FactorModel {
    fn predict(&self, train: &RatingsDataset, user: UserId) -> Vec<f64> {
        let x = self.user_vector(user);
        (0..train.num_items())
            .map(|i| dot(x, self.item_vector(ItemId(i as u32))))
            .collect()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gram(rows: &[f64], f: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(f, f);
    for row in rows.chunks(f) {
        for a in 0..f {
            for b in 0..f {
                g[(a, b)] += row[a] * row[b];
            }
        }
    }
    g
}

/// Exact least-squares update of every row of `target` with `fixed` held.
///
/// Row `t` minimizes `Σ_j c_tj (p_tj - x·y_j)² + reg |x|²` over all `j`,
/// where unobserved pairs have `c = 1, p = 0`.
fn solve_side<'a, B: DenseIndex + 'a>(
    target: &mut [f64],
    fixed: &[f64],
    f: usize,
    reg: f64,
    alpha: f64,
    observed: impl Fn(usize) -> &'a [(B, f64)] + Sync + Send,
) {
    let g = gram(fixed, f);
    par::for_each_row_mut(target, f, |t, row| {
        let mut a = g.clone();
        for d in 0..f {
            a[(d, d)] += reg;
        }
        let mut b = DVector::zeros(f);
        for &(j, r) in observed(t) {
            let y = &fixed[j.index() * f..(j.index() + 1) * f];
            let c = 1.0 + alpha * r;
            let p = if r > 0.0 { 1.0 } else { 0.0 };
            for p1 in 0..f {
                for p2 in 0..f {
                    a[(p1, p2)] += (c - 1.0) * y[p1] * y[p2];
                }
                b[p1] += c * p * y[p1];
            }
        }
        let x = match a.clone().cholesky() {
            Some(chol) => chol.solve(&b),
            None => a.lu().solve(&b).unwrap_or_else(|| DVector::zeros(f)),
        };
        row.copy_from_slice(x.as_slice());
    });
}

/// Full weighted objective including all unobserved pairs.
pub(crate) fn objective(train: &RatingsDataset, users: &[f64], items: &[f64], f: usize, reg: f64, alpha: f64) -> f64 {
    let g = gram(items, f);
    let per_user = par::map_range(train.num_users(), |u| {
        let x = &users[u * f..(u + 1) * f];
        let xv = DVector::from_column_slice(x);
        let mut total = (xv.transpose() * &g * &xv)[(0, 0)];
        for &(i, r) in train.user_ratings(UserId(u as u32)) {
            let s = dot(x, &items[i.index() * f..(i.index() + 1) * f]);
            let c = 1.0 + alpha * r;
            let p = if r > 0.0 { 1.0 } else { 0.0 };
            total += c * (p - s) * (p - s) - s * s;
        }
        total
    });
    let norms = users.iter().chain(items).map(|v| v * v).sum::<f64>();
    per_user.iter().sum::<f64>() + reg * norms
}

/// Train WRMF by alternating exact least squares from seeded uniform noise.
pub fn train_wrmf(train: &RatingsDataset, params: &WrmfParams) -> Result<FactorModel> {
    let f = params.factors;
    if f == 0 {
        return Err(Error::InvalidArgument("factor count must be positive".into()));
    }
    if !(params.reg > 0.0 && params.reg.is_finite()) {
        return Err(Error::InvalidArgument("regularization must be positive".into()));
    }
    if !(params.alpha > 0.0 && params.alpha.is_finite()) {
        return Err(Error::InvalidArgument("confidence weight must be positive".into()));
    }
    if params.iterations == 0 {
        return Err(Error::InvalidArgument("iteration count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let init = Uniform::new(0.0, 0.1 / (f as f64).sqrt()).expect("valid range");
    let mut users: Vec<f64> = (0..train.num_users() * f).map(|_| init.sample(&mut rng)).collect();
    let mut items: Vec<f64> = (0..train.num_items() * f).map(|_| init.sample(&mut rng)).collect();

    let mut trace = vec![objective(train, &users, &items, f, params.reg, params.alpha)];
    for sweep in 1..=params.iterations {
        solve_side(&mut users, &items, f, params.reg, params.alpha, |u| {
            train.user_ratings(UserId(u as u32))
        });
        solve_side(&mut items, &users, f, params.reg, params.alpha, |i| {
            train.item_ratings(ItemId(i as u32))
        });
        let obj = objective(train, &users, &items, f, params.reg, params.alpha);
        debug!("wrmf sweep {sweep}: objective {obj:.6}");
        if !obj.is_finite() {
            return Err(Error::Diverged {
                sweep,
                objective: obj,
            });
        }
        trace.push(obj);
    }
    Ok(FactorModel {
        user_factors: users,
        item_factors: items,
        factors: f,
        params: params.clone(),
        objective_trace: trace,
    })
}
