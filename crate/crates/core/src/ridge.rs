//! Dense ridge regression on a column subset of the design matrix.
//!
//! Every block is decomposed once at construction, `X_V = U diag(d) Vᵀ`,
//! and all later work (fits for any penalty, effective degrees of freedom,
//! penalty inversion) runs on the cached factors. With shrinkage factors
//! `a_i = d_i² / (d_i² + λ)` the ridge hat matrix is `U diag(a) Uᵀ`, so
//!
//! ```text
//! df(λ) = tr(2H − H²) = Σ_i (2 a_i − a_i²) = Σ_i 1 − (λ / (d_i² + λ))²
//! ```

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest one are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Absolute tolerance on `|df(λ) − target|` accepted by [`solve_lambda`].
pub const DF_TOLERANCE: f64 = 1e-10;

const LOG_LAMBDA_BRACKET: (f64, f64) = (-12.0, 12.0);
const MAX_BISECTIONS: usize = 200;

/// A column subset `X_V` of the design matrix together with its thin SVD.
#[derive(Debug, Clone)]
pub struct DesignBlock {
    columns: Vec<usize>,
    values: DMatrix<f64>,
    u: DMatrix<f64>,
    singular: Vec<f64>,
    v: DMatrix<f64>,
}

impl DesignBlock {
    /// Extracts `columns` from `x` and factorizes the resulting block.
    pub fn new(x: &DMatrix<f64>, columns: Vec<usize>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::EmptyBlock);
        }
        for w in columns.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::UnsortedColumns);
            }
        }
        if let Some(&bad) = columns.iter().find(|&&c| c >= x.ncols()) {
            return Err(Error::InvalidColumn(bad));
        }
        let values = x.select_columns(columns.iter());
        Self::from_parts(values, columns)
    }

    /// Wraps an already extracted block; `columns` only labels its columns.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let columns = (0..values.ncols()).collect();
        Self::from_parts(values, columns)
    }

    fn from_parts(values: DMatrix<f64>, columns: Vec<usize>) -> Result<Self> {
        if values.ncols() == 0 || values.nrows() == 0 {
            return Err(Error::EmptyBlock);
        }
        let svd = values.clone().svd(true, true);
        let (u_full, vt_full) = match (svd.u, svd.v_t) {
            (Some(u), Some(vt)) => (u, vt),
            _ => return Err(Error::EmptyBlock),
        };
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| {
            svd.singular_values[j]
                .partial_cmp(&svd.singular_values[i])
                .unwrap_or(core::cmp::Ordering::Equal)
        });
        let d_max = order
            .first()
            .map(|&i| svd.singular_values[i])
            .unwrap_or(0.0);
        if d_max.is_nan() || d_max <= 0.0 {
            return Err(Error::EmptyBlock);
        }
        let kept: Vec<usize> = order
            .into_iter()
            .filter(|&i| svd.singular_values[i] > RANK_TOLERANCE * d_max)
            .collect();
        let n = values.nrows();
        let p = values.ncols();
        let r = kept.len();
        let mut u = DMatrix::zeros(n, r);
        let mut v = DMatrix::zeros(p, r);
        let mut singular = Vec::with_capacity(r);
        for (k, &i) in kept.iter().enumerate() {
            u.set_column(k, &u_full.column(i));
            v.set_column(k, &vt_full.row(i).transpose());
            singular.push(svd.singular_values[i]);
        }
        Ok(Self {
            columns,
            values,
            u,
            singular,
            v,
        })
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// Numerical rank: the number of retained singular values.
    pub fn rank(&self) -> usize {
        self.singular.len()
    }

    /// Retained singular values, nonincreasing.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular
    }

    /// Left singular vectors, `n × rank`.
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// Right singular vectors, `p_l × rank`.
    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn has_full_column_rank(&self) -> bool {
        self.rank() == self.ncols()
    }

    /// Shrinkage factors `a_i = d_i² / (d_i² + λ)` of the hat matrix.
    pub fn shrinkage(&self, lambda: f64) -> Vec<f64> {
        self.singular
            .iter()
            .map(|&d| {
                let d2 = d * d;
                d2 / (d2 + lambda)
            })
            .collect()
    }
}

/// Output of a single ridge fit on one block.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub lambda: f64,
    pub coefficients: Vec<f64>,
    pub fitted: Vec<f64>,
    pub rss: f64,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(alloc::format!(
            "ridge penalty must be finite and nonnegative, got {lambda}"
        )))
    }
}

/// Minimizes `‖target − Xβ‖² + λ‖β‖²` over the block's columns.
pub fn ridge_fit(block: &DesignBlock, lambda: f64, target: &[f64]) -> Result<RidgeFit> {
    check_lambda(lambda)?;
    if target.len() != block.nrows() {
        return Err(Error::DimensionMismatch {
            expected: block.nrows(),
            found: target.len(),
        });
    }
    if lambda == 0.0 && !block.has_full_column_rank() {
        return Err(Error::SingularBlock);
    }
    Ok(fit_on_factors(block, lambda, target))
}

/// Ridge fit through the cached factors; at `λ = 0` on a rank-deficient
/// block this is the minimum-norm least-squares solution.
pub(crate) fn fit_on_factors(block: &DesignBlock, lambda: f64, target: &[f64]) -> RidgeFit {
    let t = DVector::from_column_slice(target);
    let mut z = block.u.tr_mul(&t);
    for (zi, &d) in z.iter_mut().zip(&block.singular) {
        *zi *= d / (d * d + lambda);
    }
    let coefficients = &block.v * z;
    let fitted = &block.values * &coefficients;
    let rss = target
        .iter()
        .zip(fitted.iter())
        .map(|(y, f)| (y - f) * (y - f))
        .sum();
    RidgeFit {
        lambda,
        coefficients: coefficients.as_slice().to_vec(),
        fitted: fitted.as_slice().to_vec(),
        rss,
    }
}

/// `df(λ) = tr(2H − H²)` of the ridge hat matrix for this block.
pub fn effective_df(block: &DesignBlock, lambda: f64) -> f64 {
    df_from_singular(&block.singular, lambda)
}

pub(crate) fn df_from_singular(singular: &[f64], lambda: f64) -> f64 {
    singular
        .iter()
        .map(|&d| {
            let rest = lambda / (d * d + lambda);
            1.0 - rest * rest
        })
        .sum()
}

/// Finds `λ ≥ 0` with `effective_df(block, λ) = target_df`.
///
/// `df` is continuous and strictly decreasing in `λ`, so bisection on
/// `log10 λ` always converges; the bracket is widened if the default
/// `[1e-12, 1e12]` does not contain the root.
pub fn solve_lambda(block: &DesignBlock, target_df: f64) -> Result<f64> {
    lambda_for_df(&block.singular, target_df)
}

pub(crate) fn lambda_for_df(singular: &[f64], target_df: f64) -> Result<f64> {
    let rank = singular.len();
    let infeasible = || Error::InfeasibleDf {
        learner: alloc::string::String::new(),
        target: target_df,
        rank,
    };
    if target_df.is_nan() || target_df <= 0.0 || target_df > rank as f64 + 1e-9 {
        return Err(infeasible());
    }
    if target_df >= rank as f64 {
        return Ok(0.0);
    }
    let df_at = |log_lambda: f64| df_from_singular(singular, libm::pow(10.0, log_lambda));
    let (mut lo, mut hi) = LOG_LAMBDA_BRACKET;
    while df_at(lo) < target_df {
        lo -= 12.0;
        if lo < -300.0 {
            return Ok(0.0);
        }
    }
    while df_at(hi) > target_df {
        hi += 12.0;
        if hi > 300.0 {
            return Err(infeasible());
        }
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTIONS {
        mid = 0.5 * (lo + hi);
        let df = df_at(mid);
        if (df - target_df).abs() <= DF_TOLERANCE {
            break;
        }
        if df > target_df {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
    }
    Ok(libm::pow(10.0, mid))
}
