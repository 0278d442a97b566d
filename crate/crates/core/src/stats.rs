//! Correlations, OLS with coefficient t-tests, and the Wilcoxon signed-rank
//! test. Everything is computed in f64.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{AbxError, Result};

/// Largest number of non-zero differences for which the Wilcoxon p-value is
/// computed from the exact null distribution.
pub const WILCOXON_EXACT_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMethod {
    Pearson,
    Spearman,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub method: CorrelationMethod,
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

fn check_series(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(AbxError::Stats(format!("length mismatch: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(AbxError::Stats("need at least two observations".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(AbxError::Stats("non-finite value".into()));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Two-sided p-value of a t statistic.
fn t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// p-value of a correlation coefficient via `t = r sqrt((n-2)/(1-r^2))`.
/// With fewer than three points there are no residual degrees of freedom
/// and the p-value is reported as 1.
fn correlation_p(r: f64, n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    let df = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    t_two_sided(r * (df / (1.0 - r * r)).sqrt(), df)
}

fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AbxError::Stats("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    check_series(x, y)?;
    let r = pearson_r(x, y)?;
    Ok(CorrelationResult {
        method: CorrelationMethod::Pearson,
        r,
        p_value: correlation_p(r, x.len()),
        n: x.len(),
    })
}

/// 1-based ranks, ties sharing the average of the ranks they span.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    check_series(x, y)?;
    let r = pearson_r(&average_ranks(x), &average_ranks(y))?;
    Ok(CorrelationResult {
        method: CorrelationMethod::Spearman,
        r,
        p_value: correlation_p(r, x.len()),
        n: x.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    /// Intercept first, then one coefficient per design column.
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    pub r_squared: f64,
    pub n: usize,
    pub k: usize,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
}

/// Error-free product and sum (Ogita, Rump and Oishi): returns the rounded
/// result and its exact rounding error.
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let z = s - a;
    (s, (a - (s - z)) + (b - z))
}

/// `y - X beta`, each entry evaluated as a compensated dot product.
fn compensated_residual(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(y.len(), |i, _| {
        let (mut s, mut c) = (y[i], 0.0);
        for j in 0..beta.len() {
            let (p, e) = two_prod(x[(i, j)], -beta[j]);
            let (t, f) = two_sum(s, p);
            s = t;
            c += e + f;
        }
        s + c
    })
}

/// Ordinary least squares of `y` on `columns` with an intercept prepended,
/// solved through a Householder QR factorization.
pub fn ols_regress(y: &[f64], columns: &[Vec<f64>]) -> Result<RegressionResult> {
    let n = y.len();
    let k = columns.len();
    if n <= k + 1 {
        return Err(AbxError::Stats(format!(
            "need more than {} observations for {k} predictors, got {n}",
            k + 1
        )));
    }
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(AbxError::Stats(format!("design column of length {} for {n} rows", c.len())));
    }
    if y.iter().chain(columns.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(AbxError::Stats("non-finite value".into()));
    }
    let p = k + 1;
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { columns[j - 1][i] });
    let yv = DVector::from_column_slice(y);

    let qr = x.clone().qr();
    let r = qr.r();
    let max_diag = (0..p).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..p).any(|i| r[(i, i)].abs() <= 1e-10 * max_diag.max(f64::MIN_POSITIVE)) {
        return Err(AbxError::Stats("design matrix is rank deficient".into()));
    }
    let q = qr.q();
    let solve = |rhs: &DVector<f64>| {
        r.solve_upper_triangular(&(q.transpose() * rhs))
            .ok_or_else(|| AbxError::Stats("singular triangular factor".into()))
    };
    let mut beta = solve(&yv)?;
    let mut resid = compensated_residual(&x, &yv, &beta);
    // Iterative refinement with residuals accurate to about twice working
    // precision; converges to the correctly rounded solution on
    // well-conditioned designs, so exact data gives exact coefficients.
    for _ in 0..3 {
        let candidate = &beta + solve(&resid)?;
        if candidate == beta {
            break;
        }
        beta = candidate;
        resid = compensated_residual(&x, &yv, &beta);
    }
    let fitted = &yv - &resid;
    let ssr = resid.norm_squared();
    let my = mean(y);
    let sst: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sst == 0.0 {
        return Err(AbxError::Stats("response has zero variance".into()));
    }
    let df = (n - p) as f64;
    let sigma2 = ssr / df;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or_else(|| AbxError::Stats("singular triangular factor".into()))?;
    let mut std_errors = Vec::with_capacity(p);
    let mut t_values = Vec::with_capacity(p);
    let mut p_values = Vec::with_capacity(p);
    for j in 0..p {
        // diag((X'X)^-1) = row norms of R^-1
        let d: f64 = (0..p).map(|c| r_inv[(j, c)].powi(2)).sum();
        let se = (sigma2 * d).sqrt();
        let b = beta[j];
        let (t, pv) = if se > 0.0 {
            let t = b / se;
            (t, t_two_sided(t, df))
        } else if b == 0.0 {
            (0.0, 1.0)
        } else {
            (b.signum() * f64::INFINITY, 0.0)
        };
        std_errors.push(se);
        t_values.push(t);
        p_values.push(pv);
    }
    Ok(RegressionResult {
        coefficients: beta.iter().copied().collect(),
        std_errors,
        t_values,
        p_values,
        r_squared: (1.0 - ssr / sst).clamp(0.0, 1.0),
        n,
        k,
        residuals: resid.iter().copied().collect(),
        fitted: fitted.iter().copied().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankTestMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTestResult {
    /// Sum of the ranks of the positive differences.
    pub statistic: f64,
    pub n_effective: usize,
    pub p_value: f64,
    pub method: RankTestMethod,
}

/// Two-sided Wilcoxon signed-rank test; exact for up to
/// [`WILCOXON_EXACT_MAX_N`] non-zero differences, normal approximation with
/// continuity and tie correction above.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<RankTestResult> {
    let n = diffs.iter().filter(|d| **d != 0.0).count();
    let method = if n <= WILCOXON_EXACT_MAX_N {
        RankTestMethod::Exact
    } else {
        RankTestMethod::NormalApprox
    };
    wilcoxon_signed_rank_with(diffs, method)
}

pub fn wilcoxon_signed_rank_with(diffs: &[f64], method: RankTestMethod) -> Result<RankTestResult> {
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(AbxError::Stats("non-finite difference".into()));
    }
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nz.len();
    if n == 0 {
        return Err(AbxError::Stats("all differences are zero".into()));
    }
    let mags: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&mags);
    let w: f64 = nz
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let p_value = match method {
        RankTestMethod::Exact => exact_signed_rank_p(&ranks, w)?,
        RankTestMethod::NormalApprox => normal_signed_rank_p(&mags, n, w),
    };
    Ok(RankTestResult {
        statistic: w,
        n_effective: n,
        p_value,
        method,
    })
}

/// Null distribution of W by counting all sign assignments. Doubled ranks are
/// integers even with ties, so the counts live on an integer grid.
fn exact_signed_rank_p(ranks: &[f64], w: f64) -> Result<f64> {
    if ranks.len() > 120 {
        return Err(AbxError::Stats("exact test limited to 120 differences".into()));
    }
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0u128; total + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &d in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + d] += counts[s];
            }
        }
        reach += d;
    }
    let w2 = (w * 2.0).round() as usize;
    let all = 2f64.powi(ranks.len() as i32);
    let le: u128 = counts[..=w2].iter().sum();
    let ge: u128 = counts[w2..].iter().sum();
    let p = 2.0 * (le.min(ge) as f64) / all;
    Ok(p.min(1.0))
}

fn normal_signed_rank_p(mags: &[f64], n: usize, w: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut sorted = mags.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    (2.0 * normal.sf(z)).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Sample mean and (n-1) standard deviation.
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = mean(v);
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (m, var.sqrt())
}
