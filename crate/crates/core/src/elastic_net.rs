//! Soft-thresholding, the elastic-net disagreement penalty, and its
//! aggregation solver.
//!
//! The server-side aggregation step minimizes
//! `sum_i phi(w_i - w)` with `phi(z) = lambda ||z||_1 + (eta/2) ||z||^2`
//! over `w`. The problem separates per coordinate into a strictly convex
//! piecewise-quadratic scalar problem whose minimizer either has a closed
//! form indexed by an order statistic, or coincides with one of the inputs.

use crate::{Error, Result};
use crate::numkit::ModelVector;

/// Elastic-net penalty constants and the communication period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    /// L1 weight, `lambda > 0`.
    pub lambda: f64,
    /// L2 weight, `eta > 0`.
    pub eta: f64,
    /// Local iterations between communications, `k0 >= 1`.
    pub k0: usize,
}

impl PenaltyConfig {
    pub fn new(lambda: f64, eta: f64, k0: usize) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
        }
        if !(eta > 0.0) {
            return Err(Error::InvalidInput(format!("eta must be positive, got {eta}")));
        }
        if k0 == 0 {
            return Err(Error::InvalidInput("k0 must be at least 1".into()));
        }
        Ok(Self { lambda, eta, k0 })
    }
}

/// Scalar soft-thresholding: the proximal map of `a |.|`.
pub fn soft(t: f64, a: f64) -> f64 {
    debug_assert!(a >= 0.0);
    if t > a {
        t - a
    } else if t < -a {
        t + a
    } else {
        0.0
    }
}

/// Coordinatewise soft-thresholding; minimizes `(1/2)||z - w||^2 + a ||z||_1`.
pub fn soft_vec(w: &ModelVector, a: f64) -> ModelVector {
    ModelVector::new(w.iter().map(|&t| soft(t, a)).collect())
}

/// Elastic-net penalty `lambda ||z||_1 + (eta/2) ||z||^2`.
pub fn phi(z: &ModelVector, cfg: &PenaltyConfig) -> f64 {
    cfg.lambda * z.norm1() + 0.5 * cfg.eta * z.norm_sq()
}

/// Scalar disagreement objective `h(w) = sum_i (lambda |w - w_i| + (eta/2)(w - w_i)^2)`.
pub fn h_eval(w: f64, values: &[f64], cfg: &PenaltyConfig) -> f64 {
    values
        .iter()
        .map(|&wi| cfg.lambda * (w - wi).abs() + 0.5 * cfg.eta * (w - wi) * (w - wi))
        .sum()
}

/// Global minimizer of `h` over the real line.
///
/// Sorts the values descending and scans `s = 1..m-1` for the candidate
/// `w(s) = mean + (lambda/eta)(2s/m - 1)`, accepting it only under the strict
/// sandwich `w_s^down > w(s) > w_{s+1}^down`. When no candidate passes
/// (including equality cases and `s = m`), the minimizer coincides with one
/// of the inputs and is found by scanning `h` over them, ties broken toward
/// the smallest value.
pub fn ens_scalar(values: &[f64], cfg: &PenaltyConfig) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("ens_scalar requires at least one value".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("ens_scalar rejects non-finite values".into()));
    }
    Ok(ens_scalar_unchecked(values, cfg))
}

fn ens_scalar_unchecked(values: &[f64], cfg: &PenaltyConfig) -> f64 {
    let m = values.len();
    let mean = values.iter().sum::<f64>() / m as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let ratio = cfg.lambda / cfg.eta;
    for s in 1..m {
        let cand = mean + ratio * (2.0 * s as f64 / m as f64 - 1.0);
        if sorted[s - 1] > cand && cand > sorted[s] {
            return cand;
        }
    }
    // Fallback: minimizer is one of the data points. Scan ascending so the
    // smallest value wins ties.
    let mut best = f64::INFINITY;
    let mut best_h = f64::INFINITY;
    for &w in sorted.iter().rev() {
        let h = h_eval(w, values, cfg);
        if h < best_h {
            best_h = h;
            best = w;
        }
    }
    best
}

/// Elastic-net aggregation of `m` vectors: coordinate `j` of the result is
/// `ens_scalar` over the `j`th entries. Worst case `O(n m log m)` plus the
/// fallback scan.
pub fn ens(vectors: &[ModelVector], cfg: &PenaltyConfig) -> Result<ModelVector> {
    let n = check_columns(vectors)?;
    let mut out = Vec::with_capacity(n);
    let mut column = vec![0.0; vectors.len()];
    for j in 0..n {
        for (slot, v) in column.iter_mut().zip(vectors.iter()) {
            *slot = v[j];
        }
        out.push(ens_scalar_unchecked(&column, cfg));
    }
    Ok(ModelVector::new(out))
}

/// Column-wise median; for even `m` the midpoint of the two central order
/// statistics. Minimizes `sum_i ||w - w_i||_1`.
pub fn median_cols(vectors: &[ModelVector]) -> Result<ModelVector> {
    let n = check_columns(vectors)?;
    let m = vectors.len();
    let mut out = Vec::with_capacity(n);
    let mut column = vec![0.0; m];
    for j in 0..n {
        for (slot, v) in column.iter_mut().zip(vectors.iter()) {
            *slot = v[j];
        }
        column.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = if m % 2 == 1 {
            column[m / 2]
        } else {
            0.5 * (column[m / 2 - 1] + column[m / 2])
        };
        out.push(med);
    }
    Ok(ModelVector::new(out))
}

fn check_columns(vectors: &[ModelVector]) -> Result<usize> {
    if vectors.is_empty() {
        return Err(Error::InvalidInput("aggregation requires at least one vector".into()));
    }
    let n = vectors[0].len();
    if vectors.iter().any(|v| v.len() != n) {
        return Err(Error::InvalidInput("aggregation inputs must share dimension".into()));
    }
    if vectors.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("aggregation rejects non-finite entries".into()));
    }
    Ok(n)
}
