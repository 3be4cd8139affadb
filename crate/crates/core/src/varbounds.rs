//! Noise-variance estimators, their moments, and the deviation bounds used to
//! judge the threshold calibrator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum VarError {
    #[error("need D < n (D = {d}, n = {n})")]
    FullDimension { d: usize, n: usize },
    #[error("need at least 2 observations")]
    TooShort,
    #[error("matrix is not symmetric")]
    AsymmetricM,
    #[error("dimension mismatch")]
    DimensionMismatch,
    #[error("parameter out of range: {0}")]
    BadRange(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub value: f64,
    /// Degrees of freedom in the denominator.
    pub dof: usize,
}

/// ||Y - F_hat_m0||^2 / (n - D_m0).
pub fn sigma2_residual(residual_sq_norm: f64, d_m0: usize, n: usize) -> Result<VarianceEstimate, VarError> {
    if d_m0 >= n {
        return Err(VarError::FullDimension { d: d_m0, n });
    }
    Ok(VarianceEstimate { value: residual_sq_norm / (n - d_m0) as f64, dof: n - d_m0 })
}

/// First-difference estimator sum (Y_{i+1} - Y_i)^2 / (2 (n - 1)).
pub fn sigma2_rice(y: &[f64]) -> Result<VarianceEstimate, VarError> {
    if y.len() < 2 {
        return Err(VarError::TooShort);
    }
    let s: f64 = y.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(VarianceEstimate { value: s / (2.0 * (y.len() - 1) as f64), dof: y.len() - 1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
}

/// Exact bias, variance and MSE of the residual estimator under Gaussian
/// noise, with `bias_sq = ||(I - Pi_m0) F||^2` (not normalised).
pub fn residual_mse_gaussian(n: usize, d: usize, sigma2: f64, bias_sq: f64) -> Result<Moments, VarError> {
    if d >= n {
        return Err(VarError::FullDimension { d, n });
    }
    let k = (n - d) as f64;
    let bias = bias_sq / k;
    let variance = 2.0 * sigma2 * sigma2 / k + 4.0 * sigma2 * bias_sq / (k * k);
    Ok(Moments { bias, variance, mse: variance + bias * bias })
}

/// Variance of `(F + eps)^T M (F + eps)` for symmetric M and independent
/// centred noise with variance `sigma2`, third moment `m3` and fourth moment
/// `m4`.
pub fn var_quadratic_form(m: &DMatrix<f64>, f: &[f64], sigma2: f64, m3: f64, m4: f64) -> Result<f64, VarError> {
    let n = m.nrows();
    if m.ncols() != n || f.len() != n {
        return Err(VarError::DimensionMismatch);
    }
    let scale = m.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(VarError::AsymmetricM);
            }
        }
    }
    let diag = m.diagonal();
    let fv = DVector::from_column_slice(f);
    let s4 = sigma2 * sigma2;
    let w = diag.iter().map(|d| d * d).sum::<f64>() * (m4 - 3.0 * s4) + 2.0 * (m * m).trace() * s4;
    let mf = m * &fv;
    let cross = fv.dot(&(m * &diag));
    Ok(w + 4.0 * mf.norm_squared() * sigma2 + 4.0 * cross * m3)
}

/// Moments of the residual estimator for a general noise distribution, where
/// `m = I - Pi_m0` is the residual projection.
pub fn residual_moments(m: &DMatrix<f64>, f: &[f64], sigma2: f64, m3: f64, m4: f64) -> Result<Moments, VarError> {
    let var_z = var_quadratic_form(m, f, sigma2, m3, m4)?;
    let k = m.trace();
    let mf = m * DVector::from_column_slice(f);
    let bias = mf.norm_squared() / k;
    let variance = var_z / (k * k);
    Ok(Moments { bias, variance, mse: variance + bias * bias })
}

/// Inputs to the high-probability bounds on the threshold estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Confidence level: bounds hold with probability >= 1 - 4|M| exp(-x).
    pub x: f64,
    pub n: usize,
    /// Complexity threshold T.
    pub t: f64,
    pub c_n: f64,
    /// Smallest approximation error among models of dimension <= c_n.
    pub b_cn: f64,
    /// Smallest approximation error among models of dimension <= T/2.
    pub b_half_t: f64,
    pub card_m: usize,
    pub sigma2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    /// Lower bound (may be negative, in which case it is vacuous).
    pub c1: f64,
    pub c2: f64,
    pub mse_bound: f64,
    pub mse_bound_relaxed: f64,
    /// Relative deviations `1 - c1/sigma2` and `c2/sigma2 - 1`.
    pub eta_minus: f64,
    pub eta_plus: f64,
    pub b_cn: f64,
}

pub fn threshold_bounds(b: &BoundInputs) -> Result<BoundSet, VarError> {
    let n = b.n as f64;
    if !(b.x >= 0.0) {
        return Err(VarError::BadRange("x must be non-negative"));
    }
    if !(0.0 <= b.c_n && b.c_n < b.t && b.t < n) {
        return Err(VarError::BadRange("need 0 <= c_n < T < n"));
    }
    if !(b.sigma2 > 0.0) || b.card_m == 0 {
        return Err(VarError::BadRange("need sigma2 > 0 and a non-empty collection"));
    }
    let r = (b.x / n).sqrt();
    let c1 = b.sigma2 * (1.0 - (4.0 * r + 6.0 * b.x / n) / (1.0 - b.t / n));
    let k = n / (b.t - b.c_n);
    let c2 = b.sigma2 * (1.0 + 4.0 * k * (r + 2.0 * b.x / n)) + 2.0 * k * b.b_cn;
    let lead = (1.0 - b.t / n).powi(-2).max((b.t / (2.0 * n)).powi(-2));
    let lm = (4.0 * b.card_m as f64).ln();
    let s4 = b.sigma2 * b.sigma2;
    let mse_bound = 739.0 * lead * (b.b_half_t.powi(2) + s4 * lm / n + s4 * (lm / n).powi(2));
    let mse_bound_relaxed = lead * (12.0 * b.b_half_t.powi(2) + 102.0 * s4 * (b.card_m as f64).ln() / n);
    Ok(BoundSet {
        c1,
        c2,
        mse_bound,
        mse_bound_relaxed,
        eta_minus: 1.0 - c1 / b.sigma2,
        eta_plus: c2 / b.sigma2 - 1.0,
        b_cn: b.b_cn,
    })
}

/// Deviation envelopes of the penalty-constant estimator and the matching
/// risk factor for small constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub eta_minus: f64,
    pub eta_plus: f64,
}

impl Envelope {
    /// Risk inflation factor when the penalty is `u` times the minimal one.
    pub fn risk_small(&self, u: f64) -> f64 {
        risk_small(u)
    }
}

pub fn risk_small(u: f64) -> f64 {
    if u <= 1.0 {
        f64::INFINITY
    } else if u < 2.0 {
        10.0 / (u - 1.0).powi(4)
    } else {
        u.powi(3)
    }
}

/// `b_n20` is the smallest approximation error among models of dimension at
/// most n/20.
pub fn deviation_envelope(gamma: f64, n: usize, b_n20: f64, sigma2: f64) -> Result<Envelope, VarError> {
    if !(gamma > 0.0) || n < 2 || !(sigma2 > 0.0) {
        return Err(VarError::BadRange("need gamma > 0, n >= 2, sigma2 > 0"));
    }
    let nf = n as f64;
    let r = (gamma * nf.ln() / nf).sqrt();
    Ok(Envelope { eta_minus: 41.0 * r, eta_plus: (40.0 * b_n20 + 82.0 * sigma2 * r) / sigma2 })
}
