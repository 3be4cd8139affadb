//! Slope-based calibrators: least-squares slope of the risk against
//! complexity, the robust Theil-Sen variant, the platform-based CAPUSHE
//! procedure, and the five-way median and consensus combiners.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collection::{argmin_position, Collection, EstimatorRecord, ModelId};

#[derive(Debug, Error, PartialEq)]
pub enum SlopeError {
    #[error("all abscissae are equal")]
    DegenerateX,
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("need n >= 4 for the platform procedure, got {0}")]
    TooFewDimensions(usize),
    #[error("non-finite input")]
    NonFinite,
    #[error("expected 5 values, got {0}")]
    WrongCount(usize),
    #[error("percentage must lie in (0, 1), got {0}")]
    BadPct(f64),
}

/// Ordinary least-squares fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub c_hat: f64,
    pub n_points: usize,
    pub residual_sse: f64,
}

/// A run of consecutive dimensions selecting the same model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platform {
    #[serde(rename = "D_start")]
    pub d_start: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub model: ModelId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapusheResult {
    pub c_hat: f64,
    pub selected_id: ModelId,
    pub platforms: Vec<Platform>,
    /// Index into `platforms` of the chosen platform.
    pub chosen: usize,
}

fn check_points(points: &[(f64, f64)]) -> Result<(), SlopeError> {
    if points.len() < 2 {
        return Err(SlopeError::TooFewPoints(points.len()));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(SlopeError::NonFinite);
    }
    Ok(())
}

/// Least-squares slope of y on x.
pub fn ols_slope(points: &[(f64, f64)]) -> Result<SlopeFit, SlopeError> {
    check_points(points)?;
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SlopeError::DegenerateX);
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let residual_sse = points.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    Ok(SlopeFit { c_hat: slope, n_points: points.len(), residual_sse })
}

/// Median of the pairwise slopes over pairs with distinct abscissae.
pub fn theil_sen_slope(points: &[(f64, f64)]) -> Result<f64, SlopeError> {
    check_points(points)?;
    let mut slopes = Vec::with_capacity(points.len() * (points.len() - 1) / 2);
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            if a.0 != b.0 {
                slopes.push((b.1 - a.1) / (b.0 - a.0));
            }
        }
    }
    if slopes.is_empty() {
        return Err(SlopeError::DegenerateX);
    }
    let k = slopes.len();
    let (_, &mut hi, _) = slopes.select_nth_unstable_by(k / 2, f64::total_cmp);
    if k % 2 == 1 {
        return Ok(hi);
    }
    let lo = slopes[..k / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(0.5 * (lo + hi))
}

fn risk_vs_complexity(records: &[EstimatorRecord], d0: f64, n: usize) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter(|r| r.complexity >= d0)
        .map(|r| (-r.complexity / n as f64, r.empirical_risk))
        .collect()
}

/// Least-squares slope of the empirical risk against `-complexity / n` over
/// the records with complexity at least `d0`.
pub fn c_slope(collection: &Collection, d0: f64, n: usize) -> Result<SlopeFit, SlopeError> {
    ols_slope(&risk_vs_complexity(collection.records(), d0, n))
}

/// Platform-based robust slope calibration for collections indexed by
/// dimension `1..=n`.
pub fn capushe(collection: &Collection, n: usize, pct: f64) -> Result<CapusheResult, SlopeError> {
    if n < 4 {
        return Err(SlopeError::TooFewDimensions(n));
    }
    if !(pct > 0.0 && pct < 1.0) {
        return Err(SlopeError::BadPct(pct));
    }
    // Keep the lowest-risk record of each dimension.
    let mut by_dim: BTreeMap<u64, EstimatorRecord> = BTreeMap::new();
    for r in collection.records() {
        by_dim
            .entry(r.complexity.to_bits())
            .and_modify(|e| {
                if r.empirical_risk < e.empirical_risk {
                    *e = *r;
                }
            })
            .or_insert(*r);
    }
    let mut recs: Vec<EstimatorRecord> = by_dim.into_values().collect();
    recs.sort_by(crate::collection::precedes);

    let mut slopes = Vec::with_capacity(n - 2);
    let mut picks = Vec::with_capacity(n - 2);
    for d in 1..=n - 2 {
        let s = theil_sen_slope(&risk_vs_complexity(&recs, d as f64, n))?;
        slopes.push(s);
        picks.push(recs[argmin_position(&recs, 2.0 * s, |r| r.pen0)].id);
    }

    let mut platforms: Vec<Platform> = Vec::new();
    for (j, &m) in picks.iter().enumerate() {
        match platforms.last_mut() {
            Some(p) if p.model == m => p.n += 1,
            _ => platforms.push(Platform { d_start: j + 1, n: 1, model: m }),
        }
    }
    let cut = pct * (n - 2) as f64;
    let chosen = match platforms.iter().rposition(|p| p.n as f64 > cut) {
        Some(i) => i,
        None => {
            let longest = platforms.iter().map(|p| p.n).max().unwrap_or(0);
            platforms.iter().rposition(|p| p.n == longest).unwrap_or(0)
        }
    };
    let p = platforms[chosen];
    let mut window: Vec<f64> = slopes[p.d_start - 1..p.d_start - 1 + p.n].to_vec();
    window.sort_by(f64::total_cmp);
    let c_hat = window[(window.len() - 1) / 2];
    Ok(CapusheResult { c_hat, selected_id: p.model, platforms, chosen })
}

/// Median of exactly five estimates.
pub fn c_median(values: &[f64]) -> Result<f64, SlopeError> {
    if values.len() != 5 {
        return Err(SlopeError::WrongCount(values.len()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SlopeError::NonFinite);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v[2])
}

/// Returns the model chosen by at least three of five calibrators, or
/// `default` with `false` when no such majority exists.
pub fn consensus(ids: &[ModelId], default: ModelId) -> Result<(ModelId, bool), SlopeError> {
    if ids.len() != 5 {
        return Err(SlopeError::WrongCount(ids.len()));
    }
    for &m in ids {
        if ids.iter().filter(|&&x| x == m).count() >= 3 {
            return Ok((m, true));
        }
    }
    Ok((default, false))
}
