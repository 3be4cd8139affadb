//! Fixed-design regression settings: data generation, projection estimators
//! (nested "easy" and alternating "hard" families), and kernel ridge
//! estimators with a Laplace kernel.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collection::{Collection, EstimatorRecord, ModelId};

#[derive(Debug, Error, PartialEq)]
pub enum RegressError {
    #[error("sample size must be at least 2, got {0}")]
    BadDimension(usize),
    #[error("noise variance must be non-negative, got {0}")]
    BadVariance(f64),
    #[error("kernel matrix has no positive eigenvalue")]
    SingularGrid,
    #[error("problem family does not match the requested estimators")]
    WrongFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Easy,
    Hard,
    Kernel,
}

fn avalanche(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `index` under `master`. The master seed is mixed before
/// the index is folded in, so distinct masters give unrelated replicate sets.
pub fn substream_seed(master: u64, index: u64) -> u64 {
    avalanche(avalanche(master) ^ index)
}

/// Y = F + sigma * eps on a fixed design.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub family: Family,
    pub n: usize,
    pub sigma2: f64,
    pub seed: u64,
    pub f: Vec<f64>,
    pub noise: Vec<f64>,
    pub y: Vec<f64>,
    /// Design points `(i - 1) / (n - 1)`; used by the kernel family.
    pub x: Vec<f64>,
}

/// Per-estimator quantities. Risks are normalised by n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelStats {
    pub id: ModelId,
    pub complexity: f64,
    pub empirical_risk: f64,
    /// n^-1 ||F_hat - F||^2.
    pub true_risk: f64,
    /// n^-1 ||s* - F||^2 where s* is the estimator applied to F.
    pub approx_error: f64,
    pub p1: f64,
    pub p2: f64,
    pub delta: f64,
    pub tr_a: f64,
    pub tr_ata: f64,
}

/// Signal of the projection settings, scaled so that n^-1 ||F||^2 = 1.
pub fn harmonic_signal(n: usize) -> Vec<f64> {
    let s: f64 = (1..=n).map(|i| 1.0 / (i as f64 * i as f64)).sum();
    let c = (n as f64 / s).sqrt();
    (1..=n).map(|i| c / i as f64).collect()
}

/// Signal of the kernel setting on the grid `x`.
pub fn oscillating_signal(x: &[f64]) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(i, &t)| if i == 0 { 0.5 } else { (25.0 * std::f64::consts::PI * t.powi(3)).sin() })
        .collect()
}

pub fn generate_problem(family: Family, n: usize, sigma2: f64, seed: u64) -> Result<RegressionProblem, RegressError> {
    if n < 2 {
        return Err(RegressError::BadDimension(n));
    }
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(RegressError::BadVariance(sigma2));
    }
    let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let f = match family {
        Family::Easy | Family::Hard => harmonic_signal(n),
        Family::Kernel => oscillating_signal(&x),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = sigma2.sqrt();
    let noise: Vec<f64> = (0..n).map(|_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        sd * z
    }).collect();
    let y = f.iter().zip(&noise).map(|(a, e)| a + e).collect();
    Ok(RegressionProblem { family, n, sigma2, seed, f, noise, y, x })
}

/// Coordinates kept by model `m` in the hard family: the first m when m is
/// odd, the last m when m is even.
fn hard_keeps_prefix(m: usize) -> bool {
    m % 2 == 1
}

/// Statistics and collection for the projection models `m = 1..=n`. Model m
/// has dimension m, pen0 = m/n, pen1 = 2m/n.
pub fn projection_stats(problem: &RegressionProblem) -> Result<(Vec<ModelStats>, Collection), RegressError> {
    if problem.family == Family::Kernel {
        return Err(RegressError::WrongFamily);
    }
    let n = problem.n;
    let nf = n as f64;
    let (f, y) = (&problem.f, &problem.y);
    // Per-coordinate contributions for a coordinate inside / outside the model.
    // Inside: F_hat_i = Y_i, s*_i = F_i. Outside: both are 0.
    let emp_out: Vec<f64> = y.iter().map(|v| v * v).collect();
    let true_in: Vec<f64> = (0..n).map(|i| (y[i] - f[i]).powi(2)).collect();
    let true_out: Vec<f64> = f.iter().map(|v| v * v).collect();
    let p1_in: Vec<f64> = (0..n).map(|i| (y[i] - f[i]).powi(2) - (f[i] - f[i]).powi(2)).collect();
    let p2_in: Vec<f64> = (0..n).map(|i| (f[i] - y[i]).powi(2) - (y[i] - y[i]).powi(2)).collect();
    let delta_in: Vec<f64> = (0..n).map(|i| -(f[i] - y[i]).powi(2)).collect();
    let delta_out: Vec<f64> = (0..n).map(|i| f[i] * f[i] - y[i] * y[i]).collect();

    let prefix = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n + 1];
        for i in 0..n {
            out[i + 1] = out[i] + v[i];
        }
        out
    };
    let pre: Vec<Vec<f64>> =
        [&emp_out, &true_in, &true_out, &p1_in, &p2_in, &delta_in, &delta_out].iter().map(|v| prefix(v)).collect();
    // Sum over coordinates [a, b).
    let range = |k: usize, a: usize, b: usize| pre[k][b] - pre[k][a];

    let mut stats = Vec::with_capacity(n);
    for m in 1..=n {
        let (ins, outs) = if problem.family == Family::Easy || hard_keeps_prefix(m) {
            ((0, m), (m, n))
        } else {
            ((n - m, n), (0, n - m))
        };
        let sum_in = |k| range(k, ins.0, ins.1);
        let sum_out = |k| range(k, outs.0, outs.1);
        let approx = sum_out(2) / nf;
        stats.push(ModelStats {
            id: ModelId(m as u64),
            complexity: m as f64,
            empirical_risk: sum_out(0) / nf,
            true_risk: (sum_in(1) + sum_out(2)) / nf,
            approx_error: approx,
            p1: sum_in(3) / nf,
            p2: sum_in(4) / nf,
            delta: problem.sigma2 + (sum_in(5) + sum_out(6)) / nf,
            tr_a: m as f64,
            tr_ata: m as f64,
        });
    }
    let records = stats
        .iter()
        .map(|s| EstimatorRecord {
            id: s.id,
            empirical_risk: s.empirical_risk,
            pen0: s.complexity / nf,
            pen1: 2.0 * s.complexity / nf,
            complexity: s.complexity,
        })
        .collect();
    let coll = Collection::new(records).expect("projection records are finite and distinct");
    Ok((stats, coll))
}

/// K_ij = exp(-alpha |x_i - x_j|).
pub fn laplace_kernel(x: &[f64], alpha: f64) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| (-alpha * (x[i] - x[j]).abs()).exp())
}

/// Ridge regularisation level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Lambda {
    /// Infinite penalty: the estimator is identically zero.
    Infinite,
    Finite(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeLevel {
    /// Target degrees of freedom.
    pub index: usize,
    pub lambda: Lambda,
    /// Eigenvalues of A, aligned with the kernel eigenvectors.
    pub shrink: Vec<f64>,
    pub tr_a: f64,
    pub tr_ata: f64,
}

/// Ridge estimators `A = K (K + n lambda I)^-1` with integer degrees of
/// freedom, sharing one eigendecomposition of K.
#[derive(Debug, Clone)]
pub struct RidgeGrid {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    pub levels: Vec<RidgeLevel>,
}

impl RidgeGrid {
    pub fn apply(&self, level: usize, v: &[f64]) -> Vec<f64> {
        let u = &self.eigenvectors;
        let mut z = u.transpose() * DVector::from_column_slice(v);
        for (zj, s) in z.iter_mut().zip(&self.levels[level].shrink) {
            *zj *= s;
        }
        (u * z).iter().copied().collect()
    }
}

fn shrink_factors(mu: &[f64], n: usize, lambda: Lambda) -> Vec<f64> {
    match lambda {
        Lambda::Infinite => vec![0.0; mu.len()],
        Lambda::Finite(l) if l == 0.0 => mu.iter().map(|&m| if m > 0.0 { 1.0 } else { 0.0 }).collect(),
        Lambda::Finite(l) => mu.iter().map(|&m| m / (m + n as f64 * l)).collect(),
    }
}

fn ridge_df(mu: &[f64], nl: f64) -> f64 {
    mu.iter().map(|&m| m / (m + nl)).sum()
}

/// One ridge level per integer degrees of freedom `0..=rank`, found by
/// bisection in log(lambda). Levels beyond the rank of K are unattainable and
/// skipped with a warning.
pub fn ridge_grid(k: &DMatrix<f64>) -> Result<RidgeGrid, RegressError> {
    let n = k.nrows();
    let eig = SymmetricEigen::new(k.clone());
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let tol = scale * n as f64 * f64::EPSILON;
    let mu: Vec<f64> = eig.eigenvalues.iter().map(|&m| if m > tol { m } else { 0.0 }).collect();
    let rank = mu.iter().filter(|&&m| m > 0.0).count();
    if rank == 0 {
        return Err(RegressError::SingularGrid);
    }
    if rank < n {
        log::warn!("kernel has rank {rank} < {n}; degrees of freedom above {rank} are unattainable");
    }
    let nf = n as f64;
    let mut levels = Vec::with_capacity(rank + 1);
    for i in 0..=rank {
        let lambda = if i == 0 {
            Lambda::Infinite
        } else if i == rank {
            Lambda::Finite(0.0)
        } else {
            let target = i as f64;
            let (mut lo, mut hi) = (1e-12f64.ln(), 1e6f64.ln());
            let mut mid = 0.5 * (lo + hi);
            for _ in 0..200 {
                mid = 0.5 * (lo + hi);
                let df = ridge_df(&mu, nf * mid.exp());
                if (df - target).abs() <= 1e-12 {
                    break;
                }
                if df > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Lambda::Finite(mid.exp())
        };
        let shrink = shrink_factors(&mu, n, lambda);
        let tr_a = shrink.iter().sum();
        let tr_ata = shrink.iter().map(|s| s * s).sum();
        levels.push(RidgeLevel { index: i, lambda, shrink, tr_a, tr_ata });
    }
    Ok(RidgeGrid { eigenvalues: mu, eigenvectors: eig.eigenvectors, levels })
}

/// Statistics of every ridge level on `problem`, computed in the kernel
/// eigenbasis.
pub fn ridge_stats(problem: &RegressionProblem, grid: &RidgeGrid) -> Vec<ModelStats> {
    let n = problem.n as f64;
    let ut = grid.eigenvectors.transpose();
    let z = &ut * DVector::from_column_slice(&problem.y);
    let w = &ut * DVector::from_column_slice(&problem.f);
    grid.levels
        .iter()
        .map(|lv| {
            let mut acc = [0.0f64; 6];
            for j in 0..z.len() {
                let (s, zj, wj) = (lv.shrink[j], z[j], w[j]);
                let (yh, fh) = (s * zj, s * wj);
                acc[0] += (zj - yh).powi(2);
                acc[1] += (yh - wj).powi(2);
                acc[2] += (fh - wj).powi(2);
                acc[3] += (yh - wj).powi(2) - (fh - wj).powi(2);
                acc[4] += (fh - zj).powi(2) - (yh - zj).powi(2);
                acc[5] += (fh - wj).powi(2) - (fh - zj).powi(2);
            }
            ModelStats {
                id: ModelId(lv.index as u64),
                complexity: lv.tr_a,
                empirical_risk: acc[0] / n,
                true_risk: acc[1] / n,
                approx_error: acc[2] / n,
                p1: acc[3] / n,
                p2: acc[4] / n,
                delta: problem.sigma2 + acc[5] / n,
                tr_a: lv.tr_a,
                tr_ata: lv.tr_ata,
            }
        })
        .collect()
}

/// Which minimal-penalty shape a linear-estimator collection uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearShape {
    /// pen0 = (2 tr A - tr A^T A) / n.
    Corrected,
    /// pen0 = tr A / n, as for projections.
    Naive,
}

/// Collection over ridge levels with pen1 = 2 tr A / n and complexity tr A.
pub fn ridge_collection(stats: &[ModelStats], n: usize, shape: LinearShape) -> Collection {
    let nf = n as f64;
    let records = stats
        .iter()
        .map(|s| EstimatorRecord {
            id: s.id,
            empirical_risk: s.empirical_risk,
            pen0: match shape {
                LinearShape::Corrected => (2.0 * s.tr_a - s.tr_ata) / nf,
                LinearShape::Naive => s.tr_a / nf,
            },
            pen1: 2.0 * s.tr_a / nf,
            complexity: s.tr_a,
        })
        .collect();
    Collection::new(records).expect("ridge records are finite and distinct")
}
