//! Final model selection: calibrate C with one of the calibrators, then pick
//! argmin { empirical_risk + C * pen1 }. Also the classical criteria (Mallows,
//! FPE, GCV) used as baselines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collection::{argmin_position, Collection, ModelId};
use crate::jump::{c_max_jump, c_threshold, c_window, JumpDiagnostics, JumpError};
use crate::path::compute_path;
use crate::slope::{c_median, c_slope, capushe, consensus, CapusheResult, SlopeError, SlopeFit};

#[derive(Debug, Error, PartialEq)]
pub enum SelectError {
    #[error(transparent)]
    Jump(#[from] JumpError),
    #[error(transparent)]
    Slope(#[from] SlopeError),
    #[error("noise variance must be non-negative, got {0}")]
    NegativeSigma2(f64),
    #[error("dimension {d} must be below n = {n}")]
    FullDimension { d: f64, n: usize },
}

/// Parameters shared by the five calibrators combined in `Median` and
/// `Consensus`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveParams {
    pub t: f64,
    pub eta: f64,
    pub d0: f64,
    pub n: usize,
    pub pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Method {
    #[serde(rename = "maxjump")]
    MaxJump,
    Threshold { t: f64 },
    Window { eta: f64 },
    Slope { d0: f64, n: usize },
    Capushe { n: usize, pct: f64 },
    Median(FiveParams),
    Consensus(FiveParams),
    Mallows { sigma2: f64, overpen: f64 },
    Fpe { n: usize },
    Gcv { n: usize },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::MaxJump => "maxjump",
            Method::Threshold { .. } => "threshold",
            Method::Window { .. } => "window",
            Method::Slope { .. } => "slope",
            Method::Capushe { .. } => "capushe",
            Method::Median(_) => "median",
            Method::Consensus(_) => "consensus",
            Method::Mallows { .. } => "mallows",
            Method::Fpe { .. } => "fpe",
            Method::Gcv { .. } => "gcv",
        }
    }
}

/// Calibrator output attached to a selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Diagnostics {
    Jump(JumpDiagnostics),
    Slope(SlopeFit),
    Capushe(CapusheResult),
    Five { c_hats: [f64; 5], models: [ModelId; 5], agreed: Option<bool> },
    None {},
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub method: String,
    pub selected_id: ModelId,
    /// Calibrated constant multiplying pen1; absent for consensus, FPE, GCV.
    pub c_hat: Option<f64>,
    pub diagnostics: Diagnostics,
}

/// argmin { empirical_risk + c * pen1 }, ties to the earliest record.
pub fn select_with_pen1(collection: &Collection, c: f64) -> ModelId {
    collection.records()[argmin_position(collection.records(), c, |r| r.pen1)].id
}

fn outcome(method: &Method, collection: &Collection, c_hat: f64, diagnostics: Diagnostics) -> SelectionOutcome {
    SelectionOutcome {
        method: method.name().to_string(),
        selected_id: select_with_pen1(collection, c_hat),
        c_hat: Some(c_hat),
        diagnostics,
    }
}

struct FiveWay {
    c_hats: [f64; 5],
    models: [ModelId; 5],
    window_c: f64,
}

fn five_way(collection: &Collection, p: &FiveParams) -> Result<FiveWay, SelectError> {
    let path = compute_path(collection);
    let cx = path.complexities(collection);
    let cm = c_max_jump(&path, &cx)?.c_hat;
    let ct = c_threshold(&path, &cx, p.t)?.c_hat;
    let cw = c_window(&path, &cx, p.eta)?.c_hat;
    let cs = c_slope(collection, p.d0, p.n)?.c_hat;
    let cap = capushe(collection, p.n, p.pct)?;
    let c_hats = [cm, ct, cw, cs, cap.c_hat];
    let models = [
        select_with_pen1(collection, cm),
        select_with_pen1(collection, ct),
        select_with_pen1(collection, cw),
        select_with_pen1(collection, cs),
        cap.selected_id,
    ];
    Ok(FiveWay { c_hats, models, window_c: cw })
}

/// Runs one selection method end to end.
pub fn minimal_penalty_select(collection: &Collection, method: &Method) -> Result<SelectionOutcome, SelectError> {
    let jump_outcome = |d: JumpDiagnostics| outcome(method, collection, d.c_hat, Diagnostics::Jump(d));
    match *method {
        Method::MaxJump | Method::Threshold { .. } | Method::Window { .. } => {
            let path = compute_path(collection);
            let cx = path.complexities(collection);
            let d = match *method {
                Method::MaxJump => c_max_jump(&path, &cx)?,
                Method::Threshold { t } => c_threshold(&path, &cx, t)?,
                Method::Window { eta } => c_window(&path, &cx, eta)?,
                _ => unreachable!(),
            };
            Ok(jump_outcome(d))
        }
        Method::Slope { d0, n } => {
            let fit = c_slope(collection, d0, n)?;
            Ok(outcome(method, collection, fit.c_hat, Diagnostics::Slope(fit)))
        }
        Method::Capushe { n, pct } => {
            let r = capushe(collection, n, pct)?;
            Ok(SelectionOutcome {
                method: method.name().to_string(),
                selected_id: r.selected_id,
                c_hat: Some(r.c_hat),
                diagnostics: Diagnostics::Capushe(r),
            })
        }
        Method::Median(p) => {
            let f = five_way(collection, &p)?;
            let c = c_median(&f.c_hats)?;
            Ok(outcome(method, collection, c, Diagnostics::Five { c_hats: f.c_hats, models: f.models, agreed: None }))
        }
        Method::Consensus(p) => {
            let f = five_way(collection, &p)?;
            let (id, agreed) = consensus(&f.models, select_with_pen1(collection, f.window_c))?;
            Ok(SelectionOutcome {
                method: method.name().to_string(),
                selected_id: id,
                c_hat: None,
                diagnostics: Diagnostics::Five { c_hats: f.c_hats, models: f.models, agreed: Some(agreed) },
            })
        }
        Method::Mallows { sigma2, overpen } => mallows_select(collection, sigma2, overpen),
        Method::Fpe { n } => Ok(criterion_select(collection, method, |r| fpe_value(r.empirical_risk, r.complexity, n))),
        Method::Gcv { n } => Ok(criterion_select(collection, method, |r| gcv_value(r.empirical_risk, r.complexity, n))),
    }
}

/// argmin { empirical_risk + overpen * sigma2 * pen1 } with a known variance.
pub fn mallows_select(collection: &Collection, sigma2: f64, overpen: f64) -> Result<SelectionOutcome, SelectError> {
    if !(sigma2 >= 0.0) {
        return Err(SelectError::NegativeSigma2(sigma2));
    }
    let c = overpen * sigma2;
    Ok(SelectionOutcome {
        method: "mallows".to_string(),
        selected_id: select_with_pen1(collection, c),
        c_hat: Some(c),
        diagnostics: Diagnostics::None {},
    })
}

fn fpe_value(risk: f64, d: f64, n: usize) -> f64 {
    if d >= n as f64 {
        f64::INFINITY
    } else {
        risk * (1.0 + 2.0 * d / (n as f64 - d))
    }
}

fn gcv_value(risk: f64, df: f64, n: usize) -> f64 {
    if df >= n as f64 {
        f64::INFINITY
    } else {
        risk * (n as f64 / (n as f64 - df)).powi(2)
    }
}

/// Final prediction error: `risk * (1 + 2D / (n - D))`.
pub fn fpe_criterion(risk: f64, d: f64, n: usize) -> Result<f64, SelectError> {
    if d >= n as f64 {
        return Err(SelectError::FullDimension { d, n });
    }
    Ok(fpe_value(risk, d, n))
}

/// Generalised cross-validation: `risk * (n / (n - df))^2`.
pub fn gcv_criterion(risk: f64, df: f64, n: usize) -> Result<f64, SelectError> {
    if df >= n as f64 {
        return Err(SelectError::FullDimension { d: df, n });
    }
    Ok(gcv_value(risk, df, n))
}

fn criterion_select<F>(collection: &Collection, method: &Method, crit: F) -> SelectionOutcome
where
    F: Fn(&crate::collection::EstimatorRecord) -> f64,
{
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (i, r) in collection.records().iter().enumerate() {
        let v = crit(r);
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    SelectionOutcome {
        method: method.name().to_string(),
        selected_id: collection.records()[best].id,
        c_hat: None,
        diagnostics: Diagnostics::None {},
    }
}
