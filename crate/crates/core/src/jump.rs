//! Calibrators that read the penalty constant off the complexity jumps of a
//! path: largest single drop, complexity threshold, and windowed drop.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::path::PenalizedPath;

#[derive(Debug, Error, PartialEq)]
pub enum JumpError {
    #[error("path has a single segment")]
    NoJump,
    #[error("no model on the path has complexity <= {0}")]
    ThresholdUnreachable(f64),
    #[error("window parameters must satisfy alpha > beta > 0 (alpha={alpha}, beta={beta})")]
    BadWindow { alpha: f64, beta: f64 },
    #[error("eta must be positive, got {0}")]
    BadEta(f64),
    #[error("the last maximising interval is unbounded")]
    UnboundedInterval,
    #[error("{expected} complexities expected, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpMethod {
    #[serde(rename = "maxjump")]
    MaxJump,
    Threshold,
    Window,
}

/// Result of a jump calibrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpDiagnostics {
    pub method: JumpMethod,
    pub c_hat: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<[f64; 2]>,
    /// Size of the drop that determined `c_hat`.
    pub max_drop: f64,
}

/// A maximising set of the windowed drop, as half-open intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowArgmax {
    pub intervals: Vec<(f64, f64)>,
    pub value: f64,
}

impl WindowArgmax {
    pub fn contains(&self, c: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= c && c < b)
    }
}

fn check_len(path: &PenalizedPath, complexities: &[f64]) -> Result<(), JumpError> {
    if complexities.len() != path.models.len() {
        return Err(JumpError::LengthMismatch { expected: path.models.len(), got: complexities.len() });
    }
    Ok(())
}

/// Breakpoint of the largest complexity drop; the last one wins on ties.
pub fn c_max_jump(path: &PenalizedPath, complexities: &[f64]) -> Result<JumpDiagnostics, JumpError> {
    check_len(path, complexities)?;
    if path.i_max() == 0 {
        return Err(JumpError::NoJump);
    }
    let mut best = 1;
    let mut best_drop = f64::NEG_INFINITY;
    for i in 1..complexities.len() {
        let d = complexities[i - 1] - complexities[i];
        if d >= best_drop {
            best_drop = d;
            best = i;
        }
    }
    Ok(JumpDiagnostics {
        method: JumpMethod::MaxJump,
        c_hat: path.start(best),
        interval: None,
        max_drop: best_drop,
    })
}

/// Smallest C at which the selected complexity is at most `t`.
pub fn c_threshold(path: &PenalizedPath, complexities: &[f64], t: f64) -> Result<JumpDiagnostics, JumpError> {
    check_len(path, complexities)?;
    let i = complexities.iter().position(|&d| d <= t).ok_or(JumpError::ThresholdUnreachable(t))?;
    if i == 0 {
        log::warn!("threshold {t} is met by the lowest-risk model; the estimate is 0");
    }
    Ok(JumpDiagnostics {
        method: JumpMethod::Threshold,
        c_hat: path.start(i),
        interval: None,
        max_drop: if i == 0 { 0.0 } else { complexities[0] - complexities[i] },
    })
}

/// Exact maximising set of `C -> D(m_hat(beta C)) - D(m_hat(alpha C))`.
pub fn window_argmax_set(
    path: &PenalizedPath,
    complexities: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<WindowArgmax, JumpError> {
    check_len(path, complexities)?;
    if !(alpha > beta && beta > 0.0 && alpha.is_finite()) {
        return Err(JumpError::BadWindow { alpha, beta });
    }
    let imax = path.i_max();
    if imax == 0 {
        return Ok(WindowArgmax { intervals: vec![(0.0, f64::INFINITY)], value: 0.0 });
    }
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(2 * imax);
    for i in 1..=imax {
        events.push((path.start(i) / beta, complexities[i] - complexities[i - 1]));
    }
    for i in 1..=imax {
        events.push((path.start(i) / alpha, complexities[i - 1] - complexities[i]));
    }
    // Stable sort keeps the beta events ahead of alpha events at equal keys.
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    let k = events.len();
    let mut w = 0.0;
    let mut values = Vec::with_capacity(k);
    for j in 0..k {
        w += events[j].1;
        let next = if j + 1 < k { events[j + 1].0 } else { f64::INFINITY };
        values.push(if events[j].0 < next { w } else { f64::NEG_INFINITY });
    }
    // Before the first event both sides select m_0 and the drop is zero.
    let max = values.iter().copied().fold(0.0f64, f64::max);
    let mut intervals = Vec::new();
    if max == 0.0 && events[0].0 > 0.0 {
        intervals.push((0.0, events[0].0));
    }
    for j in 0..k {
        if values[j] == max {
            let next = if j + 1 < k { events[j + 1].0 } else { f64::INFINITY };
            intervals.push((events[j].0, next));
        }
    }
    Ok(WindowArgmax { intervals, value: max })
}

/// Geometric centre of the last maximising interval of the windowed drop
/// with `alpha = 1 + eta`, `beta = 1 / (1 + eta)`.
pub fn c_window(path: &PenalizedPath, complexities: &[f64], eta: f64) -> Result<JumpDiagnostics, JumpError> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(JumpError::BadEta(eta));
    }
    check_len(path, complexities)?;
    if path.i_max() == 0 {
        return Err(JumpError::NoJump);
    }
    let set = window_argmax_set(path, complexities, 1.0 + eta, 1.0 / (1.0 + eta))?;
    if set.value <= 0.0 {
        return Err(JumpError::NoJump);
    }
    let &(lo, hi) = set.intervals.last().expect("non-empty argmax set");
    if hi.is_infinite() {
        return Err(JumpError::UnboundedInterval);
    }
    Ok(JumpDiagnostics {
        method: JumpMethod::Window,
        c_hat: (lo * hi).sqrt(),
        interval: Some([lo, hi]),
        max_drop: set.value,
    })
}
