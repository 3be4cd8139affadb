//! Monte-Carlo harness: replicate the regression settings, run every
//! calibrator, and aggregate estimates, risk ratios, agreement frequencies and
//! the over-penalisation sweep.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collection::{Collection, ModelId};
use crate::jump::{c_max_jump, c_threshold, c_window, window_argmax_set};
use crate::path::compute_path;
use crate::regress::{
    generate_problem, laplace_kernel, projection_stats, ridge_collection, ridge_grid, ridge_stats, substream_seed,
    Family, LinearShape, ModelStats, RegressError, RidgeGrid,
};
use crate::select::select_with_pen1;
use crate::slope::{c_median, c_slope, capushe, consensus};
use crate::varbounds::sigma2_residual;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Regress(#[from] RegressError),
    #[error("invalid configuration: {0}")]
    BadConfig(String),
}

/// Names of the per-replicate methods, in report order.
pub const METHODS: [&str; 10] = [
    "maxjump",
    "threshold",
    "window",
    "slope",
    "capushe",
    "median",
    "consensus",
    "resid",
    "mallows",
    "mallows_overpen",
];

/// Grid of over-penalisation factors `start, start + step, ..., stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepGrid {
    pub fn points(&self) -> Vec<f64> {
        let k = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=k).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub setting: Family,
    pub n: usize,
    pub sigma2: f64,
    pub replicates: usize,
    pub seed: u64,
    /// Complexity threshold for the threshold calibrator.
    pub t_n: f64,
    /// Window half-width for the windowed calibrator.
    pub eta: f64,
    /// Smallest complexity used by the slope regression.
    pub d0: f64,
    /// Platform size fraction for CAPUSHE.
    pub pct: f64,
    /// Dimension of the model used by the residual variance estimator.
    pub d_m0: usize,
    /// Over-penalisation factor of the second Mallows baseline.
    pub overpen: f64,
    /// Laplace kernel bandwidth parameter (kernel setting only).
    pub kernel_alpha: f64,
    pub sweep: Option<SweepGrid>,
    /// Worker threads; 0 lets rayon decide.
    pub jobs: usize,
}

impl SimConfig {
    /// Defaults for a setting: n = 100, sigma2 = 1/4 for the projection
    /// settings; n = 200, sigma2 = 1 for the kernel setting.
    pub fn for_setting(setting: Family) -> Self {
        let (n, sigma2) = match setting {
            Family::Easy | Family::Hard => (100, 0.25),
            Family::Kernel => (200, 1.0),
        };
        let mut c = SimConfig {
            setting,
            n,
            sigma2,
            replicates: 2000,
            seed: 0,
            t_n: 0.0,
            eta: 0.0,
            d0: 0.0,
            pct: 0.15,
            d_m0: 0,
            overpen: 1.12,
            kernel_alpha: 8.0,
            sweep: None,
            jobs: 0,
        };
        c.set_n(n);
        c
    }

    /// Sets n and the n-dependent defaults T = D0 = D_m0 = n/2, eta = n^-1/2.
    pub fn set_n(&mut self, n: usize) {
        self.n = n;
        self.t_n = n as f64 / 2.0;
        self.d0 = n as f64 / 2.0;
        self.d_m0 = n / 2;
        self.eta = (n as f64).sqrt().recip();
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::BadConfig(m.to_string()));
        if self.n < 4 {
            return bad("n must be at least 4");
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return bad("sigma2 must be non-negative");
        }
        if self.replicates == 0 {
            return bad("N must be positive");
        }
        if !(self.eta > 0.0) {
            return bad("eta must be positive");
        }
        if !(self.pct > 0.0 && self.pct < 1.0) {
            return bad("pct must lie in (0, 1)");
        }
        if self.d_m0 >= self.n {
            return bad("D_m0 must be below n");
        }
        if let Some(s) = self.sweep {
            if !(s.step > 0.0 && s.stop >= s.start && s.start >= 0.0) {
                return bad("sweep grid must be increasing from a non-negative start");
            }
        }
        Ok(())
    }
}

/// Calibrated constant (in units of pen1), selected model and risk ratio of
/// one method on one replicate. `None` fields mark a failed calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub c_hat: Option<f64>,
    pub selected: Option<ModelId>,
    pub risk_ratio: Option<f64>,
}

impl MethodResult {
    fn failed() -> Self {
        MethodResult { c_hat: None, selected: None, risk_ratio: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub index: usize,
    /// Aligned with [`METHODS`].
    pub methods: Vec<MethodResult>,
    pub consensus_agreed: Option<bool>,
    pub oracle_risk: f64,
    /// Largest relative gap between the two excess-risk decompositions.
    pub p1p2_max_rel: f64,
    /// Risk ratio at each sweep point.
    pub sweep: Vec<f64>,
}

impl ReplicateOutcome {
    pub fn method(&self, name: &str) -> &MethodResult {
        &self.methods[METHODS.iter().position(|&m| m == name).expect("known method")]
    }

    /// Models of the five calibrators combined by the median and consensus.
    pub fn five_models(&self) -> Option<[ModelId; 5]> {
        let m = |k: &str| self.method(k).selected;
        Some([m("maxjump")?, m("threshold")?, m("window")?, m("slope")?, m("capushe")?])
    }
}

/// Fixed per-configuration data shared by all replicates.
pub struct Context {
    grid: Option<RidgeGrid>,
}

impl Context {
    pub fn new(config: &SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let grid = match config.setting {
            Family::Kernel => {
                let x: Vec<f64> = (0..config.n).map(|i| i as f64 / (config.n - 1) as f64).collect();
                Some(ridge_grid(&laplace_kernel(&x, config.kernel_alpha))?)
            }
            _ => None,
        };
        Ok(Context { grid })
    }
}

/// Estimator statistics and the minimal-penalty collection of one replicate.
pub fn replicate_data(
    config: &SimConfig,
    ctx: &Context,
    index: usize,
) -> Result<(Vec<ModelStats>, Collection), SimError> {
    let seed = substream_seed(config.seed, index as u64);
    let problem = generate_problem(config.setting, config.n, config.sigma2, seed)?;
    Ok(match &ctx.grid {
        None => projection_stats(&problem)?,
        Some(g) => {
            let stats = ridge_stats(&problem, g);
            let coll = ridge_collection(&stats, config.n, LinearShape::Corrected);
            (stats, coll)
        }
    })
}

fn rel_gap(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Runs every method on replicate `index`. Deterministic in (config, index).
pub fn run_replicate(config: &SimConfig, ctx: &Context, index: usize) -> Result<ReplicateOutcome, SimError> {
    let (stats, coll) = replicate_data(config, ctx, index)?;
    let risk: HashMap<ModelId, f64> = stats.iter().map(|s| (s.id, s.true_risk)).collect();
    let oracle = stats.iter().map(|s| s.true_risk).fold(f64::INFINITY, f64::min);
    let ratio = |id: ModelId| {
        let r = risk[&id];
        if r == oracle {
            1.0
        } else {
            r / oracle
        }
    };
    let with_c = |c: Option<f64>| match c {
        Some(c) => {
            let id = select_with_pen1(&coll, c);
            MethodResult { c_hat: Some(c), selected: Some(id), risk_ratio: Some(ratio(id)) }
        }
        None => MethodResult::failed(),
    };

    let path = compute_path(&coll);
    let cx = path.complexities(&coll);
    let cm = c_max_jump(&path, &cx).ok().map(|d| d.c_hat);
    let ct = c_threshold(&path, &cx, config.t_n).ok().map(|d| d.c_hat);
    let cw = c_window(&path, &cx, config.eta).ok().map(|d| d.c_hat);
    let cs = c_slope(&coll, config.d0, config.n).ok().map(|f| f.c_hat);
    let cap = capushe(&coll, config.n, config.pct).ok();

    let mut methods = vec![with_c(cm), with_c(ct), with_c(cw), with_c(cs)];
    methods.push(match &cap {
        Some(r) => MethodResult {
            c_hat: Some(r.c_hat),
            selected: Some(r.selected_id),
            risk_ratio: Some(ratio(r.selected_id)),
        },
        None => MethodResult::failed(),
    });
    let five = match (cm, ct, cw, cs, &cap) {
        (Some(a), Some(b), Some(c), Some(d), Some(e)) => Some([a, b, c, d, e.c_hat]),
        _ => None,
    };
    methods.push(with_c(five.and_then(|v| c_median(&v).ok())));

    let mut consensus_agreed = None;
    let five_ids: Option<Vec<ModelId>> = methods[..5].iter().map(|m| m.selected).collect();
    methods.push(match (five_ids, methods[2].selected) {
        (Some(ids), Some(default)) => {
            let (id, agreed) = consensus(&ids, default).expect("five ids");
            consensus_agreed = Some(agreed);
            MethodResult { c_hat: None, selected: Some(id), risk_ratio: Some(ratio(id)) }
        }
        _ => MethodResult::failed(),
    });

    let resid = residual_variance(config, &stats, &coll);
    methods.push(with_c(resid));
    methods.push(with_c(Some(config.sigma2)));
    methods.push(with_c(Some(config.overpen * config.sigma2)));

    let p1p2_max_rel = stats.iter().map(|s| rel_gap(s.p1, s.p2)).fold(0.0, f64::max);
    let sweep = match config.sweep {
        Some(g) => g.points().iter().map(|&c| ratio(select_with_pen1(&coll, c * config.sigma2))).collect(),
        None => Vec::new(),
    };
    Ok(ReplicateOutcome { index, methods, consensus_agreed, oracle_risk: oracle, p1p2_max_rel, sweep })
}

/// Residual variance estimate from the model whose complexity is closest to
/// `d_m0`; for linear smoothers the normalisation is n (1 - pen0).
fn residual_variance(config: &SimConfig, stats: &[ModelStats], coll: &Collection) -> Option<f64> {
    let target = config.d_m0 as f64;
    let rec = coll
        .records()
        .iter()
        .min_by(|a, b| (a.complexity - target).abs().total_cmp(&(b.complexity - target).abs()))?;
    match config.setting {
        Family::Easy | Family::Hard => {
            let s = stats.iter().find(|s| s.id == rec.id)?;
            let n = config.n;
            sigma2_residual(n as f64 * s.empirical_risk, s.complexity as usize, n).ok().map(|v| v.value)
        }
        Family::Kernel => {
            let dof = 1.0 - rec.pen0;
            (dof > 0.0).then(|| rec.empirical_risk / dof)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub name: String,
    pub ok: usize,
    pub failures: usize,
    /// Mean, standard deviation and mean squared error of c_hat / sigma2
    /// around 1.
    pub c_mean: Option<f64>,
    pub c_sd: Option<f64>,
    pub c_mse: Option<f64>,
    pub risk_ratio_mean: Option<f64>,
    pub risk_ratio_se: Option<f64>,
}

/// Frequencies over replicates where all five calibrators succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementFrequencies {
    pub replicates: usize,
    pub all_equal: f64,
    pub exactly_four: f64,
    pub at_least_three: f64,
    pub all_different: f64,
    /// Max-jump and threshold estimates are the same breakpoint.
    pub maxj_eq_thr: f64,
    /// Max-jump and threshold calibrators select the same model.
    pub maxj_thr_same_model: f64,
    pub max_thr_win_distinct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "C")]
    pub c: f64,
    pub risk_ratio: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub setting: Family,
    pub n: usize,
    pub sigma2: f64,
    pub replicates: usize,
    pub seed: u64,
    pub methods: Vec<MethodSummary>,
    /// Mean risk ratio of the consensus over replicates with a majority.
    pub consensus_agreed_risk_ratio: Option<f64>,
    pub consensus_agreed_fraction: Option<f64>,
    pub agreement: AgreementFrequencies,
    pub p1p2_max_rel: f64,
    pub sweep: Vec<SweepRow>,
    #[serde(skip)]
    pub outcomes: Vec<ReplicateOutcome>,
}

impl MonteCarloReport {
    pub fn method(&self, name: &str) -> &MethodSummary {
        self.methods.iter().find(|m| m.name == name).expect("known method")
    }

    /// Over-penalisation factor minimising the mean risk ratio, and the ratio
    /// of the risk at factor 1 to that minimum.
    pub fn best_overpen(&self) -> Option<(f64, f64)> {
        let best = self.sweep.iter().min_by(|a, b| a.risk_ratio.total_cmp(&b.risk_ratio))?;
        let at_one = self.sweep.iter().min_by(|a, b| (a.c - 1.0).abs().total_cmp(&(b.c - 1.0).abs()))?;
        Some((best.c, at_one.risk_ratio / best.risk_ratio))
    }
}

/// Sample mean and standard deviation (n - 1 denominator).
pub fn mean_sd(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let k = v.len() as f64;
    let m = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (Some(m), None);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (k - 1.0);
    (Some(m), Some(var.sqrt()))
}

fn summarize(name: &str, outcomes: &[ReplicateOutcome], sigma2: f64) -> MethodSummary {
    let rs: Vec<&MethodResult> = outcomes.iter().map(|o| o.method(name)).collect();
    let cs: Vec<f64> = rs.iter().filter_map(|r| r.c_hat).map(|c| c / sigma2).collect();
    let rr: Vec<f64> = rs.iter().filter_map(|r| r.risk_ratio).collect();
    let (c_mean, c_sd) = mean_sd(&cs);
    let c_mse = (!cs.is_empty()).then(|| cs.iter().map(|c| (c - 1.0).powi(2)).sum::<f64>() / cs.len() as f64);
    let (risk_ratio_mean, rr_sd) = mean_sd(&rr);
    MethodSummary {
        name: name.to_string(),
        ok: rr.len(),
        failures: outcomes.len() - rr.len(),
        c_mean,
        c_sd,
        c_mse,
        risk_ratio_mean,
        risk_ratio_se: rr_sd.map(|s| s / (rr.len() as f64).sqrt()),
    }
}

fn agreement(outcomes: &[ReplicateOutcome]) -> AgreementFrequencies {
    let mut counts = [0usize; 7];
    let mut total = 0;
    for o in outcomes {
        let Some(ids) = o.five_models() else { continue };
        total += 1;
        let top = ids.iter().map(|a| ids.iter().filter(|&b| b == a).count()).max().unwrap_or(0);
        let flags = [
            top == 5,
            top == 4,
            top >= 3,
            top == 1,
            o.method("maxjump").c_hat == o.method("threshold").c_hat,
            ids[0] == ids[1],
            ids[0] != ids[1] && ids[0] != ids[2] && ids[1] != ids[2],
        ];
        for (c, f) in counts.iter_mut().zip(flags) {
            *c += f as usize;
        }
    }
    let fr = |k: usize| if total == 0 { f64::NAN } else { counts[k] as f64 / total as f64 };
    AgreementFrequencies {
        replicates: total,
        all_equal: fr(0),
        exactly_four: fr(1),
        at_least_three: fr(2),
        all_different: fr(3),
        maxj_eq_thr: fr(4),
        maxj_thr_same_model: fr(5),
        max_thr_win_distinct: fr(6),
    }
}

/// Aggregates replicate outcomes; the result depends only on their order.
pub fn aggregate(config: &SimConfig, outcomes: Vec<ReplicateOutcome>) -> MonteCarloReport {
    let methods = METHODS.iter().map(|m| summarize(m, &outcomes, config.sigma2)).collect();
    let agreed: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.consensus_agreed == Some(true))
        .filter_map(|o| o.method("consensus").risk_ratio)
        .collect();
    let decided = outcomes.iter().filter(|o| o.consensus_agreed.is_some()).count();
    let sweep = match config.sweep {
        Some(g) => g
            .points()
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let v: Vec<f64> = outcomes.iter().map(|o| o.sweep[k]).collect();
                let (m, sd) = mean_sd(&v);
                SweepRow { c, risk_ratio: m.unwrap_or(f64::NAN), se: sd.map_or(f64::NAN, |s| s / (v.len() as f64).sqrt()) }
            })
            .collect(),
        None => Vec::new(),
    };
    MonteCarloReport {
        setting: config.setting,
        n: config.n,
        sigma2: config.sigma2,
        replicates: outcomes.len(),
        seed: config.seed,
        methods,
        consensus_agreed_risk_ratio: mean_sd(&agreed).0,
        consensus_agreed_fraction: (decided > 0).then(|| agreed.len() as f64 / decided as f64),
        agreement: agreement(&outcomes),
        p1p2_max_rel: outcomes.iter().map(|o| o.p1p2_max_rel).fold(0.0, f64::max),
        sweep,
        outcomes,
    }
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    if jobs == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Runs all replicates (in parallel when `jobs != 1`) and aggregates them in
/// index order, so the report does not depend on the thread count.
pub fn run_monte_carlo(config: &SimConfig) -> Result<MonteCarloReport, SimError> {
    let ctx = Context::new(config)?;
    let outcomes = in_pool(config.jobs, || {
        (0..config.replicates)
            .into_par_iter()
            .map(|i| run_replicate(config, &ctx, i))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(aggregate(config, outcomes))
}

/// Jump behaviour of the two minimal-penalty shapes on the kernel setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelReplicate {
    /// Windowed estimate over sigma2 with pen0 = (2 tr A - tr A^T A) / n.
    pub corrected_window_ratio: Option<f64>,
    /// Largest windowed drop over the complexity range with pen0 = tr A / n.
    pub naive_drop_fraction: f64,
}

pub fn kernel_jump_study(config: &SimConfig) -> Result<Vec<KernelReplicate>, SimError> {
    if config.setting != Family::Kernel {
        return Err(SimError::BadConfig("kernel study needs the kernel setting".into()));
    }
    let ctx = Context::new(config)?;
    let grid = ctx.grid.as_ref().expect("kernel grid");
    in_pool(config.jobs, || {
        (0..config.replicates)
            .into_par_iter()
            .map(|i| {
                let seed = substream_seed(config.seed, i as u64);
                let problem = generate_problem(Family::Kernel, config.n, config.sigma2, seed)?;
                let stats = ridge_stats(&problem, grid);
                let corrected = ridge_collection(&stats, config.n, LinearShape::Corrected);
                let path = compute_path(&corrected);
                let cx = path.complexities(&corrected);
                let corrected_window_ratio = c_window(&path, &cx, config.eta).ok().map(|d| d.c_hat / config.sigma2);

                let naive = ridge_collection(&stats, config.n, LinearShape::Naive);
                let path = compute_path(&naive);
                let cx = path.complexities(&naive);
                let alpha = 1.0 + config.eta;
                let drop = window_argmax_set(&path, &cx, alpha, 1.0 / alpha).map(|s| s.value).unwrap_or(0.0);
                let lo = stats.iter().map(|s| s.complexity).fold(f64::INFINITY, f64::min);
                let hi = stats.iter().map(|s| s.complexity).fold(f64::NEG_INFINITY, f64::max);
                Ok(KernelReplicate { corrected_window_ratio, naive_drop_fraction: drop / (hi - lo) })
            })
            .collect()
    })
}
