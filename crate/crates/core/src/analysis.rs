//! Exact divergences, the path-measure KL between the true and the
//! approximate reverse process, the KL decomposition check, the
//! convergence-bound evaluators and the schedule calculators.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{integrate_expectation, Estimator, TimeGrid};
use crate::forward::forward_marginal_dense;
use crate::quadrature::GaussLegendre;
use crate::reverse::exact_sampler_law;
use crate::state::DenseDistribution;

fn same_space(p: &DenseDistribution, q: &DenseDistribution) -> Result<()> {
    if p.space() != q.space() {
        return Err(Error::SizeMismatch(format!(
            "distributions live on different spaces ({}^{} vs {}^{})",
            p.space().alphabet(),
            p.space().dims(),
            q.space().alphabet(),
            q.space().dims()
        )));
    }
    Ok(())
}

/// `KL(p ‖ q)`; `+∞` when `p` charges a state `q` does not.
pub fn kl(p: &DenseDistribution, q: &DenseDistribution) -> Result<f64> {
    same_space(p, q)?;
    let mut acc = 0.0;
    for (&a, &b) in p.mass().iter().zip(q.mass()) {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += a * (a / b).ln();
    }
    Ok(acc.max(0.0))
}

/// Total variation `(1/2)·Σ|p − q|`.
pub fn tv(p: &DenseDistribution, q: &DenseDistribution) -> Result<f64> {
    same_space(p, q)?;
    Ok(0.5 * p.mass().iter().zip(q.mass()).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `1 − e^{−dδ(S−1)/S}`, the chance that some coordinate is resampled by
/// time `δ`, which bounds `tv(p_data, q_δ)`.
pub fn early_stop_tv_bound(alphabet: usize, dims: usize, delta: f64) -> f64 {
    let s = alphabet as f64;
    -(-(dims as f64) * delta * (s - 1.0) / s).exp_m1()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathKlReport {
    /// Contribution of each integration step, grid index ascending.
    pub per_step: Vec<f64>,
    pub value: f64,
    pub nodes: usize,
    pub value_doubled: f64,
    pub doubling_discrepancy: f64,
}

fn path_kl_per_step(est: &Estimator, nodes: usize) -> Result<Vec<f64>> {
    let rule = GaussLegendre::new(nodes)?;
    let grid = est.grid();
    let space = est.space();
    let inv_s = 1.0 / space.alphabet() as f64;
    (1..=grid.steps)
        .into_par_iter()
        .map(|j| {
            let approx = est.table(j)?;
            let (a, b) = grid.interval(j);
            let q_start = forward_marginal_dense(est.data(), a)?;
            let value = integrate_expectation(&q_start, a, b, &rule, |q| {
                // Σ_x q(x)·D_I(s_t(x) ‖ ŝ(x)) with s_t(x)_e = q(nb)/q(x),
                // written so that q(x) multiplies through.
                let mut acc = 0.0;
                let mut infinite = false;
                for (x, &qx) in q.iter().enumerate() {
                    if qx == 0.0 {
                        continue;
                    }
                    let row = approx.row(x);
                    space.for_each_neighbor(x, |slot, _, _, nb| {
                        let qn = q[nb];
                        let est_flow = qx * row[slot];
                        if qn > 0.0 {
                            if est_flow == 0.0 {
                                infinite = true;
                            } else {
                                acc += est_flow - qn + qn * (qn / est_flow).ln();
                            }
                        } else {
                            acc += est_flow;
                        }
                    });
                }
                Ok(if infinite { f64::INFINITY } else { acc })
            })?;
            Ok(inv_s * value)
        })
        .collect()
}

/// Path-measure KL between the true reverse process and the sampler,
/// both started from `q_T`:
/// `(1/S)·Σ_j ∫_{(j−1)h+δ}^{jh+δ} E_{q_t} D_I(s_t(x) ‖ ŝ_{jh+δ}(x)) dt`.
pub fn path_kl(est: &Estimator, nodes: usize) -> Result<PathKlReport> {
    if est.grid().delta == 0.0 {
        if let Some(state) = est.data().mass().iter().position(|&m| m == 0.0) {
            return Err(Error::EarlyStopRequired { state });
        }
    }
    let per_step = path_kl_per_step(est, nodes)?;
    let value = per_step.iter().sum::<f64>();
    let value_doubled = path_kl_per_step(est, 2 * nodes)?.iter().sum::<f64>();
    let doubling_discrepancy = if value.is_finite() && value_doubled.is_finite() {
        (value - value_doubled).abs()
    } else {
        f64::INFINITY
    };
    Ok(PathKlReport {
        per_step,
        value,
        nodes,
        value_doubled,
        doubling_discrepancy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    /// `KL(q_δ ‖ p_{T−δ})`, the sampler's output error.
    pub lhs: f64,
    /// `KL(q_T ‖ π^d)`, the initialization error.
    pub prior: f64,
    /// Path KL of the reverse processes.
    pub path: f64,
    pub rhs: f64,
    /// Allowance for quadrature error in the path term.
    pub tolerance: f64,
    pub holds: bool,
}

/// Checks `KL(q_δ ‖ p_{T−δ}) ≤ KL(q_T ‖ π^d) + path KL`.
pub fn decomposition_check(est: &Estimator, nodes: usize) -> Result<DecompositionReport> {
    let grid = est.grid();
    let q_delta = forward_marginal_dense(est.data(), grid.delta)?;
    let q_horizon = forward_marginal_dense(est.data(), grid.horizon())?;
    let output = exact_sampler_law(est)?;
    let lhs = kl(&q_delta, &output)?;
    let prior = kl(&q_horizon, &DenseDistribution::uniform(est.space()))?;
    let path = path_kl(est, nodes)?;
    let rhs = prior + path.value;
    let tolerance = 1e-12 + path.doubling_discrepancy;
    Ok(DecompositionReport {
        lhs,
        prior,
        path: path.value,
        rhs,
        tolerance,
        holds: lhs <= rhs + tolerance,
    })
}

/// Term breakdown of a convergence bound. Every term is already scaled by
/// `constant_factor`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    /// `d·e^{−T}·log S`
    pub term_init: f64,
    pub term_disc: f64,
    /// `C²·ε_score`
    pub term_score: f64,
    pub total: f64,
    pub constant_factor: f64,
    /// `C_1` or `C_2`, whichever the bound uses.
    pub c: f64,
    pub kappa_sq: Option<f64>,
    /// `1 − e^{−dδ(S−1)/S}`, present for the early-stopped bound.
    pub tv_early_stop: Option<f64>,
    /// `√total + tv_early_stop`, present for the early-stopped bound.
    pub tv_total: Option<f64>,
    /// True when `δ³·S² > 1`, where the step from the exact discretization
    /// terms to the `δ^{−3}` form is loose.
    pub delta_regime_strained: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub dims: usize,
    pub alphabet: usize,
    pub horizon: f64,
    pub h: f64,
    pub eps_score: f64,
    pub constant_factor: f64,
}

impl BoundInputs {
    fn validate(&self) -> Result<()> {
        if self.dims == 0 {
            return Err(Error::param("d", "must be >= 1"));
        }
        if self.alphabet < 2 {
            return Err(Error::param("S", "must be >= 2"));
        }
        let fields: [(&'static str, f64); 3] =
            [("T", self.horizon), ("h", self.h), ("eps_score", self.eps_score)];
        for (name, v) in fields {
            if !(v >= 0.0) {
                return Err(Error::param(name, format!("must be >= 0, got {v}")));
            }
        }
        if !(self.constant_factor > 0.0) || !self.constant_factor.is_finite() {
            return Err(Error::param("constant_factor", "must be positive and finite"));
        }
        Ok(())
    }

    fn term_init(&self) -> f64 {
        self.dims as f64 * (-self.horizon).exp() * (self.alphabet as f64).ln()
    }
}

/// Early-stopped bound: `d·e^{−T}·log S + δ^{−3}C_1S²h³d + C_1S²h²dT + C_1²ε`.
pub fn early_stopped_bound(inputs: &BoundInputs, delta: f64, c1: f64) -> Result<BoundReport> {
    inputs.validate()?;
    if !(delta > 0.0) {
        return Err(Error::param("delta", "the early-stopped bound needs delta > 0"));
    }
    if !(c1 > 0.0) {
        return Err(Error::param("C_1", "must be positive"));
    }
    let f = inputs.constant_factor;
    let s2 = (inputs.alphabet as f64).powi(2);
    let d = inputs.dims as f64;
    let h = inputs.h;
    let term_init = f * inputs.term_init();
    let term_disc = f * (c1 * s2 * h.powi(3) * d / delta.powi(3) + c1 * s2 * h * h * d * inputs.horizon);
    let term_score = f * c1 * c1 * inputs.eps_score;
    let total = term_init + term_disc + term_score;
    let tv_early_stop = early_stop_tv_bound(inputs.alphabet, inputs.dims, delta);
    Ok(BoundReport {
        term_init,
        term_disc,
        term_score,
        total,
        constant_factor: f,
        c: c1,
        kappa_sq: None,
        tv_early_stop: Some(tv_early_stop),
        tv_total: Some(total.sqrt() + tv_early_stop),
        delta_regime_strained: Some(delta.powi(3) * s2 > 1.0),
    })
}

/// Bound without early stopping: `d·e^{−T}·log S + C_2κ²S²h²T + C_2²ε`.
pub fn full_support_bound(inputs: &BoundInputs, kappa_sq: f64, c2: f64) -> Result<BoundReport> {
    inputs.validate()?;
    if !(kappa_sq > 0.0) {
        return Err(Error::param("kappa_sq", "must be positive"));
    }
    if !(c2 > 0.0) {
        return Err(Error::param("C_2", "must be positive"));
    }
    let f = inputs.constant_factor;
    let s2 = (inputs.alphabet as f64).powi(2);
    let term_init = f * inputs.term_init();
    let term_disc = f * c2 * kappa_sq * s2 * inputs.h * inputs.h * inputs.horizon;
    let term_score = f * c2 * c2 * inputs.eps_score;
    Ok(BoundReport {
        term_init,
        term_disc,
        term_score,
        total: term_init + term_disc + term_score,
        constant_factor: f,
        c: c2,
        kappa_sq: Some(kappa_sq),
        tv_early_stop: None,
        tv_total: None,
        delta_regime_strained: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Early stopping at `δ > 0`; `h` from the `δ^{−3}h³` and `h²` terms.
    EarlyStopped,
    /// No early stopping; `h` from the `κ²h²` term.
    FullSupport,
}

impl std::str::FromStr for ScheduleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "early-stopped" | "early_stopped" => Ok(ScheduleMode::EarlyStopped),
            "full-support" | "full_support" => Ok(ScheduleMode::FullSupport),
            _ => Err(Error::config("regime", format!("expected early-stopped or full-support, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    pub mode: ScheduleMode,
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Step size before rounding `K` up.
    pub h_target: f64,
    pub grid: TimeGrid,
}

/// Horizon and step size that make each bound term at most of order `ε`.
/// With `kappa_sq` the full-support rule is used, otherwise the
/// early-stopped rule (which needs `δ > 0`).
pub fn step_schedule(
    epsilon: f64,
    dims: usize,
    alphabet: usize,
    delta: f64,
    c: f64,
    kappa_sq: Option<f64>,
) -> Result<Schedule> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::param("epsilon", format!("must be > 0, got {epsilon}")));
    }
    if dims == 0 || alphabet < 2 {
        return Err(Error::param("space", "need d >= 1 and S >= 2"));
    }
    if !(c > 0.0) {
        return Err(Error::param("C", "must be positive"));
    }
    if !(delta >= 0.0) {
        return Err(Error::param("delta", "must be >= 0"));
    }
    let s2 = (alphabet as f64).powi(2);
    let horizon = (dims as f64 * (alphabet as f64).ln() / epsilon).ln();
    let (mode, h_target) = match kappa_sq {
        Some(k2) => {
            if !(k2 > 0.0) {
                return Err(Error::param("kappa_sq", "must be positive"));
            }
            (ScheduleMode::FullSupport, (epsilon / (c * s2 * k2)).sqrt())
        }
        None => {
            if !(delta > 0.0) {
                return Err(Error::param("delta", "the early-stopped schedule needs delta > 0"));
            }
            let r = epsilon / (c * s2 * dims as f64);
            (ScheduleMode::EarlyStopped, (delta * r.cbrt()).min(r.sqrt()))
        }
    };
    if !(horizon > delta) {
        return Err(Error::param(
            "epsilon",
            format!("horizon T = {horizon} does not exceed delta = {delta}; epsilon is too large"),
        ));
    }
    let grid = TimeGrid::covering(horizon - delta, h_target, delta)?;
    Ok(Schedule {
        mode,
        horizon: grid.horizon(),
        h_target,
        grid,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderPoint {
    pub h: f64,
    #[serde(rename = "K")]
    pub steps: usize,
    pub path_kl: f64,
    pub path_kl_doubled: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderReport {
    pub points: Vec<OrderPoint>,
    /// Least-squares slope of `log path_kl` against `log h`; `None` when
    /// some path KL vanishes and the order is undefined.
    pub slope: Option<f64>,
    /// The same fit with doubled quadrature nodes.
    pub slope_doubled: Option<f64>,
}

/// Values this small are treated as an identically vanishing path KL.
const ORDER_FLOOR: f64 = 1e-20;

fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || ys.iter().any(|&y| !(y > ORDER_FLOOR) || !y.is_finite()) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Measures the order in `h` of the path KL over a family of grids sharing
/// `T − δ`. `make` builds the estimator for each grid.
pub fn order_check(
    steps: &[f64],
    span: f64,
    delta: f64,
    nodes: usize,
    make: impl Fn(TimeGrid) -> Result<Estimator> + Sync,
) -> Result<OrderReport> {
    let points = steps
        .par_iter()
        .map(|&h| {
            let grid = TimeGrid::covering(span, h, delta)?;
            let est = make(grid)?;
            let report = path_kl(&est, nodes)?;
            Ok(OrderPoint {
                h: grid.h,
                steps: grid.steps,
                path_kl: report.value,
                path_kl_doubled: report.value_doubled,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let hs: Vec<f64> = points.iter().map(|p| p.h).collect();
    let v: Vec<f64> = points.iter().map(|p| p.path_kl).collect();
    let v2: Vec<f64> = points.iter().map(|p| p.path_kl_doubled).collect();
    Ok(OrderReport {
        slope: fit_slope(&hs, &v),
        slope_doubled: fit_slope(&hs, &v2),
        points,
    })
}
