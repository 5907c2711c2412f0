//! Score estimators that exist only at the sampler's grid times, and the
//! exact time-discretized estimation error `ε_score`.
//!
//! Grid indexing: grid index `j ∈ 1..=K` is forward time `j·h + δ`. Sampler
//! step `k ∈ 0..K` calls the estimator at `T − k·h`, i.e. `j = K − k`.
//! Integration step `j` covers forward times `[(j−1)h + δ, jh + δ]` and
//! uses the estimate at its right endpoint.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{forward_marginal_dense, propagate_axes, token_kernel};
use crate::quadrature::GaussLegendre;
use crate::score::{bregman_i_term, score_upper_bound, ScoreField, ScoreTable, ScoreVector};
use crate::state::{DenseDistribution, Distribution, SequenceState, StateSpace};

pub const DEFAULT_NODES: usize = 8;

/// `(h, δ, K)` with the horizon derived as `T = K·h + δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub h: f64,
    pub delta: f64,
    #[serde(rename = "K")]
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(h: f64, delta: f64, steps: usize) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::param("h", format!("step size must be > 0, got {h}")));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::param("delta", format!("must be >= 0, got {delta}")));
        }
        if steps == 0 {
            return Err(Error::param("K", "need at least one step"));
        }
        Ok(Self { h, delta, steps })
    }

    /// Largest `K` with `K·h ≤ span` (up to rounding), then `h` shrunk so
    /// that `K·h` equals `span` exactly.
    pub fn covering(span: f64, h_max: f64, delta: f64) -> Result<Self> {
        if !(span > 0.0) {
            return Err(Error::param("span", format!("T − δ must be > 0, got {span}")));
        }
        let steps = ((span / h_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Self::new(span / steps as f64, delta, steps)
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.h + self.delta
    }

    /// Forward time of grid index `j` (`1 ≤ j ≤ K`).
    pub fn grid_time(&self, j: usize) -> f64 {
        j as f64 * self.h + self.delta
    }

    /// Grid index used by sampler step `k`.
    pub fn index_for_step(&self, k: usize) -> usize {
        self.steps - k
    }

    /// Forward-time interval integrated against grid index `j`.
    pub fn interval(&self, j: usize) -> (f64, f64) {
        (self.grid_time(j - 1), self.grid_time(j))
    }

    /// Recovers the grid index of a forward time, rejecting off-grid times.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let j = ((t - self.delta) / self.h).round();
        let tol = 1e-9 * self.horizon().max(1.0);
        if j >= 1.0 && j <= self.steps as f64 && (self.grid_time(j as usize) - t).abs() <= tol {
            Ok(j as usize)
        } else {
            Err(Error::NotAGridTime(t))
        }
    }

    pub fn grid_times(&self) -> Vec<f64> {
        (1..=self.steps).map(|j| self.grid_time(j)).collect()
    }
}

impl FromStr for TimeGrid {
    type Err = Error;

    /// Parses `h,delta,K`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || Error::config("grid", format!("expected `h,delta,K`, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let h = parts[0].parse().map_err(|_| bad())?;
        let delta = parts[1].parse().map_err(|_| bad())?;
        let steps = parts[2].parse().map_err(|_| bad())?;
        TimeGrid::new(h, delta, steps)
    }
}

/// Which approximation `ŝ` to use.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreEstimatorSpec {
    /// The true score at the grid time.
    Exact,
    /// `e^γ · s` entrywise.
    LogPerturbed { gamma: f64 },
    /// `min(inner, cap)` entrywise.
    Clipped {
        cap: f64,
        inner: Box<ScoreEstimatorSpec>,
    },
    /// Entries read from a CSV file.
    Tabular { path: PathBuf },
}

impl ScoreEstimatorSpec {
    pub fn clipped(cap: f64, inner: ScoreEstimatorSpec) -> Self {
        ScoreEstimatorSpec::Clipped {
            cap,
            inner: Box::new(inner),
        }
    }
}

impl fmt::Display for ScoreEstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreEstimatorSpec::Exact => write!(f, "exact"),
            ScoreEstimatorSpec::LogPerturbed { gamma } => write!(f, "perturb:{gamma}"),
            ScoreEstimatorSpec::Clipped { cap, inner } => match **inner {
                ScoreEstimatorSpec::Exact => write!(f, "clip:{cap}"),
                _ => write!(f, "clip:{cap}:{inner}"),
            },
            ScoreEstimatorSpec::Tabular { path } => write!(f, "file:{}", path.display()),
        }
    }
}

impl FromStr for ScoreEstimatorSpec {
    type Err = Error;

    /// `exact | perturb:γ | clip:cap[:inner] | file:path`
    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::config("estimator", format!("{why} in {s:?}"));
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        match (head, rest) {
            ("exact", None) => Ok(ScoreEstimatorSpec::Exact),
            ("perturb", Some(g)) => {
                let gamma: f64 = g.parse().map_err(|_| bad("bad gamma"))?;
                if !gamma.is_finite() {
                    return Err(bad("gamma must be finite"));
                }
                Ok(ScoreEstimatorSpec::LogPerturbed { gamma })
            }
            ("clip", Some(r)) => {
                let (cap, inner) = match r.split_once(':') {
                    Some((c, i)) => (c, i.parse()?),
                    None => (r, ScoreEstimatorSpec::Exact),
                };
                let cap: f64 = cap.parse().map_err(|_| bad("bad cap"))?;
                if !(cap > 0.0) || !cap.is_finite() {
                    return Err(bad("cap must be positive"));
                }
                Ok(ScoreEstimatorSpec::clipped(cap, inner))
            }
            ("file", Some(p)) if !p.is_empty() => Ok(ScoreEstimatorSpec::Tabular {
                path: PathBuf::from(p),
            }),
            _ => Err(bad("unknown estimator")),
        }
    }
}

/// Estimates read from a CSV with columns `k, state_index, e_0 … e_{d(S−1)−1}`,
/// where `k ∈ 0..K` is the grid time `(k+1)h + δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularScores {
    width: usize,
    rows: BTreeMap<(usize, usize), Vec<f64>>,
}

impl TabularScores {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading estimator table {}", path.display()), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = BTreeMap::new();
        let mut width = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with('k') {
                continue;
            }
            let bad = |why: String| Error::config("estimator", format!("line {}: {why}", lineno + 1));
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() < 3 {
                return Err(bad("need k, state_index and at least one entry".into()));
            }
            let k: usize = fields[0].parse().map_err(|_| bad(format!("bad k {:?}", fields[0])))?;
            let state: usize = fields[1]
                .parse()
                .map_err(|_| bad(format!("bad state index {:?}", fields[1])))?;
            let entries = fields[2..]
                .iter()
                .map(|f| match f.parse::<f64>() {
                    Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
                    _ => Err(bad(format!("bad entry {f:?}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            match width {
                None => width = Some(entries.len()),
                Some(w) if w != entries.len() => {
                    return Err(bad(format!("expected {w} entries, got {}", entries.len())))
                }
                _ => {}
            }
            rows.insert((k, state), entries);
        }
        Ok(Self {
            width: width.unwrap_or(0),
            rows,
        })
    }

    pub fn get(&self, k: usize, state: usize) -> Option<&[f64]> {
        self.rows.get(&(k, state)).map(Vec::as_slice)
    }
}

#[derive(Debug, Clone)]
enum Source {
    Exact,
    LogPerturbed(f64),
    Clipped(f64, Box<Source>),
    Tabular(Arc<TabularScores>),
}

impl Source {
    fn resolve(spec: &ScoreEstimatorSpec, space: StateSpace) -> Result<Self> {
        Ok(match spec {
            ScoreEstimatorSpec::Exact => Source::Exact,
            ScoreEstimatorSpec::LogPerturbed { gamma } => Source::LogPerturbed(*gamma),
            ScoreEstimatorSpec::Clipped { cap, inner } => {
                Source::Clipped(*cap, Box::new(Source::resolve(inner, space)?))
            }
            ScoreEstimatorSpec::Tabular { path } => {
                let table = TabularScores::load(path)?;
                if !table.rows.is_empty() && table.width != space.neighbor_count() {
                    return Err(Error::config(
                        "estimator",
                        format!(
                            "table rows have {} entries but d(S-1) = {}",
                            table.width,
                            space.neighbor_count()
                        ),
                    ));
                }
                Source::Tabular(Arc::new(table))
            }
        })
    }

    fn table(&self, exact: &ScoreTable, j: usize) -> Result<ScoreTable> {
        match self {
            Source::Exact => Ok(exact.clone()),
            Source::LogPerturbed(gamma) => {
                let scale = gamma.exp();
                Ok(exact.clone().map(|v| v * scale))
            }
            Source::Clipped(cap, inner) => Ok(inner.table(exact, j)?.map(|v| v.min(*cap))),
            Source::Tabular(tab) => {
                let space = exact.space();
                let w = space.neighbor_count();
                let mut entries = Vec::with_capacity(space.num_states() * w);
                for state in 0..space.num_states() {
                    let row = tab
                        .get(j - 1, state)
                        .ok_or(Error::MissingEstimate { k: j - 1, state })?;
                    entries.extend_from_slice(row);
                }
                ScoreTable::new(space, entries)
            }
        }
    }

    fn row(&self, exact: &[f64], j: usize, state: usize, out: &mut Vec<f64>) -> Result<()> {
        match self {
            Source::Exact => out.extend_from_slice(exact),
            Source::LogPerturbed(gamma) => {
                let scale = gamma.exp();
                out.extend(exact.iter().map(|v| v * scale));
            }
            Source::Clipped(cap, inner) => {
                inner.row(exact, j, state, out)?;
                out.iter_mut().for_each(|v| *v = v.min(*cap));
            }
            Source::Tabular(tab) => out.extend_from_slice(
                tab.get(j - 1, state)
                    .ok_or(Error::MissingEstimate { k: j - 1, state })?,
            ),
        }
        Ok(())
    }
}

/// A score estimator bound to a data law and a time grid. Tables of true
/// and estimated scores are computed once per grid index on demand.
#[derive(Debug)]
pub struct Estimator {
    spec: ScoreEstimatorSpec,
    source: Source,
    grid: TimeGrid,
    data: DenseDistribution,
    exact: Vec<OnceLock<Arc<ScoreTable>>>,
    estimated: Vec<OnceLock<Arc<ScoreTable>>>,
}

impl Estimator {
    pub fn new(spec: ScoreEstimatorSpec, grid: TimeGrid, data: &Distribution) -> Result<Self> {
        let data = data.to_dense()?;
        let source = Source::resolve(&spec, data.space())?;
        Ok(Self {
            spec,
            source,
            grid,
            data,
            exact: (0..grid.steps).map(|_| OnceLock::new()).collect(),
            estimated: (0..grid.steps).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn spec(&self) -> &ScoreEstimatorSpec {
        &self.spec
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn data(&self) -> &DenseDistribution {
        &self.data
    }

    pub fn space(&self) -> StateSpace {
        self.data.space()
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.grid.steps {
            return Err(Error::NotAGridTime(self.grid.grid_time(j)));
        }
        Ok(())
    }

    /// True scores `s_{jh+δ}` for all states.
    pub fn exact_table(&self, j: usize) -> Result<Arc<ScoreTable>> {
        self.check_index(j)?;
        let cell = &self.exact[j - 1];
        if let Some(t) = cell.get() {
            return Ok(t.clone());
        }
        let table = Arc::new(ScoreField::from_data(&self.data, self.grid.grid_time(j))?.table()?);
        Ok(cell.get_or_init(|| table).clone())
    }

    /// Estimated scores `ŝ_{jh+δ}` for all states.
    pub fn table(&self, j: usize) -> Result<Arc<ScoreTable>> {
        self.check_index(j)?;
        let cell = &self.estimated[j - 1];
        if let Some(t) = cell.get() {
            return Ok(t.clone());
        }
        let exact = self.exact_table(j)?;
        let table = match self.source {
            Source::Exact => exact,
            _ => Arc::new(self.source.table(&exact, j)?),
        };
        if let Some(state) = (0..table.space().num_states())
            .find(|&i| table.row(i).iter().any(|&v| !(v >= 0.0) || !v.is_finite()))
        {
            return Err(Error::InvalidDistribution(format!(
                "estimator produced a non-finite or negative entry at state {state}"
            )));
        }
        Ok(cell.get_or_init(|| table).clone())
    }

    /// Estimator table used by sampler step `k`.
    pub fn table_for_step(&self, k: usize) -> Result<Arc<ScoreTable>> {
        if k >= self.grid.steps {
            return Err(Error::param("k", format!("step {k} outside 0..{}", self.grid.steps)));
        }
        self.table(self.grid.index_for_step(k))
    }

    pub fn evaluate_index(&self, j: usize, state: usize) -> Result<ScoreVector> {
        self.check_index(j)?;
        let space = self.space();
        if state >= space.num_states() {
            return Err(Error::InvalidState(format!("index {state} out of range")));
        }
        if let Some(t) = self.estimated[j - 1].get() {
            return Ok(t.vector(state));
        }
        let exact = self.exact_table(j)?;
        let mut entries = Vec::with_capacity(space.neighbor_count());
        self.source.row(exact.row(state), j, state, &mut entries)?;
        ScoreVector::new(space, state, entries)
    }

    /// `ŝ_t(x)` at a grid time `t`; any other time is rejected.
    pub fn evaluate(&self, grid_time: f64, x: &SequenceState) -> Result<ScoreVector> {
        let j = self.grid.index_of(grid_time)?;
        self.evaluate_index(j, self.space().encode(x)?)
    }

    /// `max_{x, j} ‖ŝ_{jh+δ}(x)‖_∞`.
    pub fn sup_norm(&self) -> Result<f64> {
        (1..=self.grid.steps).try_fold(0.0f64, |m, j| Ok(m.max(self.table(j)?.sup_norm())))
    }

    /// Writes every estimate in tabular CSV form.
    pub fn write_tabular(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        let w = self.space().neighbor_count();
        out.push_str("k,state_index");
        for e in 0..w {
            out.push_str(&format!(",e{e}"));
        }
        out.push('\n');
        for j in 1..=self.grid.steps {
            let table = self.table(j)?;
            for state in 0..self.space().num_states() {
                out.push_str(&format!("{},{}", j - 1, state));
                for v in table.row(state) {
                    out.push_str(&format!(",{v}"));
                }
                out.push('\n');
            }
        }
        let mut f = fs::File::create(path)
            .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        f.write_all(out.as_bytes())
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

/// Exact `ε_score` with its quadrature diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsReport {
    pub value: f64,
    /// Contribution of each integration step, grid index ascending.
    pub per_step: Vec<f64>,
    pub nodes: usize,
    /// The same functional evaluated with `2·nodes` points per step.
    pub value_doubled: f64,
    pub doubling_discrepancy: f64,
}

/// Integrates `E_{q_t} w(x)` over `[a, b]` for a fixed weight vector `w`,
/// with `q_t` obtained by propagating `q_a` forward.
pub(crate) fn integrate_expectation(
    q_start: &DenseDistribution,
    a: f64,
    b: f64,
    rule: &GaussLegendre,
    mut integrand: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<f64> {
    let space = q_start.space();
    let mut acc = 0.0;
    for (t, w) in rule.on_interval(a, b) {
        let kernel = token_kernel(space.alphabet(), t - a)?;
        let mut q = q_start.mass().to_vec();
        propagate_axes(&mut q, space, &kernel);
        acc += w * integrand(&q)?;
    }
    Ok(acc)
}

fn eps_per_step(est: &Estimator, nodes: usize) -> Result<Vec<f64>> {
    let rule = GaussLegendre::new(nodes)?;
    let grid = est.grid();
    let inv_s = 1.0 / est.space().alphabet() as f64;
    (1..=grid.steps)
        .into_par_iter()
        .map(|j| {
            let exact = est.exact_table(j)?;
            let approx = est.table(j)?;
            let n = est.space().num_states();
            let weight: Vec<f64> = (0..n)
                .map(|x| {
                    exact
                        .row(x)
                        .iter()
                        .zip(approx.row(x))
                        .map(|(&a, &b)| bregman_i_term(a, b))
                        .sum()
                })
                .collect();
            let (a, b) = grid.interval(j);
            let q_start = forward_marginal_dense(est.data(), a)?;
            let value = integrate_expectation(&q_start, a, b, &rule, |q| {
                Ok(q.iter()
                    .zip(&weight)
                    .filter(|(&p, _)| p > 0.0)
                    .map(|(&p, &w)| p * w)
                    .sum())
            })?;
            Ok(inv_s * value)
        })
        .collect()
}

/// `ε_score = (1/S)·Σ_j ∫_{(j−1)h+δ}^{jh+δ} E_{q_t} D_I(s_{jh+δ}(x) ‖ ŝ_{jh+δ}(x)) dt`.
pub fn score_error_eps(est: &Estimator, nodes: usize) -> Result<EpsReport> {
    let per_step = eps_per_step(est, nodes)?;
    let value: f64 = per_step.iter().sum();
    let value_doubled: f64 = eps_per_step(est, 2 * nodes)?.iter().sum();
    let doubling_discrepancy = if value.is_finite() && value_doubled.is_finite() {
        (value - value_doubled).abs()
    } else {
        f64::INFINITY
    };
    Ok(EpsReport {
        value,
        per_step,
        nodes,
        value_doubled,
        doubling_discrepancy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClipConstants {
    /// `max_{x, j} ‖ŝ_{jh+δ}(x)‖_∞`.
    pub sup_norm: f64,
    /// `max{1 + S/δ, sup_norm}`; present when `δ > 0`.
    pub c1: Option<f64>,
    /// `max{1 + S/(e^δ − 1), sup_norm}`; present when `δ > 0`.
    pub c1_proof: Option<f64>,
    /// `max{L, sup_norm}`; present when `L` is supplied.
    pub c2: Option<f64>,
}

pub fn clip_constants(est: &Estimator, data_bound: Option<f64>) -> Result<ClipConstants> {
    let sup_norm = est.sup_norm()?;
    let delta = est.grid().delta;
    let s = est.space().alphabet() as f64;
    let (c1, c1_proof) = if delta > 0.0 {
        (
            Some((1.0 + s / delta).max(sup_norm)),
            Some(score_upper_bound(est.space().alphabet(), delta)?.max(sup_norm)),
        )
    } else {
        (None, None)
    };
    Ok(ClipConstants {
        sup_norm,
        c1,
        c1_proof,
        c2: data_bound.map(|l| l.max(sup_norm)),
    })
}
