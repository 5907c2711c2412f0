//! The discretized reverse process: frozen per-step reverse rates, exact
//! propagation of the sampler's law, and the Monte Carlo uniformization
//! sampler.
//!
//! Sampler step `k ∈ 0..K` runs for time `h` with the generator frozen at
//! the estimate for forward time `T − k·h`. Its off-diagonal rates are
//! `ŝ(x)_{i,x̂}/S` on Hamming-1 pairs.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution as _, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::rng::stream_rng;
use crate::score::ScoreTable;
use crate::state::{DenseDistribution, StateSpace};

/// Poisson tail mass at which the uniformization series is cut.
pub const SERIES_TAIL_TOL: f64 = 1e-12;

/// Largest `λ·τ` handled by one series; longer spans are split into
/// equal sub-steps so that `e^{−λτ}` never underflows.
const MAX_SERIES_MEAN: f64 = 32.0;

/// Rounding allowance for a negative stay probability before it counts as
/// a uniformization violation.
const RESIDUAL_TOL: f64 = 1e-12;

/// The frozen reverse generator of one sampler step.
#[derive(Debug, Clone)]
pub struct ReverseRateView {
    step: usize,
    table: Arc<ScoreTable>,
}

impl ReverseRateView {
    pub fn new(est: &Estimator, step: usize) -> Result<Self> {
        Ok(Self {
            step,
            table: est.table_for_step(step)?,
        })
    }

    pub fn from_table(step: usize, table: Arc<ScoreTable>) -> Self {
        Self { step, table }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn space(&self) -> StateSpace {
        self.table.space()
    }

    pub fn scores(&self) -> &ScoreTable {
        &self.table
    }

    fn inv_s(&self) -> f64 {
        1.0 / self.space().alphabet() as f64
    }

    /// Total exit rate `ŝ(x)_x / S` of state `x`.
    pub fn exit_rate(&self, x: usize) -> f64 {
        self.table.row(x).iter().sum::<f64>() * self.inv_s()
    }

    pub fn max_exit_rate(&self) -> f64 {
        (0..self.space().num_states())
            .map(|x| self.exit_rate(x))
            .fold(0.0, f64::max)
    }

    /// Generator entry `Q̂(x, y)`.
    pub fn rate(&self, x: usize, y: usize) -> Result<f64> {
        let space = self.space();
        for idx in [x, y] {
            if idx >= space.num_states() {
                return Err(Error::InvalidState(format!("index {idx} out of range")));
            }
        }
        if x == y {
            return Ok(-self.exit_rate(x));
        }
        if space.hamming(x, y) != 1 {
            return Ok(0.0);
        }
        let dim = (0..space.dims())
            .find(|&i| space.token_at(x, i) != space.token_at(y, i))
            .expect("Hamming-1 pair differs somewhere");
        let slot = space.neighbor_slot(dim, space.token_at(x, dim), space.token_at(y, dim));
        Ok(self.table.row(x)[slot] * self.inv_s())
    }

    /// `out = Q̂ᵀ p`.
    pub fn apply_transpose(&self, p: &[f64], out: &mut [f64]) {
        let space = self.space();
        let inv_s = self.inv_s();
        out.iter_mut().for_each(|v| *v = 0.0);
        for (x, &px) in p.iter().enumerate() {
            if px == 0.0 {
                continue;
            }
            let row = self.table.row(x);
            let mut exit = 0.0;
            space.for_each_neighbor(x, |slot, _, _, nb| {
                let flow = px * row[slot] * inv_s;
                out[nb] += flow;
                exit += flow;
            });
            out[x] -= exit;
        }
    }
}

/// Diagnostics of one frozen-generator propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesStats {
    /// Uniformization rate `λ` used by the series.
    pub lambda: f64,
    pub substeps: usize,
    /// Series terms summed per sub-step.
    pub terms: usize,
    /// Largest Poisson tail mass left out by any sub-step.
    pub tail: f64,
}

/// `exp(τ·Q̂ᵀ) p` by the uniformization series, cut once the Poisson tail
/// mass falls below `tail_tol`. `extra_terms` appends more terms past that
/// point, which lets callers measure the truncation effect.
pub fn propagate_frozen(
    view: &ReverseRateView,
    p: &[f64],
    duration: f64,
    tail_tol: f64,
    extra_terms: usize,
) -> Result<(Vec<f64>, SeriesStats)> {
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::InvalidTime(duration));
    }
    let n = view.space().num_states();
    if p.len() != n {
        return Err(Error::SizeMismatch(format!("law has {} entries, space has {n}", p.len())));
    }
    let lambda = view.max_exit_rate();
    let mut stats = SeriesStats {
        lambda,
        substeps: 0,
        terms: 0,
        tail: 0.0,
    };
    if lambda == 0.0 || duration == 0.0 {
        return Ok((p.to_vec(), stats));
    }
    let substeps = (lambda * duration / MAX_SERIES_MEAN).ceil().max(1.0) as usize;
    let mean = lambda * duration / substeps as f64;
    stats.substeps = substeps;

    let mut current = p.to_vec();
    let mut term = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut acc = vec![0.0; n];
    for _ in 0..substeps {
        // term_m = P^m p with P = I + Q̂ᵀ/λ; weight_m = e^{−mean}·mean^m/m!.
        term.copy_from_slice(&current);
        let mut weight = (-mean).exp();
        let mut cumulative = weight;
        acc.iter_mut().zip(&term).for_each(|(a, &t)| *a = weight * t);
        let mut m = 0usize;
        let mut past_tol = 0usize;
        loop {
            let tail = 1.0 - cumulative;
            if tail < tail_tol || m > 10_000 {
                if past_tol >= extra_terms {
                    stats.tail = stats.tail.max(tail.max(0.0));
                    break;
                }
                past_tol += 1;
            }
            view.apply_transpose(&term, &mut scratch);
            for (t, &q) in term.iter_mut().zip(&scratch) {
                *t += q / lambda;
            }
            m += 1;
            weight *= mean / m as f64;
            cumulative += weight;
            acc.iter_mut().zip(&term).for_each(|(a, &t)| *a += weight * t);
        }
        stats.terms = stats.terms.max(m + 1);
        let total: f64 = acc.iter().sum();
        current.iter_mut().zip(&acc).for_each(|(c, &a)| *c = (a / total).max(0.0));
    }
    Ok((current, stats))
}

/// One sampler step: `exp(h·Q̂ᵀ_k) p`.
pub fn exact_step_law(est: &Estimator, p: &DenseDistribution, k: usize) -> Result<DenseDistribution> {
    if p.space() != est.space() {
        return Err(Error::SizeMismatch("law and estimator live on different spaces".into()));
    }
    let view = ReverseRateView::new(est, k)?;
    let (mass, _) = propagate_frozen(&view, p.mass(), est.grid().h, SERIES_TAIL_TOL, 0)?;
    Ok(DenseDistribution::from_weights(p.space(), mass))
}

/// Law of the sampler output after all `K` steps, started from `π^d`.
pub fn exact_sampler_law(est: &Estimator) -> Result<DenseDistribution> {
    let mut p = DenseDistribution::uniform(est.space());
    for k in 0..est.grid().steps {
        p = exact_step_law(est, &p, k)?;
    }
    Ok(p)
}

/// How the per-step uniformization rate `λ_k` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// `λ_k = max_x ŝ(x)_x`, scanning every state.
    ExactMax,
    /// `λ_k = (3/2)·d·S·(1 + S/(e^{T−kh} − 1))`, no scan needed.
    AnalyticBound,
}

impl fmt::Display for LambdaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LambdaMode::ExactMax => "exact",
            LambdaMode::AnalyticBound => "analytic",
        })
    }
}

impl FromStr for LambdaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" | "exact_max" => Ok(LambdaMode::ExactMax),
            "analytic" | "analytic_bound" => Ok(LambdaMode::AnalyticBound),
            _ => Err(Error::config("lambda-mode", format!("expected exact|analytic, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub seed: u64,
    pub trials: usize,
    pub lambda_mode: LambdaMode,
}

impl SamplerConfig {
    pub fn new(seed: u64, trials: usize, lambda_mode: LambdaMode) -> Result<Self> {
        if trials == 0 {
            return Err(Error::param("trials", "need at least one trial"));
        }
        Ok(Self {
            seed,
            trials,
            lambda_mode,
        })
    }
}

/// `λ_k` for every step `k ∈ 0..K`.
pub fn step_lambdas(est: &Estimator, mode: LambdaMode) -> Result<Vec<f64>> {
    let grid = est.grid();
    let space = est.space();
    (0..grid.steps)
        .map(|k| match mode {
            LambdaMode::ExactMax => {
                let table = est.table_for_step(k)?;
                Ok((0..space.num_states())
                    .map(|x| table.row(x).iter().sum::<f64>())
                    .fold(0.0, f64::max))
            }
            LambdaMode::AnalyticBound => {
                let s = space.alphabet() as f64;
                let t = grid.grid_time(grid.index_for_step(k));
                Ok(1.5 * space.dims() as f64 * s * (1.0 + s / t.exp_m1()))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SampleOutcome {
    pub state_index: usize,
    /// Candidate events drawn across all steps (the sum of the `M`s).
    pub total_jumps: u64,
}

/// Everything a trial needs, resolved once per run.
pub struct PreparedSampler<'a> {
    est: &'a Estimator,
    seed: u64,
    tables: Vec<Arc<ScoreTable>>,
    lambdas: Vec<f64>,
    events: Vec<Option<Poisson<f64>>>,
}

impl<'a> PreparedSampler<'a> {
    pub fn new(est: &'a Estimator, seed: u64, mode: LambdaMode) -> Result<Self> {
        let steps = est.grid().steps;
        let tables = (0..steps).map(|k| est.table_for_step(k)).collect::<Result<Vec<_>>>()?;
        let lambdas = step_lambdas(est, mode)?;
        let h = est.grid().h;
        let events = lambdas
            .iter()
            .map(|&l| {
                if l * h > 0.0 {
                    Poisson::new(l * h)
                        .map(Some)
                        .map_err(|e| Error::param("lambda", format!("{e} for mean {}", l * h)))
                } else {
                    Ok(None)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            est,
            seed,
            tables,
            lambdas,
            events,
        })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Runs one trial. Stream 0 draws the initial state and stream `k + 1`
    /// drives step `k`.
    pub fn run(&self, trial: u64) -> Result<SampleOutcome> {
        let space = self.est.space();
        let s = space.alphabet();
        let mut z = stream_rng(self.seed, trial, 0).random_range(0..space.num_states());
        let mut total = 0u64;
        for (k, table) in self.tables.iter().enumerate() {
            let Some(events) = &self.events[k] else {
                continue;
            };
            let mut rng = stream_rng(self.seed, trial, k as u64 + 1);
            let m = events.sample(&mut rng) as u64;
            total += m;
            let budget = s as f64 * self.lambdas[k];
            for _ in 0..m {
                let row = table.row(z);
                let out: f64 = row.iter().sum();
                let residual = 1.0 - out / budget;
                if residual < -RESIDUAL_TOL {
                    return Err(Error::UniformizationViolation {
                        step: k,
                        lambda: self.lambdas[k],
                        residual,
                    });
                }
                let u = rng.random::<f64>() * budget;
                let mut cum = 0.0;
                for (slot, &v) in row.iter().enumerate() {
                    cum += v;
                    if u < cum {
                        let dim = slot / (s - 1);
                        let cur = space.token_at(z, dim);
                        let r = slot % (s - 1);
                        let tok = if r < cur { r } else { r + 1 };
                        z = z + tok * space.stride(dim) - cur * space.stride(dim);
                        break;
                    }
                }
            }
        }
        Ok(SampleOutcome {
            state_index: z,
            total_jumps: total,
        })
    }

    /// Runs trials `0..trials` in parallel; results are in trial order.
    pub fn run_many(&self, trials: usize) -> Result<Vec<SampleOutcome>> {
        (0..trials as u64).into_par_iter().map(|t| self.run(t)).collect()
    }
}

/// A single draw of the uniformization sampler.
pub fn uniformization_sample(est: &Estimator, cfg: &SamplerConfig, trial: u64) -> Result<SampleOutcome> {
    PreparedSampler::new(est, cfg.seed, cfg.lambda_mode)?.run(trial)
}

/// All `cfg.trials` draws, in trial order.
pub fn sample_trials(est: &Estimator, cfg: &SamplerConfig) -> Result<Vec<SampleOutcome>> {
    PreparedSampler::new(est, cfg.seed, cfg.lambda_mode)?.run_many(cfg.trials)
}

/// Normalized histogram of sampled states.
pub fn empirical_law(space: StateSpace, outcomes: &[SampleOutcome]) -> Result<DenseDistribution> {
    if outcomes.is_empty() {
        return Err(Error::param("trials", "no samples"));
    }
    let mut counts = vec![0.0; space.num_states()];
    for o in outcomes {
        counts[o.state_index] += 1.0;
    }
    Ok(DenseDistribution::from_weights(space, counts))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub lambda_mode: LambdaMode,
    pub lambda_k: Vec<f64>,
    /// `λ = Σ_k λ_k·h`, the expected total number of candidate events.
    pub lambda: f64,
    pub trials: usize,
    pub observed_mean: f64,
    pub observed_var: f64,
    /// `√(λ / trials)`, the standard error of the mean under the Poisson law.
    pub std_error: f64,
    /// `(observed_mean − λ) / std_error`.
    pub z_score: f64,
}

pub fn complexity_report(est: &Estimator, cfg: &SamplerConfig) -> Result<ComplexityReport> {
    let prepared = PreparedSampler::new(est, cfg.seed, cfg.lambda_mode)?;
    let outcomes = prepared.run_many(cfg.trials)?;
    let lambda: f64 = prepared.lambdas().iter().map(|l| l * est.grid().h).sum();
    let n = outcomes.len() as f64;
    let mean = outcomes.iter().map(|o| o.total_jumps as f64).sum::<f64>() / n;
    let var = outcomes
        .iter()
        .map(|o| (o.total_jumps as f64 - mean).powi(2))
        .sum::<f64>()
        / (n - 1.0).max(1.0);
    let std_error = (lambda / n).sqrt();
    let z_score = if std_error > 0.0 { (mean - lambda) / std_error } else { 0.0 };
    Ok(ComplexityReport {
        lambda_mode: cfg.lambda_mode,
        lambda_k: prepared.lambdas().to_vec(),
        lambda,
        trials: cfg.trials,
        observed_mean: mean,
        observed_var: var,
        std_error,
        z_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{ScoreEstimatorSpec, TimeGrid};
    use crate::state::{Distribution, FactorizedDistribution};

    fn uniform(s: usize, d: usize) -> Distribution {
        DenseDistribution::uniform(StateSpace::new(s, d).unwrap()).into()
    }

    fn point(s: usize, d: usize) -> Distribution {
        DenseDistribution::point_mass(StateSpace::new(s, d).unwrap(), 0).unwrap().into()
    }

    #[test]
    fn rate_rows_sum_to_zero() {
        let p: Distribution = FactorizedDistribution::new(vec![vec![0.5, 0.3, 0.2], vec![0.1, 0.1, 0.8]])
            .unwrap()
            .into();
        let est = Estimator::new(ScoreEstimatorSpec::LogPerturbed { gamma: 0.3 }, TimeGrid::new(0.2, 0.1, 3).unwrap(), &p).unwrap();
        for k in 0..3 {
            let view = ReverseRateView::new(&est, k).unwrap();
            for x in 0..9 {
                let row: f64 = (0..9).map(|y| view.rate(x, y).unwrap()).sum();
                assert!(row.abs() < 1e-12);
                for y in 0..9 {
                    let r = view.rate(x, y).unwrap();
                    if x != y {
                        assert!(r >= 0.0);
                        if view.space().hamming(x, y) > 1 {
                            assert_eq!(r, 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn diagonal_matches_score_sum() {
        let est = Estimator::new(ScoreEstimatorSpec::Exact, TimeGrid::new(0.25, 0.25, 2).unwrap(), &point(2, 2)).unwrap();
        let view = ReverseRateView::new(&est, 0).unwrap();
        for x in 0..4 {
            let sum = crate::score::score_sum(&view.scores().vector(x));
            assert!((sum + 2.0 * view.rate(x, x).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn uniform_is_fixed_point() {
        let est = Estimator::new(ScoreEstimatorSpec::Exact, TimeGrid::new(0.3, 0.1, 4).unwrap(), &uniform(3, 2)).unwrap();
        let law = exact_sampler_law(&est).unwrap();
        assert!(law.mass().iter().all(|&m| (m - 1.0 / 9.0).abs() < 1e-12));
    }

    #[test]
    fn step_semigroup() {
        let est = Estimator::new(ScoreEstimatorSpec::Exact, TimeGrid::new(0.4, 0.2, 3).unwrap(), &point(2, 2)).unwrap();
        let view = ReverseRateView::new(&est, 1).unwrap();
        let p = DenseDistribution::new(view.space(), vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let (one, _) = propagate_frozen(&view, p.mass(), 0.4, SERIES_TAIL_TOL, 0).unwrap();
        let (half, _) = propagate_frozen(&view, p.mass(), 0.2, SERIES_TAIL_TOL, 0).unwrap();
        let (two, _) = propagate_frozen(&view, &half, 0.2, SERIES_TAIL_TOL, 0).unwrap();
        for (a, b) in one.iter().zip(&two) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn truncation_is_certified() {
        let est = Estimator::new(ScoreEstimatorSpec::Exact, TimeGrid::new(0.5, 0.05, 2).unwrap(), &point(3, 2)).unwrap();
        let view = ReverseRateView::new(&est, 1).unwrap();
        let p = DenseDistribution::uniform(view.space());
        let (a, stats) = propagate_frozen(&view, p.mass(), 0.5, SERIES_TAIL_TOL, 0).unwrap();
        let (b, long) = propagate_frozen(&view, p.mass(), 0.5, SERIES_TAIL_TOL, stats.terms).unwrap();
        assert!(stats.tail < 1e-12);
        assert!(long.terms >= 2 * stats.terms - 1);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(a.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn long_steps_are_split() {
        let est = Estimator::new(ScoreEstimatorSpec::LogPerturbed { gamma: 3.0 }, TimeGrid::new(5.0, 0.01, 1).unwrap(), &point(2, 3)).unwrap();
        let view = ReverseRateView::new(&est, 0).unwrap();
        let p = DenseDistribution::uniform(view.space());
        let (out, stats) = propagate_frozen(&view, p.mass(), 5.0, SERIES_TAIL_TOL, 0).unwrap();
        assert!(stats.substeps > 1);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_lambdas_and_flip_rate() {
        let est = Estimator::new(ScoreEstimatorSpec::Exact, TimeGrid::new(0.5, 0.1, 3).unwrap(), &uniform(2, 1)).unwrap();
        let lambdas = step_lambdas(&est, LambdaMode::ExactMax).unwrap();
        assert!(lambdas.iter().all(|&l| (l - 1.0).abs() < 1e-15));
        let analytic = step_lambdas(&est, LambdaMode::AnalyticBound).unwrap();
        assert!(analytic.iter().zip(&lambdas).all(|(a, e)| a >= e));

        // With λ_k = 1 and rate 1/2 out of each state, a candidate event
        // flips the token with probability 1/2.
        let prepared = PreparedSampler::new(&est, 11, LambdaMode::ExactMax).unwrap();
        let outs = prepared.run_many(20_000).unwrap();
        let ones = outs.iter().filter(|o| o.state_index == 1).count() as f64 / 20_000.0;
        assert!((ones - 0.5).abs() < 0.02);
    }

    #[test]
    fn zero_events_leave_state_unchanged() {
        // A tiny step makes M = 0 the overwhelmingly common case.
        let est = Estimator::new(ScoreEstimatorSpec::Exact, TimeGrid::new(1e-9, 0.5, 1).unwrap(), &uniform(3, 2)).unwrap();
        let prepared = PreparedSampler::new(&est, 5, LambdaMode::ExactMax).unwrap();
        for trial in 0..200 {
            let out = prepared.run(trial).unwrap();
            if out.total_jumps == 0 {
                let start = stream_rng(5, trial, 0).random_range(0..9);
                assert_eq!(out.state_index, start);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_per_trial() {
        let est = Estimator::new(ScoreEstimatorSpec::Exact, TimeGrid::new(0.25, 0.25, 4).unwrap(), &point(2, 3)).unwrap();
        let cfg = SamplerConfig::new(42, 64, LambdaMode::ExactMax).unwrap();
        let all = sample_trials(&est, &cfg).unwrap();
        for t in [0u64, 17, 63] {
            assert_eq!(uniformization_sample(&est, &cfg, t).unwrap(), all[t as usize]);
        }
        assert_eq!(all, sample_trials(&est, &cfg).unwrap());
    }

    #[test]
    fn too_small_lambda_is_reported() {
        // Analytic λ_k assumes entries below the true score bound; a large
        // perturbation breaks that assumption.
        let est = Estimator::new(ScoreEstimatorSpec::LogPerturbed { gamma: 4.0 }, TimeGrid::new(0.5, 0.5, 2).unwrap(), &uniform(2, 2)).unwrap();
        let prepared = PreparedSampler::new(&est, 1, LambdaMode::AnalyticBound).unwrap();
        let err = (0..100).map(|t| prepared.run(t)).find(|r| r.is_err());
        assert!(matches!(err, Some(Err(Error::UniformizationViolation { .. }))));
    }

    #[test]
    fn lambda_within_score_bound_for_exact() {
        let p: Distribution = FactorizedDistribution::new(vec![vec![0.9, 0.1], vec![0.99, 0.01]]).unwrap().into();
        let grid = TimeGrid::new(0.1, 0.05, 10).unwrap();
        let est = Estimator::new(ScoreEstimatorSpec::Exact, grid, &p).unwrap();
        for (k, l) in step_lambdas(&est, LambdaMode::ExactMax).unwrap().into_iter().enumerate() {
            let t = grid.grid_time(grid.index_for_step(k));
            assert!(l <= 2.0 * 2.0 * (1.0 + 2.0 / t.exp_m1()));
        }
    }

    #[test]
    fn product_law_factorizes() {
        let m1 = vec![0.7, 0.3];
        let m2 = vec![0.2, 0.8];
        let grid = TimeGrid::new(0.25, 0.1, 4).unwrap();
        let joint = Estimator::new(
            ScoreEstimatorSpec::Exact,
            grid,
            &FactorizedDistribution::new(vec![m1.clone(), m2.clone()]).unwrap().into(),
        )
        .unwrap();
        let a = exact_sampler_law(&Estimator::new(ScoreEstimatorSpec::Exact, grid, &FactorizedDistribution::new(vec![m1]).unwrap().into()).unwrap()).unwrap();
        let b = exact_sampler_law(&Estimator::new(ScoreEstimatorSpec::Exact, grid, &FactorizedDistribution::new(vec![m2]).unwrap().into()).unwrap()).unwrap();
        let law = exact_sampler_law(&joint).unwrap();
        for x in 0..4 {
            let want = a.prob(x % 2) * b.prob(x / 2);
            assert!((law.prob(x) - want).abs() < 1e-10);
        }
    }

    #[test]
    fn lambda_mode_parses() {
        assert_eq!("exact".parse::<LambdaMode>().unwrap(), LambdaMode::ExactMax);
        assert_eq!("analytic".parse::<LambdaMode>().unwrap(), LambdaMode::AnalyticBound);
        assert!("x".parse::<LambdaMode>().is_err());
        assert!(SamplerConfig::new(0, 0, LambdaMode::ExactMax).is_err());
    }
}
