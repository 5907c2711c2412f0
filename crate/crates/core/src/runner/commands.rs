//! One function per subcommand. Each resolves its settings, runs the
//! computation and renders a self-describing CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Settings, ECHO_PREFIX};
use super::data::{self, DataSpec};
use crate::analysis::{
    step_schedule, decomposition_check, kl, order_check, path_kl, early_stopped_bound, full_support_bound,
    tv, BoundInputs, ScheduleMode,
};
use crate::error::{Error, Result};
use crate::estimator::{clip_constants, score_error_eps, Estimator, ScoreEstimatorSpec, TimeGrid, DEFAULT_NODES};
use crate::forward::{forward_marginal_dense, mixing_report};
use crate::reverse::{exact_sampler_law, LambdaMode, PreparedSampler};
use crate::score::{data_score_bound, kappa, score_upper_bound, ScoreField};
use crate::state::{Distribution, SequenceState};

const DEFAULT_TRIALS: usize = 1000;
const DEFAULT_SEED: u64 = 0;
const DEFAULT_ORDER_STEPS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
const DEFAULT_ORDER_SPAN: f64 = 1.6;
const DEFAULT_SCHEDULE_DELTA: f64 = 0.1;

/// Accumulates a CSV whose first line echoes the resolved settings.
struct Csv {
    text: String,
}

impl Csv {
    fn new(settings: &Settings, header: &[&str]) -> Self {
        let mut text = format!("{ECHO_PREFIX}{}\n", settings.echo());
        text.push_str(&header.join(","));
        text.push('\n');
        Csv { text }
    }

    fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    fn summary<T: Serialize>(&mut self, value: &T) {
        let json = serde_json::to_string(value).expect("summaries always serialize");
        let _ = writeln!(self.text, "# summary: {json}");
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn require<T: Clone>(v: &Option<T>, field: &str) -> Result<T> {
    v.clone()
        .ok_or_else(|| Error::config(field, format!("--{field} is required for this command")))
}

/// Writes `text` to `path` through a temporary file and a rename, so a
/// reader never sees a partial file.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming onto {}", path.display()), e))
}

impl Settings {
    fn resolve_data(&mut self) -> Result<Distribution> {
        let spec: DataSpec = require(&self.dist, "dist")?.parse()?;
        let resolved = data::resolve(&spec, self.alphabet, self.d, self.dist_mass.as_deref())
            .map_err(|e| match e {
                e @ Error::Config { .. } => e,
                e => e.in_module("core_state"),
            })?;
        let space = resolved.dist.space()?;
        self.alphabet = Some(space.alphabet());
        self.d = Some(space.dims());
        self.dist_mass = resolved.drawn_mass;
        Ok(resolved.dist)
    }

    fn resolve_grid(&self) -> Result<TimeGrid> {
        require(&self.grid, "grid")?.parse()
    }

    fn resolve_estimator(&mut self) -> Result<ScoreEstimatorSpec> {
        let spec: ScoreEstimatorSpec = self.estimator.as_deref().unwrap_or("exact").parse()?;
        if let ScoreEstimatorSpec::Tabular { path } = &spec {
            if !path.is_file() {
                return Err(Error::config("estimator", format!("file {} does not exist", path.display())));
            }
        }
        self.estimator = Some(spec.to_string());
        Ok(spec)
    }

    fn resolve_nodes(&mut self) -> Result<usize> {
        let nodes = *self.nodes.get_or_insert(DEFAULT_NODES);
        if nodes == 0 {
            return Err(Error::config("nodes", "need at least one quadrature node"));
        }
        Ok(nodes)
    }

    /// Data, grid and estimator bound together.
    fn resolve_estimation(&mut self) -> Result<Estimator> {
        let dist = self.resolve_data()?;
        let grid = self.resolve_grid()?;
        let spec = self.resolve_estimator()?;
        Estimator::new(spec, grid, &dist).map_err(|e| e.in_module("estimator"))
    }
}

pub fn forward(mut s: Settings) -> Result<String> {
    let dist = s.resolve_data()?;
    let times = require(&s.times, "times")?;
    let rows = mixing_report(&dist, &times).map_err(|e| e.in_module("forward_process"))?;
    let mut csv = Csv::new(&s, &["t", "kl_to_uniform", "prop2_bound", "holds", "bound_cap"]);
    for r in rows {
        csv.row(&[num(r.t), num(r.kl_to_uniform), num(r.bound), r.holds.to_string(), num(r.bound_cap)]);
    }
    Ok(csv.text)
}

pub fn score(mut s: Settings) -> Result<String> {
    let dist = s.resolve_data()?;
    let t = require(&s.t, "t")?;
    let state = SequenceState::new(require(&s.state, "state")?);
    let with_bounds = s.bounds.unwrap_or(false);
    s.bounds = Some(with_bounds);
    let space = dist.space()?;
    let field = ScoreField::new(&dist, t).map_err(|e| e.in_module("score"))?;
    let vector = field.at(&state).map_err(|e| e.in_module("score"))?;
    let mut header = vec!["dim", "token", "neighbor_index", "score"];
    let (time_bound, data_bound) = if with_bounds {
        header.extend(["score_bound", "data_bound"]);
        let time_bound = (t > 0.0).then(|| score_upper_bound(space.alphabet(), t)).transpose()?;
        (time_bound, data_score_bound(&dist).ok())
    } else {
        (None, None)
    };
    let mut csv = Csv::new(&s, &header);
    for nb in space.neighbors(&state) {
        let mut row = vec![
            nb.dim.to_string(),
            nb.token.to_string(),
            space.encode(&nb.state)?.to_string(),
            num(vector.get(nb.dim, nb.token).expect("neighbor slot exists")),
        ];
        if with_bounds {
            row.extend([opt(time_bound), opt(data_bound)]);
        }
        csv.row(&row);
    }
    Ok(csv.text)
}

#[derive(Serialize)]
struct IntegralSummary {
    value: f64,
    nodes: usize,
    value_doubled: f64,
    doubling_discrepancy: f64,
}

fn per_step_csv(s: &Settings, grid: TimeGrid, per_step: &[f64], summary: IntegralSummary) -> String {
    let mut csv = Csv::new(s, &["grid_index", "t_start", "t_end", "contribution"]);
    for (i, v) in per_step.iter().enumerate() {
        let (a, b) = grid.interval(i + 1);
        csv.row(&[(i + 1).to_string(), num(a), num(b), num(*v)]);
    }
    csv.summary(&summary);
    csv.text
}

pub fn eps_score(mut s: Settings) -> Result<String> {
    let est = s.resolve_estimation()?;
    let nodes = s.resolve_nodes()?;
    let r = score_error_eps(&est, nodes).map_err(|e| e.in_module("estimator"))?;
    Ok(per_step_csv(
        &s,
        est.grid(),
        &r.per_step,
        IntegralSummary {
            value: r.value,
            nodes,
            value_doubled: r.value_doubled,
            doubling_discrepancy: r.doubling_discrepancy,
        },
    ))
}

pub fn path_kl_cmd(mut s: Settings) -> Result<String> {
    let est = s.resolve_estimation()?;
    let nodes = s.resolve_nodes()?;
    let r = path_kl(&est, nodes).map_err(|e| e.in_module("analysis"))?;
    Ok(per_step_csv(
        &s,
        est.grid(),
        &r.per_step,
        IntegralSummary {
            value: r.value,
            nodes,
            value_doubled: r.value_doubled,
            doubling_discrepancy: r.doubling_discrepancy,
        },
    ))
}

#[derive(Serialize)]
struct SampleSummary {
    lambda_k: Vec<f64>,
    lambda: f64,
    mean_total_jumps: f64,
}

pub fn sample(mut s: Settings) -> Result<String> {
    let est = s.resolve_estimation()?;
    let trials = *s.trials.get_or_insert(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(Error::config("trials", "need at least one trial"));
    }
    let seed = *s.seed.get_or_insert(DEFAULT_SEED);
    let mode: LambdaMode = s.lambda_mode.as_deref().unwrap_or("exact").parse()?;
    s.lambda_mode = Some(mode.to_string());
    let prepared = PreparedSampler::new(&est, seed, mode).map_err(|e| e.in_module("reverse_sampler"))?;
    let outcomes = prepared.run_many(trials).map_err(|e| e.in_module("reverse_sampler"))?;
    let mut csv = Csv::new(&s, &["trial", "state_index", "total_jumps"]);
    for (i, o) in outcomes.iter().enumerate() {
        csv.row(&[i.to_string(), o.state_index.to_string(), o.total_jumps.to_string()]);
    }
    let h = est.grid().h;
    csv.summary(&SampleSummary {
        lambda_k: prepared.lambdas().to_vec(),
        lambda: prepared.lambdas().iter().map(|l| l * h).sum(),
        mean_total_jumps: outcomes.iter().map(|o| o.total_jumps as f64).sum::<f64>() / trials as f64,
    });
    Ok(csv.text)
}

#[derive(Serialize)]
struct LawSummary {
    kl_from_q_delta: f64,
    tv_to_q_delta: f64,
}

pub fn exact_law(mut s: Settings) -> Result<String> {
    let est = s.resolve_estimation()?;
    let law = exact_sampler_law(&est).map_err(|e| e.in_module("reverse_sampler"))?;
    let space = est.space();
    let token_cols: Vec<String> = (0..space.dims()).map(|i| format!("x{i}")).collect();
    let mut header = vec!["state_index"];
    header.extend(token_cols.iter().map(String::as_str));
    header.push("mass");
    let mut csv = Csv::new(&s, &header);
    for (i, &m) in law.mass().iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend((0..space.dims()).map(|d| space.token_at(i, d).to_string()));
        row.push(num(m));
        csv.row(&row);
    }
    let q_delta = forward_marginal_dense(est.data(), est.grid().delta)?;
    csv.summary(&LawSummary {
        kl_from_q_delta: kl(&q_delta, &law)?,
        tv_to_q_delta: tv(&q_delta, &law)?,
    });
    Ok(csv.text)
}

pub fn decompose(mut s: Settings) -> Result<String> {
    let est = s.resolve_estimation()?;
    let nodes = s.resolve_nodes()?;
    let r = decomposition_check(&est, nodes).map_err(|e| e.in_module("analysis"))?;
    let mut csv = Csv::new(&s, &["lhs", "prior", "path", "rhs", "tolerance", "holds"]);
    csv.row(&[num(r.lhs), num(r.prior), num(r.path), num(r.rhs), num(r.tolerance), r.holds.to_string()]);
    Ok(csv.text)
}

pub fn bounds(mut s: Settings) -> Result<String> {
    let regime: ScheduleMode = require(&s.regime, "regime")?.parse()?;
    let early = regime == ScheduleMode::EarlyStopped;
    let constant_factor = *s.constant_factor.get_or_insert(1.0);

    // With a data law, the constants, κ² and ε_score are computed from it;
    // explicit flags still take precedence.
    let computed = if s.dist.is_some() {
        let est = s.resolve_estimation()?;
        let nodes = s.resolve_nodes()?;
        let eps = score_error_eps(&est, nodes).map_err(|e| e.in_module("estimator"))?.value;
        let data = Distribution::from(est.data().clone());
        let l = data_score_bound(&data).ok();
        let clip = clip_constants(&est, l).map_err(|e| e.in_module("estimator"))?;
        let k2 = kappa(&data).ok().map(|k| k.sum_sq);
        Some((est.grid(), eps, clip, k2))
    } else {
        None
    };
    let (horizon, h, delta) = match (&computed, &s.grid) {
        (Some((g, ..)), _) => (g.horizon(), g.h, g.delta),
        (None, Some(g)) => {
            let g: TimeGrid = g.parse()?;
            (g.horizon(), g.h, g.delta)
        }
        (None, None) => (require(&s.horizon, "T")?, require(&s.h, "h")?, s.delta.unwrap_or(0.0)),
    };
    let inputs = BoundInputs {
        dims: require(&s.d, "d")?,
        alphabet: require(&s.alphabet, "S")?,
        horizon,
        h,
        eps_score: match (s.eps_score, &computed) {
            (Some(e), _) => e,
            (None, Some((_, e, ..))) => *e,
            (None, None) => return Err(Error::config("eps_score", "give --eps-score or a data law via --dist")),
        },
        constant_factor,
    };
    let c = match (s.c, &computed) {
        (Some(c), _) => c,
        (None, Some((_, _, clip, _))) => {
            let c = if early { clip.c1 } else { clip.c2 };
            c.ok_or_else(|| Error::config("C", "cannot be derived for this data and grid; give --C"))?
        }
        (None, None) => return Err(Error::config("C", "give --C or a data law via --dist")),
    };
    let report = if early {
        early_stopped_bound(&inputs, delta, c)
    } else {
        let k2 = match (s.kappa_sq, &computed) {
            (Some(k), _) => k,
            (None, Some((.., Some(k)))) => *k,
            _ => return Err(Error::config("kappa_sq", "give --kappa-sq or full-support data via --dist")),
        };
        full_support_bound(&inputs, k2, c)
    }
    .map_err(|e| e.in_module("analysis"))?;
    let mut csv = Csv::new(
        &s,
        &[
            "term_init",
            "term_disc",
            "term_score",
            "total",
            "C",
            "kappa_sq",
            "tv_early_stop",
            "tv_total",
            "delta_regime_strained",
        ],
    );
    csv.row(&[
        num(report.term_init),
        num(report.term_disc),
        num(report.term_score),
        num(report.total),
        num(report.c),
        opt(report.kappa_sq),
        opt(report.tv_early_stop),
        opt(report.tv_total),
        report.delta_regime_strained.map(|b| b.to_string()).unwrap_or_default(),
    ]);
    Ok(csv.text)
}

#[derive(Serialize)]
struct OrderSummary {
    slope: Option<f64>,
    slope_doubled: Option<f64>,
    order_defined: bool,
}

pub fn order_check_cmd(mut s: Settings) -> Result<String> {
    let dist = s.resolve_data()?;
    let spec = s.resolve_estimator()?;
    let nodes = s.resolve_nodes()?;
    let hs = s.hs.get_or_insert_with(|| DEFAULT_ORDER_STEPS.to_vec()).clone();
    let span = *s.span.get_or_insert(DEFAULT_ORDER_SPAN);
    let delta = *s.delta.get_or_insert(0.0);
    let r = order_check(&hs, span, delta, nodes, |g| Estimator::new(spec.clone(), g, &dist))
        .map_err(|e| e.in_module("analysis"))?;
    let mut csv = Csv::new(&s, &["h", "K", "path_kl", "path_kl_doubled"]);
    for p in &r.points {
        csv.row(&[num(p.h), p.steps.to_string(), num(p.path_kl), num(p.path_kl_doubled)]);
    }
    csv.summary(&OrderSummary {
        slope: r.slope,
        slope_doubled: r.slope_doubled,
        order_defined: r.slope.is_some(),
    });
    Ok(csv.text)
}

pub fn schedule(mut s: Settings) -> Result<String> {
    let eps = require(&s.eps, "eps")?;
    let d = require(&s.d, "d")?;
    let alphabet = require(&s.alphabet, "S")?;
    let c = *s.c.get_or_insert(1.0);
    let delta = match s.kappa_sq {
        Some(_) => *s.delta.get_or_insert(0.0),
        None => *s.delta.get_or_insert(DEFAULT_SCHEDULE_DELTA),
    };
    let r = step_schedule(eps, d, alphabet, delta, c, s.kappa_sq).map_err(|e| e.in_module("analysis"))?;
    let mode = match r.mode {
        ScheduleMode::EarlyStopped => "early_stopped",
        ScheduleMode::FullSupport => "full_support",
    };
    let mut csv = Csv::new(&s, &["mode", "T", "h_target", "h", "K", "delta"]);
    csv.row(&[
        mode.to_string(),
        num(r.horizon),
        num(r.h_target),
        num(r.grid.h),
        r.grid.steps.to_string(),
        num(r.grid.delta),
    ]);
    Ok(csv.text)
}

#[derive(Debug, Clone)]
struct SweepRow {
    coords: [f64; 4],
    fields: Vec<String>,
}

const SWEEP_HEADER: [&str; 11] = [
    "h", "gamma", "delta", "T", "h_used", "K", "eps_score", "path_kl", "kl_output", "prior", "holds",
];

pub fn sweep(mut s: Settings) -> Result<String> {
    let dist = s.resolve_data()?;
    let nodes = s.resolve_nodes()?;
    let hs = require(&s.hs, "hs")?;
    let horizons = require(&s.horizons, "horizons")?;
    let gammas = s.gammas.get_or_insert_with(|| vec![0.0]).clone();
    let deltas = s.deltas.get_or_insert_with(|| vec![0.25]).clone();
    let mut points = Vec::new();
    for &h in &hs {
        for &g in &gammas {
            for &dl in &deltas {
                for &t in &horizons {
                    points.push([h, g, dl, t]);
                }
            }
        }
    }
    let out_dir = s.out_dir.clone();
    let echo_base = s.clone();
    let mut rows = points
        .par_iter()
        .map(|&[h, gamma, delta, horizon]| -> Result<SweepRow> {
            let spec = if gamma == 0.0 {
                ScoreEstimatorSpec::Exact
            } else {
                ScoreEstimatorSpec::LogPerturbed { gamma }
            };
            let grid = TimeGrid::covering(horizon - delta, h, delta).map_err(|e| e.in_module("estimator"))?;
            let est = Estimator::new(spec.clone(), grid, &dist).map_err(|e| e.in_module("estimator"))?;
            let eps = score_error_eps(&est, nodes).map_err(|e| e.in_module("estimator"))?;
            let dec = decomposition_check(&est, nodes).map_err(|e| e.in_module("analysis"))?;
            let fields = vec![
                num(h),
                num(gamma),
                num(delta),
                num(horizon),
                num(grid.h),
                grid.steps.to_string(),
                num(eps.value),
                num(dec.path),
                num(dec.lhs),
                num(dec.prior),
                dec.holds.to_string(),
            ];
            if let Some(dir) = &out_dir {
                let point_settings = Settings {
                    command: Some("sweep-point".into()),
                    grid: Some(format!("{},{},{}", grid.h, grid.delta, grid.steps)),
                    estimator: Some(spec.to_string()),
                    hs: None,
                    gammas: None,
                    deltas: None,
                    horizons: None,
                    ..echo_base.clone()
                };
                let mut csv = Csv::new(&point_settings, &SWEEP_HEADER);
                csv.row(&fields);
                let name = format!("point_h{h}_gamma{gamma}_delta{delta}_T{horizon}.csv");
                write_atomic(&dir.join("sweep").join(name), &csv.text)?;
            }
            Ok(SweepRow {
                coords: [h, gamma, delta, horizon],
                fields,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        a.coords
            .iter()
            .zip(&b.coords)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut csv = Csv::new(&s, &SWEEP_HEADER);
    for r in rows {
        csv.row(&r.fields);
    }
    Ok(csv.text)
}
