//! Weighted counting-process estimators: risk-set, Hajek and
//! Horvitz-Thompson integrators and the `(Y, S, D)` recursion.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::curve::CurveEstimate;
use crate::data::HistorySet;
use crate::error::{Error, Result};
use crate::estimand::{Estimand, EstimandSpec};
use crate::weights::{assemble_weights, fit_models, IndividualWeights, WeightOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    #[default]
    RiskSet,
    Hajek,
    Ht,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::RiskSet => "risk-set",
            Engine::Hajek => "hajek",
            Engine::Ht => "ht",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "risk-set" => Ok(Engine::RiskSet),
            "hajek" => Ok(Engine::Hajek),
            "ht" | "horvitz-thompson" => Ok(Engine::Ht),
            other => Err(Error::InvalidArgument(format!("unknown engine `{other}`"))),
        }
    }
}

/// Increments of `B^Y`, `B^D` and `B^{D,w}` at the merged event times.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorPaths {
    pub times: Vec<f64>,
    pub db_y: Vec<f64>,
    pub db_d: Vec<f64>,
    pub db_dw: Vec<f64>,
    /// Last time with a nonempty risk set in the arm.
    pub last_at_risk: f64,
}

#[derive(Debug, Clone, Copy)]
enum Jump {
    Recurrent,
    Death,
}

struct ArmEvents {
    /// `(time, kind, individual index)` sorted by time, then index.
    events: Vec<(f64, Jump, usize)>,
    exits: Vec<f64>,
}

fn arm_events(set: &HistorySet, arm: u8, end: f64) -> ArmEvents {
    let mut events = Vec::new();
    let mut exits = Vec::new();
    for (i, h) in set.histories.iter().enumerate().filter(|(_, h)| h.a == arm) {
        let exit = h.exit_time(set.end);
        exits.push(exit);
        let death = h.observed_death();
        for &r in &h.recurrent_times {
            if r <= exit && r <= end && death != Some(r) {
                events.push((r, Jump::Recurrent, i));
            }
        }
        if let Some(t) = death.filter(|&t| t <= end) {
            events.push((t, Jump::Death, i));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
    exits.sort_by(f64::total_cmp);
    ArmEvents { events, exits }
}

fn push(paths: &mut IntegratorPaths, t: f64, y: f64, d: f64, dw: f64) {
    if paths.times.last() == Some(&t) {
        let k = paths.times.len() - 1;
        paths.db_y[k] += y;
        paths.db_d[k] += d;
        paths.db_dw[k] += dw;
    } else {
        paths.times.push(t);
        paths.db_y.push(y);
        paths.db_d.push(d);
        paths.db_dw.push(dw);
    }
}

fn theta_factor(w: &IndividualWeights, use_theta: bool) -> f64 {
    if use_theta {
        w.theta_d.unwrap_or(1.0)
    } else {
        1.0
    }
}

/// Risk-set integrators; `weights[i]` must be set for every individual of `arm`.
pub fn build_risk_set_integrators(
    set: &HistorySet,
    weights: &[Option<IndividualWeights>],
    arm: u8,
    end: f64,
    use_theta: bool,
) -> Result<IntegratorPaths> {
    let ev = arm_events(set, arm, end);
    let mut paths = IntegratorPaths {
        last_at_risk: ev.exits.last().copied().unwrap_or(set.origin),
        ..Default::default()
    };
    let mut start = 0;
    while start < ev.events.len() {
        let t = ev.events[start].0;
        let stop = start + ev.events[start..].partition_point(|e| e.0 == t);
        let at_risk = (ev.exits.len() - ev.exits.partition_point(|&e| e < t)) as f64;
        let (mut ny, mut nd, mut ndw) = (0.0, 0.0, 0.0);
        for &(_, kind, i) in &ev.events[start..stop] {
            let w = weights[i]
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("missing weights".into()))?;
            let r = w.r.before(t);
            match kind {
                Jump::Recurrent => ny += r,
                Jump::Death => {
                    nd += w.r_d;
                    ndw += r * theta_factor(w, use_theta);
                }
            }
        }
        push(&mut paths, t, ny / at_risk, nd / at_risk, ndw / at_risk);
        start = stop;
    }
    Ok(paths)
}

/// Hajek (`hajek = true`) or Horvitz-Thompson integrators; `B^D` is identically zero.
pub fn build_ht_hajek_integrators(
    set: &HistorySet,
    weights: &[Option<IndividualWeights>],
    arm: u8,
    end: f64,
    hajek: bool,
    use_theta: bool,
) -> Result<IntegratorPaths> {
    let n = set.len() as f64;
    let ev = arm_events(set, arm, end);
    let mut paths = IntegratorPaths {
        last_at_risk: ev.exits.last().copied().unwrap_or(set.origin),
        ..Default::default()
    };
    let mut base = 0.0;
    let mut deltas: Vec<(f64, f64)> = Vec::new();
    for w in weights.iter().flatten() {
        let v = &w.r_bar.values;
        base += v[0];
        for k in 1..v.len() {
            if v[k] != v[k - 1] {
                deltas.push((w.r_bar.times[k], v[k] - v[k - 1]));
            }
        }
    }
    deltas.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut sum, mut next) = (base, 0usize);
    let mut start = 0;
    while start < ev.events.len() {
        let t = ev.events[start].0;
        let stop = start + ev.events[start..].partition_point(|e| e.0 == t);
        while next < deltas.len() && deltas[next].0 < t {
            sum += deltas[next].1;
            next += 1;
        }
        let norm = if hajek {
            if sum == 0.0 {
                return Err(Error::ZeroH { time: t });
            }
            sum
        } else {
            n
        };
        let (mut ny, mut ndw) = (0.0, 0.0);
        for &(_, kind, i) in &ev.events[start..stop] {
            let w = weights[i]
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("missing weights".into()))?;
            let r = w.r_bar.before(t);
            match kind {
                Jump::Recurrent => ny += r,
                Jump::Death => ndw += r * theta_factor(w, use_theta),
            }
        }
        push(&mut paths, t, ny / norm, 0.0, ndw / norm);
        start = stop;
    }
    Ok(paths)
}

/// `(Y, S, D)` at each of `times` by the left-point recursion.
pub fn solve_system(paths: &IntegratorPaths, times: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (mut y, mut s, mut d) = (0.0, 1.0, 0.0);
    let mut out = (
        Vec::with_capacity(times.len()),
        Vec::with_capacity(times.len()),
        Vec::with_capacity(times.len()),
    );
    let mut j = 0;
    for &t in times {
        while j < paths.times.len() && paths.times[j] <= t {
            let s_minus = s;
            y += s_minus * paths.db_y[j];
            s = s_minus * (1.0 - paths.db_d[j]);
            d += s_minus * paths.db_dw[j];
            j += 1;
        }
        out.0.push(y);
        out.1.push(s);
        out.2.push(d);
    }
    out
}

/// Continuous-engine options.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ContinuousOptions {
    pub weights: WeightOptions,
}

/// Fits hazards, builds weights and integrators and solves the system on
/// grid times `0..=horizon`.
pub fn estimate(
    set: &HistorySet,
    spec: &EstimandSpec,
    engine: Engine,
    opts: &ContinuousOptions,
) -> Result<CurveEstimate> {
    let grid = set
        .grid
        .ok_or_else(|| Error::InvalidArgument("continuous estimation needs an evaluation grid".into()))?;
    spec.validate(grid.k_max)?;
    let times: Vec<f64> = (0..=spec.horizon).map(|k| grid.time(k)).collect();
    estimate_at(set, spec, engine, opts, &times)
}

/// As [`estimate`], evaluated at sorted `times`; events after the last time are ignored.
pub fn estimate_at(
    set: &HistorySet,
    spec: &EstimandSpec,
    engine: Engine,
    opts: &ContinuousOptions,
    times: &[f64],
) -> Result<CurveEstimate> {
    spec.estimand.validate()?;
    if spec.estimand.is_composite() {
        return Err(Error::Unsupported {
            spec: spec.estimand.name().into(),
            engine: engine.name().into(),
        });
    }
    if times.is_empty() || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument(
            "evaluation times must be nonempty and sorted".into(),
        ));
    }
    let times = times.to_vec();
    let end = *times.last().unwrap_or(&set.origin);
    let (a_y, _) = spec.estimand.arms();
    let models = fit_models(set, &spec.estimand, &opts.weights).map_err(|e| e.at_stage("hazard-fit"))?;
    let w = assemble_weights(&spec.estimand, &models, set, &opts.weights).map_err(|e| e.at_stage("weights"))?;
    let survival_theta = matches!(spec.estimand, Estimand::SeparableSurvival { .. });
    let paths = match engine {
        Engine::RiskSet => {
            build_risk_set_integrators(set, &w, a_y, end, survival_theta && opts.weights.theta_in_risk_set)
        }
        Engine::Hajek => build_ht_hajek_integrators(set, &w, a_y, end, true, survival_theta),
        Engine::Ht => build_ht_hajek_integrators(set, &w, a_y, end, false, survival_theta),
    }
    .map_err(|e| e.at_stage("integrators"))?;
    let (y, s, d) = solve_system(&paths, &times);
    let mut est = CurveEstimate::new(*spec, engine.name(), times, y, d);
    est.s = s;
    est.set_meta("n", set.len());
    est.set_meta("n_arm", set.histories.iter().filter(|h| h.a == a_y).count());
    est.set_meta("bandwidth", opts.weights.bandwidth_for(set));
    est.set_meta("scheme", opts.weights.scheme);
    est.set_meta("last_at_risk_time", paths.last_at_risk);
    est.set_meta("truncated", paths.last_at_risk < end);
    est.set_meta(
        "underflow",
        w.iter().flatten().any(|x| x.r.underflow || x.r_bar.underflow),
    );
    Ok(est)
}

/// Curves under two interventions and their pointwise difference
/// (`second - first`) in the estimand's value component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    pub first: CurveEstimate,
    pub second: CurveEstimate,
    pub difference: Vec<f64>,
}

pub fn estimate_contrast(
    set: &HistorySet,
    first: &EstimandSpec,
    second: &EstimandSpec,
    engine: Engine,
    opts: &ContinuousOptions,
) -> Result<Contrast> {
    let a = estimate(set, first, engine, opts)?;
    let b = estimate(set, second, engine, opts)?;
    if a.times != b.times {
        return Err(Error::InvalidArgument("contrasted curves need equal horizons".into()));
    }
    let difference = b.values().iter().zip(a.values()).map(|(x, y)| x - y).collect();
    Ok(Contrast {
        first: a,
        second: b,
        difference,
    })
}
