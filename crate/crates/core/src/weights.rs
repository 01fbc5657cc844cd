//! Weight processes solving the Doléans-Dade equation by plug-in of
//! cumulative hazard estimates, and their assembly into estimator weights.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{ContinuousHistory, HistorySet};
use crate::error::{Error, Result};
use crate::estimand::Estimand;
use crate::hazard::{
    fit_additive, AdditiveHazardModel, CumulativeHazard, EventKind, RankPolicy, Regressor, SmoothedTheta,
    ZeroDenominatorPolicy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    CensorUnstabilized,
    CensorStabilized,
    DeathUnstabilized,
    DeathStabilized,
    DeathSeparable,
    LdSeparable,
    Treatment,
    ThetaD,
    Product,
}

/// Right-continuous step function with `values[0] = 1` at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightTrajectory {
    pub kind: WeightKind,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Set when the solution went negative somewhere.
    #[serde(default)]
    pub underflow: bool,
}

impl WeightTrajectory {
    pub fn constant(kind: WeightKind, origin: f64, value: f64) -> Self {
        WeightTrajectory {
            kind,
            times: vec![origin],
            values: vec![value],
            underflow: value < 0.0,
        }
    }

    /// `W_t`.
    pub fn at(&self, t: f64) -> f64 {
        let n = self.times.partition_point(|&s| s <= t);
        if n == 0 {
            1.0
        } else {
            self.values[n - 1]
        }
    }

    /// `W_{t-}`.
    pub fn before(&self, t: f64) -> f64 {
        let n = self.times.partition_point(|&s| s < t);
        if n == 0 {
            1.0
        } else {
            self.values[n - 1]
        }
    }

    pub fn last(&self) -> f64 {
        *self.values.last().unwrap_or(&1.0)
    }

    /// Pointwise product of step functions, times a constant.
    pub fn product(parts: &[&WeightTrajectory], scale: f64) -> WeightTrajectory {
        let mut times: Vec<f64> = parts.iter().flat_map(|p| p.times.iter().copied()).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let mut idx = vec![0usize; parts.len()];
        let values: Vec<f64> = times
            .iter()
            .map(|&t| {
                let mut v = scale;
                for (p, i) in parts.iter().zip(idx.iter_mut()) {
                    while *i < p.times.len() && p.times[*i] <= t {
                        *i += 1;
                    }
                    v *= if *i == 0 { 1.0 } else { p.values[*i - 1] };
                }
                v
            })
            .collect();
        WeightTrajectory {
            kind: WeightKind::Product,
            underflow: values.iter().any(|&v| v < 0.0),
            times,
            values,
        }
    }

    /// Long CSV rows `id,time,kind,value`.
    pub fn write_rows<W: Write>(&self, id: &str, out: &mut csv::Writer<W>) -> Result<()> {
        let kind = serde_json::to_value(self.kind)?.as_str().unwrap_or("").to_string();
        for (t, v) in self.times.iter().zip(&self.values) {
            out.write_record([id, &t.to_string(), &kind, &v.to_string()])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// `W = W- * theta` at driver jumps, `W = W- * (1 - dA*) / (1 - dA)` otherwise.
    #[default]
    ProductLimit,
    /// `W = W- * (1 + (theta - 1) dN + dA - dA*)`.
    Euler,
}

/// How the jump factor at driver jumps is obtained.
#[derive(Debug, Clone)]
pub enum ThetaRule {
    /// Unstabilized weights, `alpha* = 0`.
    Zero,
    Smoothed(SmoothedTheta),
}

/// Solves the weight recursion over the merged jump set of `num` (`A*`),
/// `den` (`A`) and the driver.
pub fn solve_weight(
    kind: WeightKind,
    num: &CumulativeHazard,
    den: &CumulativeHazard,
    driver: &[f64],
    theta: &mut ThetaRule,
    scheme: Scheme,
    origin: f64,
) -> Result<WeightTrajectory> {
    let mut pts: Vec<(f64, f64, f64, bool)> = Vec::with_capacity(num.times.len() + den.times.len() + driver.len());
    pts.extend(num.times.iter().zip(&num.increments).map(|(&t, &d)| (t, d, 0.0, false)));
    pts.extend(den.times.iter().zip(&den.increments).map(|(&t, &d)| (t, 0.0, d, false)));
    pts.extend(driver.iter().map(|&t| (t, 0.0, 0.0, true)));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut w = 1.0;
    let mut out = WeightTrajectory::constant(kind, origin, 1.0);
    let mut i = 0;
    while i < pts.len() {
        let t = pts[i].0;
        let (mut da_star, mut da, mut jump) = (0.0, 0.0, false);
        while i < pts.len() && pts[i].0 == t {
            da_star += pts[i].1;
            da += pts[i].2;
            jump |= pts[i].3;
            i += 1;
        }
        let th = if jump {
            match theta {
                ThetaRule::Zero => 0.0,
                ThetaRule::Smoothed(s) => s.at(num, den, t)?,
            }
        } else {
            1.0
        };
        w = match scheme {
            Scheme::ProductLimit if jump => w * th,
            Scheme::ProductLimit => {
                if da == da_star {
                    w
                } else {
                    if 1.0 - da == 0.0 {
                        return Err(Error::SingularSurvival { time: t });
                    }
                    w * (1.0 - da_star) / (1.0 - da)
                }
            }
            Scheme::Euler => w * (1.0 + if jump { th - 1.0 } else { 0.0 } + da - da_star),
        };
        out.underflow |= w < 0.0;
        if t <= origin {
            out.values[0] = w;
        } else {
            out.times.push(t);
            out.values.push(w);
        }
    }
    Ok(out)
}

/// Product of per-mark weights, each from its own `(num, den, driver)`.
pub fn ld_weight(
    marks: &[(CumulativeHazard, CumulativeHazard, Vec<f64>)],
    bandwidth: f64,
    policy: ZeroDenominatorPolicy,
    scheme: Scheme,
    origin: f64,
) -> Result<WeightTrajectory> {
    let parts = marks
        .iter()
        .map(|(num, den, drv)| {
            let mut th = ThetaRule::Smoothed(SmoothedTheta::new(bandwidth, policy)?);
            solve_weight(WeightKind::LdSeparable, num, den, drv, &mut th, scheme, origin)
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&WeightTrajectory> = parts.iter().collect();
    let mut w = WeightTrajectory::product(&refs, 1.0);
    w.kind = WeightKind::LdSeparable;
    if w.times.is_empty() {
        w = WeightTrajectory::constant(WeightKind::LdSeparable, origin, 1.0);
    }
    Ok(w)
}

/// Empirical treatment probabilities within baseline strata.
#[derive(Debug, Clone, Default)]
pub struct Propensity {
    strata: BTreeMap<Vec<i64>, [u64; 2]>,
    marginal: [u64; 2],
}

impl Propensity {
    pub fn fit(set: &HistorySet) -> Self {
        let mut p = Propensity::default();
        for h in &set.histories {
            p.strata.entry(h.l0.clone()).or_default()[h.a as usize] += 1;
            p.marginal[h.a as usize] += 1;
        }
        p
    }

    pub fn conditional(&self, a: u8, l0: &[i64]) -> f64 {
        self.strata
            .get(l0)
            .map_or(0.0, |c| c[a as usize] as f64 / (c[0] + c[1]) as f64)
    }

    pub fn marginal(&self, a: u8) -> f64 {
        self.marginal[a as usize] as f64 / (self.marginal[0] + self.marginal[1]) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightOptions {
    /// Window for the smoothed hazard ratio; `None` uses five grid intervals.
    pub bandwidth: Option<f64>,
    pub zero_denominator: ZeroDenominatorPolicy,
    pub scheme: Scheme,
    pub rank_policy: RankPolicy,
    /// Multiply death increments of separable-survival estimates by the
    /// smoothed `theta^D` in the risk-set engine too.
    pub theta_in_risk_set: bool,
}

impl Default for WeightOptions {
    fn default() -> Self {
        WeightOptions {
            bandwidth: None,
            zero_denominator: ZeroDenominatorPolicy::CarryLast,
            scheme: Scheme::ProductLimit,
            rank_policy: RankPolicy::DropDependent,
            theta_in_risk_set: true,
        }
    }
}

impl WeightOptions {
    pub fn bandwidth_for(&self, set: &HistorySet) -> f64 {
        self.bandwidth
            .unwrap_or_else(|| 5.0 * set.grid.map_or((set.end - set.origin) / 10.0, |g| g.delta_t))
    }
}

/// All regressors of the data, as in the fully adjusted hazard models.
pub fn full_regressors(set: &HistorySet) -> Vec<Regressor> {
    let mut r = vec![Regressor::Intercept, Regressor::Treatment];
    r.extend((0..set.l0_names.len()).map(Regressor::Baseline));
    r.extend((0..set.l_names.len()).map(Regressor::Covariate));
    r.push(Regressor::RecurrentCount);
    r
}

pub fn marginal_regressors() -> Vec<Regressor> {
    vec![Regressor::Intercept, Regressor::Treatment]
}

/// Hazard models a weight recipe needs.
#[derive(Debug, Clone)]
pub struct FittedModels {
    pub propensity: Propensity,
    pub censor_full: Option<AdditiveHazardModel>,
    pub censor_marginal: Option<AdditiveHazardModel>,
    pub death_full: Option<AdditiveHazardModel>,
    pub death_marginal: Option<AdditiveHazardModel>,
    /// Per mark value of the `L_D` block.
    pub marks: Vec<AdditiveHazardModel>,
    /// Initial `L_D` value frequencies by `(L0, A)`.
    pub ld_baseline: BTreeMap<(Vec<i64>, u8), BTreeMap<Vec<i64>, u64>>,
}

fn fit_or_none(
    set: &HistorySet,
    kind: &EventKind,
    regs: &[Regressor],
    policy: RankPolicy,
) -> Result<Option<AdditiveHazardModel>> {
    match fit_additive(set, kind, regs, policy) {
        Ok(m) => Ok(Some(m)),
        Err(Error::NoEvents { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn ld_block(h: &ContinuousHistory, l_d: &[usize], t: f64) -> Vec<i64> {
    h.covariates_at(t)
        .map_or_else(Vec::new, |c| l_d.iter().map(|&i| c[i]).collect())
}

/// Fits the hazard models of the Table-of-weights recipe for `estimand`.
pub fn fit_models(set: &HistorySet, estimand: &Estimand, opts: &WeightOptions) -> Result<FittedModels> {
    let full = full_regressors(set);
    let marg = marginal_regressors();
    let pol = opts.rank_policy;
    let mut m = FittedModels {
        propensity: Propensity::fit(set),
        censor_full: fit_or_none(set, &EventKind::Censor, &full, pol)?,
        censor_marginal: fit_or_none(set, &EventKind::Censor, &marg, pol)?,
        death_full: None,
        death_marginal: None,
        marks: Vec::new(),
        ld_baseline: BTreeMap::new(),
    };
    let needs_death = matches!(
        estimand,
        Estimand::ControlledDirect { .. } | Estimand::Separable { .. } | Estimand::SeparableSurvival { .. }
    );
    if needs_death {
        m.death_full = fit_or_none(set, &EventKind::Death, &full, pol)?;
    }
    if let Estimand::ControlledDirect { .. } = estimand {
        m.death_marginal = fit_or_none(set, &EventKind::Death, &marg, pol)?;
    }
    let (a_y, a_d) = estimand.arms();
    if a_y != a_d {
        let l_d = set.l_d.as_ref().ok_or(Error::MissingLdPartition)?;
        if !l_d.is_empty() {
            let mut values: Vec<Vec<i64>> = Vec::new();
            for h in &set.histories {
                let exit = h.exit_time(set.end);
                let mut prev = ld_block(h, l_d, set.origin);
                m.ld_baseline
                    .entry((h.l0.clone(), h.a))
                    .or_default()
                    .entry(prev.clone())
                    .and_modify(|c| *c += 1)
                    .or_insert(1);
                for s in h
                    .covariate_steps
                    .iter()
                    .filter(|s| s.time > set.origin && s.time <= exit)
                {
                    let b: Vec<i64> = l_d.iter().map(|&i| s.values[i]).collect();
                    if b != prev && !values.contains(&b) {
                        values.push(b.clone());
                    }
                    prev = b;
                }
            }
            values.sort();
            for v in values {
                let kind = EventKind::Mark {
                    block: l_d.clone(),
                    value: v,
                };
                if let Some(model) = fit_or_none(set, &kind, &full, pol)? {
                    m.marks.push(model);
                }
            }
        }
    }
    Ok(m)
}

/// Weights of one individual for the estimator integrators.
#[derive(Debug, Clone)]
pub struct IndividualWeights {
    /// Risk-set weight `R`.
    pub r: WeightTrajectory,
    /// Hajek / Horvitz-Thompson weight `R-bar`.
    pub r_bar: WeightTrajectory,
    /// Death-integrator weight `R^D`, 0 or 1.
    pub r_d: f64,
    /// Smoothed `theta^D` at the individual's observed death, if any.
    pub theta_d: Option<f64>,
}

fn evaluate(model: &Option<AdditiveHazardModel>, h: &ContinuousHistory, arm: u8, end: f64) -> CumulativeHazard {
    model.as_ref().map(|m| m.evaluate(h, arm, end)).unwrap_or_default()
}

/// Builds per-individual weights for individuals in arm `a_y` of `estimand`;
/// other individuals get `None`.
pub fn assemble_weights(
    estimand: &Estimand,
    models: &FittedModels,
    set: &HistorySet,
    opts: &WeightOptions,
) -> Result<Vec<Option<IndividualWeights>>> {
    if estimand.is_composite() {
        return Err(Error::Unsupported {
            spec: estimand.name().into(),
            engine: "continuous".into(),
        });
    }
    let (a_y, a_d) = estimand.arms();
    if a_y != a_d && set.l_d.is_none() {
        return Err(Error::MissingLdPartition);
    }
    let b = opts.bandwidth_for(set);
    let (origin, end) = (set.origin, set.end);
    let smoothed = || SmoothedTheta::new(b, opts.zero_denominator).map(ThetaRule::Smoothed);
    set.histories
        .iter()
        .map(|h| {
            if h.a != a_y {
                return Ok(None);
            }
            let censor_driver: Vec<f64> = h.observed_censor().into_iter().collect();
            let death_driver: Vec<f64> = h.observed_death().into_iter().collect();
            let den_c = evaluate(&models.censor_full, h, h.a, end);
            let num_c = evaluate(&models.censor_marginal, h, h.a, end);
            let w_c = solve_weight(
                WeightKind::CensorStabilized,
                &num_c,
                &den_c,
                &censor_driver,
                &mut smoothed()?,
                opts.scheme,
                origin,
            )?;
            let w_c_bar = solve_weight(
                WeightKind::CensorUnstabilized,
                &CumulativeHazard::default(),
                &den_c,
                &censor_driver,
                &mut ThetaRule::Zero,
                opts.scheme,
                origin,
            )?;
            let pi = models.propensity.conditional(h.a, &h.l0);
            if pi == 0.0 {
                return Err(Error::Positivity {
                    k: 0,
                    stratum: format!("no individual with A={} in L0={:?}", h.a, h.l0),
                });
            }
            let w_a = models.propensity.marginal(h.a) / pi;
            let w_a_bar = 1.0 / pi;
            let mut theta_d = None;
            let (r, r_bar, r_d) = match estimand {
                Estimand::TotalEffect { .. } | Estimand::TotalEffectSurvival { .. } => (
                    WeightTrajectory::product(&[&w_c], w_a),
                    WeightTrajectory::product(&[&w_c_bar], w_a_bar),
                    1.0,
                ),
                Estimand::ControlledDirect { .. } => {
                    let den_d = evaluate(&models.death_full, h, h.a, end);
                    let num_d = evaluate(&models.death_marginal, h, h.a, end);
                    let w_d = solve_weight(
                        WeightKind::DeathStabilized,
                        &num_d,
                        &den_d,
                        &death_driver,
                        &mut smoothed()?,
                        opts.scheme,
                        origin,
                    )?;
                    let w_d_bar = solve_weight(
                        WeightKind::DeathUnstabilized,
                        &CumulativeHazard::default(),
                        &den_d,
                        &death_driver,
                        &mut ThetaRule::Zero,
                        opts.scheme,
                        origin,
                    )?;
                    (
                        WeightTrajectory::product(&[&w_c, &w_d], w_a),
                        WeightTrajectory::product(&[&w_c_bar, &w_d_bar], w_a_bar),
                        0.0,
                    )
                }
                Estimand::Separable { .. } | Estimand::SeparableSurvival { .. } => {
                    let den_d = evaluate(&models.death_full, h, a_y, end);
                    let num_d = evaluate(&models.death_full, h, a_d, end);
                    let mut th = smoothed()?;
                    let w_d = solve_weight(
                        WeightKind::DeathSeparable,
                        &num_d,
                        &den_d,
                        &death_driver,
                        &mut th,
                        opts.scheme,
                        origin,
                    )?;
                    if let Some(t) = h.observed_death() {
                        theta_d = Some(match smoothed()? {
                            ThetaRule::Smoothed(mut s) => s.at(&num_d, &den_d, t)?,
                            ThetaRule::Zero => 0.0,
                        });
                    }
                    let w_ld = separable_ld(models, set, h, (a_y, a_d), b, opts)?;
                    (
                        WeightTrajectory::product(&[&w_c, &w_d, &w_ld], w_a),
                        WeightTrajectory::product(&[&w_c_bar, &w_d, &w_ld], w_a_bar),
                        1.0,
                    )
                }
                _ => unreachable!("composites rejected above"),
            };
            Ok(Some(IndividualWeights { r, r_bar, r_d, theta_d }))
        })
        .collect()
}

fn separable_ld(
    models: &FittedModels,
    set: &HistorySet,
    h: &ContinuousHistory,
    (a_y, a_d): (u8, u8),
    b: f64,
    opts: &WeightOptions,
) -> Result<WeightTrajectory> {
    let origin = set.origin;
    let (Some(l_d), false) = (
        set.l_d.as_ref(),
        models.marks.is_empty() && models.ld_baseline.is_empty(),
    ) else {
        return Ok(WeightTrajectory::constant(WeightKind::LdSeparable, origin, 1.0));
    };
    let start = ld_block(h, l_d, origin);
    let freq = |a: u8| {
        models.ld_baseline.get(&(h.l0.clone(), a)).map_or(0.0, |m| {
            let tot: u64 = m.values().sum();
            m.get(&start).copied().unwrap_or(0) as f64 / tot as f64
        })
    };
    let (num0, den0) = (freq(a_d), freq(a_y));
    if den0 == 0.0 {
        return Err(Error::Positivity {
            k: 0,
            stratum: format!("initial L_D {start:?} unobserved in arm {a_y}"),
        });
    }
    let exit = h.exit_time(set.end);
    let marks = models
        .marks
        .iter()
        .map(|m| {
            let EventKind::Mark { value, .. } = &m.kind else {
                unreachable!("mark models only")
            };
            let mut prev = start.clone();
            let mut drv = Vec::new();
            for s in h.covariate_steps.iter().filter(|s| s.time > origin && s.time <= exit) {
                let bv: Vec<i64> = l_d.iter().map(|&i| s.values[i]).collect();
                if &bv == value && prev != bv {
                    drv.push(s.time);
                }
                prev = bv;
            }
            (m.evaluate(h, a_d, set.end), m.evaluate(h, a_y, set.end), drv)
        })
        .collect::<Vec<_>>();
    let w = ld_weight(&marks, b, opts.zero_denominator, opts.scheme, origin)?;
    let ratio = if num0 == den0 { 1.0 } else { num0 / den0 };
    Ok(WeightTrajectory {
        kind: WeightKind::LdSeparable,
        ..WeightTrajectory::product(&[&w], ratio)
    })
}
