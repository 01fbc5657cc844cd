//! Conversion between interval panels and counting-process histories.
//!
//! Within interval `k = (t_{k-1}, t_k]` a panel is placed as: censoring at
//! `t_{k-1} + Δ/4`, death at `t_{k-1} + Δ/2`, recurrent events in
//! `(t_{k-1} + Δ/2, t_k)` and the covariate update at `t_k`. Recurrent events
//! recorded in a death interval go before the death. This keeps the `C, D, ΔY, L`
//! order visible to estimators that work with left limits, and `discretize`
//! inverts it exactly.

use super::history::{ContinuousHistory, CovariateStep, HistorySet};
use super::panel::{Cohort, IntervalPanel};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

pub fn to_continuous(p: &IntervalPanel, grid: &TimeGrid) -> ContinuousHistory {
    let dt = grid.delta_t;
    let start = |k: usize| grid.time(k - 1);
    let censor = p.censor_index();
    let death = p.death_index();
    let last = censor.unwrap_or(p.k_max() + 1);
    let mut recurrent_times = Vec::new();
    for k in 1..last {
        let m = p.dy(k).unwrap_or(0);
        for j in 0..m {
            let frac = (j + 1) as f64 / (m + 1) as f64;
            let offset = if death == Some(k) {
                0.25 + 0.25 * frac
            } else {
                0.5 + 0.5 * frac
            };
            recurrent_times.push(start(k) + dt * offset);
        }
    }
    let mut covariate_steps: Vec<CovariateStep> = Vec::new();
    for k in 0..last {
        if let Some(values) = &p.l[k] {
            if covariate_steps.last().is_none_or(|s| &s.values != values) {
                covariate_steps.push(CovariateStep {
                    time: grid.time(k),
                    values: values.clone(),
                });
            }
        }
    }
    ContinuousHistory {
        id: p.id.clone(),
        a: p.a,
        arms: p.arms,
        l0: p.l0.clone(),
        recurrent_times,
        death_time: death.map(|k| start(k) + 0.5 * dt),
        censor_time: censor.map(|k| start(k) + 0.25 * dt),
        covariate_steps,
    }
}

/// Discretises a history; the flag is set when an interval holds two or more
/// recurrent events (multiplicity is kept in the increment).
pub fn discretize(h: &ContinuousHistory, grid: &TimeGrid, n_l: usize) -> Result<(IntervalPanel, bool)> {
    let end = grid.end();
    let latest = [h.death_time, h.censor_time]
        .into_iter()
        .flatten()
        .chain(h.recurrent_times.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    if latest > end {
        return Err(Error::InvalidHistory {
            id: h.id.clone(),
            reason: format!("event at {latest} beyond grid end {end}"),
        });
    }
    let censor_k = h.observed_censor().map(|c| grid.interval_of(c));
    let death = h.observed_death();
    let death_k = death.map(|t| grid.interval_of(t));
    let counted: Vec<f64> = h
        .recurrent_times
        .iter()
        .copied()
        .filter(|&r| death.is_none_or(|td| r < td))
        .collect();
    let n = grid.k_max + 1;
    let mut p = IntervalPanel {
        id: h.id.clone(),
        a: h.a,
        arms: h.arms,
        l0: h.l0.clone(),
        l: vec![None; n],
        y: vec![None; n],
        d: vec![None; n],
        c: vec![0; n],
    };
    let mut coarse = false;
    let mut idx = 0usize;
    for k in 0..n {
        if censor_k.is_some_and(|ck| k >= ck) {
            p.c[k] = 1;
            continue;
        }
        let tk = grid.time(k);
        let before = idx;
        while idx < counted.len() && counted[idx] <= tk {
            idx += 1;
        }
        if idx - before > 1 {
            coarse = true;
        }
        p.y[k] = Some(idx as u32);
        p.d[k] = Some(u8::from(death_k.is_some_and(|dk| k >= dk)));
        p.l[k] = Some(match h.covariates_at(tk) {
            Some(v) => v.to_vec(),
            None if n_l == 0 => Vec::new(),
            None => {
                return Err(Error::InvalidHistory {
                    id: h.id.clone(),
                    reason: "covariates undefined at a grid point".into(),
                })
            }
        });
    }
    Ok((p, coarse))
}

impl Cohort {
    pub fn to_histories(&self) -> HistorySet {
        HistorySet {
            origin: self.grid.origin,
            end: self.grid.end(),
            grid: Some(self.grid),
            l0_names: self.l0_names.clone(),
            l_names: self.l_names.clone(),
            l_d: self.l_d.clone(),
            histories: self.panels.iter().map(|p| to_continuous(p, &self.grid)).collect(),
        }
    }
}

impl HistorySet {
    /// Discretises every history; also returns how many were flagged as too coarse.
    pub fn to_cohort(&self, grid: &TimeGrid) -> Result<(Cohort, usize)> {
        let mut coarse = 0;
        let mut panels = Vec::with_capacity(self.histories.len());
        for h in &self.histories {
            let (p, flag) = discretize(h, grid, self.l_names.len())?;
            coarse += usize::from(flag);
            panels.push(p);
        }
        let mut cohort = Cohort::new(*grid, self.l0_names.clone(), self.l_names.clone(), panels)?;
        cohort.l_d = self.l_d.clone();
        Ok((cohort, coarse))
    }
}
