use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Covariate vector in force from `time` on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateStep {
    pub time: f64,
    pub values: Vec<i64>,
}

/// Counting-process view of one individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousHistory {
    pub id: String,
    pub a: u8,
    pub arms: Option<(u8, u8)>,
    pub l0: Vec<i64>,
    pub recurrent_times: Vec<f64>,
    pub death_time: Option<f64>,
    pub censor_time: Option<f64>,
    /// Sorted by time; the first step sits at the origin when covariates exist.
    pub covariate_steps: Vec<CovariateStep>,
}

impl ContinuousHistory {
    pub fn a_y(&self) -> u8 {
        self.arms.map_or(self.a, |(ay, _)| ay)
    }

    pub fn a_d(&self) -> u8 {
        self.arms.map_or(self.a, |(_, ad)| ad)
    }

    /// Death time if it is observed, i.e. strictly before censoring.
    pub fn observed_death(&self) -> Option<f64> {
        match (self.death_time, self.censor_time) {
            (Some(t), Some(c)) if t >= c => None,
            (t, _) => t,
        }
    }

    /// Censoring time if it is observed (ties with death go to censoring).
    pub fn observed_censor(&self) -> Option<f64> {
        match (self.death_time, self.censor_time) {
            (Some(t), Some(c)) if t < c => None,
            (_, c) => c,
        }
    }

    /// Last time at which the individual is at risk: `min(T^D, C, end)`.
    pub fn exit_time(&self, end: f64) -> f64 {
        let mut e = end;
        if let Some(t) = self.death_time {
            e = e.min(t);
        }
        if let Some(c) = self.censor_time {
            e = e.min(c);
        }
        e
    }

    /// Covariate values in force at `t` (last step at or before `t`).
    pub fn covariates_at(&self, t: f64) -> Option<&[i64]> {
        let idx = self.covariate_steps.partition_point(|s| s.time <= t);
        (idx > 0).then(|| self.covariate_steps[idx - 1].values.as_slice())
    }

    /// Covariate values just before `t`.
    pub fn covariates_before(&self, t: f64) -> Option<&[i64]> {
        let idx = self.covariate_steps.partition_point(|s| s.time < t);
        (idx > 0).then(|| self.covariate_steps[idx - 1].values.as_slice())
    }

    pub(crate) fn validate(&self, origin: f64, n_l0: usize, n_l: usize) -> Result<()> {
        let bad = |reason: String| Error::InvalidHistory {
            id: self.id.clone(),
            reason,
        };
        if self.a > 1 || self.arms.is_some_and(|(x, y)| x > 1 || y > 1) {
            return Err(bad("treatment must be 0 or 1".into()));
        }
        if self.l0.len() != n_l0 {
            return Err(bad("wrong number of baseline covariates".into()));
        }
        let stop = match (self.death_time, self.censor_time) {
            (Some(t), Some(c)) => t.min(c),
            (Some(t), None) => t,
            (None, Some(c)) => c,
            (None, None) => f64::INFINITY,
        };
        for t in [self.death_time, self.censor_time].into_iter().flatten() {
            if !(t > origin) || !t.is_finite() {
                return Err(bad(format!("event time {t} not after origin")));
            }
        }
        let mut prev = origin;
        for &t in &self.recurrent_times {
            if !(t > prev) || !t.is_finite() {
                return Err(bad("recurrent times must be strictly increasing after origin".into()));
            }
            if t > stop {
                return Err(bad(format!("recurrent event at {t} after exit {stop}")));
            }
            prev = t;
        }
        if n_l > 0 {
            match self.covariate_steps.first() {
                Some(s) if s.time == origin => {}
                _ => return Err(bad("covariate process must start at the origin".into())),
            }
        }
        let mut prev = f64::NEG_INFINITY;
        for s in &self.covariate_steps {
            if s.values.len() != n_l || !(s.time > prev) || s.time < origin {
                return Err(bad("covariate steps must be increasing with full vectors".into()));
            }
            prev = s.time;
        }
        Ok(())
    }
}

/// Continuous-time cohort with a follow-up window `(origin, end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySet {
    pub origin: f64,
    pub end: f64,
    /// Discretisation the data were recorded on, if any; sets the default bandwidth.
    pub grid: Option<TimeGrid>,
    pub l0_names: Vec<String>,
    pub l_names: Vec<String>,
    pub l_d: Option<Vec<usize>>,
    pub histories: Vec<ContinuousHistory>,
}

impl HistorySet {
    pub fn validate(&self) -> Result<()> {
        if !(self.end > self.origin) {
            return Err(Error::InvalidGrid("follow-up end must exceed origin".into()));
        }
        for h in &self.histories {
            h.validate(self.origin, self.l0_names.len(), self.l_names.len())?;
            let last = [h.death_time, h.censor_time]
                .into_iter()
                .flatten()
                .chain(h.recurrent_times.last().copied())
                .fold(f64::NEG_INFINITY, f64::max);
            if last > self.end {
                return Err(Error::InvalidHistory {
                    id: h.id.clone(),
                    reason: format!("event at {last} beyond follow-up end {}", self.end),
                });
            }
        }
        Ok(())
    }

    pub fn declare_l_d(&mut self, names: &[String]) -> Result<()> {
        self.l_d = Some(super::panel::resolve_names(&self.l_names, names)?);
        Ok(())
    }

    pub fn select(&self, idx: &[usize]) -> HistorySet {
        HistorySet {
            origin: self.origin,
            end: self.end,
            grid: self.grid,
            l0_names: self.l0_names.clone(),
            l_names: self.l_names.clone(),
            l_d: self.l_d.clone(),
            histories: idx.iter().map(|&i| self.histories[i].clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.histories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.histories.is_empty()
    }
}
