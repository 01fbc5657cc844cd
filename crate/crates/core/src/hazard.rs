//! Aalen additive-hazard least squares and windowed hazard ratios.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{ContinuousHistory, HistorySet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Censor,
    Death,
    Recurrent,
    /// Jumps of the covariate block `block` into `value`.
    Mark {
        block: Vec<usize>,
        value: Vec<i64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regressor {
    Intercept,
    Treatment,
    Baseline(usize),
    /// Left limit of a time-varying covariate.
    Covariate(usize),
    /// `Y_{t-}`.
    RecurrentCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankPolicy {
    /// Give linearly dependent columns a zero increment and keep the rest.
    #[default]
    DropDependent,
    /// Skip the whole increment.
    Skip,
    Strict,
}

/// Cumulative regression `B(t)` stored as increments at the event times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveHazardModel {
    pub kind: EventKind,
    pub regressors: Vec<Regressor>,
    pub times: Vec<f64>,
    /// Row-major `times.len() x regressors.len()`.
    pub increments: Vec<f64>,
    /// Event times with at least one dropped column, or skipped entirely.
    pub rank_deficient: Vec<f64>,
}

/// One individual's hazard increments at the model's event times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CumulativeHazard {
    pub times: Vec<f64>,
    pub increments: Vec<f64>,
}

impl CumulativeHazard {
    pub fn value_at(&self, t: f64) -> f64 {
        let n = self.times.partition_point(|&s| s <= t);
        self.increments[..n].iter().sum()
    }

    /// `prod (1 - dA)` over jumps up to `t`.
    pub fn survival_at(&self, t: f64) -> f64 {
        let n = self.times.partition_point(|&s| s <= t);
        self.increments[..n].iter().map(|d| 1.0 - d).product()
    }
}

/// Row of regressors for one individual just before a time.
pub(crate) struct Cursor<'a> {
    h: &'a ContinuousHistory,
    y: usize,
    cov: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(h: &'a ContinuousHistory) -> Self {
        Cursor { h, y: 0, cov: 0 }
    }

    /// Advances to the left limit at `s`; calls must be nondecreasing in `s`.
    pub fn seek(&mut self, s: f64) {
        let rt = &self.h.recurrent_times;
        while self.y < rt.len() && rt[self.y] < s {
            self.y += 1;
        }
        let st = &self.h.covariate_steps;
        while self.cov < st.len() && st[self.cov].time < s {
            self.cov += 1;
        }
    }

    pub fn count(&self) -> usize {
        self.y
    }

    pub fn covariates(&self) -> &'a [i64] {
        if self.cov == 0 {
            &[]
        } else {
            &self.h.covariate_steps[self.cov - 1].values
        }
    }
}

fn fill_row(regs: &[Regressor], h: &ContinuousHistory, arm: u8, y: usize, cov: &[i64], out: &mut [f64]) {
    for (o, r) in out.iter_mut().zip(regs) {
        *o = match *r {
            Regressor::Intercept => 1.0,
            Regressor::Treatment => arm as f64,
            Regressor::Baseline(i) => h.l0[i] as f64,
            Regressor::Covariate(i) => cov[i] as f64,
            Regressor::RecurrentCount => y as f64,
        };
    }
}

fn block_of(cov: &[i64], block: &[usize]) -> Vec<i64> {
    block.iter().map(|&i| cov.get(i).copied().unwrap_or(i64::MIN)).collect()
}

impl EventKind {
    fn events(&self, h: &ContinuousHistory, origin: f64, end: f64) -> Vec<f64> {
        let exit = h.exit_time(end);
        match self {
            EventKind::Recurrent => h.recurrent_times.iter().copied().filter(|&t| t <= exit).collect(),
            EventKind::Death => h.observed_death().filter(|&t| t <= end).into_iter().collect(),
            EventKind::Censor => h.observed_censor().filter(|&t| t <= end).into_iter().collect(),
            EventKind::Mark { block, value } => {
                let mut prev = None;
                let mut out = Vec::new();
                for s in &h.covariate_steps {
                    let b = block_of(&s.values, block);
                    if s.time > origin && s.time <= exit && &b == value && prev.as_ref() != Some(value) {
                        out.push(s.time);
                    }
                    prev = Some(b);
                }
                out
            }
        }
    }

    /// At risk just after `tau` (for any later left limit), given the exit time.
    fn at_risk_after(&self, h: &ContinuousHistory, tau: f64, exit: f64) -> bool {
        if tau >= exit {
            return false;
        }
        match self {
            EventKind::Mark { block, value } => h.covariates_at(tau).is_none_or(|c| &block_of(c, block) != value),
            _ => true,
        }
    }
}

impl AdditiveHazardModel {
    pub fn p(&self) -> usize {
        self.regressors.len()
    }

    pub fn increment(&self, idx: usize) -> &[f64] {
        let p = self.p();
        &self.increments[idx * p..(idx + 1) * p]
    }

    /// Individual increments `x(s-)' dB(s)` at event times where the
    /// individual is at risk, with the treatment regressor set to `arm`.
    pub fn evaluate(&self, h: &ContinuousHistory, arm: u8, end: f64) -> CumulativeHazard {
        let exit = h.exit_time(end);
        let mut cur = Cursor::new(h);
        let mut row = vec![0.0; self.p()];
        let mut out = CumulativeHazard::default();
        for (idx, &s) in self.times.iter().enumerate() {
            if s > exit {
                break;
            }
            cur.seek(s);
            if let EventKind::Mark { block, value } = &self.kind {
                if &block_of(cur.covariates(), block) == value {
                    continue;
                }
            }
            fill_row(&self.regressors, h, arm, cur.count(), cur.covariates(), &mut row);
            let db = self.increment(idx);
            out.times.push(s);
            out.increments.push(row.iter().zip(db).map(|(x, b)| x * b).sum());
        }
        out
    }

    /// Cumulative coefficient paths as CSV: `time,<regressor>...`.
    pub fn write_paths<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["time".to_string()];
        header.extend(self.regressors.iter().map(|r| format!("{r:?}").to_lowercase()));
        out.write_record(&header)?;
        let mut b = vec![0.0; self.p()];
        for (idx, t) in self.times.iter().enumerate() {
            for (bj, d) in b.iter_mut().zip(self.increment(idx)) {
                *bj += d;
            }
            let mut rec = vec![t.to_string()];
            rec.extend(b.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::Io {
            path: "<csv>".into(),
            source: e,
        })?;
        Ok(())
    }
}

/// Least-squares solve of `A x = b` through `LDL'`, zeroing columns whose
/// pivot vanishes. Returns whether any column was dropped.
fn solve_ldl(a: &[f64], b: &[f64], p: usize, x: &mut [f64]) -> bool {
    let mut l = vec![0.0; p * p];
    let mut d = vec![0.0; p];
    let mut dropped = false;
    for j in 0..p {
        let mut dj = a[j * p + j];
        for k in 0..j {
            dj -= l[j * p + k] * l[j * p + k] * d[k];
        }
        if !(dj > 1e-9 * a[j * p + j]) {
            dropped = true;
            continue;
        }
        d[j] = dj;
        l[j * p + j] = 1.0;
        for i in j + 1..p {
            let mut v = a[i * p + j];
            for k in 0..j {
                v -= l[i * p + k] * l[j * p + k] * d[k];
            }
            l[i * p + j] = v / dj;
        }
    }
    let mut z = vec![0.0; p];
    for j in 0..p {
        let mut v = b[j];
        for k in 0..j {
            v -= l[j * p + k] * z[k];
        }
        z[j] = v;
    }
    for j in (0..p).rev() {
        if d[j] == 0.0 {
            x[j] = 0.0;
            continue;
        }
        let mut v = z[j] / d[j];
        for i in j + 1..p {
            v -= l[i * p + j] * x[i];
        }
        x[j] = v;
    }
    dropped
}

/// Fits `dB(t) = (X'X)^{-1} X' dN(t)` at every event time of `kind`, with
/// at-risk rows evaluated at left limits. `X'X` is updated incrementally as
/// rows change, which is exact for integer-valued regressors.
pub fn fit_additive(
    set: &HistorySet,
    kind: &EventKind,
    regressors: &[Regressor],
    policy: RankPolicy,
) -> Result<AdditiveHazardModel> {
    let p = regressors.len();
    let n_l = set.l_names.len();
    for r in regressors {
        let ok = match *r {
            Regressor::Baseline(i) => i < set.l0_names.len(),
            Regressor::Covariate(i) => i < n_l,
            _ => true,
        };
        if !ok {
            return Err(Error::InvalidArgument(format!("regressor {r:?} out of range")));
        }
    }
    let (origin, end) = (set.origin, set.end);
    let mut events: Vec<(f64, usize)> = Vec::new();
    let mut changes: Vec<(f64, usize)> = Vec::new();
    for (i, h) in set.histories.iter().enumerate() {
        events.extend(kind.events(h, origin, end).into_iter().map(|t| (t, i)));
        let exit = h.exit_time(end);
        changes.extend(h.recurrent_times.iter().filter(|&&t| t < exit).map(|&t| (t, i)));
        changes.extend(
            h.covariate_steps
                .iter()
                .filter(|s| s.time > origin && s.time < exit)
                .map(|s| (s.time, i)),
        );
        changes.push((exit, i));
    }
    if events.is_empty() {
        return Err(Error::NoEvents {
            kind: format!("{kind:?}").to_lowercase(),
        });
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    changes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let n = set.histories.len();
    let mut rows = vec![0.0; n * p];
    let mut risk = vec![false; n];
    let mut xtx = vec![0.0; p * p];
    let add = |xtx: &mut [f64], r: &[f64], sign: f64| {
        for a in 0..p {
            for b in 0..p {
                xtx[a * p + b] += sign * r[a] * r[b];
            }
        }
    };
    let refresh = |i: usize, tau: f64, rows: &mut [f64], risk: &mut [bool]| {
        let h = &set.histories[i];
        let exit = h.exit_time(end);
        risk[i] = kind.at_risk_after(h, tau, exit);
        let y = h.recurrent_times.partition_point(|&t| t <= tau);
        let cov = h.covariates_at(tau).unwrap_or(&[]);
        fill_row(regressors, h, h.a, y, cov, &mut rows[i * p..(i + 1) * p]);
    };
    for i in 0..n {
        refresh(i, origin, &mut rows, &mut risk);
        if risk[i] {
            add(&mut xtx, &rows[i * p..(i + 1) * p], 1.0);
        }
    }

    let mut model = AdditiveHazardModel {
        kind: kind.clone(),
        regressors: regressors.to_vec(),
        times: Vec::new(),
        increments: Vec::new(),
        rank_deficient: Vec::new(),
    };
    let (mut ci, mut ei) = (0, 0);
    let mut rhs = vec![0.0; p];
    let mut x = vec![0.0; p];
    while ei < events.len() {
        let s = events[ei].0;
        while ci < changes.len() && changes[ci].0 < s {
            let i = changes[ci].1;
            if risk[i] {
                add(&mut xtx, &rows[i * p..(i + 1) * p], -1.0);
            }
            refresh(i, changes[ci].0, &mut rows, &mut risk);
            if risk[i] {
                add(&mut xtx, &rows[i * p..(i + 1) * p], 1.0);
            }
            ci += 1;
        }
        rhs.iter_mut().for_each(|v| *v = 0.0);
        while ei < events.len() && events[ei].0 == s {
            let i = events[ei].1;
            for (r, v) in rhs.iter_mut().zip(&rows[i * p..(i + 1) * p]) {
                *r += v;
            }
            ei += 1;
        }
        let dropped = solve_ldl(&xtx, &rhs, p, &mut x);
        if dropped {
            log::debug!("rank-deficient design at t={s} for {kind:?}");
            model.rank_deficient.push(s);
            match policy {
                RankPolicy::Strict => return Err(Error::RankDeficient { time: s }),
                RankPolicy::Skip => continue,
                RankPolicy::DropDependent => {}
            }
        }
        model.times.push(s);
        model.increments.extend_from_slice(&x);
    }
    Ok(model)
}

/// Intercept-only fit, i.e. the Nelson-Aalen estimator.
pub fn nelson_aalen(set: &HistorySet, kind: &EventKind) -> Result<AdditiveHazardModel> {
    fit_additive(set, kind, &[Regressor::Intercept], RankPolicy::Strict)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroDenominatorPolicy {
    #[default]
    Error,
    CarryLast,
}

/// Windowed ratio `(A*_t - A*_{t-b}) / (A_t - A_{t-b})` of two individual
/// cumulative hazards; exactly 1 when the windows agree.
#[derive(Debug, Clone)]
pub struct SmoothedTheta {
    pub bandwidth: f64,
    pub policy: ZeroDenominatorPolicy,
    last: Option<f64>,
}

impl SmoothedTheta {
    pub fn new(bandwidth: f64, policy: ZeroDenominatorPolicy) -> Result<Self> {
        if !(bandwidth > 0.0) {
            return Err(Error::InvalidArgument("bandwidth must be positive".into()));
        }
        Ok(SmoothedTheta {
            bandwidth,
            policy,
            last: None,
        })
    }

    pub fn at(&mut self, num: &CumulativeHazard, den: &CumulativeHazard, t: f64) -> Result<f64> {
        let window = |c: &CumulativeHazard| {
            let lo = c.times.partition_point(|&s| s <= t - self.bandwidth);
            let hi = c.times.partition_point(|&s| s <= t);
            c.increments[lo..hi].iter().sum::<f64>()
        };
        let (a, b) = (window(num), window(den));
        if a == b {
            self.last = Some(1.0);
            return Ok(1.0);
        }
        if b == 0.0 {
            return match (self.policy, self.last) {
                (ZeroDenominatorPolicy::CarryLast, Some(v)) => Ok(v),
                _ => Err(Error::ZeroDenominator { time: t }),
            };
        }
        let r = a / b;
        self.last = Some(r);
        Ok(r)
    }
}

/// Convenience form of `SmoothedTheta::at` with the error policy.
pub fn smoothed_theta(num: &CumulativeHazard, den: &CumulativeHazard, b: f64, t: f64) -> Result<f64> {
    SmoothedTheta::new(b, ZeroDenominatorPolicy::Error)?.at(num, den, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(id: usize, a: u8, rec: &[f64], death: Option<f64>, censor: Option<f64>) -> ContinuousHistory {
        ContinuousHistory {
            id: id.to_string(),
            a,
            arms: None,
            l0: vec![],
            recurrent_times: rec.to_vec(),
            death_time: death,
            censor_time: censor,
            covariate_steps: vec![],
        }
    }

    fn set(h: Vec<ContinuousHistory>) -> HistorySet {
        HistorySet {
            origin: 0.0,
            end: 10.0,
            grid: None,
            l0_names: vec![],
            l_names: vec![],
            l_d: None,
            histories: h,
        }
    }

    #[test]
    fn intercept_only_is_nelson_aalen() {
        let s = set(vec![
            hist(1, 0, &[], Some(1.0), None),
            hist(2, 0, &[], Some(2.0), None),
            hist(3, 1, &[], None, Some(1.5)),
            hist(4, 1, &[], Some(2.0), None),
        ]);
        let m = nelson_aalen(&s, &EventKind::Death).unwrap();
        assert_eq!(m.times, vec![1.0, 2.0]);
        assert_eq!(m.increments, vec![1.0 / 4.0, 2.0 / 2.0]);
    }

    #[test]
    fn group_without_events_gets_zero_hazard() {
        let s = set(vec![
            hist(1, 0, &[], None, None),
            hist(2, 0, &[], None, None),
            hist(3, 1, &[], Some(1.0), None),
            hist(4, 1, &[], None, None),
        ]);
        let m = fit_additive(
            &s,
            &EventKind::Death,
            &[Regressor::Intercept, Regressor::Treatment],
            RankPolicy::Strict,
        )
        .unwrap();
        let h0 = m.evaluate(&s.histories[0], 0, s.end);
        assert_eq!(h0.increments, vec![0.0]);
        assert_eq!(m.evaluate(&s.histories[3], 1, s.end).increments, vec![0.5]);
    }

    #[test]
    fn rank_policies() {
        let s = set(vec![hist(1, 1, &[], Some(1.0), None), hist(2, 1, &[], None, None)]);
        let regs = [Regressor::Intercept, Regressor::Treatment];
        assert!(matches!(
            fit_additive(&s, &EventKind::Death, &regs, RankPolicy::Strict),
            Err(Error::RankDeficient { .. })
        ));
        let skip = fit_additive(&s, &EventKind::Death, &regs, RankPolicy::Skip).unwrap();
        assert!(skip.times.is_empty());
        let drop = fit_additive(&s, &EventKind::Death, &regs, RankPolicy::DropDependent).unwrap();
        assert_eq!(drop.increment(0), &[0.5, 0.0]);
    }

    #[test]
    fn recurrent_count_uses_left_limits() {
        let s = set(vec![
            hist(1, 0, &[1.0, 2.0], None, None),
            hist(2, 0, &[2.0], None, None),
        ]);
        let m = fit_additive(
            &s,
            &EventKind::Recurrent,
            &[Regressor::Intercept, Regressor::RecurrentCount],
            RankPolicy::DropDependent,
        )
        .unwrap();
        assert_eq!(m.times, vec![1.0, 2.0]);
        // At t=2 rows are (1,1) and (1,0) and both individuals jump.
        let b = m.increment(1);
        assert!((b[0] - 1.0).abs() < 1e-12 && b[1].abs() < 1e-12);
    }

    #[test]
    fn theta_window_ratio() {
        let den = CumulativeHazard {
            times: vec![1.0, 2.0, 3.0],
            increments: vec![0.1, 0.1, 0.1],
        };
        let num = CumulativeHazard {
            times: den.times.clone(),
            increments: vec![0.2, 0.2, 0.2],
        };
        assert_eq!(smoothed_theta(&den, &den, 2.0, 3.0).unwrap(), 1.0);
        assert!((smoothed_theta(&num, &den, 2.0, 3.0).unwrap() - 2.0).abs() < 1e-12);
        let gap = CumulativeHazard {
            times: vec![1.0, 2.0],
            increments: vec![0.1, 0.1],
        };
        assert!(matches!(
            smoothed_theta(&num, &gap, 0.5, 3.0),
            Err(Error::ZeroDenominator { .. })
        ));
        let mut carry = SmoothedTheta::new(0.5, ZeroDenominatorPolicy::CarryLast).unwrap();
        carry.at(&num, &den, 2.0).unwrap();
        assert!((carry.at(&num, &gap, 3.0).unwrap() - 2.0).abs() < 1e-12);
    }
}
