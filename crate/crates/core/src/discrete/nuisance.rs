use std::collections::{BTreeMap, HashMap};

use super::strata::{cond_key, split_l, step_of, HistoryMode, PartialHistory, Step};
use crate::data::Cohort;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) enum Var {
    C,
    D,
    Y,
    L,
    LD,
    LY,
}

/// Outcome frequencies within one conditioning stratum.
#[derive(Debug, Clone, Default)]
pub(crate) struct Counts {
    pub total: u64,
    pub outcomes: BTreeMap<Vec<i64>, u64>,
}

impl Counts {
    fn add(&mut self, outcome: Vec<i64>) {
        self.total += 1;
        *self.outcomes.entry(outcome).or_default() += 1;
    }

    pub fn prob(&self, outcome: &[i64]) -> f64 {
        self.outcomes.get(outcome).copied().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i64>, f64)> + '_ {
        let t = self.total as f64;
        self.outcomes.iter().map(move |(o, &c)| (o, c as f64 / t))
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(o, p)| o[0] as f64 * p).sum()
    }
}

/// Saturated conditional frequencies for treatment, censoring, death,
/// recurrent increments and covariates.
#[derive(Debug, Clone)]
pub struct NuisanceModel {
    mode: HistoryMode,
    l_d: Option<Vec<usize>>,
    n: usize,
    l0: BTreeMap<Vec<i64>, [u64; 2]>,
    tables: HashMap<(Var, usize), HashMap<Vec<i64>, Counts>>,
}

/// Fits all nuisance tables on `cohort` with the given history key.
pub fn fit_nuisances(cohort: &Cohort, mode: HistoryMode) -> NuisanceModel {
    let mut m = NuisanceModel {
        mode,
        l_d: cohort.l_d.clone(),
        n: cohort.panels.len(),
        l0: BTreeMap::new(),
        tables: HashMap::new(),
    };
    for p in &cohort.panels {
        let a = p.a;
        m.l0.entry(p.l0.clone()).or_default()[a as usize] += 1;
        let mut h = PartialHistory::new(&p.l0);
        let l_first = p.l[0].clone().expect("baseline covariates observed");
        m.record_l(0, a, &h.key(mode), 0, 0, &l_first);
        h.push(
            Step {
                dy: 0,
                d: 0,
                l: l_first,
            },
            mode,
        );
        for j in 1..=p.k_max() {
            let hk = h.key(mode);
            m.record(Var::C, j, cond_key(a, &hk, &[]), vec![p.c[j] as i64]);
            if p.c[j] == 1 {
                break;
            }
            let step = step_of(p, j);
            m.record(Var::D, j, cond_key(a, &hk, &[]), vec![step.d as i64]);
            m.record(Var::Y, j, cond_key(a, &hk, &[step.d as i64]), vec![step.dy as i64]);
            m.record_l(j, a, &hk, step.d, step.dy, &step.l);
            h.push(step, mode);
        }
    }
    m
}

impl NuisanceModel {
    fn record(&mut self, var: Var, k: usize, key: Vec<i64>, outcome: Vec<i64>) {
        self.tables
            .entry((var, k))
            .or_default()
            .entry(key)
            .or_default()
            .add(outcome);
    }

    fn record_l(&mut self, k: usize, a: u8, hk: &[i64], d: u8, dy: u32, l: &[i64]) {
        let key = cond_key(a, hk, &[d as i64, dy as i64]);
        if let Some(l_d) = self.l_d.clone() {
            let (ld, ly) = split_l(l, &l_d);
            let mut key_y = key.clone();
            key_y.extend_from_slice(&ld);
            self.record(Var::LD, k, key.clone(), ld);
            self.record(Var::LY, k, key_y, ly);
        }
        self.record(Var::L, k, key, l.to_vec());
    }

    pub fn mode(&self) -> HistoryMode {
        self.mode
    }

    pub fn l_d(&self) -> Option<&[usize]> {
        self.l_d.as_deref()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Empirical `P(A = a | L0 = l0)`.
    pub fn pi_a(&self, a: u8, l0: &[i64]) -> Result<f64> {
        let c = self.l0.get(l0).ok_or_else(|| Error::Positivity {
            k: 0,
            stratum: format!("L0={l0:?} unobserved"),
        })?;
        let p = c[a as usize] as f64 / (c[0] + c[1]) as f64;
        if p == 0.0 {
            return Err(Error::Positivity {
                k: 0,
                stratum: format!("no individual with A={a} in L0={l0:?}"),
            });
        }
        Ok(p)
    }

    /// Baseline covariate strata with their empirical marginal probability.
    pub fn l0_law(&self) -> impl Iterator<Item = (&Vec<i64>, f64)> + '_ {
        let n = self.n as f64;
        self.l0.iter().map(move |(k, c)| (k, (c[0] + c[1]) as f64 / n))
    }

    pub(crate) fn dist(&self, var: Var, k: usize, key: &[i64]) -> Result<&Counts> {
        self.tables
            .get(&(var, k))
            .and_then(|t| t.get(key))
            .ok_or_else(|| Error::Positivity {
                k,
                stratum: format!("{var:?} given A={}, history {:?}", key[0], &key[1..]),
            })
    }

    /// Probability of `outcome`, failing when the stratum is empty or the
    /// observed outcome has empirical probability zero.
    pub(crate) fn prob_nonzero(&self, var: Var, k: usize, key: &[i64], outcome: &[i64]) -> Result<f64> {
        let p = self.dist(var, k, key)?.prob(outcome);
        if p == 0.0 {
            return Err(Error::Positivity {
                k,
                stratum: format!("P({var:?}={outcome:?}) = 0 given A={}, history {:?}", key[0], &key[1..]),
            });
        }
        Ok(p)
    }

    pub(crate) fn has(&self, var: Var, k: usize, key: &[i64]) -> bool {
        self.tables.get(&(var, k)).is_some_and(|t| t.contains_key(key))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::IntervalPanel;
    use crate::grid::TimeGrid;

    fn simple(a: u8, y: &[u32], c: &[u8]) -> IntervalPanel {
        let k = y.len() - 1;
        let cens = c.iter().position(|&v| v == 1);
        let obs = |j: usize| cens.is_none_or(|ci| j < ci);
        IntervalPanel {
            id: "x".into(),
            a,
            arms: None,
            l0: vec![0],
            l: (0..=k).map(|j| obs(j).then(Vec::new)).collect(),
            y: (0..=k).map(|j| obs(j).then_some(y[j])).collect(),
            d: (0..=k).map(|j| obs(j).then_some(0)).collect(),
            c: c.to_vec(),
        }
    }

    fn cohort(panels: Vec<IntervalPanel>) -> Cohort {
        Cohort::new(TimeGrid::new(2, 1.0, 0.0).unwrap(), vec!["x".into()], vec![], panels).unwrap()
    }

    #[test]
    fn no_censoring_gives_unit_censoring_probability() {
        let c = cohort(vec![
            simple(0, &[0, 1, 1], &[0, 0, 0]),
            simple(1, &[0, 0, 1], &[0, 0, 0]),
        ]);
        let m = fit_nuisances(&c, HistoryMode::Full);
        for t in m.tables.iter().filter(|((v, _), _)| *v == Var::C) {
            for counts in t.1.values() {
                assert_eq!(counts.prob(&[0]), 1.0);
            }
        }
        assert_eq!(m.pi_a(1, &[0]).unwrap(), 0.5);
    }

    #[test]
    fn single_individual_is_degenerate() {
        let c = cohort(vec![simple(1, &[0, 1, 1], &[0, 0, 1])]);
        let m = fit_nuisances(&c, HistoryMode::Full);
        for t in m.tables.values() {
            for counts in t.values() {
                for (_, p) in counts.iter() {
                    assert!(p == 0.0 || p == 1.0);
                }
            }
        }
        assert!(m.pi_a(0, &[0]).is_err());
        assert!(m.dist(Var::C, 1, &[0, 0]).is_err());
    }
}
