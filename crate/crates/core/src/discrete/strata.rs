use serde::{Deserialize, Serialize};

use crate::data::IntervalPanel;

/// How much of the past enters a stratum key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum HistoryMode {
    /// Entire observed history (the saturated conditioning set).
    #[default]
    Full,
    /// Baseline covariates, current count, vital status and latest covariate
    /// value, plus the last `m` intervals' increments.
    Markov(usize),
}

impl std::str::FromStr for HistoryMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "full" {
            return Ok(HistoryMode::Full);
        }
        s.strip_prefix("markov:")
            .and_then(|m| m.parse().ok())
            .map(HistoryMode::Markov)
            .ok_or_else(|| format!("history mode must be `full` or `markov:<m>`, got `{s}`"))
    }
}

impl std::fmt::Display for HistoryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HistoryMode::Full => write!(f, "full"),
            HistoryMode::Markov(m) => write!(f, "markov:{m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Step {
    pub dy: u32,
    pub d: u8,
    pub l: Vec<i64>,
}

/// Observed past up to the end of some interval, as needed by `HistoryMode`.
#[derive(Debug, Clone)]
pub(crate) struct PartialHistory {
    pub l0: Vec<i64>,
    pub steps: Vec<Step>,
    pub y: u32,
    pub dead: bool,
    pub last_l: Vec<i64>,
}

impl PartialHistory {
    pub fn new(l0: &[i64]) -> Self {
        PartialHistory {
            l0: l0.to_vec(),
            steps: Vec::new(),
            y: 0,
            dead: false,
            last_l: Vec::new(),
        }
    }

    pub fn push(&mut self, step: Step, mode: HistoryMode) {
        self.y += step.dy;
        self.dead |= step.d == 1;
        self.last_l.clone_from(&step.l);
        self.steps.push(step);
        if let HistoryMode::Markov(m) = mode {
            if self.steps.len() > m {
                self.steps.remove(0);
            }
        }
    }

    pub fn pushed(&self, step: Step, mode: HistoryMode) -> Self {
        let mut h = self.clone();
        h.push(step, mode);
        h
    }

    pub fn key(&self, mode: HistoryMode) -> Vec<i64> {
        let mut k = self.l0.clone();
        match mode {
            HistoryMode::Full => {
                for s in &self.steps {
                    k.push(s.dy as i64);
                    k.push(s.d as i64);
                    k.extend_from_slice(&s.l);
                }
            }
            HistoryMode::Markov(_) => {
                k.push(self.y as i64);
                k.push(self.dead as i64);
                k.extend_from_slice(&self.last_l);
                k.extend(self.steps.iter().map(|s| s.dy as i64));
            }
        }
        k
    }
}

/// Conditioning key: treatment arm, history key, then within-interval extras.
pub(crate) fn cond_key(a: u8, history: &[i64], extra: &[i64]) -> Vec<i64> {
    let mut k = Vec::with_capacity(1 + history.len() + extra.len());
    k.push(a as i64);
    k.extend_from_slice(history);
    k.extend_from_slice(extra);
    k
}

pub(crate) fn step_of(p: &IntervalPanel, k: usize) -> Step {
    Step {
        dy: p.dy(k).expect("observed"),
        d: p.d[k].expect("observed"),
        l: p.l[k].clone().expect("observed"),
    }
}

/// Splits a covariate vector into its `(L_D, L_Y)` blocks.
pub(crate) fn split_l(l: &[i64], l_d: &[usize]) -> (Vec<i64>, Vec<i64>) {
    let ld = l_d.iter().map(|&i| l[i]).collect();
    let ly = (0..l.len()).filter(|i| !l_d.contains(i)).map(|i| l[i]).collect();
    (ld, ly)
}

pub(crate) fn merge_l(ld: &[i64], ly: &[i64], l_d: &[usize]) -> Vec<i64> {
    let n = ld.len() + ly.len();
    let (mut di, mut yi) = (0, 0);
    (0..n)
        .map(|i| {
            if l_d.contains(&i) {
                di += 1;
                ld[di - 1]
            } else {
                yi += 1;
                ly[yi - 1]
            }
        })
        .collect()
}
