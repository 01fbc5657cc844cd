use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// One individual's discrete-time record on a shared grid.
///
/// Index `k` runs over `0..=k_max`. Within interval `k` the order is
/// `C_k, D_k, ΔY_k, L_k`; `l[0]` is measured after treatment assignment and
/// before any events. Cells from the first censored interval on are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalPanel {
    pub id: String,
    pub a: u8,
    /// `(a_y, a_d)` for four-arm data.
    pub arms: Option<(u8, u8)>,
    pub l0: Vec<i64>,
    pub l: Vec<Option<Vec<i64>>>,
    pub y: Vec<Option<u32>>,
    pub d: Vec<Option<u8>>,
    pub c: Vec<u8>,
}

impl IntervalPanel {
    pub fn k_max(&self) -> usize {
        self.c.len() - 1
    }

    pub fn a_y(&self) -> u8 {
        self.arms.map_or(self.a, |(ay, _)| ay)
    }

    pub fn a_d(&self) -> u8 {
        self.arms.map_or(self.a, |(_, ad)| ad)
    }

    /// First interval with `c = 1`.
    pub fn censor_index(&self) -> Option<usize> {
        self.c.iter().position(|&c| c == 1)
    }

    /// First interval with an observed death.
    pub fn death_index(&self) -> Option<usize> {
        self.d.iter().position(|&d| d == Some(1))
    }

    pub fn observed(&self, k: usize) -> bool {
        self.c[k] == 0
    }

    /// `ΔY_k`, with `ΔY_0 = 0`.
    pub fn dy(&self, k: usize) -> Option<u32> {
        if k == 0 {
            return self.y[0];
        }
        match (self.y[k], self.y[k - 1]) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        }
    }

    pub(crate) fn validate(&self, row: usize, n_l0: usize, n_l: usize) -> Result<()> {
        let bad = |column: String, reason: &str| Error::MalformedRow {
            row,
            column,
            reason: reason.to_string(),
        };
        let len = self.c.len();
        if len < 2 || self.y.len() != len || self.d.len() != len || self.l.len() != len {
            return Err(bad("y_*".into(), "per-interval arrays have unequal length"));
        }
        if self.a > 1 {
            return Err(bad("a".into(), "treatment must be 0 or 1"));
        }
        if let Some((ay, ad)) = self.arms {
            if ay > 1 {
                return Err(bad("a_y".into(), "treatment must be 0 or 1"));
            }
            if ad > 1 {
                return Err(bad("a_d".into(), "treatment must be 0 or 1"));
            }
        }
        if self.l0.len() != n_l0 {
            return Err(bad("l0_*".into(), "wrong number of baseline covariates"));
        }
        let censor = self.censor_index().unwrap_or(len);
        for k in 0..len {
            if self.c[k] > 1 {
                return Err(bad(format!("c_{k}"), "censoring indicator must be 0 or 1"));
            }
            if k > 0 && self.c[k] < self.c[k - 1] {
                return Err(bad(format!("c_{k}"), "censoring is absorbing"));
            }
            if k < censor {
                if self.y[k].is_none() {
                    return Err(bad(format!("y_{k}"), "missing before censoring"));
                }
                match self.d[k] {
                    None => return Err(bad(format!("d_{k}"), "missing before censoring")),
                    Some(v) if v > 1 => return Err(bad(format!("d_{k}"), "death indicator must be 0 or 1")),
                    _ => {}
                }
                match &self.l[k] {
                    None => return Err(bad(format!("l_{k}_*"), "missing before censoring")),
                    Some(v) if v.len() != n_l => return Err(bad(format!("l_{k}_*"), "wrong number of covariates")),
                    _ => {}
                }
            } else if self.y[k].is_some() || self.d[k].is_some() || self.l[k].is_some() {
                return Err(bad(format!("y_{k}"), "values after censoring must be unobserved"));
            }
        }
        if self.c[0] != 0 {
            return Err(bad("c_0".into(), "must be 0 at baseline"));
        }
        if self.y[0] != Some(0) {
            return Err(bad("y_0".into(), "must be 0 at baseline"));
        }
        if self.d[0] != Some(0) {
            return Err(bad("d_0".into(), "must be 0 at baseline"));
        }
        let death = self.death_index();
        for k in 1..censor {
            let (y, yp) = (self.y[k].unwrap(), self.y[k - 1].unwrap());
            let (d, dp) = (self.d[k].unwrap(), self.d[k - 1].unwrap());
            if d < dp {
                return Err(bad(format!("d_{k}"), "death is absorbing"));
            }
            if y < yp {
                return Err(bad(format!("y_{k}"), "cumulative count decreases"));
            }
            if let Some(kd) = death {
                if k > kd && y != yp {
                    return Err(bad(format!("y_{k}"), "recurrent event after death"));
                }
            }
        }
        Ok(())
    }
}

/// A discrete-time cohort: panels plus covariate names and the `L_D` block.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub grid: TimeGrid,
    pub l0_names: Vec<String>,
    pub l_names: Vec<String>,
    /// Indices into `l_names` forming `L_D`; `None` when undeclared.
    pub l_d: Option<Vec<usize>>,
    pub panels: Vec<IntervalPanel>,
}

impl Cohort {
    pub fn new(
        grid: TimeGrid,
        l0_names: Vec<String>,
        l_names: Vec<String>,
        panels: Vec<IntervalPanel>,
    ) -> Result<Self> {
        let cohort = Cohort {
            grid,
            l0_names,
            l_names,
            l_d: None,
            panels,
        };
        cohort.validate()?;
        Ok(cohort)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        for (row, p) in self.panels.iter().enumerate() {
            if p.k_max() != self.grid.k_max {
                return Err(Error::MalformedRow {
                    row: row + 1,
                    column: "y_*".into(),
                    reason: format!("panel has {} intervals, grid has {}", p.k_max(), self.grid.k_max),
                });
            }
            p.validate(row + 1, self.l0_names.len(), self.l_names.len())?;
        }
        if let Some(ld) = &self.l_d {
            if ld.iter().any(|&i| i >= self.l_names.len()) {
                return Err(Error::InvalidArgument("l_d index out of range".into()));
            }
        }
        Ok(())
    }

    /// Declares the `L_D` block by covariate name; an empty list declares `L_D = ∅`.
    pub fn declare_l_d(&mut self, names: &[String]) -> Result<()> {
        self.l_d = Some(resolve_names(&self.l_names, names)?);
        Ok(())
    }

    pub fn is_four_arm(&self) -> bool {
        self.panels.iter().any(|p| p.arms.is_some())
    }

    /// Cohort restricted to (or resampled as) the given panel indices.
    pub fn select(&self, idx: &[usize]) -> Cohort {
        Cohort {
            grid: self.grid,
            l0_names: self.l0_names.clone(),
            l_names: self.l_names.clone(),
            l_d: self.l_d.clone(),
            panels: idx.iter().map(|&i| self.panels[i].clone()).collect(),
        }
    }
}

pub(crate) fn resolve_names(all: &[String], names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            all.iter()
                .position(|m| m == n)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown covariate `{n}`")))
        })
        .collect()
}
