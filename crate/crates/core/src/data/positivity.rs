use std::collections::BTreeMap;

use serde::Serialize;

use super::Cohort;
use crate::discrete::{HistoryMode, PartialHistory, Step};
use crate::estimand::{Estimand, EstimandSpec};

/// Per-arm counts in one stratum of the history at the start of interval `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityRow {
    pub k: usize,
    pub stratum: Vec<i64>,
    pub at_risk: [u64; 2],
    pub uncensored: [u64; 2],
    pub alive: [u64; 2],
    pub p_uncensored: [Option<f64>; 2],
    pub p_alive: [Option<f64>; 2],
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    pub spec: EstimandSpec,
    pub history: String,
    pub rows: Vec<PositivityRow>,
}

impl PositivityReport {
    pub fn flagged(&self) -> impl Iterator<Item = &PositivityRow> {
        self.rows.iter().filter(|r| !r.flags.is_empty())
    }
}

/// Row `k = 0` holds baseline strata, where `at_risk` counts treatment arms.
/// Rows `k >= 1` cover alive, uncensored individuals entering interval `k`.
pub fn positivity_report(cohort: &Cohort, spec: &EstimandSpec, mode: HistoryMode) -> PositivityReport {
    let (a_y, a_d) = spec.estimand.arms();
    let direct = matches!(spec.estimand, Estimand::ControlledDirect { .. });
    let mut cells: BTreeMap<(usize, Vec<i64>), [[u64; 2]; 3]> = BTreeMap::new();
    let horizon = spec.horizon.min(cohort.grid.k_max);
    for p in &cohort.panels {
        let a = p.a as usize;
        let mut h = PartialHistory::new(&p.l0);
        cells.entry((0, p.l0.clone())).or_default()[0][a] += 1;
        h.push(
            Step {
                dy: 0,
                d: 0,
                l: p.l[0].clone().unwrap_or_default(),
            },
            mode,
        );
        for k in 1..=horizon {
            if h.dead {
                break;
            }
            let cell = cells.entry((k, h.key(mode))).or_default();
            cell[0][a] += 1;
            if p.c[k] == 1 {
                break;
            }
            cell[1][a] += 1;
            let d = p.d[k].unwrap_or(0);
            if d == 0 {
                cell[2][a] += 1;
            }
            h.push(
                Step {
                    dy: p.dy(k).unwrap_or(0),
                    d,
                    l: p.l[k].clone().unwrap_or_default(),
                },
                mode,
            );
        }
    }
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    let rows = cells
        .into_iter()
        .map(|((k, stratum), [n, u, al])| {
            let mut flags = Vec::new();
            let required = if a_y == a_d { vec![a_y] } else { vec![a_y, a_d] };
            for &a in &required {
                let a = a as usize;
                if n[a] == 0 {
                    flags.push(format!("no individual with A={a}"));
                } else if k > 0 && u[a] == 0 {
                    flags.push(format!("P(C=0)=0 in arm {a}"));
                } else if k > 0 && direct && al[a] == 0 {
                    flags.push(format!("P(C=0,D=0)=0 in arm {a}"));
                }
            }
            PositivityRow {
                k,
                stratum,
                at_risk: n,
                uncensored: u,
                alive: al,
                p_uncensored: [ratio(u[0], n[0]), ratio(u[1], n[1])],
                p_alive: [ratio(al[0], u[0]), ratio(al[1], u[1])],
                flags,
            }
        })
        .collect();
    PositivityReport {
        spec: *spec,
        history: mode.to_string(),
        rows,
    }
}
