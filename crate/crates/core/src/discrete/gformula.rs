use std::collections::BTreeMap;

use super::nuisance::{NuisanceModel, Var};
use super::strata::{cond_key, merge_l, HistoryMode, PartialHistory, Step};
use super::{DiscreteCurve, Regime};
use crate::error::Result;

/// Plug-in g-formula by forward propagation of the alive, uncensored mass.
pub(crate) fn propagate(nuis: &NuisanceModel, regime: Regime, horizon: usize) -> Result<DiscreteCurve> {
    let mode = nuis.mode();
    let (a_y, a_d) = regime.arms();
    let split = regime.needs_split();
    let l_d = nuis.l_d().unwrap_or(&[]).to_vec();
    let mut dy = vec![0.0; horizon + 1];
    let mut dd = vec![0.0; horizon + 1];

    let mut states: BTreeMap<Vec<i64>, (PartialHistory, f64)> = BTreeMap::new();
    for (l0, p0) in nuis.l0_law() {
        let h = PartialHistory::new(l0);
        spread_l(nuis, mode, split, &l_d, (a_y, a_d), 0, &h, 0, p0, &mut states)?;
    }

    for j in 1..=horizon {
        let mut next = BTreeMap::new();
        for (h, mass) in states.values() {
            let hk = h.key(mode);
            let pd = match regime {
                Regime::Direct(_) => 0.0,
                _ => nuis.dist(Var::D, j, &cond_key(a_d, &hk, &[]))?.prob(&[1]),
            };
            if pd > 0.0 {
                dd[j] += mass * pd;
                let key = cond_key(a_y, &hk, &[1]);
                if nuis.has(Var::Y, j, &key) {
                    dy[j] += mass * pd * nuis.dist(Var::Y, j, &key)?.mean();
                }
            }
            let alive = mass * (1.0 - pd);
            if alive == 0.0 {
                continue;
            }
            for (o, p) in nuis.dist(Var::Y, j, &cond_key(a_y, &hk, &[0]))?.iter() {
                let m2 = alive * p;
                dy[j] += m2 * o[0] as f64;
                if j < horizon {
                    spread_l(nuis, mode, split, &l_d, (a_y, a_d), j, h, o[0] as u32, m2, &mut next)?;
                }
            }
        }
        states = next;
    }
    Ok(DiscreteCurve::from_increments(dy, dd))
}

#[allow(clippy::too_many_arguments)]
fn spread_l(
    nuis: &NuisanceModel,
    mode: HistoryMode,
    split: bool,
    l_d: &[usize],
    (a_y, a_d): (u8, u8),
    j: usize,
    h: &PartialHistory,
    dy: u32,
    mass: f64,
    out: &mut BTreeMap<Vec<i64>, (PartialHistory, f64)>,
) -> Result<()> {
    let hk = h.key(mode);
    let extra = [0, dy as i64];
    let mut add = |l: Vec<i64>, m: f64| {
        let child = h.pushed(Step { dy, d: 0, l }, mode);
        out.entry(child.key(mode)).or_insert((child, 0.0)).1 += m;
    };
    if split && l_d.is_empty() {
        let key_y = cond_key(a_y, &hk, &extra);
        for (ly, q) in nuis.dist(Var::LY, j, &key_y)?.iter() {
            add(ly.clone(), mass * q);
        }
        return Ok(());
    }
    if !split {
        for (l, p) in nuis.dist(Var::L, j, &cond_key(a_y, &hk, &extra))?.iter() {
            add(l.clone(), mass * p);
        }
        return Ok(());
    }
    for (ld, p) in nuis.dist(Var::LD, j, &cond_key(a_d, &hk, &extra))?.iter() {
        let mut key_y = cond_key(a_y, &hk, &extra);
        key_y.extend_from_slice(ld);
        for (ly, q) in nuis.dist(Var::LY, j, &key_y)?.iter() {
            add(merge_l(ld, ly, l_d), mass * p * q);
        }
    }
    Ok(())
}
