use super::nuisance::{NuisanceModel, Var};
use super::strata::{cond_key, split_l, step_of, PartialHistory, Step};
use super::{DiscreteCurve, Regime};
use crate::data::{Cohort, IntervalPanel};
use crate::error::Result;

/// Horvitz-Thompson weighted increments (divided by the full sample size).
pub(crate) fn weighted(cohort: &Cohort, nuis: &NuisanceModel, regime: Regime, horizon: usize) -> Result<DiscreteCurve> {
    let mode = nuis.mode();
    let (a_y, a_d) = regime.arms();
    let split = regime.needs_split();
    let l_d = nuis.l_d().unwrap_or(&[]).to_vec();
    let n = cohort.panels.len() as f64;
    let mut dy = vec![0.0; horizon + 1];
    let mut dd = vec![0.0; horizon + 1];

    for p in cohort.panels.iter().filter(|p| p.a == a_y) {
        let mut w = 1.0 / nuis.pi_a(a_y, &p.l0)?;
        let mut h = PartialHistory::new(&p.l0);
        let l_first = p.l[0].clone().expect("baseline covariates observed");
        if split {
            w *= ld_ratio(nuis, &l_d, (a_y, a_d), 0, &h.key(mode), 0, 0, &l_first)?;
        }
        h.push(
            Step {
                dy: 0,
                d: 0,
                l: l_first,
            },
            mode,
        );
        for j in 1..=horizon {
            if p.c[j] == 1 {
                break;
            }
            let hk = h.key(mode);
            let base = cond_key(a_y, &hk, &[]);
            w /= nuis.prob_nonzero(Var::C, j, &base, &[0])?;
            let step = step_of(p, j);
            match regime {
                Regime::Direct(_) => {
                    if step.d == 1 {
                        break;
                    }
                    w /= nuis.prob_nonzero(Var::D, j, &base, &[0])?;
                }
                Regime::Separable { .. } if split => {
                    let o = [step.d as i64];
                    let num = nuis.dist(Var::D, j, &cond_key(a_d, &hk, &[]))?.prob(&o);
                    w *= num / nuis.prob_nonzero(Var::D, j, &base, &o)?;
                }
                _ => {}
            }
            dd[j] += w * step.d as f64;
            if split {
                w *= ld_ratio(nuis, &l_d, (a_y, a_d), j, &hk, step.d, step.dy, &step.l)?;
            }
            dy[j] += w * step.dy as f64;
            if step.d == 1 {
                break;
            }
            h.push(step, mode);
        }
    }
    for v in dy.iter_mut().chain(dd.iter_mut()) {
        *v /= n;
    }
    Ok(DiscreteCurve::from_increments(dy, dd))
}

#[allow(clippy::too_many_arguments)]
fn ld_ratio(
    nuis: &NuisanceModel,
    l_d: &[usize],
    (a_y, a_d): (u8, u8),
    j: usize,
    hk: &[i64],
    d: u8,
    dy: u32,
    l: &[i64],
) -> Result<f64> {
    if l_d.is_empty() {
        return Ok(1.0);
    }
    let (ld, _) = split_l(l, l_d);
    let extra = [d as i64, dy as i64];
    let num = nuis.dist(Var::LD, j, &cond_key(a_d, hk, &extra))?.prob(&ld);
    let den = nuis.prob_nonzero(Var::LD, j, &cond_key(a_y, hk, &extra), &ld)?;
    Ok(num / den)
}

/// Inverse probability of remaining uncensored through `k` under arm `a`,
/// or `None` when censored by `k`.
pub(crate) fn censoring_weight(p: &IntervalPanel, nuis: &NuisanceModel, a: u8, k: usize) -> Result<Option<f64>> {
    let mode = nuis.mode();
    let mut w = 1.0 / nuis.pi_a(a, &p.l0)?;
    let mut h = PartialHistory::new(&p.l0);
    h.push(
        Step {
            dy: 0,
            d: 0,
            l: p.l[0].clone().expect("baseline covariates observed"),
        },
        mode,
    );
    for j in 1..=k {
        if p.c[j] == 1 {
            return Ok(None);
        }
        w /= nuis.prob_nonzero(Var::C, j, &cond_key(a, &h.key(mode), &[]), &[0])?;
        h.push(step_of(p, j), mode);
    }
    Ok(Some(w))
}
