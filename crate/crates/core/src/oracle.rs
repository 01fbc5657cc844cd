//! Ground truth under a known `DgpConfig`: exact forward propagation of the
//! intervened process, and interventional Monte Carlo.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::curve::{CurveEstimate, StdErrors};
use crate::dgp::{DgpConfig, InterventionSpec, State};
use crate::error::{Error, Result};
use crate::estimand::{Estimand, EstimandSpec};

/// Default bound on the number of enumerated cells.
pub const ENUMERATION_BOUND: usize = 1_000_000;

pub fn intervention_for(e: &Estimand) -> InterventionSpec {
    let (a_y, a_d) = e.arms();
    match e {
        Estimand::ControlledDirect { a } => InterventionSpec::direct(*a),
        _ => InterventionSpec::separable(a_y, a_d),
    }
}

type Integrand = Box<dyn Fn(u32, bool, usize) -> f64 + Sync>;

/// Per-individual composite integrand `f(Y_k, dead, mu_k)`.
fn integrand(e: &Estimand) -> Option<Integrand> {
    match *e {
        Estimand::AverageIndividualRate { .. } => Some(Box::new(|y, _, mu| y as f64 / mu as f64)),
        Estimand::CompositeSum { weight_d, weight_y, .. } => Some(Box::new(move |y, dead, _| {
            weight_d * (!dead as u8 as f64) + weight_y * y as f64
        })),
        Estimand::ReverseCount { m, .. } => Some(Box::new(
            move |y, dead, _| {
                if dead {
                    0.0
                } else {
                    (m - y.min(m)) as f64
                }
            },
        )),
        _ => None,
    }
}

#[derive(Default, Clone)]
struct Moments {
    y: Vec<[f64; 2]>,
    d: Vec<[f64; 2]>,
    f: Vec<[f64; 2]>,
    /// Cross moments of `Y_k` and `mu_k`, for the while-alive ratio: `[E mu, E mu^2, E Y mu]`.
    mu: Vec<[f64; 3]>,
}

impl Moments {
    fn new(h: usize) -> Self {
        Moments {
            y: vec![[0.0; 2]; h + 1],
            d: vec![[0.0; 2]; h + 1],
            f: vec![[0.0; 2]; h + 1],
            mu: vec![[0.0; 3]; h + 1],
        }
    }

    fn add(&mut self, k: usize, w: f64, y: u32, dead: bool, mu: usize, f: f64) {
        let (yf, muf) = (y as f64, mu as f64);
        self.y[k][0] += w * yf;
        self.y[k][1] += w * yf * yf;
        if dead {
            self.d[k][0] += w;
            self.d[k][1] += w;
        }
        self.f[k][0] += w * f;
        self.f[k][1] += w * f * f;
        self.mu[k][0] += w * muf;
        self.mu[k][1] += w * muf * muf;
        self.mu[k][2] += w * yf * muf;
    }

    fn merge(mut self, o: Moments) -> Moments {
        for (a, b) in self
            .y
            .iter_mut()
            .zip(&o.y)
            .chain(self.d.iter_mut().zip(&o.d))
            .chain(self.f.iter_mut().zip(&o.f))
        {
            a[0] += b[0];
            a[1] += b[1];
        }
        for (a, b) in self.mu.iter_mut().zip(&o.mu) {
            for i in 0..3 {
                a[i] += b[i];
            }
        }
        self
    }

    fn scale(&mut self, c: f64) {
        for a in self.y.iter_mut().chain(self.d.iter_mut()).chain(self.f.iter_mut()) {
            a[0] *= c;
            a[1] *= c;
        }
        for a in self.mu.iter_mut() {
            for v in a.iter_mut() {
                *v *= c;
            }
        }
    }
}

fn sd(m: &[f64; 2]) -> f64 {
    (m[1] - m[0] * m[0]).max(0.0).sqrt()
}

/// Builds the curve from population moments; `n` scales standard errors.
fn finish(cfg: &DgpConfig, spec: &EstimandSpec, m: &Moments, engine: &str, n: Option<f64>) -> Result<CurveEstimate> {
    let h = spec.horizon;
    let times = (0..=h).map(|k| cfg.grid.time(k)).collect();
    let y: Vec<f64> = m.y.iter().map(|v| v[0]).collect();
    let d: Vec<f64> = m.d.iter().map(|v| v[0]).collect();
    let mut est = CurveEstimate::new(*spec, engine, times, y.clone(), d.clone());
    let sd_y: Vec<f64> = m.y.iter().map(sd).collect();
    let sd_d: Vec<f64> = m.d.iter().map(sd).collect();
    let mut sd_c = None;
    if let Estimand::WhileAlive { .. } = spec.estimand {
        let mut comp = Vec::with_capacity(h + 1);
        let mut sds = Vec::with_capacity(h + 1);
        for (k, &[emu, emu2, eymu]) in m.mu.iter().enumerate().take(h + 1) {
            if emu == 0.0 {
                return Err(Error::DivisionByZero(format!("expected time alive is 0 at k={k}")));
            }
            let r = y[k] / emu;
            let var = m.y[k][1] - 2.0 * r * eymu + r * r * emu2 - (y[k] - r * emu).powi(2);
            comp.push(r);
            sds.push(var.max(0.0).sqrt() / emu);
        }
        est.composite = Some(comp);
        sd_c = Some(sds);
    } else if spec.estimand.is_composite() {
        est.composite = Some(m.f.iter().map(|v| v[0]).collect());
        sd_c = Some(m.f.iter().map(sd).collect());
    }
    est.set_meta("sd_y", &sd_y);
    est.set_meta("sd_d", &sd_d);
    if let Some(s) = &sd_c {
        est.set_meta("sd_composite", s);
    }
    if let Some(n) = n {
        let se = |v: &[f64]| v.iter().map(|s| s / n.sqrt()).collect::<Vec<_>>();
        est.se = Some(StdErrors {
            y: se(&sd_y),
            s: se(&sd_d),
            d: se(&sd_d),
            composite: sd_c.as_deref().map(se),
        });
        est.set_meta("n_draws", n as u64);
    }
    est.set_meta("seed", cfg.seed);
    Ok(est)
}

/// Exact expectations by forward propagation of the joint law of
/// `(L0, L1, L_D, Y)` among the alive, with dead individuals frozen in `(Y, mu)`.
pub fn exact_truth(cfg: &DgpConfig, spec: &EstimandSpec) -> Result<CurveEstimate> {
    exact_truth_bounded(cfg, spec, ENUMERATION_BOUND)
}

pub fn exact_truth_bounded(cfg: &DgpConfig, spec: &EstimandSpec, bound: usize) -> Result<CurveEstimate> {
    cfg.validate()?;
    spec.validate(cfg.grid.k_max)?;
    let h = spec.horizon;
    let cells = 8 * (cfg.grid.k_max + 1) + (cfg.grid.k_max + 1).pow(2);
    if cells > bound {
        return Err(Error::StateSpaceTooLarge { size: cells, bound });
    }
    let iv = intervention_for(&spec.estimand);
    let f = integrand(&spec.estimand);
    let f = |y: u32, dead: bool, mu: usize| f.as_ref().map_or(0.0, |g| g(y, dead, mu));

    let mut alive: BTreeMap<(u8, u8, u8, u32), f64> = BTreeMap::new();
    for l0 in 0..2u8 {
        let p0 = if l0 == 1 { cfg.p_l0 } else { 1.0 - cfg.p_l0 };
        for l1 in 0..2u8 {
            let p1 = if l1 == 1 {
                cfg.p_l1(iv.a_y)
            } else {
                1.0 - cfg.p_l1(iv.a_y)
            };
            *alive.entry((l0, l1, 0, 0)).or_default() += p0 * p1;
        }
    }
    let mut dead: BTreeMap<(u32, usize), f64> = BTreeMap::new();
    let mut m = Moments::new(h);
    for k in 0..=h {
        if k > 0 {
            let mut next = BTreeMap::new();
            for (&(l0, l1, ld, y), &mass) in &alive {
                let s = State { l0, l1, ld, y };
                let pd = if iv.eliminate_death {
                    0.0
                } else {
                    cfg.p_death(s, iv.a_d)
                };
                if pd > 0.0 {
                    *dead.entry((y, k)).or_default() += mass * pd;
                }
                let py = cfg.p_recurrent(s);
                let pl = if cfg.has_ld() && ld == 0 {
                    cfg.p_ld_onset(iv.a_d)
                } else {
                    0.0
                };
                for (dy, qy) in [(0, 1.0 - py), (1, py)] {
                    for (l, ql) in [(ld, 1.0 - pl), (1, pl)] {
                        let w = mass * (1.0 - pd) * qy * ql;
                        if w > 0.0 {
                            *next.entry((l0, l1, l, y + dy)).or_default() += w;
                        }
                    }
                }
            }
            alive = next;
        }
        for (&(_, _, _, y), &w) in &alive {
            m.add(k, w, y, false, k + 1, f(y, false, k + 1));
        }
        for (&(y, mu), &w) in &dead {
            m.add(k, w, y, true, mu, f(y, true, mu));
        }
    }
    finish(cfg, spec, &m, "exact", None)
}

/// Interventional Monte Carlo with `n_draws` individuals drawn from the
/// config's seed; standard errors are `sd / sqrt(n_draws)`.
pub fn mc_truth(cfg: &DgpConfig, spec: &EstimandSpec, n_draws: usize) -> Result<CurveEstimate> {
    cfg.validate()?;
    spec.validate(cfg.grid.k_max)?;
    if n_draws < 10_000 {
        return Err(Error::InvalidArgument("mc_truth needs at least 10^4 draws".into()));
    }
    let h = spec.horizon;
    let iv = intervention_for(&spec.estimand);
    let f = integrand(&spec.estimand);
    let mut m = (0..n_draws as u64)
        .into_par_iter()
        .fold(
            || Moments::new(h),
            |mut acc, j| {
                let t = cfg.draw(iv, j);
                let death = t.d.iter().position(|&d| d == 1);
                for k in 0..=h {
                    let dead = death.is_some_and(|di| di <= k);
                    let mu = death.map_or(k + 1, |di| di.min(k + 1));
                    let v = f.as_ref().map_or(0.0, |g| g(t.y[k], dead, mu));
                    acc.add(k, 1.0, t.y[k], dead, mu, v);
                }
                acc
            },
        )
        .reduce(|| Moments::new(h), Moments::merge);
    m.scale(1.0 / n_draws as f64);
    finish(cfg, spec, &m, "monte-carlo", Some(n_draws as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{ArmAssignment, CensorCoef, DeathCoef, RecurrentCoef};
    use crate::grid::TimeGrid;

    fn cfg(k: usize) -> DgpConfig {
        DgpConfig {
            p_l0: 0.5,
            beta_l1_ay: 0.2,
            arm_assignment: ArmAssignment::TwoArm,
            n_per_arm: 10,
            seed: 11,
            grid: TimeGrid::new(k, 1.0, 0.0).unwrap(),
            beta_c: CensorCoef { intercept: 0.3 },
            beta_d: DeathCoef::default(),
            beta_y: RecurrentCoef::default(),
            ld_process: None,
        }
    }

    fn spec(e: Estimand, h: usize) -> EstimandSpec {
        EstimandSpec::new(e, h)
    }

    #[test]
    fn zero_hazards_give_zero_curve() {
        let c = exact_truth(&cfg(4), &spec(Estimand::TotalEffect { a: 1 }, 4)).unwrap();
        assert!(c.y.iter().chain(&c.d).all(|&v| v == 0.0));
    }

    #[test]
    fn constant_recurrent_hazard_is_linear() {
        let mut g = cfg(5);
        g.beta_y.intercept = 0.3;
        let c = exact_truth(&g, &spec(Estimand::TotalEffect { a: 0 }, 5)).unwrap();
        for k in 0..=5 {
            assert!((c.y[k] - 0.3 * k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn monte_carlo_is_exact_for_deterministic_process() {
        let mut g = cfg(3);
        g.beta_y.intercept = 1.0;
        let c = mc_truth(&g, &spec(Estimand::TotalEffect { a: 1 }, 3), 10_000).unwrap();
        assert_eq!(c.y, vec![0.0, 1.0, 2.0, 3.0]);
        assert!(c.se.unwrap().y.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn while_alive_without_death_is_mean_over_intervals() {
        let mut g = cfg(4);
        g.beta_y.intercept = 0.4;
        let c = exact_truth(&g, &spec(Estimand::WhileAlive { a: 1 }, 4)).unwrap();
        let comp = c.composite.unwrap();
        for (k, v) in comp.iter().enumerate() {
            assert!((v - c.y[k] / (k + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_collapses_and_direct_matches_without_death() {
        let mut g = cfg(6);
        g.beta_y = RecurrentCoef {
            intercept: 0.1,
            l0: 0.1,
            l1: 0.2,
            ld: 0.0,
        };
        g.beta_d = DeathCoef {
            intercept: 0.05,
            a: -0.02,
            l0: 0.02,
            l1: 0.03,
            y: 0.02,
            ld: 0.0,
        };
        let t = exact_truth(&g, &spec(Estimand::TotalEffect { a: 1 }, 6)).unwrap();
        let s = exact_truth(&g, &spec(Estimand::Separable { a_y: 1, a_d: 1 }, 6)).unwrap();
        assert_eq!(t.y, s.y);
        assert_eq!(t.d, s.d);
        g.beta_d = DeathCoef::default();
        let t = exact_truth(&g, &spec(Estimand::TotalEffect { a: 1 }, 6)).unwrap();
        let d = exact_truth(&g, &spec(Estimand::ControlledDirect { a: 1 }, 6)).unwrap();
        assert_eq!(t.y, d.y);
    }

    #[test]
    fn exact_and_monte_carlo_agree() {
        let mut g = cfg(5);
        g.beta_y = RecurrentCoef {
            intercept: 0.1,
            l0: 0.1,
            l1: 0.2,
            ld: 0.0,
        };
        g.beta_d = DeathCoef {
            intercept: 0.05,
            a: -0.02,
            l0: 0.02,
            l1: 0.03,
            y: 0.02,
            ld: 0.0,
        };
        for e in [
            Estimand::TotalEffect { a: 1 },
            Estimand::AverageIndividualRate { a: 0 },
            Estimand::ReverseCount { a: 1, m: 2 },
            Estimand::WhileAlive { a: 1 },
        ] {
            let sp = spec(e, 5);
            let ex = exact_truth(&g, &sp).unwrap();
            let mc = mc_truth(&g, &sp, 100_000).unwrap();
            let se = mc.se.as_ref().unwrap();
            let (a, b, s) = match e {
                Estimand::TotalEffect { .. } => (&ex.y, &mc.y, &se.y),
                _ => (
                    ex.composite.as_ref().unwrap(),
                    mc.composite.as_ref().unwrap(),
                    se.composite.as_ref().unwrap(),
                ),
            };
            for k in 1..=5 {
                assert!(
                    (a[k] - b[k]).abs() <= 4.0 * s[k] + 1e-12,
                    "{e:?} k={k}: {} vs {} (se {})",
                    a[k],
                    b[k],
                    s[k]
                );
            }
        }
    }

    #[test]
    fn enumeration_bound_is_enforced() {
        let r = exact_truth_bounded(&cfg(4), &spec(Estimand::TotalEffect { a: 1 }, 4), 10);
        assert!(matches!(r, Err(Error::StateSpaceTooLarge { .. })));
    }
}
