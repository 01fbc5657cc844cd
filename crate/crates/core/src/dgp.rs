//! Discrete-time data-generating process with linear hazards.
//!
//! Each individual owns a counter-based ChaCha stream selected by arm and
//! index. Every interval consumes the same four uniforms (censoring, death,
//! recurrent, `L_D` onset) whether or not they are used, so interventions
//! change hazards without shifting the randomness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Cohort, IntervalPanel};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArmAssignment {
    /// `A_Y = A_D = A`.
    #[default]
    TwoArm,
    /// All four `(A_Y, A_D)` combinations.
    FourArm,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensorCoef {
    #[serde(default)]
    pub intercept: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeathCoef {
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub l0: f64,
    #[serde(default)]
    pub l1: f64,
    #[serde(default)]
    pub y: f64,
    #[serde(default)]
    pub ld: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrentCoef {
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub l0: f64,
    #[serde(default)]
    pub l1: f64,
    #[serde(default)]
    pub ld: f64,
}

/// Absorbing binary covariate switched on by `A_D`; it is the declared
/// `L_D` block of the simulated cohort.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdProcess {
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpConfig {
    /// `P(L0 = 1)`.
    pub p_l0: f64,
    /// `P(L1 = 1 | A_Y) = 1/2 + (2 A_Y - 1) beta_l1_ay`.
    pub beta_l1_ay: f64,
    #[serde(default)]
    pub arm_assignment: ArmAssignment,
    pub n_per_arm: usize,
    #[serde(default)]
    pub seed: u64,
    pub grid: TimeGrid,
    #[serde(default)]
    pub beta_c: CensorCoef,
    #[serde(default)]
    pub beta_d: DeathCoef,
    #[serde(default)]
    pub beta_y: RecurrentCoef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ld_process: Option<LdProcess>,
}

/// Which worlds to simulate in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionSpec {
    pub a_y: u8,
    pub a_d: u8,
    pub eliminate_censoring: bool,
    pub eliminate_death: bool,
}

impl InterventionSpec {
    /// `A = a` with censoring eliminated.
    pub fn total(a: u8) -> Self {
        Self::separable(a, a)
    }

    /// `A = a` with censoring and death eliminated.
    pub fn direct(a: u8) -> Self {
        InterventionSpec {
            eliminate_death: true,
            ..Self::total(a)
        }
    }

    pub fn separable(a_y: u8, a_d: u8) -> Self {
        InterventionSpec {
            a_y,
            a_d,
            eliminate_censoring: true,
            eliminate_death: false,
        }
    }

    /// Arms assigned, hazards untouched.
    pub fn factual(a_y: u8, a_d: u8) -> Self {
        InterventionSpec {
            a_y,
            a_d,
            eliminate_censoring: false,
            eliminate_death: false,
        }
    }
}

/// Covariate state entering an interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct State {
    pub l0: u8,
    pub l1: u8,
    pub ld: u8,
    pub y: u32,
}

/// One simulated individual; `y`, `d`, `ld` are meaningful through `c` only.
#[derive(Debug, Clone)]
pub(crate) struct Trajectory {
    pub l0: u8,
    pub l1: u8,
    pub ld: Vec<u8>,
    pub y: Vec<u32>,
    pub d: Vec<u8>,
    pub c: Vec<u8>,
}

impl DgpConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: DgpConfig = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn has_ld(&self) -> bool {
        self.ld_process.is_some()
    }

    pub fn p_l1(&self, a_y: u8) -> f64 {
        0.5 + (2.0 * a_y as f64 - 1.0) * self.beta_l1_ay
    }

    pub fn p_censor(&self) -> f64 {
        self.beta_c.intercept
    }

    pub(crate) fn p_death(&self, s: State, a_d: u8) -> f64 {
        let b = &self.beta_d;
        b.intercept + a_d as f64 * b.a + s.l0 as f64 * b.l0 + s.l1 as f64 * b.l1 + s.y as f64 * b.y + s.ld as f64 * b.ld
    }

    pub(crate) fn p_recurrent(&self, s: State) -> f64 {
        let b = &self.beta_y;
        b.intercept + s.l0 as f64 * b.l0 + s.l1 as f64 * b.l1 + s.ld as f64 * b.ld
    }

    pub(crate) fn p_ld_onset(&self, a_d: u8) -> f64 {
        self.ld_process.map_or(0.0, |p| p.intercept + a_d as f64 * p.a)
    }

    /// Checks every probability the process can produce, over all reachable states.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.n_per_arm == 0 {
            return Err(Error::InvalidConfig("n_per_arm must be positive".into()));
        }
        let check = |which: &str, value: f64, state: String| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(Error::InvalidHazard {
                    which: which.into(),
                    value,
                    state,
                })
            }
        };
        check("p_l0", self.p_l0, "baseline".into())?;
        check("p_censor", self.p_censor(), "any".into())?;
        for a in 0..2u8 {
            check("p_l1", self.p_l1(a), format!("a_y={a}"))?;
            check("p_ld_onset", self.p_ld_onset(a), format!("a_d={a}"))?;
        }
        let lds: &[u8] = if self.has_ld() { &[0, 1] } else { &[0] };
        for l0 in 0..2u8 {
            for l1 in 0..2u8 {
                for &ld in lds {
                    for y in 0..self.grid.k_max as u32 {
                        let s = State { l0, l1, ld, y };
                        check("p_recurrent", self.p_recurrent(s), format!("{s:?}"))?;
                        for a_d in 0..2u8 {
                            check("p_death", self.p_death(s, a_d), format!("{s:?}, a_d={a_d}"))?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Same process on a grid `r` times finer, with per-interval
    /// probabilities scaled by `1/r`.
    pub fn refine(&self, r: usize) -> DgpConfig {
        let f = r as f64;
        let mut c = self.clone();
        c.grid = self.grid.refine(r);
        c.beta_c.intercept /= f;
        let d = &mut c.beta_d;
        for v in [&mut d.intercept, &mut d.a, &mut d.l0, &mut d.l1, &mut d.y, &mut d.ld] {
            *v /= f;
        }
        let y = &mut c.beta_y;
        for v in [&mut y.intercept, &mut y.l0, &mut y.l1, &mut y.ld] {
            *v /= f;
        }
        if let Some(p) = &mut c.ld_process {
            p.intercept /= f;
            p.a /= f;
        }
        c
    }

    pub fn l_names(&self) -> Vec<String> {
        let mut v = vec!["l1".to_string()];
        if self.has_ld() {
            v.push("ld".into());
        }
        v
    }

    pub(crate) fn draw(&self, iv: InterventionSpec, j: u64) -> Trajectory {
        let block = 2 * iv.a_y as u64 + iv.a_d as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((block << 32) + j);
        let k_max = self.grid.k_max;
        let l0 = (rng.random::<f64>() < self.p_l0) as u8;
        let l1 = (rng.random::<f64>() < self.p_l1(iv.a_y)) as u8;
        let mut t = Trajectory {
            l0,
            l1,
            ld: vec![0; k_max + 1],
            y: vec![0; k_max + 1],
            d: vec![0; k_max + 1],
            c: vec![0; k_max + 1],
        };
        let mut s = State { l0, l1, ld: 0, y: 0 };
        let (mut dead, mut censored) = (false, false);
        for k in 1..=k_max {
            let u: [f64; 4] = [rng.random(), rng.random(), rng.random(), rng.random()];
            if censored {
                t.c[k] = 1;
                continue;
            }
            if !dead {
                if !iv.eliminate_censoring && u[0] < self.p_censor() {
                    censored = true;
                    t.c[k] = 1;
                    continue;
                }
                if !iv.eliminate_death && u[1] < self.p_death(s, iv.a_d) {
                    dead = true;
                } else {
                    if u[2] < self.p_recurrent(s) {
                        s.y += 1;
                    }
                    if self.has_ld() && s.ld == 0 && u[3] < self.p_ld_onset(iv.a_d) {
                        s.ld = 1;
                    }
                }
            }
            t.y[k] = s.y;
            t.d[k] = dead as u8;
            t.ld[k] = s.ld;
        }
        t
    }

    fn panel(&self, t: &Trajectory, iv: InterventionSpec, four_arm: bool, id: String) -> IntervalPanel {
        let k_max = self.grid.k_max;
        let cut = t.c.iter().position(|&c| c == 1).unwrap_or(k_max + 1);
        let obs = |k: usize| k < cut;
        IntervalPanel {
            id,
            a: iv.a_y,
            arms: four_arm.then_some((iv.a_y, iv.a_d)),
            l0: vec![t.l0 as i64],
            l: (0..=k_max)
                .map(|k| {
                    obs(k).then(|| {
                        let mut v = vec![t.l1 as i64];
                        if self.has_ld() {
                            v.push(t.ld[k] as i64);
                        }
                        v
                    })
                })
                .collect(),
            y: (0..=k_max).map(|k| obs(k).then_some(t.y[k])).collect(),
            d: (0..=k_max).map(|k| obs(k).then_some(t.d[k])).collect(),
            c: t.c.clone(),
        }
    }

    fn cohort(&self, arms: &[InterventionSpec], four_arm: bool, n: usize) -> Result<Cohort> {
        self.validate()?;
        let panels: Vec<IntervalPanel> = arms
            .iter()
            .enumerate()
            .flat_map(|(b, &iv)| (0..n).map(move |j| (b, iv, j)))
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(b, iv, j)| {
                let t = self.draw(iv, j as u64);
                self.panel(&t, iv, four_arm, (b * n + j + 1).to_string())
            })
            .collect();
        let mut c = Cohort {
            grid: self.grid,
            l0_names: vec!["l0".into()],
            l_names: self.l_names(),
            l_d: None,
            panels,
        };
        c.l_d = Some(if self.has_ld() { vec![1] } else { vec![] });
        c.validate()?;
        Ok(c)
    }
}

/// Factual cohort with `n_per_arm` individuals per arm. The simulated `L_D`
/// block (empty without an `L_D` process) is declared on the result.
pub fn simulate(cfg: &DgpConfig) -> Result<Cohort> {
    match cfg.arm_assignment {
        ArmAssignment::TwoArm => cfg.cohort(
            &[InterventionSpec::factual(0, 0), InterventionSpec::factual(1, 1)],
            false,
            cfg.n_per_arm,
        ),
        ArmAssignment::FourArm => {
            let arms: Vec<_> = [(0, 0), (0, 1), (1, 0), (1, 1)]
                .iter()
                .map(|&(y, d)| InterventionSpec::factual(y, d))
                .collect();
            cfg.cohort(&arms, true, cfg.n_per_arm)
        }
    }
}

/// `n_per_arm` individuals all assigned the intervention's arms.
pub fn simulate_intervened(cfg: &DgpConfig, iv: InterventionSpec) -> Result<Cohort> {
    let four = iv.a_y != iv.a_d || cfg.arm_assignment == ArmAssignment::FourArm;
    cfg.cohort(&[iv], four, cfg.n_per_arm)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn zero_cfg(k_max: usize) -> DgpConfig {
        DgpConfig {
            p_l0: 0.5,
            beta_l1_ay: 0.0,
            arm_assignment: ArmAssignment::TwoArm,
            n_per_arm: 50,
            seed: 3,
            grid: TimeGrid::new(k_max, 1.0, 0.0).unwrap(),
            beta_c: CensorCoef::default(),
            beta_d: DeathCoef::default(),
            beta_y: RecurrentCoef::default(),
            ld_process: None,
        }
    }

    #[test]
    fn unit_recurrent_hazard_increments_every_interval() {
        let mut cfg = zero_cfg(4);
        cfg.beta_y.intercept = 1.0;
        let c = simulate(&cfg).unwrap();
        for p in &c.panels {
            assert_eq!(p.y, vec![Some(0), Some(1), Some(2), Some(3), Some(4)]);
        }
    }

    #[test]
    fn unit_censoring_censors_at_first_interval() {
        let mut cfg = zero_cfg(3);
        cfg.beta_c.intercept = 1.0;
        cfg.beta_y.intercept = 0.5;
        let c = simulate(&cfg).unwrap();
        for p in &c.panels {
            assert_eq!(p.c, vec![0, 1, 1, 1]);
            assert_eq!(p.y, vec![Some(0), None, None, None]);
        }
        let iv = simulate_intervened(&cfg, InterventionSpec::total(1)).unwrap();
        assert!(iv.panels.iter().all(|p| p.censor_index().is_none()));
    }

    #[test]
    fn eliminating_death_removes_it() {
        let mut cfg = zero_cfg(3);
        cfg.beta_d.intercept = 0.6;
        let c = simulate_intervened(&cfg, InterventionSpec::direct(0)).unwrap();
        assert!(c.panels.iter().all(|p| p.death_index().is_none()));
        let f = simulate_intervened(&cfg, InterventionSpec::total(0)).unwrap();
        assert!(f.panels.iter().any(|p| p.death_index().is_some()));
    }

    #[test]
    fn two_arm_stream_matches_intervened_factual_arm() {
        let mut cfg = zero_cfg(5);
        cfg.beta_c.intercept = 0.1;
        cfg.beta_d.intercept = 0.1;
        cfg.beta_y.intercept = 0.3;
        let two = simulate(&cfg).unwrap();
        let one = simulate_intervened(&cfg, InterventionSpec::factual(1, 1)).unwrap();
        for (a, b) in two.panels[cfg.n_per_arm..].iter().zip(&one.panels) {
            assert_eq!((&a.y, &a.d, &a.c, &a.l), (&b.y, &b.d, &b.c, &b.l));
        }
    }

    #[test]
    fn rejects_out_of_range_hazard() {
        let mut cfg = zero_cfg(10);
        cfg.beta_d.intercept = 0.5;
        cfg.beta_d.y = 0.1;
        assert!(matches!(cfg.validate(), Err(Error::InvalidHazard { .. })));
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = zero_cfg(4);
        cfg.ld_process = Some(LdProcess { intercept: 0.1, a: 0.2 });
        let back = DgpConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert!(DgpConfig::from_toml("p_l0 = 0.5\nbogus = 1\n").is_err());
    }
}
