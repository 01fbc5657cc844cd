//! Saturated discrete-time g-formula and IPW estimators.

mod gformula;
mod ipw;
mod nuisance;
mod strata;

pub use nuisance::{fit_nuisances, NuisanceModel};
pub use strata::HistoryMode;

pub(crate) use strata::{PartialHistory, Step};

use serde::{Deserialize, Serialize};

use crate::curve::CurveEstimate;
use crate::data::Cohort;
use crate::error::{Error, Result};
use crate::estimand::{Estimand, EstimandSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    GFormula,
    Ipw,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::GFormula => "gformula",
            Method::Ipw => "ipw",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Regime {
    Total(u8),
    Direct(u8),
    Separable { a_y: u8, a_d: u8 },
}

impl Regime {
    fn of(e: &Estimand) -> Regime {
        match *e {
            Estimand::ControlledDirect { a } => Regime::Direct(a),
            Estimand::Separable { a_y, a_d } | Estimand::SeparableSurvival { a_y, a_d } => {
                Regime::Separable { a_y, a_d }
            }
            _ => Regime::Total(e.arms().0),
        }
    }

    pub fn arms(self) -> (u8, u8) {
        match self {
            Regime::Total(a) | Regime::Direct(a) => (a, a),
            Regime::Separable { a_y, a_d } => (a_y, a_d),
        }
    }

    /// Separable regimes with distinct arms factor `L` into `(L_D, L_Y)`;
    /// with equal arms the joint law is used so the total effect is recovered exactly.
    pub fn needs_split(self) -> bool {
        matches!(self, Regime::Separable { a_y, a_d } if a_y != a_d)
    }
}

/// Cumulative expected count and cumulative incidence for `k = 0..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCurve {
    pub y: Vec<f64>,
    pub d: Vec<f64>,
}

impl DiscreteCurve {
    fn from_increments(mut dy: Vec<f64>, mut dd: Vec<f64>) -> Self {
        for k in 1..dy.len() {
            dy[k] += dy[k - 1];
            dd[k] += dd[k - 1];
        }
        DiscreteCurve { y: dy, d: dd }
    }
}

fn check(nuis: &NuisanceModel, regime: Regime) -> Result<()> {
    if regime.needs_split() && nuis.l_d().is_none() {
        return Err(Error::MissingLdPartition);
    }
    Ok(())
}

fn run(cohort: &Cohort, nuis: &NuisanceModel, regime: Regime, horizon: usize, method: Method) -> Result<DiscreteCurve> {
    check(nuis, regime)?;
    match method {
        Method::GFormula => gformula::propagate(nuis, regime, horizon),
        Method::Ipw => ipw::weighted(cohort, nuis, regime, horizon),
    }
}

pub fn gformula_total(cohort: &Cohort, nuis: &NuisanceModel, a: u8, k: usize) -> Result<f64> {
    Ok(run(cohort, nuis, Regime::Total(a), k, Method::GFormula)?.y[k])
}

pub fn ipw_total(cohort: &Cohort, nuis: &NuisanceModel, a: u8, k: usize) -> Result<f64> {
    Ok(run(cohort, nuis, Regime::Total(a), k, Method::Ipw)?.y[k])
}

pub fn ipw_total_survival(cohort: &Cohort, nuis: &NuisanceModel, a: u8, k: usize) -> Result<f64> {
    Ok(run(cohort, nuis, Regime::Total(a), k, Method::Ipw)?.d[k])
}

pub fn gformula_cde(cohort: &Cohort, nuis: &NuisanceModel, a: u8, k: usize) -> Result<f64> {
    Ok(run(cohort, nuis, Regime::Direct(a), k, Method::GFormula)?.y[k])
}

pub fn ipw_cde(cohort: &Cohort, nuis: &NuisanceModel, a: u8, k: usize) -> Result<f64> {
    Ok(run(cohort, nuis, Regime::Direct(a), k, Method::Ipw)?.y[k])
}

pub fn gformula_separable(cohort: &Cohort, nuis: &NuisanceModel, a_y: u8, a_d: u8, k: usize) -> Result<f64> {
    Ok(run(cohort, nuis, Regime::Separable { a_y, a_d }, k, Method::GFormula)?.y[k])
}

pub fn ipw_separable(cohort: &Cohort, nuis: &NuisanceModel, a_y: u8, a_d: u8, k: usize) -> Result<f64> {
    Ok(run(cohort, nuis, Regime::Separable { a_y, a_d }, k, Method::Ipw)?.y[k])
}

/// Sample mean of the bare total-effect weight `I(A=a) I(C_k=0) / (pi_A prod pi_C)`.
pub fn ipw_weight_mean(cohort: &Cohort, nuis: &NuisanceModel, a: u8, k: usize) -> Result<f64> {
    let mut s = 0.0;
    for p in cohort.panels.iter().filter(|p| p.a == a) {
        s += ipw::censoring_weight(p, nuis, a, k)?.unwrap_or(0.0);
    }
    Ok(s / cohort.panels.len() as f64)
}

/// Composite estimand curve for `k = 0..=horizon`.
pub fn composite_estimates(cohort: &Cohort, nuis: &NuisanceModel, spec: &EstimandSpec) -> Result<Vec<f64>> {
    let h = spec.horizon;
    let e = spec.estimand;
    let a = e.arms().0;
    if let Estimand::WhileAlive { .. } = e {
        let c = run(cohort, nuis, Regime::Total(a), h, Method::Ipw)?;
        return while_alive(&c);
    }
    let integrand: Box<dyn Fn(u32, bool, usize) -> f64> = match e {
        Estimand::AverageIndividualRate { .. } => Box::new(|y, _, mu| y as f64 / mu as f64),
        Estimand::CompositeSum { weight_d, weight_y, .. } => {
            Box::new(move |y, dead, _| weight_d * (!dead as u8 as f64) + weight_y * y as f64)
        }
        Estimand::ReverseCount { m, .. } => Box::new(move |y, dead, _| if dead { 0.0 } else { (m - y.min(m)) as f64 }),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "{} is not a composite estimand",
                e.name()
            )));
        }
    };
    let mut out = vec![0.0; h + 1];
    for p in cohort.panels.iter().filter(|p| p.a == a) {
        for (k, v) in out.iter_mut().enumerate() {
            let Some(w) = ipw::censoring_weight(p, nuis, a, k)? else {
                break;
            };
            let y = p.y[k].expect("uncensored");
            let dead = p.d[k] == Some(1);
            let mu = p.death_index().map_or(k + 1, |di| di.min(k + 1));
            *v += w * integrand(y, dead, mu);
        }
    }
    let n = cohort.panels.len() as f64;
    Ok(out.into_iter().map(|v| v / n).collect())
}

fn while_alive(c: &DiscreteCurve) -> Result<Vec<f64>> {
    let mut mu = 0.0;
    c.y.iter()
        .zip(&c.d)
        .enumerate()
        .map(|(k, (y, d))| {
            mu += 1.0 - d;
            if mu == 0.0 {
                return Err(Error::DivisionByZero(format!("expected time alive is 0 at k={k}")));
            }
            Ok(y / mu)
        })
        .collect()
}

/// Evaluates `spec` with saturated nuisances fitted on `cohort`.
pub fn estimate_discrete(
    cohort: &Cohort,
    nuis: &NuisanceModel,
    spec: &EstimandSpec,
    method: Method,
) -> Result<CurveEstimate> {
    spec.validate(cohort.grid.k_max)?;
    let h = spec.horizon;
    let times: Vec<f64> = (0..=h).map(|k| cohort.grid.time(k)).collect();
    let regime = Regime::of(&spec.estimand);
    let c = run(cohort, nuis, regime, h, method)?;
    let mut est = CurveEstimate::new(*spec, method.name(), times, c.y.clone(), c.d.clone());
    if spec.estimand.is_composite() {
        est.composite = Some(match (method, spec.estimand) {
            (Method::GFormula, Estimand::WhileAlive { .. }) => while_alive(&c)?,
            (Method::GFormula, _) => {
                return Err(Error::Unsupported {
                    spec: spec.to_string(),
                    engine: method.name().into(),
                })
            }
            (Method::Ipw, _) => composite_estimates(cohort, nuis, spec)?,
        });
    }
    est.set_meta("n", cohort.panels.len());
    est.set_meta("history", nuis.mode().to_string());
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::IntervalPanel;
    use crate::grid::TimeGrid;

    fn panel(a: u8, y: [u32; 3], d: [u8; 3]) -> IntervalPanel {
        IntervalPanel {
            id: format!("{a}{y:?}{d:?}"),
            a,
            arms: None,
            l0: vec![0],
            l: vec![Some(vec![]); 3],
            y: y.map(Some).to_vec(),
            d: d.map(Some).to_vec(),
            c: vec![0; 3],
        }
    }

    fn cohort() -> Cohort {
        let panels = vec![
            panel(1, [0, 1, 1], [0, 0, 0]),
            panel(1, [0, 0, 0], [0, 1, 1]),
            panel(0, [0, 0, 1], [0, 0, 0]),
        ];
        Cohort::new(TimeGrid::new(2, 1.0, 0.0).unwrap(), vec!["l0".into()], vec![], panels).unwrap()
    }

    #[test]
    fn hand_computed_total_and_direct() {
        let c = cohort();
        let nuis = fit_nuisances(&c, HistoryMode::Full);
        for m in [Method::GFormula, Method::Ipw] {
            let total = estimate_discrete(&c, &nuis, &EstimandSpec::new(Estimand::TotalEffect { a: 1 }, 2), m).unwrap();
            assert_eq!(total.y, vec![0.0, 0.5, 0.5], "{m:?}");
            assert_eq!(total.d, vec![0.0, 0.5, 0.5], "{m:?}");
            let cde =
                estimate_discrete(&c, &nuis, &EstimandSpec::new(Estimand::ControlledDirect { a: 1 }, 2), m).unwrap();
            assert_eq!(cde.y, vec![0.0, 1.0, 1.0], "{m:?}");
            let arm0 = estimate_discrete(&c, &nuis, &EstimandSpec::new(Estimand::TotalEffect { a: 0 }, 2), m).unwrap();
            assert_eq!(arm0.y, vec![0.0, 0.0, 1.0], "{m:?}");
        }
    }

    #[test]
    fn bare_weights_average_to_one() {
        let c = cohort();
        let nuis = fit_nuisances(&c, HistoryMode::Full);
        for a in 0..=1 {
            assert!((ipw_weight_mean(&c, &nuis, a, 2).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn distinct_arms_need_partition() {
        let c = cohort();
        let nuis = fit_nuisances(&c, HistoryMode::Full);
        let spec = EstimandSpec::new(Estimand::Separable { a_y: 1, a_d: 0 }, 2);
        assert!(matches!(
            estimate_discrete(&c, &nuis, &spec, Method::Ipw),
            Err(Error::MissingLdPartition)
        ));
    }

    #[test]
    fn while_alive_divides_by_time_alive() {
        let c = cohort();
        let nuis = fit_nuisances(&c, HistoryMode::Full);
        let spec = EstimandSpec::new(Estimand::WhileAlive { a: 1 }, 2);
        let est = estimate_discrete(&c, &nuis, &spec, Method::GFormula).unwrap();
        assert_eq!(est.composite.unwrap()[1], 0.5 / 1.5);
    }
}
