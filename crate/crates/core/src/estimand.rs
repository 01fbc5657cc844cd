//! Counterfactual estimand identifiers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Estimand {
    /// Expected recurrent count under `A=a` with censoring eliminated.
    TotalEffect {
        a: u8,
    },
    /// Cumulative incidence of the competing event under `A=a`.
    TotalEffectSurvival {
        a: u8,
    },
    /// Expected count under `A=a` with both death and censoring eliminated.
    ControlledDirect {
        a: u8,
    },
    Separable {
        a_y: u8,
        a_d: u8,
    },
    SeparableSurvival {
        a_y: u8,
        a_d: u8,
    },
    /// `E[Y_k] / E[mu_k]` with `mu_k` the expected number of intervals alive.
    WhileAlive {
        a: u8,
    },
    /// `E[Y_k / mu_k]`.
    AverageIndividualRate {
        a: u8,
    },
    /// `E[weight_d * I(D_k = 0) + weight_y * Y_k]`.
    CompositeSum {
        a: u8,
        weight_d: f64,
        weight_y: f64,
    },
    /// `E[(m - min(Y_k, m)) I(D_k = 0)]`.
    ReverseCount {
        a: u8,
        m: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimandSpec {
    #[serde(flatten)]
    pub estimand: Estimand,
    /// Last grid index of the curve.
    pub horizon: usize,
}

impl Estimand {
    /// Arm feeding the recurrent/L_Y pathway and arm feeding the death/L_D pathway.
    pub fn arms(&self) -> (u8, u8) {
        match *self {
            Estimand::Separable { a_y, a_d } | Estimand::SeparableSurvival { a_y, a_d } => (a_y, a_d),
            Estimand::TotalEffect { a }
            | Estimand::TotalEffectSurvival { a }
            | Estimand::ControlledDirect { a }
            | Estimand::WhileAlive { a }
            | Estimand::AverageIndividualRate { a }
            | Estimand::CompositeSum { a, .. }
            | Estimand::ReverseCount { a, .. } => (a, a),
        }
    }

    pub fn is_survival(&self) -> bool {
        matches!(
            self,
            Estimand::TotalEffectSurvival { .. } | Estimand::SeparableSurvival { .. }
        )
    }

    pub fn is_composite(&self) -> bool {
        matches!(
            self,
            Estimand::WhileAlive { .. }
                | Estimand::AverageIndividualRate { .. }
                | Estimand::CompositeSum { .. }
                | Estimand::ReverseCount { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            Estimand::TotalEffect { .. } => "total_effect",
            Estimand::TotalEffectSurvival { .. } => "total_effect_survival",
            Estimand::ControlledDirect { .. } => "controlled_direct",
            Estimand::Separable { .. } => "separable",
            Estimand::SeparableSurvival { .. } => "separable_survival",
            Estimand::WhileAlive { .. } => "while_alive",
            Estimand::AverageIndividualRate { .. } => "average_individual_rate",
            Estimand::CompositeSum { .. } => "composite_sum",
            Estimand::ReverseCount { .. } => "reverse_count",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a_y, a_d) = self.arms();
        if a_y > 1 || a_d > 1 {
            return Err(Error::InvalidArgument(format!("{}: arms must be 0 or 1", self.name())));
        }
        match *self {
            Estimand::ReverseCount { m, .. } if m < 1 => {
                Err(Error::InvalidArgument("reverse_count needs m >= 1".into()))
            }
            Estimand::CompositeSum { weight_d, weight_y, .. } if !(weight_d.is_finite() && weight_y.is_finite()) => {
                Err(Error::InvalidArgument("composite weights must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

impl EstimandSpec {
    pub fn new(estimand: Estimand, horizon: usize) -> Self {
        EstimandSpec { estimand, horizon }
    }

    pub fn validate(&self, k_max: usize) -> Result<()> {
        self.estimand.validate()?;
        if self.horizon > k_max {
            return Err(Error::InvalidArgument(format!(
                "horizon {} exceeds k_max {k_max}",
                self.horizon
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for EstimandSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (a_y, a_d) = self.estimand.arms();
        match self.estimand {
            Estimand::Separable { .. } | Estimand::SeparableSurvival { .. } => {
                write!(f, "{}(a_y={a_y},a_d={a_d})@{}", self.estimand.name(), self.horizon)
            }
            _ => write!(f, "{}(a={a_y})@{}", self.estimand.name(), self.horizon),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape_is_flat() {
        let s = EstimandSpec::new(Estimand::Separable { a_y: 0, a_d: 1 }, 5);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"kind":"separable","a_y":0,"a_d":1,"horizon":5}"#);
        let back: EstimandSpec = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_bad_arms_and_horizon() {
        assert!(EstimandSpec::new(Estimand::TotalEffect { a: 2 }, 1)
            .validate(3)
            .is_err());
        assert!(EstimandSpec::new(Estimand::TotalEffect { a: 1 }, 4)
            .validate(3)
            .is_err());
        assert!(EstimandSpec::new(Estimand::ReverseCount { a: 1, m: 0 }, 1)
            .validate(3)
            .is_err());
    }
}
