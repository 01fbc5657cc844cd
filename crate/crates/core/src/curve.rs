//! Estimated or true curves over a time grid.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimand::{Estimand, EstimandSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Pointwise percentile bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    pub level: f64,
    pub y: Band,
    pub s: Band,
    pub d: Band,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composite: Option<Band>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdErrors {
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub d: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composite: Option<Vec<f64>>,
}

/// `y`, `s`, `d` follow the recursion's three components. For the discrete
/// engines `s = 1 - d`; for Hajek/HT `s` is the internal survival factor
/// and stays at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveEstimate {
    pub spec: EstimandSpec,
    pub engine: String,
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub d: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composite: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<Bands>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se: Option<StdErrors>,
    #[serde(default)]
    pub meta: BTreeMap<String, serde_json::Value>,
}

/// Component of a curve that carries the estimand's value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Y,
    S,
    D,
    Composite,
}

impl Component {
    pub fn of(e: &Estimand) -> Component {
        if e.is_survival() {
            Component::D
        } else if e.is_composite() {
            Component::Composite
        } else {
            Component::Y
        }
    }
}

impl CurveEstimate {
    pub fn new(spec: EstimandSpec, engine: &str, times: Vec<f64>, y: Vec<f64>, d: Vec<f64>) -> Self {
        let s = d.iter().map(|v| 1.0 - v).collect();
        CurveEstimate {
            spec,
            engine: engine.to_string(),
            times,
            y,
            s,
            d,
            composite: None,
            ci: None,
            se: None,
            meta: BTreeMap::new(),
        }
    }

    pub fn component(&self, c: Component) -> Option<&[f64]> {
        match c {
            Component::Y => Some(&self.y),
            Component::S => Some(&self.s),
            Component::D => Some(&self.d),
            Component::Composite => self.composite.as_deref(),
        }
    }

    /// The estimand's value curve.
    pub fn values(&self) -> &[f64] {
        self.component(Component::of(&self.spec.estimand)).unwrap_or(&self.y)
    }

    pub fn value_at(&self, k: usize) -> f64 {
        self.values()[k]
    }

    pub fn set_meta(&mut self, key: &str, value: impl Serialize) {
        self.meta.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(serde_json::Value::Null),
        );
    }

    /// One row per time: `time,y,s,d[,composite][,<c>_lower,<c>_upper...]`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["time".to_string(), "y".into(), "s".into(), "d".into()];
        if self.composite.is_some() {
            header.push("composite".into());
        }
        let mut bands: Vec<(&str, &Band)> = Vec::new();
        if let Some(ci) = &self.ci {
            bands.extend([("y", &ci.y), ("s", &ci.s), ("d", &ci.d)]);
            if let Some(c) = &ci.composite {
                bands.push(("composite", c));
            }
        }
        for (name, _) in &bands {
            header.push(format!("{name}_lower"));
            header.push(format!("{name}_upper"));
        }
        out.write_record(&header)?;
        for i in 0..self.times.len() {
            let mut row = vec![self.times[i], self.y[i], self.s[i], self.d[i]];
            if let Some(c) = &self.composite {
                row.push(c[i]);
            }
            for (_, b) in &bands {
                row.push(b.lower[i]);
                row.push(b.upper[i]);
            }
            out.write_record(row.iter().map(|v| v.to_string()))?;
        }
        out.flush().map_err(|e| crate::error::Error::Io {
            path: "<csv>".into(),
            source: e,
        })?;
        Ok(())
    }
}
