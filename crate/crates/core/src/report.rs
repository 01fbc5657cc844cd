//! Estimate-versus-truth comparison tables.

use serde::{Deserialize, Serialize};

use crate::curve::CurveEstimate;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub time: f64,
    pub estimate: f64,
    pub truth: f64,
    pub error: f64,
    pub se: Option<f64>,
    pub error_over_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub spec: String,
    pub engine: String,
    /// Where the standard error came from.
    pub se_source: String,
    pub rows: Vec<ReportRow>,
    pub max_abs_error: f64,
    pub max_abs_error_over_se: Option<f64>,
}

fn sd_over_root_n(truth: &CurveEstimate, key: &str, n: f64) -> Option<Vec<f64>> {
    let sd: Vec<f64> = serde_json::from_value(truth.meta.get(key)?.clone()).ok()?;
    Some(sd.iter().map(|s| s / n.sqrt()).collect())
}

/// Compares the estimand's value curves. The standard error at each time is
/// `sqrt(se_est^2 + se_truth^2)`; `se_est` is the bootstrap SE when the
/// estimate has one, otherwise the truth's per-individual SD over
/// `sqrt(n_arm)`.
pub fn compare(est: &CurveEstimate, truth: &CurveEstimate) -> Result<Report> {
    if est.spec != truth.spec {
        return Err(Error::InvalidArgument(format!(
            "estimate is {} but truth is {}",
            est.spec, truth.spec
        )));
    }
    if est.times.len() != truth.times.len() {
        return Err(Error::InvalidArgument("curves have different lengths".into()));
    }
    let comp = crate::curve::Component::of(&est.spec.estimand);
    let key = match comp {
        crate::curve::Component::D => "sd_d",
        crate::curve::Component::Composite => "sd_composite",
        _ => "sd_y",
    };
    let (se_est, mut source) = match (&est.se, est.meta.get("n_arm").and_then(|v| v.as_f64())) {
        (Some(se), _) => (se_component(se, comp), "bootstrap".to_string()),
        (None, Some(n)) => (sd_over_root_n(truth, key, n), "truth_sd_over_root_n".to_string()),
        _ => (None, "none".to_string()),
    };
    let se_truth = truth.se.as_ref().and_then(|se| se_component(se, comp));
    if se_truth.is_some() {
        source.push_str("+truth_se");
    }
    let (e, t) = (est.values(), truth.values());
    let mut rows = Vec::with_capacity(e.len());
    for i in 0..e.len() {
        let a = se_est.as_ref().map(|v| v[i]);
        let b = se_truth.as_ref().map(|v| v[i]);
        let se = match (a, b) {
            (None, None) => None,
            (a, b) => Some((a.unwrap_or(0.0).powi(2) + b.unwrap_or(0.0).powi(2)).sqrt()),
        };
        let error = e[i] - t[i];
        rows.push(ReportRow {
            time: est.times[i],
            estimate: e[i],
            truth: t[i],
            error,
            se,
            error_over_se: se.filter(|&s| s > 0.0).map(|s| error / s),
        });
    }
    let max_abs_error = rows.iter().map(|r| r.error.abs()).fold(0.0, f64::max);
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.error_over_se.map(f64::abs)).collect();
    Ok(Report {
        spec: est.spec.to_string(),
        engine: est.engine.clone(),
        se_source: source,
        max_abs_error,
        max_abs_error_over_se: (!ratios.is_empty()).then(|| ratios.iter().copied().fold(0.0, f64::max)),
        rows,
    })
}

fn se_component(se: &crate::curve::StdErrors, c: crate::curve::Component) -> Option<Vec<f64>> {
    use crate::curve::Component;
    match c {
        Component::Y => Some(se.y.clone()),
        Component::S => Some(se.s.clone()),
        Component::D => Some(se.d.clone()),
        Component::Composite => se.composite.clone(),
    }
}

impl Report {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["time", "estimate", "truth", "error", "se", "error_over_se"])?;
        let opt = |v: Option<f64>| v.map_or("NA".to_string(), |x| x.to_string());
        for r in &self.rows {
            out.write_record([
                r.time.to_string(),
                r.estimate.to_string(),
                r.truth.to_string(),
                r.error.to_string(),
                opt(r.se),
                opt(r.error_over_se),
            ])?;
        }
        out.flush().map_err(|e| Error::Io {
            path: "<report>".into(),
            source: e,
        })
    }
}
