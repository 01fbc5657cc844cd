//! Nonparametric bootstrap over individuals with percentile bands.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::continuous::{estimate, ContinuousOptions, Engine};
use crate::curve::{Band, Bands, CurveEstimate, StdErrors};
use crate::data::{Cohort, HistorySet};
use crate::discrete::{estimate_discrete, fit_nuisances, HistoryMode, Method};
use crate::error::{Error, Result};
use crate::estimand::EstimandSpec;

pub const MIN_REPS: usize = 50;
/// Largest tolerated share of failed replicates.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub reps: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            reps: 400,
            level: 0.95,
            seed: 1,
        }
    }
}

/// Resampled indices of replicate `rep`.
pub fn resample(n: usize, seed: u64, rep: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn band(reps: &[&[f64]], len: usize, level: f64) -> (Band, Vec<f64>) {
    let alpha = (1.0 - level) / 2.0;
    let mut b = Band {
        lower: Vec::with_capacity(len),
        upper: Vec::with_capacity(len),
    };
    let mut se = Vec::with_capacity(len);
    let m = reps.len() as f64;
    for t in 0..len {
        let mut col: Vec<f64> = reps.iter().map(|r| r[t]).collect();
        col.sort_by(f64::total_cmp);
        b.lower.push(quantile(&col, alpha));
        b.upper.push(quantile(&col, 1.0 - alpha));
        let mean = col.iter().sum::<f64>() / m;
        se.push((col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt());
    }
    (b, se)
}

/// Runs `estimator` on `opts.reps` resamples of `n` units in parallel and
/// attaches percentile bands and bootstrap standard errors to `point`.
pub fn bootstrap_with<F>(point: CurveEstimate, n: usize, opts: &BootstrapOptions, estimator: F) -> Result<CurveEstimate>
where
    F: Fn(&[usize]) -> Result<CurveEstimate> + Sync,
{
    if opts.reps < MIN_REPS {
        return Err(Error::InvalidArgument(format!(
            "bootstrap needs at least {MIN_REPS} replicates"
        )));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::InvalidArgument("level must lie in (0, 1)".into()));
    }
    let results: Vec<Result<CurveEstimate>> = (0..opts.reps as u64)
        .into_par_iter()
        .map(|rep| estimator(&resample(n, opts.seed, rep)))
        .collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut last = None;
    for r in results {
        match r {
            Ok(c) if c.times.len() == point.times.len() => ok.push(c),
            Ok(_) => last = Some("replicate curve has a different length".to_string()),
            Err(e) => last = Some(e.to_string()),
        }
    }
    let failed = opts.reps - ok.len();
    if failed as f64 > MAX_FAILURE_RATE * opts.reps as f64 {
        return Err(Error::ReplicateFailure {
            failed,
            total: opts.reps,
            last: last.unwrap_or_default(),
        });
    }
    let len = point.times.len();
    let pick = |f: fn(&CurveEstimate) -> &[f64]| ok.iter().map(f).collect::<Vec<_>>();
    let (y, se_y) = band(&pick(|c| &c.y), len, opts.level);
    let (s, se_s) = band(&pick(|c| &c.s), len, opts.level);
    let (d, se_d) = band(&pick(|c| &c.d), len, opts.level);
    let comp = if point.composite.is_some() && ok.iter().all(|c| c.composite.is_some()) {
        Some(band(&pick(|c| c.composite.as_deref().unwrap_or(&[])), len, opts.level))
    } else {
        None
    };
    let mut out = point;
    out.se = Some(StdErrors {
        y: se_y,
        s: se_s,
        d: se_d,
        composite: comp.as_ref().map(|c| c.1.clone()),
    });
    out.ci = Some(Bands {
        level: opts.level,
        y,
        s,
        d,
        composite: comp.map(|c| c.0),
    });
    out.set_meta("bootstrap_reps", opts.reps);
    out.set_meta("bootstrap_failed", failed);
    out.set_meta("bootstrap_seed", opts.seed);
    Ok(out)
}

pub fn bootstrap_continuous(
    set: &HistorySet,
    spec: &EstimandSpec,
    engine: Engine,
    est_opts: &ContinuousOptions,
    opts: &BootstrapOptions,
) -> Result<CurveEstimate> {
    let point = estimate(set, spec, engine, est_opts)?;
    bootstrap_with(point, set.len(), opts, |idx| {
        estimate(&set.select(idx), spec, engine, est_opts)
    })
}

pub fn bootstrap_discrete(
    cohort: &Cohort,
    spec: &EstimandSpec,
    method: Method,
    mode: HistoryMode,
    opts: &BootstrapOptions,
) -> Result<CurveEstimate> {
    let run = |c: &Cohort| estimate_discrete(c, &fit_nuisances(c, mode), spec, method);
    let point = run(cohort)?;
    bootstrap_with(point, cohort.panels.len(), opts, |idx| run(&cohort.select(idx)))
}
