//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Set `ACCEPTANCE_SKIP_SLOW=1` to skip the bootstrap coverage study.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use recurrent_causal::bootstrap::{bootstrap_continuous, quantile, resample, BootstrapOptions};
use recurrent_causal::continuous::{
    build_risk_set_integrators, estimate, estimate_at, solve_system, ContinuousOptions, Engine,
};
use recurrent_causal::data::{Cohort, HistorySet};
use recurrent_causal::dgp::simulate;
use recurrent_causal::discrete::{
    estimate_discrete, fit_nuisances, gformula_total, ipw_cde, ipw_total, HistoryMode, Method,
};
use recurrent_causal::hazard::{
    fit_additive, nelson_aalen, CumulativeHazard, EventKind, RankPolicy, Regressor, SmoothedTheta,
    ZeroDenominatorPolicy,
};
use recurrent_causal::oracle::{exact_truth, mc_truth};
use recurrent_causal::weights::{
    fit_models, solve_weight, IndividualWeights, Scheme, ThetaRule, WeightKind, WeightOptions, WeightTrajectory,
};
use recurrent_causal::{CurveEstimate, Estimand, EstimandSpec, TimeGrid};

use common::{fixture, max_abs_diff, median, preset};

const EXACT_TOL: f64 = 1e-10;
const WEIGHT_FIXTURE_TOL: f64 = 1e-12;
const SE_MULTIPLE: f64 = 3.0;
const ORACLE_DRAWS: usize = 1_000_000;
const CONSISTENCY_SEEDS: u64 = 20;
const CONSISTENCY_MIN_PASS: usize = 18;
const MEDIAN_REPLICATES: u64 = 100;
const CONVERGENCE_GAP_SHARE: f64 = 0.02;
const WEIGHT_BOOT_REPS: u64 = 200;
const ORDERING_BOOT_REPS: usize = 200;
const IQR_PER_SD: f64 = 1.349;
const COVERAGE_SIMS: u64 = 200;
const COVERAGE_BOOT_REPS: usize = 400;
const COVERAGE_RANGE: (f64, f64) = (0.90, 0.98);

struct Outcome {
    pass: bool,
    detail: String,
}

/// Name, check, and whether it belongs to the slow suite.
type Criterion = (&'static str, fn() -> Outcome, bool);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn spec(e: Estimand, h: usize) -> EstimandSpec {
    EstimandSpec::new(e, h)
}

fn meta_vec(c: &CurveEstimate, key: &str) -> Vec<f64> {
    serde_json::from_value(c.meta[key].clone()).expect("meta vector")
}

/// Largest gap between the three estimators and a per-arm reference curve.
fn reduction_gap(p_l0: f64, standardized: bool) -> f64 {
    let mut cfg = preset();
    cfg.n_per_arm = 500;
    cfg.p_l0 = p_l0;
    cfg.beta_c.intercept = 0.0;
    cfg.beta_d = Default::default();
    let cohort = simulate(&cfg).unwrap();
    let nuis = fit_nuisances(&cohort, HistoryMode::Full);
    let n = cohort.panels.len() as f64;
    let mut worst: f64 = 0.0;
    for a in 0..=1u8 {
        for k in 0..=cfg.grid.k_max {
            let mean_in = |l0: Option<i64>| {
                let v: Vec<f64> = cohort
                    .panels
                    .iter()
                    .filter(|p| p.a == a && l0.is_none_or(|l| p.l0[0] == l))
                    .map(|p| p.y[k].unwrap() as f64)
                    .collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            let reference = if standardized {
                (0..=1)
                    .map(|l| cohort.panels.iter().filter(|p| p.l0[0] == l).count() as f64 / n * mean_in(Some(l)))
                    .sum()
            } else {
                mean_in(None)
            };
            for v in [
                ipw_total(&cohort, &nuis, a, k).unwrap(),
                ipw_cde(&cohort, &nuis, a, k).unwrap(),
                gformula_total(&cohort, &nuis, a, k).unwrap(),
            ] {
                worst = worst.max((v - reference).abs());
            }
        }
    }
    worst
}

fn reduction_identity() -> Outcome {
    let raw = reduction_gap(0.0, false);
    let standardized = reduction_gap(0.5, true);
    outcome(
        raw.max(standardized) <= EXACT_TOL,
        format!("max |estimator - arm mean| = {raw:.2e} without L0; = {standardized:.2e} against the L0-standardized arm mean (tol {EXACT_TOL:.0e})"),
    )
}

/// Largest |separable(a,a) - total(a)| over both arms and the discrete methods
/// that are evaluable on `cohort`; returns the positivity failures separately.
fn discrete_collapse(cohort: &Cohort, mode: HistoryMode, methods: &[Method]) -> (f64, Vec<String>) {
    let k = cohort.grid.k_max;
    let nuis = fit_nuisances(cohort, mode);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for a in 0..=1u8 {
        let pairs = [
            (Estimand::Separable { a_y: a, a_d: a }, Estimand::TotalEffect { a }),
            (
                Estimand::SeparableSurvival { a_y: a, a_d: a },
                Estimand::TotalEffectSurvival { a },
            ),
        ];
        for (sep, tot) in pairs {
            for &m in methods {
                match (
                    estimate_discrete(cohort, &nuis, &spec(sep, k), m),
                    estimate_discrete(cohort, &nuis, &spec(tot, k), m),
                ) {
                    (Ok(x), Ok(y)) => worst = worst.max(max_abs_diff(&x.y, &y.y)).max(max_abs_diff(&x.d, &y.d)),
                    (x, _) => failures.push(format!(
                        "{} a={a}: {}",
                        m.name(),
                        x.err().map_or("total failed".into(), |e| e.to_string())
                    )),
                }
            }
        }
    }
    (worst, failures)
}

fn separable_collapse() -> Outcome {
    let cfg = preset();
    let k = cfg.grid.k_max;
    let cohort = simulate(&cfg).unwrap();
    let set = cohort.to_histories();
    let (ipw_gap, ipw_fail) = discrete_collapse(&cohort, HistoryMode::Full, &[Method::Ipw]);
    let (_, gf_fail) = discrete_collapse(&cohort, HistoryMode::Markov(0), &[Method::GFormula]);
    let support = simulate(&fixture("k3_binary_l.toml")).unwrap();
    let (gf_gap, gf_support_fail) = discrete_collapse(&support, HistoryMode::Full, &[Method::GFormula]);
    let opts = ContinuousOptions::default();
    let mut cont_gap: f64 = 0.0;
    for a in 0..=1u8 {
        let pairs = [
            (Estimand::Separable { a_y: a, a_d: a }, Estimand::TotalEffect { a }),
            (
                Estimand::SeparableSurvival { a_y: a, a_d: a },
                Estimand::TotalEffectSurvival { a },
            ),
        ];
        for (sep, tot) in pairs {
            for e in [Engine::RiskSet, Engine::Hajek, Engine::Ht] {
                let x = estimate(&set, &spec(sep, k), e, &opts).unwrap();
                let y = estimate(&set, &spec(tot, k), e, &opts).unwrap();
                cont_gap = cont_gap
                    .max(max_abs_diff(&x.y, &y.y))
                    .max(max_abs_diff(&x.d, &y.d))
                    .max(max_abs_diff(&x.s, &y.s));
            }
        }
    }
    let gf_note = if gf_fail.is_empty() {
        "g-formula evaluable on the preset".to_string()
    } else {
        format!(
            "g-formula not evaluable on the preset ({} positivity failures, e.g. {})",
            gf_fail.len(),
            gf_fail[0]
        )
    };
    let pass = ipw_fail.is_empty() && gf_support_fail.is_empty() && ipw_gap.max(cont_gap).max(gf_gap) <= EXACT_TOL;
    outcome(
        pass,
        format!(
            "max |separable(a,a) - total(a)|: discrete IPW {ipw_gap:.2e}, risk-set/Hajek/HT {cont_gap:.2e} on the preset; g-formula {gf_gap:.2e} on the full-support fixture; {gf_note}"
        ),
    )
}

fn gformula_equals_ipw() -> Outcome {
    let cfg = fixture("k3_binary_l.toml");
    let cohort = simulate(&cfg).unwrap();
    let nuis = fit_nuisances(&cohort, HistoryMode::Full);
    let k = cfg.grid.k_max;
    let mut estimands = Vec::new();
    for a in 0..=1u8 {
        estimands.extend([Estimand::TotalEffect { a }, Estimand::ControlledDirect { a }]);
    }
    for (a_y, a_d) in [(0, 1), (1, 0)] {
        estimands.extend([
            Estimand::Separable { a_y, a_d },
            Estimand::SeparableSurvival { a_y, a_d },
        ]);
    }
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for e in estimands {
        let s = spec(e, k);
        match (
            estimate_discrete(&cohort, &nuis, &s, Method::GFormula),
            estimate_discrete(&cohort, &nuis, &s, Method::Ipw),
        ) {
            (Ok(g), Ok(i)) => worst = worst.max(max_abs_diff(g.values(), i.values())),
            (g, i) => failures.push(format!("{}: {:?} {:?}", e.name(), g.err(), i.err())),
        }
    }
    outcome(
        worst <= EXACT_TOL && failures.is_empty(),
        format!(
            "n={}, max |g-formula - IPW| = {worst:.2e}{}",
            cohort.panels.len(),
            if failures.is_empty() {
                String::new()
            } else {
                format!("; errors: {failures:?}")
            }
        ),
    )
}

fn oracle_consistency() -> Outcome {
    let base = preset();
    let k = base.grid.k_max;
    let opts = ContinuousOptions::default();
    let n_arm = base.n_per_arm as f64;
    let mut pass = true;
    let mut parts = Vec::new();
    for a in 0..=1u8 {
        let s = spec(Estimand::TotalEffect { a }, k);
        let truth = mc_truth(&base, &s, ORACLE_DRAWS).unwrap();
        let se = truth.se.clone().unwrap();
        let (sd_y, sd_d) = (meta_vec(&truth, "sd_y"), meta_vec(&truth, "sd_d"));
        for engine in [Engine::RiskSet, Engine::Hajek] {
            let mut ok = 0;
            for seed in 1..=CONSISTENCY_SEEDS {
                let mut cfg = base.clone();
                cfg.seed = seed;
                let est = estimate(&simulate(&cfg).unwrap().to_histories(), &s, engine, &opts).unwrap();
                let within = (0..=k).all(|i| {
                    let sy = (se.y[i].powi(2) + sd_y[i].powi(2) / n_arm).sqrt();
                    let sd = (se.d[i].powi(2) + sd_d[i].powi(2) / n_arm).sqrt();
                    (est.y[i] - truth.y[i]).abs() <= SE_MULTIPLE * sy
                        && (est.d[i] - truth.d[i]).abs() <= SE_MULTIPLE * sd
                });
                ok += within as usize;
            }
            pass &= ok >= CONSISTENCY_MIN_PASS;
            parts.push(format!("a={a} {engine} {ok}/{CONSISTENCY_SEEDS}"));
        }
    }
    let s = spec(Estimand::TotalEffect { a: 1 }, k);
    let truth = exact_truth(&base, &s).unwrap();
    for engine in [Engine::RiskSet, Engine::Hajek] {
        let mut med = Vec::new();
        for n in [250usize, 1000, 4000] {
            let (mut ey, mut ed) = (Vec::new(), Vec::new());
            for r in 0..MEDIAN_REPLICATES {
                let mut cfg = base.clone();
                cfg.n_per_arm = n;
                cfg.seed = 10_000 + r;
                let est = estimate(&simulate(&cfg).unwrap().to_histories(), &s, engine, &opts).unwrap();
                ey.push((est.y[k] - truth.y[k]).abs());
                ed.push((est.d[k] - truth.d[k]).abs());
            }
            med.push((median(&mut ey), median(&mut ed)));
        }
        let decreasing = med.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 < w[0].1);
        pass &= decreasing;
        parts.push(format!(
            "{engine} median final error y {:.4}/{:.4}/{:.4} d {:.4}/{:.4}/{:.4}",
            med[0].0, med[1].0, med[2].0, med[0].1, med[1].1, med[2].1
        ));
    }
    outcome(
        pass,
        format!("seeds within {SE_MULTIPLE} SE at every time: {}", parts.join("; ")),
    )
}

/// Right-continuous step value of a grid curve at `t`.
fn step_value(times: &[f64], values: &[f64], t: f64) -> f64 {
    let i = times.partition_point(|&s| s <= t);
    values[i.saturating_sub(1)]
}

fn discrete_to_continuous() -> Outcome {
    let base = preset();
    let fine = 16;
    let mut cfg = base.refine(fine);
    cfg.seed = base.seed;
    let set = simulate(&cfg).unwrap().to_histories();
    let k = base.grid.k_max;
    let horizon = base.grid.end();
    let mut eval: Vec<f64> = set
        .histories
        .iter()
        .filter(|h| h.a == 1)
        .flat_map(|h| h.recurrent_times.iter().copied().chain(h.death_time))
        .chain((0..=k * fine).map(|i| cfg.grid.time(i)))
        .filter(|&t| t <= horizon)
        .collect();
    eval.sort_by(f64::total_cmp);
    eval.dedup();
    let cont = estimate_at(
        &set,
        &spec(Estimand::TotalEffect { a: 1 }, k * fine),
        Engine::RiskSet,
        &ContinuousOptions::default(),
        &eval,
    )
    .unwrap();
    let curve_max = cont.y.iter().copied().fold(0.0, f64::max);
    let (mut sup, mut at_grid) = (Vec::new(), Vec::new());
    for r in [1usize, 2, 4, 8, 16] {
        let grid = TimeGrid::new(k * r, base.grid.delta_t / r as f64, base.grid.origin).unwrap();
        let (cohort, _) = set.to_cohort(&grid).unwrap();
        let nuis = fit_nuisances(&cohort, HistoryMode::Markov(0));
        let disc = estimate_discrete(
            &cohort,
            &nuis,
            &spec(Estimand::TotalEffect { a: 1 }, k * r),
            Method::Ipw,
        )
        .unwrap();
        let gap = eval
            .iter()
            .zip(&cont.y)
            .map(|(&t, &c)| (step_value(&disc.times, &disc.y, t) - c).abs())
            .fold(0.0, f64::max);
        sup.push(gap);
        let coarse = (0..=k)
            .map(|j| {
                let t = base.grid.time(j);
                (step_value(&disc.times, &disc.y, t) - step_value(&eval, &cont.y, t)).abs()
            })
            .fold(0.0, f64::max);
        at_grid.push(coarse);
    }
    let monotone = sup.windows(2).all(|w| w[1] < w[0]);
    let last = *sup.last().unwrap();
    outcome(
        monotone && last < CONVERGENCE_GAP_SHARE * curve_max,
        format!(
            "sup gap over [0,{horizon}] for dt=1..1/16: {:.4?}; final {:.2}% of max {curve_max:.3}; gap at unit times {:.4?}",
            sup,
            100.0 * last / curve_max,
            at_grid
        ),
    )
}

fn km_na_identities() -> Outcome {
    let cfg = preset();
    let set = simulate(&cfg).unwrap().to_histories();
    let unit: Vec<Option<IndividualWeights>> = set
        .histories
        .iter()
        .map(|_| {
            Some(IndividualWeights {
                r: WeightTrajectory::constant(WeightKind::Product, set.origin, 1.0),
                r_bar: WeightTrajectory::constant(WeightKind::Product, set.origin, 1.0),
                r_d: 1.0,
                theta_d: None,
            })
        })
        .collect();
    let mut exact = true;
    let mut checked = 0;
    for a in 0..=1u8 {
        let arm: Vec<_> = set.histories.iter().filter(|h| h.a == a).collect();
        let mut deaths: Vec<f64> = arm.iter().filter_map(|h| h.observed_death()).collect();
        deaths.sort_by(f64::total_cmp);
        deaths.dedup();
        let paths = build_risk_set_integrators(&set, &unit, a, set.end, false).unwrap();
        let (_, s, _) = solve_system(&paths, &deaths);
        let mut km = 1.0;
        for (i, &t) in deaths.iter().enumerate() {
            let d = arm.iter().filter(|h| h.observed_death() == Some(t)).count() as f64;
            let y = arm.iter().filter(|h| h.exit_time(set.end) >= t).count() as f64;
            km *= 1.0 - d / y;
            exact &= s[i] == km;
            checked += 1;
        }
    }
    let fit = fit_additive(
        &set,
        &EventKind::Death,
        &[Regressor::Intercept],
        RankPolicy::DropDependent,
    )
    .unwrap();
    let na = nelson_aalen(&set, &EventKind::Death).unwrap();
    let mut deaths: Vec<f64> = set.histories.iter().filter_map(|h| h.observed_death()).collect();
    deaths.sort_by(f64::total_cmp);
    deaths.dedup();
    let hand: Vec<f64> = deaths
        .iter()
        .map(|&t| {
            let d = set.histories.iter().filter(|h| h.observed_death() == Some(t)).count() as f64;
            let y = set.histories.iter().filter(|h| h.exit_time(set.end) >= t).count() as f64;
            d / y
        })
        .collect();
    let na_exact = fit.times == deaths && fit.increments == hand && na.increments == hand;
    outcome(
        exact && na_exact,
        format!(
            "{checked} product-limit points exact: {exact}; intercept-only fit = Nelson-Aalen at {} times: {na_exact}",
            hand.len()
        ),
    )
}

fn stabilized_censoring_means(set: &HistorySet, times: &[f64]) -> Vec<f64> {
    let models = fit_models(set, &Estimand::TotalEffect { a: 1 }, &WeightOptions::default()).unwrap();
    let (full, marg) = (models.censor_full.unwrap(), models.censor_marginal.unwrap());
    let b = WeightOptions::default().bandwidth_for(set);
    let mut sum = vec![0.0; times.len()];
    let mut cnt = vec![0usize; times.len()];
    for h in &set.histories {
        let mut th = ThetaRule::Smoothed(SmoothedTheta::new(b, ZeroDenominatorPolicy::CarryLast).unwrap());
        let driver: Vec<f64> = h.observed_censor().into_iter().collect();
        let w = solve_weight(
            WeightKind::CensorStabilized,
            &marg.evaluate(h, h.a, set.end),
            &full.evaluate(h, h.a, set.end),
            &driver,
            &mut th,
            Scheme::ProductLimit,
            set.origin,
        )
        .unwrap();
        let exit = h.exit_time(set.end);
        for (i, &t) in times.iter().enumerate() {
            if exit >= t {
                sum[i] += w.before(t);
                cnt[i] += 1;
            }
        }
    }
    sum.iter().zip(&cnt).map(|(s, &c)| s / c as f64).collect()
}

fn weight_sanity() -> Outcome {
    let cfg = preset();
    let set = simulate(&cfg).unwrap().to_histories();
    let mut identical = true;
    for kind in [EventKind::Censor, EventKind::Death] {
        let m = fit_additive(
            &set,
            &kind,
            &recurrent_causal::weights::full_regressors(&set),
            RankPolicy::DropDependent,
        )
        .unwrap();
        for h in &set.histories {
            let a = m.evaluate(h, h.a, set.end);
            let mut th = ThetaRule::Smoothed(SmoothedTheta::new(5.0, ZeroDenominatorPolicy::Error).unwrap());
            let driver: Vec<f64> = h.observed_death().into_iter().chain(h.observed_censor()).collect();
            let w = solve_weight(
                WeightKind::Product,
                &a,
                &a,
                &driver,
                &mut th,
                Scheme::ProductLimit,
                set.origin,
            )
            .unwrap();
            identical &= w.values.iter().all(|&v| v == 1.0);
        }
    }
    let den = CumulativeHazard {
        times: vec![1.0, 2.0],
        increments: vec![0.1, 0.2],
    };
    let w = solve_weight(
        WeightKind::CensorUnstabilized,
        &CumulativeHazard::default(),
        &den,
        &[],
        &mut ThetaRule::Zero,
        Scheme::ProductLimit,
        0.0,
    )
    .unwrap();
    let fixture_err = (w.last() - 1.0 / (0.9 * 0.8)).abs();
    let times: Vec<f64> = (1..=cfg.grid.k_max).map(|k| cfg.grid.time(k)).collect();
    let point = stabilized_censoring_means(&set, &times);
    let reps: Vec<Vec<f64>> = (0..WEIGHT_BOOT_REPS)
        .map(|r| {
            let idx = resample(set.len(), 77, r);
            stabilized_censoring_means(&set.select(&idx), &times)
        })
        .collect();
    let mut worst_z: f64 = 0.0;
    for i in 0..times.len() {
        let m = reps.iter().map(|r| r[i]).sum::<f64>() / reps.len() as f64;
        let se = (reps.iter().map(|r| (r[i] - m).powi(2)).sum::<f64>() / (reps.len() - 1) as f64).sqrt();
        let z = if se > 0.0 {
            (point[i] - 1.0).abs() / se
        } else if point[i] == 1.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst_z = worst_z.max(z);
    }
    outcome(
        identical && fixture_err <= WEIGHT_FIXTURE_TOL && worst_z <= SE_MULTIPLE,
        format!(
            "identical models give W=1 exactly: {identical}; |W - 1/(0.9*0.8)| = {fixture_err:.1e}; stabilized W_C at-risk mean max |mean-1|/SE = {worst_z:.2}"
        ),
    )
}

/// Bootstrap SE as IQR / 1.349 of the replicate final-time survival.
fn robust_bootstrap_se(set: &HistorySet, s: &EstimandSpec, opts: &ContinuousOptions, seed: u64) -> f64 {
    let k = s.horizon;
    let mut reps: Vec<f64> = (0..ORDERING_BOOT_REPS as u64)
        .filter_map(|r| estimate(&set.select(&resample(set.len(), seed, r)), s, Engine::RiskSet, opts).ok())
        .map(|e| 1.0 - e.d[k])
        .collect();
    reps.sort_by(f64::total_cmp);
    (quantile(&reps, 0.75) - quantile(&reps, 0.25)) / IQR_PER_SD
}

fn four_arm_ordering() -> Outcome {
    let cfg = preset();
    let k = cfg.grid.k_max;
    let set = simulate(&cfg).unwrap().to_histories();
    let mut opts = ContinuousOptions::default();
    opts.weights.bandwidth = Some(cfg.grid.delta_t);
    let arms = [(0u8, 0u8), (0, 1), (1, 0), (1, 1)];
    let mut truth = Vec::new();
    let mut est = Vec::new();
    let mut within = true;
    let mut parts = Vec::new();
    for (a_y, a_d) in arms {
        let s = spec(Estimand::SeparableSurvival { a_y, a_d }, k);
        let t = 1.0 - exact_truth(&cfg, &s).unwrap().d[k];
        let v = 1.0 - estimate(&set, &s, Engine::RiskSet, &opts).unwrap().d[k];
        let se = robust_bootstrap_se(&set, &s, &opts, 8);
        within &= (v - t).abs() <= SE_MULTIPLE * se;
        parts.push(format!("({a_y},{a_d}) truth {t:.4} est {v:.4} se {se:.4}"));
        truth.push(t);
        est.push(v);
    }
    let top = |v: &[f64]| (0..4).all(|i| i == 1 || v[1] > v[i]);
    let pass = top(&truth) && top(&est) && within;
    outcome(
        pass,
        format!(
            "final survival {}; oracle top (0,1): {}; estimate top (0,1): {}; all within {SE_MULTIPLE} SE: {within}",
            parts.join(", "),
            top(&truth),
            top(&est)
        ),
    )
}

fn bootstrap_coverage() -> Outcome {
    let base = preset();
    let k = base.grid.k_max;
    let mid = k.div_ceil(2);
    let s = spec(Estimand::TotalEffect { a: 1 }, k);
    let truth = exact_truth(&base, &s).unwrap();
    let opts = ContinuousOptions::default();
    let (mut cov_y, mut cov_d) = (0usize, 0usize);
    for r in 0..COVERAGE_SIMS {
        let mut cfg = base.clone();
        cfg.seed = 20_000 + r;
        let set = simulate(&cfg).unwrap().to_histories();
        let boot = BootstrapOptions {
            reps: COVERAGE_BOOT_REPS,
            level: 0.95,
            seed: r,
        };
        let e = bootstrap_continuous(&set, &s, Engine::RiskSet, &opts, &boot).unwrap();
        let ci = e.ci.unwrap();
        cov_y += (ci.y.lower[mid] <= truth.y[mid] && truth.y[mid] <= ci.y.upper[mid]) as usize;
        cov_d += (ci.d.lower[mid] <= truth.d[mid] && truth.d[mid] <= ci.d.upper[mid]) as usize;
    }
    let (fy, fd) = (cov_y as f64 / COVERAGE_SIMS as f64, cov_d as f64 / COVERAGE_SIMS as f64);
    outcome(
        (COVERAGE_RANGE.0..=COVERAGE_RANGE.1).contains(&fy),
        format!("total effect a=1 at k={mid}: coverage of y {fy:.3} (d {fd:.3}) over {COVERAGE_SIMS} simulations x {COVERAGE_BOOT_REPS} reps"),
    )
}

fn main() -> ExitCode {
    let skip_slow = std::env::var("ACCEPTANCE_SKIP_SLOW").is_ok_and(|v| v == "1");
    let criteria: [Criterion; 9] = [
        ("reduction identity", reduction_identity, false),
        ("separable collapse", separable_collapse, false),
        ("g-formula equals IPW", gformula_equals_ipw, false),
        ("oracle consistency", oracle_consistency, false),
        ("discrete to continuous convergence", discrete_to_continuous, false),
        ("Kaplan-Meier and Nelson-Aalen identities", km_na_identities, false),
        ("weight sanity", weight_sanity, false),
        ("four-arm ordering", four_arm_ordering, false),
        ("bootstrap coverage", bootstrap_coverage, true),
    ];
    let mut failed = 0;
    for (i, (name, run, slow)) in criteria.iter().enumerate() {
        if *slow && skip_slow {
            println!("SKIP criterion {} ({name}): slow suite disabled", i + 1);
            continue;
        }
        let start = Instant::now();
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!(
            "{status} criterion {} ({name}): {} [{:.1}s]",
            i + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
