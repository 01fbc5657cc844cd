use std::fs::File;
use std::io::{self, BufWriter, Write};

use serde_json::{json, Value};

use recurrent_causal::bootstrap::{bootstrap_continuous, bootstrap_discrete, BootstrapOptions};
use recurrent_causal::continuous::{estimate, ContinuousOptions, Engine};
use recurrent_causal::data::{infer_wide_k_max, load_long, load_panel, write_long, write_wide, Cohort, HistorySet};
use recurrent_causal::dgp::{simulate, DgpConfig};
use recurrent_causal::discrete::{estimate_discrete, fit_nuisances, HistoryMode, Method};
use recurrent_causal::hazard::ZeroDenominatorPolicy;
use recurrent_causal::oracle::{exact_truth, mc_truth};
use recurrent_causal::report::compare;
use recurrent_causal::weights::Scheme;
use recurrent_causal::{CurveEstimate, Error, Estimand, EstimandSpec, Result, TimeGrid};

use crate::provenance::{block, read, sha256_file, sha256_str};
use crate::{
    BootstrapArgs, Cli, Command, DiscreteMethod, EngineName, EstimandArgs, EstimandName, EstimateArgs, Format,
    OracleArgs, OracleMethod, ReportArgs, SchemeName, SimulateArgs,
};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Schema => print_json(&crate::schema::schemas()),
        Command::Simulate(a) => run_simulate(a),
        Command::Oracle(a) => run_oracle(a),
        Command::Estimate(a) => run_estimate(a),
        Command::Bootstrap(a) => run_bootstrap(a),
        Command::Report(a) => run_report(a),
    }
}

fn io_err(path: &str) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_string(),
        source,
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out).map_err(io_err("<stdout>"))
}

fn emit_curve(c: &CurveEstimate, csv: bool) -> Result<()> {
    if csv {
        c.write_csv(io::stdout().lock())
    } else {
        print_json(c)
    }
}

fn load_config(path: &str) -> Result<(DgpConfig, String)> {
    let text = read(path)?;
    Ok((DgpConfig::from_toml(&text)?, sha256_str(&text)))
}

fn run_simulate(a: SimulateArgs) -> Result<()> {
    let (mut cfg, hash) = load_config(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.n_per_arm {
        cfg.n_per_arm = n;
    }
    cfg.validate()?;
    let cohort = simulate(&cfg)?;
    let write = |w: &mut dyn Write| match a.format {
        Format::Wide => write_wide(&cohort, w),
        Format::Long => write_long(&cohort.to_histories(), w),
    };
    match &a.out {
        None => write(&mut io::stdout().lock()),
        Some(path) => {
            let mut f = BufWriter::new(File::create(path).map_err(io_err(path))?);
            write(&mut f)?;
            f.flush().map_err(io_err(path))?;
            let prov = block(
                "simulate",
                Some(cfg.seed),
                json!({ "config": hash, "output": sha256_file(path)? }),
                json!({ "config": cfg, "format": format!("{:?}", a.format).to_lowercase(),
                        "l_d": cohort.l_d.as_ref().map(|ix| ix.iter().map(|&i| cohort.l_names[i].clone()).collect::<Vec<_>>()) }),
            );
            let side = format!("{path}.provenance.json");
            std::fs::write(&side, serde_json::to_string_pretty(&prov)? + "\n").map_err(io_err(&side))
        }
    }
}

fn arm(v: Option<u8>, flag: &str, name: EstimandName) -> Result<u8> {
    v.ok_or_else(|| Error::InvalidArgument(format!("{name:?} needs --{flag}")))
}

fn estimand_spec(e: &EstimandArgs, k_max: usize) -> Result<EstimandSpec> {
    let n = e.estimand;
    let single = || arm(e.a, "a", n);
    let estimand = match n {
        EstimandName::Total => Estimand::TotalEffect { a: single()? },
        EstimandName::TotalSurvival => Estimand::TotalEffectSurvival { a: single()? },
        EstimandName::Cde => Estimand::ControlledDirect { a: single()? },
        EstimandName::Separable => Estimand::Separable {
            a_y: arm(e.ay, "ay", n)?,
            a_d: arm(e.ad, "ad", n)?,
        },
        EstimandName::SeparableSurvival => Estimand::SeparableSurvival {
            a_y: arm(e.ay, "ay", n)?,
            a_d: arm(e.ad, "ad", n)?,
        },
        EstimandName::WhileAlive => Estimand::WhileAlive { a: single()? },
        EstimandName::AverageRate => Estimand::AverageIndividualRate { a: single()? },
        EstimandName::CompositeSum => Estimand::CompositeSum {
            a: single()?,
            weight_d: e.weight_d,
            weight_y: e.weight_y,
        },
        EstimandName::ReverseCount => Estimand::ReverseCount { a: single()?, m: e.m },
    };
    let spec = EstimandSpec::new(estimand, e.horizon.unwrap_or(k_max));
    spec.validate(k_max)?;
    Ok(spec)
}

fn run_oracle(a: OracleArgs) -> Result<()> {
    let (mut cfg, hash) = load_config(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let spec = estimand_spec(&a.estimand, cfg.grid.k_max)?;
    let mut truth = match a.method {
        OracleMethod::Exact => exact_truth(&cfg, &spec)?,
        OracleMethod::Mc => mc_truth(&cfg, &spec, a.draws)?,
    };
    let seed = (a.method == OracleMethod::Mc).then_some(cfg.seed);
    truth.set_meta(
        "provenance",
        block(
            "oracle",
            seed,
            json!({ "config": hash }),
            json!({ "method": format!("{:?}", a.method).to_lowercase(), "draws": a.draws, "config": cfg }),
        ),
    );
    emit_curve(&truth, a.csv)
}

enum Data {
    Panel(Cohort),
    Histories(HistorySet),
}

impl Data {
    fn k_max(&self) -> usize {
        match self {
            Data::Panel(c) => c.grid.k_max,
            Data::Histories(h) => h.grid.map_or(0, |g| g.k_max),
        }
    }

    fn cohort(&self) -> Result<Cohort> {
        match self {
            Data::Panel(c) => Ok(c.clone()),
            Data::Histories(h) => {
                let grid = h
                    .grid
                    .ok_or_else(|| Error::InvalidArgument("histories have no grid".into()))?;
                Ok(h.to_cohort(&grid)?.0)
            }
        }
    }

    fn histories(&self) -> HistorySet {
        match self {
            Data::Panel(c) => c.to_histories(),
            Data::Histories(h) => h.clone(),
        }
    }
}

fn load_data(a: &EstimateArgs) -> Result<Data> {
    let mut data = match a.format {
        Format::Wide => {
            let k = match a.k_max {
                Some(k) => k,
                None => infer_wide_k_max(&a.input)?,
            };
            Data::Panel(load_panel(&a.input, TimeGrid::new(k, a.dt, a.origin)?)?)
        }
        Format::Long => {
            let k = a
                .k_max
                .ok_or_else(|| Error::InvalidArgument("long input needs --k-max".into()))?;
            Data::Histories(load_long(&a.input, TimeGrid::new(k, a.dt, a.origin)?)?)
        }
    };
    if let Some(ld) = &a.ld {
        let names: Vec<String> = ld
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        match &mut data {
            Data::Panel(c) => c.declare_l_d(&names)?,
            Data::Histories(h) => h.declare_l_d(&names)?,
        }
    }
    Ok(data)
}

fn continuous_options(a: &EstimateArgs) -> ContinuousOptions {
    let mut o = ContinuousOptions::default();
    o.weights.bandwidth = a.bandwidth;
    o.weights.scheme = match a.scheme {
        SchemeName::ProductLimit => Scheme::ProductLimit,
        SchemeName::Euler => Scheme::Euler,
    };
    if a.strict_theta {
        o.weights.zero_denominator = ZeroDenominatorPolicy::Error;
    }
    o.weights.theta_in_risk_set = !a.no_theta_risk_set;
    o
}

fn history_mode(s: &str) -> Result<HistoryMode> {
    s.parse().map_err(Error::InvalidArgument)
}

fn engine(e: EngineName) -> Engine {
    match e {
        EngineName::RiskSet => Engine::RiskSet,
        EngineName::Hajek => Engine::Hajek,
        EngineName::Ht => Engine::Ht,
    }
}

fn method(m: DiscreteMethod) -> Method {
    match m {
        DiscreteMethod::Gformula => Method::GFormula,
        DiscreteMethod::Ipw => Method::Ipw,
    }
}

fn options_echo(a: &EstimateArgs, data: &Data, opts: &ContinuousOptions) -> Value {
    let bandwidth = match data {
        Data::Panel(c) => opts.weights.bandwidth.unwrap_or(5.0 * c.grid.delta_t),
        Data::Histories(h) => opts.weights.bandwidth_for(h),
    };
    match a.discrete {
        Some(m) => {
            json!({ "discrete": method(m).name(), "history": a.history, "format": format!("{:?}", a.format).to_lowercase(),
                           "dt": a.dt, "origin": a.origin, "ld": a.ld })
        }
        None => json!({ "engine": engine(a.engine).name(), "bandwidth": bandwidth, "scheme": opts.weights.scheme,
                        "zero_denominator": opts.weights.zero_denominator, "rank_policy": opts.weights.rank_policy,
                        "theta_in_risk_set": opts.weights.theta_in_risk_set, "format": format!("{:?}", a.format).to_lowercase(),
                        "dt": a.dt, "origin": a.origin, "ld": a.ld }),
    }
}

fn run_estimate(a: EstimateArgs) -> Result<()> {
    let data = load_data(&a)?;
    let spec = estimand_spec(&a.estimand, data.k_max())?;
    let opts = continuous_options(&a);
    let mut est = match a.discrete {
        Some(m) => {
            let mode = history_mode(&a.history)?;
            let cohort = data.cohort()?;
            estimate_discrete(&cohort, &fit_nuisances(&cohort, mode), &spec, method(m))?
        }
        None => estimate(&data.histories(), &spec, engine(a.engine), &opts)?,
    };
    est.set_meta(
        "provenance",
        block(
            "estimate",
            None,
            json!({ "input": sha256_file(&a.input)? }),
            options_echo(&a, &data, &opts),
        ),
    );
    emit_curve(&est, a.csv)
}

fn run_bootstrap(b: BootstrapArgs) -> Result<()> {
    if let Some(j) = b.jobs {
        if j == 0 {
            return Err(Error::InvalidArgument("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let a = &b.estimate;
    let data = load_data(a)?;
    let spec = estimand_spec(&a.estimand, data.k_max())?;
    let opts = continuous_options(a);
    let bopts = BootstrapOptions {
        reps: b.reps,
        level: b.level,
        seed: b.seed,
    };
    let mut est = match a.discrete {
        Some(m) => bootstrap_discrete(&data.cohort()?, &spec, method(m), history_mode(&a.history)?, &bopts)?,
        None => bootstrap_continuous(&data.histories(), &spec, engine(a.engine), &opts, &bopts)?,
    };
    let mut echo = options_echo(a, &data, &opts);
    echo["reps"] = json!(b.reps);
    echo["level"] = json!(b.level);
    echo["jobs"] = json!(b.jobs.unwrap_or_else(rayon::current_num_threads));
    est.set_meta(
        "provenance",
        block(
            "bootstrap",
            Some(b.seed),
            json!({ "input": sha256_file(&a.input)? }),
            echo,
        ),
    );
    emit_curve(&est, a.csv)
}

fn load_curve(path: &str) -> Result<CurveEstimate> {
    Ok(serde_json::from_str(&read(path)?)?)
}

fn run_report(a: ReportArgs) -> Result<()> {
    let est = load_curve(&a.estimate)?;
    let truth = load_curve(&a.oracle)?;
    let report = compare(&est, &truth)?;
    if a.csv {
        report.write_csv(io::stdout().lock())
    } else {
        let mut v = serde_json::to_value(&report)?;
        v["provenance"] = block(
            "report",
            None,
            json!({ "estimate": sha256_file(&a.estimate)?, "oracle": sha256_file(&a.oracle)? }),
            json!({}),
        );
        print_json(&v)
    }
}
