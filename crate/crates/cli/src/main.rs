//! `resetsearch` command-line front end.

mod output;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use resetsearch::analysis::{
    estimate_growth, expected_search_time_with, optimize_constant_rate, optimize_family, FamilyBox, GrowthModelChoice,
    ObjectiveOptions, OptimizationReport,
};
use resetsearch::harmonic::RiccatiOptions;
use resetsearch::hitting::{
    expected_hitting_constant, expected_hitting_interval, HittingEvaluator, HittingTimeResult, Method, PhiChoice,
};
use resetsearch::model::{ModelSpec, RateFunction, Support, TargetDistribution};
use resetsearch::montecarlo::{simulate_hitting, survival_curve, McEstimate, SimConfig};
use resetsearch::Error;
use serde_json::{json, Value};

use output::{cell, emit, write_text, CliError, Emitted, Format, Table};
use spec::ModelArgs;

#[derive(Parser, Debug)]
#[command(name = "resetsearch", version, about = "Expected hitting times for Brownian search with resetting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Write to this file instead of stdout.
    #[arg(long, short, global = true, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// E₀T_a for a list of targets.
    Eval {
        #[command(flatten)]
        model: ModelArgs,
        /// Target positions, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        a: Vec<f64>,
        #[command(flatten)]
        numeric: NumericArgs,
    },
    /// Expected search time ∫ E₀T_a μ(da) for the model's target law.
    Expect {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        numeric: NumericArgs,
        /// Relative tolerance of the target quadrature.
        #[arg(long)]
        rel_tol: Option<f64>,
    },
    /// Minimizes the expected search time over a rate family.
    Optimize {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = Family::Constant)]
        family: Family,
        #[arg(long)]
        m_lo: Option<f64>,
        #[arg(long)]
        m_hi: Option<f64>,
        #[arg(long)]
        ln_gamma_lo: Option<f64>,
        #[arg(long)]
        ln_gamma_hi: Option<f64>,
    },
    /// Monte Carlo estimate of E₀T_a.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_negative_numbers = true)]
        a: f64,
        /// Number of paths.
        #[arg(long, default_value_t = 200_000)]
        n: usize,
        #[arg(long, default_value_t = 1e-4)]
        dt: f64,
        #[arg(long, default_value_t = 1e3)]
        t_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Disable the Brownian-bridge crossing correction.
        #[arg(long)]
        no_bridge: bool,
        /// Also report the empirical survival P(T_a > t) at these times.
        #[arg(long, value_delimiter = ',')]
        survival: Vec<f64>,
    },
    /// Fits the growth of E₀T_a along a grid of targets.
    Growth {
        #[command(flatten)]
        model: ModelArgs,
        /// Target grid, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        grid: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Law::PowerLaw)]
        law: Law,
        /// Exponent l of the log-polynomial law log E ≈ K|a|^{l+1}.
        #[arg(long, allow_negative_numbers = true)]
        l: Option<f64>,
    },
    /// Prints the assembled model as JSON (re-readable with --model).
    DumpConfig {
        #[command(flatten)]
        model: ModelArgs,
    },
}

#[derive(clap::Args, Debug, Clone)]
struct NumericArgs {
    /// Harmonic function used by the quadrature path.
    #[arg(long, value_enum, default_value_t = Phi::Phi3)]
    phi: Phi,
    /// Half-width of the bulk region of the numeric harmonic functions.
    #[arg(long)]
    half_width: Option<f64>,
    /// Local error tolerance of the Riccati integration.
    #[arg(long)]
    riccati_tol: Option<f64>,
}

impl NumericArgs {
    fn riccati(&self) -> RiccatiOptions {
        let mut o = RiccatiOptions { half_width: self.half_width, ..RiccatiOptions::default() };
        if let Some(t) = self.riccati_tol {
            o.tol = t;
        }
        o
    }

    fn choice(&self) -> PhiChoice {
        match self.phi {
            Phi::Phi3 => PhiChoice::Phi3,
            Phi::Phi1 => PhiChoice::Phi1,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Phi {
    Phi3,
    Phi1,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Family {
    Constant,
    Quad,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Law {
    PowerLaw,
    LogPoly,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("RESETSEARCH_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: RESETSEARCH_THREADS must be a positive integer, got '{v}'");
                return ExitCode::from(2);
            }
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(p) = &e.payload {
                let out = Emitted { json: p.clone(), table: None };
                let _ = emit(&out, Format::Json, cli.output.as_ref());
            }
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let out = match &cli.command {
        Command::Eval { model, a, numeric } => cmd_eval(&model.build()?, a, numeric)?,
        Command::Expect { model, numeric, rel_tol } => cmd_expect(&model.build()?, numeric, *rel_tol)?,
        Command::Optimize { model, family, m_lo, m_hi, ln_gamma_lo, ln_gamma_hi } => {
            let spec = model.build()?;
            cmd_optimize(&spec, *family, [*m_lo, *m_hi, *ln_gamma_lo, *ln_gamma_hi])?
        }
        Command::Simulate { model, a, n, dt, t_max, seed, no_bridge, survival } => {
            let cfg = SimConfig { dt: *dt, n_paths: *n, t_max: *t_max, seed: *seed, bridge_correction: !no_bridge };
            cmd_simulate(&model.build()?, *a, &cfg, survival)?
        }
        Command::Growth { model, grid, law, l } => cmd_growth(&model.build()?, grid, *law, *l)?,
        Command::DumpConfig { model } => {
            let text = model.build()?.to_json()?;
            return write_text(&format!("{text}\n"), cli.output.as_ref());
        }
    };
    emit(&out, cli.format, cli.output.as_ref())
}

fn target_of(spec: &ModelSpec) -> Result<&TargetDistribution, CliError> {
    spec.target
        .as_ref()
        .ok_or_else(|| CliError::parse("this subcommand needs a target (use --target or a model file)"))
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::ClosedForm => "closed_form",
        Method::Phi3Quadrature => "phi3_quadrature",
        Method::Phi1Quadrature => "phi1_quadrature",
        Method::IntervalClosedForm => "interval_closed_form",
        Method::IntervalGeneral => "interval_general",
    }
}

fn cmd_eval(spec: &ModelSpec, targets: &[f64], numeric: &NumericArgs) -> Result<Emitted, CliError> {
    let d = spec.d;
    let results: Vec<HittingTimeResult> = match (&spec.support, &spec.rate) {
        (Support::Interval { l1, l2 }, rate) => targets
            .iter()
            .map(|&a| expected_hitting_interval(rate, d, *l1, *l2, a))
            .collect::<Result<_, Error>>()?,
        (Support::FullLine, RateFunction::Constant { r }) => targets
            .iter()
            .map(|&a| expected_hitting_constant(*r, d, a))
            .collect::<Result<_, Error>>()?,
        (Support::FullLine, rate) => {
            let ev = HittingEvaluator::new(rate, d, numeric.choice(), &numeric.riccati())?;
            targets.iter().map(|&a| ev.eval(a)).collect::<Result<_, Error>>()?
        }
    };
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    for r in &results {
        let method = method_name(r.method);
        match r.log_value {
            Some(l) => {
                let value = l.exp();
                rows.push(vec![cell(r.a), cell(value), cell(l), method.into(), cell(r.error_estimate)]);
                let log_value = if l.is_finite() { json!(l) } else { Value::Null };
                json_rows.push(json!({
                    "a": r.a, "finite": true, "value": value, "log_value": log_value,
                    "method": method, "error_estimate": r.error_estimate,
                }));
            }
            None => {
                rows.push(vec![cell(r.a), "inf".into(), "inf".into(), method.into(), cell(r.error_estimate)]);
                json_rows.push(json!({
                    "a": r.a, "finite": false, "method": method, "error_estimate": r.error_estimate,
                }));
            }
        }
    }
    Ok(Emitted {
        json: json!({ "rows": json_rows }),
        table: Some(Table { header: vec!["a", "value", "log_value", "method", "error_estimate"], rows }),
    })
}

fn opt_json(v: Option<f64>) -> Value {
    match v {
        Some(x) => json!({ "finite": true, "value": x }),
        None => json!({ "finite": false }),
    }
}

fn cmd_expect(spec: &ModelSpec, numeric: &NumericArgs, rel_tol: Option<f64>) -> Result<Emitted, CliError> {
    let mu = target_of(spec)?;
    let mut opts = ObjectiveOptions { phi: numeric.choice(), riccati: numeric.riccati(), ..ObjectiveOptions::default() };
    if let Some(t) = rel_tol {
        opts.rel_tol = t;
    }
    let v = expected_search_time_with(&spec.rate, spec.d, mu, &spec.support, &opts)?;
    let mut json = match v.value {
        Some(x) => json!({ "finite": true, "value": x }),
        None => json!({ "finite": false }),
    };
    json["positive"] = opt_json(v.positive);
    json["negative"] = opt_json(v.negative);
    json["error_estimate"] = json!(v.error_estimate);
    let row = vec![
        v.value.map_or("inf".into(), cell),
        v.positive.map_or("inf".into(), cell),
        v.negative.map_or("inf".into(), cell),
        cell(v.error_estimate),
    ];
    if v.value.is_none() {
        return Err(CliError { code: 4, message: "the expected search time is infinite".into(), payload: Some(json) });
    }
    Ok(Emitted {
        json,
        table: Some(Table { header: vec!["value", "positive", "negative", "error_estimate"], rows: vec![row] }),
    })
}

fn report_output(report: &OptimizationReport) -> Result<Emitted, CliError> {
    let mut json = serde_json::to_value(report).map_err(|e| CliError::numeric(e.to_string()))?;
    if let Some(trace) = json.get_mut("trace").and_then(Value::as_array_mut) {
        for entry in trace.iter_mut() {
            let finite = !entry["value"].is_null();
            let obj = entry.as_object_mut().expect("trace entries are objects");
            if !finite {
                obj.remove("value");
            }
            obj.insert("finite".into(), Value::Bool(finite));
        }
    }
    let mut header: Vec<&'static str> = vec![];
    for name in &report.parameter_names {
        header.push(match name.as_str() {
            "r" => "r",
            "m" => "m",
            "gamma" => "gamma",
            _ => "param",
        });
    }
    header.push("value");
    let rows = report
        .trace
        .iter()
        .map(|t| {
            let mut row: Vec<String> = t.params.iter().map(|p| cell(*p)).collect();
            row.push(t.value.map_or("inf".into(), cell));
            row
        })
        .collect();
    Ok(Emitted { json, table: Some(Table { header, rows }) })
}

fn cmd_optimize(spec: &ModelSpec, family: Family, overrides: [Option<f64>; 4]) -> Result<Emitted, CliError> {
    let mu = target_of(spec)?;
    let result = match family {
        Family::Constant => optimize_constant_rate(spec.d, mu, &spec.support),
        Family::Quad => {
            if spec.support != Support::FullLine {
                return Err(CliError::parse("the quad family is optimized on the full line only"));
            }
            let mut b = FamilyBox::for_target(mu)?;
            let [m_lo, m_hi, g_lo, g_hi] = overrides;
            b.m_lo = m_lo.unwrap_or(b.m_lo);
            b.m_hi = m_hi.unwrap_or(b.m_hi);
            b.ln_gamma_lo = g_lo.unwrap_or(b.ln_gamma_lo);
            b.ln_gamma_hi = g_hi.unwrap_or(b.ln_gamma_hi);
            optimize_family(spec.d, mu, &b)
        }
    };
    match result {
        Ok(report) => report_output(&report),
        Err(Error::BoxExhausted { report }) => {
            let out = report_output(&report)?;
            Err(CliError {
                code: 3,
                message: "optimum lies on the boundary of the search box; widen it with --m-lo/--m-hi/--ln-gamma-lo/--ln-gamma-hi".into(),
                payload: Some(out.json),
            })
        }
        Err(e) => Err(e.into()),
    }
}

fn estimate_json(e: &McEstimate, cfg: &SimConfig) -> Value {
    json!({
        "mean": e.mean,
        "stderr": e.stderr,
        "censored_fraction": e.censored_fraction,
        "n": e.n,
        "seed": e.seed,
        "dt": cfg.dt,
        "t_max": cfg.t_max,
        "bridge_correction": cfg.bridge_correction,
    })
}

fn cmd_simulate(spec: &ModelSpec, a: f64, cfg: &SimConfig, survival: &[f64]) -> Result<Emitted, CliError> {
    let estimate = match simulate_hitting(&spec.rate, spec.d, a, &spec.support, cfg) {
        Ok(e) => e,
        Err(Error::ExcessCensoring { fraction, estimate }) => {
            let mut json = estimate_json(&estimate, cfg);
            json["biased_low"] = Value::Bool(true);
            return Err(CliError {
                code: 3,
                message: format!("{fraction:.3} of paths were censored at t_max; the mean is a lower bound"),
                payload: Some(json),
            });
        }
        Err(e) => return Err(e.into()),
    };
    let mut json = estimate_json(&estimate, cfg);
    let mut table = Table {
        header: vec!["mean", "stderr", "censored_fraction", "n", "seed"],
        rows: vec![vec![
            cell(estimate.mean),
            cell(estimate.stderr),
            cell(estimate.censored_fraction),
            estimate.n.to_string(),
            estimate.seed.to_string(),
        ]],
    };
    if !survival.is_empty() {
        let s = survival_curve(&spec.rate, spec.d, a, &spec.support, cfg, survival)?;
        json["survival"] = survival.iter().zip(&s).map(|(t, p)| json!({ "t": t, "p": p })).collect();
        table = Table {
            header: vec!["t", "survival"],
            rows: survival.iter().zip(&s).map(|(t, p)| vec![cell(*t), cell(*p)]).collect(),
        };
    }
    Ok(Emitted { json, table: Some(table) })
}

fn cmd_growth(spec: &ModelSpec, grid: &[f64], law: Law, l: Option<f64>) -> Result<Emitted, CliError> {
    let choice = match (law, l) {
        (Law::PowerLaw, None) => GrowthModelChoice::PowerLaw,
        (Law::PowerLaw, Some(_)) => return Err(CliError::parse("--l only applies to --law log-poly")),
        (Law::LogPoly, Some(l)) => GrowthModelChoice::LogPolynomial { l },
        (Law::LogPoly, None) => return Err(CliError::parse("--law log-poly needs --l")),
    };
    let fit = estimate_growth(&spec.rate, spec.d, grid, choice)?;
    let json = serde_json::to_value(&fit).map_err(|e| CliError::numeric(e.to_string()))?;
    let rows = fit.samples.iter().map(|(a, lv)| vec![cell(*a), cell(*lv)]).collect();
    Ok(Emitted { json, table: Some(Table { header: vec!["a", "log_value"], rows }) })
}
