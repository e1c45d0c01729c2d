use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use bellforge::analytic::{self, AnalyticError};
use bellforge::bounds::{self, BoundValue};
use bellforge::correlation::{self, AnyBehavior, Behavior};
use bellforge::forge::{self, BellFunctional, MSeparableVariant, Seed};
use bellforge::optimizer::{self, Method, OptimizeOptions};
use bellforge::quantum::{self, AcinParams, PureState};
use bellforge::rational::{self, Rational};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

#[derive(Parser)]
#[command(name = "bellforge", version, about = "Seed-based multipartite Bell inequalities")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "BELLFORGE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a functional and write it as JSON.
    Build(BuildArgs),
    /// Evaluate a functional on a behavior.
    Evaluate(EvaluateArgs),
    /// Certify the local, tripartite biseparable or sampled grouped bound.
    Certify(CertifyArgs),
    /// Tabulate the closed-form GHZ violation against the simulator.
    GhzScan(GhzScanArgs),
    /// Two-qubit Hardy measurements and their probabilities.
    HardyDemo(HardyArgs),
    /// Violating measurements for a symmetric three-qubit canonical-form state.
    Theorem2(Theorem2Args),
    /// Maximize a functional over measurements on one state.
    Optimize(OptimizeArgs),
    /// Optimize a functional on Haar-random states.
    Scan(ScanArgs),
    /// Write the n-party NS box as an exact behavior.
    NsBox(NsBoxArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Seed,
    Sym,
    Centered,
    Mu,
    Msep,
    Recursive,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeedName {
    Chsh,
    Tilted,
    Tripartite,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Symmetric,
    Centered,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long, value_enum, default_value = "chsh")]
    seed: SeedName,
    /// Tilt of the tilted seed, e.g. `1/2`.
    #[arg(long, default_value = "0")]
    beta: String,
    #[arg(long)]
    n: Option<usize>,
    /// 1-based center parties, comma separated (default: the first m-1).
    #[arg(long, value_delimiter = ',')]
    center: Option<Vec<usize>>,
    /// Weights `mu12,mu13,mu23`.
    #[arg(long, value_delimiter = ',')]
    mu: Option<Vec<String>>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, value_enum, default_value = "symmetric")]
    variant: Variant,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    functional: PathBuf,
    /// Behavior JSON file.
    #[arg(long, conflicts_with_all = ["ns_box", "all_ones"])]
    behavior: Option<PathBuf>,
    /// Use the NS box on the functional's parties.
    #[arg(long)]
    ns_box: bool,
    /// Use the all-ones deterministic strategy.
    #[arg(long)]
    all_ones: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundKindArg {
    Local,
    Bisep3,
    Sampled,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    functional: PathBuf,
    #[arg(long, value_enum, default_value = "local")]
    kind: BoundKindArg,
    /// Number of groups for the sampled bound.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Slack allowed above the declared bound for sampled certificates.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GhzScanArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.05)]
    theta_min: f64,
    #[arg(long, default_value_t = 0.735)]
    theta_max: f64,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[arg(long, default_value_t = analytic::COMPOSED_ZERO_TOL)]
    tol: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct HardyArgs {
    /// Angles accept `pi/6`-style values.
    #[arg(long, default_value = "pi/6", value_parser = parse_angle)]
    theta: f64,
    #[arg(long, default_value = "pi/3", value_parser = parse_angle)]
    alpha: f64,
    #[arg(long, default_value = "0", value_parser = parse_angle)]
    delta: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct Theorem2Args {
    /// State JSON in canonical form.
    #[arg(long)]
    state: PathBuf,
    /// Where to write the measurement assignment.
    #[arg(long)]
    assignment: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    functional: PathBuf,
    /// `file.json`, `ghz:N:THETA` or `haar:N[:SEED]`.
    #[arg(long)]
    state: String,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "see-saw")]
    method: Method,
    /// Do not seed restart 0 with a closed-form construction.
    #[arg(long)]
    no_warm_start: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long)]
    functional: PathBuf,
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "see-saw")]
    method: Method,
    /// Per-state CSV: state_index, best_value, restarts_to_first_violation.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct NsBoxArgs {
    #[arg(long)]
    n: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

/// A numeric check failed; maps to exit status 2.
#[derive(Debug, Error)]
#[error("certification failed: {0}")]
struct CertificationFailure(String);

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // usage errors are validation errors, not certification failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: cannot configure thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(fail) = e.downcast_ref::<CertificationFailure>() {
                println!("{fail}");
                eprintln!("error: {fail}");
                ExitCode::from(2)
            } else {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Build(a) => build(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Certify(a) => certify(a),
        Command::GhzScan(a) => ghz_scan(a),
        Command::HardyDemo(a) => hardy_demo(a),
        Command::Theorem2(a) => theorem2(a),
        Command::Optimize(a) => optimize(a),
        Command::Scan(a) => scan(a),
        Command::NsBox(a) => ns_box(a),
    }
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
            Ok(())
        }
    }
}

fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed JSON in {}", path.display()))
}

fn load_functional(path: &Path) -> Result<BellFunctional> {
    BellFunctional::from_json(&read_json(path)?)
        .with_context(|| format!("invalid functional in {}", path.display()))
}

fn parse_rational_arg(name: &str, s: &str) -> Result<Rational> {
    rational::parse_rational(s).map_err(|e| anyhow!("--{name}: {e}"))
}

/// Float or `[k]pi[/d]`, e.g. `0.3`, `pi/8`, `3pi/8`.
fn parse_angle(s: &str) -> Result<f64, String> {
    let t = s.trim();
    if let Some(idx) = t.find("pi") {
        let (k, rest) = (&t[..idx], &t[idx + 2..]);
        let k: f64 = match k.trim_end_matches('*') {
            "" => 1.0,
            "-" => -1.0,
            v => v.parse().map_err(|_| format!("bad multiplier in angle {s:?}"))?,
        };
        let d: f64 = match rest.strip_prefix('/') {
            Some(d) => d.parse().map_err(|_| format!("bad divisor in angle {s:?}"))?,
            None if rest.is_empty() => 1.0,
            None => return Err(format!("cannot parse angle {s:?}")),
        };
        Ok(k * std::f64::consts::PI / d)
    } else {
        t.parse().map_err(|_| format!("cannot parse angle {s:?}"))
    }
}

fn seed_from(a: &BuildArgs) -> Result<Seed> {
    Ok(match a.seed {
        SeedName::Chsh => forge::chsh_variant(),
        SeedName::Tilted => forge::tilted_chsh(parse_rational_arg("beta", &a.beta)?)?,
        SeedName::Tripartite => forge::tripartite_seed(),
    })
}

fn require_n(n: Option<usize>) -> Result<usize> {
    n.ok_or_else(|| anyhow!("--n is required for this family"))
}

fn build(a: BuildArgs) -> Result<()> {
    let f = match a.family {
        Family::Seed => seed_from(&a)?.functional().clone(),
        Family::Sym => forge::build_symmetric(&seed_from(&a)?, require_n(a.n)?)?,
        Family::Centered => {
            let seed = seed_from(&a)?;
            let center: Vec<usize> = match &a.center {
                Some(c) => c
                    .iter()
                    .map(|&p| {
                        p.checked_sub(1)
                            .ok_or_else(|| anyhow!("--center parties are numbered from 1"))
                    })
                    .collect::<Result<_>>()?,
                None => (0..seed.parties() - 1).collect(),
            };
            forge::build_centered(&seed, require_n(a.n)?, &center)?
        }
        Family::Mu => {
            let mu = a.mu.as_ref().ok_or_else(|| anyhow!("--mu is required for the mu family"))?;
            if mu.len() != 3 {
                bail!("--mu needs exactly three weights mu12,mu13,mu23");
            }
            let w = |i: usize| parse_rational_arg("mu", &mu[i]);
            forge::build_mu_family([w(0)?, w(1)?, w(2)?])?
        }
        Family::Msep => {
            let m = a.m.ok_or_else(|| anyhow!("--m is required for the msep family"))?;
            let variant = match a.variant {
                Variant::Symmetric => MSeparableVariant::Symmetric,
                Variant::Centered => MSeparableVariant::Centered,
            };
            forge::build_m_separable(&seed_from(&a)?, require_n(a.n)?, m, variant)?
        }
        Family::Recursive => forge::build_recursive_symmetric(require_n(a.n)?)?,
    };
    write_json(a.output.as_deref(), &f.to_json())
}

#[derive(Serialize)]
struct EvaluationReport {
    value: String,
    value_f64: f64,
    exact: bool,
    bound: String,
    violates_bound: bool,
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let f = load_functional(&a.functional)?;
    let n = f.n_parties();
    let behavior = if a.ns_box {
        AnyBehavior::Exact(correlation::ns_box(n)?)
    } else if a.all_ones {
        AnyBehavior::Exact(correlation::all_ones_strategy(n).behavior()?)
    } else {
        let path = a
            .behavior
            .as_ref()
            .ok_or_else(|| anyhow!("one of --behavior, --ns-box or --all-ones is required"))?;
        let b = AnyBehavior::from_json(&read_json(path)?)
            .with_context(|| format!("invalid behavior in {}", path.display()))?;
        let report = b.check(1e-9);
        if !report.is_valid() {
            bail!(
                "behavior is not a valid no-signalling distribution (normalization {:e}, min entry {:e}, NS {:e})",
                report.normalization_residual,
                report.min_entry,
                report.ns_residual
            );
        }
        b
    };
    let report = match &behavior {
        AnyBehavior::Exact(b) => {
            let v = f.evaluate(b)?;
            EvaluationReport {
                value: rational::format_rational(&v),
                value_f64: rational::to_f64(&v),
                exact: true,
                bound: rational::format_rational(&f.bound()),
                violates_bound: v > f.bound(),
            }
        }
        AnyBehavior::Float(b) => {
            let v = f.evaluate(b)?;
            EvaluationReport {
                value: format!("{v:e}"),
                value_f64: v,
                exact: false,
                bound: rational::format_rational(&f.bound()),
                violates_bound: v > rational::to_f64(&f.bound()),
            }
        }
    };
    write_json(None, &report)
}

fn certify(a: CertifyArgs) -> Result<()> {
    let f = load_functional(&a.functional)?;
    let cert = match a.kind {
        BoundKindArg::Local => bounds::local_bound(&f)?,
        BoundKindArg::Bisep3 => bounds::biseparable_bound_tripartite(&f)?,
        BoundKindArg::Sampled => {
            let m = a.m.ok_or_else(|| anyhow!("--m is required for --kind sampled"))?;
            bounds::grouped_bound_sampled(&f, m, a.samples, a.seed)?
        }
    };
    if !cert.verify(&f) {
        return Err(CertificationFailure("witness does not reproduce the reported value".into()).into());
    }
    write_json(a.output.as_deref(), &cert.to_json())?;
    let bound = f.bound();
    let excess = match cert.value {
        BoundValue::Exact(v) => (v > bound).then(|| rational::to_f64(&(v - bound))),
        BoundValue::Float(v) => {
            let d = v - rational::to_f64(&bound);
            (d > a.tol).then_some(d)
        }
    };
    if let Some(d) = excess {
        return Err(CertificationFailure(format!(
            "{} value exceeds the declared bound {} by {d:e}",
            cert.kind.label(),
            rational::format_rational(&bound)
        ))
        .into());
    }
    Ok(())
}

fn analytic_failure(e: AnalyticError) -> anyhow::Error {
    match e {
        AnalyticError::Tolerance { .. } | AnalyticError::Degenerate(_) => {
            CertificationFailure(e.to_string()).into()
        }
        other => other.into(),
    }
}

fn ghz_scan(a: GhzScanArgs) -> Result<()> {
    if a.steps == 0 {
        bail!("--steps must be at least 1");
    }
    if a.theta_min.is_nan() || a.theta_max.is_nan() || a.theta_min > a.theta_max {
        bail!("--theta-min must not exceed --theta-max");
    }
    analytic::ghz_angles(a.n, a.theta_min)?;
    analytic::ghz_angles(a.n, a.theta_max)?;
    let thetas: Vec<f64> = (0..a.steps)
        .map(|i| {
            if a.steps == 1 {
                a.theta_min
            } else {
                a.theta_min + (a.theta_max - a.theta_min) * i as f64 / (a.steps - 1) as f64
            }
        })
        .collect();
    let sink: Box<dyn Write> = match &a.output {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("cannot write {}", p.display()))?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["theta", "alpha0", "alpha1", "value_sim", "value_closed", "residual"])?;
    let mut worst: Option<String> = None;
    for theta in thetas {
        let (alpha0, alpha1) = analytic::ghz_angles(a.n, theta)?;
        let assignment = analytic::ghz_assignment(a.n, theta)?;
        let state = quantum::ghz_state(a.n, theta)?;
        let behavior = quantum::behavior_from_state(&state, &assignment)?;
        let value_sim = forge::i_sym(a.n)?.evaluate(&behavior)?;
        let value_closed = analytic::ghz_closed_form(a.n, theta)?;
        let residual = (value_sim - value_closed).abs();
        w.write_record([
            theta.to_string(),
            alpha0.to_string(),
            alpha1.to_string(),
            value_sim.to_string(),
            value_closed.to_string(),
            residual.to_string(),
        ])?;
        if worst.is_none() {
            if let Err(e) = analytic::ghz_violation(a.n, theta) {
                worst = Some(format!("theta = {theta}: {e}"));
            } else if residual > a.tol {
                worst = Some(format!("theta = {theta}: residual {residual:e}"));
            }
        }
    }
    w.flush()?;
    match worst {
        Some(msg) => Err(CertificationFailure(msg).into()),
        None => Ok(()),
    }
}

fn hardy_demo(a: HardyArgs) -> Result<()> {
    let cert = analytic::hardy_measurements(a.theta, a.alpha, a.delta).map_err(analytic_failure)?;
    write_json(a.output.as_deref(), &cert)
}

fn theorem2(a: Theorem2Args) -> Result<()> {
    let state: PureState = serde_json::from_value(read_json(&a.state)?)
        .with_context(|| format!("invalid state in {}", a.state.display()))?;
    let params = AcinParams::from_state(&state)?;
    let cert = analytic::theorem2_construction(&params).map_err(analytic_failure)?;
    if let Some(p) = &a.assignment {
        write_json(Some(p), &cert.assignment)?;
    }
    write_json(a.output.as_deref(), &cert)
}

fn parse_state(spec: &str, seed: u64) -> Result<PureState> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["ghz", n, theta] => {
            let n: usize = n.parse().with_context(|| format!("bad qubit count in {spec:?}"))?;
            let theta = parse_angle(theta).map_err(|e| anyhow!(e))?;
            Ok(quantum::ghz_state(n, theta)?)
        }
        ["haar", n] | ["haar", n, _] => {
            let n: usize = n.parse().with_context(|| format!("bad qubit count in {spec:?}"))?;
            let s = match parts.get(2) {
                Some(v) => v.parse().with_context(|| format!("bad seed in {spec:?}"))?,
                None => seed,
            };
            Ok(quantum::haar_random_state(n, s)?)
        }
        _ => {
            let path = Path::new(spec);
            serde_json::from_value(read_json(path)?)
                .with_context(|| format!("invalid state in {}", path.display()))
        }
    }
}

fn optimize(a: OptimizeArgs) -> Result<()> {
    let f = load_functional(&a.functional)?;
    let state = parse_state(&a.state, a.seed)?;
    let warm_start = if a.no_warm_start {
        None
    } else {
        optimizer::analytic_warm_start(&state)
    };
    let opts = OptimizeOptions {
        restarts: a.restarts,
        seed: a.seed,
        method: a.method,
        warm_start,
        ..Default::default()
    };
    let res = optimizer::optimize(&f, &state, &opts)?;
    write_json(a.output.as_deref(), &res)
}

fn scan(a: ScanArgs) -> Result<()> {
    let f = load_functional(&a.functional)?;
    let opts = OptimizeOptions {
        restarts: a.restarts,
        seed: a.seed,
        method: a.method,
        ..Default::default()
    };
    let summary = optimizer::scan_random_states(&f, a.count, &opts)?;
    if let Some(p) = &a.csv {
        let mut w = csv::Writer::from_path(p).with_context(|| format!("cannot write {}", p.display()))?;
        w.write_record(["state_index", "best_value", "restarts_to_first_violation"])?;
        for r in &summary.results {
            w.write_record([
                r.state_index.to_string(),
                r.best_value.to_string(),
                r.restarts_to_first_violation
                    .map(|k| k.to_string())
                    .unwrap_or_default(),
            ])?;
        }
        w.flush()?;
    }
    write_json(a.output.as_deref(), &summary)
}

fn ns_box(a: NsBoxArgs) -> Result<()> {
    let b: Behavior<Rational> = correlation::ns_box(a.n)?;
    write_json(a.output.as_deref(), &b.to_json())
}
