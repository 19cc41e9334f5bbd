//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification or search failure (a failure JSON is
//! printed on stdout), 2 usage error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Error;
use crate::harness::{
    emit, run_return_experiment, sweep, ExperimentConfig, Format, PreparedWalk, Report, SweepParam,
};
use crate::linalg::{Matrix, SymMatrix};
use crate::lyapunov::{
    build_radial_profile, cap_count_lower_bound, find_gamma_alpha, find_phi_params, DEFAULT_KNOTS,
};
use crate::measure::FiniteMeasure;
use crate::transform::{
    construct_joint_transform_3d, minimize_psi_commuting, search_transform_general, SearchBudget, TransformReport,
};
use crate::walk::cap::{build_cap_system, cap_scan_points, find_cap_epsilon};
use crate::walk::engine::trial_rng;

#[derive(Parser, Debug)]
#[command(name = "siwalk", version, about = "Self-interacting random walk toolkit")]
pub struct Cli {
    /// JSON input file (experiment config for simulate/sweep; {"matrices"|"measures": [...]} for matrix commands).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SIWALK_THREADS")]
    pub threads: Option<usize>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutFormat>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct MatrixInput {
    /// Covariance matrix, inline as `diag(a,b,..)` or JSON rows `[[..],..]`; repeatable.
    #[arg(long = "matrix")]
    pub matrices: Vec<String>,
    /// JSON file holding an array of step measures; their covariances are used.
    #[arg(long)]
    pub measures: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LyapunovKind {
    /// Power-type function for the trace-condition walk.
    Power,
    /// Radial-profile function for the γ-walk.
    Gamma,
    /// log‖x‖ for the cap walk.
    Cap,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Trace-condition margins tr(M) − 2λmax(M).
    CheckTrace(MatrixInput),
    /// Explicit transform for two 3×3 covariances.
    #[command(name = "construct-A")]
    ConstructA(MatrixInput),
    /// Minimize Ψ over diagonal transforms of a commuting family.
    MinimizePsi {
        #[command(flatten)]
        input: MatrixInput,
        /// Descent sweeps per start.
        #[arg(long, default_value_t = 200)]
        budget: usize,
    },
    /// General transform search.
    #[command(name = "search-A")]
    SearchA {
        #[command(flatten)]
        input: MatrixInput,
        #[arg(long, default_value_t = 16)]
        restarts: usize,
        #[arg(long, default_value_t = 4000)]
        evaluations: usize,
    },
    /// Build and validate the radial profile.
    BuildProfile {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0.05)]
        eps0: f64,
        #[arg(long, default_value_t = DEFAULT_KNOTS)]
        knots: usize,
    },
    /// Search for and check a Lyapunov drift certificate.
    VerifyLyapunov {
        #[arg(long, value_enum)]
        kind: LyapunovKind,
        /// Step measures (power).
        #[arg(long)]
        measures: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        d: usize,
        /// Profile parameter (gamma).
        #[arg(long, default_value_t = 0.2)]
        eps0: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 0.5, 0.2, 0.1, 0.05, 0.01])]
        alpha_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [10.0, 100.0, 1000.0, 10000.0])]
        gamma_grid: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.1, 0.05, 0.02, 0.01])]
        eps_grid: Vec<f64>,
        /// Cap angle (cap); defaults to π/5.
        #[arg(long)]
        theta: Option<f64>,
        /// Inner radius of the checked shell (gamma, cap).
        #[arg(long, default_value_t = 10.0)]
        r0: f64,
        /// Shell width (gamma) or outer/inner radius ratio (power, cap).
        #[arg(long)]
        span: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Run a return experiment from `--config`, or dump one trajectory.
    Simulate {
        #[arg(long)]
        trajectory: bool,
        /// Trial index for `--trajectory`.
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Repeat the `--config` experiment over a parameter grid.
    Sweep {
        /// gamma | eps | horizon | return_radius | escape_radius
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Lower bound on the number of caps, 2 / I_{1/2}((d−1)/2, 1/2).
    CapCount {
        #[arg(long)]
        d: usize,
    },
}

enum Failure {
    Usage(String),
    Failed { error: String, details: Value },
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Failed { error: e.to_string(), details: Value::Null }
    }
}

type CliResult<T> = Result<T, Failure>;

/// Parses `argv` (including the program name), runs the command and returns the exit code.
pub fn parse_and_dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let name = command_name(&cli.command);
    let result = match cli.threads {
        Some(0) => Err(Failure::Usage("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Failure::Failed { error: e.to_string(), details: Value::Null }),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            2
        }
        Err(Failure::Failed { error, details }) => {
            let mut body = json!({ "status": "failure", "command": name, "error": error });
            if !details.is_null() {
                body["details"] = details;
            }
            println!("{}", serde_json::to_string_pretty(&body).expect("json"));
            1
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::CheckTrace(_) => "check-trace",
        Command::ConstructA(_) => "construct-A",
        Command::MinimizePsi { .. } => "minimize-psi",
        Command::SearchA { .. } => "search-A",
        Command::BuildProfile { .. } => "build-profile",
        Command::VerifyLyapunov { .. } => "verify-lyapunov",
        Command::Simulate { .. } => "simulate",
        Command::Sweep { .. } => "sweep",
        Command::CapCount { .. } => "cap-count",
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let uses_config = matches!(
        cli.command,
        Command::CheckTrace(_)
            | Command::ConstructA(_)
            | Command::MinimizePsi { .. }
            | Command::SearchA { .. }
            | Command::Simulate { .. }
            | Command::Sweep { .. }
    );
    if cli.config.is_some() && !uses_config {
        return Err(Failure::Usage(format!("--config is not accepted by {}", command_name(&cli.command))));
    }
    match &cli.command {
        Command::CheckTrace(input) => {
            let ms = read_matrices(input, cli.config.as_deref())?;
            let margins: Vec<Value> = ms
                .iter()
                .map(|m| {
                    let t = m.trace();
                    let l = m.lambda_max();
                    json!({ "trace": t, "lambda_max": l, "margin": t - 2.0 * l })
                })
                .collect();
            let ok = ms.iter().all(|m| m.trace() - 2.0 * m.lambda_max() > 0.0);
            let body = json!({ "status": if ok { "ok" } else { "failure" }, "command": "check-trace", "matrices": margins });
            if ok {
                write_json(cli, &body)
            } else {
                Err(Failure::Failed { error: "trace condition violated".into(), details: body["matrices"].clone() })
            }
        }
        Command::ConstructA(input) => {
            let ms = read_matrices(input, cli.config.as_deref())?;
            if ms.len() != 2 {
                return Err(Failure::Usage(format!("construct-A needs exactly 2 matrices, got {}", ms.len())));
            }
            transform_result(cli, construct_joint_transform_3d(&ms[0], &ms[1])?)
        }
        Command::MinimizePsi { input, budget } => {
            let ms = read_matrices(input, cli.config.as_deref())?;
            transform_result(cli, minimize_psi_commuting(&ms, 1e-9, *budget)?)
        }
        Command::SearchA { input, restarts, evaluations } => {
            let ms = read_matrices(input, cli.config.as_deref())?;
            let mut budget = SearchBudget { restarts: *restarts, evaluations: *evaluations, ..Default::default() };
            if let Some(s) = cli.seed {
                budget.seed = s;
            }
            let search = search_transform_general(&ms, budget)?;
            let origin = search.origin.clone();
            match search.into_option() {
                Some(rep) => {
                    let mut v = serde_json::to_value(&rep).map_err(Error::from)?;
                    v["origin"] = json!(origin);
                    write_json(cli, &v)
                }
                None => Err(Error::SearchFailed("no transform satisfying the trace condition was found".into()).into()),
            }
        }
        Command::BuildProfile { d, eps0, knots } => {
            let profile = build_radial_profile(*d, *eps0, *knots)?;
            if let Err(e) = profile.validate() {
                return Err(Failure::Failed { error: e.to_string(), details: profile_summary(&profile) });
            }
            match cli.format.unwrap_or(OutFormat::Json) {
                OutFormat::Json => write_json(cli, &profile_summary(&profile)),
                OutFormat::Csv => {
                    let mut buf = Vec::new();
                    profile.write_csv(&mut buf)?;
                    write_bytes(cli, &buf)
                }
            }
        }
        Command::VerifyLyapunov {
            kind,
            measures,
            d,
            eps0,
            alpha_grid,
            gamma_grid,
            eps_grid,
            theta,
            r0,
            span,
            samples,
        } => match kind {
            LyapunovKind::Power => {
                let path = measures.as_ref().ok_or_else(|| Failure::Usage("--kind power needs --measures".into()))?;
                let mus = load_measures(path)?;
                let cert = find_phi_params(&mus, alpha_grid, span.unwrap_or(100.0), *samples)?;
                write_json(cli, &json!({ "status": "ok", "kind": "power", "certificate": cert }))
            }
            LyapunovKind::Gamma => {
                let profile = build_radial_profile(*d, *eps0, DEFAULT_KNOTS)?;
                let cert = find_gamma_alpha(&profile, gamma_grid, alpha_grid, (*r0, *r0 + span.unwrap_or(50.0)))?;
                write_json(cli, &json!({ "status": "ok", "kind": "gamma", "certificate": cert }))
            }
            LyapunovKind::Cap => {
                let theta = theta.unwrap_or(std::f64::consts::PI / 5.0);
                let caps = build_cap_system(*d, theta, &mut trial_rng(cli.seed.unwrap_or(0), 0))?;
                let points = cap_scan_points(*d, *r0, span.unwrap_or(100.0), *samples);
                let scan = find_cap_epsilon(&caps, eps_grid, &points)?;
                write_json(
                    cli,
                    &json!({ "status": "ok", "kind": "cap", "d": d, "theta": theta, "caps": caps.len(), "scan": scan }),
                )
            }
        },
        Command::Simulate { trajectory, trial } => {
            let cfg = experiment_config(cli)?;
            if *trajectory {
                cfg.validate()?;
                let prepared = PreparedWalk::new(&cfg.walk, cfg.seed)?;
                let mut rng = trial_rng(cfg.seed, *trial);
                let mut walk = prepared.instantiate(&mut rng)?;
                let mut buf = Vec::new();
                let header: Vec<String> = (0..walk.dim()).map(|k| format!("x{k}")).collect();
                writeln_io(&mut buf, format_args!("t,{},choice", header.join(",")))?;
                for t in 0..=cfg.horizon {
                    let pos: Vec<String> = walk.position().iter().map(|v| v.to_string()).collect();
                    if t == cfg.horizon {
                        writeln_io(&mut buf, format_args!("{t},{},", pos.join(",")))?;
                    } else {
                        let choice = walk.step(&mut rng);
                        writeln_io(&mut buf, format_args!("{t},{},{choice}", pos.join(",")))?;
                    }
                }
                return write_bytes(cli, &buf);
            }
            let stats = run_return_experiment(&cfg)?;
            let mut buf = Vec::new();
            emit(&Report::Trials(&stats), harness_format(cli, cfg.format), &mut buf)?;
            write_bytes(cli, &buf)
        }
        Command::Sweep { param, values } => {
            let cfg = experiment_config(cli)?;
            let param = SweepParam::parse(param).map_err(|e| Failure::Usage(e.to_string()))?;
            let rows = sweep(&cfg, param, values)?;
            let mut buf = Vec::new();
            emit(&Report::Sweep(&rows), harness_format(cli, cfg.format), &mut buf)?;
            write_bytes(cli, &buf)
        }
        Command::CapCount { d } => {
            let value = cap_count_lower_bound(*d)?;
            match cli.format {
                Some(OutFormat::Json) => write_json(cli, &json!({ "d": d, "cap_count_lower_bound": value })),
                _ => write_bytes(cli, format!("{value}\n").as_bytes()),
            }
        }
    }
}

fn writeln_io(buf: &mut Vec<u8>, args: std::fmt::Arguments<'_>) -> CliResult<()> {
    buf.write_fmt(args).and_then(|_| buf.write_all(b"\n")).map_err(|e| Error::from(e).into())
}

fn harness_format(cli: &Cli, fallback: Format) -> Format {
    match cli.format {
        Some(OutFormat::Csv) => Format::Csv,
        Some(OutFormat::Json) => Format::Json,
        None => fallback,
    }
}

fn experiment_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::Usage("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)
        .map_err(|e| Failure::Usage(format!("cannot read --config {}: {e}", path.display())))?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    // --out on the command line wins; the harness itself should not write
    cfg.out = None;
    Ok(cfg)
}

fn profile_summary(p: &crate::lyapunov::RadialProfile) -> Value {
    json!({
        "d": p.d,
        "eps0": p.eps0,
        "b": p.b,
        "c": p.c(),
        "r_star": p.r_star,
        "top": p.top,
        "delta0": p.delta0,
        "blend_window": p.blend_window(),
        "capital_phi_floor": p.capital_phi_floor(),
        "knots": p.knots().len(),
    })
}

fn transform_result(cli: &Cli, rep: TransformReport<f64>) -> CliResult<()> {
    let body = serde_json::to_value(&rep).map_err(Error::from)?;
    if rep.satisfies_trace_condition() {
        write_json(cli, &body)
    } else {
        Err(Failure::Failed { error: "transform does not satisfy the trace condition".into(), details: body })
    }
}

fn write_json<T: Serialize>(cli: &Cli, v: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(v).map_err(Error::from)?;
    text.push('\n');
    write_bytes(cli, text.as_bytes())
}

fn write_bytes(cli: &Cli, bytes: &[u8]) -> CliResult<()> {
    match &cli.out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| Error::from(e).into()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes).and_then(|_| stdout.flush()).map_err(|e| Error::from(e).into())
        }
    }
}

fn load_measures(path: &Path) -> CliResult<Vec<FiniteMeasure<f64>>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read --measures {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("invalid --measures {}: {e}", path.display())))
}

fn read_matrices(input: &MatrixInput, config: Option<&Path>) -> CliResult<Vec<SymMatrix<f64>>> {
    let mut out = Vec::new();
    for s in &input.matrices {
        out.push(parse_matrix(s).map_err(|e| Failure::Usage(format!("invalid value '{s}' for '--matrix': {e}")))?);
    }
    if let Some(path) = &input.measures {
        out.extend(load_measures(path)?.iter().map(FiniteMeasure::covariance));
    }
    if let Some(path) = config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read --config {}: {e}", path.display())))?;
        let v: Value =
            serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("invalid --config {}: {e}", path.display())))?;
        if let Some(ms) = v.get("matrices") {
            let rows: Vec<Vec<Vec<f64>>> = serde_json::from_value(ms.clone())
                .map_err(|e| Failure::Usage(format!("invalid matrices in --config: {e}")))?;
            for r in rows {
                out.push(SymMatrix::from_rows(&r).map_err(|e| Failure::Usage(format!("invalid matrix in --config: {e}")))?);
            }
        }
        if let Some(ms) = v.get("measures") {
            let mus: Vec<FiniteMeasure<f64>> = serde_json::from_value(ms.clone())
                .map_err(|e| Failure::Usage(format!("invalid measures in --config: {e}")))?;
            out.extend(mus.iter().map(FiniteMeasure::covariance));
        }
    }
    if out.is_empty() {
        return Err(Failure::Usage("no matrices given (use --matrix, --measures or --config)".into()));
    }
    Ok(out)
}

/// `diag(a, b, ...)` or JSON rows.
pub fn parse_matrix(s: &str) -> Result<SymMatrix<f64>, Error> {
    let t = s.trim();
    if let Some(inner) = t.strip_prefix("diag(").and_then(|r| r.strip_suffix(')')) {
        let entries = inner
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| Error::InvalidArgument(format!("'{x}': {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if entries.is_empty() || entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("diag entries must be finite".into()));
        }
        return Ok(SymMatrix::from_diag(&entries));
    }
    let rows: Vec<Vec<f64>> = serde_json::from_str(t)?;
    SymMatrix::new(Matrix::from_rows(&rows)?)
}
