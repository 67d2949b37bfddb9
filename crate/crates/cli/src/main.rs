use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use killed_levy::estimator::{convergence_sweep, estimate_adaptive, estimate_uniform, McResult, Payoff, Schedule};
use killed_levy::validation::{run_suite, PerturbedModel, Suite, ValidationConfig};
use killed_levy::{Domain, EngineConfig, Error, LevyModel, LevyModelSpec};

const CSV_SCHEMA: &str = "# schema=1";
const CSV_HEADER: &str =
    "gamma_or_n,estimate,stderr,bias_bound,paths,mean_skeleton_points,depth_breaches,wall_seconds,seed";
const THREADS_ENV: &str = "LEVY_MC_THREADS";

#[derive(Parser, Debug)]
#[command(name = "killed-levy", version, about = "Monte Carlo for functionals of killed Lévy processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Adaptive bridge estimator with bias tolerance gamma.
    Estimate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = killed_levy::skeleton::DEFAULT_MAX_DEPTH)]
        max_depth: u32,
    },
    /// Plain discretization on an even grid.
    Baseline {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        n_grid: usize,
    },
    /// Error/time sweep over tolerances or grid sizes.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        method: Method,
        /// Comma-separated gammas (adaptive) or grid sizes (uniform).
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        schedule: Vec<String>,
        /// Known value for the uniform error proxy.
        #[arg(long)]
        reference: Option<f64>,
        #[arg(long, default_value_t = killed_levy::skeleton::DEFAULT_MAX_DEPTH)]
        max_depth: u32,
    },
    /// Oracle suites; prints PASS/FAIL per check.
    Validate {
        #[arg(long, default_value = "cauchy")]
        model: ModelName,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Run only these suites (convolution, density, bridge, envelope, decay).
        #[arg(long)]
        only: Vec<String>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = ValidationConfig::default().seed)]
        seed: u64,
        /// Perturb the model density by this relative amount.
        #[arg(long, hide = true)]
        inject_fault: Option<f64>,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModelName {
    Cauchy,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Adaptive,
    Uniform,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, default_value = "cauchy")]
    model: ModelName,
    /// Intensity of the Lévy density c/x².
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Lower barrier; `-inf` for none.
    #[arg(long, default_value = "-inf", allow_hyphen_values = true, value_parser = parse_barrier)]
    lower: f64,
    /// Upper barrier; `+inf` for none.
    #[arg(long, default_value = "+inf", allow_hyphen_values = true, value_parser = parse_barrier)]
    upper: f64,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, default_value_t = 100_000)]
    paths: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; 0 means one per logical core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// indicator | constant:K | put:K | call:K:CAP | poly:CAP:c0,c1,...
    #[arg(long, default_value = "indicator", value_parser = parse_payoff)]
    payoff: Payoff,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn parse_barrier(s: &str) -> Result<f64, String> {
    match s.trim() {
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
        v => v
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| format!("not a barrier: {s}")),
    }
}

fn parse_num(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("not a number: {s}"))
}

fn parse_payoff(s: &str) -> Result<Payoff, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let payoff = match parts.as_slice() {
        ["indicator"] => Payoff::Indicator,
        ["constant", k] => Payoff::Constant(parse_num(k)?),
        ["put", k] => Payoff::Put { strike: parse_num(k)? },
        ["call", k, cap] => Payoff::CappedCall {
            strike: parse_num(k)?,
            cap: parse_num(cap)?,
        },
        ["poly", cap, coeffs] => Payoff::CappedPolynomial {
            coeffs: coeffs.split(',').map(parse_num).collect::<Result<_, _>>()?,
            cap: parse_num(cap)?,
        },
        _ => return Err(format!("unknown payoff: {s}")),
    };
    payoff.validate().map_err(|e| e.to_string())?;
    Ok(payoff)
}

enum Failure {
    Config(String),
    Numerical(Error),
    Io(io::Error),
    Checks,
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

fn config<T>(r: killed_levy::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| Failure::Config(e.to_string()))
}

fn numerical<T>(r: killed_levy::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| match e {
        Error::Config(msg) => Failure::Config(msg),
        other => Failure::Numerical(other),
    })
}

fn build_model(m: &ModelArgs) -> Result<(LevyModelSpec, Domain), Failure> {
    let model = match m.model {
        ModelName::Cauchy => config(LevyModelSpec::cauchy(m.c))?,
    };
    let domain = config(Domain::new(m.lower, m.upper))?;
    Ok((model, domain))
}

fn resolve_workers(flag: usize) -> Result<usize, Failure> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Config(format!("{THREADS_ENV}={v} is not a thread count"))),
        Err(_) => Ok(flag),
    }
}

fn check_paths(paths: u64) -> Result<(), Failure> {
    if paths < 2 {
        return Err(Failure::Config(format!("--paths must be at least 2, got {paths}")));
    }
    Ok(())
}

#[derive(Serialize)]
struct Row {
    gamma_or_n: f64,
    estimate: f64,
    stderr: f64,
    bias_bound: f64,
    paths: u64,
    mean_skeleton_points: f64,
    depth_breaches: u64,
    wall_seconds: f64,
    seed: u64,
}

impl Row {
    fn new(parameter: f64, r: &McResult) -> Self {
        Row {
            gamma_or_n: parameter,
            estimate: r.estimate,
            stderr: r.stderr,
            bias_bound: r.bias_bound,
            paths: r.paths,
            mean_skeleton_points: r.mean_skeleton_points,
            depth_breaches: r.depth_breaches,
            wall_seconds: r.wall_seconds,
            seed: r.seed,
        }
    }

    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.gamma_or_n,
            self.estimate,
            self.stderr,
            self.bias_bound,
            self.paths,
            self.mean_skeleton_points,
            self.depth_breaches,
            self.wall_seconds,
            self.seed
        )
    }
}

#[derive(Serialize)]
struct SweepJson<'a> {
    method: &'a str,
    rows: Vec<Row>,
    slope: f64,
    reference: Option<f64>,
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never observe a partial file.
fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// CSV rows are appended to an existing file, which gets schema and header
/// lines when new. JSON replaces the file.
fn emit(output: Option<&Path>, format: Format, csv_rows: &[String], json: String) -> io::Result<()> {
    match (format, output) {
        (Format::Json, None) => println!("{json}"),
        (Format::Json, Some(p)) => write_atomic(p, &(json + "\n"))?,
        (Format::Csv, None) => {
            println!("{CSV_SCHEMA}\n{CSV_HEADER}");
            for r in csv_rows {
                println!("{r}");
            }
        }
        (Format::Csv, Some(p)) => {
            let mut text = match std::fs::read_to_string(p) {
                Ok(existing) if !existing.is_empty() => {
                    if existing.lines().next() != Some(CSV_SCHEMA) {
                        return Err(io::Error::new(
                            io::ErrorKind::InvalidData,
                            format!("{} does not carry {CSV_SCHEMA}", p.display()),
                        ));
                    }
                    if existing.ends_with('\n') {
                        existing
                    } else {
                        existing + "\n"
                    }
                }
                Ok(_) => format!("{CSV_SCHEMA}\n{CSV_HEADER}\n"),
                Err(e) if e.kind() == io::ErrorKind::NotFound => format!("{CSV_SCHEMA}\n{CSV_HEADER}\n"),
                Err(e) => return Err(e),
            };
            for r in csv_rows {
                text.push_str(r);
                text.push('\n');
            }
            write_atomic(p, &text)?;
        }
    }
    Ok(())
}

fn emit_single(run: &RunArgs, row: Row) -> Result<(), Failure> {
    let json = serde_json::to_string(&row).expect("row serializes");
    emit(run.output.as_deref(), run.format, &[row.csv()], json)?;
    Ok(())
}

fn cmd_estimate(model: &ModelArgs, run: &RunArgs, gamma: f64, max_depth: u32) -> Result<(), Failure> {
    let (spec, domain) = build_model(model)?;
    let cfg = config(EngineConfig::new(spec, domain, gamma).and_then(|c| c.with_max_depth(max_depth)))?;
    check_paths(run.paths)?;
    let workers = resolve_workers(run.workers)?;
    let r = numerical(estimate_adaptive(&cfg, &run.payoff, run.paths, run.seed, workers))?;
    emit_single(run, Row::new(gamma, &r))
}

fn cmd_baseline(model: &ModelArgs, run: &RunArgs, n_grid: usize) -> Result<(), Failure> {
    let (spec, domain) = build_model(model)?;
    if n_grid == 0 {
        return Err(Failure::Config("--n-grid must be at least 1".into()));
    }
    check_paths(run.paths)?;
    let workers = resolve_workers(run.workers)?;
    let r = numerical(estimate_uniform(&spec, &domain, &run.payoff, n_grid, run.paths, run.seed, workers))?;
    emit_single(run, Row::new(n_grid as f64, &r))
}

fn cmd_sweep(
    model: &ModelArgs,
    run: &RunArgs,
    method: Method,
    schedule: &[String],
    reference: Option<f64>,
    max_depth: u32,
) -> Result<(), Failure> {
    let (spec, domain) = build_model(model)?;
    let entries: Vec<&str> = schedule.iter().map(|s| s.trim()).filter(|s| !s.is_empty()).collect();
    if entries.is_empty() {
        return Err(Failure::Config("--schedule is empty".into()));
    }
    let bad = |s: &str| Failure::Config(format!("bad schedule entry {s:?}"));
    let sched = match method {
        Method::Adaptive => {
            let gammas = entries
                .iter()
                .map(|s| s.parse::<f64>().ok().filter(|g| *g > 0.0 && g.is_finite()).ok_or_else(|| bad(s)))
                .collect::<Result<Vec<_>, _>>()?;
            Schedule::Tolerances(gammas)
        }
        Method::Uniform => {
            let grids = entries
                .iter()
                .map(|s| s.parse::<usize>().ok().filter(|n| *n > 0).ok_or_else(|| bad(s)))
                .collect::<Result<Vec<_>, _>>()?;
            Schedule::Grids(grids)
        }
    };
    let gamma = match &sched {
        Schedule::Tolerances(g) => g[0],
        Schedule::Grids(_) => 1.0,
    };
    let cfg = config(EngineConfig::new(spec, domain, gamma).and_then(|c| c.with_max_depth(max_depth)))?;
    config(run.payoff.validate())?;
    check_paths(run.paths)?;
    let workers = resolve_workers(run.workers)?;
    let table = numerical(convergence_sweep(&cfg, &run.payoff, &sched, run.paths, run.seed, workers, reference))?;

    let rows: Vec<Row> = table.rows.iter().map(|r| Row::new(r.parameter, &r.result)).collect();
    let mut csv: Vec<String> = rows.iter().map(Row::csv).collect();
    csv.push(format!("slope,{},,,,,,,", table.slope));
    let json = serde_json::to_string(&SweepJson {
        method: match method {
            Method::Adaptive => "adaptive",
            Method::Uniform => "uniform",
        },
        rows,
        slope: table.slope,
        reference: table.reference,
    })
    .expect("sweep serializes");
    emit(run.output.as_deref(), run.format, &csv, json)?;
    Ok(())
}

fn run_validation<M: LevyModel>(model: &M, suites: &[Suite], cfg: &ValidationConfig) -> Result<(), Failure> {
    let mut all_passed = true;
    for &suite in suites {
        let results = numerical(run_suite(model, suite, cfg))?;
        for r in results {
            println!("{r}");
            all_passed &= r.passed;
        }
    }
    if all_passed {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn cmd_validate(c: f64, only: &[String], samples: usize, seed: u64, fault: Option<f64>) -> Result<(), Failure> {
    let model = config(LevyModelSpec::cauchy(c))?;
    let suites = if only.is_empty() {
        Suite::ALL.to_vec()
    } else {
        only.iter()
            .flat_map(|s| s.split(','))
            .map(|s| Suite::parse(s.trim()).ok_or_else(|| Failure::Config(format!("unknown suite {s:?}"))))
            .collect::<Result<Vec<_>, _>>()?
    };
    let cfg = ValidationConfig {
        bridge_samples: samples,
        seed,
    };
    match fault {
        Some(delta) => run_validation(&PerturbedModel { inner: model, delta }, &suites, &cfg),
        None => run_validation(&model, &suites, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Estimate {
            model,
            run,
            gamma,
            max_depth,
        } => cmd_estimate(model, run, *gamma, *max_depth),
        Command::Baseline { model, run, n_grid } => cmd_baseline(model, run, *n_grid),
        Command::Sweep {
            model,
            run,
            method,
            schedule,
            reference,
            max_depth,
        } => cmd_sweep(model, run, *method, schedule, *reference, *max_depth),
        Command::Validate {
            model: ModelName::Cauchy,
            c,
            only,
            samples,
            seed,
            inject_fault,
        } => cmd_validate(*c, only, *samples, *seed, *inject_fault),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: numerical failure in {}: {e}", e.component());
            ExitCode::from(3)
        }
        Err(Failure::Checks) => {
            eprintln!("error: validation checks failed");
            ExitCode::from(3)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
