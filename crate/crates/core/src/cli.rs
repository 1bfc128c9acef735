//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 invalid network,
//! 3 numerical failure (including failed verification checks).

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::blrm::causation_capacity;
use crate::error::Error;
use crate::estimate::empirical_decomposition;
use crate::formats::{curve_table, format_float, parse_trajectories, write_trajectories, Table};
use crate::measures::{DecompositionCurve, DecompositionPoint, Decomposer};
use crate::network::{parse_network, ValidatedNetwork};
use crate::plot::{render, Chart, Series};
use crate::simulate::{generate, Scheme};
use crate::tolerance::{set_epsilon, EPSILON_ENV};
use crate::verify::{log_grid, verify_fixtures, verify_network, Check};

#[derive(Parser, Debug)]
#[command(name = "causalflow", version, about = "Information flow in linear stochastic networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact decomposition curve of source -> target.
    Analyze(Common),
    /// Stationary sample paths.
    Simulate(Common),
    /// Decomposition estimated from sample paths.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Trajectory CSV written by `simulate`.
        #[arg(long)]
        trajectories: PathBuf,
    },
    /// Peak causal influence of the response model against beta t_rel.
    Capacity {
        #[command(flatten)]
        common: Common,
        /// Comma-separated beta t_rel values.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Consistency checks on a network, or on built-in fixtures.
    Verify(Common),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum TauScale {
    Lin,
    Log,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Exact,
    Em,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long)]
    source: Option<String>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    tau_min: Option<f64>,
    #[arg(long)]
    tau_max: Option<f64>,
    #[arg(long)]
    tau_steps: Option<usize>,
    #[arg(long, value_enum)]
    tau_scale: Option<TauScale>,
    /// Condition every measure on the parents of source and target.
    #[arg(long)]
    condition_parents: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    dt: Option<f64>,
    /// Recorded time points per trajectory.
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    /// Number of trajectories.
    #[arg(long, default_value_t = 1)]
    ensemble: usize,
    #[arg(long, value_enum, default_value = "exact")]
    scheme: SchemeArg,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Lib(e) if e.is_invalid_network() => 2,
            Failure::Lib(Error::Parse { .. }) => 2,
            Failure::Lib(e) if e.is_numerical() => 3,
            Failure::Lib(_) => 1,
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Usage(msg.into()))
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Lib(e) => eprintln!("error: {e}"),
            }
            f.code()
        }
    }
}

fn apply_epsilon() -> Outcome<()> {
    if let Ok(v) = std::env::var(EPSILON_ENV) {
        match v.trim().parse::<f64>() {
            Ok(eps) if eps > 0.0 && eps < 1.0 => set_epsilon(eps),
            _ => return usage(format!("{EPSILON_ENV} must be a number in (0, 1), got `{v}`")),
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Outcome<i32> {
    apply_epsilon()?;
    match cli.command {
        Command::Analyze(c) => analyze(&c).map(|_| 0),
        Command::Simulate(c) => simulate(&c).map(|_| 0),
        Command::Estimate {
            common,
            trajectories,
        } => estimate(&common, &trajectories).map(|_| 0),
        Command::Capacity { common, grid } => capacity(&common, grid).map(|_| 0),
        Command::Verify(c) => verify(&c),
    }
}

fn load_network(c: &Common) -> Outcome<ValidatedNetwork> {
    let Some(path) = &c.network else {
        return usage("--network is required");
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let net = parse_network(&text)?.validate()?;
    for w in net.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(net)
}

fn pair(c: &Common, net: &ValidatedNetwork) -> Outcome<(String, String)> {
    let (Some(s), Some(t)) = (&c.source, &c.target) else {
        return usage("--source and --target are required");
    };
    if s == t {
        return usage("source and target must differ");
    }
    net.index_of(s).map_err(|e| Failure::Usage(e.to_string()))?;
    net.index_of(t).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok((s.clone(), t.clone()))
}

/// Lag grid from the flags; defaults to 256 log-spaced lags from `1e-3` to
/// `30` times the slowest time constant.
fn tau_grid(c: &Common, t_char: f64) -> Outcome<Vec<f64>> {
    let lo = c.tau_min.unwrap_or(1e-3 * t_char);
    let hi = c.tau_max.unwrap_or(30.0 * t_char);
    let n = c.tau_steps.unwrap_or(256);
    let scale = c.tau_scale.unwrap_or(TauScale::Log);
    if !lo.is_finite() || !hi.is_finite() || lo < 0.0 {
        return usage("lags must be finite and non-negative");
    }
    if hi <= lo {
        return usage("--tau-max must exceed --tau-min");
    }
    if n < 2 {
        return usage("--tau-steps must be at least 2");
    }
    Ok(match scale {
        TauScale::Log if lo <= 0.0 => return usage("log lag scale needs --tau-min > 0"),
        TauScale::Log => log_grid(lo, hi, n),
        TauScale::Lin => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    })
}

fn write_atomic(path: &Path, content: &str) -> Outcome<()> {
    let io = |e: std::io::Error| Failure::Usage(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(content.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit(out: &Option<PathBuf>, content: &str) -> Outcome<()> {
    match out {
        Some(p) => write_atomic(p, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn curve_chart<'a>(title: &'a str, points: &[DecompositionPoint]) -> Chart<'a> {
    let series = DecompositionPoint::COLUMNS[1..]
        .iter()
        .enumerate()
        .map(|(k, name)| Series {
            name,
            points: points.iter().map(|p| (p.tau, p.values()[k + 1])).collect(),
        })
        .collect();
    Chart {
        title,
        x_label: "tau",
        y_label: "nats",
        log_x: true,
        series,
    }
}

fn write_curve(c: &Common, curve: &DecompositionCurve, extra: &[(&str, Vec<f64>)]) -> Outcome<()> {
    let csv = curve_table(curve, extra).to_csv();
    let title = format!("{} -> {}", curve.source, curve.target);
    let svg = c.svg.as_ref().map(|_| render(&curve_chart(&title, &curve.points)));
    emit(&c.out, &csv)?;
    if let (Some(path), Some(svg)) = (&c.svg, svg) {
        write_atomic(path, &svg)?;
    }
    Ok(())
}

fn analyze(c: &Common) -> Outcome<()> {
    let net = load_network(c)?;
    let (src, dst) = pair(c, &net)?;
    let grid = tau_grid(c, net.slowest_time_constant())?;
    let curve = Decomposer::new(&net, &src, &dst, c.condition_parents)?.curve(&grid)?;
    write_curve(c, &curve, &[])
}

fn default_dt(net: &ValidatedNetwork) -> f64 {
    let max_decay = net.nodes().iter().map(|n| n.decay).fold(0.0, f64::max);
    0.05 / max_decay
}

fn scheme(c: &Common) -> Scheme {
    match c.scheme {
        SchemeArg::Exact => Scheme::Exact,
        SchemeArg::Em => Scheme::EulerMaruyama,
    }
}

fn simulate(c: &Common) -> Outcome<()> {
    let net = load_network(c)?;
    let dt = c.dt.unwrap_or_else(|| default_dt(&net));
    if !(dt > 0.0) || !dt.is_finite() {
        return usage("--dt must be positive");
    }
    let ensemble = match generate(&net, scheme(c), dt, c.steps, c.ensemble, c.seed) {
        Err(Error::StepTooLarge { dt, limit }) => {
            return usage(format!("--dt {dt} too large for the em scheme (limit {limit})"))
        }
        r => r?,
    };
    emit(&c.out, &write_trajectories(&ensemble))
}

fn estimate(c: &Common, path: &Path) -> Outcome<()> {
    let net = load_network(c)?;
    let (src, dst) = pair(c, &net)?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let ensemble = parse_trajectories(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let mut expected = net.names();
    let mut found = ensemble.labels.clone();
    expected.sort();
    found.sort();
    if expected != found {
        return usage(format!(
            "trajectory columns {:?} do not match the network nodes {:?}",
            ensemble.labels,
            net.names()
        ));
    }
    let parent_set = if c.condition_parents {
        net.parents(&[&src, &dst])?
    } else {
        Default::default()
    };
    let parents: Vec<&str> = parent_set.iter().collect();
    let grid = tau_grid(c, net.slowest_time_constant())?;
    let mut lags: Vec<usize> = grid
        .iter()
        .map(|t| (t / ensemble.dt).round() as usize)
        .filter(|&l| l < ensemble.steps)
        .collect();
    lags.dedup();
    if lags.is_empty() {
        return usage("no lag on the grid fits inside the trajectories");
    }
    let mut points = Vec::with_capacity(lags.len());
    let mut effective_n = Vec::with_capacity(lags.len());
    for lag in lags {
        let e = empirical_decomposition(&ensemble, &src, &dst, lag, &parents)?;
        points.push(e.point);
        effective_n.push(e.effective_n);
    }
    let curve = DecompositionCurve::from_points(&src, &dst, parent_set, points);
    write_curve(c, &curve, &[("effective_n", effective_n)])
}

fn capacity(c: &Common, grid: Option<Vec<f64>>) -> Outcome<()> {
    let grid = grid.unwrap_or_else(|| (-4..=6).map(|k| 10f64.powi(k)).collect());
    if grid.is_empty() || grid.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
        return usage("--grid values must be positive and finite");
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return usage("--grid values must be strictly increasing");
    }
    let report = causation_capacity(&grid)?;
    let table = Table {
        columns: ["beta_t_rel", "peak_c", "tau_res", "i_opt"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows: report
            .points
            .iter()
            .map(|p| vec![p.beta_t_rel, p.peak_c, p.tau_res, p.i_opt])
            .collect(),
        footer: report
            .estimate
            .map(|e| vec![("capacity_estimate".to_string(), format_float(e))])
            .unwrap_or_default(),
    };
    let svg = c.svg.as_ref().map(|_| {
        render(&Chart {
            title: "peak causal influence",
            x_label: "beta t_rel",
            y_label: "nats",
            log_x: true,
            series: vec![
                Series {
                    name: "peak_c",
                    points: report.points.iter().map(|p| (p.beta_t_rel, p.peak_c)).collect(),
                },
                Series {
                    name: "i_opt",
                    points: report.points.iter().map(|p| (p.beta_t_rel, p.i_opt)).collect(),
                },
            ],
        })
    });
    emit(&c.out, &table.to_csv())?;
    if let (Some(path), Some(svg)) = (&c.svg, svg) {
        write_atomic(path, &svg)?;
    }
    Ok(())
}

fn verify(c: &Common) -> Outcome<i32> {
    let groups: Vec<(String, Vec<Check>)> = if c.network.is_some() {
        let net = load_network(c)?;
        let grid = tau_grid(c, net.slowest_time_constant())?;
        vec![("network".to_string(), verify_network(&net, &grid)?)]
    } else {
        verify_fixtures(c.tau_steps.unwrap_or(64))?
    };
    let mut report = String::new();
    let mut all = true;
    for (group, checks) in &groups {
        for ch in checks {
            all &= ch.passed || ch.advisory;
            let status = match (ch.passed, ch.advisory) {
                (true, _) => "PASS",
                (false, true) => "WARN",
                (false, false) => "FAIL",
            };
            report.push_str(&format!(
                "{status:<4}  {group}: {}  ({})\n",
                ch.name,
                ch.detail
            ));
        }
    }
    emit(&c.out, &report)?;
    Ok(if all { 0 } else { 3 })
}
