//! Command-line driver: model selection, seeded verification runs, metric
//! dumps, integration constants and twisted-period checks.
//!
//! Exit statuses: `0` when every selected check passes, `1` for numeric
//! failures (failing checks or inadmissible points), `2` for configuration
//! errors (unknown models, checks or parameters, unreadable files).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::catalog::{self, ModelBundle, Params, PsiChoice};
use crate::error::Error;
use crate::exprcore::Point;
use crate::geometry;
use crate::verify::{self, Target, VerifyConfig};

#[derive(Parser, Debug)]
#[command(name = "openwdvv", version, about = "Open WDVV solutions from Landau-Ginzburg models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List model families with their parameter schemas.
    ListModels,
    /// Run residual checks at seeded sample points and emit a JSON report.
    Verify(RunArgs),
    /// Print eta, g and c at a point read from a JSON file.
    Metric {
        #[command(flatten)]
        model: ModelArgs,
        /// JSON map from chart variable to `[re, im]`.
        #[arg(long)]
        point: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the integration constant of the type-A solution.
    Varpi {
        #[arg(long)]
        ell: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the Gauss-Manin relation of twisted periods (dual type A).
    Periods(RunArgs),
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Model family id (see `list-models`).
    #[arg(long)]
    model: String,
    /// Model parameter `key=value`; repeatable.
    #[arg(long = "param", value_name = "K=V")]
    params: Vec<String>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tolerance override `check=value`; repeatable.
    #[arg(long = "tol", value_name = "CHECK=VAL")]
    tols: Vec<String>,
    /// Comma-separated check selection.
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sample-level parallelism.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Record elapsed wall time in `wall_ms` (otherwise `0`).
    #[arg(long)]
    timing: bool,
}

/// Failure classes of the command-line driver.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter(_) | Error::UnboundVariable(_) => CliError::Config(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

/// Parses arguments, runs the command and returns the process exit status.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::ListModels => {
            let mut s = String::new();
            for (id, schema) in catalog::FAMILIES {
                s.push_str(&format!("{id}\t{schema}\n"));
            }
            emit(None, &s)?;
            Ok(0)
        }
        Command::Varpi { ell, out } => {
            if !(1..=8).contains(&ell) {
                return Err(CliError::Config(format!("`ell` must lie in 1..=8, got {ell}")));
            }
            emit(out.as_deref(), &format!("{}\n", catalog::format_varpi(ell)))?;
            Ok(0)
        }
        Command::Metric { model, point, out } => {
            let m = build_rank1(&model)?;
            let p = read_point(&point, &m)?;
            emit(out.as_deref(), &metric_dump(&m, &p)?)?;
            Ok(0)
        }
        Command::Verify(args) => run_checks(args, false),
        Command::Periods(args) => run_checks(args, true),
    }
}

fn parse_params(raw: &[String]) -> Result<Params, CliError> {
    let mut p = Params::new();
    for kv in raw {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("parameter `{kv}` is not of the form key=value")))?;
        if p.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(CliError::Config(format!("parameter `{k}` given twice")));
        }
    }
    Ok(p)
}

fn build_rank1(args: &ModelArgs) -> Result<ModelBundle, CliError> {
    let p = parse_params(&args.params)?;
    Ok(catalog::build(&args.model, &p)?)
}

fn build_target(args: &ModelArgs) -> Result<Target, CliError> {
    if args.model == "rank2-a" {
        let p = parse_params(&args.params)?;
        if let Some(k) = p.keys().find(|k| k.as_str() != "ell") {
            return Err(CliError::Config(format!("unknown parameter `{k}`")));
        }
        let ell = catalog::int_param(&p, "ell")?;
        if ell < 1 {
            return Err(CliError::Config(format!("`ell` must be positive, got {ell}")));
        }
        return Ok(Target::Rank2(catalog::build_rank2_a(ell as usize, PsiChoice::Standard)?));
    }
    Ok(Target::Rank1(build_rank1(args)?))
}

fn run_checks(args: RunArgs, periods_only: bool) -> Result<i32, CliError> {
    let target = build_target(&args.model)?;
    let mut tolerances = BTreeMap::new();
    for kv in &args.tols {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("tolerance `{kv}` is not of the form check=value")))?;
        let v: f64 =
            v.trim().parse().map_err(|_| CliError::Config(format!("tolerance `{kv}` has a non-numeric value")))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(CliError::Config(format!("tolerance `{kv}` must be finite and non-negative")));
        }
        tolerances.insert(k.trim().to_string(), v);
    }
    let period_names = ["gauss-manin", "period-doubling"];
    let checks = if periods_only {
        if target.family() != "dual-saito-a" {
            return Err(CliError::Config(format!(
                "twisted periods are available for dual-saito-a, not {}",
                target.family()
            )));
        }
        let list = args.checks.unwrap_or_else(|| period_names.iter().map(|s| s.to_string()).collect());
        if let Some(bad) = list.iter().find(|c| !period_names.contains(&c.as_str())) {
            return Err(CliError::Config(format!("`{bad}` is not a period check")));
        }
        Some(list)
    } else {
        args.checks
    };
    if args.jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let cfg = VerifyConfig {
        seed: args.seed,
        samples: args.samples,
        checks,
        tolerances,
        jobs: args.jobs,
        timing: args.timing,
    };
    let report = verify::run(&target, &cfg)?;
    let text = serde_json::to_string_pretty(&report.to_json())
        .map_err(|e| CliError::Numeric(format!("cannot serialise report: {e}")))?;
    emit(args.out.as_deref(), &format!("{text}\n"))?;
    if report.all_pass() {
        Ok(0)
    } else {
        eprintln!("failing checks: {}", report.failing().join(", "));
        Ok(1)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Config(format!("cannot write to stdout: {e}")))
        }
    }
}

/// Reads a point file (`{"var": [re, im], ...}`) covering exactly the chart of `m`.
fn read_point(path: &Path, m: &ModelBundle) -> Result<Point, CliError> {
    let raw =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_point(&raw, m)
}

/// Parses point-file JSON against the chart of `m`.
pub fn parse_point(raw: &str, m: &ModelBundle) -> Result<Point, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(raw).map_err(|e| CliError::Config(format!("point file is not valid JSON: {e}")))?;
    let obj = value.as_object().ok_or_else(|| CliError::Config("point file must be a JSON object".into()))?;
    let mut p = Point::new();
    for (k, v) in obj {
        if !m.chart.contains(k) {
            return Err(CliError::Config(format!("`{k}` is not a chart variable of {}", m.family)));
        }
        let pair = v
            .as_array()
            .filter(|a| a.len() == 2)
            .and_then(|a| Some(C64::new(a[0].as_f64()?, a[1].as_f64()?)))
            .ok_or_else(|| CliError::Config(format!("value of `{k}` must be [re, im]")))?;
        p.insert(k.clone(), pair);
    }
    if let Some(missing) = m.chart.iter().find(|c| !p.contains_key(*c)) {
        return Err(CliError::Config(format!("point file lacks chart variable `{missing}`")));
    }
    Ok(p)
}

fn fmt_entry(z: C64) -> String {
    format!("{:.14e},{:.14e}", z.re, z.im)
}

fn dump_matrix(name: &str, a: &DMatrix<C64>) -> String {
    let mut s = format!("{name} {} {}\n", a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        let row: Vec<String> = (0..a.ncols()).map(|j| fmt_entry(a[(i, j)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Text dump of `eta`, the intersection form `g` (upper indices) and `c_abc`.
pub fn metric_dump(m: &ModelBundle, p: &Point) -> Result<String, CliError> {
    let frame = geometry::critical_points(m, p)?;
    if frame.groups.len() != m.dim() {
        return Err(CliError::Numeric(format!(
            "inadmissible point: {} distinct critical values for dimension {} (discriminant guard)",
            frame.groups.len(),
            m.dim()
        )));
    }
    if let Some(g) = frame.groups.iter().find(|g| g.u.norm() < 1e-8) {
        return Err(CliError::Numeric(format!(
            "inadmissible point: critical value of modulus {:e} (discriminant guard)",
            g.u.norm()
        )));
    }
    let td = geometry::residue_data(m, p, &frame, true)?;
    let g = match &m.metric {
        Some(g) => g.clone(),
        None => geometry::dual_metric_from_residue(m, &td)?,
    };
    let n = m.dim();
    let mut s = dump_matrix("eta", &td.eta);
    s.push_str(&dump_matrix("g", &g));
    s.push_str(&format!("c {n} {n} {n}\n"));
    for row in td.c.chunks(n) {
        s.push_str(&row.iter().map(|z| fmt_entry(*z)).collect::<Vec<_>>().join(" "));
        s.push('\n');
    }
    Ok(s)
}
