//! Command-line front end: RunSpec parsing, the commands and their JSON
//! reports. Exit codes: 0 when every check passes, 1 on a failed check or
//! numerical failure, 2 on invalid input.

mod commands;
pub mod spec;

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use spec::{LambdaSpec, OutputSpec, RunSpec, SolutionSpec};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// One measured quantity against its threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(deserialize_with = "real_or_null")]
    pub value: f64,
    #[serde(deserialize_with = "real_or_null")]
    pub threshold: f64,
    /// `le`: value ≤ threshold, `ge`: value ≥ threshold.
    pub relation: String,
    pub passed: bool,
}

/// JSON has no NaN or infinity; serde_json writes them as null.
fn real_or_null<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl Check {
    pub fn le(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, relation: "le".into(), passed: value <= threshold }
    }

    pub fn ge(name: &str, value: f64, threshold: f64) -> Self {
        Check { name: name.into(), value, threshold, relation: "ge".into(), passed: value >= threshold }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub spec: RunSpec,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub data: Value,
    pub outputs_written: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

/// Why a command did not produce a passing report.
#[derive(Clone, Debug, PartialEq)]
pub enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<centroflat::Error> for Failure {
    fn from(e: centroflat::Error) -> Self {
        use centroflat::Error as E;
        match e {
            E::UnknownSolution(_) | E::InvalidParameter(_) | E::InvalidGrid(_) | E::Parse { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numerical(format!("i/o: {e}"))
    }
}

/// Checks, details and written files of one command.
#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub data: Value,
    pub written: Vec<String>,
}

/// Runs `spec` and returns the exit code with its report.
pub fn run(spec: &RunSpec, timestamp: bool) -> (i32, Report) {
    let result = commands::dispatch(spec);
    let mut report = Report {
        tool: "centroflat".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: spec.command.clone(),
        spec: spec.clone(),
        passed: false,
        checks: Vec::new(),
        data: Value::Null,
        outputs_written: Vec::new(),
        error: None,
        timestamp: timestamp.then(|| {
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
        }),
    };
    let code = match result {
        Ok(o) => {
            report.passed = o.checks.iter().all(|c| c.passed);
            report.checks = o.checks;
            report.data = o.data;
            report.outputs_written = o.written;
            if report.passed {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(Failure::Usage(m)) => {
            report.error = Some(m);
            EXIT_USAGE
        }
        Err(Failure::Numerical(m)) => {
            report.error = Some(m);
            EXIT_FAIL
        }
    };
    (code, report)
}

#[derive(Parser, Debug)]
#[command(name = "centroflat", version, about = "Flat centroaffine surfaces: verification, reconstruction and transforms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List catalogue solutions.
    List(Common),
    /// Residual of the associativity equation on a grid and at sample points.
    Verify(Common),
    /// Integrate the frame equations and export the surface.
    Reconstruct(Common),
    /// Reconstruct one surface per λ.
    SweepLambda(Common),
    /// Centroaffine invariants and the conjugacy check.
    Invariants(Common),
    /// Curvature of the characteristic 3-web.
    Web(Common),
    /// The (t, y) reparametrization or the characteristic metric identity.
    Transform(Common),
    /// Chain to the 3-wave system.
    Chain(Common),
    /// Evolve the quasilinear system against the exact solution.
    Hydro(Common),
    /// Summarize previously written reports.
    Report(Common),
    /// Run the command named in a RunSpec file.
    Run(Common),
}

/// Flags shared by all commands; each overrides the matching RunSpec field.
#[derive(Args, Debug, Default, Clone)]
pub struct Common {
    /// RunSpec JSON file loaded before the other flags are applied.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub solution: Option<String>,
    /// Solution parameter `name=value`; repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    /// `xmin,xmax,ymin,ymax`
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub domain: Option<Vec<f64>>,
    /// `nx,ny` or a single n for n×n.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<usize>>,
    /// One or more comma-separated λ.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub lambda: Option<Vec<f64>>,
    /// Threshold `name=value`; repeatable.
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    pub tolerances: Vec<String>,
    /// Command setting `name=value`; repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    pub settings: Vec<String>,
    #[arg(long)]
    pub scheme: Option<String>,
    /// Output `kind=path`; repeatable.
    #[arg(long = "output", value_name = "KIND=PATH")]
    pub outputs: Vec<String>,
    /// Report file read by `report`; repeatable.
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Leave the timestamp out of the report.
    #[arg(long)]
    pub no_timestamp: bool,
    /// Also write the report JSON here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn split_pair(s: &str) -> Result<(String, String), Failure> {
    s.split_once('=')
        .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
        .ok_or_else(|| Failure::Usage(format!("expected NAME=VALUE, got `{s}`")))
}

fn parse_real(name: &str, v: &str) -> Result<f64, Failure> {
    v.parse().map_err(|_| Failure::Usage(format!("`{name}` needs a number, got `{v}`")))
}

/// RunSpec from an optional spec file overlaid with command-line flags.
pub fn build_spec(name: Option<&str>, c: &Common) -> Result<RunSpec, Failure> {
    let mut spec = match &c.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<RunSpec>(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => RunSpec::default(),
    };
    if let Some(n) = name {
        spec.command = n.to_string();
    }
    if let Some(id) = &c.solution {
        let keep = spec.solution.as_ref().filter(|s| &s.id == id).map(|s| s.params.clone()).unwrap_or_default();
        spec.solution = Some(SolutionSpec { id: id.clone(), params: keep });
    }
    for p in &c.params {
        let (k, v) = split_pair(p)?;
        let value = parse_real(&k, &v)?;
        let sol = spec.solution.as_mut().ok_or_else(|| Failure::Usage("--param needs a solution".into()))?;
        sol.params.insert(k, value);
    }
    if let Some(d) = &c.domain {
        let &[a, b, cc, dd] = d.as_slice() else {
            return Err(Failure::Usage("--domain takes xmin,xmax,ymin,ymax".into()));
        };
        spec.domain = Some([a, b, cc, dd]);
    }
    if let Some(g) = &c.grid {
        spec.grid = Some(match g.as_slice() {
            [n] => [*n, *n],
            [nx, ny] => [*nx, *ny],
            _ => return Err(Failure::Usage("--grid takes n or nx,ny".into())),
        });
    }
    if let Some(l) = &c.lambda {
        spec.lambda = Some(if l.len() == 1 { LambdaSpec::One(l[0]) } else { LambdaSpec::Many(l.clone()) });
    }
    for t in &c.tolerances {
        let (k, v) = split_pair(t)?;
        let value = parse_real(&k, &v)?;
        spec.tolerances.insert(k, value);
    }
    for t in &c.settings {
        let (k, v) = split_pair(t)?;
        let value = parse_real(&k, &v)?;
        spec.settings.insert(k, value);
    }
    if let Some(s) = &c.scheme {
        spec.scheme = Some(s.clone());
    }
    for o in &c.outputs {
        let (kind, path) = split_pair(o)?;
        spec.outputs.retain(|e| e.kind != kind);
        spec.outputs.push(OutputSpec { kind, path });
    }
    if !c.inputs.is_empty() {
        spec.inputs = c.inputs.iter().map(|p| p.display().to_string()).collect();
    }
    if let Some(s) = c.seed {
        spec.seed = s;
    }
    if spec.command.is_empty() {
        return Err(Failure::Usage("no command given".into()));
    }
    Ok(spec)
}

/// Caps the worker pool at CENTROFLAT_THREADS when set.
pub fn configure_threads() {
    if let Some(n) = std::env::var("CENTROFLAT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parses `args`, runs the command, prints the report and returns the exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let (name, common) = match &cli.command {
        Command::List(c) => (Some("list"), c),
        Command::Verify(c) => (Some("verify"), c),
        Command::Reconstruct(c) => (Some("reconstruct"), c),
        Command::SweepLambda(c) => (Some("sweep-lambda"), c),
        Command::Invariants(c) => (Some("invariants"), c),
        Command::Web(c) => (Some("web"), c),
        Command::Transform(c) => (Some("transform"), c),
        Command::Chain(c) => (Some("chain"), c),
        Command::Hydro(c) => (Some("hydro"), c),
        Command::Report(c) => (Some("report"), c),
        Command::Run(c) => (None, c),
    };
    let spec = match build_spec(name, common) {
        Ok(s) => s,
        Err(Failure::Usage(m) | Failure::Numerical(m)) => {
            eprintln!("centroflat: {m}");
            return EXIT_USAGE;
        }
    };
    let (code, report) = run(&spec, !common.no_timestamp);
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    if let Some(path) = &common.report {
        if let Err(e) = fs::write(path, &text) {
            eprintln!("centroflat: {}: {e}", path.display());
            return EXIT_FAIL;
        }
    }
    let _ = out.write_all(text.as_bytes());
    if let Some(e) = &report.error {
        eprintln!("centroflat: {e}");
    }
    code
}
