//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 null clustering,
//! 3 infeasible configuration. Errors go to stderr as one JSON line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::clusterer::{cluster_algorithm1, ClusterOptions, DEFAULT_SEARCH_CAP};
use crate::data::{DataFormat, Dataset, Labeling};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, separability};
use crate::experiments::{run_experiment, write_trials_csv, Experiment, McConfig};
use crate::measures::{max_total_correlation, total_correlation, total_correlation_of};
use crate::model::BmmParams;
use crate::params::{derive_algo_params, DimCap};
use crate::real::{fmt17, parse_real};
use crate::sampler::sample_bmm;
use crate::theory::{bound_report, BoundInputs};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NULL_CLUSTERING: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "bmm", version, about = "Reliable clustering of Bernoulli mixture data")]
struct Cli {
    /// Worker threads; 0 picks the number of available cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a dataset and its true labels from a mixture.
    Gen(GenArgs),
    /// Total correlation of a dataset.
    Tc(TcArgs),
    /// Maximal total correlation over d-column subsets.
    Mtc(MtcArgs),
    /// Cluster a dataset.
    Cluster(ClusterArgs),
    /// Compare predicted labels against ground truth.
    Eval(EvalArgs),
    /// Separability of a frequency matrix.
    Separability(SeparabilityArgs),
    /// Derived parameters and bound values.
    Params(ParamsArgs),
    /// Monte Carlo check of a probability bound.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Serialize)]
struct GenArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    l: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// K x L frequency matrix, CSV without header.
    #[arg(long)]
    p_file: PathBuf,
    /// Mixing weights, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    w: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Sidecar manifest; defaults to `<out>.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Dataset format; inferred from the extension of `--out` when absent.
    #[arg(long, value_enum)]
    #[serde(serialize_with = "ser_format")]
    format: Option<DataFormat>,
}

#[derive(Debug, Args, Serialize)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    /// Dataset format; detected from the file contents when absent.
    #[arg(long, value_enum)]
    #[serde(serialize_with = "ser_format")]
    format: Option<DataFormat>,
}

#[derive(Debug, Args, Serialize)]
struct TcArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    /// 0-based columns to restrict to, comma separated.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<usize>>,
    /// Also write a JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct MtcArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[arg(long)]
    d: usize,
    /// Examine this many randomly drawn subsets instead of all of them.
    #[arg(long)]
    budget: Option<u128>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ClusterArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    epsilon: f64,
    /// Defaults to the column count of the input.
    #[arg(long)]
    l_sep: Option<usize>,
    /// Sub-dimension override.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEARCH_CAP)]
    search_cap: u128,
    /// Examine this many random column subsets per MTC evaluation.
    #[arg(long)]
    mtc_budget: Option<u128>,
    #[arg(long, default_value_t = 0)]
    mtc_seed: u64,
    /// Labels CSV, written when a clustering is accepted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// JSON report; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    predicted: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
    epsilons: Vec<f64>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SeparabilityArgs {
    #[arg(long)]
    p_file: PathBuf,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ParamsArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    l_sep: usize,
    #[arg(long)]
    d: Option<usize>,
    /// Sample size at which bounds are evaluated.
    #[arg(long, default_value_t = 0)]
    n: u64,
    /// Column count; defaults to `--l-sep`.
    #[arg(long)]
    l: Option<usize>,
    /// Component count; defaults to ceil(1/alpha).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    zeta: f64,
    /// Constant of the separated-column threshold.
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Constant of the sample-size threshold.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    experiment: Experiment,
    #[arg(long)]
    config: PathBuf,
    /// JSON outcome; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-trial statistics CSV.
    #[arg(long)]
    trials_csv: Option<PathBuf>,
}

fn ser_format<S: serde::Serializer>(f: &Option<DataFormat>, s: S) -> Result<S::Ok, S::Error> {
    match f {
        Some(DataFormat::Csv) => s.serialize_str("csv"),
        Some(DataFormat::Bin) => s.serialize_str("bin"),
        None => s.serialize_none(),
    }
}

/// Provenance block embedded in every JSON output.
#[derive(Debug, Serialize)]
struct RunManifest {
    subcommand: &'static str,
    flags: Value,
    version: &'static str,
    input_digests: BTreeMap<String, String>,
    wall_time_ms: u64,
}

struct Run {
    subcommand: &'static str,
    flags: Value,
    inputs: BTreeMap<String, String>,
    start: Instant,
}

impl Run {
    fn new(subcommand: &'static str, flags: &impl Serialize) -> Result<Self> {
        Ok(Run {
            subcommand,
            flags: to_json(flags)?,
            inputs: BTreeMap::new(),
            start: Instant::now(),
        })
    }

    fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.inputs
            .insert(path.display().to_string(), hex::encode(Sha256::digest(&bytes)));
        Ok(bytes)
    }

    fn manifest(&self) -> RunManifest {
        RunManifest {
            subcommand: self.subcommand,
            flags: self.flags.clone(),
            version: env!("CARGO_PKG_VERSION"),
            input_digests: self.inputs.clone(),
            wall_time_ms: self.start.elapsed().as_millis() as u64,
        }
    }

    /// `body` with the run manifest attached under `"run"`.
    fn wrap(&self, body: &impl Serialize) -> Result<Value> {
        let mut map = match to_json(body)? {
            Value::Object(m) => m,
            other => {
                let mut m = Map::new();
                m.insert("result".into(), other);
                m
            }
        };
        map.insert("run".into(), to_json(&self.manifest())?);
        Ok(Value::Object(map))
    }
}

fn to_json(x: &impl Serialize) -> Result<Value> {
    serde_json::to_value(x).map_err(|e| Error::Format(e.to_string()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Writes pretty JSON to `path`, or to stdout when `path` is `None`.
fn emit_json(path: Option<&Path>, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    match path {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn print_line(line: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

fn load_dataset(run: &mut Run, args: &InputArgs) -> Result<Dataset> {
    let bytes = run.read(&args.input)?;
    let format = args.format.unwrap_or(if bytes.starts_with(crate::data::BIN_MAGIC) {
        DataFormat::Bin
    } else {
        DataFormat::Csv
    });
    match format {
        DataFormat::Csv => Dataset::read_csv(bytes.as_slice()),
        DataFormat::Bin => Dataset::read_bin(bytes.as_slice()),
    }
}

fn load_labels(run: &mut Run, path: &Path) -> Result<Labeling> {
    Labeling::read_csv(run.read(path)?.as_slice())
}

/// Reads a headerless CSV matrix of reals.
fn read_real_matrix(bytes: &[u8]) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                parse_real(field)
                    .ok_or_else(|| Error::Format(format!("row {i}, column {j}: `{field}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn cmd_gen(args: &GenArgs) -> Result<i32> {
    let mut run = Run::new("gen", args)?;
    let p = read_real_matrix(&run.read(&args.p_file)?)?;
    let model = BmmParams::new(p, args.w.clone())?;
    if model.k() != args.k || model.l() != args.l {
        return Err(Error::Invalid(format!(
            "frequency matrix is {}x{} but --k {} --l {} was given",
            model.k(),
            model.l(),
            args.k,
            args.l
        )));
    }
    let sample = sample_bmm(&model, args.n, args.seed)?;
    let format = args.format.unwrap_or_else(|| DataFormat::from_path(&args.out));
    sample.data.save(&args.out, format)?;
    sample.truth.save(&args.truth)?;
    let manifest_path = args.manifest.clone().unwrap_or_else(|| {
        let mut s = args.out.clone().into_os_string();
        s.push(".json");
        PathBuf::from(s)
    });
    let value = run.wrap(&sample.manifest())?;
    emit_json(Some(&manifest_path), &value)?;
    emit_json(None, &value)?;
    Ok(EXIT_OK)
}

fn cmd_tc(args: &TcArgs) -> Result<i32> {
    let mut run = Run::new("tc", args)?;
    let cap = DimCap::from_env()?;
    let data = load_dataset(&mut run, &args.input)?;
    let value = match &args.columns {
        Some(cols) => total_correlation_of(&data, cols, cap)?,
        None => total_correlation(&data, cap)?,
    };
    print_line(&fmt17(value))?;
    if let Some(path) = &args.report {
        let body = json!({ "total_correlation": to_json(&crate::real::Real(value))? });
        emit_json(Some(path), &run.wrap(&body)?)?;
    }
    Ok(EXIT_OK)
}

fn cmd_mtc(args: &MtcArgs) -> Result<i32> {
    let mut run = Run::new("mtc", args)?;
    let cap = DimCap::from_env()?;
    let data = load_dataset(&mut run, &args.input)?;
    let r = max_total_correlation(&data, args.d, args.budget, args.seed, cap)?;
    let cols: Vec<String> = r.argmax_columns.iter().map(|c| c.to_string()).collect();
    print_line(&fmt17(r.value))?;
    print_line(&cols.join(","))?;
    print_line(if r.exhaustive { "exhaustive" } else { "sampled" })?;
    if let Some(path) = &args.report {
        emit_json(Some(path), &run.wrap(&r)?)?;
    }
    Ok(EXIT_OK)
}

fn cmd_cluster(args: &ClusterArgs) -> Result<i32> {
    let mut run = Run::new("cluster", args)?;
    let cap = DimCap::from_env()?;
    let data = load_dataset(&mut run, &args.input)?;
    let l_sep = args.l_sep.unwrap_or(data.l());
    let params = derive_algo_params(args.alpha, args.delta, args.epsilon, l_sep, args.d, cap)?;
    let opts = ClusterOptions {
        search_cap: args.search_cap,
        dim_cap: cap,
        mtc_budget: args.mtc_budget,
        mtc_seed: args.mtc_seed,
    };
    let result = cluster_algorithm1(&data, &params, &opts)?;
    if let (Some(z), Some(path)) = (&result.result, &args.output) {
        z.save(path)?;
    }
    let mut body = match to_json(&result)? {
        Value::Object(m) => m,
        _ => unreachable!("cluster runs serialize as objects"),
    };
    body.insert("params".into(), to_json(&params)?);
    body.insert("warnings".into(), to_json(&params.warnings())?);
    emit_json(args.report.as_deref(), &run.wrap(&Value::Object(body))?)?;
    Ok(if result.result.is_some() {
        EXIT_OK
    } else {
        EXIT_NULL_CLUSTERING
    })
}

fn cmd_eval(args: &EvalArgs) -> Result<i32> {
    let mut run = Run::new("eval", args)?;
    let predicted = load_labels(&mut run, &args.predicted)?;
    let truth = load_labels(&mut run, &args.truth)?;
    let report = evaluate(&predicted, &truth, &args.epsilons)?;
    emit_json(args.report.as_deref(), &run.wrap(&report)?)?;
    Ok(EXIT_OK)
}

fn cmd_separability(args: &SeparabilityArgs) -> Result<i32> {
    let mut run = Run::new("separability", args)?;
    let p = read_real_matrix(&run.read(&args.p_file)?)?;
    let report = separability(&p, args.delta)?;
    emit_json(args.report.as_deref(), &run.wrap(&report)?)?;
    Ok(EXIT_OK)
}

fn cmd_params(args: &ParamsArgs) -> Result<i32> {
    let run = Run::new("params", args)?;
    let cap = DimCap::from_env()?;
    let params = derive_algo_params(args.alpha, args.delta, args.epsilon, args.l_sep, args.d, cap)?;
    let inputs = BoundInputs {
        n: args.n,
        l: args.l.unwrap_or(args.l_sep),
        k: args.k,
        zeta: args.zeta,
        b: args.b,
        c: args.c,
    };
    let bounds = bound_report(&params, &inputs)?;
    let body = json!({
        "params": to_json(&params)?,
        "warnings": to_json(&params.warnings())?,
        "bounds": to_json(&bounds)?,
    });
    emit_json(args.report.as_deref(), &run.wrap(&body)?)?;
    Ok(EXIT_OK)
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let mut run = Run::new("verify", args)?;
    let bytes = run.read(&args.config)?;
    let mut config: McConfig =
        serde_json::from_slice(&bytes).map_err(|e| Error::Format(format!("config: {e}")))?;
    config.dim_cap = DimCap::from_env()?;
    let outcome = run_experiment(args.experiment, &config)?;
    if let Some(path) = &args.trials_csv {
        let mut buf = Vec::new();
        write_trials_csv(&outcome.records, &mut buf)?;
        write_file(path, &buf)?;
    }
    emit_json(args.out.as_deref(), &run.wrap(&outcome)?)?;
    Ok(EXIT_OK)
}

fn dispatch(command: &Command) -> Result<i32> {
    match command {
        Command::Gen(a) => cmd_gen(a),
        Command::Tc(a) => cmd_tc(a),
        Command::Mtc(a) => cmd_mtc(a),
        Command::Cluster(a) => cmd_cluster(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Separability(a) => cmd_separability(a),
        Command::Params(a) => cmd_params(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

fn report_error(kind: &str, message: &str) {
    let line = json!({ "error": kind, "message": message });
    eprintln!("{line}");
}

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let text = e.to_string();
            let message: Vec<&str> = text
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .filter(|l| !l.is_empty())
                .collect();
            report_error("usage", message.join(" ").trim_start_matches("error: "));
            return EXIT_USAGE;
        }
    };
    if cli.threads > 0 {
        // Fails only if a pool already exists, in which case it is reused.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            if e.is_infeasible() {
                EXIT_INFEASIBLE
            } else {
                EXIT_USAGE
            }
        }
    }
}
