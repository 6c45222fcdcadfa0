//! Command-line front end.
//!
//! Every subcommand takes the same flag set and ignores the flags it has no
//! use for. Without `--out` the primary output is printed to stdout in
//! `--format`; with `--out DIR` all outputs of the command are written to
//! fixed file names in `DIR`:
//!
//! | command  | files                               |
//! |----------|-------------------------------------|
//! | fit      | `kernel.json`, `trace.csv`          |
//! | estimate | `estimate.csv`, `estimate.json`     |
//! | oracle   | `kernel.json`, `oracle.json`, `oracle.csv` |
//! | bench    | `bench.csv`, `summary.json`         |
//! | diag     | `diag.json`, `exceedances.csv`      |
//!
//! CSV files open with a `# monoracle <command> key=value ...` line echoing
//! the resolved configuration; JSON files carry it under `"config"`.
//! The output location itself is not echoed, so reruns into different
//! directories are byte-identical.
//!
//! Exit codes: 0 success, 1 bound violation found by `diag`, 2 usage or
//! precondition error, 3 I/O error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bench::{run_bench, BenchConfig};
use crate::criteria::{cv_value, estimate_density, mise_value, EmpiricalSpectrum};
use crate::densities::{parse_reals, DensityModel, SampleSet};
use crate::error::{Error, Result};
use crate::selector::{cv_optimal_kernel, minimax_kernel, oracle_kernel, refine, RefineOptions};
use crate::spectral::{FrequencyGrid, KernelFile, SpectralKernel};
use crate::waveletdiag::favorable::FavorableStatistics;
use crate::waveletdiag::{log_depth, BoundReport, FAdaptedBasis, SpectralHaarBasis};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Caps the worker threads of parallel commands.
pub const THREADS_ENV: &str = "MONORACLE_THREADS";

const DEFAULT_BAND: f64 = 16.0;
const DEFAULT_RESOLUTION: u32 = 6;
const DEFAULT_N: usize = 200;

#[derive(Debug, Parser)]
#[command(
    name = "monoracle",
    version,
    about = "Kernel density estimation with monotone-spectrum kernels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Select the CV-optimal kernel K_0 by dyadic refinement.
    Fit(Options),
    /// Evaluate the kernel estimate at the points of a file.
    Estimate(Options),
    /// Compute the monotone oracle K* and its MISE for a model.
    Oracle(Options),
    /// Monte Carlo comparison of ISE(K_0) with MISE(K*).
    Bench(Options),
    /// Coefficient bounds and favorable-event frequencies.
    Diag(Options),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
struct Options {
    /// Density model, e.g. "gaussian:0,1" or "mix:0.5*gaussian:-2,1+0.5*gaussian:2,1".
    #[arg(long)]
    model: Option<String>,
    /// Sample file: one real per line, '#' starts a comment.
    #[arg(long)]
    sample: Option<PathBuf>,
    /// Sample size for model draws [default: 200].
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Frequency band W of the kernel.
    #[arg(long = "W", default_value_t = DEFAULT_BAND)]
    band: f64,
    /// Grid resolution t (bin width 2^-t). `fit` refines up to the
    /// tolerance when absent; other commands default to 6.
    #[arg(long)]
    t: Option<u32>,
    /// Refinement tolerance on the discretization gap (2/π) 2^-t.
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    /// Monte Carlo replications R.
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Favorable-event threshold level λ.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Output directory; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Kernel JSON file (`estimate`, `diag`).
    #[arg(long)]
    kernel: Option<PathBuf>,
    /// Points file for `estimate`.
    #[arg(long)]
    points: Option<PathBuf>,
    /// Record wall-clock times in bench output.
    #[arg(long)]
    timing: bool,
}

/// Resolved configuration echoed into every output.
#[derive(Debug, Clone, Serialize)]
struct RunConfig {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sample: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(rename = "W")]
    band: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    replications: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kernel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<String>,
    format: Format,
}

impl RunConfig {
    fn new(command: &'static str, opts: &Options, format: Format) -> Self {
        Self {
            command,
            model: None,
            sample: None,
            n: None,
            seed: None,
            band: opts.band,
            t: None,
            eps: None,
            replications: None,
            lambda: None,
            kernel: None,
            points: None,
            format,
        }
    }

    fn csv_comment(&self) -> String {
        let mut line = format!("# monoracle {}", self.command);
        if let Ok(Value::Object(map)) = serde_json::to_value(self) {
            for (key, value) in map {
                if key == "command" {
                    continue;
                }
                let text = match value {
                    Value::String(s) => s,
                    other => other.to_string(),
                };
                let _ = write!(line, " {key}={text}");
            }
        }
        line.push('\n');
        line
    }
}

/// One output document of a command.
struct Output {
    file: &'static str,
    format: Format,
    body: String,
}

struct Outcome {
    outputs: Vec<Output>,
    exit: i32,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match with_thread_cap(|| execute(&cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("monoracle: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

fn with_thread_cap<R: Send>(body: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    let Ok(text) = std::env::var(THREADS_ENV) else {
        return body();
    };
    let threads: usize = text.trim().parse().ok().filter(|&k| k > 0).ok_or_else(|| {
        Error::InvalidArgument(format!("{THREADS_ENV}={text:?} is not a positive integer"))
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
    pool.install(body)
}

fn execute(command: &Command) -> Result<i32> {
    let outcome = match command {
        Command::Fit(o) => cmd_fit(o)?,
        Command::Estimate(o) => cmd_estimate(o)?,
        Command::Oracle(o) => cmd_oracle(o)?,
        Command::Bench(o) => cmd_bench(o)?,
        Command::Diag(o) => cmd_diag(o)?,
    };
    let (Command::Fit(opts)
    | Command::Estimate(opts)
    | Command::Oracle(opts)
    | Command::Bench(opts)
    | Command::Diag(opts)) = command;
    emit(&outcome.outputs, opts)?;
    Ok(outcome.exit)
}

fn emit(outputs: &[Output], opts: &Options) -> Result<()> {
    match &opts.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            for o in outputs {
                fs::write(dir.join(o.file), &o.body)?;
            }
        }
        None => {
            let wanted = opts.format.unwrap_or(outputs[0].format);
            let chosen = outputs
                .iter()
                .find(|o| o.format == wanted)
                .unwrap_or(&outputs[0]);
            std::io::stdout().lock().write_all(chosen.body.as_bytes())?;
        }
    }
    Ok(())
}

fn json_output(file: &'static str, value: &Value) -> Result<Output> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    Ok(Output {
        file,
        format: Format::Json,
        body,
    })
}

fn csv_output(file: &'static str, config: &RunConfig, table: String) -> Output {
    Output {
        file,
        format: Format::Csv,
        body: config.csv_comment() + &table,
    }
}

fn parse_model(opts: &Options) -> Result<Option<DensityModel>> {
    opts.model.as_deref().map(str::parse).transpose()
}

fn require_model(opts: &Options, command: &str) -> Result<DensityModel> {
    parse_model(opts)?.ok_or_else(|| Error::InvalidArgument(format!("{command} needs --model")))
}

/// Data for `fit` and `estimate`: either `--sample` or `--model` draws.
fn load_data(opts: &Options, config: &mut RunConfig) -> Result<(SampleSet, Option<DensityModel>)> {
    match (&opts.sample, parse_model(opts)?) {
        (Some(_), Some(_)) => Err(Error::InvalidArgument(
            "give either --sample or --model (with --n and --seed), not both".into(),
        )),
        (None, None) => Err(Error::InvalidArgument(
            "no data: give --sample or --model".into(),
        )),
        (Some(path), None) => {
            let sample = SampleSet::read(path)?;
            config.sample = Some(path.display().to_string());
            config.n = Some(sample.len());
            Ok((sample, None))
        }
        (None, Some(model)) => {
            let n = opts.n.unwrap_or(DEFAULT_N);
            let sample = model.sample(n, opts.seed)?;
            config.model = Some(model.to_string());
            config.n = Some(n);
            config.seed = Some(opts.seed);
            Ok((sample, Some(model)))
        }
    }
}

fn kernel_document(kernel: &SpectralKernel, config: &RunConfig, extra: Value) -> Result<Value> {
    let mut doc = serde_json::to_value(KernelFile::from(kernel))?;
    let map = doc.as_object_mut().expect("kernel file is an object");
    map.insert("config".into(), serde_json::to_value(config)?);
    if let Value::Object(extra) = extra {
        map.extend(extra);
    }
    Ok(doc)
}

fn read_kernel_file(path: &Path) -> Result<KernelFile> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn cmd_fit(opts: &Options) -> Result<Outcome> {
    let mut config = RunConfig::new("fit", opts, opts.format.unwrap_or(Format::Json));
    let (sample, _) = load_data(opts, &mut config)?;
    let options = match opts.t {
        Some(t) => RefineOptions {
            t_max: t,
            eps: 0.0,
            max_bins: usize::MAX,
        },
        None => {
            config.eps = Some(opts.eps);
            RefineOptions {
                eps: opts.eps,
                ..RefineOptions::default()
            }
        }
    };
    let (kernel, trace) = refine(&sample, opts.band, &options)?;
    let t = kernel.grid().resolution();
    if opts.t.is_some_and(|wanted| wanted != t) {
        return Err(Error::InvalidArgument(format!(
            "t = {} is below the coarsest resolution {t} of W = {}",
            opts.t.unwrap_or_default(),
            opts.band
        )));
    }
    config.t = Some(t);
    let cv = trace.steps.last().map(|s| s.cv);
    let doc = kernel_document(&kernel, &config, json!({ "cv": cv }))?;
    Ok(Outcome {
        outputs: vec![
            json_output("kernel.json", &doc)?,
            csv_output("trace.csv", &config, trace.to_csv()),
        ],
        exit: EXIT_OK,
    })
}

fn cmd_estimate(opts: &Options) -> Result<Outcome> {
    let mut config = RunConfig::new("estimate", opts, opts.format.unwrap_or(Format::Csv));
    let kernel_path = opts
        .kernel
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("estimate needs --kernel".into()))?;
    let points_path = opts
        .points
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("estimate needs --points".into()))?;
    let kernel = read_kernel_file(kernel_path)?.into_kernel()?;
    let (sample, _) = load_data(opts, &mut config)?;
    let points = parse_reals(
        &fs::read_to_string(points_path)?,
        &points_path.display().to_string(),
    )?;
    config.band = kernel.grid().band();
    config.t = Some(kernel.grid().resolution());
    config.kernel = Some(kernel_path.display().to_string());
    config.points = Some(points_path.display().to_string());
    let values = estimate_density(&kernel, &sample, &points);
    let mut table = String::from("x,fhat\n");
    for (x, y) in points.iter().zip(&values) {
        let _ = writeln!(table, "{x},{y}");
    }
    let doc = json!({ "config": config, "x": points, "fhat": values });
    Ok(Outcome {
        outputs: vec![
            csv_output("estimate.csv", &config, table),
            json_output("estimate.json", &doc)?,
        ],
        exit: EXIT_OK,
    })
}

fn fixed_grid(opts: &Options, config: &mut RunConfig) -> Result<FrequencyGrid> {
    let t = opts.t.unwrap_or(DEFAULT_RESOLUTION);
    config.t = Some(t);
    FrequencyGrid::new(opts.band, t)
}

fn cmd_oracle(opts: &Options) -> Result<Outcome> {
    let mut config = RunConfig::new("oracle", opts, opts.format.unwrap_or(Format::Json));
    let model = require_model(opts, "oracle")?;
    let n = opts.n.unwrap_or(DEFAULT_N);
    config.model = Some(model.to_string());
    config.n = Some(n);
    let grid = fixed_grid(opts, &mut config)?;
    let oracle = oracle_kernel(&model, n, grid)?;
    let mise = mise_value(&oracle, &model, n);
    let minimax = [1.0, 2.0, 3.0]
        .into_iter()
        .map(|beta| -> Result<Value> {
            let k = minimax_kernel(beta, grid)?;
            Ok(json!({ "beta": beta, "mise": mise_value(&k, &model, n) }))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = json!({
        "config": config,
        "n": n,
        "mise": mise,
        "l2_norm_sq": model.l2_norm_sq(),
        "tail_correction": model.tail_energy(grid.band()),
        "kernel": oracle,
        "minimax": minimax,
    });
    let mut table = String::from("k,lo,hi,v\n");
    for (k, v) in oracle.values().iter().enumerate() {
        let _ = writeln!(table, "{k},{},{},{v}", grid.edge(k), grid.edge(k + 1));
    }
    Ok(Outcome {
        outputs: vec![
            json_output("oracle.json", &report)?,
            csv_output("oracle.csv", &config, table),
            json_output(
                "kernel.json",
                &kernel_document(&oracle, &config, json!({ "mise": mise }))?,
            )?,
        ],
        exit: EXIT_OK,
    })
}

fn cmd_bench(opts: &Options) -> Result<Outcome> {
    let mut config = RunConfig::new("bench", opts, opts.format.unwrap_or(Format::Json));
    let model = require_model(opts, "bench")?;
    let n = opts.n.unwrap_or(DEFAULT_N);
    config.model = Some(model.to_string());
    config.n = Some(n);
    config.seed = Some(opts.seed);
    config.replications = Some(opts.reps);
    let grid = fixed_grid(opts, &mut config)?;
    let outcome = run_bench(&BenchConfig {
        model,
        n,
        replications: opts.reps,
        seed: opts.seed,
        grid,
        timing: opts.timing,
    })?;
    let mut summary = serde_json::to_value(&outcome.summary)?;
    summary
        .as_object_mut()
        .expect("summary is an object")
        .insert("config".into(), serde_json::to_value(&config)?);
    Ok(Outcome {
        outputs: vec![
            json_output("summary.json", &summary)?,
            csv_output("bench.csv", &config, outcome.rows_csv()),
        ],
        exit: EXIT_OK,
    })
}

#[derive(Serialize)]
struct KernelDiagnostics {
    name: String,
    haar: BoundReport,
    adapted: BoundReport,
    violations: usize,
}

fn diagnose(
    name: &str,
    kernel: &SpectralKernel,
    haar: &SpectralHaarBasis,
    adapted: &FAdaptedBasis,
) -> Result<KernelDiagnostics> {
    let haar_report = haar.check_kernel_bounds(kernel)?;
    let adapted_report = adapted.check_bias_bounds(kernel)?;
    Ok(KernelDiagnostics {
        name: name.to_string(),
        violations: haar_report.violations() + adapted_report.violations(),
        haar: haar_report,
        adapted: adapted_report,
    })
}

fn cmd_diag(opts: &Options) -> Result<Outcome> {
    let mut config = RunConfig::new("diag", opts, opts.format.unwrap_or(Format::Json));
    let model = require_model(opts, "diag")?;
    let n = opts.n.unwrap_or(DEFAULT_N);
    config.model = Some(model.to_string());
    config.n = Some(n);
    config.seed = Some(opts.seed);
    config.replications = Some(opts.reps);
    config.lambda = Some(opts.lambda);
    let grid = fixed_grid(opts, &mut config)?;
    let haar = SpectralHaarBasis::for_sample_size(n);
    let adapted = FAdaptedBasis::for_sample_size(&model, haar.band(), n)?;

    let mut kernels: Vec<(String, SpectralKernel)> = Vec::new();
    let sample = model.sample(n, opts.seed)?;
    kernels.push((
        "fitted".into(),
        cv_optimal_kernel(&EmpiricalSpectrum::new(&sample, grid)?)?,
    ));
    kernels.push(("oracle".into(), oracle_kernel(&model, n, grid)?));
    for beta in [1u32, 2, 3] {
        kernels.push((
            format!("minimax_beta{beta}"),
            minimax_kernel(beta as f64, grid)?,
        ));
    }
    if let Some(path) = &opts.kernel {
        config.kernel = Some(path.display().to_string());
        kernels.push(("file".into(), read_kernel_file(path)?.into_raw_kernel()?));
    }
    let diagnostics = kernels
        .iter()
        .map(|(name, k)| diagnose(name, k, &haar, &adapted))
        .collect::<Result<Vec<_>>>()?;
    let violations: usize = diagnostics.iter().map(|d| d.violations).sum();
    let favorable =
        FavorableStatistics::simulate(&model, n, opts.reps, opts.seed)?.report(opts.lambda);
    let fitted_cv = cv_value(&kernels[0].1, &EmpiricalSpectrum::new(&sample, grid)?)?;
    let report = json!({
        "config": config,
        "d_n": log_depth(n),
        "s_n": adapted.depth(),
        "haar_band": haar.band(),
        "fitted_cv": fitted_cv,
        "kernels": diagnostics,
        "violations": violations,
        "favorable": favorable,
    });
    Ok(Outcome {
        outputs: vec![
            json_output("diag.json", &report)?,
            csv_output("exceedances.csv", &config, favorable.to_csv()),
        ],
        exit: if violations > 0 {
            EXIT_VIOLATION
        } else {
            EXIT_OK
        },
    })
}
