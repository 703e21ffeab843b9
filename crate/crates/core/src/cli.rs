//! Command-line front end. The `lagspec` binary is a thin wrapper around
//! [`run`].
//!
//! Exit status: 0 on success, 1 on domain errors, 2 on usage errors. Every
//! JSON document carries `schema_version` and a `config` echo of the resolved
//! flags. The worker count is logged but never echoed, so outputs do not
//! depend on it.

use std::ffi::OsString;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde_json::{json, Value};

use crate::acov::sample_autocov;
use crate::dependence::{check_conditions, profile, simulate};
use crate::error::{Error, Result};
use crate::harness::{run as run_experiment, Experiment, ExperimentPlan};
use crate::inference::{
    min_plugin_eigenvalue, parse_entries, pointwise_band, smoothness_check, uniform_band,
};
use crate::kernels::Kernel;
use crate::model::ProcessModel;
use crate::series::MultivariateSeries;
use crate::spectral::{
    estimate_metadata, estimate_spectrum, theorem_grid, uniform_grid, Bandwidth, SpectralGrid,
};
use crate::SCHEMA_VERSION;

#[derive(Debug, Parser)]
#[command(
    name = "lagspec",
    version,
    about = "Lag-window spectral density estimation and inference"
)]
pub struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output path; stdout when absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, default_value = "warn")]
    pub log_level: log::LevelFilter,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the spectral density matrix of a CSV series.
    Estimate(EstimateArgs),
    /// Uniform or pointwise confidence bands.
    Bands(BandsArgs),
    /// Functional dependence measures of a model by coupling.
    Depmeasure(DepArgs),
    /// Simulate a model to CSV.
    Simulate(SimulateArgs),
    /// Monte Carlo verification experiment.
    Verify(VerifyArgs),
    /// Kernel constants.
    KernelInfo(KernelInfoArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// bartlett, parzen, tukey, truncated or file:<path>.
    #[arg(long, default_value = "bartlett")]
    pub kernel: String,
    #[arg(long, default_value_t = 0.4)]
    pub b_exponent: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_const: f64,
    /// theorem or uniform:<count>.
    #[arg(long, default_value = "theorem")]
    pub grid: String,
    /// Largest autocovariance lag (default B_T).
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Treat the series as already mean-zero.
    #[arg(long)]
    pub no_center: bool,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub est: EstimatorArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Uniform,
    Pointwise,
}

#[derive(Debug, Args)]
pub struct BandsArgs {
    #[command(flatten)]
    pub est: EstimatorArgs,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// all, diag or i,j;k,l (one-based).
    #[arg(long, default_value = "all")]
    pub entries: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Uniform)]
    pub method: MethodArg,
    #[arg(long)]
    pub bonferroni: bool,
    /// Report the bands as covering f rather than E f̂.
    #[arg(long)]
    pub assume_smooth: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
}

#[derive(Debug, Args)]
pub struct DepArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 30)]
    pub horizon: usize,
    #[arg(long, default_value_t = 5000)]
    pub reps: usize,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    pub report: ReportFormat,
    /// Bandwidth exponent checked against the admissible window.
    #[arg(long, default_value_t = 0.4)]
    pub b: f64,
    #[arg(long, default_value_t = 0.2)]
    pub b_lower: f64,
    /// The δ in the power-law thresholds.
    #[arg(long, default_value_t = 1.0)]
    pub delta_param: f64,
    #[arg(long)]
    pub independent_components: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub t_len: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub experiment: String,
    #[arg(long, default_value = "white")]
    pub model: String,
    #[arg(long, default_value = "bartlett")]
    pub kernel: String,
    #[arg(long, value_delimiter = ',', default_value = "4096,16384,65536")]
    pub t_grid: Vec<usize>,
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.4)]
    pub b_exponent: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c_const: f64,
    /// ν* for moments, ν for uniform-rate.
    #[arg(long, default_value_t = 2.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value = "all")]
    pub entries: String,
    #[arg(long)]
    pub no_bonferroni: bool,
    #[arg(long)]
    pub assume_smooth: bool,
    #[arg(long, value_delimiter = ',')]
    pub clt_freqs: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub bias_bandwidths: Option<Vec<usize>>,
    #[arg(long)]
    pub bias_t_len: Option<usize>,
    /// Keep per-replication statistics in the report.
    #[arg(long)]
    pub retain_raw: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
    /// Exit with status 1 when any check fails.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct KernelInfoArgs {
    #[arg(long, default_value = "bartlett")]
    pub kernel: String,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.log_level)
        .target(env_logger::Target::Stderr)
        .try_init();
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => {
                info!("using {n} worker threads");
                pool.install(|| dispatch(&cli))
            }
            Err(e) => Err(Error::InvalidInput(format!(
                "cannot build a pool of {n} threads: {e}"
            ))),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

pub fn dispatch(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Estimate(a) => estimate(cli, a),
        Command::Bands(a) => bands(cli, a),
        Command::Depmeasure(a) => depmeasure(cli, a),
        Command::Simulate(a) => simulate_cmd(cli, a),
        Command::Verify(a) => verify(cli, a),
        Command::KernelInfo(a) => kernel_info(cli, a),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn pretty(v: &Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn global_echo(cli: &Cli, command: &str) -> Value {
    json!({
        "command": command,
        "seed": cli.seed,
        "log_level": cli.log_level.to_string(),
        "output": cli.output.as_ref().map(|p| p.display().to_string()),
    })
}

/// True when the first non-blank line has a field that is not a number.
fn has_header(path: &Path) -> Result<bool> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        return Ok(line.split(',').any(|f| f.trim().parse::<f64>().is_err()));
    }
    Ok(false)
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

struct Estimated {
    series: MultivariateSeries,
    kernel: Kernel,
    bandwidth: Bandwidth,
    estimate: SpectralGrid,
    metadata: Value,
}

fn run_estimator(cli: &Cli, a: &EstimatorArgs, command: &str) -> Result<Estimated> {
    let kernel = Kernel::from_spec(&a.kernel)?;
    if let Some(w) = kernel.kappa_warning() {
        warn!("{w}");
    }
    let header = has_header(&a.input)?;
    let raw = MultivariateSeries::load_csv(&a.input, header)?;
    let series = if a.no_center {
        raw.assume_centered()
    } else {
        raw.center()
    };
    let t_len = series.t_len();
    let bandwidth = Bandwidth::new(t_len, a.b_exponent, a.c_const)?;
    let max_lag = a.max_lag.unwrap_or(bandwidth.value());
    let acov = sample_autocov(&series, max_lag)?;
    let freqs = match a.grid.trim() {
        "theorem" => theorem_grid(&bandwidth),
        g => match g.strip_prefix("uniform:").map(str::parse::<usize>) {
            Some(Ok(n)) => uniform_grid(n)?,
            _ => {
                return Err(Error::InvalidInput(format!(
                    "grid {g:?}; expected theorem or uniform:<count>"
                )))
            }
        },
    };
    let estimate = estimate_spectrum(&acov, &kernel, &bandwidth, &freqs)?;
    let provenance = match std::fs::read_to_string(sidecar(&a.input)) {
        Ok(text) => serde_json::from_str::<Value>(&text).unwrap_or(Value::Null),
        Err(_) => Value::Null,
    };
    let mut config = global_echo(cli, command);
    config["input"] = json!(a.input.display().to_string());
    config["input_has_header"] = json!(header);
    config["kernel_spec"] = json!(a.kernel);
    config["grid"] = json!(a.grid);
    config["max_lag"] = json!(max_lag);
    config["centered_by"] = json!(if a.no_center {
        "assumed"
    } else {
        "sample_mean"
    });
    let metadata = estimate_metadata(
        &kernel,
        &bandwidth,
        series.is_centered(),
        json!({
            "t_len": t_len,
            "n_dim": series.n_dim(),
            "config": config,
            "input_provenance": provenance,
        }),
    );
    Ok(Estimated {
        series,
        kernel,
        bandwidth,
        estimate,
        metadata,
    })
}

fn estimate(cli: &Cli, a: &EstimateArgs) -> Result<i32> {
    let e = run_estimator(cli, &a.est, "estimate")?;
    info!(
        "estimated {} frequencies, T = {}, B_T = {}",
        e.estimate.len(),
        e.series.t_len(),
        e.bandwidth.value()
    );
    let mut doc = e.estimate.to_json(e.metadata);
    doc["hermitian_defect"] = json!(e.estimate.hermitian_defect());
    write_output(cli.output.as_deref(), &pretty(&doc)?)?;
    Ok(0)
}

fn bands(cli: &Cli, a: &BandsArgs) -> Result<i32> {
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(Error::InvalidLevel(a.level));
    }
    let e = run_estimator(cli, &a.est, "bands")?;
    let entries = parse_entries(&a.entries, e.series.n_dim())?;
    let band = match a.method {
        MethodArg::Uniform => {
            uniform_band(&e.estimate, &e.kernel, a.level, &entries, a.bonferroni)?
        }
        MethodArg::Pointwise => pointwise_band(&e.estimate, &e.kernel, a.level, &entries)?,
    };
    let mut meta = e.metadata;
    meta["config"]["level"] = json!(a.level);
    meta["config"]["entries"] = json!(a.entries);
    meta["config"]["method"] = json!(format!("{:?}", a.method).to_lowercase());
    meta["config"]["bonferroni"] = json!(a.bonferroni);
    meta["config"]["assume_smooth"] = json!(a.assume_smooth);
    meta["target"] = json!(if a.assume_smooth { "f" } else { "E_f_hat" });
    meta["min_plugin_eigenvalue"] = json!(min_plugin_eigenvalue(&e.estimate));
    if a.assume_smooth {
        let check = smoothness_check(&e.kernel, a.est.b_exponent);
        if !check.satisfied {
            warn!(
                "b(q+1) = {:.3} does not exceed 1; the band targets E f̂ rather than f",
                check.product
            );
        }
        meta["smoothness_check"] = serde_json::to_value(check)?;
    }
    write_output(cli.output.as_deref(), &pretty(&band.to_json(meta))?)?;
    Ok(0)
}

fn depmeasure(cli: &Cli, a: &DepArgs) -> Result<i32> {
    let model = ProcessModel::parse(&a.model)?;
    let prof = profile(&model, a.p, a.horizon, a.reps, cli.seed)?;
    for w in &prof.warnings {
        warn!("{w}");
    }
    let cond = check_conditions(
        &prof,
        a.p,
        a.b,
        a.b_lower,
        a.delta_param,
        a.independent_components,
    )?;
    let mut config = global_echo(cli, "depmeasure");
    config["model"] = json!(a.model);
    config["p"] = json!(a.p);
    config["horizon"] = json!(a.horizon);
    config["reps"] = json!(a.reps);
    config["b"] = json!(a.b);
    config["b_lower"] = json!(a.b_lower);
    config["delta_param"] = json!(a.delta_param);
    config["independent_components"] = json!(a.independent_components);
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "model": model.to_json(),
        "profile": prof,
        "conditions": cond,
        "config": config,
    });
    write_output(cli.output.as_deref(), &pretty(&doc)?)?;
    Ok(0)
}

fn simulate_cmd(cli: &Cli, a: &SimulateArgs) -> Result<i32> {
    let model = ProcessModel::parse(&a.model)?;
    let series = simulate(&model, a.t_len, cli.seed)?;
    let header: Vec<String> = (1..=series.n_dim()).map(|i| format!("z{i}")).collect();
    let target = a.out.as_deref().or(cli.output.as_deref());
    let mut buf = Vec::new();
    series.write_csv(&mut buf, Some(&header))?;
    match target {
        Some(path) => {
            std::fs::write(path, &buf).map_err(|e| Error::io(path, e))?;
            let mut config = global_echo(cli, "simulate");
            config["model"] = json!(a.model);
            config["t_len"] = json!(a.t_len);
            config["out"] = json!(path.display().to_string());
            let meta = json!({
                "schema_version": SCHEMA_VERSION,
                "model": model.to_json(),
                "config": config,
            });
            let side = sidecar(path);
            std::fs::write(&side, pretty(&meta)?).map_err(|e| Error::io(&side, e))?;
        }
        None => write_output(None, &String::from_utf8_lossy(&buf))?,
    }
    Ok(0)
}

fn verify(cli: &Cli, a: &VerifyArgs) -> Result<i32> {
    let experiment: Experiment = a.experiment.parse()?;
    let model = ProcessModel::parse(&a.model)?;
    let kernel = Kernel::from_spec(&a.kernel)?;
    let n = model.n_dim();
    let mut plan = ExperimentPlan::new(experiment, model, kernel, a.t_grid.clone());
    plan.reps = a.reps;
    plan.seed = cli.seed;
    plan.b_exponent = a.b_exponent;
    plan.c_const = a.c_const;
    plan.nu = a.nu;
    plan.level = a.level;
    plan.entries = Some(parse_entries(&a.entries, n)?);
    plan.bonferroni = !a.no_bonferroni;
    plan.assume_smooth = a.assume_smooth;
    plan.retain_raw = a.retain_raw;
    if let Some(f) = &a.clt_freqs {
        plan.clt_freqs = f.clone();
    }
    if let Some(b) = &a.bias_bandwidths {
        plan.bias_bandwidths = b.clone();
    }
    if let Some(t) = a.bias_t_len {
        plan.bias_t_len = t;
    }
    plan.validate()?;
    let report = run_experiment(&plan)?;
    for c in report.checks.iter().filter(|c| !c.passed) {
        warn!("check {} failed: {}", c.name, c.detail);
    }
    let mut doc = report.to_json();
    let mut config = global_echo(cli, "verify");
    config["model_spec"] = json!(a.model);
    config["kernel_spec"] = json!(a.kernel);
    config["out"] = json!(a.out.as_ref().map(|p| p.display().to_string()));
    config["plot_data"] = json!(a.plot_data.as_ref().map(|p| p.display().to_string()));
    doc["config"] = config;
    doc["passed"] = json!(report.passed());
    let target = a.out.as_deref().or(cli.output.as_deref());
    write_output(target, &pretty(&doc)?)?;
    if let Some(path) = &a.plot_data {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        report.write_plot_data(file)?;
    }
    Ok(if a.strict && !report.passed() { 1 } else { 0 })
}

fn kernel_info(cli: &Cli, a: &KernelInfoArgs) -> Result<i32> {
    let kernel = Kernel::from_spec(&a.kernel)?;
    let bo = kernel.bias_order();
    let q = if bo.q.is_finite() {
        json!(bo.q)
    } else {
        json!("inf")
    };
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "name": kernel.name(),
        "kappa": kernel.kappa(),
        "q": q,
        "k_q": bo.k_q,
        "expansion": bo.expansion_q.map(|(q, k)| json!({"q": q, "k_q": k})),
        "note": bo.note,
        "psd_guarantee": kernel.psd_guarantee(),
        "kappa_warning": kernel.kappa_warning(),
        "config": {
            "command": "kernel-info",
            "kernel_spec": a.kernel,
            "seed": cli.seed,
        },
    });
    write_output(cli.output.as_deref(), &pretty(&doc)?)?;
    Ok(0)
}
