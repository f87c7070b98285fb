//! Batch front-end: build and analyze fault complexes, run Monte Carlo
//! experiments from JSON configs, and fit thresholds from result CSVs.
//!
//! Exit codes: 0 ok, 2 spec/config error, 3 invalid complex, 4 decoder
//! inconsistency, 5 fit-data error.

use clap::{Args, Parser, Subcommand};
use fxc::chain::{ChainComplex, EXACT_CUTOFF};
use fxc::codes::{CodeSpec, RepetitionSpec};
use fxc::decoder::{DecodeConfig, WindowConfig};
use fxc::experiment::{
    run_memory, run_stability, run_sustainable, ExperimentError, ExperimentKind, ExperimentSpec,
    NoiseSpec, SideSelection, TrialBatch,
};
use fxc::fit::{collapse, fit_threshold, FitInput, FitModel, FitPoint};
use fxc::foliation::{product, FaultComplex};
use fxc::noise::{GkpSpec, PhenomenologicalSpec};
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_SPEC: u8 = 2;
const EXIT_COMPLEX: u8 = 3;
const EXIT_DECODER: u8 = 4;
const EXIT_FIT: u8 = 5;

#[derive(Parser)]
#[command(name = "fxc", about = "Fault complexes of foliated CSS codes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a fault complex from a code spec and a repetition spec.
    Build(BuildArgs),
    /// Analyze a serialized fault complex.
    Analyze(AnalyzeArgs),
    /// Run a Monte Carlo batch from a JSON config, appending CSV rows.
    Simulate(SimulateArgs),
    /// Fit a threshold from an experiment CSV.
    Fit(FitArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// Base code spec, e.g. "toric:3:2" or "surface:oo:3".
    #[arg(long)]
    code: String,
    /// Repetition (time) factor spec, e.g. "rep:full:2" or "rep:cyclic:3".
    #[arg(long)]
    rep: String,
    /// Output path for the fault-complex JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized distance estimation on large kernels.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Path to a fault-complex JSON produced by `build`.
    complex: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV output path (overrides the config's `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trial-count override.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    /// Experiment CSV path.
    csv: PathBuf,
    #[arg(long, value_enum, default_value = "tanh")]
    model: ModelArg,
    /// FitResult JSON output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Collapse-plot CSV output path.
    #[arg(long)]
    collapse_out: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    resamples: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Logical-qubit count for the saturation level.
    #[arg(long, default_value_t = 1)]
    k: usize,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModelArg {
    Quadratic,
    Tanh,
}

impl From<ModelArg> for FitModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Quadratic => FitModel::Quadratic,
            ModelArg::Tanh => FitModel::Tanh,
        }
    }
}

/// Simulation run config. Unknown keys are rejected.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    experiment: ExperimentSection,
    code: String,
    noise: NoiseSection,
    #[serde(default)]
    decode: Option<DecodeConfig>,
    window: WindowConfig,
    #[serde(default)]
    output: Option<PathBuf>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    #[serde(default = "default_name")]
    name: String,
    kind: ExperimentKind,
    side: SideSelection,
    rounds: usize,
    /// For `sustainable`: one batch per entry, overriding `rounds`.
    #[serde(default)]
    rounds_list: Option<Vec<usize>>,
    trials: usize,
}

fn default_name() -> String {
    "run".to_string()
}

/// Noise sweep: one batch per listed parameter value.
#[derive(Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum NoiseSection {
    Phenomenological {
        p: Vec<f64>,
    },
    Gkp {
        squeezing_db: Vec<f64>,
        #[serde(default = "default_true")]
        analog: bool,
    },
}

fn default_true() -> bool {
    true
}

fn seed_from(flag: Option<u64>, config: Option<u64>) -> u64 {
    flag.or(config)
        .or_else(|| {
            std::env::var("FXC_SEED")
                .ok()
                .and_then(|s| s.parse().ok())
        })
        .unwrap_or(0)
}

/// Writes through a temp file in the target directory, then renames, so a
/// failure never leaves a partial file behind.
fn atomic_write(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Build(args) => cmd_build(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
    }
}

#[derive(Serialize)]
struct BuildSummary {
    code: String,
    rep: String,
    n_primal: usize,
    n_dual: usize,
    k_primal: usize,
    k_dual: usize,
    d_primal: Option<usize>,
    d_dual: Option<usize>,
    distances_exact: bool,
}

fn build_fault(code: &str, rep: &str) -> Result<(FaultComplex, CodeSpec, RepetitionSpec), String> {
    let code_spec = CodeSpec::parse(code).map_err(|e| e.to_string())?;
    let rep_spec = match CodeSpec::parse(rep) {
        Ok(CodeSpec::Repetition(r)) => r,
        Ok(_) => return Err(format!("'{rep}' is not a repetition spec")),
        Err(e) => return Err(e.to_string()),
    };
    if matches!(code_spec, CodeSpec::Repetition(_)) {
        return Err("base code must be a toric or surface spec".to_string());
    }
    let base = code_spec.build().map_err(|e| e.to_string())?;
    let rep_complex = fxc::codes::repetition(rep_spec).map_err(|e| e.to_string())?;
    let fault = product(&rep_complex, &base, code_spec.qubit_grade()).map_err(|e| e.to_string())?;
    Ok((fault, code_spec, rep_spec))
}

fn cmd_build(args: BuildArgs) -> ExitCode {
    let (fault, code_spec, _) = match build_fault(&args.code, &args.rep) {
        Ok(x) => x,
        Err(e) => return fail(EXIT_SPEC, e),
    };
    let seed = seed_from(args.seed, None);
    let kunneth = match fault.kunneth() {
        Ok(k) => k,
        Err(e) => return fail(EXIT_COMPLEX, e),
    };
    let distances = match fault.fault_distances(EXACT_CUTOFF, seed) {
        Ok(d) => d,
        Err(e) => return fail(EXIT_COMPLEX, e),
    };
    let summary = BuildSummary {
        code: code_spec.to_string(),
        rep: args.rep.clone(),
        n_primal: fault.n_primal(),
        n_dual: fault.n_dual(),
        k_primal: kunneth.k_primal,
        k_dual: kunneth.k_dual,
        d_primal: distances.primal.finite(),
        d_dual: distances.dual.finite(),
        distances_exact: distances.exact,
    };
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    if let Some(out) = args.out {
        let json = serde_json::to_string(&fault).unwrap();
        if let Err(e) = atomic_write(&out, &json) {
            return fail(EXIT_SPEC, format!("writing {}: {e}", out.display()));
        }
    }
    ExitCode::SUCCESS
}

#[derive(Serialize)]
struct LogicalSummary {
    family: String,
    weight: usize,
}

fn cmd_analyze(args: AnalyzeArgs) -> ExitCode {
    let raw = match std::fs::read_to_string(&args.complex) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_SPEC, format!("reading {}: {e}", args.complex.display())),
    };
    // validate the stored chain complex first so a corrupted file reports
    // the first chain-condition violation
    let value: serde_json::Value = match serde_json::from_str(&raw) {
        Ok(v) => v,
        Err(e) => return fail(EXIT_SPEC, format!("parsing JSON: {e}")),
    };
    if let Some(stored) = value.get("complex") {
        match serde_json::from_value::<ChainComplex>(stored.clone()) {
            Ok(complex) => {
                if let Err(e) = complex.validate() {
                    return fail(EXIT_COMPLEX, e);
                }
            }
            Err(e) => return fail(EXIT_COMPLEX, format!("stored complex: {e}")),
        }
    }
    let fault: FaultComplex = match serde_json::from_str(&raw) {
        Ok(f) => f,
        Err(e) => return fail(EXIT_COMPLEX, format!("fault complex: {e}")),
    };
    let seed = seed_from(args.seed, None);
    let report = (|| -> Result<serde_json::Value, fxc::foliation::FoliationError> {
        let kunneth = fault.kunneth()?;
        let distances = fault.fault_distances(EXACT_CUTOFF, seed)?;
        let logicals = fault.logical_representatives()?;
        let summarize = |reps: &[fxc::foliation::TaggedRep]| -> Vec<LogicalSummary> {
            reps.iter()
                .map(|t| LogicalSummary {
                    family: format!("{:?}", t.family).to_lowercase(),
                    weight: t.vector.weight(),
                })
                .collect()
        };
        Ok(serde_json::json!({
            "kunneth": kunneth,
            "distances": distances,
            "logicals": {
                "primal_corr": summarize(&logicals.primal_corr),
                "primal_err": summarize(&logicals.primal_err),
                "dual_corr": summarize(&logicals.dual_corr),
                "dual_err": summarize(&logicals.dual_err),
            },
            "single_shot_blocks": fault.has_single_shot_blocks(),
        }))
    })();
    let report = match report {
        Ok(r) => r,
        Err(e) => return fail(EXIT_COMPLEX, e),
    };
    let text = serde_json::to_string_pretty(&report).unwrap();
    match args.out {
        Some(out) => {
            if let Err(e) = atomic_write(&out, &text) {
                return fail(EXIT_SPEC, format!("writing {}: {e}", out.display()));
            }
        }
        None => println!("{text}"),
    }
    ExitCode::SUCCESS
}

fn cmd_simulate(args: SimulateArgs) -> ExitCode {
    let raw = match std::fs::read_to_string(&args.config) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_SPEC, format!("reading {}: {e}", args.config.display())),
    };
    let config: RunConfig = match serde_json::from_str(&raw) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_SPEC, format!("config: {e}")),
    };
    if config.window.c == 0 || config.window.c > config.window.w {
        return fail(
            EXIT_SPEC,
            format!(
                "window: commit size {} must be in 1..={}",
                config.window.c, config.window.w
            ),
        );
    }
    if let Some(workers) = args.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            return fail(EXIT_SPEC, format!("worker pool: {e}"));
        }
    }
    let code = match CodeSpec::parse(&config.code) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_SPEC, e),
    };
    let seed = seed_from(args.seed, config.seed);
    let noise_points: Vec<NoiseSpec> = match &config.noise {
        NoiseSection::Phenomenological { p } => p
            .iter()
            .map(|&p| NoiseSpec::Phenomenological(PhenomenologicalSpec { p }))
            .collect(),
        NoiseSection::Gkp {
            squeezing_db,
            analog,
        } => squeezing_db
            .iter()
            .map(|&squeezing_db| {
                NoiseSpec::Gkp(GkpSpec {
                    squeezing_db,
                    analog: *analog,
                })
            })
            .collect(),
    };
    if noise_points.is_empty() {
        return fail(EXIT_SPEC, "noise sweep is empty");
    }
    let mut batches: Vec<TrialBatch> = Vec::new();
    for noise in noise_points {
        if let Err(e) = noise.validate() {
            return fail(EXIT_SPEC, e);
        }
        let spec = ExperimentSpec {
            kind: config.experiment.kind,
            code: code.clone(),
            rounds: config.experiment.rounds,
            side: config.experiment.side,
            noise,
            decode: config.decode.clone().unwrap_or_default(),
            window: config.window,
            trials: args.trials.unwrap_or(config.experiment.trials),
            master_seed: seed,
        };
        let result = match (config.experiment.kind, &config.experiment.rounds_list) {
            (ExperimentKind::Sustainable, Some(list)) => run_sustainable(&spec, list),
            (ExperimentKind::Sustainable, None) => {
                run_sustainable(&spec, &[spec.rounds])
            }
            (ExperimentKind::Stability, _) => run_stability(&spec).map(|b| vec![b]),
            (ExperimentKind::Memory, _) => run_memory(&spec).map(|b| vec![b]),
        };
        match result {
            Ok(mut b) => batches.append(&mut b),
            Err(e @ ExperimentError::Decoder { .. }) => return fail(EXIT_DECODER, e),
            Err(e) => return fail(EXIT_SPEC, e),
        }
    }
    let out = args
        .out
        .or(config.output)
        .unwrap_or_else(|| PathBuf::from("results.csv"));
    let need_header = !out.exists()
        || std::fs::metadata(&out).map(|m| m.len() == 0).unwrap_or(true);
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&out);
    let mut file = match file {
        Ok(f) => f,
        Err(e) => return fail(EXIT_SPEC, format!("opening {}: {e}", out.display())),
    };
    let mut text = String::new();
    if need_header {
        text.push_str(TrialBatch::CSV_HEADER);
        text.push('\n');
    }
    for batch in &batches {
        text.push_str(&batch.csv_row(&config.experiment.name));
        text.push('\n');
    }
    if let Err(e) = file.write_all(text.as_bytes()) {
        return fail(EXIT_SPEC, format!("writing {}: {e}", out.display()));
    }
    for batch in &batches {
        println!("{}", batch.csv_row(&config.experiment.name));
    }
    ExitCode::SUCCESS
}

fn parse_csv(raw: &str) -> Result<Vec<FitPoint>, String> {
    let mut lines = raw.lines();
    let header = lines.next().ok_or("empty CSV")?;
    let cols: Vec<&str> = header.split(',').collect();
    let find = |name: &str| {
        cols.iter()
            .position(|&c| c == name)
            .ok_or_else(|| format!("missing column '{name}'"))
    };
    let (c_l, c_p, c_trials, c_failures) = (
        find("L")?,
        find("noise_param")?,
        find("trials")?,
        find("failures")?,
    );
    let mut points = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let get = |i: usize| -> Result<&str, String> {
            fields
                .get(i)
                .copied()
                .ok_or_else(|| format!("line {}: too few fields", lineno + 2))
        };
        let l: f64 = get(c_l)?.parse().map_err(|e| format!("line {}: L: {e}", lineno + 2))?;
        let p: f64 = get(c_p)?
            .parse()
            .map_err(|e| format!("line {}: noise_param: {e}", lineno + 2))?;
        let trials: usize = get(c_trials)?
            .parse()
            .map_err(|e| format!("line {}: trials: {e}", lineno + 2))?;
        let failures: usize = get(c_failures)?
            .parse()
            .map_err(|e| format!("line {}: failures: {e}", lineno + 2))?;
        let rate = failures as f64 / trials as f64;
        let stderr = (rate * (1.0 - rate) / trials as f64).sqrt();
        points.push(FitPoint {
            p,
            d: l,
            rate,
            stderr,
            trials,
        });
    }
    Ok(points)
}

fn cmd_fit(args: FitArgs) -> ExitCode {
    let raw = match std::fs::read_to_string(&args.csv) {
        Ok(s) => s,
        Err(e) => return fail(EXIT_FIT, format!("reading {}: {e}", args.csv.display())),
    };
    let points = match parse_csv(&raw) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_FIT, e),
    };
    let input = FitInput { points, k: args.k };
    let seed = seed_from(args.seed, None);
    let result = match fit_threshold(&input, args.model.into(), args.resamples, seed) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_FIT, e),
    };
    let json = serde_json::to_string_pretty(&result).unwrap();
    match &args.out {
        Some(out) => {
            if let Err(e) = atomic_write(out, &json) {
                return fail(EXIT_FIT, format!("writing {}: {e}", out.display()));
            }
        }
        None => println!("{json}"),
    }
    if let Some(out) = &args.collapse_out {
        let mut text = String::from("x,rate,model_value\n");
        for (x, rate, value) in collapse(&input, &result) {
            text.push_str(&format!("{x},{rate},{value}\n"));
        }
        if let Err(e) = atomic_write(out, &text) {
            return fail(EXIT_FIT, format!("writing {}: {e}", out.display()));
        }
    }
    ExitCode::SUCCESS
}
