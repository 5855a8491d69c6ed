//! Command-line orchestration.
//!
//! Four subcommands cover the full workflow:
//!
//! - `state`: emit an ideal cat / p-SC / x-SC state (density JSON,
//!   Wigner CSV, photon distribution CSV) straight from the closed forms.
//! - `simulate`: run the preparation pipeline and synthesize a binary
//!   homodyne trace file.
//! - `tomo`: reconstruct a density matrix from traces (variance-curve
//!   mode fitting, extraction) or from a record CSV, then fit (α, r).
//! - `table1`: run the six squeezer presets plus the cat baseline and
//!   emit the merged results table with deltas against reference values.
//!
//! Every run writes into `<out>/<command>-<run id>/`, where the run id
//! is a stable hash of the command, its resolved configuration, and the
//! seed; repeating a run reproduces every artifact byte for byte.
//! Nothing is overwritten unless `--force` is given. Each run directory
//! carries a manifest listing artifacts with checksums; JSON artifacts
//! also embed the run id. Exit codes: 0 success, 2 usage, 3 data,
//! 4 numerical.

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::f64::consts::PI;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::fock::{odd_cat, sc_state_closed_form, FockDensity, Parity, SCParams};
use crate::homodyne::{
    default_phase_schedule, double_exp_mode, extract_records_from_file, fit_temporal_mode,
    read_records_csv, synthesize_records, synthesize_to_file, variance_curve_streaming,
    write_records_csv, TraceFileReader, DEFAULT_MODE_GAMMA, DEFAULT_N_TRACES, DEFAULT_TRACE_LEN,
};
use crate::prep::{run_pipeline, ExperimentConfig};
use crate::tomo::{
    default_alpha_grid, default_r_grid, fit_sc, maxlik_reconstruct, write_fidelity_surface,
    FitResult, TomoConfig, DEFAULT_ETA_CORRECTION, DEFAULT_MAX_ITERS, DEFAULT_TOMO_DIM,
};
use crate::wigner::{
    wigner_cat, wigner_origin, wigner_psc, wigner_xsc, GridSpec, WignerGrid,
    DEFAULT_GRID_HALF_WIDTH, DEFAULT_GRID_POINTS,
};
use crate::{Error, Result};

/// Reference values being reproduced: per preset row, the squeezing
/// phase, preset r2, and the published (α, F, W(0,0)) to diff against.
const TABLE1_REFERENCE: [(&str, f64, f64, f64, f64, f64); 7] = [
    ("cat", 0.0, 0.00, 1.06, 0.68, -0.16),
    ("p-sc-0.27", 0.0, 0.27, 1.21, 0.62, -0.14),
    ("p-sc-0.29", 0.0, 0.29, 1.31, 0.62, -0.13),
    ("p-sc-0.30", 0.0, 0.30, 1.40, 0.61, -0.16),
    ("x-sc-0.24", PI, 0.24, 1.04, 0.62, -0.11),
    ("x-sc-0.27", PI, 0.27, 1.03, 0.65, -0.11),
    ("x-sc-0.29", PI, 0.29, 0.99, 0.65, -0.13),
];

// ---------------------------------------------------------------------------
// Argument surface

#[derive(Parser, Debug)]
#[command(
    name = "catforge",
    version,
    about = "Simulate, measure, and reconstruct optical squeezed cat states"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Emit an ideal state: density, Wigner grid, photon distribution.
    State(StateArgs),
    /// Run the preparation pipeline and synthesize homodyne traces.
    Simulate(SimulateArgs),
    /// Reconstruct a state from traces or records and fit (alpha, r).
    Tomo(TomoArgs),
    /// Reproduce the preset result table (cat baseline + six SC runs).
    Table1(Table1Args),
}

#[derive(Args, Debug, Clone)]
struct OutArgs {
    /// Parent directory for run outputs.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Overwrite an existing run directory.
    #[arg(long)]
    force: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum StateKind {
    /// Odd cat.
    Cat,
    /// p-squeezed cat (amplified x).
    Psc,
    /// x-squeezed cat (deamplified x).
    Xsc,
}

impl StateKind {
    fn label(self) -> &'static str {
        match self {
            StateKind::Cat => "cat",
            StateKind::Psc => "p-sc",
            StateKind::Xsc => "x-sc",
        }
    }
}

fn parse_theta2(s: &str) -> std::result::Result<f64, String> {
    match s {
        "0" => Ok(0.0),
        "pi" => Ok(PI),
        other => Err(format!("theta2 must be '0' or 'pi', got {other:?}")),
    }
}

#[derive(Args, Debug)]
struct StateArgs {
    /// Which ideal state to emit.
    #[arg(long, value_enum)]
    kind: StateKind,
    /// Cat amplitude.
    #[arg(long, default_value_t = 1.06)]
    alpha: f64,
    /// Squeezing parameter (ignored for --kind cat).
    #[arg(long, default_value_t = 0.0)]
    r: f64,
    /// Fock truncation.
    #[arg(long, default_value_t = crate::fock::DEFAULT_DIM)]
    dim: usize,
    /// Wigner grid points per axis.
    #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
    grid_points: usize,
    /// Wigner grid half width.
    #[arg(long, default_value_t = DEFAULT_GRID_HALF_WIDTH)]
    half_width: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Experiment configuration JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Source squeezing parameter.
    #[arg(long)]
    r1: Option<f64>,
    /// Herald tap reflectivity.
    #[arg(long)]
    tap: Option<f64>,
    /// In-line squeezer parameter (0 bypasses the stage).
    #[arg(long)]
    r2: Option<f64>,
    /// Squeezer phase: 0 (p-SC) or pi (x-SC).
    #[arg(long, value_parser = parse_theta2)]
    theta2: Option<f64>,
    /// Squeezer transmission.
    #[arg(long)]
    eta_opa2: Option<f64>,
    /// Detection efficiency.
    #[arg(long)]
    eta_det: Option<f64>,
    /// Phase jitter standard deviation (rad).
    #[arg(long)]
    jitter: Option<f64>,
    /// Fock truncation.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_N_TRACES)]
    n_traces: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct TomoArgs {
    /// Binary trace file (mode is fitted, then records extracted).
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Quadrature record CSV (skips the mode stage).
    #[arg(long)]
    records: Option<PathBuf>,
    /// Reconstruction truncation.
    #[arg(long, default_value_t = DEFAULT_TOMO_DIM)]
    dim: usize,
    /// Detection efficiency assumed by the corrected POVM.
    #[arg(long, default_value_t = DEFAULT_ETA_CORRECTION)]
    eta_det: f64,
    /// Restrict the (alpha, r) fit to one squeezing phase.
    #[arg(long, value_parser = parse_theta2)]
    theta2: Option<f64>,
    /// Optional quadrature bin width.
    #[arg(long)]
    binning: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct Table1Args {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Records per run.
    #[arg(long, default_value_t = DEFAULT_N_TRACES)]
    n_traces: usize,
    /// Reconstruction truncation.
    #[arg(long, default_value_t = DEFAULT_TOMO_DIM)]
    dim: usize,
    #[command(flatten)]
    out: OutArgs,
}

// ---------------------------------------------------------------------------
// Run plumbing

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// Path relative to the run directory.
    pub path: String,
    /// FNV-1a 64 checksum of the file bytes, hex.
    pub checksum: String,
    pub bytes: u64,
}

/// Written as manifest.json in every run directory: enough to re-derive
/// any artifact from the command line alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub config: Value,
    pub artifacts: Vec<ArtifactEntry>,
    pub versions: Value,
    pub timings_ms: Vec<(String, u128)>,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a64_bytes(state: u64, bytes: &[u8]) -> u64 {
    let mut h = state;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn fnv1a64_file(path: &Path) -> Result<u64> {
    let mut file = std::fs::File::open(path)?;
    let mut h = FNV_OFFSET;
    let mut buf = [0u8; 65536];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h = fnv1a64_bytes(h, &buf[..n]);
    }
    Ok(h)
}

/// Stable 12-hex-character id from the command, config, and seed.
fn run_id_for(command: &str, config_json: &str, seed: Option<u64>) -> String {
    let mut h = fnv1a64_bytes(FNV_OFFSET, command.as_bytes());
    h = fnv1a64_bytes(h, &[0x1f]);
    h = fnv1a64_bytes(h, config_json.as_bytes());
    if let Some(s) = seed {
        h = fnv1a64_bytes(h, &[0x1f]);
        h = fnv1a64_bytes(h, &s.to_le_bytes());
    }
    format!("{h:016x}")[..12].to_string()
}

/// One run directory in progress: artifact writes register themselves.
struct RunContext {
    dir: PathBuf,
    run_id: String,
    artifacts: Vec<ArtifactEntry>,
    timings: Vec<(String, u128)>,
}

impl RunContext {
    fn create(out: &OutArgs, command: &str, run_id: String) -> Result<Self> {
        let dir = out.out.join(format!("{command}-{run_id}"));
        if dir.exists() {
            if !out.force {
                return Err(Error::OutputExists(dir));
            }
        } else {
            std::fs::create_dir_all(&dir)?;
        }
        Ok(Self {
            dir,
            run_id,
            artifacts: Vec::new(),
            timings: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Registers a file already written into the run directory.
    fn register(&mut self, name: &str) -> Result<()> {
        let path = self.path(name);
        let bytes = std::fs::metadata(&path)?.len();
        let checksum = format!("{:016x}", fnv1a64_file(&path)?);
        self.artifacts.push(ArtifactEntry {
            path: name.to_string(),
            checksum,
            bytes,
        });
        Ok(())
    }

    /// Writes a JSON artifact with the run id stamped in.
    fn write_json(&mut self, name: &str, mut value: Value) -> Result<()> {
        if let Some(map) = value.as_object_mut() {
            map.insert("run_id".into(), Value::String(self.run_id.clone()));
        }
        std::fs::write(self.path(name), serde_json::to_string_pretty(&value)?)?;
        self.register(name)
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        std::fs::write(self.path(name), text)?;
        self.register(name)
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.timings.push((stage.to_string(), start.elapsed().as_millis()));
        Ok(out)
    }

    fn finish(self, command: &str, label: &str, seed: Option<u64>, config: Value) -> Result<PathBuf> {
        let manifest = RunManifest {
            run_id: self.run_id.clone(),
            command: command.to_string(),
            label: label.to_string(),
            seed,
            config,
            artifacts: self.artifacts,
            versions: json!({
                "crate": env!("CARGO_PKG_VERSION"),
                "trace_format": 1,
                "schema": 1,
            }),
            timings_ms: self.timings,
        };
        std::fs::write(
            self.dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(self.dir)
    }
}

/// Density JSON with the run id added; still parses as FockDensity.
fn density_value(rho: &FockDensity) -> Result<Value> {
    Ok(serde_json::from_str(&rho.to_json_string()?)?)
}

fn parity_name(p: Parity) -> &'static str {
    match p {
        Parity::Even => "even",
        Parity::Odd => "odd",
        Parity::Mixed => "mixed",
    }
}

// ---------------------------------------------------------------------------
// Entry points

/// Applies CATFORGE_THREADS to the global worker pool, then dispatches.
pub fn run() -> Result<()> {
    configure_threads_from_env()?;
    let cli = Cli::parse();
    dispatch(cli).map(|_| ())
}

/// Test-friendly entry: parses the given argv and returns the run dir.
pub fn run_from<I, S>(args: I) -> Result<PathBuf>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Parameter(e.to_string()))?;
    dispatch(cli)
}

pub fn configure_threads_from_env() -> Result<()> {
    if let Ok(raw) = std::env::var("CATFORGE_THREADS") {
        let n: usize = raw
            .trim()
            .parse()
            .map_err(|_| Error::Parameter(format!("CATFORGE_THREADS must be a positive integer, got {raw:?}")))?;
        if n == 0 {
            return Err(Error::Parameter("CATFORGE_THREADS must be positive".into()));
        }
        // A second initialization (e.g. in tests) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<PathBuf> {
    match cli.command {
        Command::State(args) => cmd_state(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Tomo(args) => cmd_tomo(args),
        Command::Table1(args) => cmd_table1(args),
    }
}

// ---------------------------------------------------------------------------
// state

fn cmd_state(args: StateArgs) -> Result<PathBuf> {
    let params = SCParams::new(args.alpha, args.r, if args.kind == StateKind::Xsc { PI } else { 0.0 })?;
    let config = json!({
        "kind": args.kind.label(),
        "alpha": args.alpha,
        "r": args.r,
        "theta": params.theta,
        "dim": args.dim,
        "grid_points": args.grid_points,
        "half_width": args.half_width,
    });
    let config_str = serde_json::to_string(&config)?;
    let mut ctx = RunContext::create(&args.out, "state", run_id_for("state", &config_str, None))?;

    // Closed-form Wigner grid; exact for all three kinds.
    let spec = GridSpec::square(args.half_width, args.grid_points)?;
    let cat_params = params.cat();
    let grid = ctx.time("wigner", || {
        Ok(match args.kind {
            StateKind::Cat => WignerGrid::evaluate(spec, |x, p| wigner_cat(&cat_params, x, p)),
            StateKind::Psc => WignerGrid::evaluate(spec, |x, p| wigner_psc(&params, x, p)),
            StateKind::Xsc => WignerGrid::evaluate(spec, |x, p| wigner_xsc(&params, x, p)),
        })
    })?;

    let state = ctx.time("state", || match args.kind {
        StateKind::Cat => odd_cat(&cat_params, args.dim),
        _ if args.r == 0.0 => odd_cat(&cat_params, args.dim),
        _ => sc_state_closed_form(&params, args.dim),
    })?;
    let rho = state.to_density();

    let w_closed_form = match args.kind {
        StateKind::Cat => wigner_cat(&cat_params, 0.0, 0.0),
        StateKind::Psc => wigner_psc(&params, 0.0, 0.0),
        StateKind::Xsc => wigner_xsc(&params, 0.0, 0.0),
    };

    grid.write_csv(&ctx.path("wigner.csv"))?;
    ctx.register("wigner.csv")?;

    let mut dist_csv = String::from("n,probability\n");
    for (n, p) in rho.photon_distribution().iter().enumerate() {
        dist_csv.push_str(&format!("{n},{p:.16e}\n"));
    }
    ctx.write_text("photon_distribution.csv", &dist_csv)?;

    ctx.write_json("density.json", density_value(&rho)?)?;
    ctx.write_json(
        "report.json",
        json!({
            "kind": args.kind.label(),
            "alpha": args.alpha,
            "r": args.r,
            "theta": params.theta,
            "dim": args.dim,
            "w_origin": w_closed_form,
            "w_origin_density": wigner_origin(&rho),
            "w_min_on_grid": grid.min_value(),
            "parity": parity_name(rho.parity()),
            "mean_photon_number": rho.mean_photon_number(),
        }),
    )?;

    ctx.finish("state", args.kind.label(), None, config)
}

// ---------------------------------------------------------------------------
// simulate

fn resolved_config(args: &SimulateArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_json_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = args.r1 {
        cfg.r1 = v;
    }
    if let Some(v) = args.tap {
        cfg.tap = v;
    }
    if let Some(v) = args.r2 {
        cfg.r2 = v;
    }
    if let Some(v) = args.theta2 {
        cfg.theta2 = v;
    }
    if let Some(v) = args.eta_opa2 {
        cfg.eta_opa2 = v;
    }
    if let Some(v) = args.eta_det {
        cfg.eta_det = v;
    }
    if let Some(v) = args.jitter {
        cfg.phase_jitter_sd = v;
    }
    if let Some(v) = args.dim {
        cfg.dim = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_label(cfg: &ExperimentConfig) -> &'static str {
    if cfg.r2 == 0.0 {
        "cat"
    } else if cfg.theta2 == 0.0 {
        "p-sc"
    } else {
        "x-sc"
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<PathBuf> {
    let cfg = resolved_config(&args)?;
    let label = run_label(&cfg);
    let config = json!({
        "experiment": serde_json::to_value(&cfg)?,
        "n_traces": args.n_traces,
        "trace_len": DEFAULT_TRACE_LEN,
        "mode_gamma": DEFAULT_MODE_GAMMA,
        "mode_t0": DEFAULT_TRACE_LEN as f64 / 2.0,
        "phase_count": 12,
    });
    let config_str = serde_json::to_string(&config)?;
    let mut ctx = RunContext::create(
        &args.out,
        "simulate",
        run_id_for("simulate", &config_str, Some(args.seed)),
    )?;

    let output = ctx.time("pipeline", || run_pipeline(&cfg))?;
    let mode = double_exp_mode(DEFAULT_MODE_GAMMA, DEFAULT_TRACE_LEN as f64 / 2.0, DEFAULT_TRACE_LEN)?;
    let trace_path = ctx.path("traces.catf");
    ctx.time("synthesis", || {
        synthesize_to_file(
            &trace_path,
            &output.at_detector,
            &mode,
            args.n_traces,
            &default_phase_schedule(12),
            args.seed,
        )
    })?;
    ctx.register("traces.catf")?;

    ctx.write_json("config.json", serde_json::to_value(&cfg)?)?;
    ctx.write_json("pre_detection.json", density_value(&output.pre_detection)?)?;
    ctx.write_json("at_detector.json", density_value(&output.at_detector)?)?;
    ctx.write_json(
        "report.json",
        json!({
            "label": label,
            "seed": args.seed,
            "n_traces": args.n_traces,
            "herald_click_probability": output.herald.click_probability,
            "herald_model": serde_json::to_value(output.herald.model)?,
            "w_origin_pre_detection": wigner_origin(&output.pre_detection),
            "w_origin_at_detector": wigner_origin(&output.at_detector),
            "mean_photon_at_detector": output.at_detector.mean_photon_number(),
            "parity_pre_detection": parity_name(output.pre_detection.parity()),
            "mode_gamma": mode.gamma(),
            "mode_t0": mode.t0(),
            "trace_len": mode.len(),
        }),
    )?;

    ctx.finish("simulate", label, Some(args.seed), config)
}

// ---------------------------------------------------------------------------
// tomo

fn cmd_tomo(args: TomoArgs) -> Result<PathBuf> {
    let input = match (&args.traces, &args.records) {
        (Some(t), None) => ("traces", t.clone()),
        (None, Some(r)) => ("records", r.clone()),
        _ => {
            return Err(Error::Parameter(
                "pass exactly one of --traces or --records".into(),
            ))
        }
    };
    let config = json!({
        "input_kind": input.0,
        "input": input.1.display().to_string(),
        "dim": args.dim,
        "eta_correction": args.eta_det,
        "theta2": args.theta2,
        "binning": args.binning,
        "max_iters": args.max_iters,
    });
    let config_str = serde_json::to_string(&config)?;
    let mut ctx = RunContext::create(&args.out, "tomo", run_id_for("tomo", &config_str, None))?;

    // Stage 1: quadrature records, via the temporal mode for traces.
    let (records, fitted_mode) = if input.0 == "traces" {
        let curve = ctx.time("variance_curve", || {
            variance_curve_streaming(TraceFileReader::open(&input.1)?)
        })?;
        let mut curve_csv = String::from("t,variance\n");
        for (t, v) in curve.iter().enumerate() {
            curve_csv.push_str(&format!("{t},{v:.16e}\n"));
        }
        ctx.write_text("variance_curve.csv", &curve_csv)?;

        let fit = ctx.time("mode_fit", || fit_temporal_mode(curve.as_slice().unwrap()))?;
        let mut mode_value: Value = serde_json::from_str(&fit.mode.to_json_string()?)?;
        if let Some(map) = mode_value.as_object_mut() {
            map.insert("variance_floor".into(), json!(fit.a));
            map.insert("variance_contrast".into(), json!(fit.b));
        }
        ctx.write_json("mode.json", mode_value)?;

        let records = ctx.time("extraction", || {
            extract_records_from_file(&input.1, &fit.mode)
        })?;
        write_records_csv(&ctx.path("records.csv"), &records)?;
        ctx.register("records.csv")?;
        (records, Some(fit.mode))
    } else {
        (read_records_csv(&input.1)?, None)
    };

    // Stage 2: maximum-likelihood reconstruction.
    let tomo_cfg = TomoConfig {
        dim: args.dim,
        eta_correction: args.eta_det,
        max_iters: args.max_iters,
        convergence_tol: crate::tomo::DEFAULT_CONVERGENCE_TOL,
        binning: args.binning,
    };
    let recon = ctx.time("reconstruction", || maxlik_reconstruct(&records, &tomo_cfg))?;
    if !recon.converged {
        eprintln!(
            "warning: reconstruction hit the iteration cap ({}) with step {:.3e}",
            recon.iterations, recon.final_step
        );
    }
    ctx.write_json("density.json", density_value(&recon.rho)?)?;

    // Stage 3: (alpha, r) fit at the requested phase(s).
    let thetas: Vec<f64> = match args.theta2 {
        Some(t) => vec![t],
        None => vec![0.0, PI],
    };
    let fits: Vec<FitResult> = ctx.time("fit", || {
        thetas
            .iter()
            .map(|&t| fit_sc(&recon.rho, t, &default_alpha_grid(), &default_r_grid()))
            .collect()
    })?;
    let best = fits
        .iter()
        .max_by(|a, b| a.fidelity.total_cmp(&b.fidelity))
        .expect("at least one fit");
    write_fidelity_surface(&ctx.path("surface.csv"), &best.grid)?;
    ctx.register("surface.csv")?;

    let fit_summaries: Vec<Value> = fits
        .iter()
        .map(|f| {
            json!({
                "theta": f.theta,
                "alpha_hat": f.alpha_hat,
                "r_hat": f.r_hat,
                "fidelity": f.fidelity,
            })
        })
        .collect();
    ctx.write_json(
        "report.json",
        json!({
            "n_records": records.len(),
            "alpha_hat": best.alpha_hat,
            "r_hat": best.r_hat,
            "theta": best.theta,
            "fidelity": best.fidelity,
            "w_origin": wigner_origin(&recon.rho),
            "converged": recon.converged,
            "iterations": recon.iterations,
            "final_step": recon.final_step,
            "loglik_start": recon.loglik.first(),
            "loglik_end": recon.loglik.last(),
            "mode_gamma": fitted_mode.as_ref().map(|m| m.gamma()),
            "mode_t0": fitted_mode.as_ref().map(|m| m.t0()),
            "fits": fit_summaries,
        }),
    )?;

    ctx.finish("tomo", "tomo", None, config)
}

// ---------------------------------------------------------------------------
// table1

#[derive(Debug, Clone, Serialize)]
struct Table1Row {
    label: String,
    theta2: f64,
    r2: f64,
    fidelity: f64,
    alpha_hat: f64,
    r_hat: f64,
    w_origin: f64,
    alpha_ref: f64,
    fidelity_ref: f64,
    w_origin_ref: f64,
    d_alpha: f64,
    d_fidelity: f64,
    d_r: f64,
    d_w_origin: f64,
}

fn table1_run(
    label: &str,
    theta2: f64,
    r2: f64,
    refs: (f64, f64, f64),
    args: &Table1Args,
    seed: u64,
) -> Result<(Table1Row, FockDensity)> {
    let cfg = ExperimentConfig {
        r2,
        theta2,
        ..ExperimentConfig::default()
    };
    let output = run_pipeline(&cfg)?;
    let records = synthesize_records(
        &output.at_detector,
        args.n_traces,
        &default_phase_schedule(12),
        seed,
    )?;
    let tomo_cfg = TomoConfig {
        dim: args.dim,
        ..TomoConfig::default()
    };
    let recon = maxlik_reconstruct(&records, &tomo_cfg)?;
    if !recon.converged {
        eprintln!("warning: {label} reconstruction hit the iteration cap");
    }
    let fit = fit_sc(&recon.rho, theta2, &default_alpha_grid(), &default_r_grid())?;
    let w = wigner_origin(&recon.rho);
    let (alpha_ref, fidelity_ref, w_ref) = refs;
    Ok((
        Table1Row {
            label: label.to_string(),
            theta2,
            r2,
            fidelity: fit.fidelity,
            alpha_hat: fit.alpha_hat,
            r_hat: fit.r_hat,
            w_origin: w,
            alpha_ref,
            fidelity_ref,
            w_origin_ref: w_ref,
            d_alpha: fit.alpha_hat - alpha_ref,
            d_fidelity: fit.fidelity - fidelity_ref,
            d_r: fit.r_hat - r2,
            d_w_origin: w - w_ref,
        },
        recon.rho,
    ))
}

fn cmd_table1(args: Table1Args) -> Result<PathBuf> {
    let config = json!({
        "seed": args.seed,
        "n_traces": args.n_traces,
        "dim": args.dim,
        "presets": TABLE1_REFERENCE
            .iter()
            .map(|(label, theta2, r2, ..)| json!({"label": label, "theta2": theta2, "r2": r2}))
            .collect::<Vec<_>>(),
    });
    let config_str = serde_json::to_string(&config)?;
    let mut ctx = RunContext::create(
        &args.out,
        "table1",
        run_id_for("table1", &config_str, Some(args.seed)),
    )?;

    let mut rows = Vec::with_capacity(TABLE1_REFERENCE.len());
    for (i, &(label, theta2, r2, alpha_ref, f_ref, w_ref)) in TABLE1_REFERENCE.iter().enumerate() {
        let seed = args.seed.wrapping_add(i as u64);
        let (row, rho) = ctx.time(label, || {
            table1_run(label, theta2, r2, (alpha_ref, f_ref, w_ref), &args, seed)
        })?;
        let name = format!("density_{label}.json");
        ctx.write_json(&name, density_value(&rho)?)?;
        rows.push(row);
    }

    let mut csv = String::from(
        "label,theta2,r2,fidelity,alpha_hat,r_hat,w_origin,alpha_ref,fidelity_ref,w_origin_ref,d_alpha,d_fidelity,d_r,d_w_origin\n",
    );
    for r in &rows {
        csv.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.label,
            r.theta2,
            r.r2,
            r.fidelity,
            r.alpha_hat,
            r.r_hat,
            r.w_origin,
            r.alpha_ref,
            r.fidelity_ref,
            r.w_origin_ref,
            r.d_alpha,
            r.d_fidelity,
            r.d_r,
            r.d_w_origin,
        ));
    }
    ctx.write_text("table1.csv", &csv)?;
    ctx.write_json("report.json", json!({ "rows": serde_json::to_value(&rows)? }))?;

    ctx.finish("table1", "table1", Some(args.seed), config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homodyne::read_traces;

    fn read_json(path: &Path) -> Value {
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    fn args(list: &[&str]) -> Vec<String> {
        std::iter::once("catforge".to_string())
            .chain(list.iter().map(|s| s.to_string()))
            .collect()
    }

    #[test]
    fn state_cat_reports_the_analytic_origin_value() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = run_from(args(&[
            "state", "--kind", "cat", "--alpha", "1.06",
            "--out", tmp.path().to_str().unwrap(),
        ]))
        .unwrap();
        let report = read_json(&dir.join("report.json"));
        let w = report["w_origin"].as_f64().unwrap();
        assert!((w - (-1.0 / PI)).abs() < 1e-4, "W(0,0) = {w}");
        assert_eq!(report["parity"], "odd");

        // The density artifact still parses as a density matrix.
        let rho = FockDensity::read_json(&dir.join("density.json")).unwrap();
        assert_eq!(rho.dim(), crate::fock::DEFAULT_DIM);

        // The manifest lists artifacts that exist with the same run id.
        let manifest = read_json(&dir.join("manifest.json"));
        let run_id = manifest["run_id"].as_str().unwrap();
        assert!(dir.ends_with(format!("state-{run_id}")));
        for entry in manifest["artifacts"].as_array().unwrap() {
            let name = entry["path"].as_str().unwrap();
            assert!(dir.join(name).exists(), "missing artifact {name}");
            if name.ends_with(".json") {
                assert_eq!(read_json(&dir.join(name))["run_id"], run_id);
            }
        }
    }

    #[test]
    fn state_xsc_at_zero_squeezing_equals_the_cat_bytes() {
        let tmp = tempfile::tempdir().unwrap();
        let cat = run_from(args(&[
            "state", "--kind", "cat", "--alpha", "0.9",
            "--out", tmp.path().join("a").to_str().unwrap(),
        ]))
        .unwrap();
        let xsc = run_from(args(&[
            "state", "--kind", "xsc", "--alpha", "0.9", "--r", "0",
            "--out", tmp.path().join("b").to_str().unwrap(),
        ]))
        .unwrap();
        let a = std::fs::read(cat.join("wigner.csv")).unwrap();
        let b = std::fs::read(xsc.join("wigner.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn state_rejects_invalid_parameters_as_usage_errors() {
        let tmp = tempfile::tempdir().unwrap();
        let err = run_from(args(&[
            "state", "--kind", "cat", "--alpha", "-1.0",
            "--out", tmp.path().to_str().unwrap(),
        ]))
        .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = run_from(args(&["state", "--kind", "nope"])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn simulate_is_deterministic_and_labels_runs() {
        let tmp = tempfile::tempdir().unwrap();
        let common = [
            "simulate", "--r2", "0.29", "--theta2", "pi",
            "--n-traces", "64", "--seed", "7", "--dim", "20",
        ];
        let mut a_args = args(&common);
        a_args.extend(["--out".into(), tmp.path().join("a").display().to_string()]);
        let mut b_args = args(&common);
        b_args.extend(["--out".into(), tmp.path().join("b").display().to_string()]);
        let a = run_from(a_args).unwrap();
        let b = run_from(b_args).unwrap();

        // Same run id, byte-identical traces.
        assert_eq!(a.file_name(), b.file_name());
        assert_eq!(
            std::fs::read(a.join("traces.catf")).unwrap(),
            std::fs::read(b.join("traces.catf")).unwrap()
        );
        let manifest = read_json(&a.join("manifest.json"));
        assert_eq!(manifest["label"], "x-sc");
        assert_eq!(read_traces(&a.join("traces.catf")).unwrap().len(), 64);
    }

    #[test]
    fn simulate_detector_efficiency_shifts_the_origin_dip() {
        let tmp = tempfile::tempdir().unwrap();
        let report_w = |eta: &str, sub: &str| -> f64 {
            let dir = run_from(args(&[
                "simulate", "--eta-det", eta, "--n-traces", "4",
                "--dim", "20",
                "--out", tmp.path().join(sub).to_str().unwrap(),
            ]))
            .unwrap();
            read_json(&dir.join("report.json"))["w_origin_at_detector"]
                .as_f64()
                .unwrap()
        };
        let lossless = report_w("1.0", "a");
        let lossy = report_w("0.8", "b");
        assert!(
            lossless < lossy && lossy < 0.0,
            "W(0,0): {lossless} at eta 1.0 vs {lossy} at 0.8"
        );
    }

    #[test]
    fn overwrite_needs_force() {
        let tmp = tempfile::tempdir().unwrap();
        let run = |force: bool| {
            let mut a = args(&[
                "state", "--kind", "cat", "--out", tmp.path().to_str().unwrap(),
            ]);
            if force {
                a.push("--force".into());
            }
            run_from(a)
        };
        run(false).unwrap();
        let err = run(false).unwrap_err();
        assert!(matches!(err, Error::OutputExists(_)));
        assert_eq!(err.exit_code(), 2);
        run(true).unwrap();
    }

    #[test]
    fn tomo_requires_exactly_one_input() {
        let tmp = tempfile::tempdir().unwrap();
        let err = run_from(args(&["tomo", "--out", tmp.path().to_str().unwrap()])).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn tomo_runs_end_to_end_on_simulated_traces() {
        let tmp = tempfile::tempdir().unwrap();
        let sim = run_from(args(&[
            "simulate", "--n-traces", "3000", "--seed", "11", "--dim", "20",
            "--out", tmp.path().join("sim").to_str().unwrap(),
        ]))
        .unwrap();
        let dir = run_from(args(&[
            "tomo",
            "--traces", sim.join("traces.catf").to_str().unwrap(),
            "--dim", "10", "--max-iters", "150",
            "--out", tmp.path().join("tomo").to_str().unwrap(),
        ]))
        .unwrap();

        let report = read_json(&dir.join("report.json"));
        for field in ["alpha_hat", "r_hat", "fidelity", "w_origin"] {
            assert!(report[field].is_f64(), "missing report field {field}");
        }
        assert_eq!(report["n_records"].as_u64().unwrap(), 3000);
        // At 3000 traces the curve is noisy, so only the scale of the
        // planted gamma = 0.02 is checked here; the 2% precision claim
        // is exercised at full ensemble size elsewhere.
        let gamma = report["mode_gamma"].as_f64().unwrap();
        assert!((0.005..0.08).contains(&gamma), "gamma {gamma}");
        let t0 = report["mode_t0"].as_f64().unwrap();
        assert!((t0 - 250.0).abs() < 25.0, "t0 {t0}");
        for name in ["variance_curve.csv", "mode.json", "records.csv", "surface.csv", "density.json"] {
            assert!(dir.join(name).exists(), "missing {name}");
        }
    }

    #[test]
    fn table1_emits_seven_rows() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = run_from(args(&[
            "table1", "--n-traces", "1000", "--dim", "10", "--seed", "3",
            "--out", tmp.path().to_str().unwrap(),
        ]))
        .unwrap();
        let csv = std::fs::read_to_string(dir.join("table1.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 8, "header + 7 rows");
        assert!(lines[0].starts_with("label,"));
        assert!(lines[1].starts_with("cat,"));
        assert_eq!(lines.iter().filter(|l| l.starts_with("p-sc")).count(), 3);
        assert_eq!(lines.iter().filter(|l| l.starts_with("x-sc")).count(), 3);
        let report = read_json(&dir.join("report.json"));
        assert_eq!(report["rows"].as_array().unwrap().len(), 7);
    }
}
