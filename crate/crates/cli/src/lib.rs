//! Command-line front end: simulate, reconstruct, spectrum, verify,
//! predict, sweep, report.
//!
//! Exit codes: 0 success, 2 usage error, 3 data/format error,
//! 4 statistical-floor/regime failure. Every error is also printed as a
//! single line of JSON on standard error.

pub mod report;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::io::Write as _;
use std::path::PathBuf;

use tmr_core::accuracy::{predict, required_waveforms, AccuracyInputs, PredictorRegime};
use tmr_core::io::{
    ingest_batch, read_mode_json, read_result_json, write_batch_csv, write_json, write_kernel_csv,
    write_mode_json, write_result_json, write_spectrum_json, write_tmrk, write_tmrw, BatchFormat,
    ResultJson,
};
use tmr_core::kernel::{eigendecompose, estimate_kernel_centered, estimate_kernel_from_source};
use tmr_core::reconstruct::{
    attach_target_fidelity, classify_spectrum, reconstruct_mode, verify_single_mode, BatchSource,
    PurityCase, PurityVerdict, DEFAULT_Z,
};
use tmr_core::shape::{make_shape, ShapeSpec};
use tmr_core::sim::{synthesize_batch, SimulationConfig, StateSpec};
use tmr_core::sweep::{
    compare_to_model, rows_from_csv, run_sweep_with, SweepPlan, SWEEP_CSV_HEADER,
};
use tmr_core::{Error as CoreError, TimeGrid};

/// Run the CLI with the given argv (including the program name).
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            emit_error(2, "usage", &e.to_string(), None);
            return 2;
        }
    };
    init_thread_pool(cli.threads);
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let (code, kind) = e.classify();
            emit_error(code, kind, &e.message(), e.payload());
            code
        }
    }
}

fn emit_error(code: i32, kind: &str, message: &str, payload: Option<&serde_json::Value>) {
    let mut obj = serde_json::json!({ "error": message, "kind": kind, "code": code });
    if let Some(p) = payload {
        obj["detail"] = p.clone();
    }
    let line = serde_json::to_string(&obj).unwrap_or_else(|_| format!("{{\"code\":{code}}}"));
    eprintln!("{line}");
}

fn init_thread_pool(threads: Option<usize>) {
    let threads = threads.or_else(|| {
        std::env::var("TMR_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        // results are identical for any pool size; ignore re-initialization
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
}

// ---------------------------------------------------------------------------
// Error plumbing
// ---------------------------------------------------------------------------

enum CliError {
    Core(CoreError),
    Usage(String),
    Statistical {
        message: String,
        payload: serde_json::Value,
    },
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        Self::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Core(CoreError::Io(e))
    }
}

impl CliError {
    fn classify(&self) -> (i32, &'static str) {
        match self {
            Self::Usage(_) => (2, "usage"),
            Self::Statistical { .. } => (4, "statistical"),
            Self::Core(e) => match e {
                CoreError::InvalidParameter(_)
                | CoreError::DegenerateMode(_)
                | CoreError::Dimension(_) => (2, "usage"),
                CoreError::Io(_)
                | CoreError::Json(_)
                | CoreError::Format(_)
                | CoreError::EigenNonConvergence(_) => (3, "data"),
                CoreError::StatisticalFloor(_)
                | CoreError::Contaminated { .. }
                | CoreError::UnsupportedMultimode { .. } => (4, "statistical"),
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Self::Core(e) => e.to_string(),
            Self::Usage(m) => m.clone(),
            Self::Statistical { message, .. } => message.clone(),
        }
    }

    fn payload(&self) -> Option<&serde_json::Value> {
        match self {
            Self::Statistical { payload, .. } => Some(payload),
            _ => None,
        }
    }
}

type CliResult = Result<(), CliError>;

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

/// Counts accept scientific notation ("1e6") but must be whole numbers.
pub(crate) fn parse_count(s: &str) -> Result<u64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() || v < 0.0 || v.fract() != 0.0 || v >= 9.0e15 {
        return Err(format!("`{s}` is not a nonnegative integer count"));
    }
    Ok(v as u64)
}

#[derive(Parser)]
#[command(
    name = "tmr",
    version,
    about = "Temporal mode reconstruction from cw homodyne quadrature records"
)]
struct Cli {
    /// Worker threads (default: all cores; TMR_THREADS is the fallback).
    /// Results do not depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a homodyne waveform batch.
    Simulate(SimulateArgs),
    /// Reconstruct the temporal mode from a waveform batch.
    Reconstruct(ReconstructArgs),
    /// Export the kernel eigen-spectrum of a batch.
    Spectrum(SpectrumArgs),
    /// Re-run with the compensating phase to confirm a pure single mode.
    Verify(VerifyArgs),
    /// Evaluate the closed-form accuracy predictors.
    Predict(PredictArgs),
    /// Run a Monte-Carlo parameter sweep from a plan file.
    Sweep(SweepArgs),
    /// Render a figure (self-contained SVG plus the plotted numbers as CSV).
    Report(report::ReportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StateArg {
    Vacuum,
    SinglePhoton,
    Coherent,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ShapeArg {
    Gaussian,
    Chirped,
    Exp,
    Hg,
    File,
}

#[derive(Args)]
struct ShapeFlags {
    /// Mode shape family.
    #[arg(long, value_enum, default_value = "gaussian")]
    shape: ShapeArg,
    /// Shape center in seconds (default: half the window).
    #[arg(long)]
    center: Option<f64>,
    /// Shape width in seconds (default: a tenth of the window).
    #[arg(long)]
    width: Option<f64>,
    /// Chirp rate in rad/s^2 (default: 2.5/width^2).
    #[arg(long)]
    chirp: Option<f64>,
    /// Exponential decay rate in 1/s (default: 5/window).
    #[arg(long)]
    rate: Option<f64>,
    /// Hermite-Gauss order.
    #[arg(long, default_value_t = 0)]
    order: usize,
    /// Mode JSON file for --shape file.
    #[arg(long)]
    shape_file: Option<PathBuf>,
}

impl ShapeFlags {
    fn resolve(&self, window: f64) -> Result<ShapeSpec, CliError> {
        let center = self.center.unwrap_or(window / 2.0);
        let width = self.width.unwrap_or(window / 10.0);
        Ok(match self.shape {
            ShapeArg::Gaussian => ShapeSpec::Gaussian { center, width },
            ShapeArg::Chirped => ShapeSpec::ChirpedGaussian {
                center,
                width,
                chirp_rate: self.chirp.unwrap_or(2.5 / (width * width)),
            },
            ShapeArg::Exp => ShapeSpec::ExpDecay {
                rate: self.rate.unwrap_or(5.0 / window),
            },
            ShapeArg::Hg => ShapeSpec::HermiteGauss {
                order: self.order,
                center,
                width,
            },
            ShapeArg::File => ShapeSpec::FromFile {
                path: self
                    .shape_file
                    .clone()
                    .ok_or_else(|| CliError::Usage("--shape file needs --shape-file".into()))?,
            },
        })
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    shape: ShapeFlags,
    /// State occupying the mode.
    #[arg(long, value_enum, default_value = "coherent")]
    state: StateArg,
    /// Mean photon number (the efficiency for single-photon states).
    #[arg(long)]
    n: Option<f64>,
    /// Number of waveforms.
    #[arg(long, value_parser = parse_count)]
    nwf: u64,
    /// Samples per waveform.
    #[arg(long, value_parser = parse_count)]
    nsamp: u64,
    /// Synthesized basis modes (default: nsamp).
    #[arg(long, value_parser = parse_count)]
    nmode: Option<u64>,
    /// Sample period in seconds (default: 1/nsamp, a one-second window).
    #[arg(long)]
    dt: Option<f64>,
    /// RNG seed (mandatory: no silent entropy).
    #[arg(long)]
    seed: u64,
    /// Output batch (.tmrw binary, or .csv for the text variant).
    #[arg(long)]
    out: PathBuf,
    /// Also write the sampled target mode as JSON.
    #[arg(long)]
    target_out: Option<PathBuf>,
    /// Also write the full simulation config (usable by `verify`).
    #[arg(long)]
    config_out: Option<PathBuf>,
    /// Low-pass cutoff in Hz.
    #[arg(long)]
    filter_low: Option<f64>,
    /// High-pass cutoff in Hz.
    #[arg(long)]
    filter_high: Option<f64>,
}

#[derive(Args)]
struct InputFlags {
    /// Input batch file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Input format (default: by extension).
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Sample period for CSV inputs (default 1.0).
    #[arg(long)]
    csv_dt: Option<f64>,
    /// Vacuum-calibration sidecar JSON ({"sigma0_sq_raw": ...}).
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Subtract the batch mean before the kernel (recorded data with an
    /// offset; default off, the model concerns second moments).
    #[arg(long)]
    subtract_mean: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Tmrw,
    Csv,
}

impl InputFlags {
    fn ingest(&self) -> Result<tmr_core::WaveformBatch, CliError> {
        let format = match self.format {
            Some(FormatArg::Tmrw) => BatchFormat::Tmrw,
            Some(FormatArg::Csv) => BatchFormat::Csv,
            None => BatchFormat::from_path(&self.input),
        };
        Ok(ingest_batch(
            &self.input,
            format,
            self.calibration.as_deref(),
            self.csv_dt,
        )?)
    }

    fn kernel(&self, batch: &tmr_core::WaveformBatch) -> Result<tmr_core::Kernel, CliError> {
        Ok(if self.subtract_mean {
            estimate_kernel_centered(batch)?
        } else {
            estimate_kernel_from_source(batch)?
        })
    }
}

#[derive(Args)]
struct ReconstructArgs {
    #[command(flatten)]
    input: InputFlags,
    /// Target mode JSON for fidelity reporting.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Effective number of measured modes (default: nsamp; calibrate it
    /// from a vacuum run).
    #[arg(long)]
    nmode_eff: Option<f64>,
    /// z-score on the vacuum band for "above one".
    #[arg(long, default_value_t = DEFAULT_Z)]
    z: f64,
    /// Force the two-eigenmode reconstruction regardless of the band count.
    #[arg(long)]
    force_complex: bool,
    /// Output result JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    input: InputFlags,
    /// Output spectrum JSON.
    #[arg(long)]
    out: PathBuf,
    /// Also export the kernel (.tmrk binary or .csv).
    #[arg(long)]
    kernel_out: Option<PathBuf>,
    /// Treat the batch as vacuum calibration data and print the effective
    /// mode count estimate (errors on a contaminated batch).
    #[arg(long)]
    effective_modes: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Result JSON from `reconstruct`.
    #[arg(long)]
    result: PathBuf,
    /// Simulation config JSON (from `simulate --config-out`): re-runnable
    /// source, compensated in software.
    #[arg(long)]
    sim_config: Option<PathBuf>,
    /// Recorded dataset taken with the compensating phase on the LO.
    #[arg(long)]
    compensated: Option<PathBuf>,
    /// Vacuum-calibration sidecar for --compensated.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Sample period if --compensated is CSV.
    #[arg(long)]
    csv_dt: Option<f64>,
    /// z-score on the vacuum band.
    #[arg(long, default_value_t = DEFAULT_Z)]
    z: f64,
    /// Output verdict JSON (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Number of waveforms.
    #[arg(long, value_parser = parse_count)]
    nwf: u64,
    /// Effective number of measured modes.
    #[arg(long)]
    nmode: f64,
    /// Mean photon number (0 for vacuum-only predictions).
    #[arg(long)]
    n: f64,
    /// Also invert: smallest N_wf reaching this mean infidelity.
    #[arg(long)]
    target_infidelity: Option<f64>,
    /// Predictor to invert for --target-infidelity.
    #[arg(long, value_enum, default_value = "real")]
    regime: RegimeArg,
    /// Output JSON (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegimeArg {
    Real,
    ComplexUpper,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep plan JSON.
    #[arg(long)]
    plan: PathBuf,
    /// Output directory (sweep.csv + summary.json).
    #[arg(long)]
    out_dir: PathBuf,
    /// Resume from an existing sweep.csv checkpoint.
    #[arg(long)]
    resume: bool,
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Reconstruct(args) => reconstruct(args),
        Command::Spectrum(args) => spectrum(args),
        Command::Verify(args) => verify(args),
        Command::Predict(args) => predict_cmd(args),
        Command::Sweep(args) => sweep(args),
        Command::Report(args) => report::run(args).map_err(CliError::Core),
    }
}

fn simulate(args: SimulateArgs) -> CliResult {
    let n_samp = args.nsamp as usize;
    let dt = args.dt.unwrap_or(1.0 / args.nsamp as f64);
    let grid = TimeGrid::new(n_samp, dt)?;
    let window = grid.duration();

    let state = match args.state {
        StateArg::Vacuum => StateSpec::vacuum(),
        StateArg::SinglePhoton | StateArg::Coherent => {
            let n = args
                .n
                .ok_or_else(|| CliError::Usage("--n is required for occupied states".into()))?;
            let mode = make_shape(&args.shape.resolve(window)?, grid)?;
            if args.state == StateArg::SinglePhoton {
                StateSpec::single_photon(n, mode)?
            } else {
                StateSpec::coherent(n, mode)?
            }
        }
    };

    let filter = if args.filter_low.is_some() || args.filter_high.is_some() {
        Some(tmr_core::FilterSpec {
            low_pass_hz: args.filter_low,
            high_pass_hz: args.filter_high,
        })
    } else {
        None
    };

    let config = SimulationConfig {
        state,
        grid,
        n_wf: args.nwf,
        n_mode: args.nmode.map(|m| m as usize).unwrap_or(n_samp),
        seed: args.seed,
        filter,
    };
    let batch = synthesize_batch(&config)?;

    match BatchFormat::from_path(&args.out) {
        BatchFormat::Tmrw => write_tmrw(&args.out, &batch)?,
        BatchFormat::Csv => write_batch_csv(&args.out, &batch)?,
    }
    if let Some(path) = &args.target_out {
        let mode = config
            .state
            .mode
            .as_ref()
            .ok_or_else(|| CliError::Usage("--target-out needs an occupied state".into()))?;
        write_mode_json(path, mode)?;
    }
    if let Some(path) = &args.config_out {
        write_json(path, &config)?;
    }
    println!(
        "wrote {} waveforms x {} samples to {}",
        batch.n_wf(),
        batch.n_samp(),
        args.out.display()
    );
    Ok(())
}

fn reconstruct(args: ReconstructArgs) -> CliResult {
    let batch = args.input.ingest()?;
    let n_wf = batch.n_wf() as u64;
    let n_mode_eff = args.nmode_eff.unwrap_or(batch.n_samp() as f64);
    let spectrum = eigendecompose(&args.input.kernel(&batch)?)?;
    let classified = classify_spectrum(&spectrum, n_wf, n_mode_eff, args.z);

    let verdict = if args.force_complex {
        PurityVerdict::forced_complex(classified.threshold)
    } else {
        if classified.above_vacuum_count == 0 {
            return Err(CliError::Statistical {
                message: "nothing above the vacuum band; the batch looks like vacuum".into(),
                payload: serde_json::to_value(classified).unwrap_or_default(),
            });
        }
        classified
    };

    let mut result = match reconstruct_mode(&spectrum, &verdict) {
        Ok(r) => r,
        Err(e @ (CoreError::UnsupportedMultimode { .. } | CoreError::StatisticalFloor(_))) => {
            return Err(CliError::Statistical {
                message: e.to_string(),
                payload: serde_json::to_value(classified).unwrap_or_default(),
            })
        }
        Err(e) => return Err(e.into()),
    };

    if let Some(target_path) = &args.target {
        let target = read_mode_json(target_path)?;
        attach_target_fidelity(&mut result, &target, verdict.threshold)?;
    }

    let mut provenance = serde_json::json!({
        "input": args.input.input.display().to_string(),
        "n_wf": n_wf,
        "n_mode_eff": n_mode_eff,
        "z": args.z,
    });
    if result.case == PurityCase::ComplexOrTwoMode {
        provenance["assumption"] = "unverified single-mode assumption".into();
    }
    write_result_json(&args.out, &ResultJson::from_result(&result, provenance))?;
    println!(
        "n1 = {:.6}, n2 = {:.6}, verdict {:?}, wrote {}",
        result.n1,
        result.n2,
        result.case,
        args.out.display()
    );
    Ok(())
}

fn spectrum(args: SpectrumArgs) -> CliResult {
    let batch = args.input.ingest()?;
    let kernel = args.input.kernel(&batch)?;
    let spectrum = eigendecompose(&kernel)?;
    write_spectrum_json(&args.out, &spectrum)?;
    if let Some(path) = &args.kernel_out {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => write_kernel_csv(path, &kernel)?,
            _ => write_tmrk(path, &kernel)?,
        }
    }
    if args.effective_modes {
        let est = tmr_core::kernel::estimate_effective_mode_count(&spectrum, batch.n_wf() as u64)?;
        println!(
            "{}",
            serde_json::json!({
                "effective_mode_count": est.primary,
                "count_based_cross_check": est.count_based,
            })
        );
    }
    println!(
        "spectrum of {} modes written to {} (top eigenvalue {:.6})",
        spectrum.len(),
        args.out.display(),
        spectrum.eigenvalues()[0]
    );
    Ok(())
}

fn verify(args: VerifyArgs) -> CliResult {
    let result = read_result_json(&args.result)?.into_result();
    let source = match (&args.sim_config, &args.compensated) {
        (Some(cfg_path), None) => {
            let config: SimulationConfig = tmr_core::io::read_json(cfg_path)?;
            BatchSource::Simulated(config)
        }
        (None, Some(batch_path)) => {
            let format = BatchFormat::from_path(batch_path);
            BatchSource::Recorded(ingest_batch(
                batch_path,
                format,
                args.calibration.as_deref(),
                args.csv_dt,
            )?)
        }
        _ => {
            return Err(CliError::Usage(
                "verify needs exactly one of --sim-config (re-runnable source) or \
                 --compensated (a dataset recorded with the compensating phase)"
                    .into(),
            ))
        }
    };
    let verdict = verify_single_mode(&source, &result, args.z)?;
    let doc = serde_json::to_value(verdict).map_err(CoreError::from)?;
    match &args.out {
        Some(path) => write_json(path, &doc)?,
        None => println!("{}", serde_json::to_string(&doc).map_err(CoreError::from)?),
    }
    Ok(())
}

fn predict_cmd(args: PredictArgs) -> CliResult {
    let inputs = AccuracyInputs {
        n_wf: args.nwf,
        n_mode: args.nmode,
        n: args.n,
    };
    let prediction = predict(&inputs)?;
    let mut doc = serde_json::to_value(prediction).map_err(CoreError::from)?;
    if let Some(target) = args.target_infidelity {
        let regime = match args.regime {
            RegimeArg::Real => PredictorRegime::Real,
            RegimeArg::ComplexUpper => PredictorRegime::ComplexUpper,
        };
        let required = required_waveforms(target, args.nmode, args.n, regime)?;
        doc["required_waveforms"] = required.into();
    }
    match &args.out {
        Some(path) => write_json(path, &doc)?,
        None => println!("{}", serde_json::to_string(&doc).map_err(CoreError::from)?),
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> CliResult {
    let plan: SweepPlan = tmr_core::io::read_json(&args.plan)?;
    plan.validate()?;
    std::fs::create_dir_all(&args.out_dir)?;
    let csv_path = args.out_dir.join("sweep.csv");

    let mut done_rows = Vec::new();
    if args.resume && csv_path.exists() {
        done_rows = rows_from_csv(&std::fs::read_to_string(&csv_path)?)?;
        if done_rows.len() > plan.axis_values.len() {
            return Err(CliError::Usage(format!(
                "checkpoint holds {} rows for a {}-point plan",
                done_rows.len(),
                plan.axis_values.len()
            )));
        }
    }
    let skip = done_rows.len();

    let mut file = if skip > 0 {
        std::fs::OpenOptions::new().append(true).open(&csv_path)?
    } else {
        let mut f = std::fs::File::create(&csv_path)?;
        writeln!(f, "{SWEEP_CSV_HEADER}")?;
        f
    };

    let new_rows = run_sweep_with(&plan, skip, |row| {
        writeln!(file, "{}", row.to_csv_line()).map_err(CoreError::from)?;
        file.flush().map_err(CoreError::from)?;
        println!(
            "point N_wf={} N_mode={} n={}: mean dn {:.4e}{}",
            row.point.n_wf,
            row.point.n_mode,
            row.point.n,
            row.mean_dn,
            row.mean_infidelity
                .map(|f| format!(", mean infidelity {f:.4e}"))
                .unwrap_or_default()
        );
        Ok(())
    })?;

    done_rows.extend(new_rows);
    let table = compare_to_model(&plan, &done_rows)?;
    write_json(&args.out_dir.join("summary.json"), &table)?;
    println!(
        "sweep complete: {} rows, model pass rate {:.2} ({} of {} applicable)",
        done_rows.len(),
        table.pass_rate,
        table.passed,
        table.applicable
    );
    Ok(())
}
