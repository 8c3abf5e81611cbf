//! `qbs-sim`: sweeps, Bell runs, causality and self-checks for the
//! quantum delayed-choice simulator.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use qbs_core::analysis::{
    analytic_bell, classical_bound_violation, simulate_bell, surface_from_counts, BellRun, BELL_SCAN_STEPS,
};
use qbs_core::checkpoints::run_all;
use qbs_core::experiment::{mach_zehnder, Preset};
use qbs_core::montecarlo::{dark_for_visibility, run_grid, DetectionModel, DEFAULT_EFFICIENCY, DEFAULT_SEED};
use qbs_core::optics::BsConvention;
use qbs_core::spacetime::{
    propagation_delay, CausalityReport, DEFAULT_DELTA_T_NS, DEFAULT_DELTA_X_M, DEFAULT_FIBER_INDEX,
};
use qbs_core::surface::{analytic_surface, grid_points, GridSpec};
use qbs_core::{AnalysisBasis, CoincidenceCategory, Error, ExperimentSettings, InputKind};

const THREADS_ENV: &str = "QBS_SIM_THREADS";
/// Coincidence rate per XOR group in the reference run: 350 events per 5 s.
const COINCIDENCES_PER_SECOND: f64 = 70.0;

#[derive(Parser, Debug)]
#[command(name = "qbs-sim", version, about = "Quantum delayed-choice experiment simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Correlation surface over a (θ, α) grid, exact or sampled.
    Sweep(SweepArgs),
    /// Bell parameter from the H/V and D/A fringe visibilities.
    Bell(BellArgs),
    /// Space-like separation check of the two detection events.
    Causality(CausalityArgs),
    /// Engine self-checks against hand-written states.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum PresetArg {
    OpenMzi,
    ClosedMzi,
    Qdc,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::OpenMzi => Preset::OpenMzi,
            PresetArg::ClosedMzi => Preset::ClosedMzi,
            PresetArg::Qdc => Preset::Qdc,
        }
    }
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Detector efficiency, same for all six detectors.
    #[arg(long)]
    efficiency: Option<f64>,
    /// Dark-click probability per detector per coincidence window.
    #[arg(long, conflicts_with = "target_visibility")]
    dark: Option<f64>,
    /// Pick the dark-click probability that gives this wave-limit visibility.
    #[arg(long)]
    target_visibility: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

impl ModelArgs {
    fn model(&self) -> Result<DetectionModel, Error> {
        let base = DetectionModel::default();
        let efficiency = self.efficiency.unwrap_or(DEFAULT_EFFICIENCY);
        let dark = match (self.dark, self.target_visibility) {
            (Some(d), _) => d,
            (None, Some(v)) => dark_for_visibility(efficiency, v)?,
            (None, None) => base.dark_probability[0],
        };
        let model = DetectionModel::uniform(efficiency, dark, self.seed);
        model.validate()?;
        Ok(model)
    }
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, default_value = "hv")]
    basis: AnalysisBasis,
    #[arg(long, default_value = "entangled")]
    input: InputKind,
    /// θ grid in radians, start:stop:steps.
    #[arg(long, default_value = "0:6.283185307179586:25")]
    theta: GridSpec,
    /// α grid in degrees, start:stop:steps.
    #[arg(long, default_value = "0:90:13")]
    alpha: GridSpec,
    #[arg(long, default_value = "H-A")]
    category: CoincidenceCategory,
    #[arg(long, value_enum, default_value = "qdc")]
    preset: PresetArg,
    /// Shots per grid point; exact probabilities when absent.
    #[arg(long)]
    shots: Option<u64>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct BellArgs {
    #[arg(long, default_value = "entangled")]
    input: InputKind,
    /// Total shots over both phase scans.
    #[arg(long, default_value_t = 1_000_000)]
    shots: u64,
    /// Exact visibilities instead of sampling.
    #[arg(long)]
    analytic: bool,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct CausalityArgs {
    /// Distance between the two detection events, metres.
    #[arg(long, default_value_t = DEFAULT_DELTA_X_M, allow_negative_numbers = true)]
    delta_x: f64,
    /// Delay of the corroborative detection after the test detection, ns.
    #[arg(long, default_value_t = DEFAULT_DELTA_T_NS, allow_negative_numbers = true)]
    delta_t: f64,
    /// Also report the transit time through this much fiber, metres.
    #[arg(long)]
    fiber_length: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_FIBER_INDEX)]
    refractive_index: f64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Points per axis of the closed-form comparison grid.
    #[arg(long, default_value_t = 25)]
    grid: usize,
    /// Build every beam-splitter with the real Hadamard matrix. The checks
    /// are expected to fail.
    #[arg(long)]
    wrong_bs_convention: bool,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidGrid(_)
            | Error::InvalidProbability { .. }
            | Error::ZeroShots
            | Error::Parse(_)
            | Error::AngleOutOfRange(_)
            | Error::NegativeLength(_)
            | Error::InvalidScan(_)
            | Error::SurfaceMismatch(_)
            | Error::ThreadPool(_) => CliError::Validation(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn emit(out: &OutputArgs, body: &str) -> CliResult {
    match &out.output {
        Some(path) => {
            std::fs::write(path, body).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body.as_bytes())
                .map_err(|e| CliError::Runtime(e.to_string()))
        }
    }
}

fn to_json(v: &impl serde::Serialize) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn rate_note(valid: u64) -> String {
    format!(
        "{valid} valid coincidences ≈ {:.1} s of acquisition at {COINCIDENCES_PER_SECOND} coincidences/s per group",
        valid as f64 / COINCIDENCES_PER_SECOND
    )
}

fn cmd_sweep(args: &SweepArgs) -> CliResult {
    args.theta.validate()?;
    args.alpha.validate()?;
    let format = args.out.format.unwrap_or(Format::Csv);
    let preset = Preset::from(args.preset);
    if preset != Preset::Qdc {
        if args.shots.is_some() {
            return Err(CliError::Validation(
                "Mach-Zehnder presets are exact only; drop --shots".into(),
            ));
        }
        let closed = preset == Preset::ClosedMzi;
        let mut rows = Vec::new();
        for theta in args.theta.values() {
            let [pa, pb] = mach_zehnder::<f64>(theta, closed)?;
            rows.push((theta, pa, pb));
        }
        let body = match format {
            Format::Csv => {
                let mut s = String::from("theta_rad,p_da,p_db\n");
                for (t, a, b) in &rows {
                    let _ = writeln!(s, "{t},{a},{b}");
                }
                s
            }
            Format::Json => to_json(&json!({
                "preset": if closed { "closed-mzi" } else { "open-mzi" },
                "points": rows.iter().map(|(t, a, b)| json!({"theta_rad": t, "p_da": a, "p_db": b})).collect::<Vec<_>>(),
            }))?,
        };
        emit(&args.out, &body)?;
        eprintln!(
            "sweep: {} points, {} preset",
            rows.len(),
            if closed { "closed-mzi" } else { "open-mzi" }
        );
        return Ok(());
    }

    let (surface, extra) = match args.shots {
        None => (
            analytic_surface(&args.theta, &args.alpha, args.basis, args.input, args.category)?,
            None,
        ),
        Some(shots) => {
            if shots == 0 {
                return Err(Error::ZeroShots.into());
            }
            let model = args.model.model()?;
            let settings: Vec<ExperimentSettings> = grid_points(&args.theta, &args.alpha)
                .into_iter()
                .map(|(t, a)| ExperimentSettings::new(t, a).basis(args.basis).input(args.input))
                .collect();
            let tables = run_grid(&settings, &model, shots)?;
            let valid: u64 = tables.iter().map(|t| t.valid()).sum();
            let discarded: u64 = tables.iter().map(|t| t.discarded()).sum();
            (
                surface_from_counts(&tables, args.category)?,
                Some((model, valid, discarded)),
            )
        }
    };
    let body = match format {
        Format::Csv => surface.to_csv(),
        Format::Json => to_json(&json!({
            "surface": surface,
            "shotsPerPoint": args.shots,
            "model": extra.map(|e| e.0),
            "seed": extra.map(|e| e.0.seed),
        }))?,
    };
    emit(&args.out, &body)?;
    eprintln!(
        "sweep: {} points, {} basis, {} input, {}: min {:.6}, max {:.6}",
        surface.points.len(),
        args.basis,
        args.input,
        args.category,
        surface.min().unwrap_or(f64::NAN),
        surface.max().unwrap_or(f64::NAN)
    );
    if let Some((model, valid, discarded)) = extra {
        eprintln!(
            "seed {}; {discarded} windows discarded; {}",
            model.seed,
            rate_note(valid)
        );
    }
    Ok(())
}

fn cmd_bell(args: &BellArgs) -> CliResult {
    let (run, model): (BellRun, Option<DetectionModel>) = if args.analytic {
        (analytic_bell(args.input, BELL_SCAN_STEPS)?, None)
    } else {
        let model = args.model.model()?;
        (
            simulate_bell(args.input, &model, args.shots, BELL_SCAN_STEPS)?,
            Some(model),
        )
    };
    let sigmas = classical_bound_violation(run.bell.s, run.bell.uncertainty).ok();
    let report = json!({
        "input": args.input,
        "vHV": run.v_hv,
        "vDA": run.v_da,
        "S": run.bell.s,
        "uncertainty": run.bell.uncertainty,
        "sigmasAboveClassical": sigmas,
        "shotsPerPoint": run.shots_per_point,
        "model": model,
        "seed": model.map(|m| m.seed),
    });
    let body = match args.out.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report)?,
        Format::Csv => format!(
            "basis,alpha_deg,visibility,uncertainty\nhv,90,{},{}\nda,45,{},{}\n",
            run.v_hv.value, run.v_hv.uncertainty, run.v_da.value, run.v_da.uncertainty
        ),
    };
    emit(&args.out, &body)?;
    let sig = sigmas.map_or_else(|| "exact".to_string(), |s| format!("{s:.1}σ from 2"));
    eprintln!(
        "S = {:.4} ± {:.4} ({sig}); V_HV = {:.4}, V_DA = {:.4}",
        run.bell.s, run.bell.uncertainty, run.v_hv.value, run.v_da.value
    );
    if let Some(m) = model {
        eprintln!("seed {}; {} shots per point", m.seed, run.shots_per_point.unwrap_or(0));
    }
    Ok(())
}

fn cmd_causality(args: &CausalityArgs) -> CliResult {
    let report = CausalityReport::from_separation(args.delta_x, args.delta_t)?;
    let body = match args.out.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report)?,
        Format::Csv => format!(
            "c_delta_t_m,delta_x_m,spacelike\n{},{},{}\n",
            report.c_delta_t_m, report.delta_x_m, report.spacelike
        ),
    };
    emit(&args.out, &body)?;
    eprintln!(
        "c·Δt = {:.3} m vs Δx = {:.3} m: {}",
        report.c_delta_t_m,
        report.delta_x_m,
        if report.spacelike {
            "space-like"
        } else {
            "not space-like"
        }
    );
    if let Some(len) = args.fiber_length {
        eprintln!(
            "{len} m of fiber at n = {}: {:.2} ns",
            args.refractive_index,
            propagation_delay(len, args.refractive_index)?
        );
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> CliResult {
    if args.grid < 2 {
        return Err(CliError::Validation("--grid needs at least 2 points per axis".into()));
    }
    let convention = if args.wrong_bs_convention {
        BsConvention::Hadamard
    } else {
        BsConvention::Symmetric
    };
    let report = run_all(convention, args.grid)?;
    let body = match args.out.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut s = String::from("check,deviation,threshold,passed\n");
            for c in &report.checks {
                let _ = writeln!(s, "{},{:e},{:e},{}", c.name, c.deviation, c.threshold, c.passed);
            }
            s
        }
    };
    emit(&args.out, &body)?;
    for c in &report.checks {
        eprintln!(
            "{} {:<44} {:.3e} (≤ {:.0e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.deviation,
            c.threshold
        );
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Runtime("self-check failed".into()))
    }
}

fn configure_threads() -> CliResult {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Validation(format!("{THREADS_ENV}={raw} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))
}

fn run(cli: &Cli) -> CliResult {
    configure_threads()?;
    match &cli.command {
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bell(a) => cmd_bell(a),
        Command::Causality(a) => cmd_causality(a),
        Command::Verify(a) => cmd_verify(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Validation(msg) | CliError::Runtime(msg)) = &e;
            eprintln!("error: {msg}");
            ExitCode::from(e.code())
        }
    }
}
