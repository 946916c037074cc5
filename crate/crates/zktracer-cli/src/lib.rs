//! Command-line front end for the trace generator: run a guest and emit its
//! traces, verify a permutation trace against its main trace, and run the
//! performance model and lane sweep.
//!
//! Every command is deterministic for a fixed invocation — identical bytes
//! on disk, identical reports on stdout. All randomized behavior flows from
//! one seed, resolved as `--seed`, then the `ZKTRACER_SEED` environment
//! variable, then 0.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use zktracer::mtu::{Fault, GuestLoadError, MachineConfig, Termination, load_guest_image};
use zktracer::perf::{
    AblationReport, DseReport, PerfConfig, PerfError, PerfReport, TraceShape, ablation, dse_csv,
    dse_sweep, model_run,
};
use zktracer::ptu::{
    DEFAULT_CHUNK_WIDTH, MAX_CHUNK_WIDTH, PermutationTrace, PtuError, VerifyFailure,
    build_permutation_trace, derive_challenges, verify_permutation_trace,
};
use zktracer::trace::{MainTrace, TableId, TraceFileError, deserialize_trace, serialize_trace};

/// Environment fallback for the challenge seed.
pub const SEED_ENV_VAR: &str = "ZKTRACER_SEED";
/// Attempts at collision-free challenges before giving up.
pub const MAX_SEED_ATTEMPTS: u64 = 3;

/// Stable process exit codes; no failure path exits 0.
pub mod exit_codes {
    pub const OK: i32 = 0;
    /// The guest trapped (illegal instruction, bad access, ebreak, …).
    pub const GUEST_FAULT: i32 = 10;
    /// The guest did not halt within the step budget.
    pub const STEP_LIMIT: i32 = 11;
    /// No collision-free challenges found within the retry budget.
    pub const ZERO_FINGERPRINT: i32 = 12;
    /// A file could not be read or written.
    pub const IO: i32 = 13;
    /// An input file (guest image, trace container, sidecar) is malformed.
    pub const FORMAT: i32 = 14;
    /// A permutation-trace identity does not hold.
    pub const VERIFY_FAILED: i32 = 15;
    /// A flag or configuration value is out of range.
    pub const CONFIG: i32 = 16;
}

#[derive(Debug, Parser)]
#[command(
    name = "zktracer",
    version,
    about = "Trace generator, permutation pipeline, and performance model"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a guest and write main.zktr, perm.zktr, and run.toml.
    Trace(TraceArgs),
    /// Check a permutation trace against its main trace.
    Verify(VerifyArgs),
    /// Model cycles and energy for a trace or synthetic shape.
    Perf(PerfArgs),
    /// Sweep permutation lane counts and report the knee.
    Dse(DseArgs),
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Guest program: flat RV32IM image or 32-bit RISC-V ELF.
    #[arg(long)]
    pub guest: PathBuf,
    /// Load address of a flat image (ignored for ELF). Accepts 0x-hex.
    #[arg(long, default_value = "0", value_parser = parse_u32_flex)]
    pub base: u32,
    /// Entry point of a flat image (ignored for ELF); defaults to the base.
    #[arg(long, value_parser = parse_u32_flex)]
    pub entry: Option<u32>,
    /// Step budget before the run is abandoned.
    #[arg(long, default_value_t = 10_000_000)]
    pub max_steps: u64,
    /// Challenge seed. Falls back to ZKTRACER_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Column-chunk width of the fingerprint datapath.
    #[arg(long, default_value_t = DEFAULT_CHUNK_WIDTH)]
    pub chunk_width: usize,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Main trace container.
    #[arg(long = "main", value_name = "FILE")]
    pub main_path: PathBuf,
    /// Permutation trace container.
    #[arg(long = "perm", value_name = "FILE")]
    pub perm_path: PathBuf,
    /// Run sidecar carrying the challenge seed; defaults to run.toml next
    /// to the main trace.
    #[arg(long, value_name = "FILE")]
    pub sidecar: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PerfArgs {
    /// Synthetic single-table workload, e.g. 4096x8.
    #[arg(long, value_name = "ROWSxCOLS", value_parser = parse_shape, conflicts_with = "main_path")]
    pub shape: Option<ShapeArg>,
    /// Take the workload shape from a main trace container.
    #[arg(long = "main", value_name = "FILE")]
    pub main_path: Option<PathBuf>,
    /// TOML file overriding model defaults.
    #[arg(long, value_name = "FILE")]
    pub perf_config: Option<PathBuf>,
    /// Model both organisations and report speedup and energy delta.
    #[arg(long)]
    pub ablation: bool,
    /// Sweep permutation lanes over an inclusive range, e.g. 1..32.
    #[arg(long, value_name = "A..B", value_parser = parse_units_range)]
    pub dse: Option<UnitsRange>,
    /// Write the sweep CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DseArgs {
    /// Inclusive lane range to sweep, e.g. 1..32.
    #[arg(value_name = "A..B", value_parser = parse_units_range)]
    pub units: UnitsRange,
    /// Synthetic single-table workload, e.g. 4096x8.
    #[arg(long, value_name = "ROWSxCOLS", value_parser = parse_shape, conflicts_with = "main_path")]
    pub shape: Option<ShapeArg>,
    /// Take the workload shape from a main trace container.
    #[arg(long = "main", value_name = "FILE")]
    pub main_path: Option<PathBuf>,
    /// TOML file overriding model defaults.
    #[arg(long, value_name = "FILE")]
    pub perf_config: Option<PathBuf>,
    /// Write the sweep CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeArg {
    pub rows: u64,
    pub cols: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitsRange {
    pub lo: u32,
    pub hi: u32,
}

fn parse_u32_flex(s: &str) -> Result<u32, String> {
    let s = s.trim();
    let parsed = if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        u32::from_str_radix(hex, 16)
    } else {
        s.parse()
    };
    parsed.map_err(|_| format!("'{s}' is not a 32-bit address"))
}

fn parse_shape(s: &str) -> Result<ShapeArg, String> {
    let lower = s.trim().to_ascii_lowercase();
    let (rows, cols) = lower
        .split_once('x')
        .ok_or_else(|| format!("'{s}' is not of the form ROWSxCOLS, e.g. 4096x8"))?;
    let rows = rows
        .parse()
        .map_err(|_| format!("'{rows}' is not a row count"))?;
    let cols = cols
        .parse()
        .map_err(|_| format!("'{cols}' is not a column count"))?;
    Ok(ShapeArg { rows, cols })
}

fn parse_units_range(s: &str) -> Result<UnitsRange, String> {
    let (lo, hi) = s
        .trim()
        .split_once("..")
        .ok_or_else(|| format!("'{s}' is not of the form A..B, e.g. 1..32"))?;
    let lo = lo
        .parse()
        .map_err(|_| format!("'{lo}' is not a lane count"))?;
    let hi = hi
        .parse()
        .map_err(|_| format!("'{hi}' is not a lane count"))?;
    Ok(UnitsRange { lo, hi })
}

/// The run sidecar written next to the trace containers. Carries everything
/// a later `verify` needs (most importantly the effective challenge seed)
/// plus the headline run facts; deliberately free of timestamps and
/// absolute paths so reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub run: RunSection,
    pub rows: RowsSection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Guest file stem, not a path.
    pub program: String,
    pub base: u32,
    pub entry: u32,
    pub exit_code: u32,
    pub instructions_executed: u64,
    /// The seed the challenges were actually derived from, retries included.
    pub challenge_seed: u64,
    pub chunk_width: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowsSection {
    pub cpu: u64,
    pub alu: u64,
    pub mem: u64,
    pub prog: u64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("guest image: {0}")]
    Guest(#[from] GuestLoadError),
    #[error("trace file: {0}")]
    TraceFile(#[from] TraceFileError),
    #[error("permutation file: {0}")]
    PermFile(PtuError),
    #[error("sidecar {}: {source}", path.display())]
    Sidecar {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("guest faulted: {0}")]
    GuestFault(Fault),
    #[error("guest did not halt within {max_steps} steps")]
    StepLimit { max_steps: u64 },
    #[error("no collision-free challenges in {attempts} attempts; last error: {source}")]
    ZeroFingerprint { attempts: u64, source: PtuError },
    #[error("verification failed: {0}")]
    VerifyFailed(#[from] VerifyFailure),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => exit_codes::IO,
            CliError::Guest(_)
            | CliError::TraceFile(_)
            | CliError::PermFile(_)
            | CliError::Sidecar { .. } => exit_codes::FORMAT,
            CliError::GuestFault(_) => exit_codes::GUEST_FAULT,
            CliError::StepLimit { .. } => exit_codes::STEP_LIMIT,
            CliError::ZeroFingerprint { .. } => exit_codes::ZERO_FINGERPRINT,
            CliError::VerifyFailed(_) => exit_codes::VERIFY_FAILED,
            CliError::Config(_) => exit_codes::CONFIG,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn config_err(e: PerfError) -> CliError {
    CliError::Config(e.to_string())
}

/// Runs a parsed command line and returns the process exit code, printing
/// any error to stderr.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Trace(args) => cmd_trace(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Perf(args) => cmd_perf(args),
        Command::Dse(args) => cmd_dse(args),
    };
    match result {
        Ok(()) => exit_codes::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// `--seed`, then `ZKTRACER_SEED`, then 0.
fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV_VAR) {
        Ok(text) => text.trim().parse().map_err(|_| {
            CliError::Config(format!(
                "{SEED_ENV_VAR} must be an unsigned 64-bit integer, got '{text}'"
            ))
        }),
        Err(_) => Ok(0),
    }
}

fn cmd_trace(args: &TraceArgs) -> Result<(), CliError> {
    if args.chunk_width == 0 || args.chunk_width > MAX_CHUNK_WIDTH {
        return Err(CliError::Config(format!(
            "--chunk-width must be between 1 and {MAX_CHUNK_WIDTH}"
        )));
    }
    let seed = resolve_seed(args.seed)?;
    let bytes = fs::read(&args.guest).map_err(io_err(&args.guest))?;
    let program_name = args
        .guest
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "guest".to_string());
    let config = MachineConfig {
        program_name: program_name.clone(),
        ..MachineConfig::default()
    };
    let entry = args.entry.unwrap_or(args.base);
    let mut machine = load_guest_image(&bytes, args.base, entry, config)?;
    let loaded_base = args.base;
    let loaded_entry = machine.pc();
    let result = machine.run(args.max_steps);
    let exit_code = match result.termination {
        Termination::Exited(code) => code,
        Termination::Faulted(fault) => return Err(CliError::GuestFault(fault)),
        Termination::StepLimit => {
            return Err(CliError::StepLimit {
                max_steps: args.max_steps,
            });
        }
    };
    let trace = machine.into_trace();

    // Challenges colliding with the data is recoverable: walk the seed
    // forward a bounded number of times.
    let mut effective_seed = seed;
    let mut attempts = 0u64;
    let perm = loop {
        attempts += 1;
        match build_permutation_trace(&trace, effective_seed, args.chunk_width) {
            Ok(p) => break p,
            Err(e @ PtuError::TableZeroFingerprint { .. }) => {
                if attempts >= MAX_SEED_ATTEMPTS {
                    return Err(CliError::ZeroFingerprint {
                        attempts,
                        source: e,
                    });
                }
                eprintln!(
                    "warning: {e}; retrying with seed {}",
                    effective_seed + 1
                );
                effective_seed += 1;
            }
            Err(e) => return Err(CliError::PermFile(e)),
        }
    };

    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let main_path = args.out.join("main.zktr");
    let perm_path = args.out.join("perm.zktr");
    let sidecar_path = args.out.join("run.toml");

    let main_bytes = serialize_trace(&trace);
    fs::write(&main_path, &main_bytes).map_err(io_err(&main_path))?;
    let perm_bytes = perm.serialize();
    fs::write(&perm_path, &perm_bytes).map_err(io_err(&perm_path))?;

    let counts = trace.row_counts();
    let sidecar = Sidecar {
        run: RunSection {
            program: program_name.clone(),
            base: loaded_base,
            entry: loaded_entry,
            exit_code,
            instructions_executed: trace.meta.instructions_executed,
            challenge_seed: effective_seed,
            chunk_width: args.chunk_width,
        },
        rows: RowsSection {
            cpu: counts[0].1 as u64,
            alu: counts[1].1 as u64,
            mem: counts[2].1 as u64,
            prog: counts[3].1 as u64,
        },
    };
    let sidecar_text = toml::to_string_pretty(&sidecar)
        .expect("sidecar always serializes");
    fs::write(&sidecar_path, &sidecar_text).map_err(io_err(&sidecar_path))?;

    println!(
        "guest '{program_name}' exited with code {exit_code} after {} instructions",
        trace.meta.instructions_executed
    );
    let row_line = counts
        .iter()
        .map(|(id, n)| format!("{id}={n}"))
        .collect::<Vec<_>>()
        .join(" ");
    println!("rows: {row_line}");
    println!("challenge seed {effective_seed}, chunk width {}", args.chunk_width);
    println!("wrote {} ({} bytes)", main_path.display(), main_bytes.len());
    println!("wrote {} ({} bytes)", perm_path.display(), perm_bytes.len());
    println!("wrote {}", sidecar_path.display());
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    let main_bytes = fs::read(&args.main_path).map_err(io_err(&args.main_path))?;
    let main_trace = deserialize_trace(&main_bytes)?;

    let sidecar_path = args
        .sidecar
        .clone()
        .unwrap_or_else(|| args.main_path.with_file_name("run.toml"));
    let sidecar_text = fs::read_to_string(&sidecar_path).map_err(io_err(&sidecar_path))?;
    let sidecar: Sidecar = toml::from_str(&sidecar_text).map_err(|source| CliError::Sidecar {
        path: sidecar_path.clone(),
        source,
    })?;

    let perm_bytes = fs::read(&args.perm_path).map_err(io_err(&args.perm_path))?;
    let perm_tables = zktracer::trace::read_tables(&perm_bytes)?;
    let challenges = derive_challenges(sidecar.run.challenge_seed);
    let perm =
        PermutationTrace::from_tables(perm_tables, challenges).map_err(CliError::PermFile)?;

    verify_permutation_trace(&main_trace, &perm)?;

    for (id, n) in main_trace.row_counts() {
        println!("{id}: {n} rows, identities hold");
    }
    println!(
        "verification passed (seed {})",
        sidecar.run.challenge_seed
    );
    Ok(())
}

fn load_perf_config(path: &Option<PathBuf>) -> Result<PerfConfig, CliError> {
    let config = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            PerfConfig::from_toml(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => PerfConfig::default(),
    };
    config.validate().map_err(config_err)?;
    Ok(config)
}

fn resolve_shape(
    shape: &Option<ShapeArg>,
    main_path: &Option<PathBuf>,
) -> Result<TraceShape, CliError> {
    match (shape, main_path) {
        (Some(s), None) => Ok(TraceShape::synthetic(s.rows, s.cols)),
        (None, Some(p)) => {
            let bytes = fs::read(p).map_err(io_err(p))?;
            let trace = deserialize_trace(&bytes)?;
            Ok(TraceShape::of_trace(&trace))
        }
        _ => Err(CliError::Config(
            "provide a workload: --shape ROWSxCOLS or --main FILE".to_string(),
        )),
    }
}

fn format_report_table(report: &PerfReport) -> String {
    let mut out = String::new();
    let mut row = |k: &str, v: String| {
        let _ = writeln!(out, "  {k:<22} {v}");
    };
    row("mode", report.mode.to_string());
    row("total cycles", report.total_cycles.to_string());
    row("mtu cycles", report.mtu_cycles.to_string());
    row("ptu cycles", report.ptu_cycles.to_string());
    row("pipeline fill", report.pipeline_fill_cycles.to_string());
    row("stall cycles", report.stall_cycles.to_string());
    row("dram bytes written", report.dram_bytes_written.to_string());
    row("dram bytes read", report.dram_bytes_read.to_string());
    row("energy (mJ)", format!("{:.6}", report.energy_mj));
    row("wall time (us)", format!("{:.3}", report.wall_time_us));
    out
}

fn print_report(report: &PerfReport) {
    println!("{}", format_report_table(report));
    let toml_text = toml::to_string_pretty(report).expect("report always serializes");
    println!("{toml_text}");
}

fn print_ablation(report: &AblationReport) {
    println!("pipelined:");
    println!("{}", format_report_table(&report.pipelined));
    println!("sequential:");
    println!("{}", format_report_table(&report.sequential));
    println!("  {:<22} {:.3}x", "speedup", report.speedup);
    println!(
        "  {:<22} {:.1}%",
        "energy reduction",
        report.energy_reduction_fraction * 100.0
    );
    println!();
    let toml_text = toml::to_string_pretty(report).expect("report always serializes");
    println!("{toml_text}");
}

fn run_dse(
    shape: &TraceShape,
    config: &PerfConfig,
    range: UnitsRange,
    out: &Option<PathBuf>,
) -> Result<(), CliError> {
    let report: DseReport = dse_sweep(shape, config, range.lo, range.hi).map_err(config_err)?;
    let csv = dse_csv(&report);
    match out {
        Some(path) => {
            fs::write(path, &csv).map_err(io_err(path))?;
            println!("wrote {} ({} points)", path.display(), report.points.len());
        }
        None => print!("{csv}"),
    }
    println!("# knee: {} units", report.knee_units);
    Ok(())
}

fn cmd_perf(args: &PerfArgs) -> Result<(), CliError> {
    let config = load_perf_config(&args.perf_config)?;
    let shape = resolve_shape(&args.shape, &args.main_path)?;
    if let Some(range) = args.dse {
        return run_dse(&shape, &config, range, &args.out);
    }
    if args.ablation {
        let report = ablation(&shape, &config).map_err(config_err)?;
        print_ablation(&report);
    } else {
        let report = model_run(&shape, &config).map_err(config_err)?;
        print_report(&report);
    }
    Ok(())
}

fn cmd_dse(args: &DseArgs) -> Result<(), CliError> {
    let config = load_perf_config(&args.perf_config)?;
    let shape = resolve_shape(&args.shape, &args.main_path)?;
    run_dse(&shape, &config, args.units, &args.out)
}

/// Table names in sidecar row order, for callers that want to cross-check.
pub fn sidecar_row_counts(sidecar: &Sidecar) -> [(TableId, u64); 4] {
    [
        (TableId::Cpu, sidecar.rows.cpu),
        (TableId::Alu, sidecar.rows.alu),
        (TableId::Mem, sidecar.rows.mem),
        (TableId::Prog, sidecar.rows.prog),
    ]
}

/// Re-runs verification in-process over already-parsed pieces; used by the
/// test suites to cross-check CLI outputs without spawning a process.
pub fn verify_files(
    main_trace: &MainTrace,
    perm: &PermutationTrace,
) -> Result<(), VerifyFailure> {
    verify_permutation_trace(main_trace, perm)
}
