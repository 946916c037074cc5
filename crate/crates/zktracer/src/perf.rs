//! Cycle-approximate performance and energy model of the trace generator.
//!
//! Two organisations of the same work are modeled. In the **pipelined**
//! organisation the emulation unit streams rows through an on-chip buffer
//! straight into the permutation unit, and main-trace and permutation-trace
//! writes share the DRAM interface; total time is the slowest of the three
//! streams plus one latency exposure and one pipeline fill. In the
//! **sequential** organisation (the ablation baseline) the main trace is
//! fully written out, read back, and only then fingerprinted, so every stage
//! pays its own latency and the main trace crosses the DRAM interface twice
//! more.
//!
//! The model is deliberately coarse — whole-run throughput arithmetic, not
//! per-cycle simulation — but it is exact about byte volumes, which is where
//! the two organisations differ. An energy proxy charges a fixed core power
//! over the run plus a per-byte DRAM cost.
//!
//! The design-space sweep varies the number of permutation lanes and reports
//! the knee: the smallest lane count beyond which adding lanes no longer
//! buys a meaningful cycle reduction, because the emulation side has become
//! the bottleneck.

use crate::trace::MainTrace;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BYTES_PER_CELL: u64 = 4;
pub const PERM_COLS: u64 = 2;
/// Relative cycle improvement below which an extra permutation lane is
/// considered wasted by the sweep.
pub const KNEE_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PerfError {
    #[error("{field} must be positive and finite")]
    NonPositive { field: &'static str },
    #[error("{field} must be at least 1")]
    TooSmall { field: &'static str },
    #[error("lane sweep range {lo}..={hi} is empty")]
    EmptyRange { lo: u32, hi: u32 },
}

/// Which organisation to model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerfMode {
    #[default]
    Pipelined,
    Sequential,
}

impl std::fmt::Display for PerfMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PerfMode::Pipelined => write!(f, "pipelined"),
            PerfMode::Sequential => write!(f, "sequential"),
        }
    }
}

fn default_mtu_rate() -> f64 {
    1.0
}
fn default_buffer_depth() -> u64 {
    64
}
fn default_ptu_units() -> u32 {
    4
}
fn default_ptu_rate() -> f64 {
    1.0
}
fn default_dram_latency() -> u64 {
    100
}
fn default_dram_bw() -> f64 {
    16.0
}
fn default_core_power() -> f64 {
    51.167
}
fn default_dram_pj() -> f64 {
    20.0
}
fn default_clock() -> f64 {
    100.0
}

/// Model parameters. Every field has a default, so a TOML config may set
/// only the knobs it cares about; unknown keys are rejected to catch typos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerfConfig {
    /// Rows the emulation unit retires per cycle.
    pub mtu_rows_per_cycle: f64,
    /// Depth of the on-chip row buffer between the units. The whole-run
    /// throughput model never stalls on it (a full buffer only re-times
    /// work already accounted to the slower unit), but it is validated and
    /// reported as part of the configuration.
    pub buffer_depth_rows: u64,
    /// Parallel permutation lanes.
    pub ptu_units: u32,
    /// Rows each lane fingerprints per cycle once full.
    pub ptu_rows_per_cycle_per_unit: f64,
    /// Cycles to fill the fingerprint pipeline before the first row
    /// completes. Defaults to the widest table's column count — one
    /// multiply-accumulate stage per column.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ptu_pipeline_fill_cycles: Option<u64>,
    /// Cycles of DRAM latency exposed per dependent access phase.
    pub dram_latency_cycles: u64,
    /// DRAM bandwidth in bytes per cycle, shared by all traffic.
    pub dram_bytes_per_cycle: f64,
    /// Core power in milliwatts, charged for every cycle of the run.
    pub core_power_mw: f64,
    /// DRAM transfer energy in picojoules per byte.
    pub dram_pj_per_byte: f64,
    /// Clock in MHz; converts cycles to time and power to energy.
    pub clock_mhz: f64,
    /// Organisation modeled by [`model_run`].
    pub mode: PerfMode,
}

impl Default for PerfConfig {
    fn default() -> Self {
        PerfConfig {
            mtu_rows_per_cycle: default_mtu_rate(),
            buffer_depth_rows: default_buffer_depth(),
            ptu_units: default_ptu_units(),
            ptu_rows_per_cycle_per_unit: default_ptu_rate(),
            ptu_pipeline_fill_cycles: None,
            dram_latency_cycles: default_dram_latency(),
            dram_bytes_per_cycle: default_dram_bw(),
            core_power_mw: default_core_power(),
            dram_pj_per_byte: default_dram_pj(),
            clock_mhz: default_clock(),
            mode: PerfMode::Pipelined,
        }
    }
}

impl PerfConfig {
    /// Checks every knob, naming the first bad field.
    pub fn validate(&self) -> Result<(), PerfError> {
        fn positive(v: f64, field: &'static str) -> Result<(), PerfError> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(PerfError::NonPositive { field })
            }
        }
        fn non_negative(v: f64, field: &'static str) -> Result<(), PerfError> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(PerfError::NonPositive { field })
            }
        }
        positive(self.mtu_rows_per_cycle, "mtu_rows_per_cycle")?;
        if self.buffer_depth_rows < 1 {
            return Err(PerfError::TooSmall {
                field: "buffer_depth_rows",
            });
        }
        if self.ptu_units < 1 {
            return Err(PerfError::TooSmall { field: "ptu_units" });
        }
        positive(self.ptu_rows_per_cycle_per_unit, "ptu_rows_per_cycle_per_unit")?;
        positive(self.dram_bytes_per_cycle, "dram_bytes_per_cycle")?;
        non_negative(self.core_power_mw, "core_power_mw")?;
        non_negative(self.dram_pj_per_byte, "dram_pj_per_byte")?;
        positive(self.clock_mhz, "clock_mhz")?;
        Ok(())
    }

    /// Parses a TOML config; fields not present keep their defaults.
    pub fn from_toml(text: &str) -> Result<PerfConfig, toml::de::Error> {
        toml::from_str(text)
    }
}

/// Row and column counts of one table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TableShape {
    pub rows: u64,
    pub cols: u64,
}

/// The workload as the model sees it: table dimensions only. Cell values
/// never affect timing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceShape {
    pub tables: Vec<TableShape>,
}

impl TraceShape {
    pub fn of_trace(trace: &MainTrace) -> TraceShape {
        TraceShape {
            tables: trace
                .tables()
                .iter()
                .map(|t| TableShape {
                    rows: t.num_rows() as u64,
                    cols: t.num_cols() as u64,
                })
                .collect(),
        }
    }

    /// A single synthetic table, as produced by a `ROWSxCOLS` shape argument.
    pub fn synthetic(rows: u64, cols: u64) -> TraceShape {
        TraceShape {
            tables: vec![TableShape { rows, cols }],
        }
    }

    pub fn total_rows(&self) -> u64 {
        self.tables.iter().map(|t| t.rows).sum()
    }

    /// Main-trace footprint: 4 bytes per cell.
    pub fn bytes_main(&self) -> u64 {
        self.tables
            .iter()
            .map(|t| t.rows * t.cols * BYTES_PER_CELL)
            .sum()
    }

    /// Permutation-trace footprint: two columns per table.
    pub fn bytes_perm(&self) -> u64 {
        self.tables
            .iter()
            .map(|t| t.rows * PERM_COLS * BYTES_PER_CELL)
            .sum()
    }

    pub fn widest_cols(&self) -> u64 {
        self.tables.iter().map(|t| t.cols).max().unwrap_or(0)
    }
}

/// The modeled outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerfReport {
    pub mode: PerfMode,
    pub total_cycles: u64,
    /// Cycles the emulation unit needs for its rows.
    pub mtu_cycles: u64,
    /// Cycles the permutation lanes are busy fingerprinting.
    pub ptu_cycles: u64,
    /// Resolved fingerprint-pipeline fill.
    pub pipeline_fill_cycles: u64,
    /// Cycles in which neither unit retires rows: DRAM latency plus any
    /// bandwidth overhang.
    pub stall_cycles: u64,
    pub dram_bytes_written: u64,
    pub dram_bytes_read: u64,
    /// Core energy plus DRAM transfer energy, in millijoules.
    pub energy_mj: f64,
    /// Run time at the configured clock, in microseconds.
    pub wall_time_us: f64,
    /// The configuration the numbers were produced under.
    pub config: PerfConfig,
}

fn cycles_for(amount: u64, per_cycle: f64) -> u64 {
    if amount == 0 {
        0
    } else {
        (amount as f64 / per_cycle).ceil() as u64
    }
}

fn energy_mj(cycles: u64, bytes: u64, config: &PerfConfig) -> f64 {
    let core_joules = cycles as f64 * (config.core_power_mw * 1e-3) / (config.clock_mhz * 1e6);
    let dram_joules = bytes as f64 * config.dram_pj_per_byte * 1e-12;
    (core_joules + dram_joules) * 1e3
}

/// Models one run of the configured organisation over the given shape.
pub fn model_run(shape: &TraceShape, config: &PerfConfig) -> Result<PerfReport, PerfError> {
    config.validate()?;
    let rows = shape.total_rows();
    let bytes_main = shape.bytes_main();
    let bytes_perm = shape.bytes_perm();
    let mtu_cycles = cycles_for(rows, config.mtu_rows_per_cycle);
    let ptu_cycles = cycles_for(
        rows,
        config.ptu_units as f64 * config.ptu_rows_per_cycle_per_unit,
    );
    let fill = if rows == 0 {
        0
    } else {
        config
            .ptu_pipeline_fill_cycles
            .unwrap_or_else(|| shape.widest_cols())
    };
    let lat = config.dram_latency_cycles;
    let bw = config.dram_bytes_per_cycle;

    let (total_cycles, stall_cycles, written, read) = match config.mode {
        PerfMode::Pipelined => {
            // One shared write stream; the run is bounded by its slowest
            // member, after one latency exposure and the pipeline fill.
            let write_cycles = cycles_for(bytes_main + bytes_perm, bw);
            let lat_term = if bytes_main + bytes_perm > 0 { lat } else { 0 };
            let compute = mtu_cycles.max(ptu_cycles);
            let total = lat_term + fill + compute.max(write_cycles);
            (
                total,
                total - compute - fill,
                bytes_main + bytes_perm,
                0,
            )
        }
        PerfMode::Sequential => {
            // Emulate and spill; read the spill back; fingerprint and spill
            // again. Each phase waits out its own DRAM latency.
            let wr_main = cycles_for(bytes_main, bw);
            let rd_main = cycles_for(bytes_main, bw);
            let wr_perm = cycles_for(bytes_perm, bw);
            let lat_main = if bytes_main > 0 { lat } else { 0 };
            let lat_perm = if bytes_perm > 0 { lat } else { 0 };
            let emit = mtu_cycles + lat_main + wr_main;
            let readback = lat_main + rd_main;
            let fingerprint = fill + ptu_cycles + lat_perm + wr_perm;
            let total = emit + readback + fingerprint;
            (
                total,
                total - mtu_cycles - ptu_cycles - fill,
                bytes_main + bytes_perm,
                bytes_main,
            )
        }
    };

    Ok(PerfReport {
        mode: config.mode,
        total_cycles,
        mtu_cycles,
        ptu_cycles,
        pipeline_fill_cycles: fill,
        stall_cycles,
        dram_bytes_written: written,
        dram_bytes_read: read,
        energy_mj: energy_mj(total_cycles, written + read, config),
        wall_time_us: total_cycles as f64 / config.clock_mhz,
        config: config.clone(),
    })
}

/// Both organisations over the same shape and knobs, with the headline
/// ratios.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationReport {
    pub pipelined: PerfReport,
    pub sequential: PerfReport,
    /// `sequential.total_cycles / pipelined.total_cycles`.
    pub speedup: f64,
    /// `1 − pipelined.energy / sequential.energy`.
    pub energy_reduction_fraction: f64,
}

/// Runs the pipelined and sequential models side by side.
pub fn ablation(shape: &TraceShape, config: &PerfConfig) -> Result<AblationReport, PerfError> {
    let mut pipelined_config = config.clone();
    pipelined_config.mode = PerfMode::Pipelined;
    let mut sequential_config = config.clone();
    sequential_config.mode = PerfMode::Sequential;
    let pipelined = model_run(shape, &pipelined_config)?;
    let sequential = model_run(shape, &sequential_config)?;
    let speedup = if pipelined.total_cycles == 0 {
        1.0
    } else {
        sequential.total_cycles as f64 / pipelined.total_cycles as f64
    };
    let energy_reduction_fraction = if sequential.energy_mj == 0.0 {
        0.0
    } else {
        1.0 - pipelined.energy_mj / sequential.energy_mj
    };
    Ok(AblationReport {
        pipelined,
        sequential,
        speedup,
        energy_reduction_fraction,
    })
}

/// One point of the lane sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DsePoint {
    pub units: u32,
    pub total_cycles: u64,
}

/// The lane sweep and its knee.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DseReport {
    pub points: Vec<DsePoint>,
    /// Smallest lane count after which the next point improves total cycles
    /// by less than [`KNEE_THRESHOLD`]; the last swept count if every step
    /// still pays off.
    pub knee_units: u32,
}

/// Sweeps `ptu_units` over `lo..=hi` in the pipelined organisation.
pub fn dse_sweep(
    shape: &TraceShape,
    config: &PerfConfig,
    lo: u32,
    hi: u32,
) -> Result<DseReport, PerfError> {
    if lo > hi || lo == 0 {
        return Err(PerfError::EmptyRange { lo, hi });
    }
    let mut points = Vec::with_capacity((hi - lo + 1) as usize);
    for units in lo..=hi {
        let mut c = config.clone();
        c.ptu_units = units;
        c.mode = PerfMode::Pipelined;
        let report = model_run(shape, &c)?;
        points.push(DsePoint {
            units,
            total_cycles: report.total_cycles,
        });
    }
    let mut knee_units = points.last().unwrap().units;
    for pair in points.windows(2) {
        let (prev, cur) = (pair[0], pair[1]);
        let improvement = if prev.total_cycles == 0 {
            0.0
        } else {
            (prev.total_cycles.saturating_sub(cur.total_cycles)) as f64
                / prev.total_cycles as f64
        };
        if improvement < KNEE_THRESHOLD {
            knee_units = prev.units;
            break;
        }
    }
    Ok(DseReport { points, knee_units })
}

/// Renders a sweep as CSV with a `units,cycles` header.
pub fn dse_csv(report: &DseReport) -> String {
    let mut out = String::from("units,cycles\n");
    for p in &report.points {
        out.push_str(&format!("{},{}\n", p.units, p.total_cycles));
    }
    out
}
