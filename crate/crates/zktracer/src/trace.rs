//! The multi-table main execution trace and its binary serialisation.
//!
//! A guest execution produces four tables — CPU, ALU, MEM and PROG — whose
//! cells are canonical BabyBear elements. The CPU table is the central hub:
//! one row per traced instruction, carrying the program counter, operands,
//! ALU result and memory-access values. The ALU and MEM tables record the
//! corresponding side events, and the PROG table lists the loaded code image.
//! The permutation pipeline later adds a two-column companion table per main
//! table; those use the `*Perm` table ids and the same serialised format.
//!
//! # The `ZKTR` container format
//!
//! All multi-byte integers are little-endian.
//!
//! ```text
//! magic      4 bytes   "ZKTR"
//! version    u32       currently 1
//! table_count u32
//! directory  table_count entries of:
//!     table_id    u32
//!     num_cols    u32
//!     num_rows    u64
//!     byte_offset u64   absolute offset of the table's payload
//! payload    tables laid out contiguously, in directory order, immediately
//!            after the directory; each table is row-major, each cell the
//!            4-byte little-endian canonical value
//! ```
//!
//! Writers always emit the canonical contiguous layout, and readers reject
//! anything else (out-of-order offsets, gaps, overlaps, trailing bytes), so
//! serialisation is deterministic byte-for-byte and round-trips exactly.
//! Guest metadata (program name, entry point, row counts) travels in a
//! human-readable sidecar written by the command-line tool, not in this
//! container, which records table contents only.

use crate::field::{FieldElement, FieldParams};
use thiserror::Error;

pub const TRACE_MAGIC: [u8; 4] = *b"ZKTR";
pub const TRACE_FORMAT_VERSION: u32 = 1;

/// Identifies a table within a trace file: the four main-trace tables plus
/// the four permutation-trace companions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TableId {
    Cpu = 0,
    Alu = 1,
    Mem = 2,
    Prog = 3,
    CpuPerm = 4,
    AluPerm = 5,
    MemPerm = 6,
    ProgPerm = 7,
}

/// The four main-trace tables, in canonical serialisation order.
pub const MAIN_TABLE_IDS: [TableId; 4] = [TableId::Cpu, TableId::Alu, TableId::Mem, TableId::Prog];

/// The four permutation-trace tables, in canonical serialisation order.
pub const PERM_TABLE_IDS: [TableId; 4] = [
    TableId::CpuPerm,
    TableId::AluPerm,
    TableId::MemPerm,
    TableId::ProgPerm,
];

impl TableId {
    /// The id as written to the file directory.
    pub fn wire_id(self) -> u32 {
        self as u32
    }

    pub fn from_wire(value: u32) -> Option<TableId> {
        match value {
            0 => Some(TableId::Cpu),
            1 => Some(TableId::Alu),
            2 => Some(TableId::Mem),
            3 => Some(TableId::Prog),
            4 => Some(TableId::CpuPerm),
            5 => Some(TableId::AluPerm),
            6 => Some(TableId::MemPerm),
            7 => Some(TableId::ProgPerm),
            _ => None,
        }
    }

    pub fn is_perm(self) -> bool {
        matches!(
            self,
            TableId::CpuPerm | TableId::AluPerm | TableId::MemPerm | TableId::ProgPerm
        )
    }

    /// The permutation companion of a main table (identity on perm tables).
    pub fn perm_of(self) -> TableId {
        match self {
            TableId::Cpu => TableId::CpuPerm,
            TableId::Alu => TableId::AluPerm,
            TableId::Mem => TableId::MemPerm,
            TableId::Prog => TableId::ProgPerm,
            other => other,
        }
    }

    /// The main table a permutation table belongs to (identity on main tables).
    pub fn main_of(self) -> TableId {
        match self {
            TableId::CpuPerm => TableId::Cpu,
            TableId::AluPerm => TableId::Alu,
            TableId::MemPerm => TableId::Mem,
            TableId::ProgPerm => TableId::Prog,
            other => other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TableId::Cpu => "cpu",
            TableId::Alu => "alu",
            TableId::Mem => "mem",
            TableId::Prog => "prog",
            TableId::CpuPerm => "cpu_perm",
            TableId::AluPerm => "alu_perm",
            TableId::MemPerm => "mem_perm",
            TableId::ProgPerm => "prog_perm",
        }
    }
}

impl core::fmt::Display for TableId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Column indices for the documented table layouts.
///
/// Every 32-bit architectural value is stored as a single field element via
/// [`crate::field::fast_mod_red`]; `clk` is the traced-row ordinal (the
/// per-run sequence number of rows appended to the CPU table), not a wall
/// cycle count.
pub mod layout {
    /// CPU table: one row per traced instruction.
    pub mod cpu {
        pub const NUM_COLS: usize = 11;
        pub const CLK: usize = 0;
        pub const PC: usize = 1;
        pub const INSTR_WORD: usize = 2;
        pub const OPCODE_ID: usize = 3;
        pub const RS1_VAL: usize = 4;
        pub const RS2_VAL: usize = 5;
        pub const IMM: usize = 6;
        pub const ALU_RESULT: usize = 7;
        pub const MEM_ADDR: usize = 8;
        pub const MEM_VALUE: usize = 9;
        pub const IS_MEM_WRITE: usize = 10;
    }

    /// ALU table: one row per traced arithmetic/logic operation.
    pub mod alu {
        pub const NUM_COLS: usize = 5;
        pub const CLK: usize = 0;
        pub const ALU_OP_ID: usize = 1;
        pub const OPERAND_A: usize = 2;
        pub const OPERAND_B: usize = 3;
        pub const RESULT: usize = 4;
    }

    /// MEM table: one row per traced load or store.
    pub mod mem {
        pub const NUM_COLS: usize = 4;
        pub const ADDR: usize = 0;
        pub const CLK: usize = 1;
        pub const VALUE: usize = 2;
        pub const IS_WRITE: usize = 3;
    }

    /// PROG table: one row per 32-bit word of the loaded code image.
    pub mod prog {
        pub const NUM_COLS: usize = 2;
        pub const PC: usize = 0;
        pub const INSTR_WORD: usize = 1;
    }

    /// Permutation companion tables: inverse fingerprint and running sum.
    pub mod perm {
        pub const NUM_COLS: usize = 2;
        pub const PERM: usize = 0;
        pub const ACC: usize = 1;
    }
}

/// A single trace table: a fixed column count and a flat row-major cell
/// store.
///
/// Shape invariants (`num_cols >= 1`, every row exactly `num_cols` cells)
/// are enforced by the constructors and [`TraceTable::push_row`]; rows may
/// be empty. The column count is otherwise unconstrained, so the same type
/// serves the documented layouts, the two-column permutation tables, and
/// arbitrary synthetic tables in tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceTable {
    table_id: TableId,
    num_cols: usize,
    values: Vec<FieldElement>,
}

impl TraceTable {
    /// An empty table with `num_cols` columns.
    ///
    /// # Panics
    /// If `num_cols` is zero.
    pub fn new(table_id: TableId, num_cols: usize) -> TraceTable {
        assert!(num_cols >= 1, "a trace table needs at least one column");
        TraceTable {
            table_id,
            num_cols,
            values: Vec::new(),
        }
    }

    /// Builds a table directly from a flat row-major cell vector.
    ///
    /// # Panics
    /// If `num_cols` is zero or `values.len()` is not a multiple of it.
    pub fn from_values(table_id: TableId, num_cols: usize, values: Vec<FieldElement>) -> TraceTable {
        assert!(num_cols >= 1, "a trace table needs at least one column");
        assert!(
            values.len() % num_cols == 0,
            "flat cell count {} is not a whole number of {}-column rows",
            values.len(),
            num_cols
        );
        TraceTable {
            table_id,
            num_cols,
            values,
        }
    }

    pub fn table_id(&self) -> TableId {
        self.table_id
    }

    pub fn num_cols(&self) -> usize {
        self.num_cols
    }

    pub fn num_rows(&self) -> usize {
        self.values.len() / self.num_cols
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Appends one row.
    ///
    /// # Panics
    /// If `row.len() != num_cols`.
    pub fn push_row(&mut self, row: &[FieldElement]) {
        assert_eq!(
            row.len(),
            self.num_cols,
            "row width does not match the {} table's column count",
            self.table_id
        );
        self.values.extend_from_slice(row);
    }

    pub fn row(&self, i: usize) -> &[FieldElement] {
        &self.values[i * self.num_cols..(i + 1) * self.num_cols]
    }

    /// Replaces an existing row. Panics on a bad index or width, like
    /// [`TraceTable::push_row`].
    pub fn set_row(&mut self, i: usize, row: &[FieldElement]) {
        assert_eq!(
            row.len(),
            self.num_cols,
            "row width does not match the {} table's column count",
            self.table_id
        );
        self.values[i * self.num_cols..(i + 1) * self.num_cols].copy_from_slice(row);
    }

    pub fn rows(&self) -> impl Iterator<Item = &[FieldElement]> {
        self.values.chunks_exact(self.num_cols)
    }

    /// The flat row-major cell store.
    pub fn values(&self) -> &[FieldElement] {
        &self.values
    }

    /// Serialised payload size in bytes.
    pub fn byte_len(&self) -> u64 {
        self.values.len() as u64 * 4
    }
}

/// Descriptive metadata for the guest run that produced a trace. Carried in
/// the sidecar, never in the binary container.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GuestMeta {
    pub program_name: String,
    pub entry_point: u32,
    /// Total dynamic instructions executed, traced or not.
    pub instructions_executed: u64,
}

/// The complete main trace of one guest execution: the four tables plus
/// guest metadata.
///
/// The struct-of-four representation makes the "exactly one table per main
/// table id" invariant structural. Serialisation covers the tables only;
/// `meta` is descriptive and travels separately.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MainTrace {
    cpu: TraceTable,
    alu: TraceTable,
    mem: TraceTable,
    prog: TraceTable,
    pub meta: GuestMeta,
}

impl MainTrace {
    /// An empty trace with the documented column layouts.
    pub fn new(meta: GuestMeta) -> MainTrace {
        MainTrace {
            cpu: TraceTable::new(TableId::Cpu, layout::cpu::NUM_COLS),
            alu: TraceTable::new(TableId::Alu, layout::alu::NUM_COLS),
            mem: TraceTable::new(TableId::Mem, layout::mem::NUM_COLS),
            prog: TraceTable::new(TableId::Prog, layout::prog::NUM_COLS),
            meta,
        }
    }

    /// Assembles a trace from four pre-built tables.
    ///
    /// # Panics
    /// If the tables' ids are not exactly CPU, ALU, MEM, PROG in that order.
    pub fn from_tables(tables: [TraceTable; 4], meta: GuestMeta) -> MainTrace {
        let [cpu, alu, mem, prog] = tables;
        assert_eq!(cpu.table_id(), TableId::Cpu);
        assert_eq!(alu.table_id(), TableId::Alu);
        assert_eq!(mem.table_id(), TableId::Mem);
        assert_eq!(prog.table_id(), TableId::Prog);
        MainTrace {
            cpu,
            alu,
            mem,
            prog,
            meta,
        }
    }

    pub fn table(&self, id: TableId) -> Option<&TraceTable> {
        match id {
            TableId::Cpu => Some(&self.cpu),
            TableId::Alu => Some(&self.alu),
            TableId::Mem => Some(&self.mem),
            TableId::Prog => Some(&self.prog),
            _ => None,
        }
    }

    pub fn table_mut(&mut self, id: TableId) -> Option<&mut TraceTable> {
        match id {
            TableId::Cpu => Some(&mut self.cpu),
            TableId::Alu => Some(&mut self.alu),
            TableId::Mem => Some(&mut self.mem),
            TableId::Prog => Some(&mut self.prog),
            _ => None,
        }
    }

    /// The four tables in canonical order.
    pub fn tables(&self) -> [&TraceTable; 4] {
        [&self.cpu, &self.alu, &self.mem, &self.prog]
    }

    pub fn cpu(&self) -> &TraceTable {
        &self.cpu
    }

    pub fn alu(&self) -> &TraceTable {
        &self.alu
    }

    pub fn mem(&self) -> &TraceTable {
        &self.mem
    }

    pub fn prog(&self) -> &TraceTable {
        &self.prog
    }

    /// `(table, rows)` for the four tables in canonical order.
    pub fn row_counts(&self) -> [(TableId, usize); 4] {
        self.tables().map(|t| (t.table_id(), t.num_rows()))
    }
}

/// Structured parse and validation errors for the `ZKTR` container.
///
/// Every variant that corresponds to a malformed byte stream names the
/// failing field and, where meaningful, the byte offset at which it was
/// detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceFileError {
    #[error("bad magic {found:02x?}, expected \"ZKTR\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported format version {found}, expected {TRACE_FORMAT_VERSION}")]
    UnsupportedVersion { found: u32 },
    #[error("file truncated while reading {context} at byte offset {offset}")]
    Truncated { context: &'static str, offset: usize },
    #[error("unknown table id {value} in directory at byte offset {offset}")]
    InvalidTableId { value: u32, offset: usize },
    #[error("table {table} appears more than once in the directory")]
    DuplicateTableId { table: TableId },
    #[error("table {table} declares zero columns")]
    InvalidColumnCount { table: TableId },
    #[error("table {table} payload offset {found} does not match the canonical contiguous layout (expected {expected})")]
    BadOffset {
        table: TableId,
        expected: u64,
        found: u64,
    },
    #[error("{found} bytes of payload after the directory, expected {expected}")]
    LengthMismatch { expected: u64, found: u64 },
    #[error(
        "non-canonical value {value:#010x} (>= field modulus) in table {table} row {row} col {col} at byte offset {offset}"
    )]
    NonCanonicalValue {
        table: TableId,
        row: usize,
        col: usize,
        value: u32,
        offset: usize,
    },
    #[error("main trace is missing table {table}")]
    MissingTable { table: TableId },
    #[error("table {table} is not a main-trace table")]
    UnexpectedTable { table: TableId },
}

/// Serialises any set of tables to the `ZKTR` container format.
///
/// The output is deterministic byte-for-byte: directory entries appear in
/// argument order and payloads are laid out contiguously in that order.
pub fn write_tables(tables: &[&TraceTable]) -> Vec<u8> {
    const HEADER_LEN: usize = 12;
    const DIR_ENTRY_LEN: usize = 24;
    let payload_len: u64 = tables.iter().map(|t| t.byte_len()).sum();
    let payload_start = (HEADER_LEN + DIR_ENTRY_LEN * tables.len()) as u64;

    let mut out = Vec::with_capacity(payload_start as usize + payload_len as usize);
    out.extend_from_slice(&TRACE_MAGIC);
    out.extend_from_slice(&TRACE_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(tables.len() as u32).to_le_bytes());
    let mut offset = payload_start;
    for t in tables {
        out.extend_from_slice(&t.table_id().wire_id().to_le_bytes());
        out.extend_from_slice(&(t.num_cols() as u32).to_le_bytes());
        out.extend_from_slice(&(t.num_rows() as u64).to_le_bytes());
        out.extend_from_slice(&offset.to_le_bytes());
        offset += t.byte_len();
    }
    for t in tables {
        for v in t.values() {
            out.extend_from_slice(&v.value().to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, context: &'static str) -> Result<&'a [u8], TraceFileError> {
        if self.bytes.len() - self.pos < n {
            return Err(TraceFileError::Truncated {
                context,
                offset: self.pos,
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn read_u32(&mut self, context: &'static str) -> Result<u32, TraceFileError> {
        let b = self.take(4, context)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn read_u64(&mut self, context: &'static str) -> Result<u64, TraceFileError> {
        let b = self.take(8, context)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Parses a `ZKTR` container into its tables, validating the header, the
/// directory (known unique ids, positive column counts, canonical contiguous
/// offsets), exact payload length, and canonical form of every cell.
pub fn read_tables(bytes: &[u8]) -> Result<Vec<TraceTable>, TraceFileError> {
    let mut r = Reader { bytes, pos: 0 };

    let magic = r.take(4, "magic")?;
    if magic != TRACE_MAGIC {
        return Err(TraceFileError::BadMagic {
            found: magic.try_into().unwrap(),
        });
    }
    let version = r.read_u32("version")?;
    if version != TRACE_FORMAT_VERSION {
        return Err(TraceFileError::UnsupportedVersion { found: version });
    }
    let table_count = r.read_u32("table count")? as usize;

    struct DirEntry {
        table: TableId,
        num_cols: usize,
        num_rows: u64,
    }
    let mut seen: Vec<TableId> = Vec::new();
    let mut dir = Vec::with_capacity(table_count.min(64));
    // Payload begins immediately after the directory; each entry's declared
    // offset must continue the contiguous layout from there.
    let mut expected_offset = 12u64 + 24u64 * table_count as u64;
    let payload_start = expected_offset;
    for _ in 0..table_count {
        let id_offset = r.pos;
        let wire = r.read_u32("directory table id")?;
        let table = TableId::from_wire(wire).ok_or(TraceFileError::InvalidTableId {
            value: wire,
            offset: id_offset,
        })?;
        if seen.contains(&table) {
            return Err(TraceFileError::DuplicateTableId { table });
        }
        seen.push(table);
        let num_cols = r.read_u32("directory column count")?;
        if num_cols == 0 {
            return Err(TraceFileError::InvalidColumnCount { table });
        }
        let num_rows = r.read_u64("directory row count")?;
        let byte_offset = r.read_u64("directory byte offset")?;
        if byte_offset != expected_offset {
            return Err(TraceFileError::BadOffset {
                table,
                expected: expected_offset,
                found: byte_offset,
            });
        }
        expected_offset = expected_offset
            .checked_add(num_rows.checked_mul(num_cols as u64 * 4).ok_or(
                TraceFileError::LengthMismatch {
                    expected: u64::MAX,
                    found: bytes.len() as u64,
                },
            )?)
            .ok_or(TraceFileError::LengthMismatch {
                expected: u64::MAX,
                found: bytes.len() as u64,
            })?;
        dir.push(DirEntry {
            table,
            num_cols: num_cols as usize,
            num_rows,
        });
    }

    // The payload region must hold exactly the declared cells, no more.
    let declared_payload = expected_offset - payload_start;
    let actual_payload = (bytes.len() - r.pos) as u64;
    if actual_payload != declared_payload {
        return Err(TraceFileError::LengthMismatch {
            expected: declared_payload,
            found: actual_payload,
        });
    }

    let mut tables = Vec::with_capacity(dir.len());
    for entry in &dir {
        let cells = entry.num_rows as usize * entry.num_cols;
        let mut values = Vec::with_capacity(cells);
        for cell in 0..cells {
            let offset = r.pos;
            let raw = r.read_u32("table payload")?;
            let value = FieldElement::new(raw).ok_or(TraceFileError::NonCanonicalValue {
                table: entry.table,
                row: cell / entry.num_cols,
                col: cell % entry.num_cols,
                value: raw,
                offset,
            })?;
            values.push(value);
        }
        tables.push(TraceTable::from_values(entry.table, entry.num_cols, values));
    }
    Ok(tables)
}

/// Serialises the four main-trace tables in canonical order.
pub fn serialize_trace(trace: &MainTrace) -> Vec<u8> {
    write_tables(&trace.tables())
}

/// Parses a main trace: exactly the four main tables must be present (in any
/// directory order). The returned trace carries default metadata, since the
/// container stores table contents only.
pub fn deserialize_trace(bytes: &[u8]) -> Result<MainTrace, TraceFileError> {
    let tables = read_tables(bytes)?;
    for t in &tables {
        if t.table_id().is_perm() {
            return Err(TraceFileError::UnexpectedTable {
                table: t.table_id(),
            });
        }
    }
    let mut slots: [Option<TraceTable>; 4] = [None, None, None, None];
    for t in tables {
        let slot = t.table_id().wire_id() as usize;
        slots[slot] = Some(t);
    }
    for (i, slot) in slots.iter().enumerate() {
        if slot.is_none() {
            return Err(TraceFileError::MissingTable {
                table: TableId::from_wire(i as u32).unwrap(),
            });
        }
    }
    let [cpu, alu, mem, prog] = slots.map(Option::unwrap);
    Ok(MainTrace::from_tables(
        [cpu, alu, mem, prog],
        GuestMeta::default(),
    ))
}

/// True when the modulus would be rejected as a cell value — used by tests
/// to pick a guaranteed-non-canonical word.
pub const NON_CANONICAL_EXAMPLE: u32 = FieldParams::P;
