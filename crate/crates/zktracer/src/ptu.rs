//! The Permutation Trace Unit pipeline: challenge derivation, weight
//! precomputation, row fingerprinting, batch-inverted permutation columns,
//! prefix-sum accumulators, and the LogUp multiset-balance check.
//!
//! For a table with rows `A_i` and columns `j`, under challenges `(γ, β)`:
//!
//! ```text
//! fingerprint_i = γ + Σ_j β^j · A_ij
//! perm_i        = 1 / fingerprint_i
//! acc_i         = perm_0 + perm_1 + … + perm_i
//! ```
//!
//! The pipeline mirrors the modeled hardware: the `β^j` weights are
//! precomputed once per column count (cost independent of the row count,
//! amortising exponentiation from O(N·j) to O(j)), rows stream through a
//! multiply-accumulate chain — wide tables in column chunks with the partial
//! sum fed back between passes — the inversions use the batched
//! 1-inversion-plus-3(N−1)-multiplications trick, and the running sums may
//! be formed by any reduction tree because field addition is associative;
//! here a logarithmic-depth in-place tree scan, which must and does equal
//! the sequential scan bit-for-bit.
//!
//! Cross-table consistency uses one `(γ, β)` pair shared by every table —
//! two sums of reciprocal fingerprints can only cancel if both sides were
//! compressed under the same challenges.

use crate::field::{FieldElement, FieldError, FieldOps, FieldParams};
use crate::trace::{MainTrace, TableId, TraceTable, layout, write_tables};
use thiserror::Error;

/// Default column-chunk width of the fingerprint datapath.
pub const DEFAULT_CHUNK_WIDTH: usize = 32;
/// Upper bound accepted for the chunk width.
pub const MAX_CHUNK_WIDTH: usize = 256;

/// Errors from the permutation pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PtuError {
    #[error("weight table needs at least one entry")]
    EmptyWeights,
    #[error("chunk width must be between 1 and {MAX_CHUNK_WIDTH}")]
    InvalidChunkWidth,
    #[error("row of {row_len} values does not match the {lut_k}-entry weight table")]
    WidthMismatch { row_len: usize, lut_k: usize },
    #[error("zero fingerprint at row {row}")]
    ZeroFingerprint { row: usize },
    #[error("zero fingerprint in table {table} at row {row}; re-derive challenges from a fresh seed")]
    TableZeroFingerprint { table: TableId, row: usize },
    #[error("sends table has {sends} columns but receives table has {receives}")]
    ColumnCountMismatch { sends: usize, receives: usize },
    #[error("permutation file is missing table {table}")]
    MissingPermTable { table: TableId },
    #[error("permutation table {table} must have 2 columns, found {num_cols}")]
    WrongPermShape { table: TableId, num_cols: usize },
    #[error("table {table} is not a permutation table")]
    NotAPermTable { table: TableId },
}

/// The random challenges of the fingerprint compression, derived
/// deterministically from a seed so runs are reproducible across platforms.
/// `beta` is always nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Challenges {
    pub gamma: FieldElement,
    pub beta: FieldElement,
    pub seed: u64,
}

fn splitmix64_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn reduce_u64(x: u64) -> FieldElement {
    FieldElement::new((x % FieldParams::P as u64) as u32).unwrap()
}

/// Expands a 64-bit seed into `(γ, β)` via a splitmix64 stream reduced into
/// the field. β is re-drawn until nonzero, so every weight table is
/// well-formed. This replaces the hardware's true random source; the
/// contract here is reproducibility, not cryptographic strength.
pub fn derive_challenges(seed: u64) -> Challenges {
    let mut state = seed;
    let gamma = reduce_u64(splitmix64_next(&mut state));
    let beta = loop {
        let candidate = reduce_u64(splitmix64_next(&mut state));
        if !candidate.is_zero() {
            break candidate;
        }
    };
    Challenges { gamma, beta, seed }
}

/// The precomputed weight table `[β^0, β^1, …, β^(k−1)]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightLUT {
    weights: Vec<FieldElement>,
}

impl WeightLUT {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[FieldElement] {
        &self.weights
    }
}

/// Builds the weight table for `k` columns with exactly `k − 1`
/// multiplications — each entry is the previous one times β, so the cost
/// depends only on the column count, never on the number of rows the table
/// will be used for.
pub fn precompute_weights(
    ops: &mut FieldOps,
    beta: FieldElement,
    k: usize,
) -> Result<WeightLUT, PtuError> {
    if k == 0 {
        return Err(PtuError::EmptyWeights);
    }
    let mut weights = Vec::with_capacity(k);
    weights.push(FieldElement::ONE);
    for _ in 1..k {
        let next = ops.mod_mul(*weights.last().unwrap(), beta);
        weights.push(next);
    }
    Ok(WeightLUT { weights })
}

/// `γ + Σ_j weights[j]·row[j]`, as a single multiply-accumulate chain over
/// the row.
pub fn row_fingerprint(
    ops: &mut FieldOps,
    row: &[FieldElement],
    lut: &WeightLUT,
    gamma: FieldElement,
) -> Result<FieldElement, PtuError> {
    if row.len() != lut.k() {
        return Err(PtuError::WidthMismatch {
            row_len: row.len(),
            lut_k: lut.k(),
        });
    }
    let mut acc = gamma;
    for (w, a) in lut.weights().iter().zip(row) {
        let product = ops.mod_mul(*w, *a);
        acc = ops.mod_add(acc, product);
    }
    Ok(acc)
}

/// Fingerprints every row of a table with a datapath `chunk_width` lanes
/// wide: columns are processed in `⌈k / W⌉` passes, each pass accumulating
/// its chunk's weighted values onto the partial sums carried over from the
/// previous pass. The result is exactly the unchunked fingerprint — chunking
/// changes the schedule, never the value.
pub fn fingerprint_table_chunked(
    ops: &mut FieldOps,
    table: &TraceTable,
    chunk_width: usize,
    challenges: &Challenges,
) -> Result<Vec<FieldElement>, PtuError> {
    if chunk_width == 0 || chunk_width > MAX_CHUNK_WIDTH {
        return Err(PtuError::InvalidChunkWidth);
    }
    let k = table.num_cols();
    // Weights are indexed by absolute column position, so one table serves
    // every chunk.
    let lut = precompute_weights(ops, challenges.beta, k)?;
    let mut partials = vec![challenges.gamma; table.num_rows()];
    let mut chunk_start = 0;
    while chunk_start < k {
        let chunk_end = (chunk_start + chunk_width).min(k);
        for (i, partial) in partials.iter_mut().enumerate() {
            let row = table.row(i);
            let mut acc = *partial;
            for j in chunk_start..chunk_end {
                let product = ops.mod_mul(lut.weights()[j], row[j]);
                acc = ops.mod_add(acc, product);
            }
            *partial = acc;
        }
        chunk_start = chunk_end;
    }
    Ok(partials)
}

/// Element-wise reciprocals of the fingerprints, via batch inversion.
///
/// # Errors
/// [`PtuError::ZeroFingerprint`] naming the first offending row — the
/// challenges collided with the data; the caller should re-derive from a
/// fresh seed.
pub fn permutation_column(
    ops: &mut FieldOps,
    fingerprints: &[FieldElement],
) -> Result<Vec<FieldElement>, PtuError> {
    ops.batch_inv(fingerprints).map_err(|e| match e {
        FieldError::ZeroElement { index } => PtuError::ZeroFingerprint { row: index },
        FieldError::ZeroInversion => PtuError::ZeroFingerprint { row: 0 },
    })
}

/// Inclusive prefix sums of the permutation column, computed by an in-place
/// logarithmic-depth tree: pass `d` adds the value `d` positions back, for
/// `d = 1, 2, 4, …`. Field addition is associative and commutative, so the
/// tree schedule yields exactly the sequential scan's values.
pub fn accumulator_column(ops: &mut FieldOps, perm: &[FieldElement]) -> Vec<FieldElement> {
    let mut out = perm.to_vec();
    let mut d = 1;
    while d < out.len() {
        // Descending order keeps `out[i - d]` at its previous-pass value
        // until it is consumed.
        for i in (d..out.len()).rev() {
            out[i] = ops.mod_add(out[i], out[i - d]);
        }
        d *= 2;
    }
    out
}

/// The permutation and accumulator columns for one main table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TablePermColumns {
    main_table: TableId,
    pub perm: Vec<FieldElement>,
    pub acc: Vec<FieldElement>,
}

impl TablePermColumns {
    pub fn main_table(&self) -> TableId {
        self.main_table
    }

    /// Renders the two columns as a `*_perm` trace table.
    pub fn to_table(&self) -> TraceTable {
        let mut values = Vec::with_capacity(self.perm.len() * 2);
        for (p, a) in self.perm.iter().zip(&self.acc) {
            values.push(*p);
            values.push(*a);
        }
        TraceTable::from_values(self.main_table.perm_of(), layout::perm::NUM_COLS, values)
    }
}

/// The complete permutation trace: per-table columns under one shared
/// challenge pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationTrace {
    pub challenges: Challenges,
    columns: [TablePermColumns; 4],
}

impl PermutationTrace {
    pub fn columns(&self) -> &[TablePermColumns; 4] {
        &self.columns
    }

    /// Mutable access to the per-table columns, for tooling that edits
    /// values in place (fault injection, corruption studies).
    pub fn columns_mut(&mut self) -> &mut [TablePermColumns; 4] {
        &mut self.columns
    }

    /// The columns belonging to a main table.
    pub fn for_table(&self, main: TableId) -> Option<&TablePermColumns> {
        self.columns.iter().find(|c| c.main_table == main)
    }

    /// The four `*_perm` tables in canonical order.
    pub fn to_tables(&self) -> [TraceTable; 4] {
        [
            self.columns[0].to_table(),
            self.columns[1].to_table(),
            self.columns[2].to_table(),
            self.columns[3].to_table(),
        ]
    }

    /// Serialises the four `*_perm` tables in the trace container format.
    /// Challenges are not part of the container; the derivation seed travels
    /// in the run sidecar.
    pub fn serialize(&self) -> Vec<u8> {
        let tables = self.to_tables();
        write_tables(&[&tables[0], &tables[1], &tables[2], &tables[3]])
    }

    /// Reassembles a permutation trace from parsed `*_perm` tables plus the
    /// challenges they were built under.
    pub fn from_tables(
        tables: Vec<TraceTable>,
        challenges: Challenges,
    ) -> Result<PermutationTrace, PtuError> {
        let mut slots: [Option<TablePermColumns>; 4] = [None, None, None, None];
        for t in tables {
            let id = t.table_id();
            if !id.is_perm() {
                return Err(PtuError::NotAPermTable { table: id });
            }
            if t.num_cols() != layout::perm::NUM_COLS {
                return Err(PtuError::WrongPermShape {
                    table: id,
                    num_cols: t.num_cols(),
                });
            }
            let mut perm = Vec::with_capacity(t.num_rows());
            let mut acc = Vec::with_capacity(t.num_rows());
            for row in t.rows() {
                perm.push(row[layout::perm::PERM]);
                acc.push(row[layout::perm::ACC]);
            }
            slots[id.main_of().wire_id() as usize] = Some(TablePermColumns {
                main_table: id.main_of(),
                perm,
                acc,
            });
        }
        for (i, slot) in slots.iter().enumerate() {
            if slot.is_none() {
                return Err(PtuError::MissingPermTable {
                    table: TableId::from_wire(i as u32).unwrap().perm_of(),
                });
            }
        }
        Ok(PermutationTrace {
            challenges,
            columns: slots.map(Option::unwrap),
        })
    }
}

/// Runs the full pipeline over all four tables of a main trace: one shared
/// challenge pair, one logical compute unit (with its own counting scope)
/// per table. Deterministic for fixed inputs.
pub fn build_permutation_trace(
    trace: &MainTrace,
    seed: u64,
    chunk_width: usize,
) -> Result<PermutationTrace, PtuError> {
    let challenges = derive_challenges(seed);
    let mut columns = Vec::with_capacity(4);
    for table in trace.tables() {
        // Each table gets a fresh counting scope, like a dedicated unit.
        let mut ops = FieldOps::new();
        let fingerprints = fingerprint_table_chunked(&mut ops, table, chunk_width, &challenges)?;
        let perm = permutation_column(&mut ops, &fingerprints).map_err(|e| match e {
            PtuError::ZeroFingerprint { row } => PtuError::TableZeroFingerprint {
                table: table.table_id(),
                row,
            },
            other => other,
        })?;
        let acc = accumulator_column(&mut ops, &perm);
        columns.push(TablePermColumns {
            main_table: table.table_id(),
            perm,
            acc,
        });
    }
    let columns: [TablePermColumns; 4] = columns.try_into().unwrap();
    Ok(PermutationTrace {
        challenges,
        columns,
    })
}

/// The LogUp multiset-balance check: true iff the send rows' sum of
/// reciprocal fingerprints equals the receive rows' sum. A permutation (with
/// multiplicity) of rows always balances; any other difference unbalances
/// with overwhelming probability over the challenges.
pub fn verify_logup_balance(
    ops: &mut FieldOps,
    sends: &TraceTable,
    receives: &TraceTable,
    challenges: &Challenges,
) -> Result<bool, PtuError> {
    if sends.num_cols() != receives.num_cols() {
        return Err(PtuError::ColumnCountMismatch {
            sends: sends.num_cols(),
            receives: receives.num_cols(),
        });
    }
    let mut side_sum = |table: &TraceTable| -> Result<FieldElement, PtuError> {
        let fingerprints =
            fingerprint_table_chunked(ops, table, table.num_cols(), challenges)?;
        let perm = permutation_column(ops, &fingerprints).map_err(|e| match e {
            PtuError::ZeroFingerprint { row } => PtuError::TableZeroFingerprint {
                table: table.table_id(),
                row,
            },
            other => other,
        })?;
        let mut sum = FieldElement::ZERO;
        for p in &perm {
            sum = ops.mod_add(sum, *p);
        }
        Ok(sum)
    };
    let send_sum = side_sum(sends)?;
    let receive_sum = side_sum(receives)?;
    Ok(send_sum == receive_sum)
}

/// A broken identity found by [`verify_permutation_trace`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum VerifyFailure {
    #[error("table {table}: main trace has {main_rows} rows but permutation columns have {perm_rows}")]
    RowCountMismatch {
        table: TableId,
        main_rows: usize,
        perm_rows: usize,
    },
    #[error("table {table} row {row}: permutation value times fingerprint is not 1")]
    PermTimesFingerprint { table: TableId, row: usize },
    #[error("table {table} row {row}: accumulator does not extend the running sum")]
    AccumulatorStep { table: TableId, row: usize },
}

/// Recomputes fingerprints from the main trace and checks both defining
/// identities of the permutation trace: `perm_i · fingerprint_i = 1` and
/// `acc_i = acc_{i−1} + perm_i` (with `acc_{−1} = 0`). Reports the first
/// broken identity with its table and row.
pub fn verify_permutation_trace(
    main: &MainTrace,
    perm_trace: &PermutationTrace,
) -> Result<(), VerifyFailure> {
    let mut ops = FieldOps::new();
    for (table, cols) in main.tables().into_iter().zip(perm_trace.columns()) {
        let id = table.table_id();
        if table.num_rows() != cols.perm.len() || cols.perm.len() != cols.acc.len() {
            return Err(VerifyFailure::RowCountMismatch {
                table: id,
                main_rows: table.num_rows(),
                perm_rows: cols.perm.len().min(cols.acc.len()),
            });
        }
        let lut = precompute_weights(&mut ops, perm_trace.challenges.beta, table.num_cols())
            .expect("tables always have at least one column");
        let mut running = FieldElement::ZERO;
        for (i, row) in table.rows().enumerate() {
            let fp = row_fingerprint(&mut ops, row, &lut, perm_trace.challenges.gamma)
                .expect("lut was built for this table's width");
            if ops.mod_mul(cols.perm[i], fp) != FieldElement::ONE {
                return Err(VerifyFailure::PermTimesFingerprint { table: id, row: i });
            }
            running = ops.mod_add(running, cols.perm[i]);
            if cols.acc[i] != running {
                return Err(VerifyFailure::AccumulatorStep { table: id, row: i });
            }
        }
    }
    Ok(())
}
