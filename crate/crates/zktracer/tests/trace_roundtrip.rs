//! Container-format round trips on random traces, serialization
//! determinism, and the documented rejection cases.

mod common;

use common::random_table;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zktracer::trace::{
    GuestMeta, MainTrace, TRACE_MAGIC, TableId, TraceFileError, deserialize_trace, layout,
    read_tables, serialize_trace, write_tables,
};

fn random_trace(rng: &mut ChaCha8Rng) -> MainTrace {
    let mut trace = MainTrace::new(GuestMeta::default());
    for (id, cols) in [
        (TableId::Cpu, layout::cpu::NUM_COLS),
        (TableId::Alu, layout::alu::NUM_COLS),
        (TableId::Mem, layout::mem::NUM_COLS),
        (TableId::Prog, layout::prog::NUM_COLS),
    ] {
        let rows = rng.gen_range(0..50);
        let table = random_table(rng, id, rows, cols);
        for row in table.rows() {
            trace.table_mut(id).unwrap().push_row(row);
        }
    }
    trace
}

#[test]
fn one_hundred_random_traces_round_trip_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(2001);
    for case in 0..100 {
        let trace = random_trace(&mut rng);
        let bytes = serialize_trace(&trace);
        let back = deserialize_trace(&bytes).unwrap();
        for (a, b) in trace.tables().iter().zip(back.tables().iter()) {
            assert_eq!(a.table_id(), b.table_id(), "case {case}");
            assert_eq!(a.num_cols(), b.num_cols(), "case {case}");
            assert_eq!(a.values(), b.values(), "case {case}");
        }
        // Serialization is a pure function of the tables.
        assert_eq!(serialize_trace(&back), bytes, "case {case}");
    }
}

#[test]
fn rewriting_parsed_tables_is_byte_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let tables: Vec<_> = [
        (TableId::Cpu, 11, 17),
        (TableId::CpuPerm, 2, 17),
        (TableId::Mem, 4, 3),
        (TableId::ProgPerm, 2, 0),
    ]
    .into_iter()
    .map(|(id, cols, rows)| random_table(&mut rng, id, rows, cols))
    .collect();
    let refs: Vec<_> = tables.iter().collect();
    let bytes = write_tables(&refs);
    let parsed = read_tables(&bytes).unwrap();
    assert_eq!(parsed, tables);
    let rewritten = write_tables(&parsed.iter().collect::<Vec<_>>());
    assert_eq!(rewritten, bytes);
}

#[test]
fn bad_magic_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(2003);
    let bytes = serialize_trace(&random_trace(&mut rng));
    let mut corrupted = bytes.clone();
    corrupted[0..4].copy_from_slice(b"NOPE");
    match deserialize_trace(&corrupted) {
        Err(TraceFileError::BadMagic { found }) => assert_eq!(&found, b"NOPE"),
        other => panic!("expected a magic rejection, got {other:?}"),
    }
    assert_eq!(&bytes[0..4], TRACE_MAGIC);
}

#[test]
fn non_canonical_cell_is_rejected_with_coordinates() {
    let mut rng = ChaCha8Rng::seed_from_u64(2004);
    let mut trace = MainTrace::new(GuestMeta::default());
    let table = random_table(&mut rng, TableId::Prog, 4, layout::prog::NUM_COLS);
    for row in table.rows() {
        trace.table_mut(TableId::Prog).unwrap().push_row(row);
    }
    let mut bytes = serialize_trace(&trace);
    // The PROG payload is the last 4*2 rows*cols cells of the file; smash
    // one cell to the modulus itself (the smallest non-canonical word).
    let cell_offset = bytes.len() - 4 * 3; // row 2, column 1 of 4x2
    bytes[cell_offset..cell_offset + 4].copy_from_slice(&0x7800_0001u32.to_le_bytes());
    match deserialize_trace(&bytes) {
        Err(TraceFileError::NonCanonicalValue {
            table, row, col, value, ..
        }) => {
            assert_eq!(table, TableId::Prog);
            assert_eq!((row, col), (2, 1));
            assert_eq!(value, 0x7800_0001);
        }
        other => panic!("expected a canonicality rejection, got {other:?}"),
    }
}

#[test]
fn truncations_at_every_boundary_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(2005);
    let bytes = serialize_trace(&random_trace(&mut rng));
    // Header, directory, and payload cuts all fail; only the full file parses.
    for cut in [0, 3, 4, 11, 12, 20, bytes.len() / 2, bytes.len() - 1] {
        assert!(
            deserialize_trace(&bytes[..cut]).is_err(),
            "prefix of {cut} bytes parsed"
        );
    }
    assert!(deserialize_trace(&bytes).is_ok());
}

#[test]
fn trailing_garbage_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(2006);
    let mut bytes = serialize_trace(&random_trace(&mut rng));
    bytes.push(0);
    match deserialize_trace(&bytes) {
        Err(TraceFileError::LengthMismatch { expected, found }) => {
            assert_eq!(found, expected + 1);
        }
        other => panic!("expected a length rejection, got {other:?}"),
    }
}

#[test]
fn permutation_ids_are_rejected_by_the_main_trace_reader() {
    let mut rng = ChaCha8Rng::seed_from_u64(2007);
    let tables: Vec<_> = [
        (TableId::Cpu, 11usize),
        (TableId::Alu, 5),
        (TableId::Mem, 4),
        (TableId::ProgPerm, 2),
    ]
    .into_iter()
    .map(|(id, cols)| random_table(&mut rng, id, 2, cols))
    .collect();
    let bytes = write_tables(&tables.iter().collect::<Vec<_>>());
    assert!(matches!(
        deserialize_trace(&bytes),
        Err(TraceFileError::UnexpectedTable {
            table: TableId::ProgPerm
        })
    ));
}
