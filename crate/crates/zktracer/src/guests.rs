//! Built-in guest programs used as fixtures by the test suite and shipped as
//! prebuilt flat binaries under `guests/` (regenerate with
//! `cargo run --example make_guests`; assembly listings live in
//! `docs/guests.md`).
//!
//! Each program brackets its interesting region with `trace_on`/`trace_off`
//! and exits via the `ecall`-93 convention, so the exit code doubles as a
//! self-check of the computed result.

use crate::mtu::encode::{self, encode_trace_ctl, TraceCtl};

/// A guest program fixture: its code and the loading parameters.
#[derive(Debug, Clone)]
pub struct GuestProgram {
    pub name: &'static str,
    pub words: Vec<u32>,
    pub base: u32,
    pub entry: u32,
    /// The exit code the program is constructed to produce.
    pub expected_exit: u32,
}

impl GuestProgram {
    /// The flat little-endian binary image.
    pub fn image(&self) -> Vec<u8> {
        encode::to_image(&self.words)
    }
}

/// Iterative fibonacci: computes fib(10) = 55 in a traced loop and exits
/// with it.
pub fn fibonacci() -> GuestProgram {
    let words = vec![
        encode::addi(5, 0, 10),              // 0x00  n = 10
        encode_trace_ctl(TraceCtl::On),      // 0x04
        encode::addi(1, 0, 0),               // 0x08  a = 0
        encode::addi(2, 0, 1),               // 0x0c  b = 1
        encode::beq(5, 0, 24),               // 0x10  loop: if n == 0 goto done
        encode::add(3, 1, 2),                // 0x14  t = a + b
        encode::addi(1, 2, 0),               // 0x18  a = b
        encode::addi(2, 3, 0),               // 0x1c  b = t
        encode::addi(5, 5, -1),              // 0x20  n -= 1
        encode::jal(0, -20),                 // 0x24  goto loop
        encode_trace_ctl(TraceCtl::Off),     // 0x28  done:
        encode::addi(10, 1, 0),              // 0x2c  a0 = a
        encode::addi(17, 0, 93),             // 0x30
        encode::ecall(),                     // 0x34
    ];
    GuestProgram {
        name: "fibonacci",
        words,
        base: 0,
        entry: 0,
        expected_exit: 55,
    }
}

/// Trial-division primality test on 97 (prime, so it exits 1); exercises the
/// M extension through `mul` and `remu`.
pub fn is_prime() -> GuestProgram {
    let words = vec![
        encode::addi(5, 0, 97),              // 0x00  n = 97
        encode_trace_ctl(TraceCtl::On),      // 0x04
        encode::addi(6, 0, 2),               // 0x08  d = 2
        encode::addi(10, 0, 1),              // 0x0c  result = 1
        encode::mul(7, 6, 6),                // 0x10  loop: dd = d*d
        encode::bltu(5, 7, 24),              // 0x14  if n < dd goto done
        encode::remu(7, 5, 6),               // 0x18  r = n % d
        encode::beq(7, 0, 12),               // 0x1c  if r == 0 goto not_prime
        encode::addi(6, 6, 1),               // 0x20  d += 1
        encode::jal(0, -20),                 // 0x24  goto loop
        encode::addi(10, 0, 0),              // 0x28  not_prime: result = 0
        encode_trace_ctl(TraceCtl::Off),     // 0x2c  done:
        encode::addi(17, 0, 93),             // 0x30
        encode::ecall(),                     // 0x34
    ];
    GuestProgram {
        name: "is_prime",
        words,
        base: 0,
        entry: 0,
        expected_exit: 1,
    }
}

/// Stores eight words into a buffer, reads them back, and exits with their
/// sum (108); the only fixture that populates the MEM table.
pub fn memory_walk() -> GuestProgram {
    let words = vec![
        encode::addi(5, 0, 0x100),           // 0x00  buf = 0x100
        encode_trace_ctl(TraceCtl::On),      // 0x04
        encode::addi(6, 0, 0),               // 0x08  i = 0
        encode::addi(7, 0, 8),               // 0x0c  limit = 8
        encode::beq(6, 7, 28),               // 0x10  store_loop: if i == limit goto load_init
        encode::slli(8, 6, 2),               // 0x14  off = 4*i
        encode::add(8, 8, 5),                // 0x18  addr = buf + off
        encode::addi(9, 6, 10),              // 0x1c  v = i + 10
        encode::sw(8, 9, 0),                 // 0x20  mem[addr] = v
        encode::addi(6, 6, 1),               // 0x24  i += 1
        encode::jal(0, -24),                 // 0x28  goto store_loop
        encode::addi(6, 0, 0),               // 0x2c  load_init: i = 0
        encode::addi(10, 0, 0),              // 0x30  sum = 0
        encode::beq(6, 7, 28),               // 0x34  load_loop: if i == limit goto done
        encode::slli(8, 6, 2),               // 0x38
        encode::add(8, 8, 5),                // 0x3c
        encode::lw(9, 8, 0),                 // 0x40  v = mem[addr]
        encode::add(10, 10, 9),              // 0x44  sum += v
        encode::addi(6, 6, 1),               // 0x48
        encode::jal(0, -24),                 // 0x4c  goto load_loop
        encode_trace_ctl(TraceCtl::Off),     // 0x50  done:
        encode::addi(17, 0, 93),             // 0x54
        encode::ecall(),                     // 0x58
    ];
    GuestProgram {
        name: "memory_walk",
        words,
        base: 0,
        entry: 0,
        expected_exit: 108,
    }
}

/// All built-in fixtures.
pub fn all() -> Vec<GuestProgram> {
    vec![fibonacci(), is_prime(), memory_walk()]
}
