//! Shared oracles for the integration suites. Everything here is written
//! independently of the library internals it checks: the modular arithmetic
//! goes through wide integers instead of Barrett reduction, and the
//! reference CPU decodes raw instruction words with its own bit slicing.
#![allow(dead_code)]

use std::collections::HashMap;

use zktracer::field::{FieldElement, FieldParams};
use zktracer::mtu::{Machine, StepOutcome};
use zktracer::trace::{TableId, TraceTable};

use rand::Rng;

pub const P: u128 = FieldParams::P as u128;

// ---------------------------------------------------------------------------
// Wide-integer field oracle
// ---------------------------------------------------------------------------

pub fn oracle_add(a: u32, b: u32) -> u32 {
    ((a as u128 + b as u128) % P) as u32
}

pub fn oracle_mul(a: u32, b: u32) -> u32 {
    ((a as u128 * b as u128) % P) as u32
}

pub fn oracle_pow(base: u32, mut exp: u64) -> u32 {
    let mut acc: u128 = 1;
    let mut b = base as u128 % P;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % P;
        }
        b = b * b % P;
        exp >>= 1;
    }
    acc as u32
}

/// Inverse by Fermat: a^(P−2). Panics on zero — oracle misuse, not a result.
pub fn oracle_inv(a: u32) -> u32 {
    assert!(a % FieldParams::P != 0, "oracle_inv of zero");
    oracle_pow(a, (FieldParams::P - 2) as u64)
}

/// `γ + Σ_j β^j · row[j]`, entirely in wide arithmetic.
pub fn oracle_fingerprint(row: &[u32], gamma: u32, beta: u32) -> u32 {
    let mut acc = gamma as u128 % P;
    let mut weight: u128 = 1;
    for &v in row {
        acc = (acc + weight * v as u128) % P;
        weight = weight * beta as u128 % P;
    }
    acc as u32
}

pub fn fe(v: u32) -> FieldElement {
    FieldElement::new(v).expect("test value must be canonical")
}

/// A random canonical field value.
pub fn random_fe<R: Rng>(rng: &mut R) -> FieldElement {
    fe(rng.gen_range(0..FieldParams::P))
}

/// A random table of the given dimensions filled with canonical values.
pub fn random_table<R: Rng>(rng: &mut R, id: TableId, rows: usize, cols: usize) -> TraceTable {
    let mut t = TraceTable::new(id, cols);
    for _ in 0..rows {
        let row: Vec<FieldElement> = (0..cols).map(|_| random_fe(rng)).collect();
        t.push_row(&row);
    }
    t
}

// ---------------------------------------------------------------------------
// Reference RV32IM interpreter
// ---------------------------------------------------------------------------

/// Outcome of reference execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefStop {
    Running,
    Exited(u32),
    Fault,
}

/// A deliberately plain RV32IM interpreter: sparse byte memory, raw bit
/// slicing in one big match, no shared code with the unit under test. It
/// assumes well-formed encodings (its inputs come from the assembler
/// helpers) and supports the same environment contract: `ecall` with
/// a7 = 93 exits with a0, anything else is a fault, `ebreak` is a fault,
/// `fence` and the two trace-control words are no-ops.
pub struct RefCpu {
    pub pc: u32,
    pub regs: [u32; 32],
    pub mem: HashMap<u32, u8>,
    pub steps: u64,
}

impl RefCpu {
    pub fn new(entry: u32) -> RefCpu {
        RefCpu {
            pc: entry,
            regs: [0; 32],
            mem: HashMap::new(),
            steps: 0,
        }
    }

    pub fn load_words(&mut self, base: u32, words: &[u32]) {
        for (i, w) in words.iter().enumerate() {
            let addr = base + 4 * i as u32;
            for b in 0..4 {
                self.mem.insert(addr + b, (w >> (8 * b)) as u8);
            }
        }
    }

    fn read(&self, addr: u32, len: u32) -> u32 {
        let mut v = 0u32;
        for i in 0..len {
            v |= (*self.mem.get(&addr.wrapping_add(i)).unwrap_or(&0) as u32) << (8 * i);
        }
        v
    }

    fn write(&mut self, addr: u32, len: u32, value: u32) {
        for i in 0..len {
            self.mem.insert(addr.wrapping_add(i), (value >> (8 * i)) as u8);
        }
    }

    fn set(&mut self, rd: u32, value: u32) {
        if rd != 0 {
            self.regs[rd as usize] = value;
        }
    }

    pub fn step(&mut self) -> RefStop {
        let w = self.read(self.pc, 4);
        self.steps += 1;
        let opcode = w & 0x7f;
        let rd = (w >> 7) & 31;
        let funct3 = (w >> 12) & 7;
        let rs1v = self.regs[((w >> 15) & 31) as usize];
        let rs2v = self.regs[((w >> 20) & 31) as usize];
        let bit30 = w >> 30 & 1 == 1;
        let imm_i = (w as i32) >> 20;
        let imm_s = ((w & 0xfe00_0000) as i32 >> 20) | ((w >> 7) & 0x1f) as i32;
        let imm_b = (((w & 0x8000_0000) as i32 >> 19)
            | (((w >> 7) & 1) as i32) << 11
            | (((w >> 25) & 0x3f) as i32) << 5
            | (((w >> 8) & 0xf) as i32) << 1) as i32;
        let imm_u = (w & 0xffff_f000) as i32;
        let imm_j = ((w & 0x8000_0000) as i32 >> 11)
            | (w & 0x000f_f000) as i32
            | (((w >> 20) & 1) as i32) << 11
            | (((w >> 21) & 0x3ff) as i32) << 1;
        let mut next_pc = self.pc.wrapping_add(4);

        match opcode {
            0x37 => self.set(rd, imm_u as u32),
            0x17 => self.set(rd, self.pc.wrapping_add(imm_u as u32)),
            0x6f => {
                self.set(rd, self.pc.wrapping_add(4));
                next_pc = self.pc.wrapping_add(imm_j as u32);
            }
            0x67 => {
                let target = rs1v.wrapping_add(imm_i as u32) & !1;
                self.set(rd, self.pc.wrapping_add(4));
                next_pc = target;
            }
            0x63 => {
                let taken = match funct3 {
                    0 => rs1v == rs2v,
                    1 => rs1v != rs2v,
                    4 => (rs1v as i32) < (rs2v as i32),
                    5 => (rs1v as i32) >= (rs2v as i32),
                    6 => rs1v < rs2v,
                    7 => rs1v >= rs2v,
                    _ => return RefStop::Fault,
                };
                if taken {
                    next_pc = self.pc.wrapping_add(imm_b as u32);
                }
            }
            0x03 => {
                let addr = rs1v.wrapping_add(imm_i as u32);
                let value = match funct3 {
                    0 => self.read(addr, 1) as i8 as i32 as u32,
                    1 => {
                        if addr % 2 != 0 {
                            return RefStop::Fault;
                        }
                        self.read(addr, 2) as i16 as i32 as u32
                    }
                    2 => {
                        if addr % 4 != 0 {
                            return RefStop::Fault;
                        }
                        self.read(addr, 4)
                    }
                    4 => self.read(addr, 1),
                    5 => {
                        if addr % 2 != 0 {
                            return RefStop::Fault;
                        }
                        self.read(addr, 2)
                    }
                    _ => return RefStop::Fault,
                };
                self.set(rd, value);
            }
            0x23 => {
                let addr = rs1v.wrapping_add(imm_s as u32);
                match funct3 {
                    0 => self.write(addr, 1, rs2v),
                    1 => {
                        if addr % 2 != 0 {
                            return RefStop::Fault;
                        }
                        self.write(addr, 2, rs2v);
                    }
                    2 => {
                        if addr % 4 != 0 {
                            return RefStop::Fault;
                        }
                        self.write(addr, 4, rs2v);
                    }
                    _ => return RefStop::Fault,
                }
            }
            0x13 => {
                let shamt = (w >> 20) & 31;
                let value = match funct3 {
                    0 => rs1v.wrapping_add(imm_i as u32),
                    1 => rs1v << shamt,
                    2 => ((rs1v as i32) < imm_i) as u32,
                    3 => (rs1v < imm_i as u32) as u32,
                    4 => rs1v ^ imm_i as u32,
                    5 if bit30 => ((rs1v as i32) >> shamt) as u32,
                    5 => rs1v >> shamt,
                    6 => rs1v | imm_i as u32,
                    7 => rs1v & imm_i as u32,
                    _ => unreachable!(),
                };
                self.set(rd, value);
            }
            0x33 => {
                let m_ext = (w >> 25) & 0x7f == 1;
                let value = if m_ext {
                    let a = rs1v;
                    let b = rs2v;
                    match funct3 {
                        0 => a.wrapping_mul(b),
                        1 => ((a as i32 as i64).wrapping_mul(b as i32 as i64) >> 32) as u32,
                        2 => ((a as i32 as i64).wrapping_mul(b as i64) >> 32) as u32,
                        3 => ((a as u64 * b as u64) >> 32) as u32,
                        4 => {
                            if b == 0 {
                                u32::MAX
                            } else if a == i32::MIN as u32 && b == u32::MAX {
                                a
                            } else {
                                (a as i32).wrapping_div(b as i32) as u32
                            }
                        }
                        5 => {
                            if b == 0 {
                                u32::MAX
                            } else {
                                a / b
                            }
                        }
                        6 => {
                            if b == 0 {
                                a
                            } else if a == i32::MIN as u32 && b == u32::MAX {
                                0
                            } else {
                                (a as i32).wrapping_rem(b as i32) as u32
                            }
                        }
                        7 => {
                            if b == 0 {
                                a
                            } else {
                                a % b
                            }
                        }
                        _ => unreachable!(),
                    }
                } else {
                    match funct3 {
                        0 if bit30 => rs1v.wrapping_sub(rs2v),
                        0 => rs1v.wrapping_add(rs2v),
                        1 => rs1v << (rs2v & 31),
                        2 => ((rs1v as i32) < (rs2v as i32)) as u32,
                        3 => (rs1v < rs2v) as u32,
                        4 => rs1v ^ rs2v,
                        5 if bit30 => ((rs1v as i32) >> (rs2v & 31)) as u32,
                        5 => rs1v >> (rs2v & 31),
                        6 => rs1v | rs2v,
                        7 => rs1v & rs2v,
                        _ => unreachable!(),
                    }
                };
                self.set(rd, value);
            }
            0x0f => {} // fence: no-op
            0x73 => {
                if w == 0x0000_0073 {
                    // ecall
                    if self.regs[17] == 93 {
                        return RefStop::Exited(self.regs[10]);
                    }
                    return RefStop::Fault;
                }
                return RefStop::Fault; // ebreak or anything else
            }
            0x0b => {
                // trace-control marker words: architectural no-ops
                if w != 0x0000_000b && w != 0x0000_100b {
                    return RefStop::Fault;
                }
            }
            _ => return RefStop::Fault,
        }
        self.pc = next_pc;
        RefStop::Running
    }

    pub fn run(&mut self, max_steps: u64) -> RefStop {
        for _ in 0..max_steps {
            match self.step() {
                RefStop::Running => {}
                stop => return stop,
            }
        }
        RefStop::Running
    }
}

// ---------------------------------------------------------------------------
// Random straight-line snippet generator
// ---------------------------------------------------------------------------

/// A generated guest: marker-wrapped straight-line body, exit-ecall tail.
pub struct Snippet {
    pub words: Vec<u32>,
}

impl Snippet {
    pub fn image(&self) -> Vec<u8> {
        zktracer::mtu::encode::to_image(&self.words)
    }
}

/// Builds a random straight-line RV32IM snippet: seed registers (including
/// 0, −1 and `i32::MIN` so division and high-multiply corner cases come up
/// constantly), a run of random register-register and register-immediate
/// arithmetic, then the exit sequence. No branches, jumps, or memory ops,
/// so every generated program terminates.
pub fn random_snippet<R: Rng>(rng: &mut R, body_len: usize) -> Snippet {
    use zktracer::mtu::encode::*;
    let mut words = Vec::new();
    // Deterministically interesting operands plus random ones.
    words.push(addi(8, 0, 0)); // x8 = 0
    words.push(addi(9, 0, -1)); // x9 = 0xffff_ffff
    words.push(lui(11, 0x8000_0000u32 as i32)); // x11 = i32::MIN
    for r in 1..8u32 {
        words.push(addi(r, 0, rng.gen_range(-2048..2048)));
    }
    words.push(encode_trace_ctl(TraceCtl::On));
    for _ in 0..body_len {
        let rd = rng.gen_range(1..16);
        let rs1 = rng.gen_range(0..16);
        let rs2 = rng.gen_range(0..16);
        let word = match rng.gen_range(0..22) {
            0 => add(rd, rs1, rs2),
            1 => sub(rd, rs1, rs2),
            2 => sll(rd, rs1, rs2),
            3 => slt(rd, rs1, rs2),
            4 => sltu(rd, rs1, rs2),
            5 => xor(rd, rs1, rs2),
            6 => srl(rd, rs1, rs2),
            7 => sra(rd, rs1, rs2),
            8 => or(rd, rs1, rs2),
            9 => and(rd, rs1, rs2),
            10 => mul(rd, rs1, rs2),
            11 => mulh(rd, rs1, rs2),
            12 => mulhsu(rd, rs1, rs2),
            13 => mulhu(rd, rs1, rs2),
            14 => div(rd, rs1, rs2),
            15 => divu(rd, rs1, rs2),
            16 => rem(rd, rs1, rs2),
            17 => remu(rd, rs1, rs2),
            18 => addi(rd, rs1, rng.gen_range(-2048..2048)),
            19 => slli(rd, rs1, rng.gen_range(0..32)),
            20 => srai(rd, rs1, rng.gen_range(0..32)),
            21 => xori(rd, rs1, rng.gen_range(-2048..2048)),
            _ => unreachable!(),
        };
        words.push(word);
    }
    words.push(encode_trace_ctl(TraceCtl::Off));
    words.push(addi(17, 0, 93));
    words.push(andi(10, rng.gen_range(1..16), 0xff)); // exit code from a live register
    words.push(ecall());
    Snippet { words }
}

// ---------------------------------------------------------------------------
// No-trace step-counter oracle
// ---------------------------------------------------------------------------

/// Expected dynamic row counts, derived without the trace machinery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpectedRows {
    pub cpu: usize,
    pub alu: usize,
    pub mem: usize,
    pub exit_code: u32,
    pub steps: u64,
}

const TRACE_ON_WORD: u32 = 0x0000_000b;
const TRACE_OFF_WORD: u32 = 0x0000_100b;

/// Steps a machine built with `trace_ctl_enabled = false` (so it emits no
/// rows at all) and counts, from the raw instruction words alone, the rows
/// a traced run must produce: every instruction retired while the marker
/// state is on is a CPU row — markers themselves excluded — arithmetic
/// opcodes (0x33, 0x13) additionally an ALU row, loads and stores (0x03,
/// 0x23) additionally a MEM row. Panics unless the guest exits cleanly.
pub fn count_rows_untraced(mut machine: Machine, max_steps: u64) -> ExpectedRows {
    let mut expected = ExpectedRows {
        cpu: 0,
        alu: 0,
        mem: 0,
        exit_code: 0,
        steps: 0,
    };
    let mut marker_on = false;
    for _ in 0..max_steps {
        let word = machine.peek(machine.pc(), 4);
        match machine.step() {
            StepOutcome::Running => {}
            StepOutcome::Exited(code) => {
                if marker_on {
                    expected.cpu += 1; // the exit ecall completes, so it counts
                }
                expected.exit_code = code;
                expected.steps = machine.steps_executed();
                return expected;
            }
            StepOutcome::Faulted(fault) => panic!("oracle guest faulted: {fault}"),
        }
        match word {
            TRACE_ON_WORD => marker_on = true,
            TRACE_OFF_WORD => marker_on = false,
            w if marker_on => {
                expected.cpu += 1;
                match w & 0x7f {
                    0x33 | 0x13 => expected.alu += 1,
                    0x03 | 0x23 => expected.mem += 1,
                    _ => {}
                }
            }
            _ => {}
        }
    }
    panic!("oracle guest did not halt within {max_steps} steps");
}
