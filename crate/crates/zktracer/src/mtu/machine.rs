//! The execution core: RV32IM architectural state, the step/run loop, and
//! the trace-collection side channel.
//!
//! Instructions execute atomically with standard RV32IM semantics. While
//! tracing is enabled, every completed instruction appends one CPU-table row;
//! register-register and register-immediate arithmetic additionally append an
//! ALU row, and loads/stores append a MEM row. The `trace_on` / `trace_off`
//! instructions flip the tracing flag and never emit rows themselves, so
//! capture begins with the instruction *after* `trace_on`.
//!
//! Tracing is observational: the architectural outcome of a run (registers,
//! memory, exit code) is identical whether capture is enabled or not, which
//! [`MachineConfig::trace_ctl_enabled`] lets tests check directly.

use crate::field::{fast_mod_red, FieldElement, FieldParams};
use crate::mtu::decode::{decode, DecodedInstr, InstrKind};
use crate::trace::{layout, GuestMeta, MainTrace, TableId};
use std::collections::HashMap;
use thiserror::Error;

const PAGE_SHIFT: u32 = 12;
const PAGE_SIZE: usize = 1 << PAGE_SHIFT;

/// The linux-style exit system call number expected in a7.
pub const ECALL_EXIT: u32 = 93;

/// Memory geometry and tracing behaviour for one machine instance.
#[derive(Debug, Clone)]
pub struct MachineConfig {
    /// Base address of the valid memory range.
    pub mem_base: u32,
    /// Size of the valid memory range in bytes.
    pub mem_size: u32,
    /// When false, `trace_on`/`trace_off` are executed as no-ops and no rows
    /// are ever captured — the reference behaviour for checking that tracing
    /// is architecturally invisible.
    pub trace_ctl_enabled: bool,
    /// Recorded in the trace metadata.
    pub program_name: String,
}

impl Default for MachineConfig {
    fn default() -> MachineConfig {
        MachineConfig {
            mem_base: 0,
            mem_size: 16 << 20,
            trace_ctl_enabled: true,
            program_name: String::new(),
        }
    }
}

/// A memory access direction, for fault reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Load,
    Store,
}

impl core::fmt::Display for AccessKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            AccessKind::Load => "load",
            AccessKind::Store => "store",
        })
    }
}

/// Reasons a guest halts abnormally. Each carries the faulting pc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum Fault {
    #[error("illegal instruction {word:#010x} at pc {pc:#010x}")]
    IllegalInstruction { pc: u32, word: u32 },
    #[error("misaligned instruction fetch at pc {pc:#010x}")]
    MisalignedFetch { pc: u32 },
    #[error("instruction fetch outside memory at pc {pc:#010x}")]
    FetchOutOfRange { pc: u32 },
    #[error("misaligned {kind} of width {width} at address {addr:#010x} (pc {pc:#010x})")]
    MisalignedAccess {
        pc: u32,
        addr: u32,
        width: u32,
        kind: AccessKind,
    },
    #[error("{kind} outside memory at address {addr:#010x} (pc {pc:#010x})")]
    AccessOutOfRange {
        pc: u32,
        addr: u32,
        kind: AccessKind,
    },
    #[error("unsupported ecall number {number} at pc {pc:#010x}")]
    UnsupportedEcall { pc: u32, number: u32 },
    #[error("ebreak at pc {pc:#010x}")]
    Ebreak { pc: u32 },
}

/// Errors loading a guest image.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("image of {len} bytes at base {base:#010x} does not fit the memory range")]
    ImageOverflow { base: u32, len: usize },
    #[error("load base {base:#010x} is not 4-byte aligned")]
    MisalignedBase { base: u32 },
    #[error("entry point {entry:#010x} is not 4-byte aligned")]
    MisalignedEntry { entry: u32 },
    #[error("entry point {entry:#010x} lies outside the loaded image")]
    EntryOutsideImage { entry: u32 },
}

/// Result of a single [`Machine::step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Running,
    Exited(u32),
    Faulted(Fault),
}

/// How a [`Machine::run`] ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Guest called the exit ecall; carries the exit code from a0.
    Exited(u32),
    Faulted(Fault),
    /// The step budget ran out before the guest halted.
    StepLimit,
}

/// Summary of a completed run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunResult {
    pub termination: Termination,
    pub steps_executed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Halt {
    Exited(u32),
    Faulted(Fault),
}

/// RV32IM architectural state plus the trace side channel.
#[derive(Debug)]
pub struct Machine {
    config: MachineConfig,
    pc: u32,
    regs: [u32; 32],
    pages: HashMap<u32, Box<[u8; PAGE_SIZE]>>,
    tracing_enabled: bool,
    clk_traced: u64,
    steps_executed: u64,
    halted: Option<Halt>,
    trace: MainTrace,
}

impl Machine {
    /// Creates a machine with zeroed registers and memory and an empty trace.
    pub fn new(config: MachineConfig) -> Machine {
        let meta = GuestMeta {
            program_name: config.program_name.clone(),
            entry_point: 0,
            instructions_executed: 0,
        };
        Machine {
            config,
            pc: 0,
            regs: [0; 32],
            pages: HashMap::new(),
            tracing_enabled: false,
            clk_traced: 0,
            steps_executed: 0,
            halted: None,
            trace: MainTrace::new(meta),
        }
    }

    /// Loads a flat binary image and prepares the machine to run from
    /// `entry`. The PROG table gets one row per 32-bit word of the image
    /// (a trailing partial word is zero-padded, matching what a fetch from
    /// zero-initialised memory would see).
    pub fn load_guest(
        image: &[u8],
        base: u32,
        entry: u32,
        config: MachineConfig,
    ) -> Result<Machine, LoadError> {
        let mut m = Machine::new(config);
        m.load_segment(image, base)?;
        if entry % 4 != 0 {
            return Err(LoadError::MisalignedEntry { entry });
        }
        let image_end = base as u64 + image.len() as u64;
        if !(base as u64..image_end).contains(&(entry as u64)) {
            return Err(LoadError::EntryOutsideImage { entry });
        }
        m.add_prog_rows(image, base);
        m.pc = entry;
        m.trace.meta.entry_point = entry;
        Ok(m)
    }

    /// Copies one segment of bytes into memory at `base`, range-checked.
    pub(crate) fn load_segment(&mut self, bytes: &[u8], base: u32) -> Result<(), LoadError> {
        if base % 4 != 0 {
            return Err(LoadError::MisalignedBase { base });
        }
        let start = base as u64;
        let end = start + bytes.len() as u64;
        let range_start = self.config.mem_base as u64;
        let range_end = range_start + self.config.mem_size as u64;
        if start < range_start || end > range_end {
            return Err(LoadError::ImageOverflow {
                base,
                len: bytes.len(),
            });
        }
        for (i, &b) in bytes.iter().enumerate() {
            self.write_byte_raw(base.wrapping_add(i as u32), b);
        }
        Ok(())
    }

    /// Checks that `[base, base+len)` lies inside the memory range without
    /// touching it — for zero-filled (bss) regions, which need no writes
    /// into the already-zeroed sparse memory.
    pub(crate) fn ensure_range(&self, base: u32, len: usize) -> Result<(), LoadError> {
        let start = base as u64;
        let end = start + len as u64;
        let range_start = self.config.mem_base as u64;
        let range_end = range_start + self.config.mem_size as u64;
        if start < range_start || end > range_end {
            return Err(LoadError::ImageOverflow { base, len });
        }
        Ok(())
    }

    /// Appends PROG rows for the words of a code image.
    pub(crate) fn add_prog_rows(&mut self, image: &[u8], base: u32) {
        let prog = self.trace.table_mut(TableId::Prog).unwrap();
        for (i, chunk) in image.chunks(4).enumerate() {
            let mut word_bytes = [0u8; 4];
            word_bytes[..chunk.len()].copy_from_slice(chunk);
            let word = u32::from_le_bytes(word_bytes);
            let pc = base + 4 * i as u32;
            prog.push_row(&[fast_mod_red(pc), fast_mod_red(word)]);
        }
    }

    pub(crate) fn set_pc(&mut self, pc: u32) {
        self.pc = pc;
        self.trace.meta.entry_point = pc;
    }

    pub fn pc(&self) -> u32 {
        self.pc
    }

    pub fn regs(&self) -> &[u32; 32] {
        &self.regs
    }

    pub fn tracing_enabled(&self) -> bool {
        self.tracing_enabled
    }

    pub fn steps_executed(&self) -> u64 {
        self.steps_executed
    }

    pub fn trace(&self) -> &MainTrace {
        &self.trace
    }

    pub fn into_trace(self) -> MainTrace {
        self.trace
    }

    fn in_range(&self, addr: u32, len: u32) -> bool {
        let start = addr as u64;
        let end = start + len as u64;
        let range_start = self.config.mem_base as u64;
        let range_end = range_start + self.config.mem_size as u64;
        start >= range_start && end <= range_end
    }

    fn page(&mut self, addr: u32) -> &mut [u8; PAGE_SIZE] {
        self.pages
            .entry(addr >> PAGE_SHIFT)
            .or_insert_with(|| Box::new([0; PAGE_SIZE]))
    }

    fn write_byte_raw(&mut self, addr: u32, value: u8) {
        self.page(addr)[addr as usize & (PAGE_SIZE - 1)] = value;
    }

    fn read_byte_raw(&self, addr: u32) -> u8 {
        match self.pages.get(&(addr >> PAGE_SHIFT)) {
            Some(page) => page[addr as usize & (PAGE_SIZE - 1)],
            None => 0,
        }
    }

    /// Reads a naturally aligned little-endian value of `len` in {1, 2, 4}
    /// bytes, with no fault checks — for loaders, oracles and tests.
    pub fn peek(&self, addr: u32, len: u32) -> u32 {
        let mut v = 0u32;
        for i in 0..len {
            v |= (self.read_byte_raw(addr.wrapping_add(i)) as u32) << (8 * i);
        }
        v
    }

    fn checked_read(&self, pc: u32, addr: u32, len: u32) -> Result<u32, Fault> {
        if addr % len != 0 {
            return Err(Fault::MisalignedAccess {
                pc,
                addr,
                width: len,
                kind: AccessKind::Load,
            });
        }
        if !self.in_range(addr, len) {
            return Err(Fault::AccessOutOfRange {
                pc,
                addr,
                kind: AccessKind::Load,
            });
        }
        Ok(self.peek(addr, len))
    }

    fn checked_write(&mut self, pc: u32, addr: u32, len: u32, value: u32) -> Result<(), Fault> {
        if addr % len != 0 {
            return Err(Fault::MisalignedAccess {
                pc,
                addr,
                width: len,
                kind: AccessKind::Store,
            });
        }
        if !self.in_range(addr, len) {
            return Err(Fault::AccessOutOfRange {
                pc,
                addr,
                kind: AccessKind::Store,
            });
        }
        for i in 0..len {
            self.write_byte_raw(addr.wrapping_add(i), (value >> (8 * i)) as u8);
        }
        Ok(())
    }

    fn write_reg(&mut self, rd: u32, value: u32) {
        if rd != 0 {
            self.regs[rd as usize] = value;
        }
    }

    /// Executes one instruction. Returns the machine's halt status; calling
    /// again after a halt returns the same outcome without side effects.
    pub fn step(&mut self) -> StepOutcome {
        if let Some(halt) = self.halted {
            return match halt {
                Halt::Exited(code) => StepOutcome::Exited(code),
                Halt::Faulted(fault) => StepOutcome::Faulted(fault),
            };
        }
        match self.step_inner() {
            Ok(outcome) => outcome,
            Err(fault) => {
                self.halted = Some(Halt::Faulted(fault));
                StepOutcome::Faulted(fault)
            }
        }
    }

    fn step_inner(&mut self) -> Result<StepOutcome, Fault> {
        let pc = self.pc;
        if pc % 4 != 0 {
            return Err(Fault::MisalignedFetch { pc });
        }
        if !self.in_range(pc, 4) {
            return Err(Fault::FetchOutOfRange { pc });
        }
        let word = self.peek(pc, 4);
        let instr = decode(word).ok_or(Fault::IllegalInstruction { pc, word })?;

        // Operand values are captured before any write-back so the trace
        // records what the datapath actually consumed.
        let rs1_val = self.regs[instr.rs1 as usize];
        let rs2_val = self.regs[instr.rs2 as usize];

        let mut next_pc = pc.wrapping_add(4);
        // Per-instruction capture values; see the CPU-table layout docs.
        let mut alu_result: u32 = 0;
        let mut mem_addr: u32 = 0;
        let mut mem_value: u32 = 0;
        let mut is_mem_write = false;
        let mut exited: Option<u32> = None;

        use InstrKind::*;
        match instr.kind {
            Lui => {
                alu_result = instr.imm as u32;
                self.write_reg(instr.rd, alu_result);
            }
            Auipc => {
                alu_result = pc.wrapping_add(instr.imm as u32);
                self.write_reg(instr.rd, alu_result);
            }
            Jal => {
                alu_result = pc.wrapping_add(4);
                self.write_reg(instr.rd, alu_result);
                next_pc = pc.wrapping_add(instr.imm as u32);
            }
            Jalr => {
                alu_result = pc.wrapping_add(4);
                next_pc = rs1_val.wrapping_add(instr.imm as u32) & !1;
                self.write_reg(instr.rd, alu_result);
            }
            Beq | Bne | Blt | Bge | Bltu | Bgeu => {
                let taken = match instr.kind {
                    Beq => rs1_val == rs2_val,
                    Bne => rs1_val != rs2_val,
                    Blt => (rs1_val as i32) < (rs2_val as i32),
                    Bge => (rs1_val as i32) >= (rs2_val as i32),
                    Bltu => rs1_val < rs2_val,
                    Bgeu => rs1_val >= rs2_val,
                    _ => unreachable!(),
                };
                alu_result = taken as u32;
                if taken {
                    next_pc = pc.wrapping_add(instr.imm as u32);
                }
            }
            Lb | Lh | Lw | Lbu | Lhu => {
                let addr = rs1_val.wrapping_add(instr.imm as u32);
                let width = match instr.kind {
                    Lb | Lbu => 1,
                    Lh | Lhu => 2,
                    _ => 4,
                };
                let raw = self.checked_read(pc, addr, width)?;
                let extended = match instr.kind {
                    Lb => raw as u8 as i8 as i32 as u32,
                    Lh => raw as u16 as i16 as i32 as u32,
                    _ => raw,
                };
                self.write_reg(instr.rd, extended);
                alu_result = addr;
                mem_addr = addr;
                mem_value = raw;
            }
            Sb | Sh | Sw => {
                let addr = rs1_val.wrapping_add(instr.imm as u32);
                let (width, datum) = match instr.kind {
                    Sb => (1, rs2_val & 0xff),
                    Sh => (2, rs2_val & 0xffff),
                    _ => (4, rs2_val),
                };
                self.checked_write(pc, addr, width, datum)?;
                alu_result = addr;
                mem_addr = addr;
                mem_value = datum;
                is_mem_write = true;
            }
            Addi | Slti | Sltiu | Xori | Ori | Andi | Slli | Srli | Srai => {
                let b = instr.imm as u32;
                alu_result = alu_compute(instr.kind, rs1_val, b);
                self.write_reg(instr.rd, alu_result);
            }
            Add | Sub | Sll | Slt | Sltu | Xor | Srl | Sra | Or | And | Mul | Mulh | Mulhsu
            | Mulhu | Div | Divu | Rem | Remu => {
                alu_result = alu_compute(instr.kind, rs1_val, rs2_val);
                self.write_reg(instr.rd, alu_result);
            }
            Fence => {}
            Ecall => {
                let number = self.regs[17];
                if number == ECALL_EXIT {
                    exited = Some(self.regs[10]);
                } else {
                    return Err(Fault::UnsupportedEcall { pc, number });
                }
            }
            Ebreak => {
                return Err(Fault::Ebreak { pc });
            }
            TraceOn => {
                if self.config.trace_ctl_enabled {
                    // Idempotent; capture starts with the next instruction.
                    self.tracing_enabled = true;
                }
            }
            TraceOff => {
                if self.config.trace_ctl_enabled {
                    self.tracing_enabled = false;
                }
            }
        }

        let emit_row = self.tracing_enabled
            && self.config.trace_ctl_enabled
            && !matches!(instr.kind, TraceOn | TraceOff);
        if emit_row {
            self.capture_row(
                pc, word, &instr, rs1_val, rs2_val, alu_result, mem_addr, mem_value, is_mem_write,
            );
        }

        self.steps_executed += 1;
        self.trace.meta.instructions_executed = self.steps_executed;
        self.pc = next_pc;
        if let Some(code) = exited {
            self.halted = Some(Halt::Exited(code));
            return Ok(StepOutcome::Exited(code));
        }
        Ok(StepOutcome::Running)
    }

    #[allow(clippy::too_many_arguments)]
    fn capture_row(
        &mut self,
        pc: u32,
        word: u32,
        instr: &DecodedInstr,
        rs1_val: u32,
        rs2_val: u32,
        alu_result: u32,
        mem_addr: u32,
        mem_value: u32,
        is_mem_write: bool,
    ) {
        let clk = fe_u64(self.clk_traced);
        self.clk_traced += 1;

        let mut cpu_row = [FieldElement::ZERO; layout::cpu::NUM_COLS];
        cpu_row[layout::cpu::CLK] = clk;
        cpu_row[layout::cpu::PC] = fast_mod_red(pc);
        cpu_row[layout::cpu::INSTR_WORD] = fast_mod_red(word);
        cpu_row[layout::cpu::OPCODE_ID] = fast_mod_red(instr.kind as u32);
        cpu_row[layout::cpu::RS1_VAL] = fast_mod_red(rs1_val);
        cpu_row[layout::cpu::RS2_VAL] = fast_mod_red(rs2_val);
        cpu_row[layout::cpu::IMM] = fast_mod_red(instr.imm as u32);
        cpu_row[layout::cpu::ALU_RESULT] = fast_mod_red(alu_result);
        cpu_row[layout::cpu::MEM_ADDR] = fast_mod_red(mem_addr);
        cpu_row[layout::cpu::MEM_VALUE] = fast_mod_red(mem_value);
        cpu_row[layout::cpu::IS_MEM_WRITE] = fast_mod_red(is_mem_write as u32);
        self.trace.table_mut(TableId::Cpu).unwrap().push_row(&cpu_row);

        if let Some(alu_op) = instr.alu_op() {
            // Operand B is whatever the ALU's second port saw: rs2 for
            // register forms, the immediate's bit pattern otherwise.
            let operand_b = if instr.is_reg_reg() {
                rs2_val
            } else {
                instr.imm as u32
            };
            let mut alu_row = [FieldElement::ZERO; layout::alu::NUM_COLS];
            alu_row[layout::alu::CLK] = clk;
            alu_row[layout::alu::ALU_OP_ID] = fast_mod_red(alu_op as u32);
            alu_row[layout::alu::OPERAND_A] = fast_mod_red(rs1_val);
            alu_row[layout::alu::OPERAND_B] = fast_mod_red(operand_b);
            alu_row[layout::alu::RESULT] = fast_mod_red(alu_result);
            self.trace.table_mut(TableId::Alu).unwrap().push_row(&alu_row);
        }

        if instr.is_mem_op() {
            let mut mem_row = [FieldElement::ZERO; layout::mem::NUM_COLS];
            mem_row[layout::mem::ADDR] = fast_mod_red(mem_addr);
            mem_row[layout::mem::CLK] = clk;
            mem_row[layout::mem::VALUE] = fast_mod_red(mem_value);
            mem_row[layout::mem::IS_WRITE] = fast_mod_red(is_mem_write as u32);
            self.trace.table_mut(TableId::Mem).unwrap().push_row(&mem_row);
        }
    }

    /// Steps until the guest halts or `max_steps` instructions have
    /// executed.
    pub fn run(&mut self, max_steps: u64) -> RunResult {
        let mut termination = Termination::StepLimit;
        while self.steps_executed < max_steps {
            match self.step() {
                StepOutcome::Running => {}
                StepOutcome::Exited(code) => {
                    termination = Termination::Exited(code);
                    break;
                }
                StepOutcome::Faulted(fault) => {
                    termination = Termination::Faulted(fault);
                    break;
                }
            }
        }
        RunResult {
            termination,
            steps_executed: self.steps_executed,
        }
    }
}

/// The pure ALU function shared by register-register and
/// register-immediate forms; `b` is the second operand as the ALU sees it.
fn alu_compute(kind: InstrKind, a: u32, b: u32) -> u32 {
    use InstrKind::*;
    match kind {
        Addi | Add => a.wrapping_add(b),
        Sub => a.wrapping_sub(b),
        Slli | Sll => a.wrapping_shl(b & 0x1f),
        Slti | Slt => ((a as i32) < (b as i32)) as u32,
        Sltiu | Sltu => (a < b) as u32,
        Xori | Xor => a ^ b,
        Ori | Or => a | b,
        Andi | And => a & b,
        Srli | Srl => a.wrapping_shr(b & 0x1f),
        Srai | Sra => ((a as i32).wrapping_shr(b & 0x1f)) as u32,
        Mul => a.wrapping_mul(b),
        Mulh => (((a as i32 as i64).wrapping_mul(b as i32 as i64)) >> 32) as u32,
        Mulhsu => (((a as i32 as i64).wrapping_mul(b as i64)) >> 32) as u32,
        Mulhu => (((a as u64) * (b as u64)) >> 32) as u32,
        Div => {
            if b == 0 {
                u32::MAX
            } else if a as i32 == i32::MIN && b as i32 == -1 {
                a
            } else {
                ((a as i32) / (b as i32)) as u32
            }
        }
        Divu => {
            if b == 0 {
                u32::MAX
            } else {
                a / b
            }
        }
        Rem => {
            if b == 0 {
                a
            } else if a as i32 == i32::MIN && b as i32 == -1 {
                0
            } else {
                ((a as i32) % (b as i32)) as u32
            }
        }
        Remu => {
            if b == 0 {
                a
            } else {
                a % b
            }
        }
        _ => unreachable!("not an ALU instruction"),
    }
}

/// Reduces a 64-bit ordinal (the traced-row clock) into the field.
fn fe_u64(x: u64) -> FieldElement {
    FieldElement::new((x % FieldParams::P as u64) as u32).unwrap()
}
