//! The Main Trace Unit: an RV32IM interpreter with a trace-collection side
//! channel.
//!
//! The modeled core is in-order and instruction-atomic — pipeline timing
//! belongs to the [`crate::perf`] model, not here. Two custom instructions on
//! the custom-0 opcode, `trace_on` and `trace_off`, bracket the region of
//! interest: while tracing is on, every completed instruction is captured
//! into the multi-table main trace (see [`crate::trace`]).
//!
//! Guests are loaded either from flat binary images (caller supplies base
//! and entry addresses) or from minimal 32-bit little-endian RISC-V
//! executables (entry and layout read from the image). A guest exits by
//! issuing `ecall` with 93 in a7; the exit code is taken from a0. `ebreak`
//! and any unsupported instruction or bad memory access halt with a
//! distinguishable fault.

pub mod decode;
pub mod elf;
pub mod encode;
mod machine;

pub use machine::{
    AccessKind, Fault, LoadError, Machine, MachineConfig, RunResult, StepOutcome, Termination,
    ECALL_EXIT,
};

use thiserror::Error;

/// Errors from the combined guest-image loading path.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GuestLoadError {
    #[error(transparent)]
    Elf(#[from] elf::ElfError),
    #[error(transparent)]
    Load(#[from] LoadError),
}

/// Loads a guest from raw image bytes, auto-detecting the format: ELF images
/// carry their own entry point and layout, flat binaries use the supplied
/// `base` and `entry`.
pub fn load_guest_image(
    bytes: &[u8],
    base: u32,
    entry: u32,
    config: MachineConfig,
) -> Result<Machine, GuestLoadError> {
    if elf::is_elf(bytes) {
        elf::load_elf_guest(bytes, config)
    } else {
        Ok(Machine::load_guest(bytes, base, entry, config)?)
    }
}
