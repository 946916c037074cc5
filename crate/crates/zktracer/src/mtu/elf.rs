//! Minimal loader for 32-bit little-endian RISC-V executable images.
//!
//! Only what a bare-metal guest needs is supported: the identification
//! header, the program-header table, and `PT_LOAD` segments. Section
//! headers, relocation, and dynamic linking are ignored entirely. The PROG
//! trace table is populated from executable (`PF_X`) segments only, so data
//! segments do not masquerade as code in the program listing.

use super::machine::{Machine, MachineConfig};
use super::GuestLoadError;
use thiserror::Error;

const ELF_MAGIC: [u8; 4] = [0x7f, b'E', b'L', b'F'];
const EM_RISCV: u16 = 243;
const PT_LOAD: u32 = 1;
const PF_X: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ElfError {
    #[error("not an ELF image (bad magic)")]
    BadMagic,
    #[error("unsupported ELF format: need 32-bit, little-endian, version 1")]
    UnsupportedFormat,
    #[error("unsupported ELF machine {found}, need RISC-V ({EM_RISCV})")]
    WrongMachine { found: u16 },
    #[error("ELF image truncated while reading {context}")]
    Truncated { context: &'static str },
    #[error("segment {index} extends past the end of the file")]
    SegmentOutOfFile { index: usize },
    #[error("segment {index} declares mem size {memsz} smaller than file size {filesz}")]
    BadSegmentSize { index: usize, memsz: u32, filesz: u32 },
}

/// One loadable segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElfSegment {
    pub vaddr: u32,
    /// Initialised bytes (`p_filesz` of them); the remainder up to `memsz`
    /// is zero-filled.
    pub data: Vec<u8>,
    pub memsz: u32,
    pub executable: bool,
}

/// The parts of an executable image the machine cares about.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElfImage {
    pub entry: u32,
    pub segments: Vec<ElfSegment>,
}

/// True when `bytes` starts with the ELF magic — used to choose between the
/// ELF and flat-binary load paths.
pub fn is_elf(bytes: &[u8]) -> bool {
    bytes.len() >= 4 && bytes[0..4] == ELF_MAGIC
}

fn u16_at(bytes: &[u8], offset: usize, context: &'static str) -> Result<u16, ElfError> {
    bytes
        .get(offset..offset + 2)
        .map(|b| u16::from_le_bytes(b.try_into().unwrap()))
        .ok_or(ElfError::Truncated { context })
}

fn u32_at(bytes: &[u8], offset: usize, context: &'static str) -> Result<u32, ElfError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or(ElfError::Truncated { context })
}

/// Parses the header and `PT_LOAD` program headers of a 32-bit little-endian
/// RISC-V executable.
pub fn parse_elf32(bytes: &[u8]) -> Result<ElfImage, ElfError> {
    if bytes.len() < 4 || bytes[0..4] != ELF_MAGIC {
        return Err(ElfError::BadMagic);
    }
    if bytes.len() < 52 {
        return Err(ElfError::Truncated {
            context: "ELF header",
        });
    }
    // EI_CLASS = ELFCLASS32, EI_DATA = ELFDATA2LSB, EI_VERSION = 1.
    if bytes[4] != 1 || bytes[5] != 1 || bytes[6] != 1 {
        return Err(ElfError::UnsupportedFormat);
    }
    let machine = u16_at(bytes, 18, "machine")?;
    if machine != EM_RISCV {
        return Err(ElfError::WrongMachine { found: machine });
    }
    let entry = u32_at(bytes, 24, "entry")?;
    let phoff = u32_at(bytes, 28, "program header offset")? as usize;
    let phentsize = u16_at(bytes, 42, "program header entry size")? as usize;
    let phnum = u16_at(bytes, 44, "program header count")? as usize;
    if phentsize < 32 {
        return Err(ElfError::UnsupportedFormat);
    }

    let mut segments = Vec::new();
    for index in 0..phnum {
        let ph = phoff + index * phentsize;
        let p_type = u32_at(bytes, ph, "program header type")?;
        if p_type != PT_LOAD {
            continue;
        }
        let p_offset = u32_at(bytes, ph + 4, "segment offset")? as usize;
        let p_vaddr = u32_at(bytes, ph + 8, "segment vaddr")?;
        let p_filesz = u32_at(bytes, ph + 16, "segment file size")? as usize;
        let p_memsz = u32_at(bytes, ph + 20, "segment mem size")?;
        let p_flags = u32_at(bytes, ph + 24, "segment flags")?;
        if p_memsz < p_filesz as u32 {
            return Err(ElfError::BadSegmentSize {
                index,
                memsz: p_memsz,
                filesz: p_filesz as u32,
            });
        }
        let data = bytes
            .get(p_offset..p_offset + p_filesz)
            .ok_or(ElfError::SegmentOutOfFile { index })?
            .to_vec();
        segments.push(ElfSegment {
            vaddr: p_vaddr,
            data,
            memsz: p_memsz,
            executable: p_flags & PF_X != 0,
        });
    }
    Ok(ElfImage { entry, segments })
}

/// Parses an ELF image and builds a ready-to-run machine from it: segments
/// copied into memory, PROG rows for the executable segments, pc at the
/// image's entry point.
pub fn load_elf_guest(bytes: &[u8], config: MachineConfig) -> Result<Machine, GuestLoadError> {
    let image = parse_elf32(bytes)?;
    let mut m = Machine::new(config);
    for seg in &image.segments {
        m.load_segment(&seg.data, seg.vaddr)?;
        // The zero-filled tail (bss) must also fit the memory range; memory
        // is already zero-initialised, so fitting is all that is required.
        if seg.memsz as usize > seg.data.len() {
            let tail_base = seg.vaddr.wrapping_add(seg.data.len() as u32);
            let tail_len = seg.memsz as usize - seg.data.len();
            m.ensure_range(tail_base, tail_len)?;
        }
        if seg.executable {
            m.add_prog_rows(&seg.data, seg.vaddr);
        }
    }
    if image.entry % 4 != 0 {
        return Err(super::machine::LoadError::MisalignedEntry { entry: image.entry }.into());
    }
    let entry_in_code = image.segments.iter().any(|seg| {
        seg.executable
            && (seg.vaddr..seg.vaddr.wrapping_add(seg.memsz)).contains(&image.entry)
    });
    if !entry_in_code {
        return Err(super::machine::LoadError::EntryOutsideImage { entry: image.entry }.into());
    }
    m.set_pc(image.entry);
    Ok(m)
}

/// Assembles a minimal single- or multi-segment ELF32 image — the inverse of
/// [`parse_elf32`] for exactly the subset it understands. Used to generate
/// test images; segment tuples are `(vaddr, bytes, executable)`.
pub fn build_elf32(entry: u32, segments: &[(u32, &[u8], bool)]) -> Vec<u8> {
    let ehsize = 52usize;
    let phentsize = 32usize;
    let phoff = ehsize;
    let data_start = phoff + segments.len() * phentsize;

    let mut out = Vec::new();
    out.extend_from_slice(&ELF_MAGIC);
    out.push(1); // ELFCLASS32
    out.push(1); // ELFDATA2LSB
    out.push(1); // EV_CURRENT
    out.extend_from_slice(&[0; 9]); // padding to e_ident[16]
    out.extend_from_slice(&2u16.to_le_bytes()); // e_type = EXEC
    out.extend_from_slice(&EM_RISCV.to_le_bytes());
    out.extend_from_slice(&1u32.to_le_bytes()); // e_version
    out.extend_from_slice(&entry.to_le_bytes());
    out.extend_from_slice(&(phoff as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes()); // e_shoff
    out.extend_from_slice(&0u32.to_le_bytes()); // e_flags
    out.extend_from_slice(&(ehsize as u16).to_le_bytes());
    out.extend_from_slice(&(phentsize as u16).to_le_bytes());
    out.extend_from_slice(&(segments.len() as u16).to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes()); // e_shentsize
    out.extend_from_slice(&0u16.to_le_bytes()); // e_shnum
    out.extend_from_slice(&0u16.to_le_bytes()); // e_shstrndx
    assert_eq!(out.len(), ehsize);

    let mut offset = data_start;
    for (vaddr, data, executable) in segments {
        out.extend_from_slice(&PT_LOAD.to_le_bytes());
        out.extend_from_slice(&(offset as u32).to_le_bytes());
        out.extend_from_slice(&vaddr.to_le_bytes());
        out.extend_from_slice(&vaddr.to_le_bytes()); // p_paddr
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(&(data.len() as u32).to_le_bytes()); // p_memsz
        let flags = 4 | 2 | if *executable { PF_X } else { 0 };
        out.extend_from_slice(&flags.to_le_bytes());
        out.extend_from_slice(&4u32.to_le_bytes()); // p_align
        offset += data.len();
    }
    for (_, data, _) in segments {
        out.extend_from_slice(data);
    }
    out
}
