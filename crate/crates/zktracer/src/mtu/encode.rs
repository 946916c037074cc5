//! RV32IM instruction encoding — a small assembler used to build guest
//! programs and test fixtures. Each helper produces the 32-bit word for one
//! instruction; [`decode`](super::decode::decode) inverts every one of them.

/// The trace-control instruction pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceCtl {
    On,
    Off,
}

/// The fixed encodings of the two trace-control instructions: custom-0
/// major opcode (0b0001011) with funct3 selecting on (0) or off (1), all
/// register fields and funct7 zero.
pub fn encode_trace_ctl(kind: TraceCtl) -> u32 {
    match kind {
        TraceCtl::On => 0x0000_000b,
        TraceCtl::Off => 0x0000_100b,
    }
}

fn r_type(funct7: u32, rs2: u32, rs1: u32, funct3: u32, rd: u32, opcode: u32) -> u32 {
    debug_assert!(rd < 32 && rs1 < 32 && rs2 < 32);
    (funct7 << 25) | (rs2 << 20) | (rs1 << 15) | (funct3 << 12) | (rd << 7) | opcode
}

fn i_type(imm: i32, rs1: u32, funct3: u32, rd: u32, opcode: u32) -> u32 {
    debug_assert!((-2048..=2047).contains(&imm), "I-immediate {imm} out of range");
    ((imm as u32 & 0xfff) << 20) | (rs1 << 15) | (funct3 << 12) | (rd << 7) | opcode
}

fn s_type(imm: i32, rs2: u32, rs1: u32, funct3: u32, opcode: u32) -> u32 {
    debug_assert!((-2048..=2047).contains(&imm), "S-immediate {imm} out of range");
    let imm = imm as u32 & 0xfff;
    ((imm >> 5) << 25) | (rs2 << 20) | (rs1 << 15) | (funct3 << 12) | ((imm & 0x1f) << 7) | opcode
}

fn b_type(imm: i32, rs2: u32, rs1: u32, funct3: u32, opcode: u32) -> u32 {
    debug_assert!(
        (-4096..=4094).contains(&imm) && imm % 2 == 0,
        "B-immediate {imm} out of range or odd"
    );
    let imm = imm as u32;
    (((imm >> 12) & 0x1) << 31)
        | (((imm >> 5) & 0x3f) << 25)
        | (rs2 << 20)
        | (rs1 << 15)
        | (funct3 << 12)
        | (((imm >> 1) & 0xf) << 8)
        | (((imm >> 11) & 0x1) << 7)
        | opcode
}

fn u_type(imm: i32, rd: u32, opcode: u32) -> u32 {
    debug_assert!(imm as u32 & 0xfff == 0, "U-immediate must be 4 KiB-aligned");
    (imm as u32) | (rd << 7) | opcode
}

fn j_type(imm: i32, rd: u32, opcode: u32) -> u32 {
    debug_assert!(
        (-1048576..=1048574).contains(&imm) && imm % 2 == 0,
        "J-immediate {imm} out of range or odd"
    );
    let imm = imm as u32;
    (((imm >> 20) & 0x1) << 31)
        | (((imm >> 1) & 0x3ff) << 21)
        | (((imm >> 11) & 0x1) << 20)
        | (((imm >> 12) & 0xff) << 12)
        | (rd << 7)
        | opcode
}

pub fn lui(rd: u32, imm: i32) -> u32 {
    u_type(imm, rd, 0x37)
}

pub fn auipc(rd: u32, imm: i32) -> u32 {
    u_type(imm, rd, 0x17)
}

pub fn jal(rd: u32, offset: i32) -> u32 {
    j_type(offset, rd, 0x6f)
}

pub fn jalr(rd: u32, rs1: u32, offset: i32) -> u32 {
    i_type(offset, rs1, 0, rd, 0x67)
}

pub fn beq(rs1: u32, rs2: u32, offset: i32) -> u32 {
    b_type(offset, rs2, rs1, 0, 0x63)
}

pub fn bne(rs1: u32, rs2: u32, offset: i32) -> u32 {
    b_type(offset, rs2, rs1, 1, 0x63)
}

pub fn blt(rs1: u32, rs2: u32, offset: i32) -> u32 {
    b_type(offset, rs2, rs1, 4, 0x63)
}

pub fn bge(rs1: u32, rs2: u32, offset: i32) -> u32 {
    b_type(offset, rs2, rs1, 5, 0x63)
}

pub fn bltu(rs1: u32, rs2: u32, offset: i32) -> u32 {
    b_type(offset, rs2, rs1, 6, 0x63)
}

pub fn bgeu(rs1: u32, rs2: u32, offset: i32) -> u32 {
    b_type(offset, rs2, rs1, 7, 0x63)
}

pub fn lb(rd: u32, rs1: u32, offset: i32) -> u32 {
    i_type(offset, rs1, 0, rd, 0x03)
}

pub fn lh(rd: u32, rs1: u32, offset: i32) -> u32 {
    i_type(offset, rs1, 1, rd, 0x03)
}

pub fn lw(rd: u32, rs1: u32, offset: i32) -> u32 {
    i_type(offset, rs1, 2, rd, 0x03)
}

pub fn lbu(rd: u32, rs1: u32, offset: i32) -> u32 {
    i_type(offset, rs1, 4, rd, 0x03)
}

pub fn lhu(rd: u32, rs1: u32, offset: i32) -> u32 {
    i_type(offset, rs1, 5, rd, 0x03)
}

pub fn sb(rs1: u32, rs2: u32, offset: i32) -> u32 {
    s_type(offset, rs2, rs1, 0, 0x23)
}

pub fn sh(rs1: u32, rs2: u32, offset: i32) -> u32 {
    s_type(offset, rs2, rs1, 1, 0x23)
}

pub fn sw(rs1: u32, rs2: u32, offset: i32) -> u32 {
    s_type(offset, rs2, rs1, 2, 0x23)
}

pub fn addi(rd: u32, rs1: u32, imm: i32) -> u32 {
    i_type(imm, rs1, 0, rd, 0x13)
}

pub fn slti(rd: u32, rs1: u32, imm: i32) -> u32 {
    i_type(imm, rs1, 2, rd, 0x13)
}

pub fn sltiu(rd: u32, rs1: u32, imm: i32) -> u32 {
    i_type(imm, rs1, 3, rd, 0x13)
}

pub fn xori(rd: u32, rs1: u32, imm: i32) -> u32 {
    i_type(imm, rs1, 4, rd, 0x13)
}

pub fn ori(rd: u32, rs1: u32, imm: i32) -> u32 {
    i_type(imm, rs1, 6, rd, 0x13)
}

pub fn andi(rd: u32, rs1: u32, imm: i32) -> u32 {
    i_type(imm, rs1, 7, rd, 0x13)
}

pub fn slli(rd: u32, rs1: u32, shamt: u32) -> u32 {
    debug_assert!(shamt < 32);
    r_type(0x00, shamt, rs1, 1, rd, 0x13)
}

pub fn srli(rd: u32, rs1: u32, shamt: u32) -> u32 {
    debug_assert!(shamt < 32);
    r_type(0x00, shamt, rs1, 5, rd, 0x13)
}

pub fn srai(rd: u32, rs1: u32, shamt: u32) -> u32 {
    debug_assert!(shamt < 32);
    r_type(0x20, shamt, rs1, 5, rd, 0x13)
}

pub fn add(rd: u32, rs1: u32, rs2: u32) -> u32 {
    r_type(0x00, rs2, rs1, 0, rd, 0x33)
}

pub fn sub(rd: u32, rs1: u32, rs2: u32) -> u32 {
    r_type(0x20, rs2, rs1, 0, rd, 0x33)
}

pub fn sll(rd: u32, rs1: u32, rs2: u32) -> u32 {
    r_type(0x00, rs2, rs1, 1, rd, 0x33)
}

pub fn slt(rd: u32, rs1: u32, rs2: u32) -> u32 {
    r_type(0x00, rs2, rs1, 2, rd, 0x33)
}

pub fn sltu(rd: u32, rs1: u32, rs2: u32) -> u32 {
    r_type(0x00, rs2, rs1, 3, rd, 0x33)
}

pub fn xor(rd: u32, rs1: u32, rs2: u32) -> u32 {
    r_type(0x00, rs2, rs1, 4, rd, 0x33)
}

pub fn srl(rd: u32, rs1: u32, rs2: u32) -> u32 {
    r_type(0x00, rs2, rs1, 5, rd, 0x33)
}

pub fn sra(rd: u32, rs1: u32, rs2: u32) -> u32 {
    r_type(0x20, rs2, rs1, 5, rd, 0x33)
}

pub fn or(rd: u32, rs1: u32, rs2: u32) -> u32 {
    r_type(0x00, rs2, rs1, 6, rd, 0x33)
}

pub fn and(rd: u32, rs1: u32, rs2: u32) -> u32 {
    r_type(0x00, rs2, rs1, 7, rd, 0x33)
}

pub fn mul(rd: u32, rs1: u32, rs2: u32) -> u32 {
    r_type(0x01, rs2, rs1, 0, rd, 0x33)
}

pub fn mulh(rd: u32, rs1: u32, rs2: u32) -> u32 {
    r_type(0x01, rs2, rs1, 1, rd, 0x33)
}

pub fn mulhsu(rd: u32, rs1: u32, rs2: u32) -> u32 {
    r_type(0x01, rs2, rs1, 2, rd, 0x33)
}

pub fn mulhu(rd: u32, rs1: u32, rs2: u32) -> u32 {
    r_type(0x01, rs2, rs1, 3, rd, 0x33)
}

pub fn div(rd: u32, rs1: u32, rs2: u32) -> u32 {
    r_type(0x01, rs2, rs1, 4, rd, 0x33)
}

pub fn divu(rd: u32, rs1: u32, rs2: u32) -> u32 {
    r_type(0x01, rs2, rs1, 5, rd, 0x33)
}

pub fn rem(rd: u32, rs1: u32, rs2: u32) -> u32 {
    r_type(0x01, rs2, rs1, 6, rd, 0x33)
}

pub fn remu(rd: u32, rs1: u32, rs2: u32) -> u32 {
    r_type(0x01, rs2, rs1, 7, rd, 0x33)
}

pub fn fence() -> u32 {
    0x0000_000f
}

pub fn ecall() -> u32 {
    0x0000_0073
}

pub fn ebreak() -> u32 {
    0x0010_0073
}

/// Flattens a sequence of instruction words into a little-endian byte image.
pub fn to_image(words: &[u32]) -> Vec<u8> {
    words.iter().flat_map(|w| w.to_le_bytes()).collect()
}
