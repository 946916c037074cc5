//! RV32IM instruction decoding.
//!
//! [`decode`] maps a 32-bit instruction word to a [`DecodedInstr`] or `None`
//! for encodings outside the supported set (RV32I + M, `fence`, `ecall`,
//! `ebreak`, and the two trace-control instructions on the custom-0 opcode).
//! Illegal encodings are rejected here, at decode, so the execution core only
//! ever sees well-formed instructions.

/// Every supported instruction, with a stable numeric id.
///
/// The discriminant doubles as the `opcode_id` column of the CPU trace
/// table, so the values are part of the trace format and must not be
/// reordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u32)]
pub enum InstrKind {
    Lui = 0,
    Auipc = 1,
    Jal = 2,
    Jalr = 3,
    Beq = 4,
    Bne = 5,
    Blt = 6,
    Bge = 7,
    Bltu = 8,
    Bgeu = 9,
    Lb = 10,
    Lh = 11,
    Lw = 12,
    Lbu = 13,
    Lhu = 14,
    Sb = 15,
    Sh = 16,
    Sw = 17,
    Addi = 18,
    Slti = 19,
    Sltiu = 20,
    Xori = 21,
    Ori = 22,
    Andi = 23,
    Slli = 24,
    Srli = 25,
    Srai = 26,
    Add = 27,
    Sub = 28,
    Sll = 29,
    Slt = 30,
    Sltu = 31,
    Xor = 32,
    Srl = 33,
    Sra = 34,
    Or = 35,
    And = 36,
    Mul = 37,
    Mulh = 38,
    Mulhsu = 39,
    Mulhu = 40,
    Div = 41,
    Divu = 42,
    Rem = 43,
    Remu = 44,
    Fence = 45,
    Ecall = 46,
    Ebreak = 47,
    TraceOn = 48,
    TraceOff = 49,
}

/// ALU operation ids for the `alu_op_id` column of the ALU trace table.
/// Register-register and register-immediate forms share an id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum AluOp {
    Add = 0,
    Sub = 1,
    Sll = 2,
    Slt = 3,
    Sltu = 4,
    Xor = 5,
    Srl = 6,
    Sra = 7,
    Or = 8,
    And = 9,
    Mul = 10,
    Mulh = 11,
    Mulhsu = 12,
    Mulhu = 13,
    Div = 14,
    Divu = 15,
    Rem = 16,
    Remu = 17,
}

/// A decoded instruction: kind, register indices, and the sign-extended
/// immediate (for shifts, the 5-bit shift amount; for `lui`/`auipc`, the
/// already-shifted 20-bit immediate).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodedInstr {
    pub kind: InstrKind,
    pub rd: u32,
    pub rs1: u32,
    pub rs2: u32,
    pub imm: i32,
}

impl DecodedInstr {
    /// The class of instruction the ALU table records: register-register and
    /// register-immediate arithmetic. Branches, jumps, memory accesses and
    /// upper-immediate loads compute through other datapaths in this model.
    pub fn alu_op(&self) -> Option<AluOp> {
        use InstrKind::*;
        Some(match self.kind {
            Addi | Add => AluOp::Add,
            Sub => AluOp::Sub,
            Slli | Sll => AluOp::Sll,
            Slti | Slt => AluOp::Slt,
            Sltiu | Sltu => AluOp::Sltu,
            Xori | Xor => AluOp::Xor,
            Srli | Srl => AluOp::Srl,
            Srai | Sra => AluOp::Sra,
            Ori | Or => AluOp::Or,
            Andi | And => AluOp::And,
            Mul => AluOp::Mul,
            Mulh => AluOp::Mulh,
            Mulhsu => AluOp::Mulhsu,
            Mulhu => AluOp::Mulhu,
            Div => AluOp::Div,
            Divu => AluOp::Divu,
            Rem => AluOp::Rem,
            Remu => AluOp::Remu,
            _ => return None,
        })
    }

    /// True for the register-register forms (OP and M-extension), whose
    /// second ALU operand comes from rs2 rather than the immediate.
    pub fn is_reg_reg(&self) -> bool {
        use InstrKind::*;
        matches!(
            self.kind,
            Add | Sub
                | Sll
                | Slt
                | Sltu
                | Xor
                | Srl
                | Sra
                | Or
                | And
                | Mul
                | Mulh
                | Mulhsu
                | Mulhu
                | Div
                | Divu
                | Rem
                | Remu
        )
    }

    pub fn is_load(&self) -> bool {
        use InstrKind::*;
        matches!(self.kind, Lb | Lh | Lw | Lbu | Lhu)
    }

    pub fn is_store(&self) -> bool {
        use InstrKind::*;
        matches!(self.kind, Sb | Sh | Sw)
    }

    pub fn is_mem_op(&self) -> bool {
        self.is_load() || self.is_store()
    }

    pub fn is_branch(&self) -> bool {
        use InstrKind::*;
        matches!(self.kind, Beq | Bne | Blt | Bge | Bltu | Bgeu)
    }
}

#[inline]
fn rd(word: u32) -> u32 {
    (word >> 7) & 0x1f
}

#[inline]
fn funct3(word: u32) -> u32 {
    (word >> 12) & 0x7
}

#[inline]
fn rs1(word: u32) -> u32 {
    (word >> 15) & 0x1f
}

#[inline]
fn rs2(word: u32) -> u32 {
    (word >> 20) & 0x1f
}

#[inline]
fn funct7(word: u32) -> u32 {
    word >> 25
}

#[inline]
fn imm_i(word: u32) -> i32 {
    (word as i32) >> 20
}

#[inline]
fn imm_s(word: u32) -> i32 {
    (((word & 0xfe00_0000) as i32) >> 20) | (((word >> 7) & 0x1f) as i32)
}

#[inline]
fn imm_b(word: u32) -> i32 {
    (((word & 0x8000_0000) as i32) >> 19)
        | ((((word >> 7) & 0x1) << 11) as i32)
        | ((((word >> 25) & 0x3f) << 5) as i32)
        | ((((word >> 8) & 0xf) << 1) as i32)
}

#[inline]
fn imm_u(word: u32) -> i32 {
    (word & 0xffff_f000) as i32
}

#[inline]
fn imm_j(word: u32) -> i32 {
    (((word & 0x8000_0000) as i32) >> 11)
        | ((word & 0x000f_f000) as i32)
        | ((((word >> 20) & 0x1) << 11) as i32)
        | ((((word >> 21) & 0x3ff) << 1) as i32)
}

/// Decodes one instruction word; `None` for any unsupported or malformed
/// encoding.
pub fn decode(word: u32) -> Option<DecodedInstr> {
    use InstrKind::*;
    let opcode = word & 0x7f;
    let (kind, rd, rs1, rs2, imm) = match opcode {
        0x37 => (Lui, rd(word), 0, 0, imm_u(word)),
        0x17 => (Auipc, rd(word), 0, 0, imm_u(word)),
        0x6f => (Jal, rd(word), 0, 0, imm_j(word)),
        0x67 => match funct3(word) {
            0 => (Jalr, rd(word), rs1(word), 0, imm_i(word)),
            _ => return None,
        },
        0x63 => {
            let kind = match funct3(word) {
                0 => Beq,
                1 => Bne,
                4 => Blt,
                5 => Bge,
                6 => Bltu,
                7 => Bgeu,
                _ => return None,
            };
            (kind, 0, rs1(word), rs2(word), imm_b(word))
        }
        0x03 => {
            let kind = match funct3(word) {
                0 => Lb,
                1 => Lh,
                2 => Lw,
                4 => Lbu,
                5 => Lhu,
                _ => return None,
            };
            (kind, rd(word), rs1(word), 0, imm_i(word))
        }
        0x23 => {
            let kind = match funct3(word) {
                0 => Sb,
                1 => Sh,
                2 => Sw,
                _ => return None,
            };
            (kind, 0, rs1(word), rs2(word), imm_s(word))
        }
        0x13 => match funct3(word) {
            0 => (Addi, rd(word), rs1(word), 0, imm_i(word)),
            2 => (Slti, rd(word), rs1(word), 0, imm_i(word)),
            3 => (Sltiu, rd(word), rs1(word), 0, imm_i(word)),
            4 => (Xori, rd(word), rs1(word), 0, imm_i(word)),
            6 => (Ori, rd(word), rs1(word), 0, imm_i(word)),
            7 => (Andi, rd(word), rs1(word), 0, imm_i(word)),
            1 => match funct7(word) {
                0x00 => (Slli, rd(word), rs1(word), 0, rs2(word) as i32),
                _ => return None,
            },
            5 => match funct7(word) {
                0x00 => (Srli, rd(word), rs1(word), 0, rs2(word) as i32),
                0x20 => (Srai, rd(word), rs1(word), 0, rs2(word) as i32),
                _ => return None,
            },
            _ => unreachable!("funct3 is three bits"),
        },
        0x33 => {
            let kind = match (funct7(word), funct3(word)) {
                (0x00, 0) => Add,
                (0x20, 0) => Sub,
                (0x00, 1) => Sll,
                (0x00, 2) => Slt,
                (0x00, 3) => Sltu,
                (0x00, 4) => Xor,
                (0x00, 5) => Srl,
                (0x20, 5) => Sra,
                (0x00, 6) => Or,
                (0x00, 7) => And,
                (0x01, 0) => Mul,
                (0x01, 1) => Mulh,
                (0x01, 2) => Mulhsu,
                (0x01, 3) => Mulhu,
                (0x01, 4) => Div,
                (0x01, 5) => Divu,
                (0x01, 6) => Rem,
                (0x01, 7) => Remu,
                _ => return None,
            };
            (kind, rd(word), rs1(word), rs2(word), 0)
        }
        0x0f => match funct3(word) {
            // fence: a memory-ordering hint with no effect on this
            // single-hart, strongly-ordered model; operand fields ignored.
            0 => (Fence, 0, 0, 0, 0),
            _ => return None,
        },
        0x73 => match word {
            0x0000_0073 => (Ecall, 0, 0, 0, 0),
            0x0010_0073 => (Ebreak, 0, 0, 0, 0),
            // No CSR support; everything else on SYSTEM is illegal.
            _ => return None,
        },
        // custom-0: trace control. The encoding is strict — rd, rs1, rs2 and
        // funct7 must all be zero, so the two valid words are unique.
        0x0b => match word {
            0x0000_000b => (TraceOn, 0, 0, 0, 0),
            0x0000_100b => (TraceOff, 0, 0, 0, 0),
            _ => return None,
        },
        _ => return None,
    };
    Some(DecodedInstr {
        kind,
        rd,
        rs1,
        rs2,
        imm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mtu::encode;

    #[test]
    fn decodes_addi() {
        // addi x1, x0, 5
        let d = decode(encode::addi(1, 0, 5)).unwrap();
        assert_eq!(d.kind, InstrKind::Addi);
        assert_eq!((d.rd, d.rs1, d.imm), (1, 0, 5));
        assert_eq!(d.alu_op(), Some(AluOp::Add));
    }

    #[test]
    fn decodes_negative_immediates() {
        let d = decode(encode::addi(3, 3, -1)).unwrap();
        assert_eq!(d.imm, -1);
        let d = decode(encode::sw(2, 5, -8)).unwrap();
        assert_eq!(d.kind, InstrKind::Sw);
        assert_eq!((d.rs1, d.rs2, d.imm), (2, 5, -8));
    }

    #[test]
    fn decodes_branch_offsets() {
        for offset in [-4096, -64, -4, 4, 64, 4094] {
            let offset = offset & !1;
            let d = decode(encode::beq(1, 2, offset)).unwrap();
            assert_eq!(d.kind, InstrKind::Beq);
            assert_eq!(d.imm, offset, "offset {offset}");
        }
    }

    #[test]
    fn decodes_jal_offsets() {
        for offset in [-1048576, -2048, -4, 4, 2048, 1048574] {
            let d = decode(encode::jal(1, offset)).unwrap();
            assert_eq!(d.kind, InstrKind::Jal);
            assert_eq!(d.imm, offset, "offset {offset}");
        }
    }

    #[test]
    fn decodes_lui_shifted_immediate() {
        let d = decode(encode::lui(7, 0xdead_b000u32 as i32)).unwrap();
        assert_eq!(d.kind, InstrKind::Lui);
        assert_eq!(d.imm as u32, 0xdead_b000);
    }

    #[test]
    fn decodes_m_extension() {
        let d = decode(encode::mul(1, 2, 3)).unwrap();
        assert_eq!(d.kind, InstrKind::Mul);
        let d = decode(encode::remu(4, 5, 6)).unwrap();
        assert_eq!(d.kind, InstrKind::Remu);
        assert_eq!(d.alu_op(), Some(AluOp::Remu));
    }

    #[test]
    fn trace_control_words() {
        assert_eq!(decode(0x0000_000b).unwrap().kind, InstrKind::TraceOn);
        assert_eq!(decode(0x0000_100b).unwrap().kind, InstrKind::TraceOff);
        // Any nonzero rd/rs1/funct7 bits make the word illegal.
        assert_eq!(decode(0x0000_008b), None);
        assert_eq!(decode(0x0000_800b), None);
        assert_eq!(decode(0x4000_000b), None);
        assert_eq!(decode(0x0000_200b), None);
    }

    #[test]
    fn rejects_illegal_words() {
        assert_eq!(decode(0x0000_0000), None);
        assert_eq!(decode(0xffff_ffff), None);
        // SYSTEM with CSR funct3.
        assert_eq!(decode(0x3020_0073), None);
        // srai with bad funct7.
        assert_eq!(decode(0x4000_0013 | (1 << 12) | (1 << 26)), None);
    }

    #[test]
    fn shift_amounts_use_rs2_field() {
        let d = decode(encode::slli(2, 3, 31)).unwrap();
        assert_eq!(d.imm, 31);
        let d = decode(encode::srai(2, 3, 17)).unwrap();
        assert_eq!(d.kind, InstrKind::Srai);
        assert_eq!(d.imm, 17);
    }
}
