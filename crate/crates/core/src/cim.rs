//! Compute-in-memory chip model.
//!
//! Rows act as registers. Activating several rows at once leaves the
//! bitwise AND/OR/XOR of their contents in the sense-amplifier latch; the
//! CMOS periphery then complements, masks, copies or rotates that latch (or
//! a row) back into a row. Only multi-row activation writes the latch.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::wear::{EnergyEvent, EnergyLedger, EnergySource};

pub const DEFAULT_ROW_SIZE: usize = 64;
pub const DEFAULT_ROW_COUNT: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CimError {
    #[error("row {row} out of range (row count {count})")]
    RowOutOfRange { row: usize, count: usize },
    #[error("bitwise operation needs at least two distinct rows, got {0}")]
    TooFewOperands(usize),
    #[error("rotation by {bits} bits exceeds row width {width}")]
    RotationOutOfRange { bits: i64, width: usize },
    #[error("data is {actual} bytes, row size is {expected}")]
    DataLength { expected: usize, actual: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum BitwiseOp {
    And,
    Or,
    Xor,
}

impl BitwiseOp {
    pub fn apply(self, a: u8, b: u8) -> u8 {
        match self {
            BitwiseOp::And => a & b,
            BitwiseOp::Or => a | b,
            BitwiseOp::Xor => a ^ b,
        }
    }
}

/// Operand that is either a row or the sense-amplifier latch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Source {
    Row(usize),
    #[default]
    Latch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CimInstruction {
    CopyToCim { row: usize, data: Vec<u8> },
    CopyToCpu { row: usize },
    Bitwise { op: BitwiseOp, rows: Vec<usize> },
    NotCond { dst: usize, src: Source, bitwise_not: bool, zero_mask: bool },
    Copy { dst: usize, src: Source, rotate_bits: i64 },
    Mac { weights: Vec<usize>, input: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Opcode {
    And,
    Or,
    Xor,
    NotCond,
    Copy,
    CopyToCim,
    CopyToCpu,
    Mac,
}

impl Opcode {
    pub const ALL: [Opcode; 8] = [
        Opcode::And,
        Opcode::Or,
        Opcode::Xor,
        Opcode::NotCond,
        Opcode::Copy,
        Opcode::CopyToCim,
        Opcode::CopyToCpu,
        Opcode::Mac,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Opcode::And => "AND",
            Opcode::Or => "OR",
            Opcode::Xor => "XOR",
            Opcode::NotCond => "NOT_COND",
            Opcode::Copy => "COPY",
            Opcode::CopyToCim => "COPY_TO_CIM",
            Opcode::CopyToCpu => "COPY_TO_CPU",
            Opcode::Mac => "MAC",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl CimInstruction {
    pub fn opcode(&self) -> Opcode {
        match self {
            CimInstruction::CopyToCim { .. } => Opcode::CopyToCim,
            CimInstruction::CopyToCpu { .. } => Opcode::CopyToCpu,
            CimInstruction::Bitwise { op: BitwiseOp::And, .. } => Opcode::And,
            CimInstruction::Bitwise { op: BitwiseOp::Or, .. } => Opcode::Or,
            CimInstruction::Bitwise { op: BitwiseOp::Xor, .. } => Opcode::Xor,
            CimInstruction::NotCond { .. } => Opcode::NotCond,
            CimInstruction::Copy { .. } => Opcode::Copy,
            CimInstruction::Mac { .. } => Opcode::Mac,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpCost {
    pub cycles: u64,
    pub energy_nj: f64,
}

/// Per-opcode cost table, indexed by [`Opcode`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpTiming([OpCost; 8]);

impl Default for OpTiming {
    /// Placeholder costs: multi-row activation and periphery ops in a few
    /// array cycles, host transfers dominated by the I/O path.
    fn default() -> Self {
        let c = |cycles, energy_nj| OpCost { cycles, energy_nj };
        OpTiming([
            c(4, 0.02),
            c(4, 0.02),
            c(4, 0.02),
            c(2, 0.01),
            c(2, 0.01),
            c(10, 0.05),
            c(10, 0.05),
            c(6, 0.03),
        ])
    }
}

impl OpTiming {
    pub fn get(&self, op: Opcode) -> OpCost {
        self.0[op.index()]
    }

    pub fn set(&mut self, op: Opcode, cost: OpCost) {
        self.0[op.index()] = cost;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CimStats {
    pub counts: [u64; 8],
}

impl CimStats {
    pub fn count(&self, op: Opcode) -> u64 {
        self.counts[op.index()]
    }
}

/// What an executed instruction hands back to the host.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HostOutput {
    Row { row: usize, data: Vec<u8> },
    Mac(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgramReport {
    pub cycles: u64,
    pub energy_nj: f64,
    pub outputs: Vec<HostOutput>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("instruction {pc}: {error}")]
pub struct ProgramError {
    pub pc: usize,
    pub error: CimError,
}

#[derive(Debug, Clone)]
pub struct CimState {
    row_size: usize,
    rows: Vec<Vec<u8>>,
    sa_latch: Vec<u8>,
    pub timing: OpTiming,
    pub stats: CimStats,
    pub energy: EnergyLedger,
}

impl Default for CimState {
    fn default() -> Self {
        Self::new(DEFAULT_ROW_SIZE, DEFAULT_ROW_COUNT)
    }
}

impl CimState {
    pub fn new(row_size: usize, row_count: usize) -> Self {
        Self {
            row_size,
            rows: vec![vec![0; row_size]; row_count],
            sa_latch: vec![0; row_size],
            timing: OpTiming::default(),
            stats: CimStats::default(),
            energy: EnergyLedger::default(),
        }
    }

    pub fn row_size(&self) -> usize {
        self.row_size
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn latch(&self) -> &[u8] {
        &self.sa_latch
    }

    pub fn row(&self, row: usize) -> Result<&[u8], CimError> {
        self.check(row)?;
        Ok(&self.rows[row])
    }

    fn check(&self, row: usize) -> Result<(), CimError> {
        if row < self.rows.len() {
            Ok(())
        } else {
            Err(CimError::RowOutOfRange { row, count: self.rows.len() })
        }
    }

    fn source(&self, src: Source) -> Result<&[u8], CimError> {
        match src {
            Source::Latch => Ok(&self.sa_latch),
            Source::Row(r) => self.row(r),
        }
    }

    pub fn copy_to_cim(&mut self, row: usize, data: &[u8]) -> Result<(), CimError> {
        self.check(row)?;
        if data.len() != self.row_size {
            return Err(CimError::DataLength { expected: self.row_size, actual: data.len() });
        }
        self.rows[row].copy_from_slice(data);
        Ok(())
    }

    pub fn copy_to_cpu(&self, row: usize) -> Result<Vec<u8>, CimError> {
        self.row(row).map(<[u8]>::to_vec)
    }

    pub fn bitwise_multi(&mut self, op: BitwiseOp, rows: &[usize]) -> Result<(), CimError> {
        for &r in rows {
            self.check(r)?;
        }
        let mut distinct = rows.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < 2 {
            return Err(CimError::TooFewOperands(distinct.len()));
        }
        let mut acc = self.rows[rows[0]].clone();
        for &r in &rows[1..] {
            for (a, b) in acc.iter_mut().zip(&self.rows[r]) {
                *a = op.apply(*a, *b);
            }
        }
        self.sa_latch = acc;
        Ok(())
    }

    /// `zero_mask` wins over `bitwise_not`; with neither set the source is
    /// copied unchanged.
    pub fn not_cond(&mut self, dst: usize, src: Source, bitwise_not: bool, zero_mask: bool) -> Result<(), CimError> {
        self.check(dst)?;
        let out: Vec<u8> = self
            .source(src)?
            .iter()
            .map(|&b| match (zero_mask, bitwise_not) {
                (true, _) => if b == 0 { 0xFF } else { 0x00 },
                (false, true) => !b,
                (false, false) => b,
            })
            .collect();
        self.rows[dst] = out;
        Ok(())
    }

    /// Rotates the row, read as a big-endian integer, left by `rotate_bits`
    /// (right when negative).
    pub fn copy(&mut self, dst: usize, src: Source, rotate_bits: i64) -> Result<(), CimError> {
        self.check(dst)?;
        let width = 8 * self.row_size;
        if rotate_bits.unsigned_abs() >= width as u64 {
            return Err(CimError::RotationOutOfRange { bits: rotate_bits, width });
        }
        let data = self.source(src)?.to_vec();
        self.rows[dst] = rotate_left(&data, rotate_bits.rem_euclid(width as i64) as usize);
        Ok(())
    }

    pub fn mac_binary(&self, weights: &[usize], input: usize) -> Result<Vec<u32>, CimError> {
        let x = self.row(input)?;
        weights
            .iter()
            .map(|&w| Ok(self.row(w)?.iter().zip(x).map(|(a, b)| (a & b).count_ones()).sum()))
            .collect()
    }

    pub fn execute(&mut self, instr: &CimInstruction) -> Result<Option<HostOutput>, CimError> {
        let out = match instr {
            CimInstruction::CopyToCim { row, data } => {
                self.copy_to_cim(*row, data)?;
                None
            }
            CimInstruction::CopyToCpu { row } => Some(HostOutput::Row { row: *row, data: self.copy_to_cpu(*row)? }),
            CimInstruction::Bitwise { op, rows } => {
                self.bitwise_multi(*op, rows)?;
                None
            }
            CimInstruction::NotCond { dst, src, bitwise_not, zero_mask } => {
                self.not_cond(*dst, *src, *bitwise_not, *zero_mask)?;
                None
            }
            CimInstruction::Copy { dst, src, rotate_bits } => {
                self.copy(*dst, *src, *rotate_bits)?;
                None
            }
            CimInstruction::Mac { weights, input } => Some(HostOutput::Mac(self.mac_binary(weights, *input)?)),
        };
        let op = instr.opcode();
        let cost = self.timing.get(op);
        self.stats.counts[op.index()] += 1;
        self.energy.record(EnergyEvent::new(EnergySource::CimOp, cost.energy_nj));
        Ok(out)
    }

    /// Runs `program` in order; the first failing instruction aborts the run.
    pub fn run_program(&mut self, program: &[CimInstruction]) -> Result<ProgramReport, ProgramError> {
        let mut report = ProgramReport { cycles: 0, energy_nj: 0.0, outputs: Vec::new() };
        for (pc, instr) in program.iter().enumerate() {
            let out = self.execute(instr).map_err(|error| ProgramError { pc, error })?;
            let cost = self.timing.get(instr.opcode());
            report.cycles += cost.cycles;
            report.energy_nj += cost.energy_nj;
            report.outputs.extend(out);
        }
        Ok(report)
    }
}

fn rotate_left(data: &[u8], k: usize) -> Vec<u8> {
    let n = data.len();
    if n == 0 {
        return Vec::new();
    }
    let (bytes, bits) = (k / 8, k % 8);
    (0..n)
        .map(|i| {
            let hi = data[(i + bytes) % n];
            if bits == 0 {
                hi
            } else {
                let lo = data[(i + bytes + 1) % n];
                (hi << bits) | (lo >> (8 - bits))
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseProgramError {
    pub line: usize,
    pub message: String,
}

fn parse_row(tok: &str) -> Result<usize, String> {
    let digits = tok.strip_prefix('r').unwrap_or(tok);
    digits.parse().map_err(|_| format!("bad row `{tok}`"))
}

fn parse_source(tok: &str) -> Result<Source, String> {
    if tok.eq_ignore_ascii_case("SA") {
        Ok(Source::Latch)
    } else {
        parse_row(tok).map(Source::Row)
    }
}

impl FromStr for CimInstruction {
    type Err = String;

    fn from_str(line: &str) -> Result<Self, String> {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let (&op, args) = toks.split_first().ok_or("empty instruction")?;
        let arity = |n: core::ops::RangeInclusive<usize>| {
            if n.contains(&args.len()) {
                Ok(())
            } else {
                Err(format!("{op} takes {}..={} operands, got {}", n.start(), n.end(), args.len()))
            }
        };
        match op.to_ascii_uppercase().as_str() {
            "CTC" => {
                arity(2..=2)?;
                let data = hex::decode(args[1]).map_err(|e| format!("bad hex data: {e}"))?;
                Ok(CimInstruction::CopyToCim { row: parse_row(args[0])?, data })
            }
            "CTH" => {
                arity(1..=1)?;
                Ok(CimInstruction::CopyToCpu { row: parse_row(args[0])? })
            }
            name @ ("AND" | "OR" | "XOR") => {
                let op = match name {
                    "AND" => BitwiseOp::And,
                    "OR" => BitwiseOp::Or,
                    _ => BitwiseOp::Xor,
                };
                let rows = args.iter().map(|t| parse_row(t)).collect::<Result<_, _>>()?;
                Ok(CimInstruction::Bitwise { op, rows })
            }
            "NOTC" => {
                arity(1..=3)?;
                let dst = parse_row(args[0])?;
                let (mut src, mut bitwise_not, mut zero_mask) = (Source::Latch, true, false);
                for t in &args[1..] {
                    match t.to_ascii_uppercase().as_str() {
                        "NOT" => bitwise_not = true,
                        "MASK" => zero_mask = true,
                        _ => src = parse_source(t)?,
                    }
                }
                Ok(CimInstruction::NotCond { dst, src, bitwise_not, zero_mask })
            }
            "COPY" => {
                arity(1..=3)?;
                let dst = parse_row(args[0])?;
                let (mut src, mut rotate_bits) = (Source::Latch, 0);
                for t in &args[1..] {
                    match t.strip_prefix("rot=") {
                        Some(k) => rotate_bits = k.parse().map_err(|_| format!("bad rotation `{t}`"))?,
                        None => src = parse_source(t)?,
                    }
                }
                Ok(CimInstruction::Copy { dst, src, rotate_bits })
            }
            "MAC" => {
                arity(2..=2)?;
                let weights = args[0].split(',').map(parse_row).collect::<Result<_, _>>()?;
                Ok(CimInstruction::Mac { weights, input: parse_row(args[1])? })
            }
            other => Err(format!("unknown opcode `{other}`")),
        }
    }
}

/// Parses a program file; `;` starts a comment.
pub fn parse_program(text: &str) -> Result<Vec<CimInstruction>, ParseProgramError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split(';').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(line.parse().map_err(|message| ParseProgramError { line: i + 1, message })?);
    }
    Ok(out)
}

/// Rows 0 and 2 hold `a` and `c`; row 1 receives `!(a & c)`.
pub fn nand_program(a: &[u8], c: &[u8]) -> Vec<CimInstruction> {
    vec![
        CimInstruction::CopyToCim { row: 0, data: a.to_vec() },
        CimInstruction::CopyToCim { row: 2, data: c.to_vec() },
        CimInstruction::Bitwise { op: BitwiseOp::And, rows: vec![0, 2] },
        CimInstruction::NotCond { dst: 1, src: Source::Latch, bitwise_not: true, zero_mask: false },
    ]
}

/// Row 4 receives `a[i] = if b[i] == key { c[i] } else { d[i] }`.
pub fn ternary_program(b: &[u8], key: u8, c: &[u8], d: &[u8]) -> Vec<CimInstruction> {
    let n = b.len();
    vec![
        CimInstruction::CopyToCim { row: 0, data: b.to_vec() },
        CimInstruction::CopyToCim { row: 1, data: vec![key; n] },
        CimInstruction::CopyToCim { row: 2, data: c.to_vec() },
        CimInstruction::CopyToCim { row: 3, data: d.to_vec() },
        CimInstruction::Bitwise { op: BitwiseOp::Xor, rows: vec![0, 1] },
        CimInstruction::NotCond { dst: 5, src: Source::Latch, bitwise_not: false, zero_mask: true },
        CimInstruction::NotCond { dst: 6, src: Source::Row(5), bitwise_not: true, zero_mask: false },
        CimInstruction::Bitwise { op: BitwiseOp::And, rows: vec![2, 5] },
        CimInstruction::Copy { dst: 7, src: Source::Latch, rotate_bits: 0 },
        CimInstruction::Bitwise { op: BitwiseOp::And, rows: vec![3, 6] },
        CimInstruction::Copy { dst: 8, src: Source::Latch, rotate_bits: 0 },
        CimInstruction::Bitwise { op: BitwiseOp::Or, rows: vec![7, 8] },
        CimInstruction::Copy { dst: 4, src: Source::Latch, rotate_bits: 0 },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use proptest::prelude::*;

    fn state() -> CimState {
        CimState::new(8, 16)
    }

    #[test]
    fn round_trip_and_overwrite() {
        let mut s = state();
        s.copy_to_cim(3, &[1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        assert_eq!(s.copy_to_cpu(3).unwrap(), [1, 2, 3, 4, 5, 6, 7, 8]);
        s.copy_to_cim(3, &[9; 8]).unwrap();
        assert_eq!(s.copy_to_cpu(3).unwrap(), [9; 8]);
        assert_eq!(s.copy_to_cpu(16), Err(CimError::RowOutOfRange { row: 16, count: 16 }));
    }

    #[test]
    fn and_into_latch() {
        let mut s = state();
        s.copy_to_cim(0, &[0xFF; 8]).unwrap();
        s.copy_to_cim(1, &[0x0F; 8]).unwrap();
        s.bitwise_multi(BitwiseOp::And, &[0, 1]).unwrap();
        assert_eq!(s.latch(), [0x0F; 8]);
        s.bitwise_multi(BitwiseOp::Xor, &[1, 1, 0]).unwrap();
        assert_eq!(s.latch(), [0xFF; 8]);
        assert_eq!(s.bitwise_multi(BitwiseOp::Xor, &[1, 1]), Err(CimError::TooFewOperands(1)));
    }

    #[test]
    fn zero_mask_per_byte() {
        let mut s = state();
        s.copy_to_cim(0, &[0x00, 0x07, 0x00, 1, 2, 3, 4, 0]).unwrap();
        s.not_cond(1, Source::Row(0), false, true).unwrap();
        assert_eq!(s.row(1).unwrap(), [0xFF, 0, 0xFF, 0, 0, 0, 0, 0xFF]);
    }

    #[test]
    fn periphery_leaves_latch() {
        let mut s = state();
        s.copy_to_cim(0, &[0x5A; 8]).unwrap();
        s.copy_to_cim(1, &[0x3C; 8]).unwrap();
        s.bitwise_multi(BitwiseOp::Or, &[0, 1]).unwrap();
        let latch = s.latch().to_vec();
        s.not_cond(2, Source::Latch, true, false).unwrap();
        s.copy(3, Source::Latch, 5).unwrap();
        s.not_cond(4, Source::Row(2), true, false).unwrap();
        assert_eq!(s.latch(), latch);
        assert_eq!(s.row(4).unwrap(), latch);
    }

    #[test]
    fn rotate_by_one_byte_wraps() {
        let mut s = state();
        s.copy_to_cim(0, &[1, 0, 0, 0, 0, 0, 0, 0]).unwrap();
        s.copy(1, Source::Row(0), 8).unwrap();
        assert_eq!(s.row(1).unwrap(), [0, 0, 0, 0, 0, 0, 0, 1]);
        assert!(matches!(s.copy(1, Source::Row(0), 64), Err(CimError::RotationOutOfRange { .. })));
        assert!(matches!(s.copy(1, Source::Row(0), -64), Err(CimError::RotationOutOfRange { .. })));
    }

    #[test]
    fn empty_program_costs_nothing() {
        let r = state().run_program(&[]).unwrap();
        assert_eq!((r.cycles, r.energy_nj), (0, 0.0));
    }

    #[test]
    fn failing_instruction_reports_pc() {
        let prog = [
            CimInstruction::CopyToCpu { row: 0 },
            CimInstruction::CopyToCpu { row: 99 },
        ];
        assert_eq!(state().run_program(&prog).unwrap_err().pc, 1);
    }

    #[test]
    fn parse_text_program() {
        let text = "; nand\nCTC 0 ff00ff00ff00ff00\nCTC r2 0f0f0f0f0f0f0f0f\nAND r0 r2\nNOTC 1 ; SA, NOT\nCOPY 3 r1 rot=-4\nMAC r0,r2 r1\nCTH 1\n";
        let p = parse_program(text).unwrap();
        assert_eq!(p.len(), 7);
        assert_eq!(p[3], CimInstruction::NotCond { dst: 1, src: Source::Latch, bitwise_not: true, zero_mask: false });
        assert_eq!(p[4], CimInstruction::Copy { dst: 3, src: Source::Row(1), rotate_bits: -4 });
        assert_eq!(p[5], CimInstruction::Mac { weights: vec![0, 2], input: 1 });
        assert_eq!(parse_program("FOO 1").unwrap_err().line, 1);
        let mut s = state();
        let r = s.run_program(&p).unwrap();
        assert_eq!(r.outputs.last().unwrap(), &HostOutput::Row { row: 1, data: vec![0xF0, 0xFF, 0xF0, 0xFF, 0xF0, 0xFF, 0xF0, 0xFF] });
    }

    fn rotate_oracle(data: &[u8], k: i64) -> Vec<u8> {
        let width = data.len() as u32 * 8;
        let k = k.rem_euclid(width as i64) as u32;
        let x = BigUint::from_bytes_be(data);
        let mask = (BigUint::from(1u8) << width) - 1u8;
        let r = ((&x << k) | (&x >> (width - k))) & mask;
        let bytes = r.to_bytes_be();
        let mut out = vec![0u8; data.len() - bytes.len().min(data.len())];
        out.extend(bytes);
        out
    }

    proptest! {
        #[test]
        fn rotation_matches_big_integer(data in proptest::collection::vec(any::<u8>(), 8), k in -63i64..64) {
            let mut s = state();
            s.copy_to_cim(0, &data).unwrap();
            s.copy(1, Source::Row(0), k).unwrap();
            let expected = rotate_oracle(&data, k);
            prop_assert_eq!(s.row(1).unwrap(), expected.as_slice());
            s.copy(2, Source::Row(1), -k).unwrap();
            prop_assert_eq!(s.row(2).unwrap(), data.as_slice());
        }

        #[test]
        fn double_complement(data in proptest::collection::vec(any::<u8>(), 8)) {
            let mut s = state();
            s.copy_to_cim(0, &data).unwrap();
            s.not_cond(1, Source::Row(0), true, false).unwrap();
            s.not_cond(2, Source::Row(1), true, false).unwrap();
            prop_assert_eq!(s.row(2).unwrap(), data.as_slice());
        }

        #[test]
        fn cost_is_additive(ops in proptest::collection::vec(0usize..4, 0..30)) {
            let prog: Vec<CimInstruction> = ops.iter().map(|o| match o {
                0 => CimInstruction::Bitwise { op: BitwiseOp::Or, rows: vec![0, 1] },
                1 => CimInstruction::NotCond { dst: 2, src: Source::Latch, bitwise_not: true, zero_mask: false },
                2 => CimInstruction::Copy { dst: 3, src: Source::Row(2), rotate_bits: 3 },
                _ => CimInstruction::CopyToCpu { row: 3 },
            }).collect();
            let mut s = state();
            let r = s.run_program(&prog).unwrap();
            let cycles: u64 = prog.iter().map(|i| s.timing.get(i.opcode()).cycles).sum();
            let energy: f64 = prog.iter().map(|i| s.timing.get(i.opcode()).energy_nj).sum();
            prop_assert_eq!(r.cycles, cycles);
            prop_assert!((r.energy_nj - energy).abs() < 1e-9);
            prop_assert!((s.energy.total() - energy).abs() < 1e-9);
        }
    }
}
