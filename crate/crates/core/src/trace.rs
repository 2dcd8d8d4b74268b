//! Memory request records, the line-oriented trace codec and the trace
//! writers that observe every access fed to the memory system.
//!
//! Line grammar (whitespace separated):
//!
//! ```text
//! cycle op address [address2] [data] thread_id [pc]
//! ```
//!
//! `op` is `R`, `W` or `RC`. Addresses and the program counter are hex with a
//! `0x` prefix; `data` is contiguous hex without prefix; cycle and thread id
//! are decimal. `address2` appears only for `RC`, `data` never does. Lines
//! starting with `;` are comments.

use alloc::borrow::Cow;
use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::wear::{WearCounters, WearTracker};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Read,
    Write,
    RowClone,
}

impl Op {
    pub fn token(self) -> &'static str {
        match self {
            Op::Read => "R",
            Op::Write => "W",
            Op::RowClone => "RC",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryRequest {
    pub arrival_cycle: u64,
    pub op: Op,
    pub address: u64,
    /// Destination row address, `RC` only.
    pub address2: Option<u64>,
    /// Block payload; `None` means an all-zero block.
    pub data: Option<Vec<u8>>,
    pub thread_id: u32,
    pub program_counter: Option<u64>,
}

impl MemoryRequest {
    pub fn read(arrival_cycle: u64, address: u64) -> Self {
        Self {
            arrival_cycle,
            op: Op::Read,
            address,
            address2: None,
            data: None,
            thread_id: 0,
            program_counter: None,
        }
    }

    pub fn write(arrival_cycle: u64, address: u64, data: Option<Vec<u8>>) -> Self {
        Self {
            op: Op::Write,
            data,
            ..Self::read(arrival_cycle, address)
        }
    }

    pub fn rowclone(arrival_cycle: u64, src: u64, dst: u64) -> Self {
        Self {
            op: Op::RowClone,
            address2: Some(dst),
            ..Self::read(arrival_cycle, src)
        }
    }

    /// Payload with the all-zero default filled in.
    pub fn payload(&self, block_size: usize) -> Cow<'_, [u8]> {
        match &self.data {
            Some(d) => Cow::Borrowed(d.as_slice()),
            None => Cow::Owned(vec![0u8; block_size]),
        }
    }

    pub fn validate(&self, block_size: usize) -> Result<(), TraceError> {
        let align = block_size as u64;
        let check = |a: u64| {
            if align == 0 || !a.is_multiple_of(align) {
                Err(TraceError::MisalignedAddress {
                    address: a,
                    block_size,
                })
            } else {
                Ok(())
            }
        };
        check(self.address)?;
        match (self.op, self.address2) {
            (Op::RowClone, Some(dst)) => check(dst)?,
            (Op::RowClone, None) => {
                return Err(TraceError::Malformed("RC needs a destination address".into()))
            }
            (_, Some(_)) => {
                return Err(TraceError::Malformed("second address is only valid for RC".into()))
            }
            _ => {}
        }
        match (&self.data, self.op) {
            (Some(_), Op::RowClone) => Err(TraceError::Malformed("RC carries no data".into())),
            (Some(d), _) if d.len() != block_size => Err(TraceError::DataLengthMismatch {
                expected: block_size,
                actual: d.len(),
            }),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("malformed trace line: {0}")]
    Malformed(String),
    #[error("address {address:#x} is not aligned to {block_size}-byte blocks")]
    MisalignedAddress { address: u64, block_size: usize },
    #[error("data payload has {actual} bytes, expected {expected}")]
    DataLengthMismatch { expected: usize, actual: usize },
}

fn malformed(msg: impl Into<String>) -> TraceError {
    TraceError::Malformed(msg.into())
}

fn parse_hex_u64(tok: &str) -> Result<u64, TraceError> {
    let digits = tok
        .strip_prefix("0x")
        .or_else(|| tok.strip_prefix("0X"))
        .ok_or_else(|| malformed(format!("expected 0x-prefixed hex, got `{tok}`")))?;
    u64::from_str_radix(digits, 16).map_err(|_| malformed(format!("bad hex value `{tok}`")))
}

fn parse_dec<T: core::str::FromStr>(tok: &str, what: &str) -> Result<T, TraceError> {
    tok.parse()
        .map_err(|_| malformed(format!("bad {what} `{tok}`")))
}

fn is_prefixed(tok: &str) -> bool {
    tok.starts_with("0x") || tok.starts_with("0X")
}

/// Returns true for blank lines and `;` comments.
pub fn is_skippable(line: &str) -> bool {
    let t = line.trim_start();
    t.is_empty() || t.starts_with(';')
}

pub fn parse_trace_line(line: &str, block_size: usize) -> Result<MemoryRequest, TraceError> {
    if is_skippable(line) {
        return Err(malformed("empty or comment line"));
    }
    let toks: Vec<&str> = line.split_whitespace().collect();
    if toks.len() < 4 {
        return Err(malformed(format!("expected at least 4 tokens, got {}", toks.len())));
    }
    let arrival_cycle = parse_dec(toks[0], "cycle")?;
    let op = match toks[1] {
        "R" => Op::Read,
        "W" => Op::Write,
        "RC" => Op::RowClone,
        other => return Err(malformed(format!("unknown op `{other}`"))),
    };
    let address = parse_hex_u64(toks[2])?;

    let (address2, data, thread_tok, pc_tok) = match op {
        Op::RowClone => match &toks[3..] {
            [dst, thr] => (Some(parse_hex_u64(dst)?), None, *thr, None),
            [dst, thr, pc] => (Some(parse_hex_u64(dst)?), None, *thr, Some(*pc)),
            rest => return Err(malformed(format!("RC expects 5 or 6 tokens, got {}", rest.len() + 3))),
        },
        _ => match &toks[3..] {
            [thr] => (None, None, *thr, None),
            [a, b] if is_prefixed(b) => (None, None, *a, Some(*b)),
            [d, thr] => (None, Some(*d), *thr, None),
            [d, thr, pc] => (None, Some(*d), *thr, Some(*pc)),
            rest => return Err(malformed(format!("expected 4 to 6 tokens, got {}", rest.len() + 3))),
        },
    };

    let data = match data {
        Some(hexdata) => {
            if hexdata.len() % 2 != 0 {
                return Err(malformed("odd-length data"));
            }
            Some(hex::decode(hexdata).map_err(|_| malformed(format!("bad data hex `{hexdata}`")))?)
        }
        None => None,
    };
    let req = MemoryRequest {
        arrival_cycle,
        op,
        address,
        address2,
        data,
        thread_id: parse_dec(thread_tok, "thread id")?,
        program_counter: pc_tok.map(parse_hex_u64).transpose()?,
    };
    req.validate(block_size)?;
    Ok(req)
}

pub fn format_trace_line(req: &MemoryRequest) -> String {
    let mut s = format!("{} {} {:#x}", req.arrival_cycle, req.op.token(), req.address);
    if let Some(dst) = req.address2 {
        let _ = write!(s, " {dst:#x}");
    }
    if let Some(d) = &req.data {
        s.push(' ');
        s.push_str(&hex::encode(d));
    }
    let _ = write!(s, " {}", req.thread_id);
    if let Some(pc) = req.program_counter {
        let _ = write!(s, " {pc:#x}");
    }
    s
}

/// Parses a whole trace, skipping comments. Errors carry the 1-based line.
pub fn parse_trace(text: &str, block_size: usize) -> Result<Vec<MemoryRequest>, (usize, TraceError)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !is_skippable(l))
        .map(|(i, l)| parse_trace_line(l, block_size).map_err(|e| (i + 1, e)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("block size must be non-zero")]
pub struct ZeroBlockSize;

pub fn block_index(address: u64, block_bytes: u64) -> Result<u64, ZeroBlockSize> {
    if block_bytes == 0 {
        return Err(ZeroBlockSize);
    }
    Ok(address / block_bytes)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("trace sink unavailable: {0}")]
pub struct SinkUnavailable(pub String);

/// Line-oriented output of a trace writer. Lines are passed without the
/// trailing newline.
pub trait LineSink {
    fn write_line(&mut self, line: &str) -> Result<(), SinkUnavailable>;

    fn flush(&mut self) -> Result<(), SinkUnavailable> {
        Ok(())
    }
}

impl LineSink for Vec<String> {
    fn write_line(&mut self, line: &str) -> Result<(), SinkUnavailable> {
        self.push(line.to_string());
        Ok(())
    }
}

impl<S: LineSink + ?Sized> LineSink for &mut S {
    fn write_line(&mut self, line: &str) -> Result<(), SinkUnavailable> {
        (**self).write_line(line)
    }

    fn flush(&mut self) -> Result<(), SinkUnavailable> {
        (**self).flush()
    }
}

/// Observer called with every access handed to the memory system.
pub trait TraceWriter {
    fn name(&self) -> &'static str;

    /// Returns `true` once the access has been handled.
    fn on_access(&mut self, access: &MemoryRequest) -> Result<bool, SinkUnavailable>;

    /// Emits any accumulated summary. Calling it again is a no-op.
    fn finalize(&mut self) -> Result<(), SinkUnavailable>;
}

/// Logs `address | operation | first data byte` per access.
pub struct RawWriter<S> {
    sink: S,
}

impl<S: LineSink> RawWriter<S> {
    pub fn new(sink: S) -> Self {
        Self { sink }
    }

    pub fn into_sink(self) -> S {
        self.sink
    }
}

impl<S: LineSink> TraceWriter for RawWriter<S> {
    fn name(&self) -> &'static str {
        "RawWriter"
    }

    fn on_access(&mut self, access: &MemoryRequest) -> Result<bool, SinkUnavailable> {
        let op = match access.op {
            Op::Read => "READ",
            Op::Write => "WRITE",
            Op::RowClone => "OTHER",
        };
        let byte0 = access
            .data
            .as_ref()
            .and_then(|d| d.first().copied())
            .unwrap_or(0);
        self.sink
            .write_line(&format!("{:x} | {} | {}", access.address, op, byte0))?;
        Ok(true)
    }

    fn finalize(&mut self) -> Result<(), SinkUnavailable> {
        self.sink.flush()
    }
}

/// Counts writes per fixed-size block and emits `Index | Accesses` lines.
pub struct BlockAccessWriter<S> {
    sink: S,
    block_bytes: u64,
    counts: BTreeMap<u64, u64>,
    finalized: bool,
}

impl<S: LineSink> BlockAccessWriter<S> {
    pub const DEFAULT_BLOCK_BYTES: u64 = 4096;

    pub fn new(sink: S, block_bytes: u64) -> Result<Self, ZeroBlockSize> {
        if block_bytes == 0 {
            return Err(ZeroBlockSize);
        }
        Ok(Self {
            sink,
            block_bytes,
            counts: BTreeMap::new(),
            finalized: false,
        })
    }

    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    pub fn into_sink(self) -> S {
        self.sink
    }
}

impl<S: LineSink> TraceWriter for BlockAccessWriter<S> {
    fn name(&self) -> &'static str {
        "BlockAccessWriter"
    }

    fn on_access(&mut self, access: &MemoryRequest) -> Result<bool, SinkUnavailable> {
        if access.op == Op::Write {
            *self.counts.entry(access.address / self.block_bytes).or_insert(0) += 1;
        }
        Ok(true)
    }

    fn finalize(&mut self) -> Result<(), SinkUnavailable> {
        if core::mem::replace(&mut self.finalized, true) {
            return Ok(());
        }
        for (idx, n) in &self.counts {
            self.sink.write_line(&format!("{idx} | {n}"))?;
        }
        self.sink.flush()
    }
}

/// Tracks bit flips per cell against a shadow copy of memory and emits the
/// per-cell histogram on finalize.
pub struct BitFlipWriter<S> {
    sink: S,
    block_size: usize,
    tracker: WearTracker,
    finalized: bool,
}

impl<S: LineSink> BitFlipWriter<S> {
    pub fn new(sink: S, block_size: usize) -> Result<Self, ZeroBlockSize> {
        if block_size == 0 {
            return Err(ZeroBlockSize);
        }
        Ok(Self {
            sink,
            block_size,
            tracker: WearTracker::new(block_size),
            finalized: false,
        })
    }

    pub fn counters(&self) -> &WearCounters {
        &self.tracker.counters
    }

    pub fn tracker_mut(&mut self) -> &mut WearTracker {
        &mut self.tracker
    }

    pub fn into_sink(self) -> S {
        self.sink
    }
}

impl<S: LineSink> TraceWriter for BitFlipWriter<S> {
    fn name(&self) -> &'static str {
        "BitFlipWriter"
    }

    fn on_access(&mut self, access: &MemoryRequest) -> Result<bool, SinkUnavailable> {
        let block = access.address / self.block_size as u64;
        match access.op {
            Op::Write => {
                let payload = access.payload(self.block_size);
                self.tracker
                    .on_write(block, &payload)
                    .map_err(|e| SinkUnavailable(e.to_string()))?;
            }
            Op::Read => self.tracker.on_read(block),
            Op::RowClone => {}
        }
        Ok(true)
    }

    fn finalize(&mut self) -> Result<(), SinkUnavailable> {
        if core::mem::replace(&mut self.finalized, true) {
            return Ok(());
        }
        for line in self.tracker.counters.dump_lines() {
            self.sink.write_line(&line)?;
        }
        self.sink.flush()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown trace writer `{0}`")]
pub struct UnknownWriter(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WriterKind {
    Raw,
    BlockAccess,
    BitFlip,
}

impl WriterKind {
    pub const REGISTERED: [(&'static str, WriterKind); 3] = [
        ("RawWriter", WriterKind::Raw),
        ("BlockAccessWriter", WriterKind::BlockAccess),
        ("BitFlipWriter", WriterKind::BitFlip),
    ];

    pub fn from_name(name: &str) -> Result<Self, UnknownWriter> {
        Self::REGISTERED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, k)| *k)
            .ok_or_else(|| UnknownWriter(name.to_string()))
    }

    pub fn name(self) -> &'static str {
        Self::REGISTERED
            .iter()
            .find(|(_, k)| *k == self)
            .map(|(n, _)| *n)
            .unwrap_or("?")
    }
}

/// Writer factory. `block_size` is the request block size; the block access
/// counter always uses 4 KiB blocks.
pub fn build_writer<'a, S: LineSink + 'a>(
    kind: WriterKind,
    sink: S,
    block_size: usize,
) -> Result<Box<dyn TraceWriter + 'a>, ZeroBlockSize> {
    Ok(match kind {
        WriterKind::Raw => Box::new(RawWriter::new(sink)),
        WriterKind::BlockAccess => Box::new(BlockAccessWriter::new(
            sink,
            BlockAccessWriter::<S>::DEFAULT_BLOCK_BYTES,
        )?),
        WriterKind::BitFlip => Box::new(BitFlipWriter::new(sink, block_size)?),
    })
}
