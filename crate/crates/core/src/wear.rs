//! Data-comparison writes, per-cell bit-flip accounting, wear metrics and the
//! energy ledger shared by the other models.
//!
//! Memory starts out all-zero: the first write to a block is compared
//! against a zero payload. A cell is one bit, identified by its block index
//! and the bit offset inside the block (`byte * 8 + bit`, bit 0 being the
//! least significant bit of the byte).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("payload length mismatch: stored {expected} bytes, got {actual}")]
pub struct LengthMismatch {
    pub expected: usize,
    pub actual: usize,
}

/// Outcome of a data-comparison write: only differing cells are programmed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ComparisonWrite {
    pub cells_written: u64,
    pub flipped_bits: Vec<u32>,
}

pub fn data_comparison_write(old: &[u8], new: &[u8]) -> Result<ComparisonWrite, LengthMismatch> {
    if old.len() != new.len() {
        return Err(LengthMismatch {
            expected: old.len(),
            actual: new.len(),
        });
    }
    let mut flipped_bits = Vec::new();
    for (i, (a, b)) in old.iter().zip(new).enumerate() {
        let mut diff = a ^ b;
        while diff != 0 {
            let bit = diff.trailing_zeros();
            flipped_bits.push(i as u32 * 8 + bit);
            diff &= diff - 1;
        }
    }
    Ok(ComparisonWrite {
        cells_written: flipped_bits.len() as u64,
        flipped_bits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId {
    pub block: u64,
    pub bit: u32,
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.block, self.bit)
    }
}

/// Last written payload of every block that has ever been written.
#[derive(Debug, Clone)]
pub struct ShadowMemory {
    block_size: usize,
    blocks: BTreeMap<u64, Vec<u8>>,
}

impl ShadowMemory {
    pub fn new(block_size: usize) -> Self {
        Self {
            block_size,
            blocks: BTreeMap::new(),
        }
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn get(&self, block: u64) -> Option<&[u8]> {
        self.blocks.get(&block).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Per-cell flip counts plus per-block write (and optional read) operation
/// counts. A write operation programs every cell of its block, so the
/// per-cell write-op count is the count of its block.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WearCounters {
    flips: BTreeMap<CellId, u64>,
    block_writes: BTreeMap<u64, u64>,
    block_reads: BTreeMap<u64, u64>,
}

impl WearCounters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn flips(&self, cell: CellId) -> u64 {
        self.flips.get(&cell).copied().unwrap_or(0)
    }

    pub fn writes(&self, cell: CellId) -> u64 {
        self.block_writes.get(&cell.block).copied().unwrap_or(0)
    }

    pub fn read_wear(&self, block: u64) -> u64 {
        self.block_reads.get(&block).copied().unwrap_or(0)
    }

    pub fn total_flips(&self) -> u64 {
        self.flips.values().sum()
    }

    /// Cells with at least one flip, in `(block, bit)` order.
    pub fn iter(&self) -> impl Iterator<Item = (CellId, u64)> + '_ {
        self.flips.iter().map(|(c, n)| (*c, *n))
    }

    /// Histogram body: one `block:bit | flips` line per touched cell, then a
    /// blank line and the metrics block.
    pub fn dump_lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self.iter().map(|(c, n)| format!("{c} | {n}")).collect();
        if !out.is_empty() {
            let m = wear_metrics(self);
            out.push(String::new());
            out.push(format!("touched_cells | {}", m.touched_cells));
            out.push(format!("max_flips | {}", m.max_flips));
            out.push(format!("mean_flips | {:.6}", m.mean_flips));
            out.push(format!("cv | {:.6}", m.coefficient_of_variation));
        }
        out
    }
}

/// Records a write of `payload` to `block`, returning the number of flipped
/// cells. Blocks never written before compare against zeros.
pub fn record_write(
    shadow: &mut ShadowMemory,
    counters: &mut WearCounters,
    block: u64,
    payload: &[u8],
) -> Result<u64, LengthMismatch> {
    if payload.len() != shadow.block_size {
        return Err(LengthMismatch {
            expected: shadow.block_size,
            actual: payload.len(),
        });
    }
    let stored = shadow
        .blocks
        .entry(block)
        .or_insert_with(|| vec![0u8; payload.len()]);
    let cmp = data_comparison_write(stored, payload)?;
    for bit in &cmp.flipped_bits {
        *counters.flips.entry(CellId { block, bit: *bit }).or_insert(0) += 1;
    }
    *counters.block_writes.entry(block).or_insert(0) += 1;
    stored.copy_from_slice(payload);
    Ok(cmp.cells_written)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WearMetrics {
    pub touched_cells: u64,
    pub max_flips: u64,
    pub mean_flips: f64,
    /// Population standard deviation over mean; 0 when nothing was touched.
    pub coefficient_of_variation: f64,
}

pub fn wear_metrics(counters: &WearCounters) -> WearMetrics {
    let n = counters.flips.len();
    if n == 0 {
        return WearMetrics::default();
    }
    let max_flips = counters.flips.values().copied().max().unwrap_or(0);
    let mean = counters.flips.values().map(|&v| v as f64).sum::<f64>() / n as f64;
    let var = counters
        .flips
        .values()
        .map(|&v| {
            let d = v as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n as f64;
    WearMetrics {
        touched_cells: n as u64,
        max_flips,
        mean_flips: mean,
        coefficient_of_variation: libm::sqrt(var) / mean,
    }
}

/// Shadow memory, counters and the read-wear toggle bundled for the
/// simulation pipeline.
#[derive(Debug, Clone)]
pub struct WearTracker {
    pub shadow: ShadowMemory,
    pub counters: WearCounters,
    /// Count reads as (flip-free) wear, for technologies such as FeRAM.
    pub read_wear: bool,
}

impl WearTracker {
    pub fn new(block_size: usize) -> Self {
        Self {
            shadow: ShadowMemory::new(block_size),
            counters: WearCounters::new(),
            read_wear: false,
        }
    }

    pub fn on_write(&mut self, block: u64, payload: &[u8]) -> Result<u64, LengthMismatch> {
        record_write(&mut self.shadow, &mut self.counters, block, payload)
    }

    pub fn on_read(&mut self, block: u64) {
        if self.read_wear {
            *self.counters.block_reads.entry(block).or_insert(0) += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EnergySource {
    MemoryCommand,
    CacheAccess,
    CimOp,
    RowClone,
}

impl EnergySource {
    pub const ALL: [EnergySource; 4] = [
        EnergySource::MemoryCommand,
        EnergySource::CacheAccess,
        EnergySource::CimOp,
        EnergySource::RowClone,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnergySource::MemoryCommand => "memory",
            EnergySource::CacheAccess => "cache",
            EnergySource::CimOp => "cim",
            EnergySource::RowClone => "rowclone",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEvent {
    pub source: EnergySource,
    pub nanojoules: f64,
}

impl EnergyEvent {
    pub fn new(source: EnergySource, nanojoules: f64) -> Self {
        Self { source, nanojoules }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyLedger {
    by_source: [f64; 4],
    events: u64,
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, event: EnergyEvent) {
        self.by_source[event.source as usize] += event.nanojoules;
        self.events += 1;
    }

    pub fn source(&self, source: EnergySource) -> f64 {
        self.by_source[source as usize]
    }

    pub fn total(&self) -> f64 {
        self.by_source.iter().sum()
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn merge(&mut self, other: &EnergyLedger) {
        for (a, b) in self.by_source.iter_mut().zip(other.by_source) {
            *a += b;
        }
        self.events += other.events;
    }
}
