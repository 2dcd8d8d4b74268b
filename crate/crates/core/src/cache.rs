//! Set-associative cache whose ways are split per set into a volatile
//! (SRAM) and a non-volatile (STT-RAM) section.
//!
//! Replacement is LRU over all ways regardless of section, so the hit/miss
//! sequence of a trace does not depend on the split. A fill lands in the
//! victim's way and inherits its section. Writes are posted: the front side
//! sees the SRAM write latency while the line stays busy for the section's
//! full write latency.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::trace::{MemoryRequest, Op};
use crate::wear::{EnergyEvent, EnergyLedger, EnergySource};

/// `floor(ratio / 100 * n)` in exact integer arithmetic.
pub fn nv_ways_per_set(nv_block_ratio: u32, assoc: u32) -> u32 {
    nv_block_ratio * assoc / 100
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridCacheConfig {
    pub size_bytes: u64,
    pub assoc: u32,
    pub block_bytes: u32,
    /// Percent of ways per set that are non-volatile, 0..=100.
    pub nv_block_ratio: u32,
    pub vol_read_latency: u64,
    pub vol_write_latency: u64,
    pub nv_read_latency: u64,
    pub nv_write_latency: u64,
    /// Cycles added to every miss for the trip to main memory.
    pub miss_penalty: u64,
    pub vol_read_energy: f64,
    pub vol_write_energy: f64,
    pub nv_read_energy: f64,
    pub nv_write_energy: f64,
}

impl Default for HybridCacheConfig {
    /// 64 KiB, 4-way, 64 B lines with SRAM at 2 cycles / 0.009 nJ and
    /// STT-RAM at 2 / 0.007 nJ for reads, 8 / 0.056 nJ for writes.
    fn default() -> Self {
        Self {
            size_bytes: 64 * 1024,
            assoc: 4,
            block_bytes: 64,
            nv_block_ratio: 0,
            vol_read_latency: 2,
            vol_write_latency: 2,
            nv_read_latency: 2,
            nv_write_latency: 8,
            miss_penalty: 20,
            vol_read_energy: 0.009,
            vol_write_energy: 0.009,
            nv_read_energy: 0.007,
            nv_write_energy: 0.056,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid cache configuration: {0}")]
pub struct InvalidCacheConfig(pub String);

impl HybridCacheConfig {
    pub fn sets(&self) -> u64 {
        self.size_bytes / (self.assoc as u64 * self.block_bytes as u64)
    }

    pub fn validate(&self) -> Result<(), InvalidCacheConfig> {
        let bad = |m: String| Err(InvalidCacheConfig(m));
        if self.assoc == 0 || self.block_bytes == 0 {
            return bad("associativity and block size must be positive".into());
        }
        let way_bytes = self.assoc as u64 * self.block_bytes as u64;
        if self.size_bytes == 0 || !self.size_bytes.is_multiple_of(way_bytes) {
            return bad(format!(
                "size {} is not a positive multiple of assoc x block ({way_bytes})",
                self.size_bytes
            ));
        }
        if self.nv_block_ratio > 100 {
            return bad(format!("nvBlockRatio {} exceeds 100", self.nv_block_ratio));
        }
        let e = [self.vol_read_energy, self.vol_write_energy, self.nv_read_energy, self.nv_write_energy];
        if e.iter().any(|x| x.is_nan() || *x < 0.0) {
            return bad("energies must be non-negative".into());
        }
        Ok(())
    }

    pub fn with_ratio(self, nv_block_ratio: u32) -> Self {
        Self { nv_block_ratio, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheLine {
    pub valid: bool,
    pub dirty: bool,
    pub tag: u64,
    pub is_volatile: bool,
    pub lru_stamp: u64,
    /// Cycle at which the last cell-level write finishes.
    pub busy_until: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HybridStats {
    pub vol_reads: u64,
    pub non_vol_reads: u64,
    pub vol_writes: u64,
    pub non_vol_writes: u64,
    pub hits: u64,
    pub misses: u64,
    pub writebacks: u64,
    /// Sum of front-side latencies.
    pub total_latency: u64,
    pub dyn_energy: f64,
}

impl HybridStats {
    /// Closed-form energy from the counters.
    pub fn ledger_energy(&self, c: &HybridCacheConfig) -> f64 {
        self.vol_reads as f64 * c.vol_read_energy
            + self.vol_writes as f64 * c.vol_write_energy
            + self.non_vol_reads as f64 * c.nv_read_energy
            + self.non_vol_writes as f64 * c.nv_write_energy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessOutcome {
    pub hit: bool,
    pub latency: u64,
    /// Block address of a dirty victim that must be written back.
    pub writeback: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct HybridCache {
    config: HybridCacheConfig,
    sets: u64,
    lines: Vec<CacheLine>,
    clock: u64,
    stats: HybridStats,
    energy: EnergyLedger,
}

impl HybridCache {
    pub fn new(config: HybridCacheConfig) -> Result<Self, InvalidCacheConfig> {
        config.validate()?;
        let sets = config.sets();
        let n = config.assoc as usize;
        let n1 = nv_ways_per_set(config.nv_block_ratio, config.assoc) as usize;
        let lines = (0..sets as usize * n)
            .map(|i| CacheLine {
                is_volatile: i % n >= n1,
                ..CacheLine::default()
            })
            .collect();
        Ok(Self {
            config,
            sets,
            lines,
            clock: 0,
            stats: HybridStats::default(),
            energy: EnergyLedger::default(),
        })
    }

    pub fn config(&self) -> &HybridCacheConfig {
        &self.config
    }

    pub fn stats(&self) -> &HybridStats {
        &self.stats
    }

    pub fn energy(&self) -> &EnergyLedger {
        &self.energy
    }

    pub fn set(&self, index: u64) -> &[CacheLine] {
        let n = self.config.assoc as usize;
        let s = index as usize * n;
        &self.lines[s..s + n]
    }

    fn charge(&mut self, volatile: bool, write: bool) {
        let c = &self.config;
        let (counter, e) = match (volatile, write) {
            (true, false) => (&mut self.stats.vol_reads, c.vol_read_energy),
            (true, true) => (&mut self.stats.vol_writes, c.vol_write_energy),
            (false, false) => (&mut self.stats.non_vol_reads, c.nv_read_energy),
            (false, true) => (&mut self.stats.non_vol_writes, c.nv_write_energy),
        };
        *counter += 1;
        self.stats.dyn_energy += e;
        self.energy.record(EnergyEvent::new(EnergySource::CacheAccess, e));
    }

    /// Accesses the block containing `addr` at cycle `now`.
    ///
    /// A miss charges one write for the fill plus, for a read, the read that
    /// returns the data.
    pub fn access(&mut self, addr: u64, write: bool, now: u64) -> AccessOutcome {
        let c = self.config;
        let block = addr / c.block_bytes as u64;
        let set = block % self.sets;
        let tag = block / self.sets;
        let n = c.assoc as usize;
        let base = set as usize * n;
        self.clock += 1;
        let stamp = self.clock;

        let ways = &self.lines[base..base + n];
        let (way, hit) = match ways.iter().position(|l| l.valid && l.tag == tag) {
            Some(w) => (w, true),
            None => {
                let victim = ways
                    .iter()
                    .position(|l| !l.valid)
                    .unwrap_or_else(|| (0..n).min_by_key(|&w| ways[w].lru_stamp).unwrap());
                (victim, false)
            }
        };
        let idx = base + way;
        let line = self.lines[idx];
        let volatile = line.is_volatile;
        let (rd, wr) = if volatile {
            (c.vol_read_latency, c.vol_write_latency)
        } else {
            (c.nv_read_latency, c.nv_write_latency)
        };
        let stall = line.busy_until.saturating_sub(now);
        let start = now + stall;

        let mut writeback = None;
        let latency;
        if hit {
            self.stats.hits += 1;
            self.charge(volatile, write);
            if write {
                latency = stall + c.vol_write_latency;
                self.lines[idx].busy_until = start + wr;
                self.lines[idx].dirty = true;
            } else {
                latency = stall + rd;
            }
        } else {
            self.stats.misses += 1;
            if line.valid && line.dirty {
                self.stats.writebacks += 1;
                writeback = Some((line.tag * self.sets + set) * c.block_bytes as u64);
            }
            let filled = start + c.miss_penalty;
            self.charge(volatile, true);
            if write {
                latency = stall + c.miss_penalty + c.vol_write_latency;
            } else {
                self.charge(volatile, false);
                latency = stall + c.miss_penalty + rd;
            }
            let l = &mut self.lines[idx];
            l.valid = true;
            l.tag = tag;
            l.dirty = write;
            l.busy_until = filled + wr;
        }
        self.lines[idx].lru_stamp = stamp;
        self.stats.total_latency += latency;
        AccessOutcome { hit, latency, writeback }
    }

    /// Replays reads and writes; RowClone requests bypass the cache.
    pub fn run<'a, I>(&mut self, requests: I)
    where
        I: IntoIterator<Item = &'a MemoryRequest>,
    {
        for r in requests {
            match r.op {
                Op::Read => {
                    self.access(r.address, false, r.arrival_cycle);
                }
                Op::Write => {
                    self.access(r.address, true, r.arrival_cycle);
                }
                Op::RowClone => {}
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub ratio: u32,
    pub latency_cycles: u64,
    pub dyn_energy: f64,
    pub hits: u64,
    pub misses: u64,
    pub stats: HybridStats,
}

pub const SWEEP_CSV_HEADER: &str = "ratio,latency_cycles,dyn_energy_nJ";

impl SweepPoint {
    pub fn csv_row(&self) -> String {
        format!("{},{},{:.6}", self.ratio, self.latency_cycles, self.dyn_energy)
    }
}

/// Runs `requests` once per ratio on a fresh cache.
pub fn sweep_ratio(
    requests: &[MemoryRequest],
    config: HybridCacheConfig,
    ratios: &[u32],
) -> Result<Vec<SweepPoint>, InvalidCacheConfig> {
    ratios.iter().map(|&r| sweep_point(requests, config, r)).collect()
}

pub fn sweep_point(requests: &[MemoryRequest], config: HybridCacheConfig, ratio: u32) -> Result<SweepPoint, InvalidCacheConfig> {
    let mut cache = HybridCache::new(config.with_ratio(ratio))?;
    cache.run(requests);
    let s = *cache.stats();
    Ok(SweepPoint {
        ratio,
        latency_cycles: s.total_latency,
        dyn_energy: s.dyn_energy,
        hits: s.hits,
        misses: s.misses,
        stats: s,
    })
}
