//! Bundled configurations, sample traces and CiM programs.
//!
//! Traces and programs are produced by the seeded generators below; the
//! files under `assets/` are their frozen output.

use std::fmt::Write as _;

use nvmsim_core::memory::{encode_address, AddressMapping, DecodedAddress, Geometry};
use nvmsim_core::trace::{format_trace_line, MemoryRequest};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PCM_DEFAULT_CONFIG: &str = include_str!("../assets/pcm_default.config");
pub const DRAM_DEFAULT_CONFIG: &str = include_str!("../assets/dram_default.config");
pub const HYBRID_CONFIG: &str = include_str!("../assets/hybrid.config");
pub const NAND_PROGRAM: &str = include_str!("../assets/nand.cim");
pub const TERNARY_PROGRAM: &str = include_str!("../assets/ternary.cim");

/// Geometry of the bundled single-channel configs.
pub fn default_geometry() -> Geometry {
    Geometry {
        channels: 1,
        ranks_per_channel: 1,
        banks_per_rank: 8,
        subarrays_per_bank: 8,
        rows_per_subarray: 512,
        columns_per_row: 512,
        device_width_bits: 64,
        burst_length: 8,
        block_size_bytes: 64,
    }
}

fn addr(g: &Geometry, bank: u32, bank_row: u32, slot: u32) -> u64 {
    let d = DecodedAddress {
        bank,
        subarray: bank_row / g.rows_per_subarray,
        row: bank_row % g.rows_per_subarray,
        column: slot * g.columns_per_block(),
        ..DecodedAddress::default()
    };
    encode_address(&d, g, AddressMapping::RoRaBaCoCh)
}

fn render(header: &str, reqs: &[MemoryRequest]) -> String {
    let mut s = String::new();
    for line in header.lines() {
        let _ = writeln!(s, "; {line}");
    }
    for r in reqs {
        s.push_str(&format_trace_line(r));
        s.push('\n');
    }
    s
}

fn random_block(rng: &mut ChaCha8Rng, len: usize) -> Vec<u8> {
    (0..len).map(|_| rng.random()).collect()
}

/// Four concurrent streams, each walking 8 blocks of one row before moving
/// to a fresh bank and row. Streams are interleaved request by request, so
/// an in-order scheduler keeps switching rows.
pub fn row_local_trace() -> String {
    let g = default_geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0001);
    const STREAMS: usize = 4;
    const RUN: u32 = 8;
    struct Stream {
        bank: u32,
        row: u32,
        slot: u32,
        left: u32,
        write: bool,
    }
    let fresh = |rng: &mut ChaCha8Rng| Stream {
        bank: rng.random_range(0..g.banks_per_rank),
        row: rng.random_range(0..g.rows_per_bank() as u32),
        slot: rng.random_range(0..g.blocks_per_row() as u32 - RUN),
        left: RUN,
        write: rng.random_bool(0.3),
    };
    let mut streams: Vec<Stream> = (0..STREAMS).map(|_| fresh(&mut rng)).collect();
    let mut reqs = Vec::with_capacity(12_000);
    let mut cycle = 0;
    while reqs.len() < 12_000 {
        let i = reqs.len() % STREAMS;
        if streams[i].left == 0 {
            streams[i] = fresh(&mut rng);
        }
        let s = &mut streams[i];
        let a = addr(&g, s.bank, s.row, s.slot);
        s.slot += 1;
        s.left -= 1;
        let write = s.write;
        reqs.push(if write {
            MemoryRequest::write(cycle, a, Some(random_block(&mut rng, 64)))
        } else {
            MemoryRequest::read(cycle, a)
        });
        cycle += rng.random_range(1..=4);
    }
    render("row-local synthetic trace: 4 interleaved 8-block row streams, 30% write streams", &reqs)
}

pub fn random_trace() -> String {
    let g = default_geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0002);
    let blocks = g.capacity() / 64;
    let mut cycle = 0;
    let reqs: Vec<MemoryRequest> = (0..2_000)
        .map(|_| {
            cycle += rng.random_range(0..20);
            let a = rng.random_range(0..blocks) * 64;
            if rng.random_bool(0.3) {
                MemoryRequest::write(cycle, a, Some(random_block(&mut rng, 64)))
            } else {
                MemoryRequest::read(cycle, a)
            }
        })
        .collect();
    render("uniformly random addresses, 30% writes", &reqs)
}

/// Fills a source row, copies it to a row of the same subarray, zeroes a
/// third row from the subarray's zero row, then reads both targets back.
pub fn rowclone_trace() -> String {
    let g = default_geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0003);
    let (bank, sa) = (2, 3);
    let base = sa * g.rows_per_subarray;
    let (src, dst, zeroed) = (base + 10, base + 200, base + 300);
    let mut reqs = Vec::new();
    let mut cycle = 0;
    for slot in 0..g.blocks_per_row() as u32 {
        reqs.push(MemoryRequest::write(cycle, addr(&g, bank, src, slot), Some(random_block(&mut rng, 64))));
        reqs.push(MemoryRequest::write(cycle, addr(&g, bank, zeroed, slot), Some(random_block(&mut rng, 64))));
        cycle += 2;
    }
    cycle += 2_000;
    reqs.push(MemoryRequest::rowclone(cycle, addr(&g, bank, src, 0), addr(&g, bank, dst, 0)));
    cycle += 200;
    reqs.push(MemoryRequest::rowclone(cycle, addr(&g, bank, base, 0), addr(&g, bank, zeroed, 0)));
    cycle += 200;
    for slot in 0..4 {
        reqs.push(MemoryRequest::read(cycle, addr(&g, bank, dst, slot)));
        reqs.push(MemoryRequest::read(cycle, addr(&g, bank, zeroed, slot)));
        cycle += 2;
    }
    render("RowClone sample: one FPM copy and one bulk zero in bank 2, subarray 3", &reqs)
}

/// Accesses are spaced so no line is touched while a previous write to it
/// is still in flight.
const CACHE_SPACING: u64 = 40;

/// 85% writes, uniformly over twice the default cache capacity.
pub fn cache_write_heavy_trace() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0004);
    let lines = 2 * 1024;
    let reqs: Vec<MemoryRequest> = (0..20_000u64)
        .map(|i| {
            let a = rng.random_range(0..lines) * 64;
            if rng.random_bool(0.85) {
                MemoryRequest::write(i * CACHE_SPACING, a, None)
            } else {
                MemoryRequest::read(i * CACHE_SPACING, a)
            }
        })
        .collect();
    render("cache trace: 85% writes over 128 KiB", &reqs)
}

/// One write per 200 accesses over a 32 KiB working set that fits in the
/// default cache.
pub fn cache_read_heavy_trace() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_0005);
    let lines = 512;
    let reqs: Vec<MemoryRequest> = (0..30_000u64)
        .map(|i| {
            let a = rng.random_range(0..lines) * 64;
            if i % 200 == 199 {
                MemoryRequest::write(i * CACHE_SPACING, a, None)
            } else {
                MemoryRequest::read(i * CACHE_SPACING, a)
            }
        })
        .collect();
    render("cache trace: 0.5% writes over a 32 KiB working set", &reqs)
}

/// Every generated asset as `(file name, contents)`.
pub fn generated() -> Vec<(&'static str, String)> {
    vec![
        ("row_local.nvt", row_local_trace()),
        ("random.nvt", random_trace()),
        ("rowclone.nvt", rowclone_trace()),
        ("cache_write_heavy.nvt", cache_write_heavy_trace()),
        ("cache_read_heavy.nvt", cache_read_heavy_trace()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(row_local_trace(), row_local_trace());
        assert_eq!(rowclone_trace(), rowclone_trace());
    }

    #[test]
    fn row_local_has_enough_requests() {
        let n = row_local_trace().lines().filter(|l| !l.starts_with(';')).count();
        assert!(n >= 10_000);
    }
}
