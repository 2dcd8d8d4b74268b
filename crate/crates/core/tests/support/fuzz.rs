//! Seeded random traces that mix row-local runs, bank conflicts, writes and
//! same-subarray clones.

use nvmsim_core::memory::{encode_address, AddressMapping, DecodedAddress, Geometry};
use nvmsim_core::trace::MemoryRequest;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fuzz_geometry() -> Geometry {
    Geometry {
        channels: 2,
        ranks_per_channel: 2,
        banks_per_rank: 4,
        subarrays_per_bank: 4,
        rows_per_subarray: 16,
        columns_per_row: 512,
        device_width_bits: 64,
        burst_length: 8,
        block_size_bytes: 64,
    }
}

fn random_target(rng: &mut ChaCha8Rng, g: &Geometry) -> DecodedAddress {
    let cpb = g.columns_per_block();
    DecodedAddress {
        channel: rng.random_range(0..g.channels),
        rank: rng.random_range(0..g.ranks_per_channel),
        bank: rng.random_range(0..g.banks_per_rank),
        subarray: rng.random_range(0..g.subarrays_per_bank),
        row: rng.random_range(0..g.rows_per_subarray),
        column: rng.random_range(0..g.blocks_per_row() as u32) * cpb,
        offset: 0,
    }
}

/// `len` requests with bursty arrivals. Roughly a third are writes and a
/// few percent RowClones (some deliberately cross-subarray).
pub fn fuzz_trace(seed: u64, len: usize, g: &Geometry) -> Vec<MemoryRequest> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let map = AddressMapping::RoRaBaCoCh;
    let mut cycle = 0u64;
    let mut cur = random_target(&mut rng, g);
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        cycle += match rng.random_range(0..4) {
            0 => 0,
            1 => rng.random_range(1..4),
            2 => rng.random_range(4..30),
            _ => rng.random_range(30..200),
        };
        if rng.random_bool(0.3) {
            cur = random_target(&mut rng, g);
        } else {
            cur.column = rng.random_range(0..g.blocks_per_row() as u32) * g.columns_per_block();
        }
        let addr = encode_address(&cur, g, map);
        let roll = rng.random_range(0..100);
        let req = if roll < 4 {
            let mut dst = cur;
            dst.row = rng.random_range(0..g.rows_per_subarray);
            if roll == 0 {
                dst.subarray = (dst.subarray + 1) % g.subarrays_per_bank;
            }
            if dst.row == cur.row && dst.subarray == cur.subarray {
                continue;
            }
            let mut src = cur;
            src.column = 0;
            dst.column = 0;
            MemoryRequest::rowclone(cycle, encode_address(&src, g, map), encode_address(&dst, g, map))
        } else if roll < 35 {
            let data: Vec<u8> = (0..g.block_size_bytes).map(|_| rng.random()).collect();
            MemoryRequest::write(cycle, addr, Some(data))
        } else {
            MemoryRequest::read(cycle, addr)
        };
        out.push(req);
    }
    out
}
