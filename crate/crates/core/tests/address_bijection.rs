use nvmsim_core::memory::{decode_address, encode_address, AddressMapping, Geometry, MemoryError};

/// 2 ch x 2 ranks x 4 banks x 4 subarrays x 16 rows x 1 KiB rows = 2^20 bytes.
fn geometry() -> Geometry {
    Geometry {
        channels: 2,
        ranks_per_channel: 2,
        banks_per_rank: 4,
        subarrays_per_bank: 4,
        rows_per_subarray: 16,
        columns_per_row: 128,
        device_width_bits: 64,
        burst_length: 8,
        block_size_bytes: 64,
    }
}

#[test]
fn decode_is_a_bijection_over_every_address() {
    let g = geometry();
    assert_eq!(g.capacity(), 1 << 20);
    let m = AddressMapping::RoRaBaCoCh;
    let mut seen = vec![false; 1 << 20];
    for addr in 0..g.capacity() {
        let d = decode_address(addr, &g, m).unwrap();
        assert!(d.channel < g.channels && d.rank < g.ranks_per_channel && d.bank < g.banks_per_rank);
        assert!(d.subarray < g.subarrays_per_bank && d.row < g.rows_per_subarray);
        assert!(d.column < g.columns_per_row && d.offset < g.block_size_bytes);
        let back = encode_address(&d, &g, m);
        assert_eq!(back, addr);
        assert!(!std::mem::replace(&mut seen[back as usize], true));
    }
    assert!(seen.iter().all(|s| *s));
}

#[test]
fn first_address_past_capacity_is_rejected() {
    let g = geometry();
    assert!(matches!(
        decode_address(g.capacity(), &g, AddressMapping::RoRaBaCoCh),
        Err(MemoryError::AddressOutOfRange { .. })
    ));
}
