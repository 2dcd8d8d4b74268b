use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::{DecodedAddress, Geometry};

type RowKey = (u32, u32, u32, u32, u32);

fn row_key(d: &DecodedAddress) -> RowKey {
    (d.channel, d.rank, d.bank, d.subarray, d.row)
}

/// Sparse store of row contents for payload simulation. Rows never written
/// read back as zeros.
#[derive(Debug, Clone)]
pub struct RowStore {
    geometry: Geometry,
    rows: BTreeMap<RowKey, Vec<u8>>,
}

impl RowStore {
    pub fn new(geometry: Geometry) -> Self {
        Self {
            geometry,
            rows: BTreeMap::new(),
        }
    }

    fn block_range(&self, d: &DecodedAddress) -> core::ops::Range<usize> {
        let bytes_per_col = (self.geometry.device_width_bits / 8) as usize;
        let start = d.column as usize * bytes_per_col;
        start..start + self.geometry.block_size_bytes as usize
    }

    pub fn write_block(&mut self, d: &DecodedAddress, data: &[u8]) {
        let range = self.block_range(d);
        let row_bytes = self.geometry.row_bytes() as usize;
        let row = self
            .rows
            .entry(row_key(d))
            .or_insert_with(|| vec![0u8; row_bytes]);
        row[range].copy_from_slice(data);
    }

    pub fn read_block(&self, d: &DecodedAddress) -> Vec<u8> {
        match self.rows.get(&row_key(d)) {
            Some(row) => row[self.block_range(d)].to_vec(),
            None => vec![0u8; self.geometry.block_size_bytes as usize],
        }
    }

    pub fn row(&self, d: &DecodedAddress) -> Vec<u8> {
        self.rows
            .get(&row_key(d))
            .cloned()
            .unwrap_or_else(|| vec![0u8; self.geometry.row_bytes() as usize])
    }

    pub fn copy_row(&mut self, src: &DecodedAddress, dst: &DecodedAddress) {
        match self.rows.get(&row_key(src)).cloned() {
            Some(bytes) => {
                self.rows.insert(row_key(dst), bytes);
            }
            None => {
                self.rows.remove(&row_key(dst));
            }
        }
    }

    pub fn zero_row(&mut self, dst: &DecodedAddress) {
        self.rows.remove(&row_key(dst));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> Geometry {
        Geometry {
            channels: 1,
            ranks_per_channel: 1,
            banks_per_rank: 1,
            subarrays_per_bank: 2,
            rows_per_subarray: 8,
            columns_per_row: 512,
            device_width_bits: 64,
            burst_length: 8,
            block_size_bytes: 64,
        }
    }

    #[test]
    fn clone_copies_full_row() {
        let g = geom();
        let mut s = RowStore::new(g);
        let src = DecodedAddress { row: 2, ..Default::default() };
        for col in 0..g.blocks_per_row() as u32 {
            let d = DecodedAddress { column: col * g.columns_per_block(), ..src };
            s.write_block(&d, &[col as u8 + 1; 64]);
        }
        let dst = DecodedAddress { row: 5, ..Default::default() };
        s.copy_row(&src, &dst);
        assert_eq!(s.row(&dst), s.row(&src));
        assert_eq!(s.row(&dst).len(), 4096);
        let probe = DecodedAddress { column: 3 * g.columns_per_block(), ..dst };
        assert_eq!(s.read_block(&probe), vec![4u8; 64]);
        s.zero_row(&dst);
        assert!(s.row(&dst).iter().all(|b| *b == 0));
    }

    #[test]
    fn self_clone_keeps_contents() {
        let mut s = RowStore::new(geom());
        let a = DecodedAddress { row: 1, ..Default::default() };
        s.write_block(&a, &[9; 64]);
        s.copy_row(&a, &a);
        assert_eq!(s.read_block(&a), vec![9; 64]);
    }
}
