//! Memory organization: geometry, address mapping, timing profiles, the
//! per-channel command state machine and RowClone.

mod bank;
mod payload;
mod timing;

pub use bank::{BankState, ChannelState, Command, CommandKind, IssuedCommand, RankState};
pub use payload::RowStore;
pub use timing::{read_cycle_cycles, MemoryKind, TimingProfile};

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MemoryError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid timing profile: {0}")]
    InvalidProfile(String),
    #[error("address {address:#x} outside capacity {capacity:#x}")]
    AddressOutOfRange { address: u64, capacity: u64 },
    #[error("{command} is illegal: {reason}")]
    IllegalCommandForState {
        command: CommandKind,
        reason: &'static str,
    },
    #[error("{command} at cycle {cycle} violates timing, earliest legal cycle is {earliest}")]
    TimingViolation {
        command: CommandKind,
        cycle: u64,
        earliest: u64,
    },
    #[error("RowClone source and destination are not in the same subarray")]
    CrossSubarrayClone,
}

/// Organization of the memory behind one controller. `channels` is only
/// used when addresses are interleaved across channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub channels: u32,
    pub ranks_per_channel: u32,
    pub banks_per_rank: u32,
    pub subarrays_per_bank: u32,
    pub rows_per_subarray: u32,
    pub columns_per_row: u32,
    pub device_width_bits: u32,
    pub burst_length: u32,
    pub block_size_bytes: u32,
}

impl Geometry {
    pub fn validate(&self) -> Result<(), MemoryError> {
        let fields = [
            ("channels", self.channels),
            ("ranks", self.ranks_per_channel),
            ("banks", self.banks_per_rank),
            ("subarrays", self.subarrays_per_bank),
            ("rows", self.rows_per_subarray),
            ("columns", self.columns_per_row),
            ("device width", self.device_width_bits),
            ("burst length", self.burst_length),
            ("block size", self.block_size_bytes),
        ];
        for (name, v) in fields {
            if v == 0 || !v.is_power_of_two() {
                return Err(MemoryError::InvalidGeometry(alloc::format!(
                    "{name} must be a positive power of two, got {v}"
                )));
            }
        }
        if self.device_width_bits < 8 {
            return Err(MemoryError::InvalidGeometry("device width below 8 bits".into()));
        }
        if self.row_bytes() < self.block_size_bytes as u64 {
            return Err(MemoryError::InvalidGeometry(
                "row smaller than one block".into(),
            ));
        }
        if (self.block_size_bytes as u64) * 8 < self.device_width_bits as u64 {
            return Err(MemoryError::InvalidGeometry(
                "block narrower than one device column".into(),
            ));
        }
        Ok(())
    }

    pub fn row_bytes(&self) -> u64 {
        self.columns_per_row as u64 * self.device_width_bits as u64 / 8
    }

    pub fn blocks_per_row(&self) -> u64 {
        self.row_bytes() / self.block_size_bytes as u64
    }

    pub fn columns_per_block(&self) -> u32 {
        self.block_size_bytes * 8 / self.device_width_bits
    }

    pub fn rows_per_bank(&self) -> u64 {
        self.subarrays_per_bank as u64 * self.rows_per_subarray as u64
    }

    pub fn channel_capacity(&self) -> u64 {
        self.ranks_per_channel as u64 * self.banks_per_rank as u64 * self.rows_per_bank() * self.row_bytes()
    }

    pub fn capacity(&self) -> u64 {
        self.channels as u64 * self.channel_capacity()
    }

    pub fn with_channels(self, channels: u32) -> Self {
        Self { channels, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, PartialOrd, Ord)]
pub struct DecodedAddress {
    pub channel: u32,
    pub rank: u32,
    pub bank: u32,
    pub subarray: u32,
    /// Row inside the subarray.
    pub row: u32,
    /// First device column of the block.
    pub column: u32,
    /// Byte offset inside the block.
    pub offset: u32,
}

impl DecodedAddress {
    pub fn bank_row(&self, g: &Geometry) -> u32 {
        self.subarray * g.rows_per_subarray + self.row
    }

    pub fn same_subarray(&self, other: &DecodedAddress) -> bool {
        (self.channel, self.rank, self.bank, self.subarray)
            == (other.channel, other.rank, other.bank, other.subarray)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AddressMapping {
    /// Fields from most to least significant: row, rank, bank, column,
    /// channel, with the block offset below the channel bits.
    #[default]
    RoRaBaCoCh,
}

impl FromStr for AddressMapping {
    type Err = MemoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "RoRaBaCoCh" => Ok(Self::RoRaBaCoCh),
            other => Err(MemoryError::InvalidGeometry(alloc::format!(
                "unsupported address mapping `{other}`"
            ))),
        }
    }
}

impl fmt::Display for AddressMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("RoRaBaCoCh")
    }
}

pub fn decode_address(
    addr: u64,
    g: &Geometry,
    _mapping: AddressMapping,
) -> Result<DecodedAddress, MemoryError> {
    let capacity = g.capacity();
    if addr >= capacity {
        return Err(MemoryError::AddressOutOfRange {
            address: addr,
            capacity,
        });
    }
    let block = g.block_size_bytes as u64;
    let offset = (addr % block) as u32;
    let mut x = addr / block;
    let mut take = |n: u64| {
        let v = x % n;
        x /= n;
        v as u32
    };
    let channel = take(g.channels as u64);
    let slot = take(g.blocks_per_row());
    let bank = take(g.banks_per_rank as u64);
    let rank = take(g.ranks_per_channel as u64);
    let bank_row = take(g.rows_per_bank());
    Ok(DecodedAddress {
        channel,
        rank,
        bank,
        subarray: bank_row / g.rows_per_subarray,
        row: bank_row % g.rows_per_subarray,
        column: slot * g.columns_per_block(),
        offset,
    })
}

pub fn encode_address(d: &DecodedAddress, g: &Geometry, _mapping: AddressMapping) -> u64 {
    let mut x = d.bank_row(g) as u64;
    x = x * g.ranks_per_channel as u64 + d.rank as u64;
    x = x * g.banks_per_rank as u64 + d.bank as u64;
    x = x * g.blocks_per_row() + (d.column / g.columns_per_block()) as u64;
    x = x * g.channels as u64 + d.channel as u64;
    x * g.block_size_bytes as u64 + d.offset as u64
}

/// Planned FPM RowClone: `ACT(src)`, `ACT(dst)`, `PRE` back to back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowClonePlan {
    pub service_cycles: u64,
    pub energy_nj: f64,
    pub zeroing: bool,
}

impl RowClonePlan {
    pub fn latency_ns(&self, profile: &TimingProfile) -> f64 {
        self.service_cycles as f64 * profile.clock_period_ns
    }
}

/// Row 0 of every subarray is reserved as the all-zero source for bulk
/// zeroing; a clone from it is charged the zeroing energy.
pub const ZERO_ROW: u32 = 0;

pub fn rowclone_fpm(
    src: &DecodedAddress,
    dst: &DecodedAddress,
    profile: &TimingProfile,
) -> Result<RowClonePlan, MemoryError> {
    if !src.same_subarray(dst) {
        return Err(MemoryError::CrossSubarrayClone);
    }
    let zeroing = src.row == ZERO_ROW;
    Ok(RowClonePlan {
        service_cycles: profile.rowclone_cycles(),
        energy_nj: if zeroing {
            profile.e_rowclone_zero
        } else {
            profile.e_rowclone
        },
        zeroing,
    })
}

pub fn rowclone_zero(dst: &DecodedAddress, profile: &TimingProfile) -> Result<RowClonePlan, MemoryError> {
    let src = DecodedAddress {
        row: ZERO_ROW,
        ..*dst
    };
    rowclone_fpm(&src, dst, profile)
}
