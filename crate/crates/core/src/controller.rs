//! Per-channel memory controllers, scheduling policies, hybrid range routing
//! and latency / row-buffer statistics.
//!
//! One controller drives each channel and channels never interact. Every
//! cycle a controller retires finished requests and then issues at most one
//! device command.
//!
//! - `FCFS` serves only the head of its queue and runs the bank closed-page
//!   (precharge right after the burst), so row-buffer hits and misses are
//!   never counted.
//! - `FRFCFS` prefers ready row-buffer hits, then the oldest request with a
//!   ready command.
//! - `FRFCFS-WQF` splits reads and writes. Reads go first until the write
//!   queue reaches the high watermark; it then drains writes only, in
//!   FR-FCFS order, down to the low watermark.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::str::FromStr;

use crate::memory::{
    decode_address, rowclone_fpm, AddressMapping, ChannelState, Command, DecodedAddress, Geometry,
    IssuedCommand, MemoryError, MemoryKind, RowStore, TimingProfile,
};
use crate::trace::{MemoryRequest, Op, SinkUnavailable, TraceError, TraceWriter};
use crate::wear::EnergyLedger;

/// A hit to a bank stops protecting its open row from precharge once an
/// older request to another row of that bank has been passed over this many
/// times.
pub const STARVATION_LIMIT: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Fcfs,
    FrFcfs,
    FrFcfsWqf,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Fcfs => "FCFS",
            Policy::FrFcfs => "FRFCFS",
            Policy::FrFcfsWqf => "FRFCFS-WQF",
        }
    }
}

impl FromStr for Policy {
    type Err = ControllerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "FCFS" => Ok(Policy::Fcfs),
            "FRFCFS" | "FR-FCFS" => Ok(Policy::FrFcfs),
            "FRFCFS-WQF" | "FRFCFS_WQF" | "FR-FCFS-WQF" => Ok(Policy::FrFcfsWqf),
            other => Err(ControllerError::InvalidConfig(format!("unknown policy `{other}`"))),
        }
    }
}

/// `[start, end)` mapped to a channel and the timing profile it uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelRange {
    pub start: u64,
    pub end: u64,
    pub channel: u32,
    pub profile: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllerConfig {
    pub policy: Policy,
    pub read_queue_capacity: usize,
    pub write_queue_capacity: usize,
    pub wq_high_watermark: usize,
    pub wq_low_watermark: usize,
    /// Empty means channels are interleaved by the address mapping and all
    /// share profile 0.
    pub channel_ranges: Vec<ChannelRange>,
    pub allow_dram_rowclone: bool,
}

impl ControllerConfig {
    pub fn new(policy: Policy, read_queue_capacity: usize, write_queue_capacity: usize) -> Self {
        let (high, low) = Self::default_watermarks(write_queue_capacity);
        Self {
            policy,
            read_queue_capacity,
            write_queue_capacity,
            wq_high_watermark: high,
            wq_low_watermark: low,
            channel_ranges: Vec::new(),
            allow_dram_rowclone: false,
        }
    }

    /// 80% and 20% of the write queue capacity.
    pub fn default_watermarks(capacity: usize) -> (usize, usize) {
        let high = (capacity * 4 / 5).max(1);
        let low = (capacity / 5).min(high - 1);
        (high, low)
    }

    /// Capacity of the single transaction queue used by FCFS and FRFCFS.
    pub fn shared_queue_capacity(&self) -> usize {
        self.read_queue_capacity + self.write_queue_capacity
    }

    pub fn validate(&self, profiles: usize) -> Result<(), ControllerError> {
        let bad = |m: String| Err(ControllerError::InvalidConfig(m));
        if self.read_queue_capacity == 0 || self.write_queue_capacity == 0 {
            return bad("queue capacities must be positive".into());
        }
        if !(self.wq_low_watermark < self.wq_high_watermark
            && self.wq_high_watermark <= self.write_queue_capacity)
        {
            return bad(format!(
                "watermarks must satisfy low < high <= capacity, got {} / {} / {}",
                self.wq_low_watermark, self.wq_high_watermark, self.write_queue_capacity
            ));
        }
        let mut ranges = self.channel_ranges.clone();
        ranges.sort_by_key(|r| r.start);
        let mut expected = 0;
        for r in &ranges {
            if r.start >= r.end {
                return bad(format!("empty range [{:#x}, {:#x})", r.start, r.end));
            }
            if r.start != expected {
                return bad(format!(
                    "channel ranges must be disjoint and cover from 0; gap or overlap at {:#x}",
                    r.start.min(expected)
                ));
            }
            if r.profile as usize >= profiles {
                return bad(format!("range references undefined profile {}", r.profile));
            }
            expected = r.end;
        }
        Ok(())
    }

    /// Range lookup; `None` when channels are interleaved.
    pub fn route(&self, addr: u64) -> Option<Result<(u32, u32), ControllerError>> {
        if self.channel_ranges.is_empty() {
            return None;
        }
        Some(
            self.channel_ranges
                .iter()
                .find(|r| (r.start..r.end).contains(&addr))
                .map(|r| (r.channel, r.profile))
                .ok_or(ControllerError::UnmappedAddress(addr)),
        )
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControllerError {
    #[error("invalid controller configuration: {0}")]
    InvalidConfig(String),
    #[error("address {0:#x} is not mapped to any channel")]
    UnmappedAddress(u64),
    #[error("queue full")]
    QueueFull,
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Sink(#[from] SinkUnavailable),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Route {
    pub channel: u32,
    pub profile: u32,
    /// Address inside the channel's own address space.
    pub local_address: u64,
    pub target: DecodedAddress,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChannelStats {
    pub rb_hits: u64,
    pub rb_miss: u64,
    pub reads: u64,
    pub writes: u64,
    pub rowclones: u64,
    pub dropped_rowclones: u64,
    pub latency_sum: u64,
    pub total_latency_sum: u64,
    pub energy: EnergyLedger,
}

impl ChannelStats {
    pub fn completions(&self) -> u64 {
        self.reads + self.writes + self.rowclones
    }

    /// Mean of completion minus first command issue.
    pub fn average_latency(&self) -> f64 {
        match self.completions() {
            0 => 0.0,
            n => self.latency_sum as f64 / n as f64,
        }
    }

    /// Mean of completion minus arrival.
    pub fn average_total_latency(&self) -> f64 {
        match self.completions() {
            0 => 0.0,
            n => self.total_latency_sum as f64 / n as f64,
        }
    }

    fn accumulate(&mut self, o: &ChannelStats) {
        self.rb_hits += o.rb_hits;
        self.rb_miss += o.rb_miss;
        self.reads += o.reads;
        self.writes += o.writes;
        self.rowclones += o.rowclones;
        self.dropped_rowclones += o.dropped_rowclones;
        self.latency_sum += o.latency_sum;
        self.total_latency_sum += o.total_latency_sum;
        self.energy.merge(&o.energy);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerStats {
    pub global: ChannelStats,
    pub per_channel: Vec<ChannelStats>,
    pub cycles: u64,
}

/// One retired request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompletionRecord {
    pub id: u64,
    pub channel: u32,
    pub op: Op,
    pub arrival: u64,
    pub first_issue: u64,
    pub completion: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelCommand {
    pub channel: u32,
    pub command: IssuedCommand,
}

#[derive(Debug, Clone)]
struct Pending {
    id: u64,
    op: Op,
    arrival: u64,
    target: DecodedAddress,
    row: u32,
    clone_dst: Option<DecodedAddress>,
    data: Option<Vec<u8>>,
    first_issue: Option<u64>,
    activated: bool,
    bypassed: u32,
}

#[derive(Debug, Clone, Copy)]
struct InFlight {
    id: u64,
    op: Op,
    arrival: u64,
    first_issue: u64,
    completion: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueueSel {
    Read,
    Write,
}

/// A scheduling decision: which queued request and which of its commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub queue: QueueSel,
    pub index: usize,
    pub command: Command,
}

pub struct ChannelController {
    id: u32,
    policy: Policy,
    geometry: Geometry,
    config: ControllerConfig,
    state: ChannelState,
    /// Shared queue for FCFS / FRFCFS, read queue for WQF.
    read_q: Vec<Pending>,
    write_q: Vec<Pending>,
    draining: bool,
    in_flight: VecDeque<InFlight>,
    stats: ChannelStats,
    store: Option<RowStore>,
    completions: Option<Vec<CompletionRecord>>,
}

impl ChannelController {
    pub fn new(id: u32, geometry: Geometry, profile: TimingProfile, config: ControllerConfig) -> Self {
        let mut state = ChannelState::new(profile, geometry.ranks_per_channel, geometry.banks_per_rank);
        state.enable_log();
        Self {
            id,
            policy: config.policy,
            geometry,
            state,
            config,
            read_q: Vec::new(),
            write_q: Vec::new(),
            draining: false,
            in_flight: VecDeque::new(),
            stats: ChannelStats::default(),
            store: None,
            completions: None,
        }
    }

    pub fn state(&self) -> &ChannelState {
        &self.state
    }

    pub fn stats(&self) -> &ChannelStats {
        &self.stats
    }

    pub fn is_draining(&self) -> bool {
        self.draining
    }

    pub fn queue_lengths(&self) -> (usize, usize) {
        (self.read_q.len(), self.write_q.len())
    }

    pub fn is_idle(&self) -> bool {
        self.read_q.is_empty() && self.write_q.is_empty() && self.in_flight.is_empty()
    }

    fn separate_writes(&self) -> bool {
        self.policy == Policy::FrFcfsWqf
    }

    fn queue_for(&self, op: Op) -> (QueueSel, usize) {
        match (op, self.separate_writes()) {
            (Op::Write, true) => (QueueSel::Write, self.config.write_queue_capacity),
            (_, true) => (QueueSel::Read, self.config.read_queue_capacity),
            (_, false) => (QueueSel::Read, self.config.shared_queue_capacity()),
        }
    }

    fn queue(&self, q: QueueSel) -> &Vec<Pending> {
        match q {
            QueueSel::Read => &self.read_q,
            QueueSel::Write => &self.write_q,
        }
    }

    pub fn can_accept(&self, op: Op) -> bool {
        let (q, cap) = self.queue_for(op);
        self.queue(q).len() < cap
    }

    #[allow(clippy::too_many_arguments)]
    fn enqueue(
        &mut self,
        id: u64,
        op: Op,
        target: DecodedAddress,
        clone_dst: Option<DecodedAddress>,
        data: Option<Vec<u8>>,
        now: u64,
    ) -> Result<(), ControllerError> {
        let (q, cap) = self.queue_for(op);
        if self.queue(q).len() >= cap {
            return Err(ControllerError::QueueFull);
        }
        let p = Pending {
            id,
            op,
            arrival: now,
            row: target.bank_row(&self.geometry),
            target,
            clone_dst,
            data,
            first_issue: None,
            activated: false,
            bypassed: 0,
        };
        match q {
            QueueSel::Read => self.read_q.push(p),
            QueueSel::Write => self.write_q.push(p),
        }
        Ok(())
    }

    fn next_command(&self, p: &Pending) -> Command {
        let open = self.state.open_row(p.target.rank, p.target.bank);
        match (p.op, open) {
            (_, Some(r)) if p.op != Op::RowClone && r == p.row => match p.op {
                Op::Write => Command::Write,
                _ => Command::Read,
            },
            (_, Some(_)) => Command::Precharge,
            (Op::RowClone, None) => {
                let dst = p.clone_dst.expect("rowclone carries a destination");
                Command::RowClone {
                    src: p.row,
                    dst: dst.bank_row(&self.geometry),
                    zeroing: p.target.row == crate::memory::ZERO_ROW,
                }
            }
            (_, None) => Command::Activate { row: p.row },
        }
    }

    fn ready(&self, p: &Pending, cmd: Command, now: u64) -> bool {
        self.state
            .earliest_issue(p.target.rank, p.target.bank, cmd, now)
            .is_ok_and(|t| t <= now)
    }

    fn update_drain_mode(&mut self) {
        if self.policy != Policy::FrFcfsWqf {
            return;
        }
        let n = self.write_q.len();
        if !self.draining && n >= self.config.wq_high_watermark {
            self.draining = true;
        } else if self.draining && n <= self.config.wq_low_watermark {
            self.draining = false;
        }
    }

    /// The queue the policy serves this cycle.
    fn serving(&self) -> QueueSel {
        match self.policy {
            Policy::FrFcfsWqf if self.draining => QueueSel::Write,
            Policy::FrFcfsWqf if self.read_q.is_empty() => QueueSel::Write,
            _ => QueueSel::Read,
        }
    }

    pub fn pick_next(&self, now: u64) -> Option<Decision> {
        let sel = self.serving();
        let q = self.queue(sel);
        if q.is_empty() {
            return None;
        }
        if self.policy == Policy::Fcfs {
            let cmd = self.next_command(&q[0]);
            return self.ready(&q[0], cmd, now).then_some(Decision {
                queue: sel,
                index: 0,
                command: cmd,
            });
        }

        let cmds: Vec<Command> = q.iter().map(|p| self.next_command(p)).collect();
        let is_hit = |c: &Command| matches!(c, Command::Read | Command::Write);
        let starved_bank = |rank: u32, bank: u32, before: usize| {
            q[..before]
                .iter()
                .zip(&cmds)
                .any(|(o, c)| o.target.rank == rank && o.target.bank == bank && !is_hit(c) && o.bypassed >= STARVATION_LIMIT)
        };

        for (i, (p, c)) in q.iter().zip(&cmds).enumerate() {
            if is_hit(c) && !starved_bank(p.target.rank, p.target.bank, i) && self.ready(p, *c, now) {
                return Some(Decision { queue: sel, index: i, command: *c });
            }
        }
        for (i, (p, c)) in q.iter().zip(&cmds).enumerate() {
            if *c == Command::Precharge && p.bypassed < STARVATION_LIMIT {
                let protects_row = q.iter().zip(&cmds).any(|(o, oc)| {
                    is_hit(oc) && o.target.rank == p.target.rank && o.target.bank == p.target.bank
                });
                if protects_row {
                    continue;
                }
            }
            if self.ready(p, *c, now) {
                return Some(Decision { queue: sel, index: i, command: *c });
            }
        }
        None
    }

    fn retire(&mut self, now: u64) {
        while let Some(f) = self.in_flight.front() {
            if f.completion > now {
                break;
            }
            let f = self.in_flight.pop_front().unwrap();
            match f.op {
                Op::Read => self.stats.reads += 1,
                Op::Write => self.stats.writes += 1,
                Op::RowClone => self.stats.rowclones += 1,
            }
            self.stats.latency_sum += f.completion - f.first_issue;
            self.stats.total_latency_sum += f.completion - f.arrival;
            if let Some(log) = &mut self.completions {
                log.push(CompletionRecord {
                    id: f.id,
                    channel: self.id,
                    op: f.op,
                    arrival: f.arrival,
                    first_issue: f.first_issue,
                    completion: f.completion,
                });
            }
        }
    }

    fn issue(&mut self, rank: u32, bank: u32, cmd: Command, cycle: u64) -> Result<(), ControllerError> {
        if let Some(e) = self.state.issue(rank, bank, cmd, cycle)? {
            self.stats.energy.record(e);
        }
        Ok(())
    }

    fn tick(&mut self, now: u64, issued: &mut Vec<ChannelCommand>) -> Result<(), ControllerError> {
        self.retire(now);
        self.update_drain_mode();
        let Some(d) = self.pick_next(now) else {
            return Ok(());
        };
        let counts_rb = self.policy != Policy::Fcfs;
        let (rank, bank) = {
            let p = &self.queue(d.queue)[d.index];
            (p.target.rank, p.target.bank)
        };
        let log_start = self.state.log().len();
        self.issue(rank, bank, d.command, now)?;

        let q = match d.queue {
            QueueSel::Read => &mut self.read_q,
            QueueSel::Write => &mut self.write_q,
        };
        q[d.index].first_issue.get_or_insert(now);
        let done = match d.command {
            Command::Activate { .. } => {
                q[d.index].activated = true;
                if counts_rb {
                    self.stats.rb_miss += 1;
                }
                None
            }
            Command::Precharge => None,
            Command::Read | Command::Write => {
                let p = q.remove(d.index);
                if counts_rb && !p.activated {
                    self.stats.rb_hits += 1;
                }
                for older in q[..d.index].iter_mut() {
                    if older.target.rank == rank && older.target.bank == bank && older.row != p.row {
                        older.bypassed += 1;
                    }
                }
                if let (Some(store), Some(data), Command::Write) = (&mut self.store, &p.data, d.command) {
                    store.write_block(&p.target, data);
                }
                Some((p, now + self.state.profile.t_burst))
            }
            Command::RowClone { .. } => {
                let p = q.remove(d.index);
                if let Some(store) = &mut self.store {
                    let dst = p.clone_dst.unwrap();
                    if p.target.row == crate::memory::ZERO_ROW {
                        store.zero_row(&dst);
                    } else {
                        store.copy_row(&p.target, &dst);
                    }
                }
                Some((p, now + self.state.profile.rowclone_cycles()))
            }
        };
        if let Some((p, completion)) = done {
            // Closed-page: precharge as soon as the bank allows it.
            if self.policy == Policy::Fcfs && p.op != Op::RowClone {
                let pre = self.state.earliest_issue(rank, bank, Command::Precharge, now)?;
                self.issue(rank, bank, Command::Precharge, pre)?;
            }
            let f = InFlight {
                id: p.id,
                op: p.op,
                arrival: p.arrival,
                first_issue: p.first_issue.unwrap_or(now),
                completion,
            };
            let pos = self.in_flight.partition_point(|x| x.completion <= completion);
            self.in_flight.insert(pos, f);
        }
        for c in &self.state.log()[log_start..] {
            issued.push(ChannelCommand { channel: self.id, command: *c });
        }
        self.update_drain_mode();
        Ok(())
    }
}

/// Outcome of [`MemorySystem::run_trace`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub stats: ControllerStats,
    /// False when the cycle limit was hit before every request retired.
    pub completed: bool,
}

/// Result of offering a request to the controllers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Queued { id: u64, channel: u32 },
    /// RowClone rejected (cross-subarray, cross-channel or on DRAM) and
    /// counted in `dropped_rowclones`.
    Dropped { channel: u32 },
}

/// All channel controllers behind one global clock.
pub struct MemorySystem {
    geometry: Geometry,
    channel_geometry: Geometry,
    mapping: AddressMapping,
    config: ControllerConfig,
    profiles: Vec<TimingProfile>,
    channel_profiles: Vec<u32>,
    controllers: Vec<ChannelController>,
    now: u64,
    next_id: u64,
    command_log: bool,
}

impl MemorySystem {
    pub fn new(geometry: Geometry, profiles: Vec<TimingProfile>, config: ControllerConfig) -> Result<Self, ControllerError> {
        geometry.validate()?;
        if profiles.is_empty() {
            return Err(ControllerError::InvalidConfig("at least one timing profile is required".into()));
        }
        for p in &profiles {
            p.validate()?;
        }
        config.validate(profiles.len())?;

        let (channel_geometry, channel_profiles) = if config.channel_ranges.is_empty() {
            (geometry, alloc::vec![0; geometry.channels as usize])
        } else {
            let n = config.channel_ranges.iter().map(|r| r.channel).max().unwrap() + 1;
            let mut cp = alloc::vec![u32::MAX; n as usize];
            let per_channel = geometry.with_channels(1);
            for r in &config.channel_ranges {
                let slot = &mut cp[r.channel as usize];
                if *slot != u32::MAX && *slot != r.profile {
                    return Err(ControllerError::InvalidConfig(format!(
                        "channel {} is mapped with two profiles",
                        r.channel
                    )));
                }
                *slot = r.profile;
                if r.end - r.start > per_channel.capacity() {
                    return Err(ControllerError::InvalidConfig(format!(
                        "range [{:#x}, {:#x}) exceeds the channel capacity {:#x}",
                        r.start,
                        r.end,
                        per_channel.capacity()
                    )));
                }
            }
            if let Some(c) = cp.iter().position(|p| *p == u32::MAX) {
                return Err(ControllerError::InvalidConfig(format!("channel {c} has no address range")));
            }
            (per_channel, cp)
        };

        let controllers = channel_profiles
            .iter()
            .enumerate()
            .map(|(i, &p)| ChannelController::new(i as u32, channel_geometry, profiles[p as usize], config.clone()))
            .collect();
        Ok(Self {
            geometry,
            channel_geometry,
            mapping: AddressMapping::RoRaBaCoCh,
            config,
            profiles,
            channel_profiles,
            controllers,
            now: 0,
            next_id: 0,
            command_log: false,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn channel_geometry(&self) -> &Geometry {
        &self.channel_geometry
    }

    pub fn profile(&self, channel: u32) -> &TimingProfile {
        &self.profiles[self.channel_profiles[channel as usize] as usize]
    }

    pub fn channels(&self) -> &[ChannelController] {
        &self.controllers
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Keeps row contents so RowClone and writes have observable data.
    pub fn enable_payload(&mut self) {
        for c in &mut self.controllers {
            c.store.get_or_insert_with(|| RowStore::new(c.geometry));
        }
    }

    /// Records every device command and every retired request.
    pub fn enable_logging(&mut self) {
        self.command_log = true;
        for c in &mut self.controllers {
            c.state.enable_log();
            c.completions.get_or_insert_with(Vec::new);
        }
    }

    pub fn command_log(&self, channel: u32) -> &[IssuedCommand] {
        self.controllers[channel as usize].state.log()
    }

    pub fn completion_log(&self) -> Vec<CompletionRecord> {
        self.controllers
            .iter()
            .flat_map(|c| c.completions.iter().flatten().copied())
            .collect()
    }

    pub fn route(&self, addr: u64) -> Result<Route, ControllerError> {
        match self.config.route(addr) {
            None => {
                let target = decode_address(addr, &self.geometry, self.mapping)?;
                Ok(Route {
                    channel: target.channel,
                    profile: 0,
                    local_address: addr,
                    target,
                })
            }
            Some(r) => {
                let (channel, profile) = r?;
                let start = self
                    .config
                    .channel_ranges
                    .iter()
                    .find(|r| r.channel == channel && (r.start..r.end).contains(&addr))
                    .map(|r| r.start)
                    .unwrap_or(0);
                let local = addr - start;
                let mut target = decode_address(local, &self.channel_geometry, self.mapping)?;
                target.channel = channel;
                Ok(Route {
                    channel,
                    profile,
                    local_address: local,
                    target,
                })
            }
        }
    }

    /// Reads back the stored block at `addr` (payload simulation only).
    pub fn peek_block(&self, addr: u64) -> Option<Vec<u8>> {
        let r = self.route(addr).ok()?;
        let mut t = r.target;
        t.channel = 0;
        self.controllers[r.channel as usize]
            .store
            .as_ref()
            .map(|s| s.read_block(&t))
    }

    pub fn can_accept(&self, req: &MemoryRequest) -> Result<bool, ControllerError> {
        let r = self.route(req.address)?;
        Ok(self.controllers[r.channel as usize].can_accept(req.op))
    }

    /// Offers `req` to its channel at the current cycle.
    pub fn enqueue(&mut self, req: &MemoryRequest) -> Result<Admission, ControllerError> {
        req.validate(self.geometry.block_size_bytes as usize)?;
        let route = self.route(req.address)?;
        let ch = route.channel;
        let mut target = route.target;
        target.channel = 0;

        let mut clone_dst = None;
        if req.op == Op::RowClone {
            let dst_route = self.route(req.address2.expect("validated"))?;
            let profile = *self.profile(ch);
            let mut dst = dst_route.target;
            dst.channel = 0;
            let legal = dst_route.channel == ch
                && (profile.kind == MemoryKind::Nvm || self.config.allow_dram_rowclone)
                && rowclone_fpm(&target, &dst, &profile).is_ok();
            if !legal {
                self.controllers[ch as usize].stats.dropped_rowclones += 1;
                return Ok(Admission::Dropped { channel: ch });
            }
            clone_dst = Some(dst);
        }

        let id = self.next_id;
        let data = match req.op {
            Op::Write => Some(req.payload(self.geometry.block_size_bytes as usize).into_owned()),
            _ => None,
        };
        self.controllers[ch as usize].enqueue(id, req.op, target, clone_dst, data, self.now)?;
        self.next_id += 1;
        Ok(Admission::Queued { id, channel: ch })
    }

    /// Retires, schedules and issues for the current cycle, then advances
    /// the clock by one.
    pub fn tick(&mut self) -> Result<Vec<ChannelCommand>, ControllerError> {
        let mut issued = Vec::new();
        for c in &mut self.controllers {
            c.tick(self.now, &mut issued)?;
        }
        if !self.command_log {
            for c in &mut self.controllers {
                c.state.take_log();
            }
        }
        self.now += 1;
        Ok(issued)
    }

    pub fn is_idle(&self) -> bool {
        self.controllers.iter().all(ChannelController::is_idle)
    }

    pub fn stats(&self) -> ControllerStats {
        let per_channel: Vec<ChannelStats> = self.controllers.iter().map(|c| c.stats).collect();
        let mut global = ChannelStats::default();
        for s in &per_channel {
            global.accumulate(s);
        }
        ControllerStats {
            global,
            per_channel,
            cycles: self.now,
        }
    }

    /// Feeds `requests` in order, each no earlier than its arrival cycle,
    /// and runs until all retire or `max_cycles` elapse. Admission is in
    /// order: a full queue stalls the rest of the trace. Every admitted
    /// request is shown to `writer` once.
    pub fn run_trace<'a, I>(
        &mut self,
        requests: I,
        max_cycles: u64,
        mut writer: Option<&mut (dyn TraceWriter + 'a)>,
    ) -> Result<RunOutcome, ControllerError>
    where
        I: IntoIterator<Item = MemoryRequest>,
    {
        let mut pending = requests.into_iter().peekable();
        loop {
            while let Some(req) = pending.peek() {
                if req.arrival_cycle > self.now {
                    break;
                }
                if !self.can_accept(req)? {
                    break;
                }
                let req = pending.next().unwrap();
                self.enqueue(&req)?;
                if let Some(w) = writer.as_deref_mut() {
                    let handled = w.on_access(&req)?;
                    debug_assert!(handled);
                }
            }
            if pending.peek().is_none() && self.is_idle() {
                break;
            }
            if self.now >= max_cycles {
                return Ok(RunOutcome {
                    stats: self.stats(),
                    completed: false,
                });
            }
            if self.is_idle() {
                // Nothing in flight: jump to the next arrival.
                if let Some(next) = pending.peek() {
                    if next.arrival_cycle > self.now {
                        self.now = next.arrival_cycle.min(max_cycles);
                        continue;
                    }
                }
            }
            self.tick()?;
        }
        if let Some(w) = writer {
            w.finalize()?;
        }
        Ok(RunOutcome {
            stats: self.stats(),
            completed: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn geom() -> Geometry {
        Geometry {
            channels: 1,
            ranks_per_channel: 1,
            banks_per_rank: 4,
            subarrays_per_bank: 4,
            rows_per_subarray: 64,
            columns_per_row: 512,
            device_width_bits: 64,
            burst_length: 8,
            block_size_bytes: 64,
        }
    }

    fn system(policy: Policy) -> MemorySystem {
        MemorySystem::new(geom(), vec![TimingProfile::pcm_default()], ControllerConfig::new(policy, 16, 16)).unwrap()
    }

    /// Address of `block` in `row` of `bank` for [`geom`].
    fn addr(bank: u64, row: u64, block: u64) -> u64 {
        ((row * 4 + bank) * 64 + block) * 64
    }

    #[test]
    fn hybrid_routing() {
        const GIB: u64 = 1 << 30;
        let mut cfg = ControllerConfig::new(Policy::FrFcfs, 8, 8);
        cfg.channel_ranges = vec![
            ChannelRange { start: 0, end: 2 * GIB, channel: 0, profile: 0 },
            ChannelRange { start: 2 * GIB, end: 6 * GIB, channel: 1, profile: 1 },
        ];
        assert_eq!(cfg.route(0).unwrap(), Ok((0, 0)));
        assert_eq!(cfg.route(2 * GIB).unwrap(), Ok((1, 1)));
        assert_eq!(cfg.route(6 * GIB).unwrap(), Err(ControllerError::UnmappedAddress(6 * GIB)));
        cfg.validate(2).unwrap();
    }

    #[test]
    fn overlapping_ranges_rejected() {
        let mut cfg = ControllerConfig::new(Policy::FrFcfs, 8, 8);
        cfg.channel_ranges = vec![
            ChannelRange { start: 0, end: 100, channel: 0, profile: 0 },
            ChannelRange { start: 50, end: 200, channel: 1, profile: 0 },
        ];
        assert!(cfg.validate(1).is_err());
    }

    #[test]
    fn default_watermarks() {
        assert_eq!(ControllerConfig::default_watermarks(10), (8, 2));
        assert_eq!(ControllerConfig::default_watermarks(1), (1, 0));
    }

    #[test]
    fn enqueue_stamps_arrival_and_fills_write_queue() {
        let mut s = system(Policy::FrFcfsWqf);
        s.now = 5;
        for i in 0..16 {
            s.enqueue(&MemoryRequest::write(0, addr(0, 1, i), None)).unwrap();
        }
        assert_eq!(
            s.enqueue(&MemoryRequest::write(0, addr(0, 1, 20), None)),
            Err(ControllerError::QueueFull)
        );
        assert!(s.enqueue(&MemoryRequest::read(0, 0)).is_ok());
        assert!(s.controllers[0].write_q.iter().all(|p| p.arrival == 5));
    }

    #[test]
    fn empty_system_issues_nothing() {
        let mut s = system(Policy::FrFcfs);
        assert!(s.tick().unwrap().is_empty());
    }

    #[test]
    fn idle_read_retires_after_read_cycle() {
        for policy in [Policy::Fcfs, Policy::FrFcfs, Policy::FrFcfsWqf] {
            let mut s = system(policy);
            let out = s.run_trace(vec![MemoryRequest::read(100, addr(1, 3, 0))], 10_000, None).unwrap();
            assert!(out.completed);
            let p = TimingProfile::pcm_default();
            let expected = crate::memory::read_cycle_cycles(&p) as f64;
            assert_eq!(out.stats.global.average_total_latency(), expected);
            assert_eq!(out.stats.global.average_latency(), expected);
        }
    }

    #[test]
    fn frfcfs_prefers_open_row() {
        let mut s = system(Policy::FrFcfs);
        s.enqueue(&MemoryRequest::read(0, addr(0, 1, 0))).unwrap();
        // open row 1 of bank 0, then queue a miss ahead of a hit
        while s.controllers[0].state.open_row(0, 0).is_none() {
            s.tick().unwrap();
        }
        s.controllers[0].read_q.clear();
        s.enqueue(&MemoryRequest::read(0, addr(0, 2, 0))).unwrap();
        s.enqueue(&MemoryRequest::read(0, addr(0, 1, 5))).unwrap();
        let now = s.now + 100;
        let d = s.controllers[0].pick_next(now).unwrap();
        assert_eq!(d.index, 1);
        assert_eq!(d.command, Command::Read);
    }

    #[test]
    fn fcfs_serves_head_only_and_counts_no_row_buffer_events() {
        let mut s = system(Policy::Fcfs);
        let reqs: Vec<_> = (0..40).map(|i| MemoryRequest::read(i, addr(i % 2, 1, i))).collect();
        let out = s.run_trace(reqs, 1_000_000, None).unwrap();
        assert_eq!(out.stats.global.rb_hits, 0);
        assert_eq!(out.stats.global.rb_miss, 0);
        assert_eq!(out.stats.global.reads, 40);
    }

    #[test]
    fn fcfs_completes_same_bank_in_arrival_order() {
        let mut s = system(Policy::Fcfs);
        s.enable_logging();
        let reqs: Vec<_> = (0..30)
            .map(|i| MemoryRequest::read(i, addr(2, (i * 7) % 13 + 1, i % 64)))
            .collect();
        s.run_trace(reqs, 1_000_000, None).unwrap();
        let log = s.completion_log();
        let ids: Vec<u64> = log.iter().map(|c| c.id).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
    }

    /// Step-through of the drain automaton: 8 writes reach the high
    /// watermark, only writes issue until occupancy falls to 2.
    #[test]
    fn wqf_drains_between_watermarks() {
        let mut cfg = ControllerConfig::new(Policy::FrFcfsWqf, 16, 10);
        cfg.wq_high_watermark = 8;
        cfg.wq_low_watermark = 2;
        let mut s = MemorySystem::new(geom(), vec![TimingProfile::pcm_default()], cfg).unwrap();
        s.enqueue(&MemoryRequest::read(0, addr(3, 9, 0))).unwrap();
        for i in 0..7 {
            s.enqueue(&MemoryRequest::write(0, addr(0, 1, i), None)).unwrap();
        }
        s.tick().unwrap();
        assert!(!s.controllers[0].is_draining());
        assert_eq!(s.controllers[0].read_q[0].first_issue, Some(0));

        s.enqueue(&MemoryRequest::write(0, addr(0, 1, 7), None)).unwrap();
        s.enqueue(&MemoryRequest::read(0, addr(1, 9, 0))).unwrap();
        let mut saw_drain = false;
        let mut read_while_draining = false;
        for _ in 0..2000 {
            let was = s.controllers[0].is_draining();
            let before = s.controllers[0].read_q.iter().filter(|p| p.first_issue.is_some()).count();
            s.tick().unwrap();
            let c = &s.controllers[0];
            let after = c.read_q.iter().filter(|p| p.first_issue.is_some()).count();
            if c.is_draining() {
                saw_drain = true;
                assert!(c.write_q.len() > 2);
            }
            if was && c.is_draining() && after > before {
                read_while_draining = true;
            }
            if s.is_idle() {
                break;
            }
        }
        assert!(saw_drain);
        assert!(!read_while_draining);
        assert!(s.is_idle());
        assert_eq!(s.stats().global.writes, 8);
        assert_eq!(s.stats().global.reads, 2);
    }

    #[test]
    fn latency_definitions() {
        let st = ChannelStats {
            reads: 1,
            latency_sum: 36 - 10,
            total_latency_sum: 36,
            ..ChannelStats::default()
        };
        assert_eq!(st.average_latency(), 26.0);
        assert_eq!(st.average_total_latency(), 36.0);
    }

    #[test]
    fn rowclone_copies_payload() {
        let mut s = system(Policy::FrFcfs);
        s.enable_payload();
        let src = addr(1, 5, 0);
        let dst = addr(1, 9, 0);
        let mut reqs: Vec<_> = (0..64)
            .map(|b| MemoryRequest::write(b, addr(1, 5, b), Some(vec![b as u8 ^ 0x5A; 64])))
            .collect();
        reqs.push(MemoryRequest::rowclone(100, src, dst));
        let out = s.run_trace(reqs, 100_000, None).unwrap();
        assert_eq!(out.stats.global.rowclones, 1);
        for b in 0..64 {
            assert_eq!(s.peek_block(addr(1, 9, b)).unwrap(), vec![b as u8 ^ 0x5A; 64]);
        }
    }

    #[test]
    fn cross_subarray_rowclone_is_dropped() {
        let mut s = system(Policy::FrFcfs);
        let out = s
            .run_trace(vec![MemoryRequest::rowclone(0, addr(0, 1, 0), addr(0, 65, 0))], 1000, None)
            .unwrap();
        assert_eq!(out.stats.global.rowclones, 0);
        assert_eq!(out.stats.global.dropped_rowclones, 1);
    }

    #[test]
    fn dram_rowclone_needs_opt_in() {
        let mut cfg = ControllerConfig::new(Policy::FrFcfs, 8, 8);
        let rc = MemoryRequest::rowclone(0, addr(0, 1, 0), addr(0, 2, 0));
        let mut s = MemorySystem::new(geom(), vec![TimingProfile::dram_default()], cfg.clone()).unwrap();
        assert_eq!(s.enqueue(&rc).unwrap(), Admission::Dropped { channel: 0 });
        cfg.allow_dram_rowclone = true;
        let mut s = MemorySystem::new(geom(), vec![TimingProfile::dram_default()], cfg).unwrap();
        assert!(matches!(s.enqueue(&rc).unwrap(), Admission::Queued { .. }));
    }

    #[test]
    fn max_cycles_reports_partial_run() {
        let mut s = system(Policy::Fcfs);
        let reqs: Vec<_> = (0..100).map(|i| MemoryRequest::read(0, addr(0, i % 7 + 1, 0))).collect();
        let out = s.run_trace(reqs, 200, None).unwrap();
        assert!(!out.completed);
        assert!(out.stats.global.reads < 100);
    }

    #[test]
    fn per_channel_stats_sum_to_global() {
        let g = Geometry { channels: 2, ..geom() };
        let mut s = MemorySystem::new(g, vec![TimingProfile::pcm_default()], ControllerConfig::new(Policy::FrFcfs, 8, 8)).unwrap();
        let reqs: Vec<_> = (0..200u64)
            .map(|i| {
                let a = (i * 0x9E37_79B9) % g.capacity() / 64 * 64;
                if i % 3 == 0 {
                    MemoryRequest::write(i, a, None)
                } else {
                    MemoryRequest::read(i, a)
                }
            })
            .collect();
        let out = s.run_trace(reqs, 1_000_000, None).unwrap();
        let st = out.stats;
        assert_eq!(st.per_channel.len(), 2);
        let reads: u64 = st.per_channel.iter().map(|c| c.reads).sum();
        let hits: u64 = st.per_channel.iter().map(|c| c.rb_hits).sum();
        assert_eq!(reads, st.global.reads);
        assert_eq!(hits, st.global.rb_hits);
        assert_eq!(st.global.completions(), 200);
        assert!(st.global.average_total_latency() >= st.global.average_latency());
    }
}
