use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::{MemoryError, MemoryKind, TimingProfile};
use crate::wear::{EnergyEvent, EnergySource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CommandKind {
    Activate,
    Read,
    Write,
    Precharge,
    RowClone,
}

impl fmt::Display for CommandKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CommandKind::Activate => "ACT",
            CommandKind::Read => "READ",
            CommandKind::Write => "WRITE",
            CommandKind::Precharge => "PRE",
            CommandKind::RowClone => "RC",
        })
    }
}

/// A device command addressed to one bank. Rows are bank-relative
/// (`subarray * rows_per_subarray + row`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Activate { row: u32 },
    Read,
    Write,
    Precharge,
    /// FPM clone: `ACT(src)`, `ACT(dst)`, `PRE` as one compound command. The
    /// bank is closed again once it completes.
    RowClone { src: u32, dst: u32, zeroing: bool },
}

impl Command {
    pub fn kind(&self) -> CommandKind {
        match self {
            Command::Activate { .. } => CommandKind::Activate,
            Command::Read => CommandKind::Read,
            Command::Write => CommandKind::Write,
            Command::Precharge => CommandKind::Precharge,
            Command::RowClone { .. } => CommandKind::RowClone,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IssuedCommand {
    pub cycle: u64,
    pub rank: u32,
    pub bank: u32,
    pub command: Command,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BankState {
    pub open_row: Option<u32>,
    pub busy_until: u64,
    pub last_activate: Option<u64>,
    pub last_precharge: Option<u64>,
    /// End of the last data burst to or from this bank.
    pub last_column_end: Option<u64>,
    pub last_write_end: Option<u64>,
    /// Set while a RowClone holds the bank.
    pub clone_done: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RankState {
    pub banks: Vec<BankState>,
    /// Last four activations, oldest first.
    pub activate_history: Vec<u64>,
    pub last_write_end: Option<u64>,
}

impl RankState {
    fn push_activate(&mut self, cycle: u64) {
        if self.activate_history.len() == 4 {
            self.activate_history.remove(0);
        }
        self.activate_history.push(cycle);
    }

    pub fn last_activate(&self) -> Option<u64> {
        self.activate_history.last().copied()
    }
}

/// Command state of one channel: its ranks, their banks and the shared data
/// bus. Every constraint is enforced here; callers ask [`earliest_issue`]
/// and then [`issue`].
///
/// [`earliest_issue`]: ChannelState::earliest_issue
/// [`issue`]: ChannelState::issue
#[derive(Debug, Clone)]
pub struct ChannelState {
    pub profile: TimingProfile,
    pub ranks: Vec<RankState>,
    pub last_column_issue: Option<u64>,
    log: Option<Vec<IssuedCommand>>,
}

fn after(t: Option<u64>, gap: u64) -> u64 {
    t.map_or(0, |t| t + gap)
}

impl ChannelState {
    pub fn new(profile: TimingProfile, ranks: u32, banks_per_rank: u32) -> Self {
        let rank = RankState {
            banks: vec![BankState::default(); banks_per_rank as usize],
            activate_history: Vec::with_capacity(4),
            last_write_end: None,
        };
        Self {
            profile,
            ranks: vec![rank; ranks as usize],
            last_column_issue: None,
            log: None,
        }
    }

    /// Starts recording every issued command.
    pub fn enable_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn log(&self) -> &[IssuedCommand] {
        self.log.as_deref().unwrap_or(&[])
    }

    pub fn take_log(&mut self) -> Vec<IssuedCommand> {
        self.log.as_mut().map(core::mem::take).unwrap_or_default()
    }

    pub fn bank(&self, rank: u32, bank: u32) -> &BankState {
        &self.ranks[rank as usize].banks[bank as usize]
    }

    pub fn open_row(&self, rank: u32, bank: u32) -> Option<u32> {
        self.bank(rank, bank).open_row
    }

    fn activation_bound(&self, rank: &RankState, bank: &BankState) -> u64 {
        let p = &self.profile;
        let mut t = after(bank.last_precharge, p.t_rp)
            .max(after(bank.last_activate, p.t_rc))
            .max(bank.clone_done)
            .max(after(rank.last_activate(), p.t_rrd));
        if rank.activate_history.len() == 4 {
            t = t.max(rank.activate_history[0] + p.t_faw);
        }
        if p.kind == MemoryKind::Nvm {
            t = t.max(after(rank.last_write_end, p.t_wad));
        }
        t
    }

    /// Smallest cycle `>= now` at which `cmd` satisfies every timing rule.
    pub fn earliest_issue(&self, rank: u32, bank: u32, cmd: Command, now: u64) -> Result<u64, MemoryError> {
        let p = &self.profile;
        let r = &self.ranks[rank as usize];
        let b = &r.banks[bank as usize];
        let illegal = |reason| MemoryError::IllegalCommandForState {
            command: cmd.kind(),
            reason,
        };
        let t = match cmd {
            Command::Activate { .. } | Command::RowClone { .. } => {
                if b.open_row.is_some() {
                    return Err(illegal("bank has an open row"));
                }
                self.activation_bound(r, b)
            }
            Command::Read | Command::Write => {
                if b.open_row.is_none() {
                    return Err(illegal("no open row"));
                }
                let mut t = after(b.last_activate, p.t_rcd).max(after(self.last_column_issue, p.t_burst));
                if cmd == Command::Write && p.kind == MemoryKind::Nvm {
                    t = t
                        .max(after(r.last_write_end, p.t_wwd))
                        .max(after(r.last_activate(), p.t_awd));
                }
                t
            }
            Command::Precharge => {
                if b.open_row.is_none() {
                    return Err(illegal("no open row"));
                }
                after(b.last_activate, p.t_ras).max(b.last_column_end.unwrap_or(0))
            }
        };
        Ok(t.max(now))
    }

    /// Applies `cmd` at `cycle`. Issuing earlier than [`earliest_issue`]
    /// is a simulator bug and reported as a timing violation.
    ///
    /// [`earliest_issue`]: ChannelState::earliest_issue
    pub fn issue(&mut self, rank: u32, bank: u32, cmd: Command, cycle: u64) -> Result<Option<EnergyEvent>, MemoryError> {
        let earliest = self.earliest_issue(rank, bank, cmd, cycle)?;
        if earliest > cycle {
            return Err(MemoryError::TimingViolation {
                command: cmd.kind(),
                cycle,
                earliest,
            });
        }
        let p = self.profile;
        let r = &mut self.ranks[rank as usize];
        let event = match cmd {
            Command::Activate { row } => {
                let b = &mut r.banks[bank as usize];
                b.open_row = Some(row);
                b.last_activate = Some(cycle);
                r.push_activate(cycle);
                Some(EnergyEvent::new(EnergySource::MemoryCommand, p.e_act))
            }
            Command::Read | Command::Write => {
                let end = cycle + p.t_burst;
                let b = &mut r.banks[bank as usize];
                b.last_column_end = Some(end);
                b.busy_until = b.busy_until.max(end);
                self.last_column_issue = Some(cycle);
                if cmd == Command::Write {
                    b.last_write_end = Some(end);
                    r.last_write_end = Some(end);
                    Some(EnergyEvent::new(EnergySource::MemoryCommand, p.e_write_burst))
                } else {
                    Some(EnergyEvent::new(EnergySource::MemoryCommand, p.e_read_burst))
                }
            }
            Command::Precharge => {
                let b = &mut r.banks[bank as usize];
                b.open_row = None;
                b.last_precharge = Some(cycle);
                b.busy_until = b.busy_until.max(cycle + p.t_rp);
                None
            }
            Command::RowClone { zeroing, .. } => {
                let done = cycle + p.rowclone_cycles();
                let b = &mut r.banks[bank as usize];
                b.last_activate = Some(cycle);
                b.last_precharge = Some(cycle + 2 * p.t_rcd);
                b.clone_done = done;
                b.busy_until = b.busy_until.max(done);
                r.push_activate(cycle);
                let e = if zeroing { p.e_rowclone_zero } else { p.e_rowclone };
                Some(EnergyEvent::new(EnergySource::RowClone, e))
            }
        };
        if let Some(log) = &mut self.log {
            log.push(IssuedCommand {
                cycle,
                rank,
                bank,
                command: cmd,
            });
        }
        Ok(event)
    }
}
