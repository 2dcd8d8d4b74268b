//! Brute-force timing checker. For each command it rescans every earlier
//! command on the channel instead of keeping incremental bank state, so it
//! shares no bookkeeping with the simulator it checks.

use nvmsim_core::memory::{Command, IssuedCommand, MemoryKind, TimingProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Trcd,
    Tras,
    Trp,
    Trc,
    Trrd,
    Tfaw,
    Tburst,
    Twwd,
    Twad,
    Tawd,
    State,
}

#[allow(dead_code)]
#[derive(Debug, Clone)]
pub struct Violation {
    pub rule: Rule,
    pub index: usize,
    pub command: IssuedCommand,
}

fn is_act(c: &Command) -> bool {
    matches!(c, Command::Activate { .. } | Command::RowClone { .. })
}

fn is_col(c: &Command) -> bool {
    matches!(c, Command::Read | Command::Write)
}

/// Cycles at which the bank was precharged, including the internal
/// precharge a RowClone performs after its two activations.
fn precharge_times(c: &IssuedCommand, p: &TimingProfile) -> Option<u64> {
    match c.command {
        Command::Precharge => Some(c.cycle),
        Command::RowClone { .. } => Some(c.cycle + 2 * p.t_rcd),
        _ => None,
    }
}

/// Checks one channel's command log. Commands are replayed in cycle order;
/// commands at equal cycles keep their logged order.
pub fn check_channel(log: &[IssuedCommand], p: &TimingProfile) -> Vec<Violation> {
    let mut cmds: Vec<IssuedCommand> = log.to_vec();
    cmds.sort_by_key(|c| c.cycle);
    let nvm = p.kind == MemoryKind::Nvm;
    let mut out = Vec::new();

    for (i, c) in cmds.iter().enumerate() {
        let t = c.cycle;
        let prior = &cmds[..i];
        let same_bank = |o: &&IssuedCommand| o.rank == c.rank && o.bank == c.bank;
        let same_rank = |o: &&IssuedCommand| o.rank == c.rank;
        let mut fail = |rule| out.push(Violation { rule, index: i, command: *c });

        let last_act = prior.iter().filter(same_bank).filter(|o| is_act(&o.command)).map(|o| o.cycle).max();
        let last_pre = prior.iter().filter(same_bank).filter_map(|o| precharge_times(o, p)).max();
        let open = prior.iter().filter(same_bank).fold(false, |open, o| match o.command {
            Command::Activate { .. } => true,
            Command::Precharge | Command::RowClone { .. } => false,
            _ => open,
        });

        match c.command {
            Command::Activate { .. } | Command::RowClone { .. } => {
                if open {
                    fail(Rule::State);
                }
                if last_pre.is_some_and(|pr| t < pr + p.t_rp) {
                    fail(Rule::Trp);
                }
                if last_act.is_some_and(|a| t < a + p.t_rc) {
                    fail(Rule::Trc);
                }
                if prior.iter().filter(same_rank).any(|o| is_act(&o.command) && t < o.cycle + p.t_rrd) {
                    fail(Rule::Trrd);
                }
                let window = prior
                    .iter()
                    .filter(same_rank)
                    .filter(|o| is_act(&o.command) && o.cycle + p.t_faw > t)
                    .count();
                if window + 1 > 4 {
                    fail(Rule::Tfaw);
                }
                if nvm
                    && prior
                        .iter()
                        .filter(same_rank)
                        .any(|o| o.command == Command::Write && t < o.cycle + p.t_burst + p.t_wad)
                {
                    fail(Rule::Twad);
                }
            }
            Command::Read | Command::Write => {
                if !open {
                    fail(Rule::State);
                }
                if last_act.is_some_and(|a| t < a + p.t_rcd) {
                    fail(Rule::Trcd);
                }
                if prior.iter().any(|o| is_col(&o.command) && t < o.cycle + p.t_burst) {
                    fail(Rule::Tburst);
                }
                if nvm && c.command == Command::Write {
                    if prior
                        .iter()
                        .filter(same_rank)
                        .any(|o| o.command == Command::Write && t < o.cycle + p.t_burst + p.t_wwd)
                    {
                        fail(Rule::Twwd);
                    }
                    if prior.iter().filter(same_rank).any(|o| is_act(&o.command) && t < o.cycle + p.t_awd) {
                        fail(Rule::Tawd);
                    }
                }
            }
            Command::Precharge => {
                if !open {
                    fail(Rule::State);
                }
                if last_act.is_some_and(|a| t < a + p.t_ras) {
                    fail(Rule::Tras);
                }
                if prior
                    .iter()
                    .filter(same_bank)
                    .any(|o| is_col(&o.command) && t < o.cycle + p.t_burst)
                {
                    fail(Rule::Tburst);
                }
            }
        }
    }
    out
}
