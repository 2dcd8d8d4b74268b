#[path = "support/fuzz.rs"]
mod fuzz;
#[path = "support/replay.rs"]
mod replay;

use nvmsim_core::controller::{ControllerConfig, MemorySystem, Policy};
use nvmsim_core::memory::{Command, IssuedCommand, TimingProfile};

fn run(policy: Policy, profile: TimingProfile, seed: u64, len: usize) -> MemorySystem {
    let g = fuzz::fuzz_geometry();
    let mut cfg = ControllerConfig::new(policy, 8, 8);
    cfg.allow_dram_rowclone = true;
    let mut sys = MemorySystem::new(g, vec![profile], cfg).unwrap();
    sys.enable_logging();
    let out = sys.run_trace(fuzz::fuzz_trace(seed, len, &g), 10_000_000, None).unwrap();
    assert!(out.completed);
    sys
}

#[test]
fn fuzzed_schedules_obey_every_rule() {
    for seed in 0..12 {
        for profile in [TimingProfile::pcm_default(), TimingProfile::dram_default()] {
            for policy in [Policy::Fcfs, Policy::FrFcfs, Policy::FrFcfsWqf] {
                let sys = run(policy, profile, seed, 250);
                for ch in 0..2 {
                    let v = replay::check_channel(sys.command_log(ch), &profile);
                    assert!(v.is_empty(), "seed {seed} {policy:?} {:?}: {:?}", profile.kind, &v[..v.len().min(3)]);
                }
            }
        }
    }
}

#[test]
fn replayer_flags_shifted_commands() {
    let profile = TimingProfile::pcm_default();
    let sys = run(Policy::FrFcfs, profile, 7, 200);
    let log = sys.command_log(0).to_vec();
    assert!(replay::check_channel(&log, &profile).is_empty());
    let mut caught = 0;
    let mut tried = 0;
    for (i, c) in log.iter().enumerate() {
        if c.cycle == 0 || matches!(c.command, Command::Precharge) {
            continue;
        }
        let mut shifted: Vec<IssuedCommand> = log.clone();
        shifted[i].cycle -= 1;
        let v = replay::check_channel(&shifted, &profile);
        tried += 1;
        if !v.is_empty() {
            caught += 1;
        }
        if tried == 60 {
            break;
        }
    }
    assert!(caught > 0, "no shifted command was flagged out of {tried}");
}

#[test]
fn replayer_checks_each_rule() {
    use replay::Rule;
    let p = TimingProfile::pcm_default();
    let c = |cycle, bank, command| IssuedCommand { cycle, rank: 0, bank, command };
    let act = |row| Command::Activate { row };
    let rules = |log: &[IssuedCommand]| replay::check_channel(log, &p).into_iter().map(|v| v.rule).collect::<Vec<_>>();

    assert_eq!(rules(&[c(0, 0, act(1)), c(21, 0, Command::Read)]), [Rule::Trcd]);
    assert_eq!(rules(&[c(0, 0, act(1)), c(21, 0, Command::Precharge)]), [Rule::Tras]);
    assert_eq!(rules(&[c(0, 0, act(1)), c(22, 0, Command::Precharge), c(49, 0, act(2))]), [Rule::Trp, Rule::Trc]);
    assert_eq!(rules(&[c(0, 0, act(1)), c(4, 1, act(1))]), [Rule::Trrd]);
    assert_eq!(
        rules(&[c(0, 0, act(1)), c(5, 1, act(1)), c(10, 2, act(1)), c(15, 3, act(1)), c(20, 4, act(1))]),
        [Rule::Tfaw]
    );
    assert_eq!(
        rules(&[c(0, 0, act(1)), c(5, 1, act(1)), c(27, 0, Command::Read), c(30, 1, Command::Read)]),
        [Rule::Tburst]
    );
    assert_eq!(
        rules(&[c(0, 0, act(1)), c(5, 1, act(1)), c(27, 0, Command::Write), c(35, 1, Command::Write)]),
        [Rule::Twwd]
    );
    assert_eq!(rules(&[c(0, 0, act(1)), c(22, 0, Command::Write), c(50, 1, act(1))]), [Rule::Twad]);
    assert_eq!(rules(&[c(0, 0, act(1)), c(22, 1, act(1)), c(23, 0, Command::Write)]), [Rule::Tawd]);
    assert_eq!(rules(&[c(0, 0, Command::Read)]), [Rule::State]);
}
