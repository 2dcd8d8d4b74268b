use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn asset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets").join(name)
}

fn nvmsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nvmsim")).args(args).output().expect("spawn nvmsim")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_trace_reports_stats() {
    let out = nvmsim(&["run-trace", "--trace", path(&asset("rowclone.nvt"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "rowclones 2"), "{text}");
    assert!(text.contains("averageTotalLatency "));
}

#[test]
fn cycle_limit_exits_with_partial_stats() {
    let out = nvmsim(&["run-trace", "--trace", path(&asset("row_local.nvt")), "--max-cycles", "100"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(!out.stdout.is_empty());
}

#[test]
fn bad_inputs_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.config");
    std::fs::write(&cfg, "NOT_A_KEY 3\n").unwrap();
    let trace = dir.path().join("bad.nvt");
    std::fs::write(&trace, "0 Q 0x40 0\n").unwrap();

    let out = nvmsim(&["run-trace", "--config", path(&cfg), "--trace", path(&asset("random.nvt"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = nvmsim(&["run-trace", "--trace", path(&trace)]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn run_cim_prints_result_row() {
    let out = nvmsim(&["run-cim", "--program", path(&asset("nand.cim")), "--format", "csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with('r')), "{text}");
    assert!(text.contains("cim.totalCycles"));
}

#[test]
fn sweep_ratio_emits_one_row_per_ratio() {
    let out = nvmsim(&["sweep-ratio", "--trace", path(&asset("cache_write_heavy.nvt")), "--ratios", "0,50,100"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "ratio,latency_cycles,dyn_energy_nJ");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("100,"));
}
