//! Bundled assets must equal their generators' output. Set
//! `NVMSIM_BLESS=1` to rewrite them.

use std::path::PathBuf;

use nvmsim::{assets, driver, load_config};

fn asset_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets")
}

#[test]
fn generated_assets_are_frozen() {
    let bless = std::env::var_os("NVMSIM_BLESS").is_some();
    for (name, text) in assets::generated() {
        let path = asset_dir().join(name);
        if bless {
            std::fs::write(&path, &text).unwrap();
        }
        let on_disk = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(on_disk == text, "{name} differs from its generator; rerun with NVMSIM_BLESS=1");
    }
}

#[test]
fn bundled_configs_load() {
    let pcm = load_config(&asset_dir().join("pcm_default.config")).unwrap();
    assert_eq!(pcm.profiles.len(), 1);
    assert_eq!(pcm.profiles[0].kind, nvmsim_core::memory::MemoryKind::Nvm);
    assert_eq!(pcm.controller.policy, nvmsim_core::controller::Policy::FrFcfs);
    assert_eq!(pcm.geometry, assets::default_geometry());
    let dram = load_config(&asset_dir().join("dram_default.config")).unwrap();
    assert_eq!(dram.profiles[0].kind, nvmsim_core::memory::MemoryKind::Dram);
    let hybrid = load_config(&asset_dir().join("hybrid.config")).unwrap();
    assert_eq!(hybrid.profiles.len(), 2);
}

#[test]
fn bundled_traces_parse_and_finish() {
    let cfg = load_config(&asset_dir().join("pcm_default.config")).unwrap();
    for name in ["row_local.nvt", "random.nvt", "rowclone.nvt"] {
        let run = driver::run_trace_file(&cfg, &asset_dir().join(name), cfg.max_cycles).unwrap();
        assert!(run.completed, "{name}");
    }
    let rc = driver::run_trace_file(&cfg, &asset_dir().join("rowclone.nvt"), cfg.max_cycles).unwrap();
    assert_eq!(rc.stats.global.rowclones, 2);
    assert_eq!(rc.stats.global.dropped_rowclones, 0);
}

#[test]
fn hybrid_trace_routes_by_range() {
    let cfg = load_config(&asset_dir().join("hybrid.config")).unwrap();
    let reqs = vec![
        nvmsim_core::trace::MemoryRequest::read(0, 0x40),
        nvmsim_core::trace::MemoryRequest::read(0, 0x1000_0040),
        nvmsim_core::trace::MemoryRequest::read(0, 0x1800_0000),
    ];
    let run = driver::run_trace(&cfg, &reqs, 1_000_000).unwrap();
    assert_eq!(run.stats.per_channel[0].reads, 1);
    assert_eq!(run.stats.per_channel[1].reads, 2);
}
