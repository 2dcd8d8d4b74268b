//! Simulation drivers behind the CLI subcommands.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nvmsim_core::cache::{sweep_point, HybridCache, HybridCacheConfig, HybridStats, SweepPoint, SWEEP_CSV_HEADER};
use nvmsim_core::cim::{parse_program, CimState, HostOutput, Opcode, ParseProgramError, ProgramError};
use nvmsim_core::controller::{ControllerError, ControllerStats, MemorySystem};
use nvmsim_core::memory::MemoryError;
use nvmsim_core::trace::{
    build_writer, parse_trace_line, is_skippable, BitFlipWriter, LineSink, MemoryRequest, Op, SinkUnavailable, TraceError,
    TraceWriter, WriterKind,
};
use nvmsim_core::wear::EnergyLedger;

use crate::config::{ConfigError, SimConfig};
use crate::report::{self, Report};

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}:{line}: {error}")]
    Trace {
        path: PathBuf,
        line: usize,
        error: TraceError,
    },
    #[error("{path}: {error}")]
    Program {
        path: PathBuf,
        error: ParseProgramError,
    },
    #[error(transparent)]
    Cim(#[from] ProgramError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Sink(#[from] SinkUnavailable),
    #[error("{0}")]
    Usage(String),
}

impl DriverError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            DriverError::Config(_) => 2,
            DriverError::Trace { .. } | DriverError::Program { .. } => 3,
            DriverError::Controller(ControllerError::Memory(MemoryError::TimingViolation { .. })) => 5,
            DriverError::Controller(ControllerError::Trace(_)) => 3,
            _ => 1,
        }
    }
}

pub const EXIT_MAX_CYCLES: i32 = 4;

/// Buffered line sink over a file.
pub struct FileSink {
    path: PathBuf,
    out: BufWriter<File>,
}

impl FileSink {
    pub fn create(path: &Path) -> Result<Self, DriverError> {
        let file = File::create(path).map_err(|source| DriverError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }
}

impl LineSink for FileSink {
    fn write_line(&mut self, line: &str) -> Result<(), SinkUnavailable> {
        writeln!(self.out, "{line}").map_err(|e| SinkUnavailable(format!("{}: {e}", self.path.display())))
    }

    fn flush(&mut self) -> Result<(), SinkUnavailable> {
        self.out.flush().map_err(|e| SinkUnavailable(format!("{}: {e}", self.path.display())))
    }
}

fn read_file(path: &Path) -> Result<String, DriverError> {
    std::fs::read_to_string(path).map_err(|source| DriverError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn parse_trace_text(text: &str, path: &Path, block_size: usize) -> Result<Vec<MemoryRequest>, DriverError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if is_skippable(line) {
            continue;
        }
        let req = parse_trace_line(line, block_size).map_err(|error| DriverError::Trace {
            path: path.to_path_buf(),
            line: i + 1,
            error,
        })?;
        out.push(req);
    }
    Ok(out)
}

pub fn read_trace(path: &Path, block_size: usize) -> Result<Vec<MemoryRequest>, DriverError> {
    parse_trace_text(&read_file(path)?, path, block_size)
}

/// Result of a memory-system run.
#[derive(Debug, Clone)]
pub struct TraceRun {
    pub completed: bool,
    pub stats: ControllerStats,
    pub cache: Option<HybridStats>,
    pub energy: EnergyLedger,
    pub report: Report,
}

/// Passes reads and writes through the cache and returns the resulting
/// memory traffic: one fill read per miss and one write per dirty victim.
fn cache_front_end(cfg: HybridCacheConfig, requests: &[MemoryRequest], block: u64) -> (Vec<MemoryRequest>, HybridCache) {
    let mut cache = HybridCache::new(cfg).expect("validated at load");
    let mut out = Vec::new();
    let blocks = (cfg.block_bytes as u64 / block).max(1);
    for r in requests {
        if r.op == Op::RowClone {
            out.push(r.clone());
            continue;
        }
        let o = cache.access(r.address, r.op == Op::Write, r.arrival_cycle);
        if let Some(victim) = o.writeback {
            for b in 0..blocks {
                out.push(MemoryRequest::write(r.arrival_cycle, victim + b * block, None));
            }
        }
        if !o.hit {
            let base = r.address / cfg.block_bytes as u64 * cfg.block_bytes as u64;
            for b in 0..blocks {
                out.push(MemoryRequest { thread_id: r.thread_id, ..MemoryRequest::read(r.arrival_cycle, base + b * block) });
            }
        }
    }
    (out, cache)
}

fn make_writer(cfg: &SimConfig) -> Result<Option<Box<dyn TraceWriter>>, DriverError> {
    if !cfg.writer.enabled {
        return Ok(None);
    }
    let path = cfg.writer.file.as_deref().ok_or_else(|| DriverError::Usage("PrintPreTrace needs PreTraceFile".into()))?;
    let sink = FileSink::create(path)?;
    let block = cfg.geometry.block_size_bytes as usize;
    Ok(Some(match cfg.writer.kind {
        WriterKind::BitFlip => {
            let mut w = BitFlipWriter::new(sink, block).expect("block size validated");
            w.tracker_mut().read_wear = cfg.read_wear;
            Box::new(w)
        }
        kind => build_writer(kind, sink, block).expect("block size validated"),
    }))
}

pub fn run_trace(cfg: &SimConfig, requests: &[MemoryRequest], max_cycles: u64) -> Result<TraceRun, DriverError> {
    let block = cfg.geometry.block_size_bytes as u64;
    let (memory_requests, cache) = match cfg.cache {
        Some(c) => {
            let (reqs, cache) = cache_front_end(c, requests, block);
            (reqs, Some(cache))
        }
        None => (requests.to_vec(), None),
    };
    let mut sys = MemorySystem::new(cfg.geometry, cfg.profiles.clone(), cfg.controller.clone())?;
    if cfg.payload_simulation {
        sys.enable_payload();
    }
    let mut writer = make_writer(cfg)?;
    let outcome = sys.run_trace(memory_requests, max_cycles, writer.as_deref_mut())?;
    if let Some(w) = writer.as_deref_mut() {
        // a run cut short still flushes what the writer has seen
        w.finalize()?;
    }

    let mut energy = outcome.stats.global.energy;
    let mut r = Report::new();
    r.text("policy", cfg.controller.policy.name());
    r.int("completed", outcome.completed as u64);
    report::controller_stats(&mut r, &outcome.stats);
    let cache_stats = cache.map(|c| {
        report::cache_stats(&mut r, c.stats());
        energy.merge(c.energy());
        *c.stats()
    });
    report::energy(&mut r, "system.", &energy);
    Ok(TraceRun {
        completed: outcome.completed,
        stats: outcome.stats,
        cache: cache_stats,
        energy,
        report: r,
    })
}

pub fn run_trace_file(cfg: &SimConfig, trace: &Path, max_cycles: u64) -> Result<TraceRun, DriverError> {
    let reqs = read_trace(trace, cfg.geometry.block_size_bytes as usize)?;
    run_trace(cfg, &reqs, max_cycles)
}

fn cache_config(cfg: &SimConfig) -> HybridCacheConfig {
    cfg.cache.unwrap_or_default()
}

/// Runs only the hybrid cache over `requests`.
pub fn run_cache(cfg: &SimConfig, requests: &[MemoryRequest]) -> Result<Report, DriverError> {
    let c = cache_config(cfg);
    let point = sweep_point(requests, c, c.nv_block_ratio).map_err(|e| DriverError::Usage(e.to_string()))?;
    let mut r = Report::new();
    r.int("nvBlockRatio", c.nv_block_ratio as u64);
    report::cache_stats(&mut r, &point.stats);
    Ok(r)
}

/// One point per ratio, computed in parallel and returned in ratio order.
pub fn sweep(cfg: &SimConfig, requests: &[MemoryRequest], ratios: &[u32]) -> Result<Vec<SweepPoint>, DriverError> {
    let c = cache_config(cfg);
    if let Some(bad) = ratios.iter().find(|r| **r > 100) {
        return Err(DriverError::Usage(format!("ratio {bad} is outside 0..=100")));
    }
    let mut points = std::thread::scope(|s| {
        let handles: Vec<_> = ratios.iter().map(|&r| s.spawn(move || sweep_point(requests, c, r))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect::<Result<Vec<_>, _>>()
    })
    .map_err(|e| DriverError::Usage(e.to_string()))?;
    points.sort_by_key(|p| p.ratio);
    Ok(points)
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = format!("{SWEEP_CSV_HEADER}\n");
    for p in points {
        s.push_str(&p.csv_row());
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone)]
pub struct CimRun {
    pub outputs: Vec<HostOutput>,
    pub report: Report,
}

pub fn run_cim_text(cfg: &SimConfig, text: &str, path: &Path) -> Result<CimRun, DriverError> {
    let program = parse_program(text).map_err(|error| DriverError::Program {
        path: path.to_path_buf(),
        error,
    })?;
    let mut state = CimState::new(cfg.cim.row_size, cfg.cim.row_count);
    state.timing = cfg.cim.timing;
    let rep = state.run_program(&program)?;
    let mut r = Report::new();
    for op in Opcode::ALL {
        let n = state.stats.count(op);
        let cost = state.timing.get(op);
        r.int(format!("cim.{op}.count"), n);
        r.int(format!("cim.{op}.cycles"), n * cost.cycles);
        r.float(format!("cim.{op}.energy"), n as f64 * cost.energy_nj);
    }
    r.int("cim.totalCycles", rep.cycles);
    r.float("cim.totalEnergy", rep.energy_nj);
    Ok(CimRun {
        outputs: rep.outputs,
        report: r,
    })
}

pub fn run_cim_file(cfg: &SimConfig, program: &Path) -> Result<CimRun, DriverError> {
    run_cim_text(cfg, &read_file(program)?, program)
}

pub fn format_output(o: &HostOutput) -> String {
    match o {
        HostOutput::Row { row, data } => format!("r{row} {}", hex::encode(data)),
        HostOutput::Mac(counts) => {
            let c: Vec<String> = counts.iter().map(u32::to_string).collect();
            format!("mac {}", c.join(","))
        }
    }
}

pub fn write_output(path: Option<&Path>, text: &str) -> Result<(), DriverError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| DriverError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
