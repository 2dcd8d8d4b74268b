//! `KEY value` configuration files.
//!
//! One setting per line, `;` starts a comment. Timing keys before the first
//! `PROFILE <id>` line belong to profile 0. Unknown keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nvmsim_core::cache::HybridCacheConfig;
use nvmsim_core::cim::{OpCost, OpTiming, Opcode, DEFAULT_ROW_COUNT, DEFAULT_ROW_SIZE};
use nvmsim_core::controller::{ChannelRange, ControllerConfig, Policy};
use nvmsim_core::memory::{Geometry, MemoryKind, TimingProfile};
use nvmsim_core::trace::WriterKind;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceWriterConfig {
    pub enabled: bool,
    pub file: Option<PathBuf>,
    pub kind: WriterKind,
}

impl Default for TraceWriterConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            file: None,
            kind: WriterKind::Raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CimConfig {
    pub row_size: usize,
    pub row_count: usize,
    pub timing: OpTiming,
}

impl Default for CimConfig {
    fn default() -> Self {
        Self {
            row_size: DEFAULT_ROW_SIZE,
            row_count: DEFAULT_ROW_COUNT,
            timing: OpTiming::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub geometry: Geometry,
    /// Indexed by profile id.
    pub profiles: Vec<TimingProfile>,
    pub controller: ControllerConfig,
    pub cache: Option<HybridCacheConfig>,
    pub writer: TraceWriterConfig,
    pub cim: CimConfig,
    pub max_cycles: u64,
    pub payload_simulation: bool,
    pub read_wear: bool,
    pub rng_seed: u64,
}

impl FromStr for SimConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        Parser::default().parse(text)
    }
}

pub fn load_config(path: &Path) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg: SimConfig = text.parse()?;
    // relative output paths are taken from the config file's directory
    if let (Some(file), Some(dir)) = (&cfg.writer.file, path.parent()) {
        if file.is_relative() {
            cfg.writer.file = Some(dir.join(file));
        }
    }
    Ok(cfg)
}

/// Every key the parser accepts, in the order they are documented.
pub const KEYS: &[&str] = &[
    "CHANNELS", "RANKS", "BANKS", "SUBARRAYS", "ROWS", "COLS", "DEVICE_WIDTH", "BURST_LENGTH", "BLOCK_SIZE",
    "PROFILE", "MEM_TYPE", "tRCD", "tRAS", "tRP", "tRC", "tBURST", "tFAW", "tRRD", "tWWD", "tWAD", "tAWD",
    "CLK_PERIOD_NS", "E_ACT", "E_READ", "E_WRITE", "E_ROWCLONE", "E_ROWCLONE_ZERO",
    "CHANNEL_RANGE", "MEM_CTL", "READ_QUEUE", "WRITE_QUEUE", "WQ_HIGH", "WQ_LOW", "ALLOW_DRAM_ROWCLONE",
    "PrintPreTrace", "PreTraceFile", "PreTraceWriter",
    "MAX_CYCLES", "PAYLOAD_SIM", "READ_WEAR", "RNG_SEED",
    "CACHE_SIZE", "CACHE_ASSOC", "CACHE_BLOCK", "NV_BLOCK_RATIO", "CACHE_VOL_READ_LAT", "CACHE_VOL_WRITE_LAT",
    "CACHE_NV_READ_LAT", "CACHE_NV_WRITE_LAT", "CACHE_MISS_PENALTY", "CACHE_VOL_READ_E", "CACHE_VOL_WRITE_E",
    "CACHE_NV_READ_E", "CACHE_NV_WRITE_E",
    "CIM_ROW_SIZE", "CIM_ROW_COUNT", "CIM_COST",
];

const PROFILE_KEYS: &[&str] = &[
    "MEM_TYPE", "tRCD", "tRAS", "tRP", "tRC", "tBURST", "tFAW", "tRRD", "tWWD", "tWAD", "tAWD", "CLK_PERIOD_NS",
    "E_ACT", "E_READ", "E_WRITE", "E_ROWCLONE", "E_ROWCLONE_ZERO",
];

const REQUIRED_PROFILE_KEYS: &[&str] = &["MEM_TYPE", "tRCD", "tRAS", "tRP", "tRC", "tBURST", "tFAW", "tRRD", "CLK_PERIOD_NS"];

/// Value of a key plus the line it came from.
type Entry = (usize, String);

#[derive(Default)]
struct Parser {
    global: BTreeMap<&'static str, Entry>,
    profiles: BTreeMap<u32, (usize, BTreeMap<&'static str, Entry>)>,
    ranges: Vec<(usize, String)>,
    cim_costs: Vec<(usize, String)>,
    last_line: usize,
}

fn parse_num<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    let v = value.trim();
    let parsed = match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok().and_then(|n| n.to_string().parse().ok()),
        None => v.parse().ok(),
    };
    parsed.ok_or_else(|| ConfigError::Parse {
        line,
        message: format!("{key}: cannot parse `{value}`"),
    })
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::Parse {
            line,
            message: format!("{key}: expected true or false, got `{value}`"),
        }),
    }
}

impl Parser {
    fn parse(mut self, text: &str) -> Result<SimConfig, ConfigError> {
        let mut profile = 0u32;
        self.profiles.insert(0, (0, BTreeMap::new()));
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            self.last_line = line;
            let content = raw.split(';').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = match content.split_once(char::is_whitespace) {
                Some((k, v)) => (k, v.trim()),
                None => {
                    return Err(ConfigError::Parse {
                        line,
                        message: format!("`{content}` has no value"),
                    })
                }
            };
            let Some(&key) = KEYS.iter().find(|k| **k == key) else {
                return Err(ConfigError::UnknownKey { line, key: key.to_string() });
            };
            let entry = (line, value.to_string());
            match key {
                "PROFILE" => {
                    profile = parse_num(line, key, value)?;
                    if self.profiles.get(&profile).is_some_and(|(_, m)| !m.is_empty()) {
                        return Err(ConfigError::Parse {
                            line,
                            message: format!("profile {profile} defined twice"),
                        });
                    }
                    self.profiles.insert(profile, (line, BTreeMap::new()));
                }
                "CHANNEL_RANGE" => self.ranges.push(entry),
                "CIM_COST" => self.cim_costs.push(entry),
                k if PROFILE_KEYS.contains(&k) => {
                    let map = &mut self.profiles.get_mut(&profile).unwrap().1;
                    if map.insert(k, entry).is_some() {
                        return Err(ConfigError::Parse {
                            line,
                            message: format!("{k} given twice for profile {profile}"),
                        });
                    }
                }
                k => {
                    if self.global.insert(k, entry).is_some() {
                        return Err(ConfigError::Parse {
                            line,
                            message: format!("{k} given twice"),
                        });
                    }
                }
            }
        }
        self.build()
    }

    fn get<T: FromStr>(&self, key: &'static str, default: T) -> Result<T, ConfigError> {
        match self.global.get(key) {
            Some((line, v)) => parse_num(*line, key, v),
            None => Ok(default),
        }
    }

    fn get_bool(&self, key: &'static str, default: bool) -> Result<bool, ConfigError> {
        match self.global.get(key) {
            Some((line, v)) => parse_bool(*line, key, v),
            None => Ok(default),
        }
    }

    fn line_of(&self, keys: &[&str]) -> usize {
        keys.iter()
            .filter_map(|k| self.global.get(k).map(|e| e.0))
            .max()
            .unwrap_or(self.last_line)
    }

    fn invalid(&self, keys: &[&str], message: impl ToString) -> ConfigError {
        ConfigError::Validation {
            line: self.line_of(keys),
            message: message.to_string(),
        }
    }

    fn build_profile(&self, id: u32, header: usize, map: &BTreeMap<&'static str, Entry>) -> Result<TimingProfile, ConfigError> {
        let section_end = map.values().map(|e| e.0).max().unwrap_or(header);
        for key in REQUIRED_PROFILE_KEYS {
            if !map.contains_key(key) {
                return Err(ConfigError::Validation {
                    line: section_end.max(header).max(1),
                    message: format!("profile {id} is missing required key {key}"),
                });
            }
        }
        let num = |key: &'static str, default: f64| -> Result<f64, ConfigError> {
            map.get(key).map_or(Ok(default), |(l, v)| parse_num(*l, key, v))
        };
        let cyc = |key: &'static str| -> Result<u64, ConfigError> {
            map.get(key).map_or(Ok(0), |(l, v)| parse_num(*l, key, v))
        };
        let (kind_line, kind) = &map["MEM_TYPE"];
        let kind = match kind.to_ascii_uppercase().as_str() {
            "NVM" | "PCM" | "STTRAM" | "RERAM" => MemoryKind::Nvm,
            "DRAM" => MemoryKind::Dram,
            other => {
                return Err(ConfigError::Parse {
                    line: *kind_line,
                    message: format!("MEM_TYPE must be DRAM or NVM, got `{other}`"),
                })
            }
        };
        let p = TimingProfile {
            kind,
            t_rcd: cyc("tRCD")?,
            t_ras: cyc("tRAS")?,
            t_rp: cyc("tRP")?,
            t_rc: cyc("tRC")?,
            t_burst: cyc("tBURST")?,
            t_faw: cyc("tFAW")?,
            t_rrd: cyc("tRRD")?,
            t_wwd: cyc("tWWD")?,
            t_wad: cyc("tWAD")?,
            t_awd: cyc("tAWD")?,
            clock_period_ns: num("CLK_PERIOD_NS", 0.0)?,
            e_act: num("E_ACT", 0.0)?,
            e_read_burst: num("E_READ", 0.0)?,
            e_write_burst: num("E_WRITE", 0.0)?,
            e_rowclone: num("E_ROWCLONE", 0.0)?,
            e_rowclone_zero: num("E_ROWCLONE_ZERO", num("E_ROWCLONE", 0.0)?)?,
        };
        p.validate().map_err(|e| ConfigError::Validation {
            line: section_end,
            message: format!("profile {id}: {e}"),
        })?;
        Ok(p)
    }

    fn build(self) -> Result<SimConfig, ConfigError> {
        let geometry = Geometry {
            channels: self.get("CHANNELS", 1)?,
            ranks_per_channel: self.get("RANKS", 1)?,
            banks_per_rank: self.get("BANKS", 8)?,
            subarrays_per_bank: self.get("SUBARRAYS", 8)?,
            rows_per_subarray: self.get("ROWS", 512)?,
            columns_per_row: self.get("COLS", 512)?,
            device_width_bits: self.get("DEVICE_WIDTH", 64)?,
            burst_length: self.get("BURST_LENGTH", 8)?,
            block_size_bytes: self.get("BLOCK_SIZE", 64)?,
        };
        const GEOMETRY_KEYS: &[&str] = &[
            "CHANNELS", "RANKS", "BANKS", "SUBARRAYS", "ROWS", "COLS", "DEVICE_WIDTH", "BURST_LENGTH", "BLOCK_SIZE",
        ];
        geometry.validate().map_err(|e| self.invalid(GEOMETRY_KEYS, e))?;

        let mut profiles = Vec::new();
        for (expected, (&id, (header, map))) in self.profiles.iter().enumerate() {
            if id as usize != expected {
                return Err(ConfigError::Validation {
                    line: *header,
                    message: format!("profile ids must be numbered from 0 without gaps; found {id}"),
                });
            }
            profiles.push(self.build_profile(id, *header, map)?);
        }

        let policy = match self.global.get("MEM_CTL") {
            Some((line, v)) => v.parse::<Policy>().map_err(|e| ConfigError::Parse {
                line: *line,
                message: e.to_string(),
            })?,
            None => Policy::FrFcfs,
        };
        let mut controller = ControllerConfig::new(policy, self.get("READ_QUEUE", 32)?, self.get("WRITE_QUEUE", 32)?);
        let (high, low) = ControllerConfig::default_watermarks(controller.write_queue_capacity);
        controller.wq_high_watermark = self.get("WQ_HIGH", high)?;
        controller.wq_low_watermark = self.get("WQ_LOW", low)?;
        controller.allow_dram_rowclone = self.get_bool("ALLOW_DRAM_ROWCLONE", false)?;
        for (line, v) in &self.ranges {
            let f: Vec<&str> = v.split_whitespace().collect();
            if f.len() != 4 {
                return Err(ConfigError::Parse {
                    line: *line,
                    message: "CHANNEL_RANGE takes <start> <end> <channel> <profile>".into(),
                });
            }
            controller.channel_ranges.push(ChannelRange {
                start: parse_num(*line, "CHANNEL_RANGE", f[0])?,
                end: parse_num(*line, "CHANNEL_RANGE", f[1])?,
                channel: parse_num(*line, "CHANNEL_RANGE", f[2])?,
                profile: parse_num(*line, "CHANNEL_RANGE", f[3])?,
            });
        }
        let range_line = self.ranges.last().map(|e| e.0);
        controller.validate(profiles.len()).map_err(|e| ConfigError::Validation {
            line: range_line.unwrap_or_else(|| self.line_of(&["WQ_HIGH", "WQ_LOW", "WRITE_QUEUE", "READ_QUEUE"])),
            message: e.to_string(),
        })?;
        if controller.channel_ranges.is_empty() && profiles.len() > 1 {
            return Err(self.invalid(&["CHANNELS"], "several profiles need CHANNEL_RANGE lines to assign them"));
        }
        // build once so range/geometry mismatches surface here
        nvmsim_core::controller::MemorySystem::new(geometry, profiles.clone(), controller.clone()).map_err(|e| ConfigError::Validation {
            line: range_line.unwrap_or(self.last_line),
            message: e.to_string(),
        })?;

        let writer_kind = match self.global.get("PreTraceWriter") {
            Some((line, v)) => WriterKind::from_name(v).map_err(|e| ConfigError::Validation {
                line: *line,
                message: e.to_string(),
            })?,
            None => WriterKind::Raw,
        };
        let writer = TraceWriterConfig {
            enabled: self.get_bool("PrintPreTrace", false)?,
            file: self.global.get("PreTraceFile").map(|(_, v)| PathBuf::from(v)),
            kind: writer_kind,
        };
        if writer.enabled && writer.file.is_none() {
            return Err(self.invalid(&["PrintPreTrace"], "PrintPreTrace needs PreTraceFile"));
        }

        let cache = if self.global.keys().any(|k| k.starts_with("CACHE_") || *k == "NV_BLOCK_RATIO") {
            let d = HybridCacheConfig::default();
            let c = HybridCacheConfig {
                size_bytes: self.get("CACHE_SIZE", d.size_bytes)?,
                assoc: self.get("CACHE_ASSOC", d.assoc)?,
                block_bytes: self.get("CACHE_BLOCK", d.block_bytes)?,
                nv_block_ratio: self.get("NV_BLOCK_RATIO", d.nv_block_ratio)?,
                vol_read_latency: self.get("CACHE_VOL_READ_LAT", d.vol_read_latency)?,
                vol_write_latency: self.get("CACHE_VOL_WRITE_LAT", d.vol_write_latency)?,
                nv_read_latency: self.get("CACHE_NV_READ_LAT", d.nv_read_latency)?,
                nv_write_latency: self.get("CACHE_NV_WRITE_LAT", d.nv_write_latency)?,
                miss_penalty: self.get("CACHE_MISS_PENALTY", d.miss_penalty)?,
                vol_read_energy: self.get("CACHE_VOL_READ_E", d.vol_read_energy)?,
                vol_write_energy: self.get("CACHE_VOL_WRITE_E", d.vol_write_energy)?,
                nv_read_energy: self.get("CACHE_NV_READ_E", d.nv_read_energy)?,
                nv_write_energy: self.get("CACHE_NV_WRITE_E", d.nv_write_energy)?,
            };
            c.validate()
                .map_err(|e| self.invalid(&["CACHE_SIZE", "CACHE_ASSOC", "CACHE_BLOCK", "NV_BLOCK_RATIO"], e))?;
            Some(c)
        } else {
            None
        };

        let mut cim = CimConfig {
            row_size: self.get("CIM_ROW_SIZE", DEFAULT_ROW_SIZE)?,
            row_count: self.get("CIM_ROW_COUNT", DEFAULT_ROW_COUNT)?,
            timing: OpTiming::default(),
        };
        if cim.row_size == 0 || cim.row_count == 0 {
            return Err(self.invalid(&["CIM_ROW_SIZE", "CIM_ROW_COUNT"], "CiM rows must be non-empty"));
        }
        for (line, v) in &self.cim_costs {
            let f: Vec<&str> = v.split_whitespace().collect();
            let op = (f.len() == 3)
                .then(|| Opcode::ALL.into_iter().find(|o| o.name() == f[0]))
                .flatten()
                .ok_or_else(|| ConfigError::Parse {
                    line: *line,
                    message: "CIM_COST takes <opcode> <cycles> <nJ> with a known opcode".into(),
                })?;
            cim.timing.set(
                op,
                OpCost {
                    cycles: parse_num(*line, "CIM_COST", f[1])?,
                    energy_nj: parse_num(*line, "CIM_COST", f[2])?,
                },
            );
        }

        Ok(SimConfig {
            geometry,
            profiles,
            controller,
            cache,
            writer,
            cim,
            max_cycles: self.get("MAX_CYCLES", 100_000_000)?,
            payload_simulation: self.get_bool("PAYLOAD_SIM", false)?,
            read_wear: self.get_bool("READ_WEAR", false)?,
            rng_seed: self.get("RNG_SEED", 1)?,
        })
    }
}
