//! Flat statistics reports: `key value` text or a one-row wide CSV.

use std::fmt;
use std::str::FromStr;

use nvmsim_core::cache::HybridStats;
use nvmsim_core::controller::{ChannelStats, ControllerStats};
use nvmsim_core::wear::{EnergyLedger, EnergySource};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(u64),
    Float(f64),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v:.6}"),
            Value::Text(v) => f.write_str(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format `{other}`, expected text or csv")),
        }
    }
}

/// Ordered key/value pairs. Keys keep insertion order so output is stable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    entries: Vec<(String, Value)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn int(&mut self, key: impl Into<String>, v: u64) {
        self.entries.push((key.into(), Value::Int(v)));
    }

    pub fn float(&mut self, key: impl Into<String>, v: f64) {
        self.entries.push((key.into(), Value::Float(v)));
    }

    pub fn text(&mut self, key: impl Into<String>, v: impl Into<String>) {
        self.entries.push((key.into(), Value::Text(v.into())));
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        match self.get(key)? {
            Value::Int(v) => Some(*v as f64),
            Value::Float(v) => Some(*v),
            Value::Text(_) => None,
        }
    }

    pub fn entries(&self) -> &[(String, Value)] {
        &self.entries
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.entries.iter().map(|(k, v)| format!("{k} {v}\n")).collect(),
            Format::Csv => {
                let keys: Vec<&str> = self.entries.iter().map(|(k, _)| k.as_str()).collect();
                let vals: Vec<String> = self.entries.iter().map(|(_, v)| csv_field(&v.to_string())).collect();
                format!("{}\n{}\n", keys.join(","), vals.join(","))
            }
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn channel_stats(r: &mut Report, prefix: &str, s: &ChannelStats) {
    r.int(format!("{prefix}rb_hits"), s.rb_hits);
    r.int(format!("{prefix}rb_miss"), s.rb_miss);
    r.int(format!("{prefix}reads"), s.reads);
    r.int(format!("{prefix}writes"), s.writes);
    r.int(format!("{prefix}rowclones"), s.rowclones);
    r.int(format!("{prefix}dropped_rowclones"), s.dropped_rowclones);
    r.float(format!("{prefix}averageLatency"), s.average_latency());
    r.float(format!("{prefix}averageTotalLatency"), s.average_total_latency());
    energy(r, prefix, &s.energy);
}

pub fn energy(r: &mut Report, prefix: &str, e: &EnergyLedger) {
    for src in EnergySource::ALL {
        r.float(format!("{prefix}energy.{}", src.name()), e.source(src));
    }
    r.float(format!("{prefix}totalEnergy"), e.total());
}

pub fn controller_stats(r: &mut Report, s: &ControllerStats) {
    r.int("cycles", s.cycles);
    channel_stats(r, "", &s.global);
    for (i, c) in s.per_channel.iter().enumerate() {
        channel_stats(r, &format!("channel{i}."), c);
    }
}

pub fn cache_stats(r: &mut Report, s: &HybridStats) {
    r.int("noOfVolReads", s.vol_reads);
    r.int("noOfNonVolReads", s.non_vol_reads);
    r.int("noOfVolWrites", s.vol_writes);
    r.int("noOfNonVolWrites", s.non_vol_writes);
    r.int("cacheHits", s.hits);
    r.int("cacheMisses", s.misses);
    r.int("cacheWritebacks", s.writebacks);
    r.int("cacheLatency", s.total_latency);
    r.float("dynEnergy", s.dyn_energy);
}
