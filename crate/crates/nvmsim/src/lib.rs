//! File formats, simulation drivers and bundled assets for the `nvmsim`
//! command-line tool.

pub mod assets;
pub mod config;
pub mod driver;
pub mod report;

pub use config::{load_config, ConfigError, SimConfig};
pub use driver::DriverError;
pub use report::{Format, Report};
