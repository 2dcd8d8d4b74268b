//! Core models for a trace-driven simulator of DRAM and non-volatile main
//! memories.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches a
//! file, the clock of the host or the command line lives in the companion
//! `nvmsim` crate.
//!
//! - [`trace`]: request codec and the pluggable trace writers.
//! - [`memory`]: geometry, address mapping, bank timing and RowClone.
//! - [`controller`]: transaction queues, scheduling policies and statistics.
//! - [`cache`]: SRAM/STT-RAM hybrid set-associative cache.
//! - [`cim`]: compute-in-memory row engine and program interpreter.
//! - [`wear`]: bit-flip accounting, wear metrics and the energy ledger.
#![no_std]

extern crate alloc;

pub mod cache;
pub mod cim;
pub mod controller;
pub mod memory;
pub mod trace;
pub mod wear;
