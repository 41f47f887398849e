//! Trace-driven model of an LLC-level temporal prefetcher whose correlation
//! metadata lives in a partition of the cache itself, plus the offline
//! profile → analyze → learn pipeline that steers it.
//!
//! Module map:
//! - [`trace`]: access records, trace files, synthetic trace generator
//! - [`cache`]: set-associative LLC with a metadata way partition
//! - [`table`]: packed Markov metadata table (tag/target compression)
//! - [`victim`]: multi-path victim buffer for displaced correlations
//! - [`hints`]: per-PC hint buffer and control-register state
//! - [`engine`]: trains correlations and issues prefetches
//! - [`profiler`]: counter collection over an instrumented run
//! - [`analysis`]: turns counters into hints and a table-size decision
//! - [`learning`]: multi-input counter merging
//! - [`sim`], [`report`]: end-to-end runs and result files

pub mod analysis;
pub mod cache;
pub mod engine;
pub mod error;
pub mod hints;
pub mod learning;
pub mod profiler;
pub mod report;
pub mod sim;
pub mod table;
pub mod trace;
pub mod victim;

pub use error::{Error, Result};
