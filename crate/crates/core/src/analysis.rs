//! Counter analysis: turns profiled evidence into a hint manifest.
//!
//! Three rules, applied per run: a PC's metadata is worth inserting iff
//! its prefetch accuracy clears a low bar; inserted PCs get a priority
//! band proportional to accuracy; and the metadata partition is sized
//! from the peak entry demand, rounded to a power of two and expressed
//! in cache ways, with the prefetcher disabled outright when the demand
//! would not fill half a way.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hints::{CsrState, Hint, HintManifest, HINT_CAPACITY};
use crate::learning::{CounterStore, STORE_MAGIC};
use crate::profiler::{CounterFile, COUNTER_MAGIC};
use crate::table::{ENTRIES_PER_LINE, MAX_TABLE_ENTRIES};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisParams {
    /// Minimum accuracy for insertion; "extremely low" by design so only
    /// evidence-free PCs are filtered.
    pub el_acc: f64,
    /// Priority bands = 2^n_bits.
    pub n_bits: u32,
    pub llc_sets: u64,
    pub max_table_entries: u64,
    /// How many worst-missing PCs receive hints.
    pub top_k: usize,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        AnalysisParams {
            el_acc: 1.0 / 16.0,
            n_bits: 2,
            llc_sets: 2048,
            max_table_entries: MAX_TABLE_ENTRIES,
            top_k: HINT_CAPACITY,
        }
    }
}

impl AnalysisParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_bits == 0 || self.n_bits > 8 {
            return Err(Error::Config { msg: format!("n_bits {} outside 1..=8", self.n_bits) });
        }
        let first_band = 1.0 / (1u64 << self.n_bits) as f64;
        if !(self.el_acc > 0.0 && self.el_acc < first_band) {
            return Err(Error::Config {
                msg: format!(
                    "el_acc {} must lie in (0, {first_band}) so the lowest band is nonempty",
                    self.el_acc
                ),
            });
        }
        if self.llc_sets == 0 || !self.llc_sets.is_power_of_two() {
            return Err(Error::Config { msg: format!("llc_sets {} not a power of two", self.llc_sets) });
        }
        if self.max_table_entries < ENTRIES_PER_LINE as u64 {
            return Err(Error::Config {
                msg: format!("max_table_entries {} below one line", self.max_table_entries),
            });
        }
        if self.top_k == 0 || self.top_k > HINT_CAPACITY {
            return Err(Error::Config {
                msg: format!("top_k {} outside 1..={HINT_CAPACITY}", self.top_k),
            });
        }
        Ok(())
    }
}

/// Insert bit: keep a PC's metadata iff its accuracy clears the bar.
/// Boundary inclusive.
pub fn insert_decision(acc: f64, params: &AnalysisParams) -> bool {
    acc >= params.el_acc
}

/// Priority band for an accuracy that already passed `insert_decision`:
/// floor(acc * 2^n), clamped into the top band at acc = 1.
pub fn priority_level(acc: f64, params: &AnalysisParams) -> u8 {
    debug_assert!(acc >= params.el_acc, "callers filter with insert_decision first");
    let levels = 1u64 << params.n_bits;
    ((acc * levels as f64).floor() as u64).min(levels - 1) as u8
}

fn nearest_pow2_tie_up(x: u64) -> u64 {
    if x.is_power_of_two() {
        return x;
    }
    let hi = x.next_power_of_two();
    let lo = hi >> 1;
    if x - lo < hi - x {
        lo
    } else {
        hi
    }
}

fn floor_pow2(x: u64) -> u64 {
    1u64 << (63 - x.leading_zeros())
}

/// Partition sizing from peak allocated entries: round to the nearest
/// power of two (ties toward more space), cap at what the maximum table
/// can hold, convert to lines and then whole ways, and disable the
/// prefetcher entirely when the demand is under half a way.
pub fn resize_decision(allocated_entries: u64, params: &AnalysisParams) -> (u32, bool) {
    if allocated_entries == 0 {
        return (0, false);
    }
    let cap = floor_pow2(params.max_table_entries);
    let target = nearest_pow2_tie_up(allocated_entries).min(cap);
    let lines = target.div_ceil(ENTRIES_PER_LINE as u64);
    if 2 * lines < params.llc_sets {
        return (0, false);
    }
    (lines.div_ceil(params.llc_sets) as u32, true)
}

/// Per-PC evidence in the form analysis consumes, whatever its source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcEvidence {
    pub pc: u64,
    pub acc: f64,
    pub misses: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisInput {
    pub per_pc: Vec<PcEvidence>,
    pub allocated: u64,
}

impl AnalysisInput {
    pub fn from_counters(cf: &CounterFile) -> Self {
        let per_pc = cf
            .pcs
            .iter()
            .map(|c| PcEvidence {
                pc: c.pc,
                // no issued prefetches = no evidence of a temporal pattern
                acc: if c.issued == 0 { 0.0 } else { c.useful as f64 / c.issued as f64 },
                misses: c.demand_misses as f64,
            })
            .collect();
        AnalysisInput { per_pc, allocated: cf.app.allocated_entries_end }
    }

    pub fn from_store(store: &CounterStore) -> Self {
        let per_pc = store
            .per_pc
            .iter()
            .map(|(&pc, m)| PcEvidence { pc, acc: m.acc, misses: m.misses })
            .collect();
        AnalysisInput { per_pc, allocated: store.allocated }
    }

    /// Accepts either a raw counter file or a merged store, sniffed from
    /// the header line.
    pub fn load(path: &Path) -> Result<Self> {
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match content.lines().next().map(str::trim_end) {
            Some(COUNTER_MAGIC) => Ok(Self::from_counters(&CounterFile::parse(&content, path)?)),
            Some(STORE_MAGIC) => Ok(Self::from_store(&CounterStore::parse(&content, path)?)),
            other => Err(Error::BadMagic {
                path: path.into(),
                expected: format!("{COUNTER_MAGIC} or {STORE_MAGIC}"),
                found: other.unwrap_or_default().into(),
            }),
        }
    }
}

/// Rank the worst-missing PCs, hint each one, and size the partition.
pub fn analyze(input: &AnalysisInput, params: &AnalysisParams) -> Result<HintManifest> {
    params.validate()?;
    let mut ranked = input.per_pc.clone();
    ranked.sort_by(|a, b| b.misses.total_cmp(&a.misses).then(a.pc.cmp(&b.pc)));
    ranked.truncate(params.top_k);

    let entries = ranked
        .iter()
        .map(|e| {
            let acc = e.acc.clamp(0.0, 1.0);
            let insert = insert_decision(acc, params);
            let priority = if insert { priority_level(acc, params) } else { 0 };
            (e.pc, Hint { insert, priority })
        })
        .collect();

    let (metadata_ways, enabled) = resize_decision(input.allocated, params);
    Ok(HintManifest {
        csr: CsrState {
            prophet_enabled: enabled,
            metadata_ways,
            insertion_policy_enabled: true,
            resizing_from_profile: true,
        },
        entries,
    })
}
