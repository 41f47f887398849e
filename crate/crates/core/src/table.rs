//! Markov correlation table packed into cache lines.
//!
//! Each 64-byte line holds 12 compressed entries of 41 bits (10-bit tag +
//! 31-bit target), 492 bits in all, leaving 20 bits of a line unused. The
//! 2-bit per-entry replacement state (priority or RRPV, depending on mode)
//! is accounted separately. Targets are decompressed by splicing the upper
//! bits of the triggering address back on, so correlations only round-trip
//! exactly when trigger and target share their upper address bits; that is
//! the deliberate accuracy/size trade of the compression scheme.
//!
//! `MetadataTable::unbounded()` swaps the packed structure for a full-width
//! map with unlimited capacity. It exists for oracle comparisons and for
//! experiments that must rule out aliasing and capacity effects.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub const ENTRIES_PER_LINE: u32 = 12;
pub const TAG_BITS: u32 = 10;
pub const TARGET_BITS: u32 = 31;
pub const ENTRY_PAYLOAD_BITS: u64 = (TAG_BITS + TARGET_BITS) as u64;
pub const REPL_STATE_BITS: u64 = 2;
/// Entry count of the largest supported table (1 MB of packed lines).
pub const MAX_TABLE_ENTRIES: u64 = 196_608;

const TAG_MASK: u64 = (1 << TAG_BITS) - 1;
const TARGET_MASK: u64 = (1 << TARGET_BITS) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplacementMode {
    /// 2-bit priority from the hint system; LRU breaks ties.
    PriorityLru,
    Srrip,
    Lru,
}

#[derive(Debug, Clone, Copy)]
pub struct TableConfig {
    pub sets: u64,
    pub assoc_entries_per_set: u32,
    pub replacement_mode: ReplacementMode,
}

impl TableConfig {
    /// Table occupying `metadata_ways` ways of an LLC with `llc_sets` sets.
    pub fn from_partition(llc_sets: u64, metadata_ways: u32, mode: ReplacementMode) -> Self {
        TableConfig {
            sets: llc_sets,
            assoc_entries_per_set: metadata_ways * ENTRIES_PER_LINE,
            replacement_mode: mode,
        }
    }

    pub fn entry_capacity(&self) -> u64 {
        self.sets * self.assoc_entries_per_set as u64
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sets.is_power_of_two() {
            return Err(Error::Config { msg: format!("table set count {} is not a power of two", self.sets) });
        }
        if self.assoc_entries_per_set == 0 {
            return Err(Error::Config { msg: "table associativity must be nonzero".into() });
        }
        if self.entry_capacity() > MAX_TABLE_ENTRIES {
            return Err(Error::Config {
                msg: format!(
                    "table capacity {} exceeds the {MAX_TABLE_ENTRIES}-entry (1 MB) cap",
                    self.entry_capacity()
                ),
            });
        }
        Ok(())
    }
}

/// Correlation displaced from the table, offered to the victim buffer.
/// `key_lo` reconstructs the low bits of the original trigger address
/// (set index plus tag; the full address for the unbounded table).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetadataVictim {
    pub key_lo: u64,
    pub target: u32,
    pub priority: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    /// Stored in a free slot.
    NewEntry,
    /// Key already present with the same target; recency/priority updated.
    Refreshed,
    /// Key already present with a different target; the old correlation is
    /// overwritten in place and reported (no slot is freed).
    Displaced(MetadataVictim),
    /// A different key was evicted to make room.
    Evicted(MetadataVictim),
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    tag: u16,
    target: u32,
    priority: u8,
    lru_stamp: u64,
    rrpv: u8,
}

#[derive(Debug)]
enum Storage {
    Packed { cfg: TableConfig, sets: Vec<Vec<Entry>>, stamp: u64 },
    Unbounded { map: HashMap<u64, (u64, u8)> },
}

#[derive(Debug, Default, Clone, Copy)]
struct Counters {
    insertions: u64,
    evictions: u64,
    overwrites: u64,
}

#[derive(Debug)]
pub struct MetadataTable {
    storage: Storage,
    counters: Counters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StorageReport {
    pub entry_capacity: u64,
    pub payload_bits: u64,
    pub replacement_state_bits: u64,
    pub total_bits: u64,
}

impl StorageReport {
    pub fn for_capacity(entry_capacity: u64) -> Self {
        let payload_bits = entry_capacity * ENTRY_PAYLOAD_BITS;
        let replacement_state_bits = entry_capacity * REPL_STATE_BITS;
        StorageReport {
            entry_capacity,
            payload_bits,
            replacement_state_bits,
            total_bits: payload_bits + replacement_state_bits,
        }
    }
}

impl MetadataTable {
    pub fn packed(cfg: TableConfig) -> Result<Self> {
        cfg.validate()?;
        let sets = vec![Vec::new(); cfg.sets as usize];
        Ok(MetadataTable {
            storage: Storage::Packed { cfg, sets, stamp: 0 },
            counters: Counters::default(),
        })
    }

    /// Full-width map with unlimited capacity; never evicts or aliases.
    pub fn unbounded() -> Self {
        MetadataTable {
            storage: Storage::Unbounded { map: HashMap::new() },
            counters: Counters::default(),
        }
    }

    pub fn index_bits(&self) -> u32 {
        match &self.storage {
            Storage::Packed { cfg, .. } => cfg.sets.trailing_zeros(),
            Storage::Unbounded { .. } => 0,
        }
    }

    fn split(cfg: &TableConfig, line_addr: u64) -> (usize, u16) {
        let set = (line_addr & (cfg.sets - 1)) as usize;
        let tag = ((line_addr >> cfg.sets.trailing_zeros()) & TAG_MASK) as u16;
        (set, tag)
    }

    fn splice(trigger: u64, target: u32) -> u64 {
        (trigger & !TARGET_MASK) | target as u64
    }

    /// Look up the stored successor of `line_addr`, touching recency state.
    /// Never allocates.
    pub fn lookup(&mut self, line_addr: u64) -> Option<u64> {
        match &mut self.storage {
            Storage::Packed { cfg, sets, stamp } => {
                let (set, tag) = Self::split(cfg, line_addr);
                let entry = sets[set].iter_mut().find(|e| e.tag == tag)?;
                *stamp += 1;
                entry.lru_stamp = *stamp;
                entry.rrpv = 0;
                Some(Self::splice(line_addr, entry.target))
            }
            Storage::Unbounded { map } => map.get(&line_addr).map(|&(t, _)| t),
        }
    }

    /// Recency-neutral probe; used where a policy wants to observe the
    /// table without perturbing replacement state.
    pub fn peek(&self, line_addr: u64) -> Option<u64> {
        match &self.storage {
            Storage::Packed { cfg, sets, .. } => {
                let (set, tag) = Self::split(cfg, line_addr);
                sets[set]
                    .iter()
                    .find(|e| e.tag == tag)
                    .map(|e| Self::splice(line_addr, e.target))
            }
            Storage::Unbounded { map } => map.get(&line_addr).map(|&(t, _)| t),
        }
    }

    pub fn insert(&mut self, line_addr: u64, target: u64, priority: u8) -> InsertOutcome {
        debug_assert!(priority < 4);
        self.counters.insertions += 1;
        match &mut self.storage {
            Storage::Packed { cfg, sets, stamp } => {
                *stamp += 1;
                let (set, tag) = Self::split(cfg, line_addr);
                let target31 = (target & TARGET_MASK) as u32;
                let lines = &mut sets[set];
                if let Some(entry) = lines.iter_mut().find(|e| e.tag == tag) {
                    let outcome = if entry.target == target31 {
                        InsertOutcome::Refreshed
                    } else {
                        InsertOutcome::Displaced(MetadataVictim {
                            key_lo: key_lo(cfg, set, tag),
                            target: entry.target,
                            priority: entry.priority,
                        })
                    };
                    entry.target = target31;
                    entry.priority = priority;
                    entry.lru_stamp = *stamp;
                    entry.rrpv = 0;
                    self.counters.overwrites += 1;
                    return outcome;
                }
                let fresh = Entry { tag, target: target31, priority, lru_stamp: *stamp, rrpv: 2 };
                if lines.len() < cfg.assoc_entries_per_set as usize {
                    lines.push(fresh);
                    return InsertOutcome::NewEntry;
                }
                let slot = match cfg.replacement_mode {
                    ReplacementMode::PriorityLru => lines
                        .iter()
                        .enumerate()
                        .min_by_key(|(_, e)| (e.priority, e.lru_stamp))
                        .map(|(i, _)| i)
                        .unwrap(),
                    ReplacementMode::Lru => lines
                        .iter()
                        .enumerate()
                        .min_by_key(|(_, e)| e.lru_stamp)
                        .map(|(i, _)| i)
                        .unwrap(),
                    ReplacementMode::Srrip => loop {
                        if let Some(i) = lines.iter().position(|e| e.rrpv == 3) {
                            break i;
                        }
                        lines.iter_mut().for_each(|e| e.rrpv += 1);
                    },
                };
                let old = lines[slot];
                lines[slot] = fresh;
                self.counters.evictions += 1;
                InsertOutcome::Evicted(MetadataVictim {
                    key_lo: key_lo(cfg, set, old.tag),
                    target: old.target,
                    priority: old.priority,
                })
            }
            Storage::Unbounded { map } => match map.insert(line_addr, (target, priority)) {
                None => InsertOutcome::NewEntry,
                Some((old_target, old_priority)) => {
                    self.counters.overwrites += 1;
                    if old_target == target {
                        InsertOutcome::Refreshed
                    } else {
                        InsertOutcome::Displaced(MetadataVictim {
                            key_lo: line_addr,
                            target: (old_target & TARGET_MASK) as u32,
                            priority: old_priority,
                        })
                    }
                }
            },
        }
    }

    pub fn occupancy(&self) -> u64 {
        match &self.storage {
            Storage::Packed { sets, .. } => sets.iter().map(|s| s.len() as u64).sum(),
            Storage::Unbounded { map } => map.len() as u64,
        }
    }

    /// Total insert calls, including refreshes and overwrites.
    pub fn insertions(&self) -> u64 {
        self.counters.insertions
    }

    /// Inserts that did not grow occupancy: capacity evictions plus
    /// in-place overwrites. `insertions - replacements` is therefore
    /// always the live entry count.
    pub fn replacements(&self) -> u64 {
        self.counters.evictions + self.counters.overwrites
    }

    pub fn storage_report(&self) -> StorageReport {
        match &self.storage {
            Storage::Packed { cfg, .. } => StorageReport::for_capacity(cfg.entry_capacity()),
            Storage::Unbounded { map } => StorageReport::for_capacity(map.len() as u64),
        }
    }
}

fn key_lo(cfg: &TableConfig, set: usize, tag: u16) -> u64 {
    (set as u64) | ((tag as u64) << cfg.sets.trailing_zeros())
}
