//! Multi-path victim buffer.
//!
//! Holds correlations pushed out of the metadata table, either by capacity
//! eviction or by an in-place target overwrite. For an address whose
//! successors alternate, the table keeps one target and this buffer keeps
//! the recently displaced others, so a lookup can prefetch down several
//! paths at once. Entries whose hint priority was 0 are not worth keeping
//! and are dropped at the door.
//!
//! Each entry is 43 bits: 10-bit tag, 31-bit compressed target, 2-bit
//! saturating use counter. Replacement victimizes the least-used entry,
//! breaking ties by recency.

use crate::error::{Error, Result};
use crate::table::MetadataVictim;

pub const VICTIM_ENTRY_BITS: u64 = 43;
const TAG_MASK: u64 = (1 << 10) - 1;
const TARGET_MASK: u64 = (1 << 31) - 1;

#[derive(Debug, Clone, Copy)]
pub struct VictimBufferConfig {
    pub entries: u64,
    pub ways: u32,
    /// Extra targets returned per lookup, 1..=3.
    pub candidates_per_entry: u32,
}

impl Default for VictimBufferConfig {
    fn default() -> Self {
        VictimBufferConfig { entries: 65_536, ways: 16, candidates_per_entry: 1 }
    }
}

impl VictimBufferConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ways == 0 || self.entries == 0 || self.entries % self.ways as u64 != 0 {
            return Err(Error::Config {
                msg: format!("victim buffer {} entries not divisible into {}-way sets", self.entries, self.ways),
            });
        }
        if !(self.entries / self.ways as u64).is_power_of_two() {
            return Err(Error::Config {
                msg: "victim buffer set count must be a power of two".into(),
            });
        }
        if !(1..=3).contains(&self.candidates_per_entry) {
            return Err(Error::Config {
                msg: format!("candidates_per_entry {} outside 1..=3", self.candidates_per_entry),
            });
        }
        Ok(())
    }

    pub fn storage_bits(&self) -> u64 {
        self.entries * VICTIM_ENTRY_BITS
    }
}

#[derive(Debug, Clone, Copy)]
struct VictimEntry {
    tag: u16,
    target: u32,
    use_counter: u8,
    lru_stamp: u64,
}

#[derive(Debug)]
pub struct VictimBuffer {
    cfg: VictimBufferConfig,
    sets: Vec<Vec<VictimEntry>>,
    set_mask: u64,
    /// Low-address bits of a trigger that the table's set+tag reconstruct;
    /// keys are confined to this window so insert and lookup agree.
    key_mask: u64,
    tag_shift: u32,
    stamp: u64,
}

impl VictimBuffer {
    /// `tag_shift` is the metadata table's index width: tags here are the
    /// same 10 address bits the table uses, so both structures respond to
    /// the same lookup addresses.
    pub fn new(cfg: VictimBufferConfig, tag_shift: u32) -> Result<Self> {
        cfg.validate()?;
        let sets = cfg.entries / cfg.ways as u64;
        Ok(VictimBuffer {
            cfg,
            sets: vec![Vec::new(); sets as usize],
            set_mask: sets - 1,
            key_mask: (1u64 << (tag_shift + 10).min(63)) - 1,
            tag_shift,
            stamp: 0,
        })
    }

    fn locate(&self, key_lo: u64) -> (usize, u16) {
        let key = key_lo & self.key_mask;
        let set = (key & self.set_mask) as usize;
        let tag = ((key >> self.tag_shift) & TAG_MASK) as u16;
        (set, tag)
    }

    /// Admit a displaced correlation. Priority-0 victims are dropped;
    /// duplicate (tag, target) pairs collapse onto the existing entry.
    pub fn insert(&mut self, victim: &MetadataVictim) {
        if victim.priority == 0 {
            return;
        }
        self.stamp += 1;
        let (set, tag) = self.locate(victim.key_lo);
        let ways = self.cfg.ways as usize;
        let lines = &mut self.sets[set];
        if let Some(e) = lines.iter_mut().find(|e| e.tag == tag && e.target == victim.target) {
            e.lru_stamp = self.stamp;
            return;
        }
        if lines.len() == ways {
            let slot = lines
                .iter()
                .enumerate()
                .min_by_key(|(_, e)| (e.use_counter, e.lru_stamp))
                .map(|(i, _)| i)
                .unwrap();
            lines.swap_remove(slot);
        }
        lines.push(VictimEntry { tag, target: victim.target, use_counter: 0, lru_stamp: self.stamp });
    }

    /// Stored targets for `line_addr` other than `primary`, limited to the
    /// configured candidate count. Returned entries have their use counter
    /// bumped (saturating at 3) and recency refreshed.
    pub fn lookup(&mut self, line_addr: u64, primary: Option<u64>) -> Vec<u64> {
        self.stamp += 1;
        let (set, tag) = self.locate(line_addr);
        let high = line_addr & !TARGET_MASK;
        let limit = self.cfg.candidates_per_entry as usize;
        let mut out = Vec::new();
        for e in self.sets[set].iter_mut() {
            if out.len() == limit {
                break;
            }
            if e.tag != tag {
                continue;
            }
            let full = high | e.target as u64;
            if primary == Some(full) {
                continue;
            }
            e.use_counter = (e.use_counter + 1).min(3);
            e.lru_stamp = self.stamp;
            out.push(full);
        }
        out
    }

    pub fn occupancy(&self) -> u64 {
        self.sets.iter().map(|s| s.len() as u64).sum()
    }

    pub fn storage_bits(&self) -> u64 {
        self.cfg.storage_bits()
    }
}
