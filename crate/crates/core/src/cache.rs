//! Set-associative last-level cache with a way partition reserved for
//! prefetcher metadata.
//!
//! Only the data partition is modeled as actual lines; the metadata
//! partition's capacity is handed to the correlation table as an entry
//! budget (12 packed entries per reserved line). Partitioning is per-set
//! and uniform: reserving `metadata_ways` shrinks every set's data
//! associativity by the same amount, and neither side can displace the
//! other.

use crate::error::{Error, Result};
use crate::table::ENTRIES_PER_LINE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheConfig {
    /// Total capacity in bytes, data and metadata partitions combined.
    pub total_size: u64,
    pub ways: u32,
    pub line_size: u32,
    /// Ways per set reserved for metadata storage, 0..=ways.
    pub metadata_ways: u32,
}

impl CacheConfig {
    /// 2 MB, 16-way, 64 B lines, half the ways reserved for metadata.
    pub fn default_llc() -> Self {
        CacheConfig { total_size: 2 * 1024 * 1024, ways: 16, line_size: 64, metadata_ways: 8 }
    }

    pub fn sets(&self) -> u64 {
        self.total_size / (self.ways as u64 * self.line_size as u64)
    }

    /// Packed metadata entries the reserved partition can hold.
    pub fn metadata_entry_capacity(&self) -> u64 {
        self.sets() * self.metadata_ways as u64 * ENTRIES_PER_LINE as u64
    }

    pub fn validate(&self) -> Result<()> {
        if self.ways == 0 || self.line_size == 0 || self.total_size == 0 {
            return Err(Error::Config { msg: "cache geometry fields must be nonzero".into() });
        }
        let line_bytes = self.ways as u64 * self.line_size as u64;
        if self.total_size % line_bytes != 0 {
            return Err(Error::Config {
                msg: format!("total_size {} not divisible by ways*line_size {}", self.total_size, line_bytes),
            });
        }
        let sets = self.sets();
        if !sets.is_power_of_two() {
            return Err(Error::Config { msg: format!("set count {sets} is not a power of two") });
        }
        if self.metadata_ways > self.ways {
            return Err(Error::Config {
                msg: format!("metadata_ways {} exceeds ways {}", self.metadata_ways, self.ways),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemandOutcome {
    Hit,
    /// First demand touch of a line a prefetch brought in; carries the PC
    /// that issued the prefetch. Fires exactly once per prefetched fill.
    HitOnPrefetch(u64),
    Miss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillOutcome {
    Inserted,
    AlreadyPresent,
}

#[derive(Debug, Clone, Copy)]
struct LineState {
    tag: u64,
    prefetched: bool,
    issuing_pc: u64,
    lru_stamp: u64,
}

/// LLC data partition with true (stamp-based) LRU per set.
#[derive(Debug)]
pub struct Llc {
    cfg: CacheConfig,
    sets: Vec<Vec<LineState>>,
    index_mask: u64,
    stamp: u64,
    accessed: bool,
}

impl Llc {
    pub fn new(cfg: CacheConfig) -> Result<Self> {
        cfg.validate()?;
        let sets = cfg.sets();
        Ok(Llc {
            cfg,
            sets: vec![Vec::new(); sets as usize],
            index_mask: sets - 1,
            stamp: 0,
            accessed: false,
        })
    }

    pub fn config(&self) -> &CacheConfig {
        &self.cfg
    }

    pub fn data_ways(&self) -> u32 {
        self.cfg.ways - self.cfg.metadata_ways
    }

    /// Move the partition boundary. Only legal before the first access;
    /// repartitioning a warm cache would conjure or destroy lines.
    pub fn set_partition(&mut self, metadata_ways: u32) -> Result<()> {
        if self.accessed {
            return Err(Error::Config {
                msg: "set_partition called after the cache has been accessed".into(),
            });
        }
        if metadata_ways > self.cfg.ways {
            return Err(Error::Config {
                msg: format!("metadata_ways {} exceeds ways {}", metadata_ways, self.cfg.ways),
            });
        }
        self.cfg.metadata_ways = metadata_ways;
        Ok(())
    }

    fn set_of(&self, line_addr: u64) -> usize {
        (line_addr & self.index_mask) as usize
    }

    fn next_stamp(&mut self) -> u64 {
        self.stamp += 1;
        self.stamp
    }

    pub fn demand_access(&mut self, line_addr: u64) -> DemandOutcome {
        self.accessed = true;
        let stamp = self.next_stamp();
        let data_ways = self.data_ways() as usize;
        let set = self.set_of(line_addr);
        let lines = &mut self.sets[set];
        if let Some(line) = lines.iter_mut().find(|l| l.tag == line_addr) {
            line.lru_stamp = stamp;
            if line.prefetched {
                line.prefetched = false;
                return DemandOutcome::HitOnPrefetch(line.issuing_pc);
            }
            return DemandOutcome::Hit;
        }
        if data_ways == 0 {
            return DemandOutcome::Miss;
        }
        if lines.len() == data_ways {
            let victim = lines
                .iter()
                .enumerate()
                .min_by_key(|(_, l)| l.lru_stamp)
                .map(|(i, _)| i)
                .unwrap();
            lines.swap_remove(victim);
        }
        lines.push(LineState { tag: line_addr, prefetched: false, issuing_pc: 0, lru_stamp: stamp });
        DemandOutcome::Miss
    }

    /// Install a prefetched line, tagged with the PC the prefetch was
    /// attributed to. A line that is already resident is left untouched.
    pub fn prefetch_fill(&mut self, line_addr: u64, issuing_pc: u64) -> FillOutcome {
        self.accessed = true;
        let stamp = self.next_stamp();
        let data_ways = self.data_ways() as usize;
        let set = self.set_of(line_addr);
        let lines = &mut self.sets[set];
        if lines.iter().any(|l| l.tag == line_addr) {
            return FillOutcome::AlreadyPresent;
        }
        if data_ways == 0 {
            return FillOutcome::AlreadyPresent;
        }
        if lines.len() == data_ways {
            let victim = lines
                .iter()
                .enumerate()
                .min_by_key(|(_, l)| l.lru_stamp)
                .map(|(i, _)| i)
                .unwrap();
            lines.swap_remove(victim);
        }
        lines.push(LineState { tag: line_addr, prefetched: true, issuing_pc, lru_stamp: stamp });
        FillOutcome::Inserted
    }

    /// Install a line with no prefetch provenance (upstream-prefetcher
    /// fills). Subsequent demand touches count as plain hits.
    pub fn plain_fill(&mut self, line_addr: u64) {
        self.accessed = true;
        let stamp = self.next_stamp();
        let data_ways = self.data_ways() as usize;
        let set = self.set_of(line_addr);
        let lines = &mut self.sets[set];
        if let Some(line) = lines.iter_mut().find(|l| l.tag == line_addr) {
            line.lru_stamp = stamp;
            return;
        }
        if data_ways == 0 {
            return;
        }
        if lines.len() == data_ways {
            let victim = lines
                .iter()
                .enumerate()
                .min_by_key(|(_, l)| l.lru_stamp)
                .map(|(i, _)| i)
                .unwrap();
            lines.swap_remove(victim);
        }
        lines.push(LineState { tag: line_addr, prefetched: false, issuing_pc: 0, lru_stamp: stamp });
    }

    pub fn resident(&self, line_addr: u64) -> bool {
        self.sets[self.set_of(line_addr)].iter().any(|l| l.tag == line_addr)
    }
}
