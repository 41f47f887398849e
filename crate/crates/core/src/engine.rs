//! The temporal prefetch engine.
//!
//! Training observes the demand stream and records address transitions in
//! the metadata table; triggering looks the current address up and walks
//! the recorded chain to produce prefetch targets. Insertion can be gated
//! three ways: by profile-derived per-PC hints, not at all, or by a
//! runtime per-PC confidence counter (the on-chip baseline this design
//! replaces). The engine also owns per-PC issue/useful accounting so
//! accuracy can be reported per load instruction.

use std::collections::HashMap;

use crate::cache::FillOutcome;
use crate::error::{Error, Result};
use crate::hints::HintBuffer;
use crate::table::{InsertOutcome, MetadataTable, ReplacementMode};
use crate::victim::{VictimBuffer, VictimBufferConfig};

/// Confidence gate used by the runtime-filter baseline: a 4-bit saturating
/// counter per PC, insertion allowed at or above the midpoint.
const CONF_INIT: u8 = 8;
const CONF_MAX: u8 = 15;
const CONF_THRESHOLD: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertionMode {
    /// Consult the per-PC hint buffer; insert bit 0 blocks training.
    ProphetHints,
    /// Every transition is inserted at top priority.
    NoFilter,
    /// Runtime confidence counters gate insertion per PC.
    PatternConfBaseline,
}

/// Granularity of last-address tracking during training. Per-PC keeps one
/// trail per load instruction; Global chains the raw access stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingScope {
    PerPc,
    Global,
}

#[derive(Debug, Clone)]
pub struct PrefetcherConfig {
    /// Chain-walk depth: how many successive targets one trigger emits.
    pub degree: usize,
    pub insertion_mode: InsertionMode,
    pub replacement_mode: ReplacementMode,
    pub victim_buffer_enabled: bool,
    pub victim: VictimBufferConfig,
    pub training_scope: TrainingScope,
    /// Profiling configuration: no filtering, LRU metadata, degree 1,
    /// victim buffer off. Overrides the four fields above.
    pub simplified_mode: bool,
}

impl Default for PrefetcherConfig {
    fn default() -> Self {
        PrefetcherConfig {
            degree: 1,
            insertion_mode: InsertionMode::NoFilter,
            replacement_mode: ReplacementMode::Srrip,
            victim_buffer_enabled: false,
            victim: VictimBufferConfig::default(),
            training_scope: TrainingScope::PerPc,
            simplified_mode: false,
        }
    }
}

impl PrefetcherConfig {
    /// Resolve `simplified_mode` into concrete settings.
    pub fn normalized(mut self) -> Self {
        if self.simplified_mode {
            self.degree = 1;
            self.insertion_mode = InsertionMode::NoFilter;
            self.replacement_mode = ReplacementMode::Lru;
            self.victim_buffer_enabled = false;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree == 0 {
            return Err(Error::Config { msg: "prefetch degree must be at least 1".into() });
        }
        self.victim.validate()
    }
}

/// Issue/useful tallies for one PC.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PcStats {
    pub issued: u64,
    pub useful: u64,
}

pub struct Prefetcher {
    cfg: PrefetcherConfig,
    table: MetadataTable,
    vb: Option<VictimBuffer>,
    hints: HintBuffer,
    last_by_pc: HashMap<u64, u64>,
    last_global: Option<u64>,
    conf: HashMap<u64, u8>,
    stats: HashMap<u64, PcStats>,
    issued_total: u64,
    useful_total: u64,
    inserted_fills: u64,
}

impl Prefetcher {
    /// The table is built by the caller so capacity policy (partition
    /// sizing, resizing, unbounded reference runs) stays outside the
    /// engine. The hint buffer is ignored outside ProphetHints mode.
    pub fn new(cfg: PrefetcherConfig, table: MetadataTable, hints: HintBuffer) -> Result<Self> {
        let cfg = cfg.normalized();
        cfg.validate()?;
        let vb = if cfg.victim_buffer_enabled {
            Some(VictimBuffer::new(cfg.victim, table.index_bits())?)
        } else {
            None
        };
        Ok(Prefetcher {
            cfg,
            table,
            vb,
            hints,
            last_by_pc: HashMap::new(),
            last_global: None,
            conf: HashMap::new(),
            stats: HashMap::new(),
            issued_total: 0,
            useful_total: 0,
            inserted_fills: 0,
        })
    }

    pub fn config(&self) -> &PrefetcherConfig {
        &self.cfg
    }

    pub fn table(&self) -> &MetadataTable {
        &self.table
    }

    pub fn victim_buffer(&self) -> Option<&VictimBuffer> {
        self.vb.as_ref()
    }

    /// Observe one training-eligible access. Records the transition from
    /// the previous address on the same trail, subject to the insertion
    /// mode, then advances the trail.
    pub fn train(&mut self, pc: u64, line_addr: u64) {
        let hint = self.hints.hint_for(pc);
        if matches!(self.cfg.insertion_mode, InsertionMode::ProphetHints) && !hint.insert {
            // Discarded entirely: the trail does not advance, so a hinted-out
            // PC leaves no trace in training state at all.
            return;
        }
        let prev = match self.cfg.training_scope {
            TrainingScope::PerPc => self.last_by_pc.insert(pc, line_addr),
            TrainingScope::Global => self.last_global.replace(line_addr),
        };
        let Some(prev) = prev else { return };
        let priority = match self.cfg.insertion_mode {
            InsertionMode::ProphetHints => hint.priority,
            InsertionMode::NoFilter => 3,
            InsertionMode::PatternConfBaseline => {
                // Confidence feedback compares the stored successor of the
                // previous address against what actually came next, then the
                // updated counter gates this insertion.
                let conf = self.conf.entry(pc).or_insert(CONF_INIT);
                match self.table.peek(prev) {
                    Some(predicted) if predicted == line_addr => *conf = (*conf + 1).min(CONF_MAX),
                    Some(_) => *conf = conf.saturating_sub(1),
                    None => {}
                }
                if *conf < CONF_THRESHOLD {
                    return;
                }
                3
            }
        };
        match self.table.insert(prev, line_addr, priority) {
            InsertOutcome::Displaced(v) | InsertOutcome::Evicted(v) => {
                if let Some(vb) = &mut self.vb {
                    vb.insert(&v);
                }
            }
            InsertOutcome::NewEntry | InsertOutcome::Refreshed => {}
        }
    }

    /// Produce prefetch targets for a demand access: walk the recorded
    /// chain up to `degree` steps, consulting the victim buffer at each
    /// step. The trigger itself and already-emitted targets are never
    /// repeated; the walk stops at a table miss or a revisit.
    pub fn on_demand(&mut self, line_addr: u64) -> Vec<u64> {
        let mut targets = Vec::new();
        let mut cur = line_addr;
        for _ in 0..self.cfg.degree {
            let primary = self.table.lookup(cur);
            let mut next = None;
            if let Some(t) = primary {
                if t != line_addr && !targets.contains(&t) {
                    targets.push(t);
                    next = Some(t);
                }
            }
            if let Some(vb) = &mut self.vb {
                for c in vb.lookup(cur, primary) {
                    if c != line_addr && !targets.contains(&c) {
                        targets.push(c);
                    }
                }
            }
            match next {
                Some(t) => cur = t,
                None => break,
            }
        }
        targets
    }

    /// Account one prefetch fill attempt for `pc`. Redundant fills still
    /// count as issued, so duplicate prefetching costs accuracy.
    pub fn record_issue(&mut self, pc: u64, outcome: FillOutcome) {
        let s = self.stats.entry(pc).or_default();
        s.issued += 1;
        self.issued_total += 1;
        if matches!(outcome, FillOutcome::Inserted) {
            self.inserted_fills += 1;
        }
    }

    /// A demand access consumed a line prefetched on behalf of `pc`. The
    /// cache model guarantees at most one consumption per filled line.
    pub fn record_useful(&mut self, pc: u64) {
        self.stats.entry(pc).or_default().useful += 1;
        self.useful_total += 1;
    }

    pub fn pc_stats(&self, pc: u64) -> PcStats {
        self.stats.get(&pc).copied().unwrap_or_default()
    }

    /// All per-PC tallies in ascending PC order.
    pub fn stats_sorted(&self) -> Vec<(u64, PcStats)> {
        let mut v: Vec<_> = self.stats.iter().map(|(&pc, &s)| (pc, s)).collect();
        v.sort_by_key(|&(pc, _)| pc);
        v
    }

    pub fn issued_total(&self) -> u64 {
        self.issued_total
    }

    pub fn useful_total(&self) -> u64 {
        self.useful_total
    }

    /// Fills that actually brought a new line in; redundant attempts are
    /// excluded so this can feed a memory-traffic estimate.
    pub fn inserted_fills(&self) -> u64 {
        self.inserted_fills
    }

    pub fn accuracy(&self, pc: u64) -> Option<f64> {
        let s = self.pc_stats(pc);
        (s.issued > 0).then(|| s.useful as f64 / s.issued as f64)
    }
}
