//! Trace-driven simulation of one policy over one trace.
//!
//! Every simulation runs two passes: a prefetcher-off pass with the whole
//! cache given to data (the coverage denominator), then the requested
//! policy. Per-access order within a pass is fixed: demand lookup, then
//! trigger (against the pre-training table), then prefetch fills, then
//! training. That ordering is part of the model's definition; reference
//! calculations in the tests depend on it.

use std::collections::BTreeMap;

use crate::cache::{CacheConfig, DemandOutcome, Llc};
use crate::engine::{InsertionMode, Prefetcher, PrefetcherConfig};
use crate::error::{Error, Result};
use crate::hints::{HintBuffer, HintManifest};
use crate::table::{MetadataTable, ReplacementMode, TableConfig, REPL_STATE_BITS};
use crate::trace::{AccessKind, MemoryAccess};

pub const CSV_HEADER: &str =
    "run_id,policy,demand_accesses,demand_misses,issued,useful,coverage,accuracy,traffic_proxy";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    /// Prefetching off, all ways to data. Coverage denominator.
    NoPrefetch,
    /// Unfiltered temporal prefetching.
    NoFilter,
    /// Runtime confidence-counter insertion filter.
    PatternConf,
    /// Profile-guided: hints, priority replacement, victim buffer, CSR
    /// sizing from the manifest.
    Prophet,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::NoPrefetch => "nopf",
            Policy::NoFilter => "nofilter",
            Policy::PatternConf => "patternconf",
            Policy::Prophet => "prophet",
        }
    }

    pub fn parse(s: &str) -> Result<Policy> {
        match s {
            "nopf" => Ok(Policy::NoPrefetch),
            "nofilter" => Ok(Policy::NoFilter),
            "patternconf" => Ok(Policy::PatternConf),
            "prophet" => Ok(Policy::Prophet),
            other => Err(Error::Config {
                msg: format!("unknown policy {other:?} (expected nopf, nofilter, patternconf, prophet)"),
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub run_id: String,
    /// Recorded in the report; the simulation itself is deterministic.
    pub seed: u64,
    pub cache: CacheConfig,
    pub engine: PrefetcherConfig,
    pub policy: Policy,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            run_id: "run".into(),
            seed: 0,
            cache: CacheConfig::default_llc(),
            engine: PrefetcherConfig::default(),
            policy: Policy::NoPrefetch,
        }
    }
}

/// Hardware cost of every added structure, in bits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StorageBits {
    pub metadata_payload: u64,
    pub metadata_repl_state: u64,
    pub hint_buffer: u64,
    pub victim_buffer: u64,
}

impl StorageBits {
    pub fn total(&self) -> u64 {
        self.metadata_payload + self.metadata_repl_state + self.hint_buffer + self.victim_buffer
    }
}

#[derive(Debug, Clone)]
pub struct SimReport {
    pub run_id: String,
    pub policy: String,
    pub demand_accesses: u64,
    pub demand_misses: u64,
    pub issued: u64,
    pub useful: u64,
    /// Demand misses of the prefetcher-off pass on the same trace.
    pub baseline_misses: u64,
    /// (baseline_misses - demand_misses) / baseline_misses.
    pub coverage: f64,
    /// useful / issued, 0 when nothing was issued.
    pub accuracy: f64,
    /// Demand misses plus prefetch fills that brought a line in.
    pub traffic_proxy: u64,
    pub storage: StorageBits,
}

impl SimReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{:.6},{:.6},{}",
            self.run_id,
            self.policy,
            self.demand_accesses,
            self.demand_misses,
            self.issued,
            self.useful,
            self.coverage,
            self.accuracy,
            self.traffic_proxy
        )
    }
}

/// Aggregate outcome of one pass over a trace.
#[derive(Debug, Clone, Default)]
pub struct RunTotals {
    pub demand_accesses: u64,
    pub demand_misses: u64,
    pub miss_by_pc: BTreeMap<u64, u64>,
}

/// Drive one trace through a cache and an optional engine. L1-originated
/// fill records train the engine and occupy data ways but are neither
/// demand accesses nor prefetch triggers.
pub fn run_trace(llc: &mut Llc, mut engine: Option<&mut Prefetcher>, trace: &[MemoryAccess]) -> RunTotals {
    let mut totals = RunTotals::default();
    for access in trace {
        match access.kind {
            AccessKind::Demand => {
                totals.demand_accesses += 1;
                match llc.demand_access(access.line_addr) {
                    DemandOutcome::Hit => {}
                    DemandOutcome::HitOnPrefetch(issuer) => {
                        if let Some(e) = engine.as_deref_mut() {
                            e.record_useful(issuer);
                        }
                    }
                    DemandOutcome::Miss => {
                        totals.demand_misses += 1;
                        *totals.miss_by_pc.entry(access.pc).or_default() += 1;
                    }
                }
                if let Some(e) = engine.as_deref_mut() {
                    for target in e.on_demand(access.line_addr) {
                        let outcome = llc.prefetch_fill(target, access.pc);
                        e.record_issue(access.pc, outcome);
                    }
                    e.train(access.pc, access.line_addr);
                }
            }
            AccessKind::L1PrefetchFill => {
                if let Some(e) = engine.as_deref_mut() {
                    e.train(access.pc, access.line_addr);
                }
                llc.plain_fill(access.line_addr);
            }
        }
    }
    totals
}

/// Resolved per-policy settings for the measured pass.
struct PolicyPlan {
    metadata_ways: u32,
    engine_cfg: Option<PrefetcherConfig>,
    hints: HintBuffer,
}

fn plan_policy(cfg: &SimConfig, manifest: Option<&HintManifest>) -> Result<PolicyPlan> {
    let off = |mw| PolicyPlan { metadata_ways: mw, engine_cfg: None, hints: HintBuffer::empty() };
    let plan = match cfg.policy {
        Policy::NoPrefetch => off(0),
        Policy::NoFilter => PolicyPlan {
            metadata_ways: cfg.cache.metadata_ways,
            engine_cfg: Some(PrefetcherConfig {
                insertion_mode: InsertionMode::NoFilter,
                ..cfg.engine.clone()
            }),
            hints: HintBuffer::empty(),
        },
        Policy::PatternConf => PolicyPlan {
            metadata_ways: cfg.cache.metadata_ways,
            engine_cfg: Some(PrefetcherConfig {
                insertion_mode: InsertionMode::PatternConfBaseline,
                ..cfg.engine.clone()
            }),
            hints: HintBuffer::empty(),
        },
        Policy::Prophet => {
            let manifest = manifest.ok_or_else(|| Error::Config {
                msg: "prophet policy requires a hint manifest".into(),
            })?;
            if !manifest.csr.prophet_enabled {
                return Ok(off(0));
            }
            let metadata_ways = if manifest.csr.resizing_from_profile {
                manifest.csr.metadata_ways
            } else {
                cfg.cache.metadata_ways
            };
            if metadata_ways == 0 {
                return Ok(off(0));
            }
            let insertion_mode = if manifest.csr.insertion_policy_enabled {
                InsertionMode::ProphetHints
            } else {
                InsertionMode::NoFilter
            };
            PolicyPlan {
                metadata_ways,
                engine_cfg: Some(PrefetcherConfig {
                    insertion_mode,
                    replacement_mode: ReplacementMode::PriorityLru,
                    ..cfg.engine.clone()
                }),
                hints: HintBuffer::from_manifest(manifest)?,
            }
        }
    };
    if plan.engine_cfg.is_some() {
        let mw = plan.metadata_ways;
        if mw == 0 || mw >= cfg.cache.ways {
            return Err(Error::Config {
                msg: format!(
                    "metadata_ways {mw} leaves no room for both partitions in a {}-way cache",
                    cfg.cache.ways
                ),
            });
        }
    }
    Ok(plan)
}

fn storage_for(plan: &PolicyPlan, cfg: &SimConfig) -> StorageBits {
    let Some(engine_cfg) = &plan.engine_cfg else { return StorageBits::default() };
    let capacity = cfg.cache.sets() * plan.metadata_ways as u64 * 12;
    let lines = capacity / 12;
    let vb_bits = if engine_cfg.clone().normalized().victim_buffer_enabled {
        engine_cfg.victim.storage_bits()
    } else {
        0
    };
    let hint_bits = if plan.hints.is_empty() { 0 } else { HintBuffer::storage_bits() };
    StorageBits {
        metadata_payload: lines * cfg.cache.line_size as u64 * 8,
        metadata_repl_state: capacity * REPL_STATE_BITS,
        hint_buffer: hint_bits,
        victim_buffer: vb_bits,
    }
}

/// Per-PC accounting from the measured pass, one row per PC that issued
/// a prefetch or took a demand miss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcReportRow {
    pub pc: u64,
    pub issued: u64,
    pub useful: u64,
    pub demand_misses: u64,
}

pub const PER_PC_HEADER: &str = "pc,issued,useful,demand_misses";

impl PcReportRow {
    pub fn csv_row(&self) -> String {
        format!("{:#x},{},{},{}", self.pc, self.issued, self.useful, self.demand_misses)
    }
}

/// Run the baseline pass and the measured pass, and assemble the report.
pub fn simulate(cfg: &SimConfig, trace: &[MemoryAccess], manifest: Option<&HintManifest>) -> Result<SimReport> {
    simulate_detailed(cfg, trace, manifest).map(|(report, _)| report)
}

/// As `simulate`, also returning the measured pass's per-PC breakdown in
/// ascending PC order.
pub fn simulate_detailed(
    cfg: &SimConfig,
    trace: &[MemoryAccess],
    manifest: Option<&HintManifest>,
) -> Result<(SimReport, Vec<PcReportRow>)> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    cfg.cache.validate()?;
    let plan = plan_policy(cfg, manifest)?;

    let mut base_cache = Llc::new(CacheConfig { metadata_ways: 0, ..cfg.cache })?;
    let baseline = run_trace(&mut base_cache, None, trace);

    let (totals, issued, useful, inserted_fills, mut per_pc) = match &plan.engine_cfg {
        None => (baseline.clone(), 0, 0, 0, BTreeMap::new()),
        Some(engine_cfg) => {
            let mut llc = Llc::new(CacheConfig { metadata_ways: plan.metadata_ways, ..cfg.cache })?;
            let table_cfg = TableConfig::from_partition(
                cfg.cache.sets(),
                plan.metadata_ways,
                engine_cfg.replacement_mode,
            );
            let table = MetadataTable::packed(table_cfg)?;
            let mut engine = Prefetcher::new(engine_cfg.clone(), table, plan.hints.clone())?;
            let totals = run_trace(&mut llc, Some(&mut engine), trace);
            let per_pc: BTreeMap<u64, PcReportRow> = engine
                .stats_sorted()
                .into_iter()
                .map(|(pc, s)| {
                    (pc, PcReportRow { pc, issued: s.issued, useful: s.useful, demand_misses: 0 })
                })
                .collect();
            (totals, engine.issued_total(), engine.useful_total(), engine.inserted_fills(), per_pc)
        }
    };
    for (&pc, &misses) in &totals.miss_by_pc {
        per_pc
            .entry(pc)
            .or_insert(PcReportRow { pc, issued: 0, useful: 0, demand_misses: 0 })
            .demand_misses = misses;
    }

    let coverage = if plan.engine_cfg.is_none() {
        0.0
    } else if baseline.demand_misses == 0 {
        0.0
    } else {
        (baseline.demand_misses as f64 - totals.demand_misses as f64) / baseline.demand_misses as f64
    };
    let accuracy = if issued == 0 { 0.0 } else { useful as f64 / issued as f64 };
    let report = SimReport {
        run_id: cfg.run_id.clone(),
        policy: cfg.policy.name().into(),
        demand_accesses: totals.demand_accesses,
        demand_misses: totals.demand_misses,
        issued,
        useful,
        baseline_misses: baseline.demand_misses,
        coverage,
        accuracy,
        traffic_proxy: totals.demand_misses + inserted_fills,
        storage: storage_for(&plan, cfg),
    };
    Ok((report, per_pc.into_values().collect()))
}
