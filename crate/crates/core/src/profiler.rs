//! Counter collection.
//!
//! Runs a trace through the profiling configuration of the prefetcher
//! (no insertion filter, LRU metadata, degree 1, no victim buffer, full
//! 196,608-entry table) and reports per-PC issued/useful/miss counts plus
//! application-level insertion, replacement, and occupancy totals. The
//! two prefetch events can be subsampled the way a hardware event counter
//! would; misses and application totals are always exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cache::{CacheConfig, Llc};
use crate::engine::{Prefetcher, PrefetcherConfig};
use crate::error::{Error, Result};
use crate::hints::HintBuffer;
use crate::sim::run_trace;
use crate::table::{MetadataTable, TableConfig, MAX_TABLE_ENTRIES};
use crate::trace::MemoryAccess;

pub const COUNTER_MAGIC: &str = "PRFCNT01";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PcCounters {
    pub pc: u64,
    pub issued: u64,
    pub useful: u64,
    pub demand_misses: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AppCounters {
    pub insertions: u64,
    pub replacements: u64,
    /// End-of-run occupancy; always insertions - replacements.
    pub allocated_entries_end: u64,
    /// Which learning iteration this file belongs to; 0 for a raw profile.
    pub loop_index_l: u64,
}

/// How the two prefetch events are subsampled. Every-kth is the default:
/// deterministic and reproducible. The randomized variant keeps each event
/// with probability 1/period instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    EveryKth { period: u64 },
    Randomized { period: u64, seed: u64 },
}

impl Sampling {
    pub fn exact() -> Self {
        Sampling::EveryKth { period: 1 }
    }

    fn period(&self) -> u64 {
        match *self {
            Sampling::EveryKth { period } | Sampling::Randomized { period, .. } => period,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterFile {
    pub app: AppCounters,
    /// Ascending by PC; no duplicates.
    pub pcs: Vec<PcCounters>,
}

/// Metadata ways for the profiling table: as many as it takes to reach the
/// full entry budget, leaving at least one data way.
pub fn profiling_metadata_ways(cache: &CacheConfig) -> u32 {
    let per_way = cache.sets() * 12;
    let ways = (MAX_TABLE_ENTRIES / per_way) as u32;
    ways.clamp(1, cache.ways.saturating_sub(1))
}

pub fn profile(trace: &[MemoryAccess], cache: &CacheConfig, sampling: Sampling) -> Result<CounterFile> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    cache.validate()?;
    if cache.ways < 2 {
        return Err(Error::Config { msg: "profiling needs at least one way per partition".into() });
    }
    if sampling.period() == 0 {
        return Err(Error::Config { msg: "sample period must be at least 1".into() });
    }

    let metadata_ways = profiling_metadata_ways(cache);
    let mut llc = Llc::new(CacheConfig { metadata_ways, ..*cache })?;
    let engine_cfg = PrefetcherConfig { simplified_mode: true, ..PrefetcherConfig::default() };
    let table_cfg = TableConfig::from_partition(
        cache.sets(),
        metadata_ways,
        engine_cfg.clone().normalized().replacement_mode,
    );
    let mut engine = Prefetcher::new(engine_cfg, MetadataTable::packed(table_cfg)?, HintBuffer::empty())?;
    let totals = run_trace(&mut llc, Some(&mut engine), trace);

    let mut by_pc: BTreeMap<u64, PcCounters> = BTreeMap::new();
    for (pc, s) in engine.stats_sorted() {
        by_pc.insert(pc, PcCounters { pc, issued: s.issued, useful: s.useful, demand_misses: 0 });
    }
    for (&pc, &misses) in &totals.miss_by_pc {
        by_pc
            .entry(pc)
            .or_insert(PcCounters { pc, issued: 0, useful: 0, demand_misses: 0 })
            .demand_misses = misses;
    }
    let mut rng = match sampling {
        Sampling::Randomized { seed, .. } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Sampling::EveryKth { .. } => None,
    };
    let pcs = by_pc
        .into_values()
        .map(|mut c| {
            c.issued = subsample(c.issued, sampling, rng.as_mut());
            c.useful = subsample(c.useful, sampling, rng.as_mut()).min(c.issued);
            c
        })
        .collect();

    let table = engine.table();
    let app = AppCounters {
        insertions: table.insertions(),
        replacements: table.replacements(),
        allocated_entries_end: table.occupancy(),
        loop_index_l: 0,
    };
    Ok(CounterFile { app, pcs })
}

fn subsample(exact: u64, sampling: Sampling, rng: Option<&mut ChaCha8Rng>) -> u64 {
    match sampling {
        Sampling::EveryKth { period: 1 } => exact,
        Sampling::EveryKth { period } => (exact / period) * period,
        Sampling::Randomized { period, .. } => {
            let rng = rng.expect("randomized sampling carries an rng");
            let p = 1.0 / period as f64;
            let kept = (0..exact).filter(|_| rng.gen::<f64>() < p).count() as u64;
            kept * period
        }
    }
}

/// PCs ranked by demand misses descending, ties by PC ascending, cut to k.
pub fn top_miss_pcs(pcs: &[PcCounters], k: usize) -> Vec<u64> {
    let mut ranked: Vec<&PcCounters> = pcs.iter().collect();
    ranked.sort_by(|a, b| b.demand_misses.cmp(&a.demand_misses).then(a.pc.cmp(&b.pc)));
    ranked.iter().take(k).map(|c| c.pc).collect()
}

impl CounterFile {
    pub fn load(path: &Path) -> Result<Self> {
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&content, path)
    }

    pub fn parse(content: &str, path: &Path) -> Result<Self> {
        let mut lines = content.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim_end() == COUNTER_MAGIC => {}
            other => {
                return Err(Error::BadMagic {
                    path: path.into(),
                    expected: COUNTER_MAGIC.into(),
                    found: other.map(|(_, l)| l.to_string()).unwrap_or_default(),
                })
            }
        }
        let mut app = AppCounters::default();
        let mut seen = [false; 4];
        let mut pcs: Vec<PcCounters> = Vec::new();
        for (idx, raw) in lines {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("app.") {
                let (key, value) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::parse(path, lineno, "app line missing '='"))?;
                let n: u64 = value
                    .parse()
                    .map_err(|e| Error::parse(path, lineno, format!("app.{key} {value:?}: {e}")))?;
                match key {
                    "insertions" => (app.insertions, seen[0]) = (n, true),
                    "replacements" => (app.replacements, seen[1]) = (n, true),
                    "allocated_end" => (app.allocated_entries_end, seen[2]) = (n, true),
                    "loop_l" => (app.loop_index_l, seen[3]) = (n, true),
                    other => {
                        return Err(Error::parse(path, lineno, format!("unknown app field {other:?}")))
                    }
                }
            } else if line.starts_with("pc=") {
                let mut c = PcCounters { pc: 0, issued: 0, useful: 0, demand_misses: 0 };
                let mut got = [false; 4];
                for field in line.split_whitespace() {
                    let (key, value) = field
                        .split_once('=')
                        .ok_or_else(|| Error::parse(path, lineno, format!("malformed field {field:?}")))?;
                    match key {
                        "pc" => {
                            let digits = value.strip_prefix("0x").ok_or_else(|| {
                                Error::parse(path, lineno, format!("pc {value:?} missing 0x prefix"))
                            })?;
                            c.pc = u64::from_str_radix(digits, 16).map_err(|e| {
                                Error::parse(path, lineno, format!("pc {value:?}: {e}"))
                            })?;
                            got[0] = true;
                        }
                        "issued" => (c.issued, got[1]) = (parse_count(path, lineno, key, value)?, true),
                        "useful" => (c.useful, got[2]) = (parse_count(path, lineno, key, value)?, true),
                        "misses" => {
                            (c.demand_misses, got[3]) = (parse_count(path, lineno, key, value)?, true)
                        }
                        other => {
                            return Err(Error::parse(path, lineno, format!("unknown field {other:?}")))
                        }
                    }
                }
                if got != [true; 4] {
                    return Err(Error::parse(path, lineno, "pc line needs pc=, issued=, useful=, misses="));
                }
                if c.useful > c.issued {
                    return Err(Error::parse(
                        path,
                        lineno,
                        format!("useful {} exceeds issued {}", c.useful, c.issued),
                    ));
                }
                if pcs.iter().any(|p| p.pc == c.pc) {
                    return Err(Error::DuplicatePc { path: path.into(), line: lineno, pc: c.pc });
                }
                pcs.push(c);
            } else {
                return Err(Error::parse(path, lineno, format!("unrecognized line {line:?}")));
            }
        }
        if seen != [true; 4] {
            return Err(Error::parse(path, 0, "missing app.insertions/replacements/allocated_end/loop_l"));
        }
        if app.insertions < app.replacements
            || app.allocated_entries_end != app.insertions - app.replacements
        {
            return Err(Error::parse(
                path,
                0,
                format!(
                    "allocated_end {} violates insertions {} - replacements {}",
                    app.allocated_entries_end, app.insertions, app.replacements
                ),
            ));
        }
        pcs.sort_by_key(|c| c.pc);
        Ok(CounterFile { app, pcs })
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{COUNTER_MAGIC}").unwrap();
        writeln!(out, "app.insertions={}", self.app.insertions).unwrap();
        writeln!(out, "app.replacements={}", self.app.replacements).unwrap();
        writeln!(out, "app.allocated_end={}", self.app.allocated_entries_end).unwrap();
        writeln!(out, "app.loop_l={}", self.app.loop_index_l).unwrap();
        let mut pcs: Vec<&PcCounters> = self.pcs.iter().collect();
        pcs.sort_by_key(|c| c.pc);
        for c in pcs {
            writeln!(out, "pc=0x{:x} issued={} useful={} misses={}", c.pc, c.issued, c.useful, c.demand_misses)
                .unwrap();
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }
}

fn parse_count(path: &Path, lineno: usize, key: &str, value: &str) -> Result<u64> {
    value
        .parse()
        .map_err(|e| Error::parse(path, lineno, format!("{key} {value:?}: {e}")))
}
