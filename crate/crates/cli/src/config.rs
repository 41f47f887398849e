//! key=value configuration overlay. A config file carries the same fields
//! as the library config structs, prefixed by section; every line is
//! `section.field=value`, `#` starts a comment. Command-line flags are
//! applied after the file, so they always win.

use std::fs;
use std::path::Path;

use prophet_core::analysis::AnalysisParams;
use prophet_core::cache::CacheConfig;
use prophet_core::engine::{InsertionMode, PrefetcherConfig, TrainingScope};
use prophet_core::table::ReplacementMode;
use prophet_core::trace::{TracePattern, TraceSpec};
use prophet_core::{Error, Result};

/// Every tunable the pipeline reads, at default values until a config
/// file or a flag overrides them.
#[derive(Debug, Clone)]
pub struct Settings {
    pub cache: CacheConfig,
    pub engine: PrefetcherConfig,
    pub analysis: AnalysisParams,
    pub trace: TraceSpec,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            cache: CacheConfig::default_llc(),
            engine: PrefetcherConfig::default(),
            analysis: AnalysisParams::default(),
            trace: TraceSpec::default(),
        }
    }
}

impl Settings {
    pub fn load(path: &Path) -> Result<Settings> {
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut settings = Settings::default();
        for (idx, raw) in content.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::parse(path, idx + 1, "expected key=value"));
            };
            settings
                .apply(key.trim(), value.trim())
                .map_err(|msg| Error::parse(path, idx + 1, msg))?;
        }
        Ok(settings)
    }

    fn apply(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "cache.total_size" => self.cache.total_size = int(value)?,
            "cache.ways" => self.cache.ways = int(value)?,
            "cache.line_size" => self.cache.line_size = int(value)?,
            "cache.metadata_ways" => self.cache.metadata_ways = int(value)?,

            "engine.degree" => self.engine.degree = int(value)?,
            "engine.insertion_mode" => self.engine.insertion_mode = insertion_mode(value)?,
            "engine.replacement_mode" => self.engine.replacement_mode = replacement_mode(value)?,
            "engine.victim_buffer_enabled" => self.engine.victim_buffer_enabled = flag(value)?,
            "engine.training_scope" => self.engine.training_scope = training_scope(value)?,
            "engine.simplified_mode" => self.engine.simplified_mode = flag(value)?,
            "engine.victim.entries" => self.engine.victim.entries = int(value)?,
            "engine.victim.ways" => self.engine.victim.ways = int(value)?,
            "engine.victim.candidates_per_entry" => {
                self.engine.victim.candidates_per_entry = int(value)?
            }

            "analysis.el_acc" => self.analysis.el_acc = float(value)?,
            "analysis.n_bits" => self.analysis.n_bits = int(value)?,
            "analysis.llc_sets" => self.analysis.llc_sets = int(value)?,
            "analysis.max_table_entries" => self.analysis.max_table_entries = int(value)?,
            "analysis.top_k" => self.analysis.top_k = int(value)?,

            "trace.pattern" => self.trace.pattern = pattern(value)?,
            "trace.unique_addrs" => self.trace.unique_addrs = int(value)?,
            "trace.repetitions" => self.trace.repetitions = int(value)?,
            "trace.noise_ratio" => self.trace.noise_ratio = float(value)?,
            "trace.seed" => self.trace.seed = int(value)?,
            "trace.l1_stride_prepass" => self.trace.l1_stride_prepass = flag(value)?,
            "trace.target_fanout_dist" => self.trace.target_fanout_dist = fanout(value)?,

            other => return Err(format!("unknown config key {other:?}")),
        }
        Ok(())
    }
}

fn int<T: std::str::FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("invalid integer {value:?}"))
}

fn float(value: &str) -> std::result::Result<f64, String> {
    value.parse().map_err(|_| format!("invalid number {value:?}"))
}

fn flag(value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => Err(format!("invalid flag {other:?} (expected true or false)")),
    }
}

pub fn pattern(value: &str) -> std::result::Result<TracePattern, String> {
    Ok(match value {
        "temporal-loop" => TracePattern::TemporalLoop,
        "interleaved-noise" => TracePattern::InterleavedNoise,
        "multi-target" => TracePattern::MultiTarget,
        "pointer-chase" => TracePattern::PointerChase,
        "strided-kernel" => TracePattern::StridedKernel,
        "mixed" => TracePattern::Mixed,
        other => {
            return Err(format!(
                "unknown pattern {other:?} (expected temporal-loop, interleaved-noise, \
                 multi-target, pointer-chase, strided-kernel, mixed)"
            ))
        }
    })
}

pub fn insertion_mode(value: &str) -> std::result::Result<InsertionMode, String> {
    Ok(match value {
        "prophet-hints" => InsertionMode::ProphetHints,
        "no-filter" => InsertionMode::NoFilter,
        "patternconf" => InsertionMode::PatternConfBaseline,
        other => {
            return Err(format!(
                "unknown insertion mode {other:?} (expected prophet-hints, no-filter, patternconf)"
            ))
        }
    })
}

pub fn replacement_mode(value: &str) -> std::result::Result<ReplacementMode, String> {
    Ok(match value {
        "priority-lru" => ReplacementMode::PriorityLru,
        "srrip" => ReplacementMode::Srrip,
        "lru" => ReplacementMode::Lru,
        other => {
            return Err(format!(
                "unknown replacement mode {other:?} (expected priority-lru, srrip, lru)"
            ))
        }
    })
}

pub fn training_scope(value: &str) -> std::result::Result<TrainingScope, String> {
    Ok(match value {
        "per-pc" => TrainingScope::PerPc,
        "global" => TrainingScope::Global,
        other => return Err(format!("unknown training scope {other:?} (expected per-pc, global)")),
    })
}

/// `fanout:probability` pairs joined with commas, e.g.
/// `1:0.5485,2:0.2088,3:0.0971,4:0.1456`.
fn fanout(value: &str) -> std::result::Result<Vec<(u32, f64)>, String> {
    value
        .split(',')
        .map(|pair| {
            let (k, p) = pair
                .split_once(':')
                .ok_or_else(|| format!("invalid fanout pair {pair:?} (expected fanout:prob)"))?;
            Ok((int(k.trim())?, float(p.trim())?))
        })
        .collect()
}
