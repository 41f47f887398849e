//! Cross-input learning: a persistent store that folds counter files from
//! different program inputs into one body of evidence.
//!
//! Accuracies (and miss counts) merge by a stepped running average whose
//! divisor grows with the loop count up to a cap, so frequently observed
//! values dominate but the store never stops adapting entirely. Allocated
//! entries merge by max: the table must fit the hungriest input seen.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::profiler::CounterFile;

pub const STORE_MAGIC: &str = "PRFSTO01";
pub const DEFAULT_CAP_L: u64 = 8;

/// One step of the capped running average. `l` is how many merges the old
/// value has already absorbed.
pub fn merge_pc(old: Option<f64>, new: f64, l: u64, cap_l: u64) -> f64 {
    match old {
        None => new,
        Some(o) => o + (new - o) / ((l + 1).min(cap_l) as f64),
    }
}

/// Peak-demand merge for allocated entries.
pub fn merge_app(old: u64, new: u64) -> u64 {
    old.max(new)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcMerged {
    pub acc: f64,
    /// Kept as a float between merges; persisted rounded to whole misses.
    pub misses: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CounterStore {
    pub per_pc: BTreeMap<u64, PcMerged>,
    pub allocated: u64,
    /// Completed learn calls.
    pub loop_l: u64,
    pub cap_l: u64,
}

impl CounterStore {
    pub fn new(cap_l: u64) -> Result<Self> {
        if cap_l == 0 {
            return Err(Error::Config { msg: "cap_L must be at least 1".into() });
        }
        Ok(CounterStore { per_pc: BTreeMap::new(), allocated: 0, loop_l: 0, cap_l })
    }

    /// Fold one counter file in. PCs absent from the new counters are
    /// retained untouched; new PCs enter at their observed values.
    pub fn learn(&mut self, cf: &CounterFile) {
        let l = self.loop_l;
        for c in &cf.pcs {
            let acc_new = if c.issued == 0 { 0.0 } else { c.useful as f64 / c.issued as f64 };
            let misses_new = c.demand_misses as f64;
            self.per_pc
                .entry(c.pc)
                .and_modify(|m| {
                    m.acc = merge_pc(Some(m.acc), acc_new, l, self.cap_l);
                    m.misses = merge_pc(Some(m.misses), misses_new, l, self.cap_l);
                })
                .or_insert(PcMerged { acc: acc_new, misses: misses_new });
        }
        self.allocated = merge_app(self.allocated, cf.app.allocated_entries_end);
        self.loop_l += 1;
    }

    pub fn load(path: &Path) -> Result<Self> {
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&content, path)
    }

    pub fn parse(content: &str, path: &Path) -> Result<Self> {
        let mut lines = content.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim_end() == STORE_MAGIC => {}
            other => {
                return Err(Error::BadMagic {
                    path: path.into(),
                    expected: STORE_MAGIC.into(),
                    found: other.map(|(_, l)| l.to_string()).unwrap_or_default(),
                })
            }
        }
        let mut store = CounterStore { per_pc: BTreeMap::new(), allocated: 0, loop_l: 0, cap_l: 0 };
        let mut seen = [false; 3];
        for (idx, raw) in lines {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("meta.") {
                let (key, value) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::parse(path, lineno, "meta line missing '='"))?;
                let n: u64 = value
                    .parse()
                    .map_err(|e| Error::parse(path, lineno, format!("meta.{key} {value:?}: {e}")))?;
                match key {
                    "loop_l" => (store.loop_l, seen[0]) = (n, true),
                    "cap_L" => (store.cap_l, seen[1]) = (n, true),
                    other => {
                        return Err(Error::parse(path, lineno, format!("unknown meta field {other:?}")))
                    }
                }
            } else if let Some(value) = line.strip_prefix("app.allocated=") {
                store.allocated = value
                    .parse()
                    .map_err(|e| Error::parse(path, lineno, format!("app.allocated {value:?}: {e}")))?;
                seen[2] = true;
            } else if line.starts_with("pc=") {
                let mut pc = None;
                let mut acc = None;
                let mut misses = None;
                for field in line.split_whitespace() {
                    let (key, value) = field
                        .split_once('=')
                        .ok_or_else(|| Error::parse(path, lineno, format!("malformed field {field:?}")))?;
                    match key {
                        "pc" => {
                            let digits = value.strip_prefix("0x").ok_or_else(|| {
                                Error::parse(path, lineno, format!("pc {value:?} missing 0x prefix"))
                            })?;
                            pc = Some(u64::from_str_radix(digits, 16).map_err(|e| {
                                Error::parse(path, lineno, format!("pc {value:?}: {e}"))
                            })?);
                        }
                        "acc" => {
                            let a: f64 = value.parse().map_err(|e| {
                                Error::parse(path, lineno, format!("acc {value:?}: {e}"))
                            })?;
                            if !(0.0..=1.0).contains(&a) {
                                return Err(Error::parse(path, lineno, format!("acc {a} outside [0, 1]")));
                            }
                            acc = Some(a);
                        }
                        "misses" => {
                            let m: u64 = value.parse().map_err(|e| {
                                Error::parse(path, lineno, format!("misses {value:?}: {e}"))
                            })?;
                            misses = Some(m as f64);
                        }
                        other => {
                            return Err(Error::parse(path, lineno, format!("unknown field {other:?}")))
                        }
                    }
                }
                let (pc, acc, misses) = match (pc, acc, misses) {
                    (Some(a), Some(b), Some(c)) => (a, b, c),
                    _ => return Err(Error::parse(path, lineno, "pc line needs pc=, acc=, misses=")),
                };
                if store.per_pc.insert(pc, PcMerged { acc, misses }).is_some() {
                    return Err(Error::DuplicatePc { path: path.into(), line: lineno, pc });
                }
            } else {
                return Err(Error::parse(path, lineno, format!("unrecognized line {line:?}")));
            }
        }
        if seen != [true; 3] {
            return Err(Error::parse(path, 0, "missing meta.loop_l/meta.cap_L/app.allocated"));
        }
        if store.cap_l == 0 {
            return Err(Error::parse(path, 0, "cap_L must be at least 1"));
        }
        Ok(store)
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{STORE_MAGIC}").unwrap();
        writeln!(out, "meta.loop_l={}", self.loop_l).unwrap();
        writeln!(out, "meta.cap_L={}", self.cap_l).unwrap();
        writeln!(out, "app.allocated={}", self.allocated).unwrap();
        for (pc, m) in &self.per_pc {
            writeln!(out, "pc=0x{:x} acc={:.9} misses={}", pc, m.acc, m.misses.round() as u64).unwrap();
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }
}
