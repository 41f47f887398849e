//! Per-PC insertion hints and pipeline control state.
//!
//! A hint is 12 bits: a 9-bit PC tag plus an insert bit and a 2-bit
//! priority. The on-chip buffer holds 128 of them (192 bytes); PCs that
//! collide on the 9-bit tag simply share a hint, and PCs with no hint fall
//! back to inserting at top priority, which makes an empty buffer behave
//! exactly like unfiltered training.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const HINT_MAGIC: &str = "PRFHNT01";
pub const HINT_CAPACITY: usize = 128;
pub const HINT_ENTRY_BITS: u64 = 12;
const TAG_SLOTS: usize = 512;

pub fn pc_tag(pc: u64) -> u16 {
    ((pc >> 2) & 0x1ff) as u16
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hint {
    pub insert: bool,
    /// Metadata insertion priority; meaningful only when `insert` is set.
    pub priority: u8,
}

/// What an unhinted PC gets: insert at the highest priority.
pub const DEFAULT_HINT: Hint = Hint { insert: true, priority: 3 };

/// Control-register block carried in a hint manifest. When
/// `prophet_enabled` is clear the prefetcher sits out the run entirely;
/// profile-guided insertion and resizing replace any runtime policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsrState {
    pub prophet_enabled: bool,
    pub metadata_ways: u32,
    pub insertion_policy_enabled: bool,
    pub resizing_from_profile: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HintManifest {
    pub csr: CsrState,
    /// `(pc, hint)` in ranking order; at most `HINT_CAPACITY` entries.
    pub entries: Vec<(u64, Hint)>,
}

impl HintManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&content, path)
    }

    pub fn parse(content: &str, path: &Path) -> Result<Self> {
        let mut lines = content.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim_end() == HINT_MAGIC => {}
            other => {
                return Err(Error::BadMagic {
                    path: path.into(),
                    expected: HINT_MAGIC.into(),
                    found: other.map(|(_, l)| l.to_string()).unwrap_or_default(),
                })
            }
        }
        let mut csr = CsrState::default();
        let mut entries: Vec<(u64, Hint)> = Vec::new();
        for (idx, raw) in lines {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("csr.") {
                let (key, value) = rest
                    .split_once('=')
                    .ok_or_else(|| Error::parse(path, lineno, "csr line missing '='"))?;
                match key {
                    "prophet_enabled" => csr.prophet_enabled = parse_bit(path, lineno, value)?,
                    "insertion_policy_enabled" => {
                        csr.insertion_policy_enabled = parse_bit(path, lineno, value)?
                    }
                    "resizing_from_profile" => {
                        csr.resizing_from_profile = parse_bit(path, lineno, value)?
                    }
                    "metadata_ways" => {
                        csr.metadata_ways = value.parse().map_err(|e| {
                            Error::parse(path, lineno, format!("metadata_ways {value:?}: {e}"))
                        })?
                    }
                    other => {
                        return Err(Error::parse(path, lineno, format!("unknown csr field {other:?}")))
                    }
                }
            } else if line.starts_with("pc=") {
                let mut pc = None;
                let mut insert = None;
                let mut prio = None;
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
                        "insert" => insert = Some(parse_bit(path, lineno, value)?),
                        "prio" => {
                            let p: u8 = value.parse().map_err(|e| {
                                Error::parse(path, lineno, format!("prio {value:?}: {e}"))
                            })?;
                            if p > 3 {
                                return Err(Error::parse(path, lineno, format!("prio {p} outside 0..=3")));
                            }
                            prio = Some(p);
                        }
                        other => {
                            return Err(Error::parse(path, lineno, format!("unknown field {other:?}")))
                        }
                    }
                }
                let (pc, insert, prio) = match (pc, insert, prio) {
                    (Some(a), Some(b), Some(c)) => (a, b, c),
                    _ => return Err(Error::parse(path, lineno, "pc line needs pc=, insert=, prio=")),
                };
                if entries.iter().any(|(p, _)| *p == pc) {
                    return Err(Error::DuplicatePc { path: path.into(), line: lineno, pc });
                }
                if entries.len() == HINT_CAPACITY {
                    return Err(Error::HintCapacity { count: entries.len() + 1, cap: HINT_CAPACITY });
                }
                entries.push((pc, Hint { insert, priority: prio }));
            } else {
                return Err(Error::parse(path, lineno, format!("unrecognized line {line:?}")));
            }
        }
        Ok(HintManifest { csr, entries })
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{HINT_MAGIC}").unwrap();
        writeln!(out, "csr.prophet_enabled={}", self.csr.prophet_enabled as u8).unwrap();
        writeln!(out, "csr.insertion_policy_enabled={}", self.csr.insertion_policy_enabled as u8).unwrap();
        writeln!(out, "csr.resizing_from_profile={}", self.csr.resizing_from_profile as u8).unwrap();
        writeln!(out, "csr.metadata_ways={}", self.csr.metadata_ways).unwrap();
        for (pc, hint) in &self.entries {
            writeln!(out, "pc=0x{:x} insert={} prio={}", pc, hint.insert as u8, hint.priority).unwrap();
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_file_string()).map_err(|e| Error::io(path, e))
    }
}

fn parse_bit(path: &Path, lineno: usize, value: &str) -> Result<bool> {
    match value {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Error::parse(path, lineno, format!("expected 0 or 1, found {other:?}"))),
    }
}

/// Runtime hint store indexed by 9-bit PC tag. Later manifest entries win
/// tag collisions, mirroring hardware writes into the same slot.
#[derive(Debug, Clone)]
pub struct HintBuffer {
    slots: Box<[Option<Hint>; TAG_SLOTS]>,
    occupied: usize,
}

impl HintBuffer {
    pub fn empty() -> Self {
        HintBuffer { slots: Box::new([None; TAG_SLOTS]), occupied: 0 }
    }

    pub fn from_manifest(manifest: &HintManifest) -> Result<Self> {
        if manifest.entries.len() > HINT_CAPACITY {
            return Err(Error::HintCapacity { count: manifest.entries.len(), cap: HINT_CAPACITY });
        }
        let mut buf = Self::empty();
        for (pc, hint) in &manifest.entries {
            let slot = &mut buf.slots[pc_tag(*pc) as usize];
            if slot.is_none() {
                buf.occupied += 1;
            }
            *slot = Some(*hint);
        }
        Ok(buf)
    }

    pub fn hint_for(&self, pc: u64) -> Hint {
        self.slots[pc_tag(pc) as usize].unwrap_or(DEFAULT_HINT)
    }

    pub fn is_empty(&self) -> bool {
        self.occupied == 0
    }

    /// Hardware cost of the hint store itself.
    pub fn storage_bits() -> u64 {
        HINT_CAPACITY as u64 * HINT_ENTRY_BITS
    }
}
