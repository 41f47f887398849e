//! Memory-access traces: record types, binary/text serialization, and a
//! deterministic synthetic-trace generator.
//!
//! A trace is a flat sequence of `(pc, line_addr, kind)` records with no
//! timestamps; position in the sequence is the only notion of time. Line
//! addresses are cache-line granular and fit in 58 bits, which leaves the
//! compression scheme of the metadata table (10-bit tag + 31-bit target)
//! meaningful headroom to exercise.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const LINE_ADDR_BITS: u32 = 58;
pub const MAX_LINE_ADDR: u64 = (1 << LINE_ADDR_BITS) - 1;

/// First 8 bytes of every binary trace file.
pub const TRACE_MAGIC: &[u8; 8] = b"PRFTRC01";
/// Header line of every text trace file.
pub const TEXT_HEADER: &str = "pc,line_addr,kind";
const BINARY_RECORD_LEN: usize = 17;

// Fixed synthetic PCs, one per generated stream. Their 9-bit hint tags
// ((pc >> 2) & 0x1ff) are 1..=5, so they never collide in a hint buffer.
pub const TEMPORAL_PC: u64 = 0x40_0004;
pub const NOISE_PC: u64 = 0x40_0008;
pub const STRIDE_PC: u64 = 0x40_000c;
pub const CHASE_PC: u64 = 0x40_0010;
pub const MULTI_PC: u64 = 0x40_0014;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccessKind {
    /// Demand load/store reaching the simulated cache level.
    Demand,
    /// Fill issued by an upstream (L1) stride prefetcher. Trains correlation
    /// metadata but is never counted against demand-side statistics.
    L1PrefetchFill,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryAccess {
    pub pc: u64,
    pub line_addr: u64,
    pub kind: AccessKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Binary,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TracePattern {
    TemporalLoop,
    InterleavedNoise,
    MultiTarget,
    PointerChase,
    StridedKernel,
    Mixed,
}

/// Recipe for a synthetic trace. Identical specs always produce identical
/// traces; `seed` is the only entropy source.
#[derive(Debug, Clone)]
pub struct TraceSpec {
    pub pattern: TracePattern,
    pub unique_addrs: u64,
    pub repetitions: u64,
    /// Fraction of emitted accesses that come from the uniform-random noise
    /// stream (only meaningful for patterns that mix noise in).
    pub noise_ratio: f64,
    /// `(fanout, probability)` pairs for `MultiTarget`. Fanouts above 4 are
    /// rejected: per-address correlation storage tracks at most 4 targets.
    pub target_fanout_dist: Vec<(u32, f64)>,
    pub seed: u64,
    /// Run a degree-8 stride pre-pass over the generated demand stream and
    /// splice the resulting `L1PrefetchFill` records in.
    pub l1_stride_prepass: bool,
}

pub const MAX_FANOUT: u32 = 4;

/// Measured single/double/triple-target shares of real workloads; whatever
/// is left over is assigned fanout 4.
pub fn default_fanout_dist() -> Vec<(u32, f64)> {
    vec![(1, 0.5485), (2, 0.2088), (3, 0.0971), (4, 0.1456)]
}

impl Default for TraceSpec {
    fn default() -> Self {
        TraceSpec {
            pattern: TracePattern::TemporalLoop,
            unique_addrs: 1024,
            repetitions: 4,
            noise_ratio: 0.0,
            target_fanout_dist: default_fanout_dist(),
            seed: 1,
            l1_stride_prepass: false,
        }
    }
}

impl TraceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.unique_addrs == 0 {
            return Err(Error::Spec { msg: "unique_addrs must be at least 1".into() });
        }
        if self.unique_addrs > 1 << 30 {
            return Err(Error::Spec {
                msg: format!("unique_addrs {} exceeds the dense-region cap of 2^30", self.unique_addrs),
            });
        }
        if self.repetitions == 0 {
            return Err(Error::Spec { msg: "repetitions must be at least 1".into() });
        }
        if !(0.0..=1.0).contains(&self.noise_ratio) || !self.noise_ratio.is_finite() {
            return Err(Error::Spec {
                msg: format!("noise_ratio {} outside [0, 1]", self.noise_ratio),
            });
        }
        if self.target_fanout_dist.is_empty() {
            return Err(Error::Spec { msg: "target_fanout_dist is empty".into() });
        }
        let mut sum = 0.0;
        for &(fanout, p) in &self.target_fanout_dist {
            if fanout == 0 || fanout > MAX_FANOUT {
                return Err(Error::Spec {
                    msg: format!("fanout {fanout} unsupported, must be 1..={MAX_FANOUT}"),
                });
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Spec { msg: format!("fanout probability {p} outside [0, 1]") });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Spec {
                msg: format!("fanout probabilities sum to {sum}, expected 1 within 1e-9"),
            });
        }
        Ok(())
    }
}

/// Sniff a trace file's format from its first bytes.
pub fn detect_format(path: &Path) -> Result<TraceFormat> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() >= TRACE_MAGIC.len() && &bytes[..TRACE_MAGIC.len()] == TRACE_MAGIC {
        Ok(TraceFormat::Binary)
    } else {
        Ok(TraceFormat::Text)
    }
}

pub fn load_trace(path: &Path, format: TraceFormat) -> Result<Vec<MemoryAccess>> {
    match format {
        TraceFormat::Binary => load_binary(path),
        TraceFormat::Text => load_text(path),
    }
}

pub fn write_trace(path: &Path, format: TraceFormat, trace: &[MemoryAccess]) -> Result<()> {
    match format {
        TraceFormat::Binary => write_binary(path, trace),
        TraceFormat::Text => write_text(path, trace),
    }
}

fn load_binary(path: &Path) -> Result<Vec<MemoryAccess>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < TRACE_MAGIC.len() {
        return Err(Error::BadMagic {
            path: path.into(),
            expected: String::from_utf8_lossy(TRACE_MAGIC).into_owned(),
            found: String::from_utf8_lossy(&bytes).into_owned(),
        });
    }
    let (magic, body) = bytes.split_at(TRACE_MAGIC.len());
    if magic != TRACE_MAGIC {
        return Err(Error::BadMagic {
            path: path.into(),
            expected: String::from_utf8_lossy(TRACE_MAGIC).into_owned(),
            found: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    if body.len() % BINARY_RECORD_LEN != 0 {
        let full = body.len() / BINARY_RECORD_LEN;
        return Err(Error::Truncated {
            path: path.into(),
            offset: (TRACE_MAGIC.len() + full * BINARY_RECORD_LEN) as u64,
        });
    }
    let mut out = Vec::with_capacity(body.len() / BINARY_RECORD_LEN);
    for (i, rec) in body.chunks_exact(BINARY_RECORD_LEN).enumerate() {
        let pc = u64::from_le_bytes(rec[0..8].try_into().unwrap());
        let line_addr = u64::from_le_bytes(rec[8..16].try_into().unwrap());
        let offset = TRACE_MAGIC.len() + i * BINARY_RECORD_LEN;
        if line_addr > MAX_LINE_ADDR {
            return Err(Error::parse(
                path,
                i + 1,
                format!("line address 0x{line_addr:x} exceeds {LINE_ADDR_BITS} bits (record at byte offset {offset})"),
            ));
        }
        let kind = match rec[16] {
            0 => AccessKind::Demand,
            1 => AccessKind::L1PrefetchFill,
            b => {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("invalid kind byte 0x{b:02x} (record at byte offset {offset})"),
                ))
            }
        };
        out.push(MemoryAccess { pc, line_addr, kind });
    }
    Ok(out)
}

fn write_binary(path: &Path, trace: &[MemoryAccess]) -> Result<()> {
    let mut buf = Vec::with_capacity(TRACE_MAGIC.len() + trace.len() * BINARY_RECORD_LEN);
    buf.extend_from_slice(TRACE_MAGIC);
    for acc in trace {
        buf.extend_from_slice(&acc.pc.to_le_bytes());
        buf.extend_from_slice(&acc.line_addr.to_le_bytes());
        buf.push(match acc.kind {
            AccessKind::Demand => 0,
            AccessKind::L1PrefetchFill => 1,
        });
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn load_text(path: &Path) -> Result<Vec<MemoryAccess>> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == TEXT_HEADER => {}
        other => {
            return Err(Error::BadMagic {
                path: path.into(),
                expected: TEXT_HEADER.into(),
                found: other.map(|(_, l)| l.to_string()).unwrap_or_default(),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(path, lineno, format!("expected 3 fields, found {}", fields.len())));
        }
        let pc = parse_hex(path, lineno, fields[0], "pc")?;
        let line_addr = parse_hex(path, lineno, fields[1], "line_addr")?;
        if line_addr > MAX_LINE_ADDR {
            return Err(Error::parse(
                path,
                lineno,
                format!("line address 0x{line_addr:x} exceeds {LINE_ADDR_BITS} bits"),
            ));
        }
        let kind = match fields[2] {
            "D" => AccessKind::Demand,
            "P" => AccessKind::L1PrefetchFill,
            other => return Err(Error::parse(path, lineno, format!("invalid kind {other:?}, expected D or P"))),
        };
        out.push(MemoryAccess { pc, line_addr, kind });
    }
    Ok(out)
}

fn parse_hex(path: &Path, lineno: usize, field: &str, name: &str) -> Result<u64> {
    let digits = field
        .strip_prefix("0x")
        .ok_or_else(|| Error::parse(path, lineno, format!("{name} {field:?} missing 0x prefix")))?;
    u64::from_str_radix(digits, 16)
        .map_err(|e| Error::parse(path, lineno, format!("{name} {field:?}: {e}")))
}

fn write_text(path: &Path, trace: &[MemoryAccess]) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "{TEXT_HEADER}").unwrap();
    for acc in trace {
        let kind = match acc.kind {
            AccessKind::Demand => 'D',
            AccessKind::L1PrefetchFill => 'P',
        };
        writeln!(buf, "0x{:x},0x{:x},{}", acc.pc, acc.line_addr, kind).unwrap();
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Generate a synthetic trace. Deterministic: a given spec always yields the
/// same record sequence.
pub fn generate_trace(spec: &TraceSpec) -> Result<Vec<MemoryAccess>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut trace = match spec.pattern {
        TracePattern::TemporalLoop => gen_temporal_loop(spec, &mut rng),
        TracePattern::InterleavedNoise => gen_interleaved_noise(spec, &mut rng),
        TracePattern::MultiTarget => gen_multi_target(spec, &mut rng),
        TracePattern::PointerChase => gen_pointer_chase(spec, &mut rng),
        TracePattern::StridedKernel => gen_strided_kernel(spec, &mut rng),
        TracePattern::Mixed => gen_mixed(spec, &mut rng),
    };
    if spec.l1_stride_prepass {
        trace = stride_prepass(&trace);
    }
    Ok(trace)
}

/// Distinct line addresses for a structured working set: one dense region
/// low in the address space, visited in shuffled order. Correlated lines
/// sharing their high bits is what compressed 31-bit metadata targets rely
/// on, and a dense region cannot self-alias in a set-indexed table; the
/// shuffle keeps the sequence temporally irregular. Noise streams draw
/// from the full address space instead.
fn distinct_addrs(rng: &mut ChaCha8Rng, n: usize) -> Vec<u64> {
    let base = rng.gen_range(0..(1u64 << 31) - n as u64);
    let mut out: Vec<u64> = (0..n as u64).map(|i| base + i).collect();
    out.shuffle(rng);
    out
}

fn demand(pc: u64, line_addr: u64) -> MemoryAccess {
    MemoryAccess { pc, line_addr, kind: AccessKind::Demand }
}

fn gen_temporal_loop(spec: &TraceSpec, rng: &mut ChaCha8Rng) -> Vec<MemoryAccess> {
    let addrs = distinct_addrs(rng, spec.unique_addrs as usize);
    let mut out = Vec::with_capacity((spec.unique_addrs * spec.repetitions) as usize);
    for _ in 0..spec.repetitions {
        out.extend(addrs.iter().map(|&a| demand(TEMPORAL_PC, a)));
    }
    out
}

/// A temporal loop with uniform-random accesses from a second PC mixed in so
/// that roughly `noise_ratio` of all records are noise.
fn gen_interleaved_noise(spec: &TraceSpec, rng: &mut ChaCha8Rng) -> Vec<MemoryAccess> {
    let addrs = distinct_addrs(rng, spec.unique_addrs as usize);
    let total_temporal = (spec.unique_addrs * spec.repetitions) as usize;
    if spec.noise_ratio >= 1.0 {
        return (0..total_temporal)
            .map(|_| demand(NOISE_PC, rng.gen::<u64>() & MAX_LINE_ADDR))
            .collect();
    }
    let mut out = Vec::new();
    let mut emitted = 0usize;
    while emitted < total_temporal {
        if spec.noise_ratio > 0.0 && rng.gen::<f64>() < spec.noise_ratio {
            out.push(demand(NOISE_PC, rng.gen::<u64>() & MAX_LINE_ADDR));
        } else {
            out.push(demand(TEMPORAL_PC, addrs[emitted % addrs.len()]));
            emitted += 1;
        }
    }
    out
}

/// Circular walk in which each address occurs `fanout` times, every
/// occurrence followed by a distinct successor.
///
/// Fanouts are drawn per address from the distribution, the multiset of
/// occurrences is shuffled into one ring, and local conflicts (an address
/// following itself, or two occurrences sharing a follower) are repaired by
/// random swaps. Walking the ring `repetitions` times therefore reproduces
/// each address's successor set exactly: the observed fanout of an address
/// equals its assigned fanout.
fn gen_multi_target(spec: &TraceSpec, rng: &mut ChaCha8Rng) -> Vec<MemoryAccess> {
    let n = spec.unique_addrs as usize;
    let addrs = distinct_addrs(rng, n);
    if n == 1 {
        return vec![demand(MULTI_PC, addrs[0]); spec.repetitions as usize];
    }

    let max_fanout = (n - 1).min(MAX_FANOUT as usize);
    let mut walk: Vec<usize> = Vec::new();
    for v in 0..n {
        let r = rng.gen::<f64>();
        let mut cum = 0.0;
        let mut chosen = spec.target_fanout_dist.last().unwrap().0 as usize;
        for &(fanout, p) in &spec.target_fanout_dist {
            cum += p;
            if r < cum {
                chosen = fanout as usize;
                break;
            }
        }
        walk.extend(std::iter::repeat(v).take(chosen.min(max_fanout)));
    }
    walk.shuffle(rng);

    let len = walk.len();
    let mut followers: Vec<HashSet<usize>> = vec![HashSet::new(); n];
    let mut attempts = 0usize;
    'repair: loop {
        followers.iter_mut().for_each(HashSet::clear);
        for i in 0..len {
            let a = walk[i];
            let b = walk[(i + 1) % len];
            if a == b || !followers[a].insert(b) {
                attempts += 1;
                if attempts > 64 * len {
                    break 'repair; // pathological spec; leave residual conflicts in
                }
                let j = rng.gen_range(0..len);
                walk.swap((i + 1) % len, j);
                continue 'repair;
            }
        }
        break;
    }

    let mut out = Vec::with_capacity(len * spec.repetitions as usize);
    for _ in 0..spec.repetitions {
        out.extend(walk.iter().map(|&v| demand(MULTI_PC, addrs[v])));
    }
    out
}

/// One fixed random cycle over the address set, walked `repetitions` times.
fn gen_pointer_chase(spec: &TraceSpec, rng: &mut ChaCha8Rng) -> Vec<MemoryAccess> {
    let mut addrs = distinct_addrs(rng, spec.unique_addrs as usize);
    addrs.shuffle(rng);
    let mut out = Vec::with_capacity((spec.unique_addrs * spec.repetitions) as usize);
    for _ in 0..spec.repetitions {
        out.extend(addrs.iter().map(|&a| demand(CHASE_PC, a)));
    }
    out
}

fn gen_strided_kernel(spec: &TraceSpec, rng: &mut ChaCha8Rng) -> Vec<MemoryAccess> {
    let span = spec.unique_addrs;
    let base = rng.gen_range(0..(1u64 << 31) - span);
    let mut out = Vec::with_capacity((span * spec.repetitions) as usize);
    for _ in 0..spec.repetitions {
        out.extend((0..span).map(|i| demand(STRIDE_PC, base + i)));
    }
    out
}

/// Temporal loop and strided kernel interleaved element-by-element, with
/// noise injected at `noise_ratio` over the merged stream.
fn gen_mixed(spec: &TraceSpec, rng: &mut ChaCha8Rng) -> Vec<MemoryAccess> {
    let loop_addrs = distinct_addrs(rng, spec.unique_addrs as usize);
    let span = spec.unique_addrs;
    let base = rng.gen_range(0..(1u64 << 31) - span);
    let per_stream = (spec.unique_addrs * spec.repetitions) as usize;

    let mut out = Vec::new();
    let mut emitted = 0usize;
    while emitted < 2 * per_stream {
        if spec.noise_ratio > 0.0 && spec.noise_ratio < 1.0 && rng.gen::<f64>() < spec.noise_ratio {
            out.push(demand(NOISE_PC, rng.gen::<u64>() & MAX_LINE_ADDR));
            continue;
        }
        let slot = emitted / 2;
        if emitted % 2 == 0 {
            out.push(demand(TEMPORAL_PC, loop_addrs[slot % loop_addrs.len()]));
        } else {
            out.push(demand(STRIDE_PC, base + (slot as u64 % span)));
        }
        emitted += 1;
    }
    out
}

/// Model of a degree-8 L1 stride prefetcher running ahead of the trace:
/// once a PC repeats a nonzero stride, eight fill records for the next
/// strided lines are spliced in behind the triggering demand access.
fn stride_prepass(trace: &[MemoryAccess]) -> Vec<MemoryAccess> {
    use std::collections::HashMap;
    let mut out = Vec::with_capacity(trace.len());
    let mut hist: HashMap<u64, (u64, i64)> = HashMap::new();
    for acc in trace {
        out.push(*acc);
        if acc.kind != AccessKind::Demand {
            continue;
        }
        let entry = hist.entry(acc.pc).or_insert((acc.line_addr, 0));
        let delta = acc.line_addr as i64 - entry.0 as i64;
        let stable = delta != 0 && delta == entry.1;
        *entry = (acc.line_addr, delta);
        if stable {
            for k in 1..=8i64 {
                let t = acc.line_addr as i64 + delta * k;
                if t < 0 || t as u64 > MAX_LINE_ADDR {
                    break;
                }
                out.push(MemoryAccess {
                    pc: acc.pc,
                    line_addr: t as u64,
                    kind: AccessKind::L1PrefetchFill,
                });
            }
        }
    }
    out
}
