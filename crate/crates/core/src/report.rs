//! Report aggregation: parse simulation CSVs back in, join them, compute
//! coverage deltas against the first row, and print the storage-cost table
//! for the added hardware structures.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::hints::HintBuffer;
use crate::sim::CSV_HEADER;
use crate::table::{StorageReport, MAX_TABLE_ENTRIES};
use crate::victim::VictimBufferConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub run_id: String,
    pub policy: String,
    pub demand_accesses: u64,
    pub demand_misses: u64,
    pub issued: u64,
    pub useful: u64,
    pub coverage: f64,
    pub accuracy: f64,
    pub traffic_proxy: u64,
}

impl ReportRow {
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

fn schema(path: &Path, msg: String) -> Error {
    Error::Schema { msg: format!("{}: {msg}", path.display()) }
}

pub fn load_report(path: &Path) -> Result<Vec<ReportRow>> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_report(&content, path)
}

pub fn parse_report(content: &str, path: &Path) -> Result<Vec<ReportRow>> {
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim_end() == CSV_HEADER => {}
        other => {
            return Err(schema(
                path,
                format!(
                    "header {:?} does not match {CSV_HEADER:?}",
                    other.map(|(_, l)| l).unwrap_or_default()
                ),
            ))
        }
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(schema(path, format!("line {}: {} fields, expected 9", idx + 1, fields.len())));
        }
        let count = |i: usize| -> Result<u64> {
            fields[i]
                .parse()
                .map_err(|e| schema(path, format!("line {}: field {:?}: {e}", idx + 1, fields[i])))
        };
        let fraction = |i: usize| -> Result<f64> {
            let v: f64 = fields[i]
                .parse()
                .map_err(|e| schema(path, format!("line {}: field {:?}: {e}", idx + 1, fields[i])))?;
            if !v.is_finite() {
                return Err(schema(path, format!("line {}: non-finite fraction {v}", idx + 1)));
            }
            Ok(v)
        };
        rows.push(ReportRow {
            run_id: fields[0].to_string(),
            policy: fields[1].to_string(),
            demand_accesses: count(2)?,
            demand_misses: count(3)?,
            issued: count(4)?,
            useful: count(5)?,
            coverage: fraction(6)?,
            accuracy: fraction(7)?,
            traffic_proxy: count(8)?,
        });
    }
    Ok(rows)
}

/// Re-serialize joined rows under one header.
pub fn aggregate_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_row());
        out.push('\n');
    }
    out
}

/// Coverage of each row minus coverage of the first row: the speed proxy
/// when the first row is the baseline policy.
pub fn coverage_deltas(rows: &[ReportRow]) -> Vec<(String, String, f64)> {
    let Some(first) = rows.first() else { return Vec::new() };
    rows.iter()
        .map(|r| (r.run_id.clone(), r.policy.clone(), r.coverage - first.coverage))
        .collect()
}

/// Cost of every structure the design adds at default sizing, stated in
/// bits and KiB. The metadata payload itself is carved out of existing
/// cache ways, so it does not appear here.
pub fn storage_summary() -> String {
    let table = StorageReport::for_capacity(MAX_TABLE_ENTRIES);
    let vb = VictimBufferConfig::default();
    let mut out = String::from("structure,bits,kib\n");
    let mut row = |name: &str, bits: u64| {
        writeln!(out, "{name},{bits},{:.2}", bits as f64 / 8192.0).unwrap();
    };
    row("metadata_replacement_state", table.replacement_state_bits);
    row("hint_buffer", HintBuffer::storage_bits());
    row("victim_buffer", vb.storage_bits());
    out
}

/// Human-oriented report: deltas then the storage table.
pub fn summarize(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    for (run_id, policy, delta) in coverage_deltas(rows) {
        writeln!(out, "coverage_delta,{run_id},{policy},{delta:+.6}").unwrap();
    }
    out.push_str(&storage_summary());
    out
}
