//! CSV outputs. All files use a fixed header, `\n` line endings and the
//! shortest round-trip float formatting, so identical runs give identical
//! bytes.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Aggregates for one tick. Counts and money refer to that tick alone;
/// `mean_idle_minutes` is cumulative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub tick: u64,
    pub requests_generated: u64,
    pub requests_accepted: u64,
    pub requests_rejected: u64,
    pub fleet_distance_km: f64,
    pub occupied_vehicles: u32,
    /// Occupied share of in-service vehicles.
    pub utilized_fraction: f64,
    pub total_profit: f64,
    /// Mean idle minutes so far over vehicles that have entered the market.
    pub mean_idle_minutes: f64,
    pub active_context: usize,
    pub change_detected: bool,
}

pub const METRICS_HEADER: [&str; 11] = [
    "tick",
    "requests_generated",
    "requests_accepted",
    "requests_rejected",
    "fleet_distance_km",
    "occupied_vehicles",
    "utilized_fraction",
    "total_profit",
    "mean_idle_minutes",
    "active_context",
    "change_detected",
];

/// A context switch triggered by the change detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChangeEvent {
    /// Estimated first tick of the new regime.
    pub tick: u64,
    pub old_context: usize,
    pub new_context: usize,
    pub z_score: f64,
}

pub const CHANGES_HEADER: [&str; 4] = ["tick", "old_context", "new_context", "z_score"];

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// Write a header followed by rows. The header is explicit so that an
/// empty table still carries it.
pub fn write_csv<W: Write, T: Serialize>(w: W, header: &[&str], rows: &[T]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(header)?;
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: Read, T: for<'de> Deserialize<'de>>(r: R) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_csv(std::fs::File::create(path)?, &METRICS_HEADER, rows)
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    read_csv(std::fs::File::open(path)?)
}

pub fn write_changes(path: &Path, events: &[ChangeEvent]) -> Result<()> {
    write_csv(std::fs::File::create(path)?, &CHANGES_HEADER, events)
}

pub fn read_changes(path: &Path) -> Result<Vec<ChangeEvent>> {
    read_csv(std::fs::File::open(path)?)
}

pub fn metrics_to_string(rows: &[MetricsRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, &METRICS_HEADER, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}
