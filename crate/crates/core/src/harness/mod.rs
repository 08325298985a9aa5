//! Grid-path runner, metrics, and output writers behind the `sifs` CLI.

mod metrics;
mod path;

pub use metrics::{compute_metrics, write_csvs, Metrics, ModeMetrics, PointMetrics, METRIC_NOTES};
pub use path::{run_path, OracleRecord, PathConfig, RunRecord, TriggerCounts};

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::Result;

/// Number of worker threads: `SIFS_THREADS` when set, else all cores.
pub fn thread_cap() -> Option<usize> {
    std::env::var("SIFS_THREADS").ok().and_then(|v| v.parse().ok()).filter(|&t| t > 0)
}

pub fn write_records_jsonl(path: impl AsRef<Path>, records: &[RunRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_records_jsonl(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
