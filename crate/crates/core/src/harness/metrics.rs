use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::path::RunRecord;
use crate::error::Result;
use crate::screening::{ScreeningMode, TriggerKind};

pub const METRIC_NOTES: &[&str] = &[
    "features are used as given; no normalization is applied",
    "rejection ratios divide each trigger's count by the oracle's inactive count at the same (alpha, beta)",
    "speedup is total unscreened solve time over total screen-plus-solve time across the grid",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub mode: ScreeningMode,
    pub j: usize,
    pub i: usize,
    pub beta_frac: f64,
    pub alpha_frac: f64,
    pub scaling_ratio: f64,
    /// Per-IFS-trigger `p_k / p0`, in trigger order.
    pub feature_rejection: Vec<Option<f64>>,
    /// Per-ISS-trigger `n_k / n0`, in trigger order.
    pub sample_rejection: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeMetrics {
    pub mode: ScreeningMode,
    pub points: usize,
    pub failures: usize,
    pub mean_scaling_ratio: f64,
    pub screen_secs: f64,
    pub solve_secs: f64,
    pub total_secs: f64,
    /// Relative to mode `none`; absent when no such records were given.
    pub speedup: Option<f64>,
    pub max_triggers: usize,
    pub violations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub modes: Vec<ModeMetrics>,
    pub points: Vec<PointMetrics>,
    pub notes: Vec<String>,
}

impl Metrics {
    pub fn mode(&self, mode: ScreeningMode) -> Option<&ModeMetrics> {
        self.modes.iter().find(|m| m.mode == mode)
    }
}

pub fn scaling_ratio(n: usize, p: usize, n_screened: usize, p_screened: usize) -> f64 {
    if n == 0 || p == 0 {
        return 0.0;
    }
    1.0 - ((n - n_screened) as f64 * (p - p_screened) as f64) / (n as f64 * p as f64)
}

fn ratio(count: usize, total: Option<usize>) -> Option<f64> {
    match total {
        Some(t) if t > 0 => Some(count as f64 / t as f64),
        _ => None,
    }
}

/// Aggregates path records. Oracle counts come from each record's own
/// verification, or else from the record at the same `(j, i)` in `oracle`.
pub fn compute_metrics(records: &[RunRecord], oracle: Option<&[RunRecord]>) -> Metrics {
    let lookup: HashMap<(usize, usize), (usize, usize)> = oracle
        .unwrap_or(&[])
        .iter()
        .filter_map(|r| r.oracle.as_ref().map(|o| ((r.j, r.i), (o.n0, o.p0))))
        .collect();

    let mut by_mode: BTreeMap<String, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        by_mode.entry(r.mode.to_string()).or_default().push(r);
    }

    let mut points = Vec::with_capacity(records.len());
    for r in records {
        let counts = r.oracle.as_ref().map(|o| (o.n0, o.p0)).or_else(|| lookup.get(&(r.j, r.i)).copied());
        let (n0, p0) = (counts.map(|c| c.0), counts.map(|c| c.1));
        let mut feature_rejection = Vec::new();
        let mut sample_rejection = Vec::new();
        for t in &r.triggers {
            match t.kind {
                TriggerKind::Ifs => feature_rejection.push(ratio(t.features, p0)),
                TriggerKind::Iss => sample_rejection.push(ratio(t.samples, n0)),
            }
        }
        points.push(PointMetrics {
            mode: r.mode,
            j: r.j,
            i: r.i,
            beta_frac: r.beta_frac,
            alpha_frac: r.alpha_frac,
            scaling_ratio: scaling_ratio(r.n, r.p, r.screened_samples, r.screened_features),
            feature_rejection,
            sample_rejection,
        });
    }

    let none_total: Option<f64> = by_mode
        .get(&ScreeningMode::None.to_string())
        .map(|rs| rs.iter().map(|r| r.total_secs()).sum());

    let modes = by_mode
        .values()
        .map(|rs| {
            let mode = rs[0].mode;
            let ok: Vec<_> = rs.iter().filter(|r| r.error.is_none()).collect();
            let mean_scaling_ratio = if ok.is_empty() {
                0.0
            } else {
                ok.iter().map(|r| scaling_ratio(r.n, r.p, r.screened_samples, r.screened_features)).sum::<f64>()
                    / ok.len() as f64
            };
            let screen_secs: f64 = rs.iter().map(|r| r.screen_secs).sum();
            let solve_secs: f64 = rs.iter().map(|r| r.solve_secs).sum();
            let total_secs = screen_secs + solve_secs;
            let verified: Vec<_> = rs.iter().filter_map(|r| r.oracle.as_ref()).collect();
            ModeMetrics {
                mode,
                points: rs.len(),
                failures: rs.len() - ok.len(),
                mean_scaling_ratio,
                screen_secs,
                solve_secs,
                total_secs,
                speedup: none_total.filter(|_| total_secs > 0.0).map(|t| t / total_secs),
                max_triggers: rs.iter().map(|r| r.triggers.len()).max().unwrap_or(0),
                violations: (!verified.is_empty()).then(|| verified.iter().map(|o| o.violations).sum()),
            }
        })
        .collect();

    Metrics { modes, points, notes: METRIC_NOTES.iter().map(|s| s.to_string()).collect() }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `scaling.csv`, `rejection.csv` and `timing.csv` into `dir`.
pub fn write_csvs(dir: impl AsRef<Path>, metrics: &Metrics) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;

    let mut w = csv::Writer::from_path(dir.join("scaling.csv")).map_err(csv_err)?;
    w.write_record(["mode", "j", "i", "beta_frac", "alpha_frac", "scaling_ratio"]).map_err(csv_err)?;
    for p in &metrics.points {
        w.write_record([
            p.mode.to_string(),
            p.j.to_string(),
            p.i.to_string(),
            p.beta_frac.to_string(),
            p.alpha_frac.to_string(),
            p.scaling_ratio.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;

    let kf = metrics.points.iter().map(|p| p.feature_rejection.len()).max().unwrap_or(0);
    let ks = metrics.points.iter().map(|p| p.sample_rejection.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_path(dir.join("rejection.csv")).map_err(csv_err)?;
    let mut header: Vec<String> = ["mode", "j", "i", "beta_frac", "alpha_frac"].map(String::from).to_vec();
    header.extend((1..=kf).map(|k| format!("ifs_{k}")));
    header.extend((1..=ks).map(|k| format!("iss_{k}")));
    w.write_record(&header).map_err(csv_err)?;
    for p in &metrics.points {
        let mut row = vec![
            p.mode.to_string(),
            p.j.to_string(),
            p.i.to_string(),
            p.beta_frac.to_string(),
            p.alpha_frac.to_string(),
        ];
        row.extend((0..kf).map(|k| cell(p.feature_rejection.get(k).copied().flatten())));
        row.extend((0..ks).map(|k| cell(p.sample_rejection.get(k).copied().flatten())));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("timing.csv")).map_err(csv_err)?;
    w.write_record(["mode", "points", "failures", "mean_scaling_ratio", "screen_secs", "solve_secs", "total_secs", "speedup"])
        .map_err(csv_err)?;
    for m in &metrics.modes {
        w.write_record([
            m.mode.to_string(),
            m.points.to_string(),
            m.failures.to_string(),
            m.mean_scaling_ratio.to_string(),
            m.screen_secs.to_string(),
            m.solve_secs.to_string(),
            m.total_secs.to_string(),
            cell(m.speedup),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> crate::error::SifsError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => crate::error::SifsError::InvalidParam(format!("csv: {other:?}")),
    }
}
