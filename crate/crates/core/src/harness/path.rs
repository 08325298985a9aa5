use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::{closed_form_reference, Grid, GridRow};
use crate::datamodel::{Dataset, Params};
use crate::error::{Result, SifsError};
use crate::estimation::{ReferencePoint, ScreeningState};
use crate::objective::duality_gap;
use crate::screening::{screen, ScreenOrder, ScreeningMode, SifsReport, TriggerKind};
use crate::solver::{solve, SolverConfig};
use crate::verification::{certify, oracle_config, oracle_solve_with, OracleSolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub solver: SolverConfig,
    /// Tolerance that every solution feeding the next point's screening must
    /// meet; the effective solve tolerance is the smaller of the two.
    pub reference_gap_tol: f64,
    pub order: ScreenOrder,
    /// Run an unscreened oracle at every point and certify the screening.
    pub verify: bool,
    pub threads: Option<usize>,
}

impl PathConfig {
    pub fn new(gamma: f64) -> Self {
        Self {
            solver: SolverConfig::default_for(gamma),
            reference_gap_tol: SolverConfig::reference_for(gamma).gap_tol,
            order: ScreenOrder::IssFirst,
            verify: false,
            threads: super::thread_cap(),
        }
    }

    fn effective_solver(&self) -> SolverConfig {
        SolverConfig { gap_tol: self.solver.gap_tol.min(self.reference_gap_tol), ..self.solver }
    }
}

/// Indices added by one screening trigger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerCounts {
    pub kind: TriggerKind,
    pub features: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    /// Inactive samples in the oracle solution, counting those within the
    /// boundary tolerance of a bound.
    pub n0: usize,
    /// Inactive features in the oracle solution, boundary ones included.
    pub p0: usize,
    pub gap: f64,
    pub violations: usize,
    pub violating_features: Vec<usize>,
    pub violating_samples: Vec<usize>,
    pub max_abs_w_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// 1-based position along the alpha chain (0 is the closed-form reference).
    pub i: usize,
    pub j: usize,
    pub alpha: f64,
    pub beta: f64,
    pub alpha_frac: f64,
    pub beta_frac: f64,
    pub mode: ScreeningMode,
    pub n: usize,
    pub p: usize,
    /// `|R_hat| + |L_hat|`.
    pub screened_samples: usize,
    /// `|F_hat|`.
    pub screened_features: usize,
    pub screened_r: usize,
    pub screened_l: usize,
    pub triggers: Vec<TriggerCounts>,
    pub clamped_balls: usize,
    pub screen_secs: f64,
    pub solve_secs: f64,
    pub epochs: usize,
    /// Gap of the reduced problem at termination.
    pub solver_gap: Option<f64>,
    /// Gap of the extended pair on the full problem.
    pub gap: Option<f64>,
    pub w_nonzeros: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Final primal vector, kept only when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
}

impl RunRecord {
    fn blank(row: &GridRow, i: usize, d: &Dataset, mode: ScreeningMode) -> Self {
        RunRecord {
            i,
            j: row.j,
            alpha: row.alphas[i - 1],
            beta: row.beta,
            alpha_frac: row.alpha_fracs[i - 1],
            beta_frac: row.beta_frac,
            mode,
            n: d.n(),
            p: d.p(),
            screened_samples: 0,
            screened_features: 0,
            screened_r: 0,
            screened_l: 0,
            triggers: Vec::new(),
            clamped_balls: 0,
            screen_secs: 0.0,
            solve_secs: 0.0,
            epochs: 0,
            solver_gap: None,
            gap: None,
            w_nonzeros: 0,
            oracle: None,
            error: None,
            w: None,
        }
    }

    fn fill_screening(&mut self, state: &ScreeningState, report: &SifsReport) {
        self.screened_r = state.r_hat().len();
        self.screened_l = state.l_hat().len();
        self.screened_samples = state.screened_samples();
        self.screened_features = state.screened_features();
        self.clamped_balls = report.clamped_balls;
        self.triggers = report
            .rounds
            .iter()
            .map(|r| TriggerCounts {
                kind: r.kind,
                features: r.added_f.len(),
                samples: r.added_r.len() + r.added_l.len(),
            })
            .collect();
    }

    pub fn total_secs(&self) -> f64 {
        self.screen_secs + self.solve_secs
    }
}

/// Runs the sequential screening-and-solve path over `grid`.
///
/// Each beta row starts from its closed-form reference. Every later point is
/// screened against the previous point's solution (the last one that solved
/// successfully), then solved warm-started from it. Rows are independent and
/// run concurrently on up to `cfg.threads` workers.
pub fn run_path(
    d: &Dataset,
    grid: &Grid,
    mode: ScreeningMode,
    cfg: &PathConfig,
    keep_w: bool,
) -> Result<Vec<RunRecord>> {
    cfg.solver.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| SifsError::InvalidParam(format!("thread pool: {e}")))?;
    let rows: Vec<Vec<RunRecord>> =
        pool.install(|| grid.rows.par_iter().map(|row| run_row(d, grid.gamma, row, mode, cfg, keep_w)).collect());
    Ok(rows.into_iter().flatten().collect())
}

fn run_row(
    d: &Dataset,
    gamma: f64,
    row: &GridRow,
    mode: ScreeningMode,
    cfg: &PathConfig,
    keep_w: bool,
) -> Vec<RunRecord> {
    let solver_cfg = cfg.effective_solver();
    let mut reference = match closed_form_reference(d, row.reference_alpha, row.beta, gamma) {
        Ok(pair) => ReferencePoint { alpha: row.reference_alpha, beta: row.beta, pair },
        Err(e) => {
            log::error!("beta row {} aborted: {e}", row.j);
            return (1..=row.alphas.len())
                .map(|i| RunRecord { error: Some(format!("row reference failed: {e}")), ..RunRecord::blank(row, i, d, mode) })
                .collect();
        }
    };
    let mut oracle_warm: Option<Vec<f64>> = cfg.verify.then(|| reference.pair.theta.clone());

    let mut out = Vec::with_capacity(row.alphas.len());
    for (k, &alpha) in row.alphas.iter().enumerate() {
        let mut rec = RunRecord::blank(row, k + 1, d, mode);
        let prm = Params { alpha, beta: row.beta, gamma };

        let t0 = Instant::now();
        let screened = screen(d, &reference, alpha, gamma, mode, cfg.order);
        rec.screen_secs = t0.elapsed().as_secs_f64();
        let (state, report) = match screened {
            Ok(s) => s,
            Err(e) => {
                rec.error = Some(format!("screening failed: {e}"));
                out.push(rec);
                continue;
            }
        };
        rec.fill_screening(&state, &report);

        let t1 = Instant::now();
        let solved = solve(d, &prm, &state, Some(&reference.pair.theta), &solver_cfg);
        rec.solve_secs = t1.elapsed().as_secs_f64();
        let result = match solved {
            Ok(r) => r,
            Err(e) => {
                log::warn!("point ({}, {}) failed: {e}", row.j, k + 1);
                rec.error = Some(e.to_string());
                out.push(rec);
                continue;
            }
        };
        rec.epochs = result.epochs;
        rec.solver_gap = Some(result.gap);
        rec.gap = duality_gap(d, &result.pair, &prm).ok().map(|g| g.gap);
        rec.w_nonzeros = result.pair.w.iter().filter(|&&w| w != 0.0).count();

        if cfg.verify {
            match oracle_solve_with(d, &prm, oracle_warm.as_deref(), &oracle_config(gamma)) {
                Ok(oracle) => {
                    rec.oracle = Some(oracle_record(&state, &oracle, &result.pair.w));
                    oracle_warm = Some(oracle.pair.theta);
                }
                Err(e) => rec.error = Some(format!("oracle failed: {e}")),
            }
        }
        if keep_w {
            rec.w = Some(result.pair.w.clone());
        }
        reference = ReferencePoint { alpha, beta: row.beta, pair: result.pair };
        out.push(rec);
    }
    out
}

fn oracle_record(state: &ScreeningState, oracle: &OracleSolution, w: &[f64]) -> OracleRecord {
    let cert = certify(state, oracle);
    let max_abs_w_diff = w.iter().zip(&oracle.pair.w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut violating_samples = cert.violations_r.clone();
    violating_samples.extend(&cert.violations_l);
    OracleRecord {
        n0: oracle.inactive_samples() + oracle.ambiguous_samples.len(),
        p0: oracle.inactive_features() + oracle.ambiguous_features.len(),
        gap: oracle.gap,
        violations: cert.violations(),
        violating_features: cert.violations_f,
        violating_samples,
        max_abs_w_diff,
    }
}
