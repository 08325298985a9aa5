//! Inactive feature screening (IFS), inactive sample screening (ISS), and
//! their alternating fixpoint (SIFS).
//!
//! Rule comparisons are exact as derived: a feature is dropped when its
//! score is `<= beta0`; a sample is fixed to 0 when `u < 0` and to 1 when
//! `l > gamma`. No epsilon padding is applied.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::Dataset;
use crate::estimation::{dual_ball, primal_ball, Ball, ReferencePoint, SampleStatus, ScreeningState};
use crate::error::{Result, SifsError};

const PAR_MIN_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriggerKind {
    Iss,
    Ifs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScreenOrder {
    #[default]
    IssFirst,
    IfsFirst,
}

/// Which rules run before each solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScreeningMode {
    None,
    Iss,
    Ifs,
    Sifs,
}

impl std::fmt::Display for ScreeningMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScreeningMode::None => "none",
            ScreeningMode::Iss => "iss",
            ScreeningMode::Ifs => "ifs",
            ScreeningMode::Sifs => "sifs",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerRecord {
    pub kind: TriggerKind,
    pub added_f: Vec<usize>,
    pub added_r: Vec<usize>,
    pub added_l: Vec<usize>,
}

impl TriggerRecord {
    pub fn is_empty(&self) -> bool {
        self.added_f.is_empty() && self.added_r.is_empty() && self.added_l.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SifsReport {
    pub rounds: Vec<TriggerRecord>,
    pub total_triggers: usize,
    /// Balls whose squared radius had to be clamped at zero.
    pub clamped_balls: usize,
}

fn check_ball(ball: &Ball, expected: &[usize]) -> Result<()> {
    if ball.index_map != expected || ball.center.len() != expected.len() {
        return Err(SifsError::DimensionMismatch {
            expected: expected.len(),
            got: ball.index_map.len(),
        });
    }
    Ok(())
}

/// Worst-case `(1/n)|[xbar theta]_i|` over the dual ball, for every
/// unscreened feature `i`.
pub fn ifs_scores(d: &Dataset, ball: &Ball, state: &ScreeningState) -> Result<Vec<(usize, f64)>> {
    check_ball(ball, &state.active_samples())?;
    // Per sample: ball center on D^c, 1 on L, 0 on R.
    let mut weight = vec![0.0; d.n()];
    let mut active = vec![0.0; d.n()];
    for (&i, &c) in ball.index_map.iter().zip(&ball.center) {
        weight[i] = c;
        active[i] = 1.0;
    }
    for &i in state.l_hat() {
        weight[i] = 1.0;
    }
    let n = d.n() as f64;
    let features = state.active_features();
    Ok(features
        .par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|&j| {
            let (mut dot, mut nsq) = (0.0, 0.0);
            for (i, v) in d.row(j).iter() {
                dot += v * weight[i];
                nsq += v * v * active[i];
            }
            (j, (dot.abs() + nsq.sqrt() * ball.radius) / n)
        })
        .collect())
}

/// Adds every feature with score `<= beta0` to `F`; returns the new ones.
pub fn apply_ifs(scores: &[(usize, f64)], beta0: f64, state: &mut ScreeningState) -> Result<Vec<usize>> {
    state.add_features(scores.iter().filter(|(_, s)| *s <= beta0).map(|(j, _)| *j))
}

/// Extreme margins `(u_i, l_i)` of `1 - <xbar_i, w>` over the primal ball, for
/// every unscreened sample `i`.
pub fn iss_bounds(
    d: &Dataset,
    ball: &Ball,
    state: &ScreeningState,
) -> Result<Vec<(usize, f64, f64)>> {
    check_ball(ball, &state.active_features())?;
    let samples = state.active_samples();
    let bound = |i: usize, dot: f64, nsq: f64| {
        let spread = nsq.sqrt() * ball.radius;
        (i, 1.0 - dot + spread, 1.0 - dot - spread)
    };
    // With no feature screened the norms are whole-column norms (cached), and
    // only rows where the center is nonzero contribute to the dot product.
    let cached = state.f_hat().is_empty();
    let by_sample: usize = samples.iter().map(|&i| d.col(i).nnz()).sum();
    let by_feature: usize = ball
        .index_map
        .iter()
        .zip(&ball.center)
        .map(|(&j, &c)| if cached && c == 0.0 { 0 } else { d.row(j).nnz() })
        .sum::<usize>()
        + d.n();

    if by_feature < by_sample {
        // Entries are added in increasing feature order, as in the
        // per-sample loop below.
        let mut dots = vec![0.0; d.n()];
        let mut nsqs = if cached { d.sample_norms_sq().to_vec() } else { vec![0.0; d.n()] };
        for (&j, &c) in ball.index_map.iter().zip(&ball.center) {
            if cached {
                if c != 0.0 {
                    for (i, v) in d.row(j).iter() {
                        dots[i] += v * c;
                    }
                }
            } else {
                for (i, v) in d.row(j).iter() {
                    dots[i] += v * c;
                    nsqs[i] += v * v;
                }
            }
        }
        return Ok(samples.iter().map(|&i| bound(i, dots[i], nsqs[i])).collect());
    }

    let mut weight = vec![0.0; d.p()];
    let mut active = vec![0.0; d.p()];
    for (&j, &c) in ball.index_map.iter().zip(&ball.center) {
        weight[j] = c;
        active[j] = 1.0;
    }
    Ok(samples
        .par_iter()
        .with_min_len(PAR_MIN_LEN)
        .map(|&i| {
            let (mut dot, mut nsq) = (0.0, 0.0);
            for (j, v) in d.col(i).iter() {
                dot += v * weight[j];
                nsq += v * v * active[j];
            }
            bound(i, dot, nsq)
        })
        .collect())
}

/// `u_i < 0` fixes `theta_i = 0`; `l_i > gamma` fixes `theta_i = 1`.
/// Returns the newly added `(R, L)` indices.
pub fn apply_iss(
    bounds: &[(usize, f64, f64)],
    gamma: f64,
    state: &mut ScreeningState,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut zero = Vec::new();
    let mut one = Vec::new();
    for &(i, u, l) in bounds {
        match (u < 0.0, l > gamma) {
            (true, true) => {
                return Err(SifsError::Invariant(format!(
                    "sample {i} qualifies for both R and L (u={u}, l={l})"
                )))
            }
            (true, false) => zero.push(i),
            (false, true) => one.push(i),
            (false, false) => {}
        }
    }
    let r = state.add_samples(zero, SampleStatus::Zero)?;
    let l = state.add_samples(one, SampleStatus::One)?;
    Ok((r, l))
}

fn trigger(
    d: &Dataset,
    reference: &ReferencePoint,
    alpha: f64,
    gamma: f64,
    kind: TriggerKind,
    state: &mut ScreeningState,
    report: &mut SifsReport,
) -> Result<()> {
    let record = match kind {
        TriggerKind::Iss => {
            let ball = primal_ball(reference, alpha, state)?;
            report.clamped_balls += ball.clamped as usize;
            let bounds = iss_bounds(d, &ball, state)?;
            let (added_r, added_l) = apply_iss(&bounds, gamma, state)?;
            TriggerRecord { kind, added_f: Vec::new(), added_r, added_l }
        }
        TriggerKind::Ifs => {
            let ball = dual_ball(reference, alpha, gamma, state)?;
            report.clamped_balls += ball.clamped as usize;
            let scores = ifs_scores(d, &ball, state)?;
            let added_f = apply_ifs(&scores, reference.beta, state)?;
            TriggerRecord { kind, added_f, added_r: Vec::new(), added_l: Vec::new() }
        }
    };
    report.rounds.push(record);
    report.total_triggers += 1;
    Ok(())
}

/// Alternates ISS and IFS from an empty state, rebuilding the relevant ball
/// before every trigger, until a full ISS+IFS alternation adds nothing.
pub fn sifs(
    d: &Dataset,
    reference: &ReferencePoint,
    alpha: f64,
    gamma: f64,
    order: ScreenOrder,
) -> Result<(ScreeningState, SifsReport)> {
    let mut state = ScreeningState::new(d.p(), d.n());
    let mut report = SifsReport::default();
    let mut kind = match order {
        ScreenOrder::IssFirst => TriggerKind::Iss,
        ScreenOrder::IfsFirst => TriggerKind::Ifs,
    };
    // Each productive trigger adds at least one index.
    let bound = 2 * (d.p() + d.n()) + 2;
    loop {
        if report.total_triggers >= bound {
            return Err(SifsError::Invariant("screening did not reach a fixpoint".into()));
        }
        trigger(d, reference, alpha, gamma, kind, &mut state, &mut report)?;
        let other = match kind {
            TriggerKind::Iss => TriggerKind::Ifs,
            TriggerKind::Ifs => TriggerKind::Iss,
        };
        let k = report.rounds.len();
        if report.rounds[k - 1].is_empty() && k >= 2 {
            if !report.rounds[k - 2].is_empty() {
                // The other rule would see exactly the inputs of its previous
                // run, so it adds nothing; record it without recomputing.
                report.rounds.push(TriggerRecord {
                    kind: other,
                    added_f: Vec::new(),
                    added_r: Vec::new(),
                    added_l: Vec::new(),
                });
                report.total_triggers += 1;
            }
            break;
        }
        kind = other;
    }
    Ok((state, report))
}

/// Runs the rules selected by `mode`. Single-rule modes trigger once: a
/// second application with an unchanged state of the other side is a no-op.
pub fn screen(
    d: &Dataset,
    reference: &ReferencePoint,
    alpha: f64,
    gamma: f64,
    mode: ScreeningMode,
    order: ScreenOrder,
) -> Result<(ScreeningState, SifsReport)> {
    let single = |kind| -> Result<(ScreeningState, SifsReport)> {
        let mut state = ScreeningState::new(d.p(), d.n());
        let mut report = SifsReport::default();
        trigger(d, reference, alpha, gamma, kind, &mut state, &mut report)?;
        Ok((state, report))
    };
    match mode {
        ScreeningMode::None => Ok((ScreeningState::new(d.p(), d.n()), SifsReport::default())),
        ScreeningMode::Iss => single(TriggerKind::Iss),
        ScreeningMode::Ifs => single(TriggerKind::Ifs),
        ScreeningMode::Sifs => sifs(d, reference, alpha, gamma, order),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{beta_max, closed_form_reference};
    use crate::datamodel::{generate_synthetic, SynthSpec};

    #[test]
    fn ifs_threshold_is_inclusive() {
        let mut s = ScreeningState::new(3, 1);
        let added = apply_ifs(&[(0, 0.5), (1, 0.25), (2, 0.2500001)], 0.25, &mut s).unwrap();
        assert_eq!(added, vec![1]);
        assert!(apply_ifs(&[(1, 0.25)], 0.25, &mut s).unwrap().is_empty());
        assert!(apply_ifs(&[(0, 0.5)], 0.25, &mut s).unwrap().is_empty());
    }

    #[test]
    fn iss_thresholds_are_strict() {
        let mut s = ScreeningState::new(1, 4);
        let b = [(0, 0.0, -0.2), (1, -1e-12, -0.5), (2, 0.9, 0.5), (3, 0.6, 0.3)];
        let (r, l) = apply_iss(&b, 0.5, &mut s).unwrap();
        assert_eq!(r, vec![1]);
        assert!(l.is_empty());
        let (r, l) = apply_iss(&b, 0.3, &mut s).unwrap();
        assert!(r.is_empty());
        assert_eq!(l, vec![2]);
        assert!(apply_iss(&[(0, 0.2, 0.1)], 0.5, &mut s).unwrap().0.is_empty());
    }

    #[test]
    fn zero_row_and_zero_column_edge_cases() {
        // Feature 1 is all zero; sample 2 is all zero.
        let d = Dataset::from_signed_dense(
            &[vec![1.0, 0.5, 0.0], vec![0.0, 0.0, 0.0]],
            vec![1.0, -1.0, 1.0],
        )
        .unwrap();
        let bmax = beta_max(&d);
        let beta = 0.5 * bmax;
        let reference = ReferencePoint {
            alpha: 1.0,
            beta,
            pair: closed_form_reference(&d, 1.0, beta, 0.5).unwrap(),
        };
        let state = ScreeningState::new(2, 3);
        let db = dual_ball(&reference, 0.8, 0.5, &state).unwrap();
        let scores = ifs_scores(&d, &db, &state).unwrap();
        assert_eq!(scores[1], (1, 0.0));
        let pb = primal_ball(&reference, 0.8, &state).unwrap();
        let bounds = iss_bounds(&d, &pb, &state).unwrap();
        assert_eq!(bounds[2], (2, 1.0, 1.0));
    }

    #[test]
    fn all_samples_screened_leaves_only_l_sum() {
        let d = Dataset::from_signed_dense(&[vec![1.0, 3.0], vec![-2.0, 0.5]], vec![1.0, 1.0]).unwrap();
        let state = ScreeningState::from_sets(2, 2, &[], &[], &[0, 1]).unwrap();
        let ball = Ball { center: vec![], radius: 7.0, index_map: vec![], clamped: false };
        let s = ifs_scores(&d, &ball, &state).unwrap();
        assert_eq!(s, vec![(0, 2.0), (1, 0.75)]);
        let none = ScreeningState::from_sets(2, 2, &[0, 1], &[], &[]).unwrap();
        let pball = Ball { center: vec![], radius: 3.0, index_map: vec![], clamped: false };
        let b = iss_bounds(&d, &pball, &none).unwrap();
        assert_eq!(b, vec![(0, 1.0, 1.0), (1, 1.0, 1.0)]);
    }

    #[test]
    fn beyond_beta_max_screens_everything() {
        let d = generate_synthetic(&SynthSpec::new(60, 50, 4)).unwrap();
        let beta = beta_max(&d) * 1.2;
        let reference = ReferencePoint {
            alpha: 1.0,
            beta,
            pair: closed_form_reference(&d, 1.0, beta, 0.5).unwrap(),
        };
        for order in [ScreenOrder::IssFirst, ScreenOrder::IfsFirst] {
            let (state, report) = sifs(&d, &reference, 0.3, 0.5, order).unwrap();
            assert_eq!(state.l_hat().len(), d.n());
            assert_eq!(state.f_hat().len(), d.p());
            assert!(report.rounds.last().unwrap().is_empty());
        }
    }

    #[test]
    fn mismatched_ball_is_rejected() {
        let d = Dataset::from_signed_dense(&[vec![1.0, 3.0]], vec![1.0, 1.0]).unwrap();
        let state = ScreeningState::new(1, 2);
        let ball = Ball { center: vec![0.0], radius: 0.0, index_map: vec![0], clamped: false };
        assert!(ifs_scores(&d, &ball, &state).is_err());
    }
}
