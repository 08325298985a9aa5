//! Smoothed-hinge primal, its box-constrained dual, and the KKT map between
//! them.
//!
//! The dual is written as a minimization, so strong duality reads
//! `P(w*) = -D(theta*)` and the gap is `P(w) + D(theta)`.

use serde::{Deserialize, Serialize};

use crate::datamodel::{Dataset, Params};
use crate::error::{Result, SifsError};
use crate::numeric::{csum, shrink};

/// Primal vector `w` (length p) and dual vector `theta` (length n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionPair {
    pub w: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
}

const BOX_SLACK: f64 = 1e-12;

/// `0` for `t < 0`, `t^2 / (2 gamma)` on `[0, gamma]`, `t - gamma/2` beyond.
#[inline]
pub fn smoothed_loss(t: f64, gamma: f64) -> f64 {
    if t < 0.0 {
        0.0
    } else if t <= gamma {
        t * t / (2.0 * gamma)
    } else {
        t - 0.5 * gamma
    }
}

pub fn soft_threshold(u: &[f64], beta: f64) -> Vec<f64> {
    u.iter().map(|&x| shrink(x, beta)).collect()
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(SifsError::DimensionMismatch { expected, got })
    }
}

pub(crate) fn check_box(theta: &[f64]) -> Result<()> {
    match theta.iter().position(|&t| !(-BOX_SLACK..=1.0 + BOX_SLACK).contains(&t)) {
        None => Ok(()),
        Some(i) => Err(SifsError::Domain(format!("theta[{i}] = {} outside [0, 1]", theta[i]))),
    }
}

/// Primal value from precomputed signed margins `<xbar_i, w>`.
pub(crate) fn primal_from_margins(margins: &[f64], w: &[f64], prm: &Params) -> f64 {
    let n = margins.len() as f64;
    let loss = csum(margins.iter().map(|&m| smoothed_loss(1.0 - m, prm.gamma)));
    let l2 = csum(w.iter().map(|x| x * x));
    let l1 = csum(w.iter().map(|x| x.abs()));
    loss / n + 0.5 * prm.alpha * l2 + prm.beta * l1
}

/// Dual value from `u = (1/n) xbar theta` (possibly restricted to a subset of
/// rows) and theta itself.
pub(crate) fn dual_from_u(u: &[f64], theta: &[f64], n: usize, prm: &Params) -> f64 {
    let n = n as f64;
    let s = csum(u.iter().map(|&x| {
        let v = shrink(x, prm.beta);
        v * v
    }));
    let t2 = csum(theta.iter().map(|t| t * t));
    let t1 = csum(theta.iter().copied());
    s / (2.0 * prm.alpha) + prm.gamma / (2.0 * n) * t2 - t1 / n
}

pub fn primal_objective(d: &Dataset, w: &[f64], prm: &Params) -> Result<f64> {
    check_len(d.p(), w.len())?;
    Ok(primal_from_margins(&d.mul_t(w), w, prm))
}

pub fn dual_objective(d: &Dataset, theta: &[f64], prm: &Params) -> Result<f64> {
    check_len(d.n(), theta.len())?;
    check_box(theta)?;
    let n = d.n() as f64;
    let u: Vec<f64> = d.mul(theta).into_iter().map(|x| x / n).collect();
    Ok(dual_from_u(&u, theta, d.n(), prm))
}

/// `(1/(alpha n)) xbar^T S_beta((1/n) xbar theta) + (gamma/n) theta - (1/n) 1`.
pub fn dual_gradient(d: &Dataset, theta: &[f64], prm: &Params) -> Result<Vec<f64>> {
    check_len(d.n(), theta.len())?;
    check_box(theta)?;
    let n = d.n() as f64;
    let s: Vec<f64> = d.mul(theta).into_iter().map(|x| shrink(x / n, prm.beta)).collect();
    Ok((0..d.n())
        .map(|i| d.col(i).dot_dense(&s) / (prm.alpha * n) + prm.gamma / n * theta[i] - 1.0 / n)
        .collect())
}

/// KKT primal recovery `(1/alpha) S_beta((1/n) xbar theta)` on the given
/// features (all features when `features` is `None`). The result is indexed
/// like `features`.
pub fn recover_primal(
    d: &Dataset,
    theta: &[f64],
    prm: &Params,
    features: Option<&[usize]>,
) -> Result<Vec<f64>> {
    check_len(d.n(), theta.len())?;
    let n = d.n() as f64;
    let one = |j: usize| shrink(d.row(j).dot_dense(theta) / n, prm.beta) / prm.alpha;
    Ok(match features {
        Some(fs) => {
            if let Some(&j) = fs.iter().find(|&&j| j >= d.p()) {
                return Err(SifsError::IndexOutOfRange { index: j, len: d.p() });
            }
            fs.iter().map(|&j| one(j)).collect()
        }
        None => (0..d.p()).map(one).collect(),
    })
}

pub fn duality_gap(d: &Dataset, pair: &SolutionPair, prm: &Params) -> Result<GapReport> {
    let primal_value = primal_objective(d, &pair.w, prm)?;
    let dual_value = dual_objective(d, &pair.theta, prm)?;
    Ok(GapReport { primal_value, dual_value, gap: primal_value + dual_value })
}
