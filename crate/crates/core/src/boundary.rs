//! Parameter thresholds beyond which the optimum is known in closed form,
//! and the regularization grid built on them.

use serde::{Deserialize, Serialize};

use crate::datamodel::{validate_gamma, Dataset};
use crate::error::{Result, SifsError};
use crate::numeric::{log_space, shrink};
use crate::objective::SolutionPair;

/// `(1/n) xbar 1`, computed by plain sequential row sums so that every
/// consumer that needs this vector sees bit-identical values.
pub fn mean_signed_sample(d: &Dataset) -> Vec<f64> {
    let n = d.n() as f64;
    (0..d.p()).map(|j| d.row(j).sum() / n).collect()
}

/// Smallest `beta` at which `w* = 0` and `theta* = 1` for every `alpha`.
pub fn beta_max(d: &Dataset) -> f64 {
    mean_signed_sample(d).iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// `(1/(1-gamma)) max_i <xbar_i, S_beta((1/n) xbar 1)>`. May be `<= 0`.
pub fn alpha_max(d: &Dataset, beta: f64, gamma: f64) -> f64 {
    let s: Vec<f64> = mean_signed_sample(d).into_iter().map(|u| shrink(u, beta)).collect();
    let best = (0..d.n())
        .map(|i| d.col(i).dot_dense(&s))
        .fold(f64::NEG_INFINITY, f64::max);
    best / (1.0 - gamma)
}

/// The closed-form optimum `((1/alpha) S_beta((1/n) xbar 1), 1)`, valid for
/// `alpha >= max(alpha_max(beta), 0)`.
pub fn closed_form_reference(d: &Dataset, alpha: f64, beta: f64, gamma: f64) -> Result<SolutionPair> {
    validate_gamma(gamma)?;
    if !(alpha > 0.0) || !(beta > 0.0) {
        return Err(SifsError::InvalidParam(format!(
            "alpha and beta must be positive, got alpha={alpha} beta={beta}"
        )));
    }
    let amax = alpha_max(d, beta, gamma);
    if alpha < amax {
        return Err(SifsError::Precondition(format!(
            "closed form requires alpha >= alpha_max(beta) = {amax}, got {alpha}"
        )));
    }
    let w = mean_signed_sample(d).into_iter().map(|u| shrink(u, beta) / alpha).collect();
    Ok(SolutionPair { w, theta: vec![1.0; d.n()] })
}

/// Fractions of `beta_max` and of `alpha_max(beta)`; both strictly
/// descending in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub beta_fracs: Vec<f64>,
    pub alpha_fracs: Vec<f64>,
}

impl Default for GridSpec {
    /// 10 beta fractions from 1 to 0.05 and 100 alpha fractions from 1 to 0.01,
    /// log-spaced with both endpoints included.
    fn default() -> Self {
        Self::log_spaced(10, 0.05, 100, 0.01)
    }
}

impl GridSpec {
    pub fn log_spaced(n_beta: usize, beta_end: f64, n_alpha: usize, alpha_end: f64) -> Self {
        Self {
            beta_fracs: log_space(1.0, beta_end, n_beta),
            alpha_fracs: log_space(1.0, alpha_end, n_alpha),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta_fracs", &self.beta_fracs), ("alpha_fracs", &self.alpha_fracs)] {
            if v.is_empty() {
                return Err(SifsError::InvalidParam(format!("{name} is empty")));
            }
            if v.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
                return Err(SifsError::InvalidParam(format!("{name} must lie in (0, 1]")));
            }
            if v.windows(2).any(|w| w[0] <= w[1]) {
                return Err(SifsError::InvalidParam(format!("{name} must be strictly descending")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub j: usize,
    pub beta_frac: f64,
    pub beta: f64,
    /// Raw threshold value, possibly `<= 0`.
    pub alpha_max: f64,
    /// `alpha_max <= 0`: the closed form holds for every `alpha > 0`.
    pub closed_form_everywhere: bool,
    /// Alpha of the free closed-form reference that starts this row.
    pub reference_alpha: f64,
    pub alpha_fracs: Vec<f64>,
    pub alphas: Vec<f64>,
}

impl GridRow {
    /// `[reference_alpha, alphas...]`.
    pub fn alpha_chain(&self) -> Vec<f64> {
        std::iter::once(self.reference_alpha).chain(self.alphas.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub beta_max: f64,
    pub gamma: f64,
    pub rows: Vec<GridRow>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.rows.iter().map(|r| r.alphas.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Builds the `(beta_j, alpha_{i,j})` grid.
///
/// Rows whose `alpha_max(beta_j) <= 0` have no natural alpha scale; their
/// alphas are the same fractions of the largest positive `alpha_max` on the
/// grid (or of 1 when none is positive), and the row is flagged.
pub fn build_grid(d: &Dataset, spec: &GridSpec, gamma: f64) -> Result<Grid> {
    spec.validate()?;
    validate_gamma(gamma)?;
    let bmax = beta_max(d);
    if !(bmax > 0.0) {
        return Err(SifsError::Domain("beta_max is zero: the signed design matrix is empty".into()));
    }
    let betas: Vec<(f64, f64, f64)> = spec
        .beta_fracs
        .iter()
        .map(|&f| {
            let beta = f * bmax;
            (f, beta, alpha_max(d, beta, gamma))
        })
        .collect();
    let fallback_scale = betas
        .iter()
        .map(|t| t.2)
        .filter(|&a| a > 0.0)
        .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.max(a))))
        .unwrap_or(1.0);

    let rows = betas
        .into_iter()
        .enumerate()
        .map(|(j, (beta_frac, beta, amax))| {
            let closed = amax <= 0.0;
            let scale = if closed { fallback_scale } else { amax };
            let alphas: Vec<f64> = spec.alpha_fracs.iter().map(|f| f * scale).collect();
            let reference_alpha = if closed { alphas[0] } else { amax };
            GridRow {
                j,
                beta_frac,
                beta,
                alpha_max: amax,
                closed_form_everywhere: closed,
                reference_alpha,
                alpha_fracs: spec.alpha_fracs.clone(),
                alphas,
            }
        })
        .collect();
    Ok(Grid { beta_max: bmax, gamma, rows })
}
