//! Unscreened high-precision reference solves, exact active-set extraction,
//! and certification of screening output against them.

use serde::{Deserialize, Serialize};

use crate::datamodel::{Dataset, Params};
use crate::error::Result;
use crate::estimation::ScreeningState;
use crate::objective::{duality_gap, recover_primal, SolutionPair};
use crate::solver::{solve, SolverConfig};

/// Membership within this distance of a rule boundary is undecidable at
/// float precision; such indices are excluded from certification.
pub const BOUNDARY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub params: Params,
    pub pair: SolutionPair,
    pub gap: f64,
    pub epochs: usize,
    /// `(1/n) xbar theta*`.
    pub correlations: Vec<f64>,
    /// `1 - <xbar_i, w*>`.
    pub margins: Vec<f64>,
    pub f_exact: Vec<usize>,
    pub r_exact: Vec<usize>,
    pub e_exact: Vec<usize>,
    pub l_exact: Vec<usize>,
    pub ambiguous_features: Vec<usize>,
    pub ambiguous_samples: Vec<usize>,
}

impl OracleSolution {
    /// Inactive samples `|R| + |L|`.
    pub fn inactive_samples(&self) -> usize {
        self.r_exact.len() + self.l_exact.len()
    }

    pub fn inactive_features(&self) -> usize {
        self.f_exact.len()
    }

    /// `max_j |w_j - (1/alpha) S_beta(corr_j)|`.
    pub fn kkt1_residual(&self) -> f64 {
        let prm = &self.params;
        self.pair
            .w
            .iter()
            .zip(&self.correlations)
            .map(|(w, &u)| (w - crate::numeric::shrink(u, prm.beta) / prm.alpha).abs())
            .fold(0.0, f64::max)
    }

    /// `max_i |theta_i - clip(margin_i / gamma, 0, 1)|`.
    pub fn kkt2_residual(&self) -> f64 {
        let g = self.params.gamma;
        self.pair
            .theta
            .iter()
            .zip(&self.margins)
            .map(|(t, m)| (t - (m / g).clamp(0.0, 1.0)).abs())
            .fold(0.0, f64::max)
    }
}

/// Tolerance used by [`oracle_solve`]: `1e-10` relative to `P(0)`.
pub fn oracle_config(gamma: f64) -> SolverConfig {
    SolverConfig { max_epochs: 200_000, ..SolverConfig::relative(1e-10, gamma) }
}

pub fn oracle_solve(d: &Dataset, prm: &Params) -> Result<OracleSolution> {
    oracle_solve_with(d, prm, None, &oracle_config(prm.gamma))
}

/// Unscreened solve (never given a screening state) followed by a
/// projected-gradient polish, then exact set extraction.
pub fn oracle_solve_with(
    d: &Dataset,
    prm: &Params,
    warm: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<OracleSolution> {
    let empty = ScreeningState::new(d.p(), d.n());
    let res = solve(d, prm, &empty, warm, cfg)?;
    let pair = polish(d, prm, res.pair, 50)?;
    let gap = duality_gap(d, &pair, prm)?.gap;
    Ok(extract(d, prm, pair, gap, res.epochs))
}

/// Projected-gradient steps on the full dual with step `1/L` (`L` from the
/// Frobenius bound), kept only while the gap keeps shrinking.
fn polish(d: &Dataset, prm: &Params, pair: SolutionPair, iters: usize) -> Result<SolutionPair> {
    let n = d.n() as f64;
    let fro: f64 = (0..d.n()).map(|i| d.col(i).norm_sq()).sum();
    let lip = fro / (prm.alpha * n * n) + prm.gamma / n;
    let mut best_gap = duality_gap(d, &pair, prm)?.gap;
    let mut best = pair;
    for _ in 0..iters {
        let grad = crate::objective::dual_gradient(d, &best.theta, prm)?;
        let theta: Vec<f64> =
            best.theta.iter().zip(&grad).map(|(t, g)| (t - g / lip).clamp(0.0, 1.0)).collect();
        let w = recover_primal(d, &theta, prm, None)?;
        let cand = SolutionPair { w, theta };
        let gap = duality_gap(d, &cand, prm)?.gap;
        if gap < best_gap {
            best_gap = gap;
            best = cand;
        } else {
            break;
        }
    }
    Ok(best)
}

fn extract(d: &Dataset, prm: &Params, pair: SolutionPair, gap: f64, epochs: usize) -> OracleSolution {
    let n = d.n() as f64;
    let correlations: Vec<f64> = d.mul(&pair.theta).into_iter().map(|x| x / n).collect();
    let margins: Vec<f64> = d.mul_t(&pair.w).into_iter().map(|m| 1.0 - m).collect();
    let tau = BOUNDARY_TOL;

    let mut f_exact = Vec::new();
    let mut ambiguous_features = Vec::new();
    for (j, u) in correlations.iter().enumerate() {
        let a = u.abs();
        if a <= prm.beta - tau {
            f_exact.push(j);
        } else if a <= prm.beta + tau {
            ambiguous_features.push(j);
        }
    }
    let (mut r_exact, mut e_exact, mut l_exact, mut ambiguous_samples) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, &m) in margins.iter().enumerate() {
        if m.abs() <= tau || (m - prm.gamma).abs() <= tau {
            ambiguous_samples.push(i);
        } else if m < 0.0 {
            r_exact.push(i);
        } else if m > prm.gamma {
            l_exact.push(i);
        } else {
            e_exact.push(i);
        }
    }
    OracleSolution {
        params: *prm,
        pair,
        gap,
        epochs,
        correlations,
        margins,
        f_exact,
        r_exact,
        e_exact,
        l_exact,
        ambiguous_features,
        ambiguous_samples,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub violations_f: Vec<usize>,
    pub violations_r: Vec<usize>,
    pub violations_l: Vec<usize>,
    /// `|F_hat ∩ F| / |F|`; `None` when `F` is empty.
    pub coverage_f: Option<f64>,
    pub coverage_r: Option<f64>,
    pub coverage_l: Option<f64>,
}

impl CertificationReport {
    pub fn violations(&self) -> usize {
        self.violations_f.len() + self.violations_r.len() + self.violations_l.len()
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }
}

fn check_subset(
    screened: &[usize],
    exact: &[usize],
    ambiguous: &[usize],
    universe: usize,
) -> (Vec<usize>, Option<f64>) {
    let mut in_exact = vec![false; universe];
    exact.iter().for_each(|&i| in_exact[i] = true);
    let mut in_amb = vec![false; universe];
    ambiguous.iter().for_each(|&i| in_amb[i] = true);
    let violations = screened.iter().copied().filter(|&i| !in_exact[i] && !in_amb[i]).collect();
    let hits = screened.iter().filter(|&&i| in_exact[i]).count();
    let coverage = (!exact.is_empty()).then(|| hits as f64 / exact.len() as f64);
    (violations, coverage)
}

/// Checks `F_hat ⊆ F`, `R_hat ⊆ R`, `L_hat ⊆ L` (ambiguous indices allowed).
pub fn certify(state: &ScreeningState, oracle: &OracleSolution) -> CertificationReport {
    let (violations_f, coverage_f) =
        check_subset(state.f_hat(), &oracle.f_exact, &oracle.ambiguous_features, state.p());
    let (violations_r, coverage_r) =
        check_subset(state.r_hat(), &oracle.r_exact, &oracle.ambiguous_samples, state.n());
    let (violations_l, coverage_l) =
        check_subset(state.l_hat(), &oracle.l_exact, &oracle.ambiguous_samples, state.n());
    CertificationReport { violations_f, violations_r, violations_l, coverage_f, coverage_r, coverage_l }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{alpha_max, beta_max};
    use crate::datamodel::{generate_synthetic, SynthSpec};

    #[test]
    fn beyond_beta_max_ground_truth() {
        let d = generate_synthetic(&SynthSpec::new(50, 50, 5)).unwrap();
        let prm = Params::new(0.7, 1.1 * beta_max(&d), 0.5).unwrap();
        let o = oracle_solve(&d, &prm).unwrap();
        assert_eq!(o.l_exact.len(), d.n());
        assert_eq!(o.f_exact.len() + o.ambiguous_features.len(), d.p());
        assert!(o.pair.w.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn above_alpha_max_has_no_r() {
        let d = generate_synthetic(&SynthSpec::new(60, 50, 6)).unwrap();
        let beta = 0.4 * beta_max(&d);
        let prm = Params::new(1.5 * alpha_max(&d, beta, 0.5), beta, 0.5).unwrap();
        let o = oracle_solve(&d, &prm).unwrap();
        assert!(o.r_exact.is_empty());
        assert_eq!(o.e_exact.len() + o.l_exact.len() + o.ambiguous_samples.len(), d.n());
    }

    #[test]
    fn oracle_is_kkt_consistent() {
        let d = generate_synthetic(&SynthSpec::new(80, 60, 9)).unwrap();
        let beta = 0.2 * beta_max(&d);
        let prm = Params::new(0.1 * alpha_max(&d, beta, 0.5), beta, 0.5).unwrap();
        let o = oracle_solve(&d, &prm).unwrap();
        assert!(o.gap <= oracle_config(0.5).gap_tol);
        assert!(o.kkt1_residual() <= 1e-7);
        assert!(o.kkt2_residual() <= 1e-6, "kkt2 {}", o.kkt2_residual());
    }

    #[test]
    fn empty_state_certifies_with_zero_coverage() {
        let d = generate_synthetic(&SynthSpec::new(60, 50, 2)).unwrap();
        let beta = 0.3 * beta_max(&d);
        let prm = Params::new(0.3 * alpha_max(&d, beta, 0.5), beta, 0.5).unwrap();
        let o = oracle_solve(&d, &prm).unwrap();
        let rep = certify(&ScreeningState::new(d.p(), d.n()), &o);
        assert!(rep.passed());
        assert_eq!(rep.coverage_f, Some(0.0));
    }

    #[test]
    fn certify_flags_wrong_indices() {
        let d = generate_synthetic(&SynthSpec::new(60, 50, 2)).unwrap();
        let beta = 0.3 * beta_max(&d);
        let prm = Params::new(0.3 * alpha_max(&d, beta, 0.5), beta, 0.5).unwrap();
        let o = oracle_solve(&d, &prm).unwrap();
        let active = (0..d.p()).find(|j| !o.f_exact.contains(j) && !o.ambiguous_features.contains(j));
        let j = active.expect("some active feature");
        let state = ScreeningState::from_sets(d.p(), d.n(), &[j], &[], &[]).unwrap();
        assert_eq!(certify(&state, &o).violations_f, vec![j]);
    }
}
