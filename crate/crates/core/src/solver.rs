//! Coordinate descent on the reduced dual: samples fixed by screening are
//! dropped as variables (those in `L` fold into a constant offset) and
//! screened features are dropped as rows.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::{Dataset, Params};
use crate::error::{Result, SifsError};
use crate::estimation::{SampleStatus, ScreeningState};
use crate::numeric::{csum, shrink};
use crate::objective::{smoothed_loss, SolutionPair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Absolute duality-gap threshold.
    pub gap_tol: f64,
    pub max_epochs: usize,
    pub shuffle_seed: u64,
}

impl SolverConfig {
    /// `gap_tol = rel * P(0)`, where `P(0) = 1 - gamma/2`.
    pub fn relative(rel: f64, gamma: f64) -> Self {
        Self { gap_tol: rel * (1.0 - 0.5 * gamma), max_epochs: 20_000, shuffle_seed: 0 }
    }

    /// Default path tolerance: `1e-8` relative to `P(0)`.
    pub fn default_for(gamma: f64) -> Self {
        Self::relative(1e-8, gamma)
    }

    /// Tolerance required of solutions used as screening references.
    pub fn reference_for(gamma: f64) -> Self {
        Self::relative(1e-10, gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tol > 0.0) {
            return Err(SifsError::InvalidParam(format!("gap_tol must be positive, got {}", self.gap_tol)));
        }
        if self.max_epochs == 0 {
            return Err(SifsError::InvalidParam("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// The reduced dual over the unscreened samples `D^c` and features `F^c`:
///
/// `min (1/2a) ||S_b((1/n) G1 t + g2)||^2 + (g/2n)||t||^2 - (1/n)<1, t>`
///
/// with `G1` the `F^c x D^c` block and `g2 = (1/n) * (F^c x L block) * 1`.
/// `n` is always the full sample count.
#[derive(Debug, Clone)]
pub struct ScaledProblem<'a> {
    data: &'a Dataset,
    state: &'a ScreeningState,
    params: Params,
    features: Vec<usize>,
    samples: Vec<usize>,
    col_ptr: Vec<usize>,
    col_feat: Vec<usize>,
    col_val: Vec<f64>,
    col_sq: Vec<f64>,
    offset: Vec<f64>,
}

impl<'a> ScaledProblem<'a> {
    pub fn params(&self) -> &Params {
        &self.params
    }

    /// `(|F^c|, |D^c|)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.features.len(), self.samples.len())
    }

    pub fn active_features(&self) -> &[usize] {
        &self.features
    }

    pub fn active_samples(&self) -> &[usize] {
        &self.samples
    }

    /// The precontracted offset `g2` (indexed like `active_features`).
    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn n_full(&self) -> usize {
        self.data.n()
    }

    fn column(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.col_ptr[k], self.col_ptr[k + 1]);
        self.col_feat[a..b].iter().copied().zip(self.col_val[a..b].iter().copied())
    }

    /// `v = (1/n) G1 t + g2`.
    fn inner(&self, theta_hat: &[f64]) -> Vec<f64> {
        let n = self.n_full() as f64;
        let mut v = vec![0.0; self.features.len()];
        for (k, &t) in theta_hat.iter().enumerate() {
            if t != 0.0 {
                for (f, x) in self.column(k) {
                    v[f] += x * t;
                }
            }
        }
        for (vf, g) in v.iter_mut().zip(&self.offset) {
            *vf = *vf / n + g;
        }
        v
    }

    pub fn objective(&self, theta_hat: &[f64]) -> Result<f64> {
        if theta_hat.len() != self.samples.len() {
            return Err(SifsError::DimensionMismatch { expected: self.samples.len(), got: theta_hat.len() });
        }
        crate::objective::check_box(theta_hat)?;
        let v = self.inner(theta_hat);
        let n = self.n_full() as f64;
        let prm = &self.params;
        let s = csum(v.iter().map(|&x| shrink(x, prm.beta).powi(2)));
        let t2 = csum(theta_hat.iter().map(|t| t * t));
        let t1 = csum(theta_hat.iter().copied());
        Ok(s / (2.0 * prm.alpha) + prm.gamma / (2.0 * n) * t2 - t1 / n)
    }

    /// Gap of the reduced pair: primal restricted to `F^c` (evaluated on all
    /// `n` samples) plus the reduced dual with its fixed coordinates added
    /// back. Returns `(primal, dual, w on F^c)`.
    fn evaluate(&self, theta_hat: &[f64], v: &[f64]) -> (f64, f64, Vec<f64>) {
        let prm = &self.params;
        let n = self.n_full();
        let nf = n as f64;
        let w: Vec<f64> = v.iter().map(|&x| shrink(x, prm.beta) / prm.alpha).collect();

        let mut margins = vec![0.0; n];
        for (k, &wf) in w.iter().enumerate() {
            if wf != 0.0 {
                for (i, x) in self.data.row(self.features[k]).iter() {
                    margins[i] += x * wf;
                }
            }
        }
        let loss = csum(margins.iter().map(|&m| smoothed_loss(1.0 - m, prm.gamma)));
        let l2 = csum(w.iter().map(|x| x * x));
        let l1 = csum(w.iter().map(|x| x.abs()));
        let primal = loss / nf + 0.5 * prm.alpha * l2 + prm.beta * l1;

        let ones = self.state.l_hat().len() as f64;
        let s = csum(v.iter().map(|&x| shrink(x, prm.beta).powi(2)));
        let t2 = csum(theta_hat.iter().map(|t| t * t)) + ones;
        let t1 = csum(theta_hat.iter().copied()) + ones;
        let dual = s / (2.0 * prm.alpha) + prm.gamma / (2.0 * nf) * t2 - t1 / nf;
        (primal, dual, w)
    }
}

/// Assembles the reduced problem for `state`.
pub fn build_scaled<'a>(d: &'a Dataset, prm: &Params, state: &'a ScreeningState) -> Result<ScaledProblem<'a>> {
    prm.validate()?;
    if state.p() != d.p() || state.n() != d.n() {
        return Err(SifsError::DimensionMismatch { expected: d.p() * d.n(), got: state.p() * state.n() });
    }
    let features = state.active_features();
    let samples = state.active_samples();
    let mut pos = vec![usize::MAX; d.p()];
    for (k, &j) in features.iter().enumerate() {
        pos[j] = k;
    }
    // Entries are written unconditionally and kept by advancing the cursor,
    // which avoids a poorly predicted branch per entry.
    let cap: usize = samples.iter().map(|&i| d.col(i).nnz()).sum();
    let mut col_feat = vec![0usize; cap];
    let mut col_val = vec![0.0; cap];
    let mut col_ptr = Vec::with_capacity(samples.len() + 1);
    let mut col_sq = Vec::with_capacity(samples.len());
    let mut len = 0;
    col_ptr.push(0);
    for &i in &samples {
        let mut sq = 0.0;
        for (j, x) in d.col(i).iter() {
            let k = pos[j];
            let keep = k != usize::MAX;
            col_feat[len] = k;
            col_val[len] = x;
            sq += if keep { x * x } else { 0.0 };
            len += keep as usize;
        }
        col_ptr.push(len);
        col_sq.push(sq);
    }
    col_feat.truncate(len);
    col_val.truncate(len);
    let n = d.n() as f64;
    let mut offset = vec![0.0; features.len() + 1];
    for &i in state.l_hat() {
        for (j, x) in d.col(i).iter() {
            // Screened features land in the spare last slot.
            offset[pos[j].min(features.len())] += x;
        }
    }
    offset.pop();
    offset.iter_mut().for_each(|o| *o /= n);
    Ok(ScaledProblem { data: d, state, params: *prm, features, samples, col_ptr, col_feat, col_val, col_sq, offset })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledSolution {
    pub theta_hat: Vec<f64>,
    pub epochs: usize,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Randomly permuted coordinate descent with per-coordinate Lipschitz steps,
/// clipped to `[0, 1]`. Stops once the reduced pair's duality gap is at most
/// `cfg.gap_tol` (checked once per epoch, and once before the first).
pub fn solve_scaled(sp: &ScaledProblem<'_>, warm: Option<&[f64]>, cfg: &SolverConfig) -> Result<ScaledSolution> {
    cfg.validate()?;
    let m = sp.samples.len();
    let mut theta = match warm {
        Some(w) if w.len() != m => return Err(SifsError::DimensionMismatch { expected: m, got: w.len() }),
        Some(w) => w.iter().map(|t| t.clamp(0.0, 1.0)).collect(),
        None => vec![0.5; m],
    };
    let prm = sp.params;
    let n = sp.n_full() as f64;
    let inv_an = 1.0 / (prm.alpha * n);
    let inv_n = 1.0 / n;
    let inv_lip: Vec<f64> = sp.col_sq.iter().map(|sq| 1.0 / (sq / (prm.alpha * n * n) + prm.gamma / n)).collect();

    let mut v = sp.inner(&theta);
    let (mut primal, mut dual, _) = sp.evaluate(&theta, &v);
    if primal + dual <= cfg.gap_tol || m == 0 {
        return Ok(ScaledSolution { theta_hat: theta, epochs: 0, primal, dual, gap: primal + dual });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut perm: Vec<usize> = (0..m).collect();
    for epoch in 1..=cfg.max_epochs {
        perm.shuffle(&mut rng);
        let mut sv: Vec<f64> = v.iter().map(|&x| shrink(x, prm.beta)).collect();
        for &k in &perm {
            let mut g = 0.0;
            for (f, x) in sp.column(k) {
                g += x * sv[f];
            }
            let tk = theta[k];
            let grad = g * inv_an + (prm.gamma * tk - 1.0) * inv_n;
            let next = (tk - grad * inv_lip[k]).clamp(0.0, 1.0);
            let delta = next - tk;
            if delta != 0.0 {
                theta[k] = next;
                let step = delta * inv_n;
                for (f, x) in sp.column(k) {
                    v[f] += step * x;
                    sv[f] = shrink(v[f], prm.beta);
                }
            }
        }
        v = sp.inner(&theta);
        (primal, dual, _) = sp.evaluate(&theta, &v);
        if primal + dual <= cfg.gap_tol {
            return Ok(ScaledSolution { theta_hat: theta, epochs: epoch, primal, dual, gap: primal + dual });
        }
    }
    Err(SifsError::NonConvergence { epochs: cfg.max_epochs, gap: primal + dual })
}

/// Full pair from the reduced dual solution: `theta` is 0 on `R`, 1 on `L`
/// and `theta_hat` elsewhere; `w` is 0 on `F` and recovered through the KKT
/// map on `F^c`.
pub fn extend_and_recover(
    d: &Dataset,
    theta_hat: &[f64],
    state: &ScreeningState,
    prm: &Params,
) -> Result<SolutionPair> {
    let samples = state.active_samples();
    if samples.len() != theta_hat.len() {
        return Err(SifsError::DimensionMismatch { expected: samples.len(), got: theta_hat.len() });
    }
    let mut theta: Vec<f64> = state
        .sample_statuses()
        .iter()
        .map(|s| if *s == SampleStatus::One { 1.0 } else { 0.0 })
        .collect();
    for (&i, &t) in samples.iter().zip(theta_hat) {
        theta[i] = t;
    }
    let features = state.active_features();
    let wf = crate::objective::recover_primal(d, &theta, prm, Some(&features))?;
    let mut w = vec![0.0; d.p()];
    for (&j, x) in features.iter().zip(wf) {
        w[j] = x;
    }
    Ok(SolutionPair { w, theta })
}

/// Result of [`solve`]: the extended pair plus solver statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub pair: SolutionPair,
    pub epochs: usize,
    pub gap: f64,
}

/// Builds, solves and extends in one step. `warm` is a full-length theta
/// (e.g. the previous grid point's solution); it is restricted to `D^c`.
pub fn solve(
    d: &Dataset,
    prm: &Params,
    state: &ScreeningState,
    warm: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<SolveResult> {
    let sp = build_scaled(d, prm, state)?;
    let warm_hat = match warm {
        Some(t) if t.len() != d.n() => return Err(SifsError::DimensionMismatch { expected: d.n(), got: t.len() }),
        Some(t) => Some(sp.active_samples().iter().map(|&i| t[i]).collect::<Vec<_>>()),
        None => None,
    };
    let sol = solve_scaled(&sp, warm_hat.as_deref(), cfg)?;
    let pair = extend_and_recover(d, &sol.theta_hat, state, prm)?;
    Ok(SolveResult { pair, epochs: sol.epochs, gap: sol.gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{generate_synthetic, SynthSpec};
    use crate::objective::duality_gap;

    fn setup() -> (Dataset, Params) {
        let d = generate_synthetic(&SynthSpec::new(80, 50, 11)).unwrap();
        let bmax = crate::boundary::beta_max(&d);
        let amax = crate::boundary::alpha_max(&d, 0.3 * bmax, 0.5);
        (d, Params::new(0.2 * amax, 0.3 * bmax, 0.5).unwrap())
    }

    #[test]
    fn empty_state_reduces_to_full_problem() {
        let (d, prm) = setup();
        let s = ScreeningState::new(d.p(), d.n());
        let sp = build_scaled(&d, &prm, &s).unwrap();
        assert_eq!(sp.dims(), (d.p(), d.n()));
        assert!(sp.offset().iter().all(|&x| x == 0.0));
        let theta = vec![0.3; d.n()];
        let full = crate::objective::dual_objective(&d, &theta, &prm).unwrap();
        assert!((sp.objective(&theta).unwrap() - full).abs() < 1e-14);
    }

    #[test]
    fn fully_screened_samples_give_empty_problem() {
        let (d, prm) = setup();
        let all: Vec<usize> = (0..d.n()).collect();
        let s = ScreeningState::from_sets(d.p(), d.n(), &[], &[], &all).unwrap();
        let sp = build_scaled(&d, &prm, &s).unwrap();
        assert_eq!(sp.dims().1, 0);
        let sol = solve_scaled(&sp, None, &SolverConfig::default_for(0.5)).unwrap();
        assert!(sol.theta_hat.is_empty());
        let pair = extend_and_recover(&d, &sol.theta_hat, &s, &prm).unwrap();
        assert!(pair.theta.iter().all(|&t| t == 1.0));
        let expect = crate::objective::recover_primal(&d, &vec![1.0; d.n()], &prm, None).unwrap();
        assert_eq!(pair.w, expect);
    }

    #[test]
    fn converges_and_certifies_gap() {
        let (d, prm) = setup();
        let s = ScreeningState::new(d.p(), d.n());
        let cfg = SolverConfig::reference_for(0.5);
        let res = solve(&d, &prm, &s, None, &cfg).unwrap();
        assert!(res.pair.theta.iter().all(|&t| (0.0..=1.0).contains(&t)));
        let full = duality_gap(&d, &res.pair, &prm).unwrap();
        assert!(full.gap <= cfg.gap_tol * 1.0001 && full.gap >= -1e-9, "gap {}", full.gap);

        let again = solve(&d, &prm, &s, Some(&res.pair.theta), &cfg).unwrap();
        assert!(again.epochs <= 1);
    }

    #[test]
    fn non_convergence_reports_gap() {
        let (d, prm) = setup();
        let s = ScreeningState::new(d.p(), d.n());
        let cfg = SolverConfig { gap_tol: 1e-300, max_epochs: 2, shuffle_seed: 0 };
        match solve(&d, &prm, &s, None, &cfg) {
            Err(SifsError::NonConvergence { epochs: 2, gap }) => assert!(gap >= 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_configs() {
        assert!(SolverConfig { gap_tol: 0.0, max_epochs: 1, shuffle_seed: 0 }.validate().is_err());
        assert!(SolverConfig { gap_tol: 1.0, max_epochs: 0, shuffle_seed: 0 }.validate().is_err());
    }
}
