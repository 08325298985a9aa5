//! Ball-shaped regions guaranteed to contain the primal or dual optimum at a
//! new `alpha`, given an optimum at a reference `alpha0` (same `beta`) and
//! whatever features/samples are already known to be inactive.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SifsError};
use crate::numeric::csum;
use crate::objective::SolutionPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleStatus {
    Active,
    /// Known `theta_i = 0`.
    Zero,
    /// Known `theta_i = 1`.
    One,
}

/// Inactive features `F`, zero-dual samples `R` and unit-dual samples `L`
/// identified so far. Sets are kept sorted and only grow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScreeningState {
    p: usize,
    n: usize,
    f_hat: Vec<usize>,
    r_hat: Vec<usize>,
    l_hat: Vec<usize>,
    #[serde(skip)]
    feature_screened: Vec<bool>,
    #[serde(skip)]
    sample_status: Vec<SampleStatus>,
}

impl ScreeningState {
    pub fn new(p: usize, n: usize) -> Self {
        Self {
            p,
            n,
            f_hat: Vec::new(),
            r_hat: Vec::new(),
            l_hat: Vec::new(),
            feature_screened: vec![false; p],
            sample_status: vec![SampleStatus::Active; n],
        }
    }

    pub fn from_sets(p: usize, n: usize, f: &[usize], r: &[usize], l: &[usize]) -> Result<Self> {
        let mut s = Self::new(p, n);
        s.add_features(f.iter().copied())?;
        s.add_samples(r.iter().copied(), SampleStatus::Zero)?;
        s.add_samples(l.iter().copied(), SampleStatus::One)?;
        Ok(s)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f_hat(&self) -> &[usize] {
        &self.f_hat
    }

    pub fn r_hat(&self) -> &[usize] {
        &self.r_hat
    }

    pub fn l_hat(&self) -> &[usize] {
        &self.l_hat
    }

    #[inline]
    pub fn is_feature_screened(&self, j: usize) -> bool {
        self.feature_screened[j]
    }

    #[inline]
    pub fn sample_status(&self, i: usize) -> SampleStatus {
        self.sample_status[i]
    }

    pub fn feature_mask(&self) -> &[bool] {
        &self.feature_screened
    }

    pub fn sample_statuses(&self) -> &[SampleStatus] {
        &self.sample_status
    }

    /// Complement of `F` (sorted).
    pub fn active_features(&self) -> Vec<usize> {
        (0..self.p).filter(|&j| !self.feature_screened[j]).collect()
    }

    /// Complement of `R ∪ L` (sorted).
    pub fn active_samples(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.sample_status[i] == SampleStatus::Active).collect()
    }

    pub fn screened_samples(&self) -> usize {
        self.r_hat.len() + self.l_hat.len()
    }

    pub fn screened_features(&self) -> usize {
        self.f_hat.len()
    }

    /// Adds features to `F`; returns the indices that were new.
    pub fn add_features(&mut self, idx: impl IntoIterator<Item = usize>) -> Result<Vec<usize>> {
        let mut added = Vec::new();
        for j in idx {
            if j >= self.p {
                return Err(SifsError::IndexOutOfRange { index: j, len: self.p });
            }
            if !self.feature_screened[j] {
                self.feature_screened[j] = true;
                added.push(j);
            }
        }
        merge_sorted(&mut self.f_hat, &mut added.clone());
        added.sort_unstable();
        Ok(added)
    }

    /// Adds samples to `R` (`Zero`) or `L` (`One`); returns the new indices.
    /// Moving a sample between `R` and `L` is an invariant violation.
    pub fn add_samples(
        &mut self,
        idx: impl IntoIterator<Item = usize>,
        status: SampleStatus,
    ) -> Result<Vec<usize>> {
        if status == SampleStatus::Active {
            return Err(SifsError::Invariant("cannot un-screen a sample".into()));
        }
        let mut added = Vec::new();
        for i in idx {
            if i >= self.n {
                return Err(SifsError::IndexOutOfRange { index: i, len: self.n });
            }
            match self.sample_status[i] {
                SampleStatus::Active => {
                    self.sample_status[i] = status;
                    added.push(i);
                }
                s if s == status => {}
                _ => {
                    return Err(SifsError::Invariant(format!(
                        "sample {i} cannot be in both R and L"
                    )))
                }
            }
        }
        let target = if status == SampleStatus::Zero { &mut self.r_hat } else { &mut self.l_hat };
        merge_sorted(target, &mut added.clone());
        added.sort_unstable();
        Ok(added)
    }

    pub fn is_superset_of(&self, other: &ScreeningState) -> bool {
        other.f_hat.iter().all(|&j| self.feature_screened[j])
            && other
                .r_hat
                .iter()
                .chain(&other.l_hat)
                .all(|&i| self.sample_status[i] == other.sample_status[i])
    }
}

fn merge_sorted(into: &mut Vec<usize>, new: &mut [usize]) {
    if new.is_empty() {
        return;
    }
    new.sort_unstable();
    into.extend_from_slice(new);
    into.sort_unstable();
}

/// A reference optimum at `(alpha, beta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub alpha: f64,
    pub beta: f64,
    pub pair: SolutionPair,
}

/// Closed ball `{x : ||x - center|| <= radius}` over the coordinates listed
/// in `index_map` (compacted; `center[k]` belongs to `index_map[k]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
    pub index_map: Vec<usize>,
    /// The squared radius came out negative and was clamped to zero.
    pub clamped: bool,
}

fn finish_radius(r2: f64) -> (f64, bool) {
    if r2 < 0.0 {
        log::debug!("negative squared radius {r2:e} clamped to 0");
        (0.0, true)
    } else {
        (r2.sqrt(), false)
    }
}

fn check_alpha(alpha: f64, reference: &ReferencePoint) -> Result<()> {
    if !(alpha > 0.0) || !(reference.alpha > 0.0) {
        return Err(SifsError::InvalidParam(format!(
            "alpha and reference alpha must be positive, got {alpha} and {}",
            reference.alpha
        )));
    }
    Ok(())
}

/// Ball containing `[w*(alpha, beta0)]` restricted to the unscreened features.
pub fn primal_ball(reference: &ReferencePoint, alpha: f64, state: &ScreeningState) -> Result<Ball> {
    check_alpha(alpha, reference)?;
    let w0 = &reference.pair.w;
    if w0.len() != state.p() {
        return Err(SifsError::DimensionMismatch { expected: state.p(), got: w0.len() });
    }
    let a0 = reference.alpha;
    let scale = (a0 + alpha) / (2.0 * alpha);
    let shift = (a0 - alpha) / (2.0 * alpha);

    let index_map = state.active_features();
    let center = index_map.iter().map(|&j| scale * w0[j]).collect();
    let full = csum(w0.iter().map(|x| x * x));
    let screened = csum(state.f_hat().iter().map(|&j| w0[j] * w0[j]));
    let (radius, clamped) = finish_radius(shift * shift * full - scale * scale * screened);
    Ok(Ball { center, radius, index_map, clamped })
}

/// Ball containing `[theta*(alpha, beta0)]` restricted to the unscreened
/// samples.
pub fn dual_ball(
    reference: &ReferencePoint,
    alpha: f64,
    gamma: f64,
    state: &ScreeningState,
) -> Result<Ball> {
    check_alpha(alpha, reference)?;
    crate::datamodel::validate_gamma(gamma)?;
    let t0 = &reference.pair.theta;
    if t0.len() != state.n() {
        return Err(SifsError::DimensionMismatch { expected: state.n(), got: t0.len() });
    }
    let a0 = reference.alpha;
    let scale = (a0 + alpha) / (2.0 * alpha);
    let offset = (alpha - a0) / (2.0 * gamma * alpha);
    let shift = (a0 - alpha) / (2.0 * alpha);
    // Per-coordinate distance from the unrestricted center to the fixed value
    // 1 (for L) and 0 (for R).
    let one_gap = ((2.0 * gamma - 1.0) * alpha + a0) / (2.0 * gamma * alpha);

    let index_map = state.active_samples();
    let center = index_map.iter().map(|&i| offset + scale * t0[i]).collect();
    let full = csum(t0.iter().map(|&t| {
        let e = t - 1.0 / gamma;
        e * e
    }));
    let in_l = csum(state.l_hat().iter().map(|&i| {
        let e = one_gap - scale * t0[i];
        e * e
    }));
    let in_r = csum(state.r_hat().iter().map(|&i| {
        let e = offset + scale * t0[i];
        e * e
    }));
    let (radius, clamped) = finish_radius(shift * shift * full - in_l - in_r);
    Ok(Ball { center, radius, index_map, clamped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Containment {
    pub contained: bool,
    pub distance: f64,
}

pub const CONTAINMENT_SLACK: f64 = 1e-8;

/// Whether `truth` (already restricted to `ball.index_map`) lies in the ball
/// up to [`CONTAINMENT_SLACK`].
pub fn check_containment(ball: &Ball, truth: &[f64]) -> Result<Containment> {
    if truth.len() != ball.center.len() {
        return Err(SifsError::DimensionMismatch { expected: ball.center.len(), got: truth.len() });
    }
    let distance = csum(truth.iter().zip(&ball.center).map(|(a, b)| (a - b) * (a - b))).sqrt();
    Ok(Containment { contained: distance <= ball.radius + CONTAINMENT_SLACK, distance })
}

/// Gathers `full[index_map[k]]`.
pub fn restrict_to(full: &[f64], index_map: &[usize]) -> Vec<f64> {
    index_map.iter().map(|&k| full[k]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(alpha: f64) -> ReferencePoint {
        ReferencePoint {
            alpha,
            beta: 0.1,
            pair: SolutionPair { w: vec![0.5, -1.0, 0.0, 2.0], theta: vec![0.0, 0.3, 1.0] },
        }
    }

    #[test]
    fn zero_radius_at_reference_alpha() {
        let r = reference(2.0);
        let s = ScreeningState::new(4, 3);
        let pb = primal_ball(&r, 2.0, &s).unwrap();
        assert_eq!(pb.radius, 0.0);
        assert_eq!(pb.center, r.pair.w);
        let db = dual_ball(&r, 2.0, 0.5, &s).unwrap();
        assert_eq!(db.radius, 0.0);
        assert_eq!(db.center, r.pair.theta);
        let c = check_containment(&db, &r.pair.theta).unwrap();
        assert!(c.contained && c.distance == 0.0);
    }

    #[test]
    fn empty_state_radii() {
        let r = reference(2.0);
        let s = ScreeningState::new(4, 3);
        let alpha = 1.5;
        let pb = primal_ball(&r, alpha, &s).unwrap();
        let wn = (0.25f64 + 1.0 + 4.0).sqrt();
        assert!((pb.radius - 0.5 / 3.0 * wn).abs() < 1e-15);
        let db = dual_ball(&r, alpha, 0.5, &s).unwrap();
        let tn = (4.0f64 + 1.7 * 1.7 + 1.0).sqrt();
        assert!((db.radius - 0.5 / 3.0 * tn).abs() < 1e-15);
    }

    #[test]
    fn screening_shrinks_radii() {
        let r = reference(2.0);
        let empty = ScreeningState::new(4, 3);
        let grown = ScreeningState::from_sets(4, 3, &[2], &[0], &[2]).unwrap();
        let alpha = 1.2;
        let p0 = primal_ball(&r, alpha, &empty).unwrap();
        let p1 = primal_ball(&r, alpha, &grown).unwrap();
        assert!(p1.radius <= p0.radius);
        assert_eq!(p1.index_map, vec![0, 1, 3]);
        let d0 = dual_ball(&r, alpha, 0.5, &empty).unwrap();
        let d1 = dual_ball(&r, alpha, 0.5, &grown).unwrap();
        assert!(d1.radius <= d0.radius);
        assert_eq!(d1.index_map, vec![1]);
    }

    #[test]
    fn bad_alpha_and_dims() {
        let r = reference(2.0);
        let s = ScreeningState::new(4, 3);
        assert!(primal_ball(&r, 0.0, &s).is_err());
        assert!(dual_ball(&r, -1.0, 0.5, &s).is_err());
        let ball = primal_ball(&r, 1.0, &s).unwrap();
        assert!(check_containment(&ball, &[0.0]).is_err());
    }

    #[test]
    fn state_sets_stay_disjoint() {
        let mut s = ScreeningState::new(3, 4);
        assert_eq!(s.add_samples([3, 1], SampleStatus::Zero).unwrap(), vec![1, 3]);
        assert_eq!(s.add_samples([1], SampleStatus::Zero).unwrap(), Vec::<usize>::new());
        assert!(matches!(s.add_samples([1], SampleStatus::One), Err(SifsError::Invariant(_))));
        assert_eq!(s.add_features([2, 0, 2]).unwrap(), vec![0, 2]);
        assert_eq!(s.f_hat(), &[0, 2]);
        assert_eq!(s.active_samples(), vec![0, 2]);
        assert!(s.add_features([9]).is_err());
    }
}
