use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Result, SifsError};

/// Two-block Gaussian generator: an informative block whose class means are
/// `+mu` / `-mu` with variance 0.75, and a sparse standard-normal background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n: usize,
    pub p: usize,
    /// Probability that a background entry is nonzero.
    pub eta: f64,
    pub mu_scale: f64,
    pub informative_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self { n: 1000, p: 200, eta: 0.02, mu_scale: 1.5, informative_fraction: 0.02, seed: 0 }
    }
}

const INFORMATIVE_VARIANCE: f64 = 0.75;

impl SynthSpec {
    pub fn new(n: usize, p: usize, seed: u64) -> Self {
        Self { n, p, seed, ..Self::default() }
    }

    /// Size of the informative block, `floor(informative_fraction * p)`.
    pub fn informative_dims(&self) -> usize {
        (self.informative_fraction * self.p as f64 + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SifsError::InvalidParam(m));
        if self.n == 0 || self.p == 0 {
            return bad(format!("n and p must be positive, got n={} p={}", self.n, self.p));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad(format!("eta must lie in [0, 1], got {}", self.eta));
        }
        if !(self.informative_fraction > 0.0 && self.informative_fraction < 1.0) {
            return bad(format!(
                "informative_fraction must lie in (0, 1), got {}",
                self.informative_fraction
            ));
        }
        if self.informative_dims() < 1 {
            return bad("informative block is empty; increase p or informative_fraction".into());
        }
        if !self.mu_scale.is_finite() {
            return bad("mu_scale must be finite".into());
        }
        Ok(())
    }
}

/// Draws a balanced dataset (labels alternate `+1, -1, ...`). Deterministic
/// for a fixed seed. Features are not normalized.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.informative_dims();
    let sd = INFORMATIVE_VARIANCE.sqrt();

    let mut labels = Vec::with_capacity(spec.n);
    let mut columns = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let y = if i % 2 == 0 { 1.0 } else { -1.0 };
        let mut col = Vec::with_capacity(k + (spec.eta * spec.p as f64) as usize + 1);
        for j in 0..k {
            let z: f64 = rng.sample(StandardNormal);
            let x = y * spec.mu_scale + sd * z;
            col.push((j, y * x));
        }
        for j in k..spec.p {
            if rng.random::<f64>() < spec.eta {
                let z: f64 = rng.sample(StandardNormal);
                col.push((j, y * z));
            }
        }
        labels.push(y);
        columns.push(col);
    }
    Dataset::from_signed_columns(spec.p, labels, columns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_dimensions() {
        let d = generate_synthetic(&SynthSpec::new(10_000, 1000, 3)).unwrap();
        assert_eq!((d.n(), d.p()), (10_000, 1000));
        assert_eq!(d.labels().iter().filter(|&&y| y > 0.0).count(), 5000);
        assert_eq!(SynthSpec::new(10_000, 1000, 3).informative_dims(), 20);
    }

    #[test]
    fn zero_eta_leaves_background_empty() {
        let spec = SynthSpec { eta: 0.0, ..SynthSpec::new(200, 100, 1) };
        let d = generate_synthetic(&spec).unwrap();
        let k = spec.informative_dims();
        for j in k..d.p() {
            assert_eq!(d.row(j).nnz(), 0);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = SynthSpec { seed: 7, ..SynthSpec::new(100, 50, 7) };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&SynthSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn informative_block_has_positive_signed_mean() {
        let d = generate_synthetic(&SynthSpec::new(4000, 100, 2)).unwrap();
        let mean = d.row(0).sum() / d.n() as f64;
        assert!((mean - 1.5).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(generate_synthetic(&SynthSpec { eta: 1.5, ..SynthSpec::default() }).is_err());
        assert!(generate_synthetic(&SynthSpec { p: 10, ..SynthSpec::default() }).is_err());
        assert!(generate_synthetic(&SynthSpec { informative_fraction: 1.0, ..SynthSpec::default() })
            .is_err());
    }
}
