//! Small numeric helpers shared by the objective, screening and solver code.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        let (hi, lo) = if self.sum.abs() >= x.abs() { (self.sum, x) } else { (x, self.sum) };
        self.comp += (hi - t) + lo;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of an iterator.
pub fn csum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Scalar soft-thresholding `sign(u) * max(|u| - beta, 0)`.
#[inline]
pub fn shrink(u: f64, beta: f64) -> f64 {
    if u > beta {
        u - beta
    } else if u < -beta {
        u + beta
    } else {
        0.0
    }
}

pub fn norm_sq(v: &[f64]) -> f64 {
    csum(v.iter().map(|x| x * x))
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Log-spaced values from `start` to `end` inclusive (geometric interpolation).
pub fn log_space(start: f64, end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let (ls, le) = (start.ln(), end.ln());
            let step = (le - ls) / (count - 1) as f64;
            (0..count)
                .map(|k| {
                    if k == 0 {
                        start
                    } else if k == count - 1 {
                        end
                    } else {
                        (ls + step * k as f64).exp()
                    }
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut xs = vec![1e16, 1.0, -1e16];
        xs.extend(std::iter::repeat(1e-3).take(1000));
        assert!((csum(xs) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn shrink_cases() {
        assert_eq!(shrink(2.0, 1.0), 1.0);
        assert_eq!(shrink(-3.0, 1.0), -2.0);
        assert_eq!(shrink(0.5, 1.0), 0.0);
        assert_eq!(shrink(0.5, 0.0), 0.5);
    }

    #[test]
    fn log_space_endpoints() {
        let v = log_space(1.0, 0.05, 10);
        assert_eq!(v.len(), 10);
        assert_eq!(v[0], 1.0);
        assert_eq!(v[9], 0.05);
        assert!(v.windows(2).all(|w| w[0] > w[1]));
        assert_eq!(log_space(1.0, 0.1, 2), vec![1.0, 0.1]);
    }
}
