#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sifs::{Dataset, Params};

/// Dense signed data, `x[j][i]` for feature `j` and sample `i`.
pub struct Dense {
    pub x: Vec<Vec<f64>>,
    pub n: usize,
    pub p: usize,
}

impl Dense {
    pub fn of(d: &Dataset) -> Self {
        let mut x = vec![vec![0.0; d.n()]; d.p()];
        for (j, row) in x.iter_mut().enumerate() {
            for (i, v) in d.row(j).iter() {
                row[i] = v;
            }
        }
        Dense { x, n: d.n(), p: d.p() }
    }

    /// `(1/n) xbar theta`.
    pub fn corr(&self, theta: &[f64]) -> Vec<f64> {
        self.x.iter().map(|row| row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() / self.n as f64).collect()
    }

    pub fn margins(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| 1.0 - (0..self.p).map(|j| self.x[j][i] * w[j]).sum::<f64>()).collect()
    }

    pub fn beta_max(&self) -> f64 {
        self.corr(&vec![1.0; self.n]).iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn alpha_max(&self, beta: f64, gamma: f64) -> f64 {
        let s: Vec<f64> = self.corr(&vec![1.0; self.n]).iter().map(|&u| soft(u, beta)).collect();
        (0..self.n)
            .map(|i| (0..self.p).map(|j| self.x[j][i] * s[j]).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
            / (1.0 - gamma)
    }

    pub fn primal(&self, w: &[f64], prm: &Params) -> f64 {
        let loss: f64 = self.margins(w).iter().map(|&t| hinge(t, prm.gamma)).sum::<f64>() / self.n as f64;
        loss + 0.5 * prm.alpha * w.iter().map(|v| v * v).sum::<f64>() + prm.beta * w.iter().map(|v| v.abs()).sum::<f64>()
    }

    pub fn dual(&self, theta: &[f64], prm: &Params) -> f64 {
        let n = self.n as f64;
        let s: f64 = self.corr(theta).iter().map(|&u| soft(u, prm.beta).powi(2)).sum();
        s / (2.0 * prm.alpha) + prm.gamma / (2.0 * n) * theta.iter().map(|t| t * t).sum::<f64>()
            - theta.iter().sum::<f64>() / n
    }

    pub fn grad(&self, theta: &[f64], prm: &Params) -> Vec<f64> {
        let n = self.n as f64;
        let s: Vec<f64> = self.corr(theta).iter().map(|&u| soft(u, prm.beta)).collect();
        (0..self.n)
            .map(|i| {
                let xs: f64 = (0..self.p).map(|j| self.x[j][i] * s[j]).sum();
                xs / (prm.alpha * n) + (prm.gamma * theta[i] - 1.0) / n
            })
            .collect()
    }

    pub fn recover(&self, theta: &[f64], prm: &Params) -> Vec<f64> {
        self.corr(theta).iter().map(|&u| soft(u, prm.beta) / prm.alpha).collect()
    }

    /// Accelerated projected gradient on the dual box, run to a tiny gap.
    pub fn solve(&self, prm: &Params) -> (Vec<f64>, Vec<f64>) {
        let n = self.n as f64;
        let fro: f64 = self.x.iter().flatten().map(|v| v * v).sum();
        let lip = fro / (prm.alpha * n * n) + prm.gamma / n;
        let mut theta = vec![0.5; self.n];
        let mut y = theta.clone();
        let mut t = 1.0_f64;
        let tol = 1e-15 * (1.0 - prm.gamma / 2.0);
        for it in 0..2_000_000 {
            let g = self.grad(&y, prm);
            let next: Vec<f64> = y.iter().zip(&g).map(|(a, b)| (a - b / lip).clamp(0.0, 1.0)).collect();
            let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = next.iter().zip(&theta).map(|(a, b)| a + (t - 1.0) / tn * (a - b)).collect();
            // Restart momentum when the objective goes up.
            if self.dual(&next, prm) > self.dual(&theta, prm) {
                y = next.clone();
                t = 1.0;
            } else {
                t = tn;
            }
            theta = next;
            if it % 50 == 0 {
                let w = self.recover(&theta, prm);
                if self.primal(&w, prm) + self.dual(&theta, prm) <= tol {
                    break;
                }
            }
        }
        let w = self.recover(&theta, prm);
        (w, theta)
    }
}

pub fn soft(u: f64, beta: f64) -> f64 {
    u.signum() * (u.abs() - beta).max(0.0)
}

pub fn hinge(t: f64, gamma: f64) -> f64 {
    if t < 0.0 {
        0.0
    } else if t <= gamma {
        t * t / (2.0 * gamma)
    } else {
        t - gamma / 2.0
    }
}

/// Random dense instance with a weak class signal and some exact zeros.
pub fn random_dataset(n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let rows: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            (0..n)
                .map(|i| {
                    if rng.random::<f64>() < 0.3 {
                        0.0
                    } else {
                        let shift = if j < 3 { 0.8 } else { 0.0 };
                        labels[i] * (shift * labels[i] + rng.random_range(-1.0..1.0))
                    }
                })
                .collect()
        })
        .collect();
    Dataset::from_signed_dense(&rows, labels).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
