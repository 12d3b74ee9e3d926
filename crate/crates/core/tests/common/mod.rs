//! Reference computations shared by the integration tests. Nothing here calls
//! into the library's own numerics, so agreement is a real cross-check.

#![allow(dead_code, clippy::needless_range_loop)]

use std::f64::consts::PI;

pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn big_phi(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Composite Simpson rule on `[a, b]` with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Mean and standard deviation of the skew-normal `(ξ, ω, α)` by quadrature.
pub fn skew_normal_moments(xi: f64, omega: f64, alpha: f64) -> (f64, f64) {
    let pdf = |z: f64| {
        let u = (z - xi) / omega;
        2.0 / omega * phi(u) * big_phi(alpha * u)
    };
    let (a, b) = (xi - 12.0 * omega, xi + 12.0 * omega);
    let n = 200_000;
    let mass = simpson(pdf, a, b, n);
    let m = simpson(|z| z * pdf(z), a, b, n) / mass;
    let v = simpson(|z| (z - m).powi(2) * pdf(z), a, b, n) / mass;
    (m, v.sqrt())
}

/// Mean and batch-means standard error with `⌊√n⌋` batches.
pub fn batch_mean_se(x: &[f64]) -> (f64, f64) {
    let b = (x.len() as f64).sqrt() as usize;
    let size = x.len() / b;
    let means: Vec<f64> = (0..b)
        .map(|i| x[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let g = means.iter().sum::<f64>() / b as f64;
    let v = means.iter().map(|m| (m - g).powi(2)).sum::<f64>() / (b - 1) as f64;
    (g, (v / b as f64).sqrt())
}

pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// `(ln det A, A⁻¹)` of a symmetric positive-definite matrix via Cholesky.
pub fn chol_logdet_inverse(a: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (a[i][i] - s).sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    let logdet = 2.0 * (0..n).map(|i| l[i][i].ln()).sum::<f64>();
    let inv = (0..n)
        .map(|j| {
            let e: Vec<f64> = (0..n).map(|i| f64::from(u8::from(i == j))).collect();
            solve(a.to_vec(), e)
        })
        .collect::<Vec<_>>();
    (logdet, inv)
}

/// Linear-Gaussian state-space model `z₁ ~ N(0, p0)`, `z_t = a z_{t−1} + N(0, q)`,
/// `x_t = c z_t + N(0, r)`.
#[derive(Clone, Copy, Debug)]
pub struct Lg {
    pub a: f64,
    pub q: f64,
    pub c: f64,
    pub r: f64,
    pub p0: f64,
}

impl Lg {
    /// Prior covariance of `z_{1:T}`.
    pub fn prior_cov(&self, t_len: usize) -> Vec<Vec<f64>> {
        let mut var = vec![self.p0; t_len];
        for t in 1..t_len {
            var[t] = self.a * self.a * var[t - 1] + self.q;
        }
        let mut k = vec![vec![0.0; t_len]; t_len];
        for i in 0..t_len {
            for j in i..t_len {
                let v = var[i] * self.a.powi((j - i) as i32);
                k[i][j] = v;
                k[j][i] = v;
            }
        }
        k
    }

    /// Exact posterior means of `z_t | x_{1:T}` from the dense precision
    /// `K⁻¹ + (c²/r) I` and linear term `c x / r`.
    pub fn posterior_means(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let (_, kinv) = chol_logdet_inverse(&self.prior_cov(n));
        let mut p = kinv;
        for (i, row) in p.iter_mut().enumerate() {
            row[i] += self.c * self.c / self.r;
        }
        let h: Vec<f64> = x.iter().map(|xi| self.c * xi / self.r).collect();
        solve(p, h)
    }

    /// `ln p(x_{1:T})` with `x ~ N(0, c² K + r I)`.
    pub fn log_marginal(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut s = self.prior_cov(n);
        for (i, row) in s.iter_mut().enumerate() {
            for v in row.iter_mut() {
                *v *= self.c * self.c;
            }
            row[i] += self.r;
        }
        let (logdet, inv) = chol_logdet_inverse(&s);
        let quad: f64 = (0..n)
            .map(|i| (0..n).map(|j| x[i] * inv[i][j] * x[j]).sum::<f64>())
            .sum();
        -0.5 * (n as f64 * (2.0 * PI).ln() + logdet + quad)
    }
}

/// Mean and standard deviation of `p̃(z) ∝ N(z; 0, 1) Σ_M Π_{j∈M} N(x_j; z, 1)^{n/m}`
/// by grid integration over every mini-batch.
pub fn perturbed_moments_grid(data: &[f64], m: usize) -> (f64, f64) {
    let n = data.len();
    let k = n as f64 / m as f64;
    let mut subsets = Vec::new();
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        subsets.push(idx.clone());
        let mut i = m;
        while i > 0 && idx[i - 1] == n - m + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..m {
            idx[j] = idx[j - 1] + 1;
        }
    }
    let log_dens = |z: f64| {
        let terms: Vec<f64> = subsets
            .iter()
            .map(|s| {
                s.iter()
                    .map(|&j| -0.5 * k * (data[j] - z).powi(2))
                    .sum::<f64>()
            })
            .collect();
        let mx = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        -0.5 * z * z + mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln()
    };
    let grid: Vec<f64> = (0..=40_000).map(|i| -10.0 + i as f64 * 5e-4).collect();
    let lw: Vec<f64> = grid.iter().map(|&z| log_dens(z)).collect();
    let mx = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lw.iter().map(|l| (l - mx).exp()).collect();
    let mass: f64 = w.iter().sum();
    let mean = grid.iter().zip(&w).map(|(z, w)| z * w).sum::<f64>() / mass;
    let var = grid
        .iter()
        .zip(&w)
        .map(|(z, w)| (z - mean).powi(2) * w)
        .sum::<f64>()
        / mass;
    (mean, var.sqrt())
}

/// Conjugate posterior `(mean, var)` for `z ~ N(0, s0)`, `x_i ~ N(z, r)`.
pub fn conjugate_posterior(s0: f64, r: f64, x: &[f64]) -> (f64, f64) {
    let prec = 1.0 / s0 + x.len() as f64 / r;
    (x.iter().sum::<f64>() / r / prec, 1.0 / prec)
}

/// Central finite difference of `f` along every coordinate of `x`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            let step = h * x[i].abs().max(1.0);
            up[i] += step;
            dn[i] -= step;
            (f(&up) - f(&dn)) / (2.0 * step)
        })
        .collect()
}

/// Largest `|a − b| / max(|b|, 1)` over coordinates.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Upper `α = 0.001` critical values of χ² for 1..=10 degrees of freedom.
pub const CHI2_999: [f64; 10] = [
    10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124, 27.877, 29.588,
];

pub fn chi_square(counts: &[usize], p: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    counts
        .iter()
        .zip(p)
        .map(|(&c, &pi)| {
            let e = pi * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum()
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// KS critical value at `α = 0.001` for sample sizes `n`, `m`.
pub fn ks_critical_001(n: usize, m: usize) -> f64 {
    1.949 * ((n + m) as f64 / (n * m) as f64).sqrt()
}
