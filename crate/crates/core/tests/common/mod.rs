//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rmint::data::Dataset;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// `∫_{-1}^{1} f` with a 40-point rule (exact for polynomials of degree 79).
pub fn integrate(f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_legendre(40);
    x.iter().zip(&w).map(|(x, w)| w * f(*x)).sum()
}

pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

pub fn fourth_order(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        (15.0 / 32.0) * (3.0 - 10.0 * u * u + 7.0 * u.powi(4))
    } else {
        0.0
    }
}

pub fn uniform(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.5
    } else {
        0.0
    }
}

pub fn huber_psi(c: f64, u: f64) -> f64 {
    u.clamp(-c, c)
}

pub fn tukey_psi(c: f64, u: f64) -> f64 {
    if u.abs() <= c {
        let v = 1.0 - (u / c).powi(2);
        6.0 * u * v * v
    } else {
        0.0
    }
}

/// Local sample at `x0`: offsets `t` in coordinate `alpha`, responses and
/// product-kernel weights, observed rows with nonzero weight only.
pub fn local_sample(
    data: &Dataset,
    x0: &[f64],
    alpha: usize,
    h: f64,
    ht: f64,
    k_alpha: fn(f64) -> f64,
    k_nuis: fn(f64) -> f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (mut t, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
    for i in data.observed_indices() {
        let xi = data.x(i);
        let mut k = 1.0;
        for j in 0..data.d() {
            let (bw, f) = if j == alpha { (h, k_alpha) } else { (ht, k_nuis) };
            k *= f((xi[j] - x0[j]) / bw) / bw;
        }
        if k != 0.0 {
            t.push(xi[alpha] - x0[alpha]);
            y.push(data.y(i));
            w.push(k);
        }
    }
    (t, y, w)
}

/// Weighted least squares polynomial in `t` via QR of `sqrt(W) X`.
/// Requires nonnegative weights.
pub fn wls(t: &[f64], y: &[f64], w: &[f64], q: usize) -> Option<Vec<f64>> {
    let n = t.len();
    let x = DMatrix::from_fn(n, q + 1, |i, j| w[i].sqrt() * t[i].powi(j as i32));
    let b = DVector::from_fn(n, |i, _| w[i].sqrt() * y[i]);
    let (q_mat, r) = x.qr().unpack();
    r.solve_upper_triangular(&(q_mat.transpose() * b))
        .map(|v| v.iter().copied().collect())
}

/// Uniform covariates on the unit cube with a smooth additive response,
/// Gaussian noise and about `miss` missing responses.
pub fn random_dataset(seed: u64, n: usize, d: usize, noise: f64, miss: f64) -> Dataset {
    let mut r = rng(seed);
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| r.random::<f64>()).collect();
        let mean: f64 = row.iter().enumerate().map(|(j, v)| ((j + 1) as f64 * v).sin()).sum();
        let z: f64 = r.sample(rand_distr::StandardNormal);
        x.extend_from_slice(&row);
        y.push(mean + noise * z);
        delta.push(r.random::<f64>() >= miss);
    }
    if !delta.iter().any(|&o| o) {
        delta[0] = true;
    }
    Dataset::new(x, d, y, delta).unwrap()
}

/// The additive model from the two-dimensional simulation design.
pub fn g1(x: f64) -> f64 {
    24.0 * (x - 0.5).powi(2) - 2.0
}

pub fn g2(x: f64) -> f64 {
    2.0 * std::f64::consts::PI * (std::f64::consts::PI * x).sin() - 4.0
}

/// `n` points of the two-dimensional design with N(0, sigma^2) errors.
pub fn d2_dataset(seed: u64, n: usize, sigma: f64) -> Dataset {
    let mut r = rng(seed);
    let mut x = Vec::with_capacity(2 * n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let (a, b): (f64, f64) = (r.random(), r.random());
        let z: f64 = r.sample(rand_distr::StandardNormal);
        x.push(a);
        x.push(b);
        y.push(g1(a) + g2(b) + sigma * z);
    }
    Dataset::complete(x, 2, y).unwrap()
}

pub fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}
