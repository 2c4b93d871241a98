//! Local polynomial M-fit at a point.
//!
//! At `x` the fit minimizes
//!
//! ```text
//! sum_i delta_i K_H(X_i - x) rho((Y_i - beta_0 - sum_j beta_j (X_ia - x_a)^j) / s(x))
//! ```
//!
//! with the polynomial expanded only in coordinate `alpha`. The minimizer is
//! found by iteratively reweighted least squares on the score equations
//!
//! ```text
//! Psi_l = sum_i delta_i K_H(X_i - x) psi(r_i) (X_ia - x_a)^l = 0,  l = 0..q.
//! ```
//!
//! Internally the regressors are rescaled by `h_alpha`, so the iterates are
//! `gamma_j = beta_j h_alpha^j` and convergence is measured on that scale.
//! The product kernel may carry negative weights when the nuisance kernel is
//! of order four; the weighted normal equations are then indefinite and the
//! conditioning check uses the absolute eigenvalues.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::kernels::{BandwidthSpec, Kernel};
use crate::losses::{LossFamily, LossSpec, HUBER_DEFAULT_C};
use crate::scale::ScaleEstimate;
use crate::{Error, Result};

/// Normal-equation matrices with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalFitConfig {
    /// Zero-based coordinate carrying the polynomial.
    pub alpha: usize,
    pub q: usize,
    pub bw: BandwidthSpec,
    pub kernel_alpha: Kernel,
    pub kernel_nuisance: Kernel,
    pub loss: LossSpec,
    pub max_iter: usize,
    pub tol: f64,
    pub min_support: usize,
}

impl LocalFitConfig {
    /// Epanechnikov kernels everywhere, 100 iterations, `tol = 1e-8`,
    /// `min_support = q + 2`.
    pub fn new(alpha: usize, q: usize, bw: BandwidthSpec, loss: LossSpec) -> Self {
        Self {
            alpha,
            q,
            bw,
            kernel_alpha: Kernel::Epanechnikov,
            kernel_nuisance: Kernel::Epanechnikov,
            loss,
            max_iter: 100,
            tol: 1e-8,
            min_support: q + 2,
        }
    }

    pub fn with_kernels(mut self, kernel_alpha: Kernel, kernel_nuisance: Kernel) -> Self {
        self.kernel_alpha = kernel_alpha;
        self.kernel_nuisance = kernel_nuisance;
        self
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.alpha >= d {
            return bad(format!("alpha={} out of range for d={d}", self.alpha));
        }
        if self.q > 5 {
            return bad(format!("polynomial order {} exceeds 5", self.q));
        }
        if !self.kernel_alpha.is_nonnegative() {
            return bad(format!(
                "kernel {} may not be used on the direction of interest",
                self.kernel_alpha
            ));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.min_support < self.q + 1 {
            return bad(format!("min_support must be at least q+1={}", self.q + 1));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive".into());
        }
        BandwidthSpec::new(self.bw.h_alpha, self.bw.h_tilde)?;
        LossSpec::new(self.loss.family, self.loss.c)?;
        Ok(())
    }

    fn kernel_for(&self, j: usize) -> Kernel {
        if j == self.alpha {
            self.kernel_alpha
        } else {
            self.kernel_nuisance
        }
    }

    /// Product kernel weight of a covariate row relative to `x`.
    pub fn weight(&self, xi: &[f64], x: &[f64]) -> f64 {
        let mut w = 1.0;
        for (j, (a, b)) in xi.iter().zip(x).enumerate() {
            let h = self.bw.for_coordinate(j, self.alpha);
            let k = self.kernel_for(j).eval((a - b) / h);
            if k == 0.0 {
                return 0.0;
            }
            w *= k / h;
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFitResult {
    /// Minimizer coordinates `(beta_0, ..., beta_q)`.
    pub beta: Vec<f64>,
    /// Sup-norm of the score vector divided by the total absolute kernel mass.
    pub score_norm: f64,
    pub iterations: usize,
    pub effective_n: usize,
    pub converged: bool,
}

impl LocalFitResult {
    /// Turns a flagged non-converged result into [`Error::NoConvergence`].
    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                iterations: self.iterations,
                score_norm: self.score_norm,
            })
        }
    }
}

/// Observations entering one local fit: offsets `t = X_ia - x_a`,
/// responses and nonzero product-kernel weights.
#[derive(Debug, Clone, Default)]
pub struct LocalSample {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub k: Vec<f64>,
}

impl LocalSample {
    pub fn clear(&mut self) {
        self.t.clear();
        self.y.clear();
        self.k.clear();
    }

    pub fn push(&mut self, t: f64, y: f64, k: f64) {
        self.t.push(t);
        self.y.push(y);
        self.k.push(k);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Observed rows of `data` with nonzero weight around `x`.
    pub fn gather(data: &Dataset, x: &[f64], cfg: &LocalFitConfig) -> Self {
        let mut s = Self::default();
        for i in data.observed_indices() {
            let xi = data.x(i);
            let k = cfg.weight(xi, x);
            if k != 0.0 {
                s.push(xi[cfg.alpha] - x[cfg.alpha], data.y(i), k);
            }
        }
        s
    }
}

/// Reusable buffers for repeated fits.
#[derive(Debug, Default)]
pub struct Workspace {
    z: Vec<f64>,
    r: Vec<f64>,
    order: Vec<usize>,
}

fn check_inputs(data: &Dataset, x: &[f64], cfg: &LocalFitConfig) -> Result<()> {
    cfg.validate(data.d())?;
    if x.len() != data.d() {
        return Err(Error::InvalidInput(format!(
            "evaluation point has {} coordinates, expected {}",
            x.len(),
            data.d()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("evaluation point is not finite".into()));
    }
    Ok(())
}

fn scale_at(scale: &ScaleEstimate, x: &[f64]) -> Result<f64> {
    let s = scale.at(x)?;
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::DegenerateScale { value: s });
    }
    Ok(s)
}

/// Solves the local M-estimation problem at `x`.
///
/// A run that exhausts `max_iter` is returned with `converged == false`.
pub fn local_m_fit(data: &Dataset, x: &[f64], cfg: &LocalFitConfig, scale: &ScaleEstimate) -> Result<LocalFitResult> {
    check_inputs(data, x, cfg)?;
    let sigma = scale_at(scale, x)?;
    let sample = LocalSample::gather(data, x, cfg);
    fit_sample(&sample, cfg, sigma, &mut Workspace::default(), None)
}

/// Like [`local_m_fit`] but also returns every iterate `beta^(t)`, starting
/// with the initial value.
pub fn local_m_fit_traced(
    data: &Dataset,
    x: &[f64],
    cfg: &LocalFitConfig,
    scale: &ScaleEstimate,
) -> Result<(LocalFitResult, Vec<Vec<f64>>)> {
    check_inputs(data, x, cfg)?;
    let sigma = scale_at(scale, x)?;
    let sample = LocalSample::gather(data, x, cfg);
    let h = cfg.bw.h_alpha;
    let mut trace = Vec::new();
    let mut record = |gamma: &[f64]| trace.push(unscale(gamma, h));
    let res = fit_sample(&sample, cfg, sigma, &mut Workspace::default(), Some(&mut record))?;
    Ok((res, trace))
}

/// Score vector `(Psi_0, ..., Psi_q)` at `beta`; zeros when the window is empty.
pub fn score(data: &Dataset, beta: &[f64], x: &[f64], cfg: &LocalFitConfig, scale: &ScaleEstimate) -> Result<Vec<f64>> {
    check_inputs(data, x, cfg)?;
    if beta.len() != cfg.q + 1 {
        return Err(Error::InvalidInput(format!(
            "beta has {} entries, expected {}",
            beta.len(),
            cfg.q + 1
        )));
    }
    let sigma = scale_at(scale, x)?;
    let sample = LocalSample::gather(data, x, cfg);
    let mut out = vec![0.0; cfg.q + 1];
    for ((&t, &y), &k) in sample.t.iter().zip(&sample.y).zip(&sample.k) {
        let fit = horner(beta, t);
        let psi = cfg.loss.psi((y - fit) / sigma);
        let mut tp = 1.0;
        for o in out.iter_mut() {
            *o += k * psi * tp;
            tp *= t;
        }
    }
    Ok(out)
}

/// Objective `sum_i K_i rho(r_i)` at `beta`.
pub fn objective(data: &Dataset, beta: &[f64], x: &[f64], cfg: &LocalFitConfig, scale: &ScaleEstimate) -> Result<f64> {
    check_inputs(data, x, cfg)?;
    let sigma = scale_at(scale, x)?;
    let sample = LocalSample::gather(data, x, cfg);
    Ok(sample
        .t
        .iter()
        .zip(&sample.y)
        .zip(&sample.k)
        .map(|((&t, &y), &k)| k * cfg.loss.rho((y - horner(beta, t)) / sigma))
        .sum())
}

fn horner(coef: &[f64], t: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

fn unscale(gamma: &[f64], h: f64) -> Vec<f64> {
    let mut hp = 1.0;
    gamma
        .iter()
        .map(|&g| {
            let b = g / hp;
            hp *= h;
            b
        })
        .collect()
}

/// Weighted median of `y` with weights `|k|`; an exact half split returns
/// the midpoint of the two neighbouring values.
fn weighted_median(y: &[f64], k: &[f64], order: &mut Vec<usize>) -> f64 {
    order.clear();
    order.extend(0..y.len());
    order.sort_unstable_by(|&a, &b| y[a].total_cmp(&y[b]));
    let total: f64 = k.iter().map(|v| v.abs()).sum();
    let half = 0.5 * total;
    let mut cum = 0.0;
    for (pos, &i) in order.iter().enumerate() {
        cum += k[i].abs();
        if cum > half {
            return y[i];
        }
        if cum == half {
            return match order.get(pos + 1) {
                Some(&next) => 0.5 * (y[i] + y[next]),
                None => y[i],
            };
        }
    }
    y[order[order.len() - 1]]
}

/// Solves `A g = b` for symmetric `A`, rejecting ill-conditioned systems.
fn solve_symmetric(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let eig = a.symmetric_eigen();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &l in eig.eigenvalues.iter() {
        lo = lo.min(l.abs());
        hi = hi.max(l.abs());
    }
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularDesign { condition });
    }
    let mut proj = eig.eigenvectors.tr_mul(b);
    for (p, l) in proj.iter_mut().zip(eig.eigenvalues.iter()) {
        *p /= l;
    }
    Ok(&eig.eigenvectors * proj)
}

/// Runs IRLS on a prepared sample. `observer` sees every iterate on the
/// rescaled coordinates `gamma`, starting with the initial value.
pub fn fit_sample(
    sample: &LocalSample,
    cfg: &LocalFitConfig,
    sigma: f64,
    ws: &mut Workspace,
    mut observer: Option<&mut dyn FnMut(&[f64])>,
) -> Result<LocalFitResult> {
    let n = sample.len();
    if n < cfg.min_support {
        return Err(Error::InsufficientSupport {
            found: n,
            required: cfg.min_support,
        });
    }
    let p = cfg.q + 1;
    let h = cfg.bw.h_alpha;
    ws.z.clear();
    ws.z.extend(sample.t.iter().map(|t| t / h));
    let mass: f64 = sample.k.iter().map(|k| k.abs()).sum();

    let mut gamma = vec![0.0; p];
    gamma[0] = weighted_median(&sample.y, &sample.k, &mut ws.order);
    if cfg.loss.family == LossFamily::Tukey {
        // redescending: start from a Huber fit
        let mut pre = *cfg;
        pre.loss = LossSpec::huber(HUBER_DEFAULT_C);
        let start = fit_sample(sample, &pre, sigma, ws, None)?;
        let mut hp = 1.0;
        for (g, b) in gamma.iter_mut().zip(&start.beta) {
            *g = b * hp;
            hp *= h;
        }
    }
    if let Some(obs) = observer.as_mut() {
        obs(&gamma);
    }

    let loss = cfg.loss;
    // the Huber objective is convex only under nonnegative weights
    let newton = loss.family == LossFamily::Huber && sample.k.iter().all(|&k| k > 0.0);
    let mut score_norm = f64::INFINITY;
    for iter in 1..=cfg.max_iter {
        residuals(sample, &ws.z, &gamma, sigma, &mut ws.r);
        let (a, b) = normal_system(sample, &ws.z, p, |i| {
            let w = sample.k[i] * loss.weight(ws.r[i]);
            (w, w * sample.y[i])
        });
        let mut next = solve_symmetric(a, &b)?;
        residuals(sample, &ws.z, next.as_slice(), sigma, &mut ws.r);
        score_norm = normalized_score(sample, &ws.r, &loss, h, p, mass);
        if newton && score_norm > cfg.tol {
            // Newton correction on the score equations; kept only if it helps
            let (a, b) = normal_system(sample, &ws.z, p, |i| {
                let r = ws.r[i];
                (sample.k[i] * loss.psi_prime(r), sample.k[i] * loss.psi(r) * sigma)
            });
            if let Ok(delta) = solve_symmetric(a, &b) {
                let trial = &next + delta;
                let rho = |res: &[f64]| -> f64 { res.iter().zip(&sample.k).map(|(&u, &k)| k * loss.rho(u)).sum() };
                let current = rho(&ws.r);
                let mut r = std::mem::take(&mut ws.r);
                residuals(sample, &ws.z, trial.as_slice(), sigma, &mut r);
                let trial_norm = normalized_score(sample, &r, &loss, h, p, mass);
                if trial_norm < score_norm && rho(&r) <= current {
                    next = trial;
                    score_norm = trial_norm;
                }
                ws.r = r;
            }
        }
        let step = next.iter().zip(&gamma).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        gamma.copy_from_slice(next.as_slice());
        if let Some(obs) = observer.as_mut() {
            obs(&gamma);
        }
        if score_norm <= cfg.tol && (step <= cfg.tol || loss.is_least_squares()) {
            return Ok(LocalFitResult {
                beta: unscale(&gamma, h),
                score_norm,
                iterations: iter,
                effective_n: n,
                converged: true,
            });
        }
    }
    Ok(LocalFitResult {
        beta: unscale(&gamma, h),
        score_norm,
        iterations: cfg.max_iter,
        effective_n: n,
        converged: false,
    })
}

/// `sum_i w_i z_i z_i'` and `sum_i v_i z_i` over the powers `z_i = (1, z, .., z^q)`,
/// with `(w_i, v_i) = coef(i)`.
fn normal_system(
    sample: &LocalSample,
    z: &[f64],
    p: usize,
    mut coef: impl FnMut(usize) -> (f64, f64),
) -> (DMatrix<f64>, DVector<f64>) {
    let mut a = DMatrix::<f64>::zeros(p, p);
    let mut b = DVector::<f64>::zeros(p);
    for i in 0..sample.len() {
        let (w, v) = coef(i);
        if w == 0.0 && v == 0.0 {
            continue;
        }
        let zi = z[i];
        let mut zr = 1.0;
        for r in 0..p {
            b[r] += v * zr;
            let mut zc = zr * zr;
            for c in r..p {
                a[(r, c)] += w * zc;
                zc *= zi;
            }
            zr *= zi;
        }
    }
    for r in 0..p {
        for c in 0..r {
            a[(r, c)] = a[(c, r)];
        }
    }
    (a, b)
}

fn residuals(sample: &LocalSample, z: &[f64], gamma: &[f64], sigma: f64, out: &mut Vec<f64>) {
    out.clear();
    out.extend(
        z.iter()
            .zip(&sample.y)
            .map(|(&zi, &yi)| (yi - horner(gamma, zi)) / sigma),
    );
}

fn normalized_score(sample: &LocalSample, r: &[f64], loss: &LossSpec, h: f64, p: usize, mass: f64) -> f64 {
    let mut acc = [0.0f64; 6];
    for ((&t, &k), &ri) in sample.t.iter().zip(&sample.k).zip(r) {
        let v = k * loss.psi(ri);
        if v == 0.0 {
            continue;
        }
        // t = z h keeps the powers bounded by h^l
        let z = t / h;
        let mut zp = 1.0;
        for a in acc.iter_mut().take(p) {
            *a += v * zp;
            zp *= z;
        }
    }
    let mut hp = 1.0;
    let mut norm = 0.0f64;
    for a in acc.iter().take(p) {
        norm = norm.max((a * hp).abs());
        hp *= h;
    }
    norm / mass
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Kernel;

    fn grid_data(n: usize, f: impl Fn(f64) -> f64) -> Dataset {
        let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let y = x.iter().map(|&t| f(t)).collect();
        Dataset::complete(x, 1, y).unwrap()
    }

    fn cfg1(q: usize, h: f64, loss: LossSpec) -> LocalFitConfig {
        LocalFitConfig::new(0, q, BandwidthSpec::new(h, h).unwrap(), loss)
    }

    #[test]
    fn constant_response_is_reproduced() {
        let data = grid_data(30, |_| 7.0);
        let scale = ScaleEstimate::Global(1.0);
        for loss in [
            LossSpec::least_squares(),
            LossSpec::huber(1.345),
            LossSpec::tukey(4.685),
        ] {
            for q in 0..=2 {
                let r = local_m_fit(&data, &[0.4], &cfg1(q, 0.3, loss), &scale).unwrap();
                assert!(r.converged);
                assert!((r.beta[0] - 7.0).abs() < 1e-12, "{loss} q={q}: {:?}", r.beta);
                for b in &r.beta[1..] {
                    assert!(b.abs() < 1e-9, "{loss} q={q}: {:?}", r.beta);
                }
            }
        }
    }

    #[test]
    fn uniform_kernel_gives_ols_line() {
        let x = vec![0.1, 0.3, 0.35, 0.6, 0.9];
        let y = vec![1.0, 2.5, 2.0, 4.0, 3.0];
        let data = Dataset::complete(x.clone(), 1, y.clone()).unwrap();
        let mut cfg = cfg1(1, 5.0, LossSpec::least_squares());
        cfg.kernel_alpha = Kernel::Uniform;
        let x0 = 0.5;
        let r = local_m_fit(&data, &[x0], &cfg, &ScaleEstimate::Global(1.0)).unwrap();
        let t: Vec<f64> = x.iter().map(|v| v - x0).collect();
        let n = t.len() as f64;
        let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let sxy: f64 = t.iter().zip(&y).map(|(a, b)| (a - mt) * (b - my)).sum();
        let sxx: f64 = t.iter().map(|a| (a - mt).powi(2)).sum();
        let slope = sxy / sxx;
        assert!((r.beta[1] - slope).abs() < 1e-12);
        assert!((r.beta[0] - (my - slope * mt)).abs() < 1e-12);
    }

    #[test]
    fn huber_location_matches_grid_search() {
        let data = Dataset::complete(vec![0.0; 5], 1, vec![0.0, 0.0, 0.0, 0.0, 10.0]).unwrap();
        let mut cfg = cfg1(0, 1.0, LossSpec::huber(1.345));
        cfg.kernel_alpha = Kernel::Uniform;
        let r = local_m_fit(&data, &[0.0], &cfg, &ScaleEstimate::Global(1.0)).unwrap();
        let obj = |b: f64| -> f64 { data.responses().iter().map(|&y| cfg.loss.rho(y - b)).sum() };
        let (mut best, mut arg) = (f64::INFINITY, 0.0);
        for k in 0..=100_000 {
            let b = -2.0 + k as f64 * 1e-4;
            let v = obj(b);
            if v < best {
                best = v;
                arg = b;
            }
        }
        assert!((r.beta[0] - arg).abs() < 2e-4, "{} vs {arg}", r.beta[0]);
        // closed form: 4 residuals inside, one clipped: 4(-b) + 1.345 = 0
        assert!((r.beta[0] - 1.345 / 4.0).abs() < 1e-8);
    }

    #[test]
    fn score_two_point_example() {
        // points at +-0.5 from x with equal weights; residuals +-1 under LS
        let data = Dataset::complete(vec![0.0, 1.0], 1, vec![-1.0, 1.0]).unwrap();
        let mut cfg = cfg1(1, 1.0, LossSpec::least_squares());
        cfg.kernel_alpha = Kernel::Uniform;
        let s = score(&data, &[0.0, 0.0], &[0.5], &cfg, &ScaleEstimate::Global(1.0)).unwrap();
        let k = 0.5;
        // psi(-1) = -2 at t=-0.5, psi(1) = 2 at t=0.5
        assert!((s[0] - 0.0).abs() < 1e-15);
        assert!((s[1] - k * 2.0 * 0.5 * 2.0).abs() < 1e-15);
    }

    #[test]
    fn score_empty_window_is_zero() {
        let data = grid_data(10, |t| t);
        let cfg = cfg1(1, 0.01, LossSpec::huber(1.345));
        let s = score(&data, &[1.0, 0.0], &[5.0], &cfg, &ScaleEstimate::Global(1.0)).unwrap();
        assert_eq!(s, vec![0.0, 0.0]);
    }

    #[test]
    fn insufficient_support_and_singular_design() {
        let data = grid_data(10, |t| t);
        let cfg = cfg1(1, 0.05, LossSpec::least_squares());
        assert!(matches!(
            local_m_fit(&data, &[0.5], &cfg, &ScaleEstimate::Global(1.0)),
            Err(Error::InsufficientSupport { .. })
        ));
        let dup = Dataset::complete(vec![0.2; 6], 1, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let cfg = cfg1(1, 0.5, LossSpec::least_squares());
        assert!(matches!(
            local_m_fit(&dup, &[0.3], &cfg, &ScaleEstimate::Global(1.0)),
            Err(Error::SingularDesign { .. })
        ));
    }

    #[test]
    fn rejects_fourth_order_on_alpha() {
        let data = grid_data(10, |t| t);
        let mut cfg = cfg1(1, 0.5, LossSpec::least_squares());
        cfg.kernel_alpha = Kernel::FourthOrder;
        assert!(local_m_fit(&data, &[0.5], &cfg, &ScaleEstimate::Global(1.0)).is_err());
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let data = grid_data(40, |t| {
            if ((t * 40.0) as usize).is_multiple_of(3) {
                10.0
            } else {
                t
            }
        });
        let mut cfg = cfg1(1, 0.4, LossSpec::huber(1.0));
        cfg.max_iter = 1;
        let r = local_m_fit(&data, &[0.5], &cfg, &ScaleEstimate::Global(0.1)).unwrap();
        assert!(!r.converged);
        assert!(matches!(r.into_converged(), Err(Error::NoConvergence { .. })));
    }

    #[test]
    fn weighted_median_split() {
        let mut order = Vec::new();
        assert_eq!(weighted_median(&[3.0, 1.0, 2.0], &[1.0, 1.0, 1.0], &mut order), 2.0);
        assert_eq!(weighted_median(&[1.0, 2.0], &[1.0, 1.0], &mut order), 1.5);
        assert_eq!(weighted_median(&[1.0, 2.0, 9.0], &[1.0, -5.0, 1.0], &mut order), 2.0);
    }
}
