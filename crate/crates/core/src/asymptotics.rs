//! Closed-form asymptotic bias and variance of the marginal integration
//! estimator and its derivatives.
//!
//! With `h_alpha = beta n^(-1/(2q+3))`,
//! `sqrt(n h_alpha) h_alpha^nu (g_hat^(nu) - g^(nu))` is asymptotically normal
//! with mean [`theoretical_bias`] and variance [`theoretical_variance`].

use serde::{Deserialize, Serialize};

use crate::kernels::{moment_matrix, moment_vector, variance_matrix, Kernel};
use crate::losses::LossSpec;
use crate::quadrature::GaussLegendre;
use crate::{Error, Result};

const QUAD_TOL: f64 = 1e-10;
const QUAD_DEPTH: usize = 30;
/// Half-width of the integration range for normal expectations.
const NORMAL_RANGE: f64 = 12.0;

fn std_normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Panels on `[lo, hi]` split at the kinks of `psi`.
fn panels(loss: &LossSpec, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut cuts = vec![lo];
    if !loss.is_least_squares() {
        for k in [-loss.c, loss.c] {
            if k > lo && k < hi {
                cuts.push(k);
            }
        }
    }
    cuts.push(hi);
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// `(E psi^2, E psi')` under `density` on `support`.
pub fn score_moments(loss: &LossSpec, density: &dyn Fn(f64) -> f64, support: (f64, f64)) -> (f64, f64) {
    let gl = GaussLegendre::new(20);
    let mut e2 = 0.0;
    let mut e1 = 0.0;
    for (a, b) in panels(loss, support.0, support.1) {
        e2 += gl.integrate_adaptive(a, b, QUAD_TOL, QUAD_DEPTH, &|u| {
            let p = loss.psi(u);
            p * p * density(u)
        });
        e1 += gl.integrate_adaptive(a, b, QUAD_TOL, QUAD_DEPTH, &|u| loss.psi_prime(u) * density(u));
    }
    (e2, e1)
}

/// `V(psi) = E psi^2 / (E psi')^2` under a user-supplied error density.
pub fn v_psi_with_density(loss: &LossSpec, density: &dyn Fn(f64) -> f64, support: (f64, f64)) -> Result<f64> {
    let (e2, e1) = score_moments(loss, density, support);
    if !(e1 > 0.0) {
        return Err(Error::DegenerateLoss(e1));
    }
    Ok(e2 / (e1 * e1))
}

/// `V(psi)` under the standard normal.
pub fn v_psi(loss: &LossSpec) -> Result<f64> {
    v_psi_with_density(loss, &std_normal_pdf, (-NORMAL_RANGE, NORMAL_RANGE))
}

/// Missingness probability `p(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Propensity {
    Constant {
        p: f64,
    },
    /// `a + b cos^2(x_coord + shift)`.
    CosSquared {
        a: f64,
        b: f64,
        shift: f64,
        coord: usize,
    },
}

impl Propensity {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Propensity::Constant { p } => p,
            Propensity::CosSquared { a, b, shift, coord } => {
                let c = (x[coord] + shift).cos();
                a + b * c * c
            }
        }
    }
}

/// Design descriptor for `D(x_alpha) = int q_-alpha^2 / (f_X p) dx_-alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Design {
    /// `X` uniform on `data_box`, `Q` uniform on `q_box`.
    UniformBox {
        data_box: Vec<(f64, f64)>,
        q_box: Vec<(f64, f64)>,
        propensity: Propensity,
    },
    /// A precomputed value of the integral.
    Value { value: f64 },
}

impl Design {
    /// Uniform design on `bounds` with `Q = f_X`.
    pub fn uniform(bounds: Vec<(f64, f64)>, propensity: Propensity) -> Self {
        Design::UniformBox {
            data_box: bounds.clone(),
            q_box: bounds,
            propensity,
        }
    }

    pub fn integral(&self, alpha: usize, x_alpha: f64) -> Result<f64> {
        match self {
            Design::Value { value } => {
                if value.is_finite() && *value > 0.0 {
                    Ok(*value)
                } else {
                    Err(Error::InvalidInput(format!(
                        "design integral must be positive and finite, got {value}"
                    )))
                }
            }
            Design::UniformBox {
                data_box,
                q_box,
                propensity,
            } => uniform_box_integral(data_box, q_box, propensity, alpha, x_alpha),
        }
    }
}

fn uniform_box_integral(
    data_box: &[(f64, f64)],
    q_box: &[(f64, f64)],
    propensity: &Propensity,
    alpha: usize,
    x_alpha: f64,
) -> Result<f64> {
    let d = data_box.len();
    if q_box.len() != d || alpha >= d {
        return Err(Error::InvalidInput(
            "design boxes and alpha disagree in dimension".into(),
        ));
    }
    let (alo, ahi) = data_box[alpha];
    if !(x_alpha >= alo && x_alpha <= ahi) {
        return Err(Error::InvalidInput(format!(
            "x_alpha = {x_alpha} lies outside the design support [{alo}, {ahi}]"
        )));
    }
    // product of f_X^{-1} and q_-alpha^2 over the Q box: len_alpha * prod_{j != alpha} len_j / lq_j
    let mut factor = ahi - alo;
    for j in (0..d).filter(|&j| j != alpha) {
        let (lo, hi) = data_box[j];
        let (qlo, qhi) = q_box[j];
        if !(qlo >= lo && qhi <= hi && qlo < qhi) {
            return Err(Error::InvalidInput(format!(
                "Q support in coordinate {} is not inside the design support",
                j + 1
            )));
        }
        factor *= (hi - lo) / (qhi - qlo);
    }
    let avg_inv_p = match *propensity {
        Propensity::Constant { p } => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidInput(format!("propensity {p} outside (0, 1]")));
            }
            1.0 / p
        }
        Propensity::CosSquared { coord, .. } if coord == alpha => {
            let mut x = vec![0.0; d];
            x[alpha] = x_alpha;
            1.0 / checked(propensity.eval(&x))?
        }
        Propensity::CosSquared { coord, .. } => {
            if coord >= d {
                return Err(Error::InvalidInput("propensity coordinate out of range".into()));
            }
            let (lo, hi) = q_box[coord];
            let min = min_cos_squared(propensity, lo, hi, d);
            checked(min)?;
            let gl = GaussLegendre::new(20);
            gl.integrate_adaptive(lo, hi, QUAD_TOL, QUAD_DEPTH, &|t| {
                let mut x = vec![0.0; d];
                x[coord] = t;
                1.0 / propensity.eval(&x)
            }) / (hi - lo)
        }
    };
    Ok(factor * avg_inv_p)
}

fn min_cos_squared(p: &Propensity, lo: f64, hi: f64, d: usize) -> f64 {
    let Propensity::CosSquared { coord, .. } = *p else {
        return f64::NAN;
    };
    let mut x = vec![0.0; d];
    (0..=1000)
        .map(|k| {
            x[coord] = lo + (hi - lo) * k as f64 / 1000.0;
            p.eval(&x)
        })
        .fold(f64::INFINITY, f64::min)
}

fn checked(p: f64) -> Result<f64> {
    if p > 0.0 && p <= 1.0 {
        Ok(p)
    } else {
        Err(Error::InvalidInput(format!(
            "propensity {p} outside (0, 1]; design integral is not finite"
        )))
    }
}

/// Inputs of the asymptotic formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticSpec {
    pub q: usize,
    pub nu: usize,
    pub kernel_alpha: Kernel,
    pub loss: LossSpec,
    /// Error scale.
    pub sigma: f64,
    /// Rate constant in `h_alpha = beta n^(-1/(2q+3))`.
    pub beta_rate: f64,
    pub alpha: usize,
    pub design: Design,
}

impl AsymptoticSpec {
    fn validate(&self) -> Result<()> {
        if self.nu > self.q {
            return Err(Error::InvalidInput(format!(
                "derivative order {} exceeds q = {}",
                self.nu, self.q
            )));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidInput("sigma must be positive".into()));
        }
        if !(self.beta_rate.is_finite() && self.beta_rate > 0.0) {
            return Err(Error::InvalidInput("beta must be positive".into()));
        }
        Ok(())
    }

    /// `h_alpha = beta n^(-1/(2q+3))`.
    pub fn bandwidth(&self, n: usize) -> f64 {
        self.beta_rate * (n as f64).powf(-1.0 / (2 * self.q + 3) as f64)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `S^-1 e_(nu+1)`; `S` is symmetric.
fn s_inv_column(k: Kernel, q: usize, nu: usize) -> Result<nalgebra::DVector<f64>> {
    let s = moment_matrix(k, q)?;
    let mut e = nalgebra::DVector::zeros(q + 1);
    e[nu] = 1.0;
    s.cholesky().map(|c| c.solve(&e)).ok_or(Error::SingularMoments)
}

/// `e_(nu+1)' S^-1 s_q`.
pub fn bias_constant(k: Kernel, q: usize, nu: usize) -> Result<f64> {
    let col = s_inv_column(k, q, nu)?;
    Ok(col.dot(&moment_vector(k, q)?))
}

/// `e_(nu+1)' S^-1 V S^-1 e_(nu+1)`.
pub fn variance_constant(k: Kernel, q: usize, nu: usize) -> Result<f64> {
    let col = s_inv_column(k, q, nu)?;
    let v = variance_matrix(k, q)?;
    Ok(col.dot(&(v * &col)))
}

/// `nu! beta^((2q+3)/2) g^(q+1)(x_alpha) / (q+1)! e_(nu+1)' S^-1 s_q`.
pub fn theoretical_bias(spec: &AsymptoticSpec, g_deriv: f64) -> Result<f64> {
    spec.validate()?;
    let q = spec.q;
    let c = bias_constant(spec.kernel_alpha, q, spec.nu)?;
    Ok(factorial(spec.nu) * spec.beta_rate.powf((2 * q + 3) as f64 / 2.0) * g_deriv / factorial(q + 1) * c)
}

/// `(nu!)^2 sigma^2 V(psi) D(x_alpha) e_(nu+1)' S^-1 V S^-1 e_(nu+1)`.
pub fn theoretical_variance(spec: &AsymptoticSpec, x_alpha: f64) -> Result<f64> {
    spec.validate()?;
    let nu_fact = factorial(spec.nu);
    let v = v_psi(&spec.loss)?;
    let design = spec.design.integral(spec.alpha, x_alpha)?;
    let c = variance_constant(spec.kernel_alpha, spec.q, spec.nu)?;
    Ok(nu_fact * nu_fact * spec.sigma * spec.sigma * v * design * c)
}

/// Approximate bias of `g_hat^(nu)(x_alpha)` at sample size `n`.
pub fn finite_sample_bias(spec: &AsymptoticSpec, g_deriv: f64, n: usize) -> Result<f64> {
    let h = spec.bandwidth(n);
    Ok(theoretical_bias(spec, g_deriv)? / ((n as f64 * h).sqrt() * h.powi(spec.nu as i32)))
}

/// Approximate variance of `g_hat^(nu)(x_alpha)` at sample size `n` and
/// bandwidth `h`.
pub fn finite_sample_variance(spec: &AsymptoticSpec, x_alpha: f64, n: usize, h: f64) -> Result<f64> {
    Ok(theoretical_variance(spec, x_alpha)? / (n as f64 * h * h.powi(2 * spec.nu as i32)))
}

/// Theory summary for one evaluation point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub v_psi: f64,
    pub design_integral: f64,
    pub bias_constant: f64,
    pub variance_constant: f64,
    pub bias: f64,
    pub variance: f64,
    pub n: Option<usize>,
    pub h_alpha: Option<f64>,
    pub finite_sample_bias: Option<f64>,
    pub finite_sample_sd: Option<f64>,
}

pub fn report(spec: &AsymptoticSpec, x_alpha: f64, g_deriv: f64, n: Option<usize>) -> Result<TheoryReport> {
    let bias = theoretical_bias(spec, g_deriv)?;
    let variance = theoretical_variance(spec, x_alpha)?;
    let (h, fb, fsd) = match n {
        Some(n) => {
            let h = spec.bandwidth(n);
            (
                Some(h),
                Some(finite_sample_bias(spec, g_deriv, n)?),
                Some(finite_sample_variance(spec, x_alpha, n, h)?.sqrt()),
            )
        }
        None => (None, None, None),
    };
    Ok(TheoryReport {
        v_psi: v_psi(&spec.loss)?,
        design_integral: spec.design.integral(spec.alpha, x_alpha)?,
        bias_constant: bias_constant(spec.kernel_alpha, spec.q, spec.nu)?,
        variance_constant: variance_constant(spec.kernel_alpha, spec.q, spec.nu)?,
        bias,
        variance,
        n,
        h_alpha: h,
        finite_sample_bias: fb,
        finite_sample_sd: fsd,
    })
}
