//! Compact-support kernels on `[-1, 1]` and their moments.
//!
//! Every kernel here is a polynomial on its support, so moments of `K` and
//! `K^2` are evaluated in closed form from the polynomial coefficients.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Highest moment order supported (enough for local polynomials up to degree 5).
pub const MAX_MOMENT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `0.75 (1 - u^2)`
    Epanechnikov,
    /// `(15/32)(1 - u^2)(3 - 7u^2)`, a kernel of order four.
    FourthOrder,
    /// `0.5`
    Uniform,
}

impl Kernel {
    /// Coefficients `a_k` of `sum a_k u^k` on the support.
    fn coefficients(self) -> &'static [f64] {
        match self {
            Kernel::Epanechnikov => &[0.75, 0.0, -0.75],
            Kernel::FourthOrder => &[45.0 / 32.0, 0.0, -150.0 / 32.0, 0.0, 105.0 / 32.0],
            Kernel::Uniform => &[0.5],
        }
    }

    pub fn eval(self, u: f64) -> f64 {
        if !(-1.0..=1.0).contains(&u) {
            return 0.0;
        }
        let u2 = u * u;
        match self {
            Kernel::Epanechnikov => 0.75 * (1.0 - u2),
            Kernel::FourthOrder => 15.0 / 32.0 * (1.0 - u2) * (3.0 - 7.0 * u2),
            Kernel::Uniform => 0.5,
        }
    }

    /// `∫ u^p K(u) du`, or `∫ u^p K(u)^2 du` when `squared`.
    pub fn moment(self, p: usize, squared: bool) -> f64 {
        assert!(p <= MAX_MOMENT, "moment order {p} exceeds {MAX_MOMENT}");
        let base = self.coefficients();
        let coefs: Vec<f64> = if squared {
            let mut sq = vec![0.0; 2 * base.len() - 1];
            for (i, a) in base.iter().enumerate() {
                for (j, b) in base.iter().enumerate() {
                    sq[i + j] += a * b;
                }
            }
            sq
        } else {
            base.to_vec()
        };
        coefs
            .iter()
            .enumerate()
            .filter(|(k, _)| (p + k).is_multiple_of(2))
            .map(|(k, a)| a * 2.0 / (p + k + 1) as f64)
            .sum()
    }

    /// Smallest `l >= 1` with a nonzero `l`-th moment.
    pub fn order(self) -> usize {
        (1..=MAX_MOMENT)
            .find(|&p| self.moment(p, false).abs() > 1e-14)
            .unwrap_or(MAX_MOMENT)
    }

    pub fn is_nonnegative(self) -> bool {
        !matches!(self, Kernel::FourthOrder)
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::FourthOrder => "fourth_order",
            Kernel::Uniform => "uniform",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            "fourth_order" => Ok(Kernel::FourthOrder),
            "uniform" => Ok(Kernel::Uniform),
            other => Err(Error::InvalidInput(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Bandwidth `h_alpha` on the direction of interest and a common `h_tilde`
/// on the nuisance directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSpec {
    pub h_alpha: f64,
    pub h_tilde: f64,
}

impl BandwidthSpec {
    pub fn new(h_alpha: f64, h_tilde: f64) -> Result<Self> {
        for (name, v) in [("h_alpha", h_alpha), ("h_tilde", h_tilde)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { h_alpha, h_tilde })
    }

    pub fn for_coordinate(&self, j: usize, alpha: usize) -> f64 {
        if j == alpha {
            self.h_alpha
        } else {
            self.h_tilde
        }
    }
}

fn check_order(q: usize) -> Result<()> {
    if q > 5 {
        return Err(Error::InvalidInput(format!("polynomial order {q} exceeds 5")));
    }
    Ok(())
}

fn hankel(k: Kernel, q: usize, squared: bool) -> Result<DMatrix<f64>> {
    check_order(q)?;
    let m = DMatrix::from_fn(q + 1, q + 1, |i, j| k.moment(i + j, squared));
    if m.clone().cholesky().is_none() {
        return Err(Error::SingularMoments);
    }
    Ok(m)
}

/// `S[i][j] = ∫ u^(i+j) K(u) du`, `0 <= i, j <= q`.
pub fn moment_matrix(k: Kernel, q: usize) -> Result<DMatrix<f64>> {
    hankel(k, q, false)
}

/// `V[i][j] = ∫ u^(i+j) K(u)^2 du`, `0 <= i, j <= q`.
pub fn variance_matrix(k: Kernel, q: usize) -> Result<DMatrix<f64>> {
    hankel(k, q, true)
}

/// `s_q[j] = ∫ u^(q+1+j) K(u) du`, `0 <= j <= q`.
pub fn moment_vector(k: Kernel, q: usize) -> Result<DVector<f64>> {
    check_order(q)?;
    Ok(DVector::from_fn(q + 1, |j, _| k.moment(q + 1 + j, false)))
}

/// Product kernel weight `prod_j K_j(dx_j / h_j) / prod_j h_j`, where
/// coordinate `alpha` uses `h_alpha` and every other coordinate `h_tilde`.
pub fn product_weight(kernels: &[Kernel], bw: &BandwidthSpec, alpha: usize, dx: &[f64]) -> f64 {
    debug_assert_eq!(kernels.len(), dx.len());
    let mut w = 1.0;
    for (j, (&k, &diff)) in kernels.iter().zip(dx).enumerate() {
        let h = bw.for_coordinate(j, alpha);
        let kv = k.eval(diff / h);
        if kv == 0.0 {
            return 0.0;
        }
        w *= kv / h;
    }
    w
}
