//! Loss functions `rho`, scores `psi = rho'`, `psi'` and IRLS weights `psi(u)/u`.
//!
//! Robust losses are tuned through `rho_c(u) = c^2 rho_1(u / c)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const HUBER_DEFAULT_C: f64 = 1.345;
pub const TUKEY_DEFAULT_C: f64 = 4.685;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossFamily {
    LeastSquares,
    Huber,
    Tukey,
}

impl LossFamily {
    pub fn name(self) -> &'static str {
        match self {
            LossFamily::LeastSquares => "ls",
            LossFamily::Huber => "huber",
            LossFamily::Tukey => "tukey",
        }
    }

    pub fn default_c(self) -> f64 {
        match self {
            LossFamily::LeastSquares => 1.0,
            LossFamily::Huber => HUBER_DEFAULT_C,
            LossFamily::Tukey => TUKEY_DEFAULT_C,
        }
    }
}

impl FromStr for LossFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ls" | "least_squares" => Ok(LossFamily::LeastSquares),
            "huber" => Ok(LossFamily::Huber),
            "tukey" => Ok(LossFamily::Tukey),
            other => Err(Error::InvalidInput(format!("unknown loss `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub family: LossFamily,
    /// Tuning constant; ignored by least squares.
    pub c: f64,
}

impl LossSpec {
    pub fn new(family: LossFamily, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tuning constant must be positive, got {c}"
            )));
        }
        Ok(Self { family, c })
    }

    pub fn least_squares() -> Self {
        Self {
            family: LossFamily::LeastSquares,
            c: 1.0,
        }
    }

    pub fn huber(c: f64) -> Self {
        Self {
            family: LossFamily::Huber,
            c,
        }
    }

    pub fn tukey(c: f64) -> Self {
        Self {
            family: LossFamily::Tukey,
            c,
        }
    }

    pub fn is_least_squares(&self) -> bool {
        self.family == LossFamily::LeastSquares
    }

    pub fn rho(&self, u: f64) -> f64 {
        let c = self.c;
        match self.family {
            LossFamily::LeastSquares => u * u,
            LossFamily::Huber => {
                let a = u.abs();
                if a <= c {
                    0.5 * u * u
                } else {
                    c * (a - 0.5 * c)
                }
            }
            LossFamily::Tukey => {
                let v2 = (u / c) * (u / c);
                let r = 3.0 * v2 - 3.0 * v2 * v2 + v2 * v2 * v2;
                c * c * r.min(1.0)
            }
        }
    }

    pub fn psi(&self, u: f64) -> f64 {
        let c = self.c;
        match self.family {
            LossFamily::LeastSquares => 2.0 * u,
            LossFamily::Huber => u.clamp(-c, c),
            LossFamily::Tukey => {
                if u.abs() > c {
                    return 0.0;
                }
                let s = 1.0 - (u / c) * (u / c);
                6.0 * u * s * s
            }
        }
    }

    /// Derivative of `psi`; at the kinks `|u| = c` the inner branch is used.
    pub fn psi_prime(&self, u: f64) -> f64 {
        let c = self.c;
        match self.family {
            LossFamily::LeastSquares => 2.0,
            LossFamily::Huber => {
                if u.abs() <= c {
                    1.0
                } else {
                    0.0
                }
            }
            LossFamily::Tukey => {
                if u.abs() > c {
                    return 0.0;
                }
                let v2 = (u / c) * (u / c);
                6.0 * (1.0 - v2) * (1.0 - 5.0 * v2)
            }
        }
    }

    /// `psi(u) / u`, continuously extended at zero.
    pub fn weight(&self, u: f64) -> f64 {
        let c = self.c;
        match self.family {
            LossFamily::LeastSquares => 2.0,
            LossFamily::Huber => {
                let a = u.abs();
                if a <= c {
                    1.0
                } else {
                    c / a
                }
            }
            LossFamily::Tukey => {
                if u.abs() > c {
                    return 0.0;
                }
                let s = 1.0 - (u / c) * (u / c);
                6.0 * s * s
            }
        }
    }
}

impl Default for LossSpec {
    fn default() -> Self {
        Self::huber(HUBER_DEFAULT_C)
    }
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            LossFamily::LeastSquares => f.write_str("ls"),
            fam => write!(f, "{}(c={})", fam.name(), self.c),
        }
    }
}
