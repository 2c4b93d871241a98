//! Preliminary robust scale: MAD, the local median smoother and the MAD of
//! local-median residuals.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::losses::LossSpec;
use crate::{Error, Result};

/// Normal-consistency factor for the MAD.
pub const MAD_CONSISTENCY: f64 = 1.4826;

/// Median of `values`; even lengths return the midpoint of the two central
/// order statistics. The slice is reordered.
pub fn median_in_place(values: &mut [f64]) -> Result<f64> {
    let n = values.len();
    if n == 0 {
        return Err(Error::Empty("median input"));
    }
    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        return Ok(upper);
    }
    let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(0.5 * (below + upper))
}

pub fn median(values: &[f64]) -> Result<f64> {
    median_in_place(&mut values.to_vec())
}

/// Median absolute deviation, times [`MAD_CONSISTENCY`] when `consistency`.
pub fn mad(values: &[f64], consistency: bool) -> Result<f64> {
    let mut buf = values.to_vec();
    let m = median_in_place(&mut buf)?;
    for v in buf.iter_mut() {
        *v = (*v - m).abs();
    }
    let raw = median_in_place(&mut buf)?;
    Ok(if consistency { raw * MAD_CONSISTENCY } else { raw })
}

fn in_box(xi: &[f64], x: &[f64], bw: &[f64]) -> bool {
    xi.iter().zip(x).zip(bw).all(|((a, b), h)| (a - b).abs() <= *h)
}

fn check_bandwidths(data: &Dataset, bw: &[f64]) -> Result<()> {
    if bw.len() != data.d() {
        return Err(Error::InvalidInput(format!(
            "expected {} scale bandwidths, got {}",
            data.d(),
            bw.len()
        )));
    }
    if bw.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(Error::InvalidInput("scale bandwidths must be positive".into()));
    }
    Ok(())
}

/// Median of observed responses inside the box `prod_j [x_j - h_j, x_j + h_j]`.
pub fn local_median(data: &Dataset, x: &[f64], bw: &[f64]) -> Result<f64> {
    check_bandwidths(data, bw)?;
    let mut window: Vec<f64> = data
        .observed_indices()
        .filter(|&i| in_box(data.x(i), x, bw))
        .map(|i| data.y(i))
        .collect();
    if window.is_empty() {
        return Err(Error::WindowEmpty { point: x.to_vec() });
    }
    median_in_place(&mut window)
}

/// Residuals `Y_i - local_median(X_i)` at every observed point, in row order.
pub fn local_median_residuals(data: &Dataset, bw: &[f64]) -> Result<Vec<(usize, f64)>> {
    data.observed_indices()
        .map(|i| Ok((i, data.y(i) - local_median(data, data.x(i), bw)?)))
        .collect()
}

fn degenerate_floor(data: &Dataset) -> f64 {
    let max_abs = data.observed_indices().map(|i| data.y(i).abs()).fold(0.0, f64::max);
    1e-12 * (max_abs + 1.0)
}

/// Local MAD of preliminary residuals around each evaluation point.
#[derive(Debug, Clone)]
pub struct LocalScale {
    d: usize,
    points: Vec<f64>,
    residuals: Vec<f64>,
    bw: Vec<f64>,
    floor: f64,
}

impl LocalScale {
    pub fn at(&self, x: &[f64]) -> Result<f64> {
        let window: Vec<f64> = self
            .points
            .chunks_exact(self.d)
            .zip(&self.residuals)
            .filter(|(p, _)| in_box(p, x, &self.bw))
            .map(|(_, &r)| r)
            .collect();
        if window.is_empty() {
            return Err(Error::WindowEmpty { point: x.to_vec() });
        }
        let s = mad(&window, true)?;
        if s < self.floor {
            return Err(Error::DegenerateScale { value: s });
        }
        Ok(s)
    }
}

/// Scale used to studentize residuals in the local M-fit.
#[derive(Debug, Clone)]
pub enum ScaleEstimate {
    /// Homoscedastic scale.
    Global(f64),
    /// Heteroscedastic local MAD.
    Local(Arc<LocalScale>),
}

impl ScaleEstimate {
    pub fn global(value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::DegenerateScale { value });
        }
        Ok(ScaleEstimate::Global(value))
    }

    pub fn at(&self, x: &[f64]) -> Result<f64> {
        match self {
            ScaleEstimate::Global(s) => Ok(*s),
            ScaleEstimate::Local(local) => local.at(x),
        }
    }

    /// The global value, if homoscedastic.
    pub fn value(&self) -> Option<f64> {
        match self {
            ScaleEstimate::Global(s) => Some(*s),
            ScaleEstimate::Local(_) => None,
        }
    }
}

/// Homoscedastic scale: consistent MAD of local-median residuals.
pub fn residual_scale(data: &Dataset, bw_sigma: &[f64]) -> Result<ScaleEstimate> {
    let residuals: Vec<f64> = local_median_residuals(data, bw_sigma)?
        .into_iter()
        .map(|(_, r)| r)
        .collect();
    if residuals.is_empty() {
        return Err(Error::Empty("observed responses"));
    }
    let s = mad(&residuals, true)?;
    if s < degenerate_floor(data) {
        return Err(Error::DegenerateScale { value: s });
    }
    Ok(ScaleEstimate::Global(s))
}

/// Heteroscedastic variant: MAD of the local-median residuals inside the
/// window around each evaluation point.
pub fn local_residual_scale(data: &Dataset, bw_sigma: &[f64]) -> Result<ScaleEstimate> {
    let res = local_median_residuals(data, bw_sigma)?;
    let mut points = Vec::with_capacity(res.len() * data.d());
    let mut residuals = Vec::with_capacity(res.len());
    for (i, r) in res {
        points.extend_from_slice(data.x(i));
        residuals.push(r);
    }
    Ok(ScaleEstimate::Local(Arc::new(LocalScale {
        d: data.d(),
        points,
        residuals,
        bw: bw_sigma.to_vec(),
        floor: degenerate_floor(data),
    })))
}

/// How the preliminary scale is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    Global,
    Local,
}

impl std::str::FromStr for ScaleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "global" => Ok(ScaleMode::Global),
            "local" => Ok(ScaleMode::Local),
            other => Err(Error::InvalidInput(format!("unknown scale mode `{other}`"))),
        }
    }
}

/// Settings for the preliminary scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleConfig {
    /// Box half-widths of the local median, one per coordinate.
    pub bandwidth: Vec<f64>,
    pub mode: ScaleMode,
}

impl ScaleConfig {
    pub fn global(bandwidth: Vec<f64>) -> Self {
        Self {
            bandwidth,
            mode: ScaleMode::Global,
        }
    }

    pub fn estimate(&self, data: &Dataset) -> Result<ScaleEstimate> {
        match self.mode {
            ScaleMode::Global => residual_scale(data, &self.bandwidth),
            ScaleMode::Local => local_residual_scale(data, &self.bandwidth),
        }
    }

    /// Scale for a fit with `loss`; least squares does not depend on it.
    pub fn for_loss(&self, data: &Dataset, loss: &LossSpec) -> Result<ScaleEstimate> {
        if loss.is_least_squares() {
            Ok(ScaleEstimate::Global(1.0))
        } else {
            self.estimate(data)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mad_values() {
        assert_eq!(mad(&[1.0, 2.0, 3.0, 4.0, 5.0], false).unwrap(), 1.0);
        assert_eq!(mad(&[7.0, 7.0, 7.0], true).unwrap(), 0.0);
        assert!((mad(&[1.0, 2.0, 3.0, 4.0, 5.0], true).unwrap() - 1.4826).abs() < 1e-15);
        assert!(mad(&[], false).is_err());
    }

    #[test]
    fn even_median_is_midpoint() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]).unwrap(), 2.5);
        assert_eq!(median(&[5.0]).unwrap(), 5.0);
    }

    #[test]
    fn local_median_windows() {
        let data = Dataset::complete(vec![0.0, 0.1, 0.2, 5.0], 1, vec![1.0, 100.0, 2.0, 9.0]).unwrap();
        assert_eq!(local_median(&data, &[0.1], &[0.15]).unwrap(), 2.0);
        assert_eq!(local_median(&data, &[5.0], &[0.15]).unwrap(), 9.0);
        assert!(matches!(
            local_median(&data, &[2.5], &[0.15]),
            Err(Error::WindowEmpty { .. })
        ));
    }

    #[test]
    fn local_median_skips_missing() {
        let data = Dataset::new(vec![0.0, 0.05], 1, vec![1.0, 50.0], vec![true, false]).unwrap();
        assert_eq!(local_median(&data, &[0.0], &[0.1]).unwrap(), 1.0);
    }

    #[test]
    fn noiseless_data_is_degenerate() {
        let x: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
        let data = Dataset::complete(x, 1, vec![3.0; 200]).unwrap();
        assert!(matches!(
            residual_scale(&data, &[0.05]),
            Err(Error::DegenerateScale { .. })
        ));
    }

    #[test]
    fn local_scale_tracks_heteroscedasticity() {
        let n = 400;
        let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        // alternating +-s(x) around zero
        let y: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, &t)| if i % 2 == 0 { 1.0 + t } else { -(1.0 + t) })
            .collect();
        let data = Dataset::complete(x, 1, y).unwrap();
        let s = local_residual_scale(&data, &[0.05]).unwrap();
        assert!(s.at(&[0.9]).unwrap() > s.at(&[0.1]).unwrap());
    }

    proptest! {
        #[test]
        fn mad_invariances(v in prop::collection::vec(-100.0f64..100.0, 1..40), shift in -50.0f64..50.0) {
            let base = mad(&v, false).unwrap();
            let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
            prop_assert!((mad(&shifted, false).unwrap() - base).abs() < 1e-9);
            let mut rev = v.clone();
            rev.reverse();
            prop_assert_eq!(mad(&rev, false).unwrap(), base);
        }
    }
}
