//! Marginal integration of local M-fits.
//!
//! For component `alpha`, the local fit at `(x_alpha, u_-alpha)` is averaged
//! over draws `u` from the integration measure `Q`. The intercept average
//! estimates `mu + g_alpha(x_alpha)`; the `nu`-th coefficient average times
//! `nu!` estimates the derivative `g_alpha^(nu)(x_alpha)`.
//!
//! Component estimates are centered so that their average over the
//! `alpha`-coordinates of the `Q` sample is zero; the removed constants are
//! folded into the intercept, so predictions match the uncentered form
//! `mu_hat + sum_alpha (integrated_alpha - mu_hat)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, EvaluationGrid};
use crate::kernels::{BandwidthSpec, Kernel};
use crate::localfit::{fit_sample, LocalFitConfig, LocalSample, Workspace};
use crate::losses::LossSpec;
use crate::rng;
use crate::scale::{median_in_place, ScaleEstimate};
use crate::{Error, Result};

/// Default number of integration draws.
pub const DEFAULT_M: usize = 500;

/// A grid point fails when more than this fraction of its fits are dropped.
pub const MAX_DROP_FRACTION: f64 = 0.5;

/// The product measure `Q` used to integrate out nuisance coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntegrationMeasure {
    /// `m` seeded draws from the uniform distribution on a box.
    UniformBox {
        bounds: Vec<(f64, f64)>,
        m: usize,
        seed: u64,
    },
    /// Caller-supplied draws, row-major `m x d`.
    ExplicitSample { points: Vec<f64>, d: usize },
    /// Deterministic midpoint grid with `per_axis` cells per coordinate.
    TensorGrid { bounds: Vec<(f64, f64)>, per_axis: usize },
}

impl IntegrationMeasure {
    pub fn uniform_box(bounds: Vec<(f64, f64)>, m: usize, seed: u64) -> Result<Self> {
        check_bounds(&bounds)?;
        if m == 0 {
            return Err(Error::InvalidInput("integration sample size must be >= 1".into()));
        }
        Ok(IntegrationMeasure::UniformBox { bounds, m, seed })
    }

    pub fn explicit(points: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 || points.is_empty() || !points.len().is_multiple_of(d) {
            return Err(Error::InvalidInput(
                "explicit integration sample must be a nonempty m x d matrix".into(),
            ));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("integration sample is not finite".into()));
        }
        Ok(IntegrationMeasure::ExplicitSample { points, d })
    }

    pub fn tensor_grid(bounds: Vec<(f64, f64)>, per_axis: usize) -> Result<Self> {
        check_bounds(&bounds)?;
        if per_axis == 0 {
            return Err(Error::InvalidInput("tensor grid needs at least one cell".into()));
        }
        Ok(IntegrationMeasure::TensorGrid { bounds, per_axis })
    }

    pub fn dim(&self) -> usize {
        match self {
            IntegrationMeasure::UniformBox { bounds, .. } | IntegrationMeasure::TensorGrid { bounds, .. } => {
                bounds.len()
            }
            IntegrationMeasure::ExplicitSample { d, .. } => *d,
        }
    }

    /// Materializes the integration points.
    pub fn sample(&self) -> IntegrationSample {
        match self {
            IntegrationMeasure::UniformBox { bounds, m, seed } => {
                let mut rng = rng::stream(*seed, rng::STREAM_MEASURE);
                let mut points = Vec::with_capacity(m * bounds.len());
                for _ in 0..*m {
                    for &(lo, hi) in bounds {
                        points.push(lo + (hi - lo) * rng.random::<f64>());
                    }
                }
                IntegrationSample {
                    points,
                    d: bounds.len(),
                }
            }
            IntegrationMeasure::ExplicitSample { points, d } => IntegrationSample {
                points: points.clone(),
                d: *d,
            },
            IntegrationMeasure::TensorGrid { bounds, per_axis } => {
                let d = bounds.len();
                let total = per_axis.pow(d as u32);
                let mut points = Vec::with_capacity(total * d);
                for idx in 0..total {
                    let mut rem = idx;
                    for &(lo, hi) in bounds {
                        let cell = rem % per_axis;
                        rem /= per_axis;
                        points.push(lo + (hi - lo) * (cell as f64 + 0.5) / *per_axis as f64);
                    }
                }
                IntegrationSample { points, d }
            }
        }
    }
}

fn check_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::InvalidInput("measure needs at least one coordinate".into()));
    }
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidInput(format!(
                "coordinate {} has an empty box [{lo}, {hi}]",
                j + 1
            )));
        }
    }
    Ok(())
}

/// Draws from `Q`, row-major `m x d`.
#[derive(Debug, Clone)]
pub struct IntegrationSample {
    points: Vec<f64>,
    d: usize,
}

impl IntegrationSample {
    pub fn m(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.points[k * self.d..(k + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.d)
    }
}

/// Estimate of `g_alpha^(nu)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentEstimate {
    pub alpha: usize,
    pub nu: usize,
    pub grid: EvaluationGrid,
    /// NaN at failed grid points.
    pub values: Vec<f64>,
    /// Dropped integration fits per grid point.
    pub n_failed: Vec<usize>,
    /// Indices of failed grid points.
    pub failures: Vec<usize>,
    /// Constant subtracted by centering (zero for derivatives).
    pub offset: f64,
    /// Fits that hit the iteration cap and were kept.
    pub nonconverged: usize,
    /// Total fits attempted.
    pub fits: usize,
}

impl ComponentEstimate {
    /// Linear interpolation over the non-failed grid nodes. Beyond the
    /// outermost valid node the nearest valid value is used.
    pub fn interpolate(&self, x: f64) -> Result<f64> {
        interpolate(&self.grid.points, &self.values, x).ok_or_else(|| {
            let (lo, hi) = (self.grid.points[0], self.grid.points[self.grid.len() - 1]);
            if x.is_nan() || x < lo || x > hi {
                Error::OutOfGrid {
                    alpha: self.alpha,
                    value: x,
                    lo,
                    hi,
                }
            } else {
                Error::AllPointsFailed { alpha: self.alpha }
            }
        })
    }

    /// Interpolated value before centering.
    pub fn interpolate_raw(&self, x: f64) -> Result<f64> {
        Ok(self.interpolate(x)? + self.offset)
    }

    pub fn nonconverged_fraction(&self) -> f64 {
        if self.fits == 0 {
            0.0
        } else {
            self.nonconverged as f64 / self.fits as f64
        }
    }
}

fn interpolate(grid: &[f64], values: &[f64], x: f64) -> Option<f64> {
    let n = grid.len();
    let tol = 1e-12 * (grid[n - 1] - grid[0]).abs().max(1.0);
    if x.is_nan() || x < grid[0] - tol || x > grid[n - 1] + tol {
        return None;
    }
    let pos = grid.partition_point(|&g| g <= x);
    let left = (0..pos).rev().find(|&i| !values[i].is_nan());
    let right = (pos.saturating_sub(1)..n).find(|&i| grid[i] >= x && !values[i].is_nan());
    match (left, right) {
        (Some(l), Some(r)) if l == r => Some(values[l]),
        (Some(l), Some(r)) => {
            let w = (x - grid[l]) / (grid[r] - grid[l]);
            Some(values[l] + w * (values[r] - values[l]))
        }
        (Some(i), None) | (None, Some(i)) => Some(values[i]),
        (None, None) => None,
    }
}

/// Observed points sorted by coordinate `alpha`.
struct AlphaIndex {
    alpha: usize,
    d: usize,
    xa: Vec<f64>,
    rows: Vec<f64>,
    y: Vec<f64>,
}

impl AlphaIndex {
    fn new(data: &Dataset, alpha: usize) -> Self {
        let mut idx: Vec<usize> = data.observed_indices().collect();
        idx.sort_by(|&a, &b| data.x(a)[alpha].total_cmp(&data.x(b)[alpha]).then(a.cmp(&b)));
        let d = data.d();
        let mut xa = Vec::with_capacity(idx.len());
        let mut rows = Vec::with_capacity(idx.len() * d);
        let mut y = Vec::with_capacity(idx.len());
        for &i in &idx {
            xa.push(data.x(i)[alpha]);
            rows.extend_from_slice(data.x(i));
            y.push(data.y(i));
        }
        Self { alpha, d, xa, rows, y }
    }
}

/// Averaged local coefficients at one grid point.
#[derive(Debug, Clone)]
struct PointAverage {
    means: Vec<f64>,
    dropped: usize,
    nonconverged: usize,
    failed: bool,
}

struct Scratch {
    ws: Workspace,
    sample: LocalSample,
    cand: Vec<usize>,
    cand_t: Vec<f64>,
    cand_k: Vec<f64>,
    x: Vec<f64>,
}

impl Scratch {
    fn new(d: usize) -> Self {
        Self {
            ws: Workspace::default(),
            sample: LocalSample::default(),
            cand: Vec::new(),
            cand_t: Vec::new(),
            cand_k: Vec::new(),
            x: vec![0.0; d],
        }
    }
}

fn average_at(
    index: &AlphaIndex,
    cfg: &LocalFitConfig,
    scale: &ScaleEstimate,
    q_sample: &IntegrationSample,
    x_alpha: f64,
    s: &mut Scratch,
) -> PointAverage {
    let alpha = index.alpha;
    let d = index.d;
    let h = cfg.bw.h_alpha;
    let ht = cfg.bw.h_tilde;
    let lo = index.xa.partition_point(|&v| v < x_alpha - h);
    let hi = index.xa.partition_point(|&v| v <= x_alpha + h);
    s.cand.clear();
    s.cand_t.clear();
    s.cand_k.clear();
    for i in lo..hi {
        let t = index.xa[i] - x_alpha;
        let k = cfg.kernel_alpha.eval(t / h) / h;
        if k != 0.0 {
            s.cand.push(i);
            s.cand_t.push(t);
            s.cand_k.push(k);
        }
    }

    let p = cfg.q + 1;
    let global = scale.value();
    let mut sums = vec![0.0; p];
    let mut ok = 0usize;
    let mut dropped = 0usize;
    let mut nonconverged = 0usize;
    for u in q_sample.rows() {
        s.sample.clear();
        for (c, &i) in s.cand.iter().enumerate() {
            let row = &index.rows[i * d..(i + 1) * d];
            let mut w = s.cand_k[c];
            for j in 0..d {
                if j == alpha {
                    continue;
                }
                let kv = cfg.kernel_nuisance.eval((row[j] - u[j]) / ht);
                if kv == 0.0 {
                    w = 0.0;
                    break;
                }
                w *= kv / ht;
            }
            if w != 0.0 {
                s.sample.push(s.cand_t[c], index.y[i], w);
            }
        }
        let sigma = match global {
            Some(v) => Ok(v),
            None => {
                s.x.copy_from_slice(u);
                s.x[alpha] = x_alpha;
                scale.at(&s.x)
            }
        };
        let fit = sigma.and_then(|sigma| fit_sample(&s.sample, cfg, sigma, &mut s.ws, None));
        match fit {
            Ok(res) => {
                ok += 1;
                if !res.converged {
                    nonconverged += 1;
                }
                for (acc, b) in sums.iter_mut().zip(&res.beta) {
                    *acc += b;
                }
            }
            Err(_) => dropped += 1,
        }
    }
    let m = q_sample.m();
    let failed = ok == 0 || dropped as f64 > MAX_DROP_FRACTION * m as f64;
    let means = if failed {
        vec![f64::NAN; p]
    } else {
        sums.iter().map(|v| v / ok as f64).collect()
    };
    PointAverage {
        means,
        dropped,
        nonconverged,
        failed,
    }
}

fn integrate_grid(
    data: &Dataset,
    cfg: &LocalFitConfig,
    scale: &ScaleEstimate,
    q_sample: &IntegrationSample,
    grid: &EvaluationGrid,
) -> Result<Vec<PointAverage>> {
    cfg.validate(data.d())?;
    if grid.alpha != cfg.alpha {
        return Err(Error::InvalidInput(format!(
            "grid is for component {} but the fit targets {}",
            grid.alpha, cfg.alpha
        )));
    }
    if q_sample.d != data.d() {
        return Err(Error::InvalidInput(format!(
            "integration measure has dimension {}, data has {}",
            q_sample.d,
            data.d()
        )));
    }
    let index = AlphaIndex::new(data, cfg.alpha);
    let d = data.d();
    let out: Vec<PointAverage> = grid
        .points
        .par_iter()
        .map_init(
            || Scratch::new(d),
            |s, &xa| average_at(&index, cfg, scale, q_sample, xa, s),
        )
        .collect();
    if out.iter().all(|p| p.failed) {
        return Err(Error::AllPointsFailed { alpha: cfg.alpha });
    }
    Ok(out)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn assemble(
    cfg: &LocalFitConfig,
    grid: &EvaluationGrid,
    averages: &[PointAverage],
    coefficient: usize,
    m: usize,
) -> ComponentEstimate {
    let factor = factorial(coefficient);
    ComponentEstimate {
        alpha: cfg.alpha,
        nu: coefficient,
        grid: grid.clone(),
        values: averages.iter().map(|a| factor * a.means[coefficient]).collect(),
        n_failed: averages.iter().map(|a| a.dropped).collect(),
        failures: averages
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.failed.then_some(i))
            .collect(),
        offset: 0.0,
        nonconverged: averages.iter().map(|a| a.nonconverged).sum(),
        fits: averages.len() * m,
    }
}

/// Subtracts the `Q`-sample average of the component from its values.
fn center(est: &mut ComponentEstimate, q_sample: &IntegrationSample) {
    let mut acc = 0.0;
    let mut count = 0usize;
    for u in q_sample.rows() {
        if let Some(v) = interpolate(&est.grid.points, &est.values, u[est.alpha]) {
            acc += v;
            count += 1;
        }
    }
    let offset = if count > 0 {
        acc / count as f64
    } else {
        let valid: Vec<f64> = est.values.iter().copied().filter(|v| !v.is_nan()).collect();
        valid.iter().sum::<f64>() / valid.len() as f64
    };
    for v in est.values.iter_mut() {
        *v -= offset;
    }
    est.offset = offset;
}

/// Centered estimate of the additive component `cfg.alpha` on `grid`.
pub fn estimate_component(
    data: &Dataset,
    cfg: &LocalFitConfig,
    scale: &ScaleEstimate,
    measure: &IntegrationMeasure,
    grid: &EvaluationGrid,
) -> Result<ComponentEstimate> {
    let q_sample = measure.sample();
    component_from_sample(data, cfg, scale, &q_sample, grid)
}

fn component_from_sample(
    data: &Dataset,
    cfg: &LocalFitConfig,
    scale: &ScaleEstimate,
    q_sample: &IntegrationSample,
    grid: &EvaluationGrid,
) -> Result<ComponentEstimate> {
    let averages = integrate_grid(data, cfg, scale, q_sample, grid)?;
    let mut est = assemble(cfg, grid, &averages, 0, q_sample.m());
    center(&mut est, q_sample);
    Ok(est)
}

/// Estimate of the derivative `g_alpha^(nu)`, `1 <= nu <= q`; not centered.
pub fn estimate_derivative(
    data: &Dataset,
    cfg: &LocalFitConfig,
    scale: &ScaleEstimate,
    measure: &IntegrationMeasure,
    grid: &EvaluationGrid,
    nu: usize,
) -> Result<ComponentEstimate> {
    if nu == 0 || nu > cfg.q {
        return Err(Error::InvalidInput(format!(
            "derivative order {nu} must lie in 1..={}",
            cfg.q
        )));
    }
    let q_sample = measure.sample();
    let averages = integrate_grid(data, cfg, scale, &q_sample, grid)?;
    Ok(assemble(cfg, grid, &averages, nu, q_sample.m()))
}

/// Location estimator applied to the residuals of the integrated effects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Median,
    Mean,
}

impl Location {
    /// The mean for least squares, the median for robust losses.
    pub fn for_loss(loss: &LossSpec) -> Self {
        if loss.is_least_squares() {
            Location::Mean
        } else {
            Location::Median
        }
    }
}

/// Location `mu_hat = -a_hat / (d - 1)`, where `a_hat` is the median of
/// `Y_i - sum_j raw_j(X_ij)` over observed rows and `raw_j` are the
/// uncentered integrated effects. For `d = 1` the median itself is returned.
///
/// Rows with a coordinate outside some component grid are skipped.
pub fn estimate_mu(data: &Dataset, components: &[ComponentEstimate]) -> Result<f64> {
    estimate_mu_with(data, components, Location::Median)
}

/// [`estimate_mu`] with a choice of location estimator.
pub fn estimate_mu_with(data: &Dataset, components: &[ComponentEstimate], location: Location) -> Result<f64> {
    if components.len() != data.d() {
        return Err(Error::InvalidInput(format!(
            "need {} component estimates, got {}",
            data.d(),
            components.len()
        )));
    }
    let mut residuals = Vec::with_capacity(data.n_observed());
    'rows: for i in data.observed_indices() {
        let xi = data.x(i);
        let mut fit = 0.0;
        for c in components {
            match c.interpolate_raw(xi[c.alpha]) {
                Ok(v) => fit += v,
                Err(Error::OutOfGrid { .. }) => continue 'rows,
                Err(e) => return Err(e),
            }
        }
        residuals.push(data.y(i) - fit);
    }
    let a = match location {
        Location::Median => median_in_place(&mut residuals)?,
        Location::Mean if residuals.is_empty() => return Err(Error::Empty("residuals inside the grids")),
        Location::Mean => residuals.iter().sum::<f64>() / residuals.len() as f64,
    };
    let d = data.d();
    Ok(if d == 1 { a } else { -a / (d as f64 - 1.0) })
}

/// `intercept + sum_alpha g_alpha(x_alpha)` with linear interpolation.
pub fn predict(components: &[ComponentEstimate], intercept: f64, x: &[f64]) -> Result<f64> {
    let mut total = intercept;
    for c in components {
        let v = x
            .get(c.alpha)
            .ok_or_else(|| Error::InvalidInput(format!("point has no coordinate {}", c.alpha + 1)))?;
        total += c.interpolate(*v)?;
    }
    Ok(total)
}

/// Settings shared by every component of an additive fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveConfig {
    pub q: usize,
    pub bw: BandwidthSpec,
    pub kernel_alpha: Kernel,
    pub kernel_nuisance: Kernel,
    pub loss: LossSpec,
    pub max_iter: usize,
    pub tol: f64,
    pub min_support: usize,
    /// Grid range per coordinate.
    pub support: Vec<(f64, f64)>,
    pub grid_points: usize,
}

impl AdditiveConfig {
    pub fn new(q: usize, bw: BandwidthSpec, loss: LossSpec, support: Vec<(f64, f64)>) -> Self {
        Self {
            q,
            bw,
            kernel_alpha: Kernel::Epanechnikov,
            kernel_nuisance: Kernel::Epanechnikov,
            loss,
            max_iter: 100,
            tol: 1e-8,
            min_support: q + 2,
            support,
            grid_points: 101,
        }
    }

    pub fn local(&self, alpha: usize) -> LocalFitConfig {
        LocalFitConfig {
            alpha,
            q: self.q,
            bw: self.bw,
            kernel_alpha: self.kernel_alpha,
            kernel_nuisance: self.kernel_nuisance,
            loss: self.loss,
            max_iter: self.max_iter,
            tol: self.tol,
            min_support: self.min_support,
        }
    }

    pub fn grid(&self, alpha: usize) -> Result<EvaluationGrid> {
        let (lo, hi) = self.support[alpha];
        EvaluationGrid::uniform(alpha, lo, hi, self.grid_points)
    }
}

/// A fitted additive model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveFit {
    /// Centered components, one per coordinate.
    pub components: Vec<ComponentEstimate>,
    /// Location `-a_hat / (d - 1)`; `a_hat` is the mean of residuals for
    /// least squares and their median otherwise.
    pub mu: f64,
    /// Constant term used in predictions: `mu + sum_alpha (offset_alpha - mu)`.
    pub intercept: f64,
}

impl AdditiveFit {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        predict(&self.components, self.intercept, x)
    }

    pub fn nonconverged_fraction(&self) -> f64 {
        let fits: usize = self.components.iter().map(|c| c.fits).sum();
        let bad: usize = self.components.iter().map(|c| c.nonconverged).sum();
        if fits == 0 {
            0.0
        } else {
            bad as f64 / fits as f64
        }
    }
}

/// Fits every component with a shared integration sample, then the location.
pub fn fit_additive(
    data: &Dataset,
    cfg: &AdditiveConfig,
    scale: &ScaleEstimate,
    measure: &IntegrationMeasure,
) -> Result<AdditiveFit> {
    let d = data.d();
    if cfg.support.len() != d {
        return Err(Error::InvalidInput(format!(
            "support has {} coordinates, data has {d}",
            cfg.support.len()
        )));
    }
    if data.n_observed() == 0 {
        return Err(Error::Empty("observed responses"));
    }
    let q_sample = measure.sample();
    let components = (0..d)
        .map(|alpha| component_from_sample(data, &cfg.local(alpha), scale, &q_sample, &cfg.grid(alpha)?))
        .collect::<Result<Vec<_>>>()?;
    let mu = estimate_mu_with(data, &components, Location::for_loss(&cfg.loss))?;
    let intercept = mu + components.iter().map(|c| c.offset - mu).sum::<f64>();
    Ok(AdditiveFit {
        components,
        mu,
        intercept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_skips_failed_nodes() {
        let grid = [0.0, 1.0, 2.0, 3.0];
        let values = [0.0, f64::NAN, 4.0, f64::NAN];
        assert_eq!(interpolate(&grid, &values, 1.0), Some(2.0));
        assert_eq!(interpolate(&grid, &values, 2.0), Some(4.0));
        assert_eq!(interpolate(&grid, &values, 2.5), Some(4.0));
        assert_eq!(interpolate(&grid, &values, 3.5), None);
        assert_eq!(interpolate(&grid, &[f64::NAN; 4], 1.0), None);
        assert_eq!(interpolate(&grid, &[1.0, 2.0, 3.0, 4.0], 0.25), Some(1.25));
    }

    #[test]
    fn tensor_grid_midpoints() {
        let m = IntegrationMeasure::tensor_grid(vec![(0.0, 1.0), (0.0, 2.0)], 2).unwrap();
        let s = m.sample();
        assert_eq!(s.m(), 4);
        assert_eq!(s.row(0), &[0.25, 0.5]);
        assert_eq!(s.row(3), &[0.75, 1.5]);
    }

    #[test]
    fn uniform_box_is_seeded() {
        let a = IntegrationMeasure::uniform_box(vec![(0.0, 1.0); 2], 10, 3)
            .unwrap()
            .sample();
        let b = IntegrationMeasure::uniform_box(vec![(0.0, 1.0); 2], 10, 3)
            .unwrap()
            .sample();
        assert_eq!(a.points, b.points);
        assert!(a.points.iter().all(|v| (0.0..1.0).contains(v)));
        assert!(IntegrationMeasure::uniform_box(vec![(1.0, 0.0)], 10, 3).is_err());
        assert!(IntegrationMeasure::uniform_box(vec![(0.0, 1.0)], 0, 3).is_err());
    }
}
