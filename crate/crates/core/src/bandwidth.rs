//! K-fold cross-validation over a grid of `(h, h_tilde)` pairs and the
//! admissible rate window for `h_tilde = gamma n^(-tau)`.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::integration::{fit_additive, AdditiveConfig, IntegrationMeasure};
use crate::kernels::BandwidthSpec;
use crate::losses::LossSpec;
use crate::rng;
use crate::scale::{mad, median_in_place, ScaleConfig};
use crate::{Error, Result};

/// A pair is infeasible when more than this fraction of held-out
/// predictions fail.
pub const MAX_FAILED_FRACTION: f64 = 0.1;

/// Relative tolerance for treating criterion values as tied.
pub const TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvCriterion {
    /// Mean squared held-out residual.
    Classical,
    /// Sum over folds of squared median plus squared MAD of residuals.
    Robust,
}

impl std::str::FromStr for CvCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "classical" => Ok(CvCriterion::Classical),
            "robust" => Ok(CvCriterion::Robust),
            other => Err(Error::InvalidInput(format!("unknown criterion `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub grid_h: Vec<f64>,
    pub grid_htilde: Vec<f64>,
    pub seed: u64,
    pub criterion: CvCriterion,
    /// Fit with this loss instead of the one paired with the criterion.
    pub loss_override: Option<LossSpec>,
    /// Evaluate one extra `h_tilde` step when the optimum sits on the
    /// boundary of `grid_htilde`.
    pub extend_grid: bool,
}

impl CvConfig {
    pub fn new(criterion: CvCriterion, grid_h: Vec<f64>, grid_htilde: Vec<f64>, seed: u64) -> Self {
        Self {
            folds: 5,
            grid_h,
            grid_htilde,
            seed,
            criterion,
            loss_override: None,
            extend_grid: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 folds, got {}",
                self.folds
            )));
        }
        for (name, grid) in [("h", &self.grid_h), ("h_tilde", &self.grid_htilde)] {
            if grid.is_empty() {
                return Err(Error::InvalidInput(format!("{name} grid is empty")));
            }
            if grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::InvalidInput(format!("{name} grid entries must be positive")));
            }
        }
        Ok(())
    }
}

/// Criterion value of one grid pair; `value` is `None` when infeasible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub h: f64,
    pub h_tilde: f64,
    pub value: Option<f64>,
    pub n_failed: usize,
    pub n_evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best: (f64, f64),
    pub best_value: f64,
    /// Sorted by `(h, h_tilde)`.
    pub table: Vec<CvEntry>,
    pub fold_sizes: Vec<usize>,
    pub extended: bool,
}

/// Fold label in `0..k` for every index `0..n`; sizes differ by at most one.
pub fn kfold_partition(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 || n < k {
        return Err(Error::InvalidInput(format!("cannot split {n} points into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, rng::STREAM_FOLDS));
    let mut labels = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        labels[i] = pos % k;
    }
    Ok(labels)
}

/// Held-out residuals of one fold and the number of failed predictions.
struct FoldOutcome {
    residuals: Vec<f64>,
    failed: usize,
}

fn fold_outcome(
    data: &Dataset,
    labels: &[usize],
    fold: usize,
    cfg: &AdditiveConfig,
    scale_cfg: &ScaleConfig,
    measure: &IntegrationMeasure,
) -> Option<FoldOutcome> {
    let train: Vec<usize> = (0..data.n()).filter(|&i| labels[i] != fold).collect();
    let train = data.subset(&train);
    let scale = scale_cfg.for_loss(&train, &cfg.loss).ok()?;
    let fit = fit_additive(&train, cfg, &scale, measure).ok()?;
    let mut residuals = Vec::new();
    let mut failed = 0;
    for i in data.observed_indices().filter(|&i| labels[i] == fold) {
        match fit.predict(data.x(i)) {
            Ok(v) if v.is_finite() => residuals.push(data.y(i) - v),
            _ => failed += 1,
        }
    }
    Some(FoldOutcome { residuals, failed })
}

fn criterion_value(criterion: CvCriterion, folds: &[FoldOutcome]) -> Option<f64> {
    match criterion {
        CvCriterion::Classical => {
            let (mut sum, mut count) = (0.0, 0usize);
            for f in folds {
                sum += f.residuals.iter().map(|r| r * r).sum::<f64>();
                count += f.residuals.len();
            }
            (count > 0).then(|| sum / count as f64)
        }
        CvCriterion::Robust => {
            let mut total = 0.0;
            let mut any = false;
            for f in folds.iter().filter(|f| !f.residuals.is_empty()) {
                let med = median_in_place(&mut f.residuals.clone()).ok()?;
                let spread = mad(&f.residuals, false).ok()?;
                total += med * med + spread * spread;
                any = true;
            }
            any.then_some(total)
        }
    }
}

fn evaluate_pairs(
    data: &Dataset,
    base: &AdditiveConfig,
    scale_cfg: &ScaleConfig,
    measure: &IntegrationMeasure,
    cv: &CvConfig,
    labels: &[usize],
    pairs: &[(f64, f64)],
) -> Result<Vec<CvEntry>> {
    let mut cfgs = Vec::with_capacity(pairs.len());
    for &(h, ht) in pairs {
        let mut cfg = base.clone();
        cfg.bw = BandwidthSpec::new(h, ht)?;
        if let Some(loss) = cv.loss_override {
            cfg.loss = loss;
        }
        cfgs.push(cfg);
    }
    let jobs: Vec<(usize, usize)> = (0..pairs.len())
        .flat_map(|p| (0..cv.folds).map(move |f| (p, f)))
        .collect();
    let outcomes: Vec<Option<FoldOutcome>> = jobs
        .par_iter()
        .map(|&(p, f)| fold_outcome(data, labels, f, &cfgs[p], scale_cfg, measure))
        .collect();

    Ok(pairs
        .iter()
        .enumerate()
        .map(|(p, &(h, h_tilde))| {
            let slice = &outcomes[p * cv.folds..(p + 1) * cv.folds];
            let mut n_failed = 0;
            let mut n_evaluated = 0;
            let mut folds = Vec::with_capacity(cv.folds);
            let mut broken = false;
            for (f, o) in slice.iter().enumerate() {
                match o {
                    Some(o) => {
                        n_failed += o.failed;
                        n_evaluated += o.residuals.len();
                        folds.push(FoldOutcome {
                            residuals: o.residuals.clone(),
                            failed: o.failed,
                        });
                    }
                    None => {
                        broken = true;
                        n_failed += data.observed_indices().filter(|&i| labels[i] == f).count();
                    }
                }
            }
            let total = n_failed + n_evaluated;
            let infeasible = broken || total == 0 || n_failed as f64 > MAX_FAILED_FRACTION * total as f64;
            let value = if infeasible {
                None
            } else {
                criterion_value(cv.criterion, &folds).filter(|v| v.is_finite())
            };
            CvEntry {
                h,
                h_tilde,
                value,
                n_failed,
                n_evaluated,
            }
        })
        .collect())
}

/// Smallest value with ties broken toward smaller `h`, then smaller `h_tilde`.
fn select(table: &[CvEntry]) -> Result<(f64, f64, f64)> {
    let min = table.iter().filter_map(|e| e.value).fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::AllPairsInfeasible);
    }
    let tol = TIE_TOLERANCE * (1.0 + min.abs());
    table
        .iter()
        .filter(|e| matches!(e.value, Some(v) if v - min <= tol))
        .min_by(|a, b| a.h.total_cmp(&b.h).then(a.h_tilde.total_cmp(&b.h_tilde)))
        .map(|e| (e.h, e.h_tilde, e.value.unwrap()))
        .ok_or(Error::AllPairsInfeasible)
}

fn sorted_unique(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// The next `h_tilde` beyond the boundary the optimum sits on, if any.
fn extension(grid: &[f64], best: f64) -> Option<f64> {
    let n = grid.len();
    let ratio = if n >= 2 { grid[n - 1] / grid[n - 2] } else { 2.0 };
    if best == grid[n - 1] {
        Some(best * ratio)
    } else if best == grid[0] {
        let low_ratio = if n >= 2 { grid[1] / grid[0] } else { 2.0 };
        Some(best / low_ratio)
    } else {
        None
    }
}

fn run_cv(
    data: &Dataset,
    base: &AdditiveConfig,
    scale_cfg: &ScaleConfig,
    measure: &IntegrationMeasure,
    cv: &CvConfig,
) -> Result<CvResult> {
    cv.validate()?;
    if data.n_observed() == 0 {
        return Err(Error::Empty("observed responses"));
    }
    let labels = kfold_partition(data.n(), cv.folds, cv.seed)?;
    let mut fold_sizes = vec![0; cv.folds];
    for &l in &labels {
        fold_sizes[l] += 1;
    }
    let grid_h = sorted_unique(&cv.grid_h);
    let grid_ht = sorted_unique(&cv.grid_htilde);
    let pairs: Vec<(f64, f64)> = grid_h
        .iter()
        .flat_map(|&h| grid_ht.iter().map(move |&ht| (h, ht)))
        .collect();
    let mut table = evaluate_pairs(data, base, scale_cfg, measure, cv, &labels, &pairs)?;
    let mut best = select(&table)?;
    let mut extended = false;
    if cv.extend_grid {
        if let Some(ht) = extension(&grid_ht, best.1) {
            let extra: Vec<(f64, f64)> = grid_h.iter().map(|&h| (h, ht)).collect();
            table.extend(evaluate_pairs(data, base, scale_cfg, measure, cv, &labels, &extra)?);
            table.sort_by(|a, b| a.h.total_cmp(&b.h).then(a.h_tilde.total_cmp(&b.h_tilde)));
            best = select(&table)?;
            extended = true;
        }
    }
    Ok(CvResult {
        best: (best.0, best.1),
        best_value: best.2,
        table,
        fold_sizes,
        extended,
    })
}

/// Classical criterion; fits use least squares unless overridden.
pub fn cv_classical(
    data: &Dataset,
    base: &AdditiveConfig,
    scale_cfg: &ScaleConfig,
    measure: &IntegrationMeasure,
    cv: &CvConfig,
) -> Result<CvResult> {
    let mut cv = cv.clone();
    cv.criterion = CvCriterion::Classical;
    if cv.loss_override.is_none() {
        cv.loss_override = Some(LossSpec::least_squares());
    }
    run_cv(data, base, scale_cfg, measure, &cv)
}

/// Robust criterion; fits use `base.loss` unless overridden.
pub fn cv_robust(
    data: &Dataset,
    base: &AdditiveConfig,
    scale_cfg: &ScaleConfig,
    measure: &IntegrationMeasure,
    cv: &CvConfig,
) -> Result<CvResult> {
    let mut cv = cv.clone();
    cv.criterion = CvCriterion::Robust;
    run_cv(data, base, scale_cfg, measure, &cv)
}

/// Dispatches on `cv.criterion`.
pub fn cross_validate(
    data: &Dataset,
    base: &AdditiveConfig,
    scale_cfg: &ScaleConfig,
    measure: &IntegrationMeasure,
    cv: &CvConfig,
) -> Result<CvResult> {
    match cv.criterion {
        CvCriterion::Classical => cv_classical(data, base, scale_cfg, measure, cv),
        CvCriterion::Robust => cv_robust(data, base, scale_cfg, measure, cv),
    }
}

/// Admissible interval for the `h_tilde` rate exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateWindow {
    pub lower: f64,
    /// Infinite when `d = 1`.
    pub upper: f64,
    pub tau: f64,
    pub tau_inside: bool,
    pub interval_empty: bool,
    pub kernel_order_ok: bool,
}

impl RateWindow {
    pub fn ok(&self) -> bool {
        self.tau_inside && self.kernel_order_ok
    }

    pub fn describe(&self) -> String {
        if self.ok() {
            return format!("ok: {} in ({}, {})", self.tau, self.lower, self.upper);
        }
        let mut parts = Vec::new();
        if !self.kernel_order_ok || self.interval_empty {
            parts.push(format!(
                "interval ({}, {}) is empty or the nuisance kernel order is below d",
                self.lower, self.upper
            ));
        }
        if !self.tau_inside {
            parts.push(format!("tau = {} outside ({}, {})", self.tau, self.lower, self.upper));
        }
        format!("violation: {}", parts.join("; "))
    }
}

/// `(q+1)/(ell(2q+3)) < tau < (q+1)/((2q+3)(d-1))` and `ell >= d`.
pub fn check_rate_window(q: usize, ell: usize, d: usize, tau: f64) -> RateWindow {
    let num = (q + 1) as f64;
    let den = (2 * q + 3) as f64;
    let lower = num / (ell as f64 * den);
    let upper = if d >= 2 {
        num / (den * (d - 1) as f64)
    } else {
        f64::INFINITY
    };
    RateWindow {
        lower,
        upper,
        tau,
        tau_inside: tau > lower && tau < upper,
        interval_empty: lower >= upper,
        kernel_order_ok: ell >= d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_sizes() {
        let l = kfold_partition(10, 5, 1).unwrap();
        let mut sizes = [0; 5];
        l.iter().for_each(|&f| sizes[f] += 1);
        assert_eq!(sizes, [2; 5]);
        let l = kfold_partition(11, 5, 1).unwrap();
        let mut sizes = [0; 5];
        l.iter().for_each(|&f| sizes[f] += 1);
        let mut s = sizes.to_vec();
        s.sort();
        assert_eq!(s, vec![2, 2, 2, 2, 3]);
        assert_eq!(kfold_partition(11, 5, 9).unwrap(), kfold_partition(11, 5, 9).unwrap());
        assert!(kfold_partition(3, 5, 1).is_err());
    }

    #[test]
    fn rate_window_endpoints() {
        let w = check_rate_window(1, 4, 4, 0.12);
        assert!((w.lower - 0.1).abs() < 1e-15);
        assert!((w.upper - 2.0 / 15.0).abs() < 1e-15);
        assert!(w.ok());
        let w = check_rate_window(1, 2, 4, 0.12);
        assert!(w.interval_empty && !w.kernel_order_ok && !w.ok());
        let w = check_rate_window(1, 4, 2, 0.2);
        assert!((w.upper - 0.4).abs() < 1e-15 && w.ok());
    }

    #[test]
    fn selection_breaks_ties_toward_small_bandwidths() {
        let e = |h, h_tilde, value| CvEntry {
            h,
            h_tilde,
            value,
            n_failed: 0,
            n_evaluated: 1,
        };
        let table = vec![
            e(0.3, 0.1, Some(1.0)),
            e(0.1, 0.5, Some(1.0 + 1e-13)),
            e(0.1, 0.2, Some(1.0)),
            e(0.05, 0.1, None),
        ];
        assert_eq!(select(&table).unwrap().0, 0.1);
        assert_eq!(select(&table).unwrap().1, 0.2);
        assert!(matches!(select(&[e(0.1, 0.1, None)]), Err(Error::AllPairsInfeasible)));
    }

    #[test]
    fn robust_criterion_symmetric_residuals() {
        let folds = vec![
            FoldOutcome {
                residuals: vec![-2.0, 0.0, 2.0],
                failed: 0,
            },
            FoldOutcome {
                residuals: vec![-1.0, 0.0, 1.0],
                failed: 0,
            },
        ];
        assert_eq!(criterion_value(CvCriterion::Robust, &folds), Some(4.0 + 1.0));
        assert_eq!(criterion_value(CvCriterion::Classical, &folds), Some((8.0 + 2.0) / 6.0));
    }

    #[test]
    fn extension_steps_outward() {
        assert_eq!(extension(&[0.1, 0.2, 0.4], 0.4), Some(0.8));
        assert_eq!(extension(&[0.1, 0.2, 0.4], 0.1), Some(0.05));
        assert_eq!(extension(&[0.1, 0.2, 0.4], 0.2), None);
        assert_eq!(extension(&[0.3], 0.3), Some(0.6));
    }
}
