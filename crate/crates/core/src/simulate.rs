//! Monte Carlo designs, contamination schemes, ISE metrics and the
//! replication harness.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{cv_classical, cv_robust, CvConfig, CvCriterion};
use crate::data::{format_float, Dataset};
use crate::integration::{fit_additive, AdditiveConfig, AdditiveFit, ComponentEstimate, IntegrationMeasure, DEFAULT_M};
use crate::kernels::{BandwidthSpec, Kernel};
use crate::losses::LossSpec;
use crate::rng;
use crate::scale::{median, ScaleConfig};
use crate::{Error, Result};

/// Region of the C2 outliers, `[0.2, 0.29]^2`.
pub const C2_REGION: (f64, f64) = (0.2, 0.29);
/// Region of the C3 outliers, `[0.2, 0.5]^2`.
pub const C3_REGION: (f64, f64) = (0.2, 0.5);
/// Outlier distribution `N(15, 0.1^2)` used by C1 and C3.
pub const OUTLIER_MEAN: f64 = 15.0;
/// Level shift `N(10, 0.1^2)` used by C2.
pub const SHIFT_MEAN: f64 = 10.0;
pub const OUTLIER_SD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DesignKind {
    D2,
    D4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Contamination {
    C0,
    C1,
    C2,
    C3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Missing {
    Full,
    P2,
}

macro_rules! named_enum {
    ($t:ty, $what:literal, $($v:ident => $s:literal),+) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(Self::$v => $s),+ })
            }
        }

        impl FromStr for $t {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($s => Ok(Self::$v),)+
                    other => Err(Error::InvalidInput(format!(
                        "unknown {} `{other}` (expected one of: {})",
                        $what,
                        [$($s),+].join(", ")
                    ))),
                }
            }
        }
    };
}

named_enum!(DesignKind, "design", D2 => "d2", D4 => "d4");
named_enum!(Contamination, "contamination", C0 => "c0", C1 => "c1", C2 => "c2", C3 => "c3");
named_enum!(Missing, "missingness", Full => "full", P2 => "p2");

impl DesignKind {
    pub fn d(self) -> usize {
        match self {
            DesignKind::D2 => 2,
            DesignKind::D4 => 4,
        }
    }

    pub fn bounds(self) -> (f64, f64) {
        match self {
            DesignKind::D2 => (0.0, 1.0),
            DesignKind::D4 => (-3.0, 3.0),
        }
    }

    pub fn support(self) -> Vec<(f64, f64)> {
        vec![self.bounds(); self.d()]
    }

    pub fn default_sigma0(self) -> f64 {
        match self {
            DesignKind::D2 => 0.5,
            DesignKind::D4 => 0.15,
        }
    }
}

/// `p_2(x) = 0.4 + 0.5 cos^2(x_1 + 0.2)`.
pub fn p2(x: &[f64]) -> f64 {
    let c = (x[0] + 0.2).cos();
    0.4 + 0.5 * c * c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub design: DesignKind,
    pub n: usize,
    pub contamination: Contamination,
    pub missing: Missing,
    pub sigma0: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn new(
        design: DesignKind,
        n: usize,
        contamination: Contamination,
        missing: Missing,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            design,
            n,
            contamination,
            missing,
            sigma0: design.default_sigma0(),
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("sample size must be positive".into()));
        }
        if !(self.sigma0.is_finite() && self.sigma0 > 0.0) {
            return Err(Error::InvalidInput("sigma0 must be positive".into()));
        }
        if self.design == DesignKind::D4 {
            if matches!(self.contamination, Contamination::C2 | Contamination::C3) {
                return Err(Error::InvalidInput(format!(
                    "contamination {} is only defined for d2",
                    self.contamination
                )));
            }
            if self.missing == Missing::P2 {
                return Err(Error::InvalidInput("missingness p2 is only defined for d2".into()));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.design, self.contamination, self.missing)
    }
}

/// The additive truth of a design; `mu = 0` for both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueModel {
    pub design: DesignKind,
}

impl TrueModel {
    pub fn d(&self) -> usize {
        self.design.d()
    }

    pub fn mu(&self) -> f64 {
        0.0
    }

    /// Derivative of order `order <= 2` of component `j` (zero-based).
    pub fn derivative(&self, j: usize, order: usize, x: f64) -> f64 {
        use std::f64::consts::PI;
        match (self.design, j, order) {
            (DesignKind::D2, 0, 0) => 24.0 * (x - 0.5).powi(2) - 2.0,
            (DesignKind::D2, 0, 1) => 48.0 * (x - 0.5),
            (DesignKind::D2, 0, 2) => 48.0,
            (DesignKind::D2, 1, 0) => 2.0 * PI * (PI * x).sin() - 4.0,
            (DesignKind::D2, 1, 1) => 2.0 * PI * PI * (PI * x).cos(),
            (DesignKind::D2, 1, 2) => -2.0 * PI.powi(3) * (PI * x).sin(),
            (DesignKind::D4, 0, 0) => x.powi(3) / 12.0,
            (DesignKind::D4, 0, 1) => x * x / 4.0,
            (DesignKind::D4, 0, 2) => x / 2.0,
            (DesignKind::D4, 1, 0) => (-x).sin(),
            (DesignKind::D4, 1, 1) => -x.cos(),
            (DesignKind::D4, 1, 2) => x.sin(),
            (DesignKind::D4, 2, 0) => x * x / 2.0 - 1.5,
            (DesignKind::D4, 2, 1) => x,
            (DesignKind::D4, 2, 2) => 1.0,
            (DesignKind::D4, 3, 0) => x.exp() / 4.0 - (3f64.exp() - (-3f64).exp()) / 24.0,
            (DesignKind::D4, 3, _) => x.exp() / 4.0,
            _ => panic!("no component {j} of order {order} in {}", self.design),
        }
    }

    pub fn component(&self, j: usize, x: f64) -> f64 {
        self.derivative(j, 0, x)
    }

    pub fn regression(&self, x: &[f64]) -> f64 {
        self.mu() + (0..self.d()).map(|j| self.component(j, x[j])).sum::<f64>()
    }
}

fn in_square(x: &[f64], (lo, hi): (f64, f64)) -> bool {
    x[..2].iter().all(|&v| v >= lo && v <= hi)
}

/// Draws a dataset. Each row consumes the same number of variates, so rows
/// stay aligned across contamination and missingness settings.
pub fn gen_dataset(cfg: &ScenarioConfig) -> Result<(Dataset, TrueModel)> {
    cfg.validate()?;
    let model = TrueModel { design: cfg.design };
    let d = model.d();
    let (lo, hi) = cfg.design.bounds();
    let mut rng = rng::stream(cfg.seed, rng::STREAM_DATA);
    let mut xs = Vec::with_capacity(cfg.n * d);
    let mut ys = Vec::with_capacity(cfg.n);
    let mut delta = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let start = xs.len();
        for _ in 0..d {
            xs.push(lo + (hi - lo) * rng.random::<f64>());
        }
        let x = &xs[start..];
        let z: f64 = rng.sample(StandardNormal);
        let coin: f64 = rng.random();
        let zc: f64 = rng.sample(StandardNormal);
        let miss: f64 = rng.random();
        let clean = cfg.sigma0 * z;
        let outlier = OUTLIER_MEAN + OUTLIER_SD * zc;
        let u = match cfg.contamination {
            Contamination::C0 => clean,
            Contamination::C1 => {
                if coin < 0.15 {
                    outlier
                } else {
                    clean
                }
            }
            Contamination::C2 => {
                if in_square(x, C2_REGION) {
                    SHIFT_MEAN + OUTLIER_SD * zc
                } else {
                    clean
                }
            }
            Contamination::C3 => {
                if in_square(x, C3_REGION) && coin < 0.3 {
                    outlier
                } else {
                    clean
                }
            }
        };
        let p = match cfg.missing {
            Missing::Full => 1.0,
            Missing::P2 => p2(x),
        };
        ys.push(model.regression(x) + u);
        delta.push(miss < p);
    }
    Ok((Dataset::new(xs, d, ys, delta)?, model))
}

fn ise_with(data: &Dataset, mut err: impl FnMut(&[f64]) -> Result<f64>) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in data.observed_indices() {
        let e = err(data.x(i))?;
        sum += e * e;
        count += 1;
    }
    if count == 0 {
        return Err(Error::Empty("observed responses"));
    }
    Ok(sum / count as f64)
}

/// Mean of `(g_j - g_hat_j)^2` over observed `X_ij`.
pub fn ise_component(est: &ComponentEstimate, truth: impl Fn(f64) -> f64, data: &Dataset) -> Result<f64> {
    ise_with(data, |x| Ok(truth(x[est.alpha]) - est.interpolate(x[est.alpha])?))
}

/// Mean of `(g - g_hat)^2` over observed `X_i`.
pub fn ise_regression(
    predict: impl Fn(&[f64]) -> Result<f64>,
    truth: impl Fn(&[f64]) -> f64,
    data: &Dataset,
) -> Result<f64> {
    ise_with(data, |x| Ok(truth(x) - predict(x)?))
}

/// Mean after dropping `ceil(trim N)` values from each end; `trim = 0.5`
/// is the median.
pub fn trimmed_mean(values: &[f64], trim: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("trimmed mean input"));
    }
    if !(0.0..=0.5).contains(&trim) {
        return Err(Error::InvalidInput(format!("trim {trim} outside [0, 0.5]")));
    }
    if trim == 0.5 {
        return median(values);
    }
    let n = values.len();
    let k = (trim * n as f64 - 1e-9).ceil().max(0.0) as usize;
    if 2 * k >= n {
        return Err(Error::InvalidInput(format!("trim {trim} removes all {n} values")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let kept = &v[k..n - k];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BandwidthChoice {
    Fixed {
        bw: BandwidthSpec,
    },
    /// Cross-validated each replication; the fold seed is the replication seed.
    Cv {
        cv: CvConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub label: String,
    pub loss: LossSpec,
    pub bandwidth: BandwidthChoice,
}

impl EstimatorSpec {
    pub fn fixed(label: &str, loss: LossSpec, bw: BandwidthSpec) -> Self {
        Self {
            label: label.to_string(),
            loss,
            bandwidth: BandwidthChoice::Fixed { bw },
        }
    }
}

/// Estimator settings shared by every replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub q: usize,
    pub kernel_alpha: Kernel,
    pub kernel_nuisance: Kernel,
    pub m: usize,
    pub grid_points: usize,
    pub scale: ScaleConfig,
    pub max_iter: usize,
    pub tol: f64,
    /// Minimum number of weighted observations per local fit.
    pub min_support: usize,
}

impl FitSettings {
    /// Local linear fits with Epanechnikov kernels for d2; a fourth-order
    /// nuisance kernel for d4. The d4 scale window keeps about five points
    /// per box on average.
    pub fn for_design(design: DesignKind, n: usize) -> Self {
        let (kernel_nuisance, scale_bw) = match design {
            DesignKind::D2 => (Kernel::Epanechnikov, 0.1),
            DesignKind::D4 => (Kernel::FourthOrder, 0.93 * (500.0 / n as f64).powf(0.25)),
        };
        Self {
            q: 1,
            kernel_alpha: Kernel::Epanechnikov,
            kernel_nuisance,
            m: DEFAULT_M,
            grid_points: 101,
            scale: ScaleConfig::global(vec![scale_bw; design.d()]),
            max_iter: 100,
            tol: 1e-8,
            min_support: 3,
        }
    }

    pub fn additive(&self, design: DesignKind, loss: LossSpec, bw: BandwidthSpec) -> AdditiveConfig {
        let mut cfg = AdditiveConfig::new(self.q, bw, loss, design.support());
        cfg.kernel_alpha = self.kernel_alpha;
        cfg.kernel_nuisance = self.kernel_nuisance;
        cfg.grid_points = self.grid_points;
        cfg.max_iter = self.max_iter;
        cfg.tol = self.tol;
        cfg.min_support = self.min_support;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub scenario: ScenarioConfig,
    pub replications: usize,
    pub base_seed: u64,
    pub estimators: Vec<EstimatorSpec>,
    pub fit: FitSettings,
    /// Trimming levels reported besides the mean and the median.
    pub trims: Vec<f64>,
    /// Keep every component grid in the report.
    pub record_components: bool,
}

impl StudyConfig {
    /// Huber (`c = 1.345`) against least squares at fixed bandwidths.
    pub fn classical_vs_robust(
        scenario: ScenarioConfig,
        replications: usize,
        base_seed: u64,
        bw: BandwidthSpec,
    ) -> Self {
        let fit = FitSettings::for_design(scenario.design, scenario.n);
        Self {
            scenario,
            replications,
            base_seed,
            estimators: vec![
                EstimatorSpec::fixed("classical", LossSpec::least_squares(), bw),
                EstimatorSpec::fixed("robust", LossSpec::default(), bw),
            ],
            fit,
            trims: vec![0.01, 0.05],
            record_components: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOutcome {
    pub label: String,
    pub ise: f64,
    pub ise_components: Vec<f64>,
    pub bandwidth: BandwidthSpec,
    pub mu: f64,
    pub nonconverged_fraction: f64,
    /// Centered component values on the grid, when recorded.
    pub components: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub index: usize,
    pub seed: u64,
    pub n_observed: usize,
    pub observed_fraction: f64,
    /// One entry per estimator, `None` when that fit failed.
    pub outcomes: Vec<Option<EstimatorOutcome>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub replication: usize,
    pub estimator: String,
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimmedValue {
    pub trim: f64,
    /// `None` when the trim removes every value.
    pub value: Option<f64>,
}

/// Summary of one estimator and target (`g` or `g1`, `g2`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub estimator: String,
    pub target: String,
    pub n: usize,
    pub mise: f64,
    pub medise: f64,
    pub trimmed: Vec<TrimmedValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    /// Grid shared by every component, per coordinate.
    pub grids: Vec<Vec<f64>>,
    pub replications: Vec<ReplicationRecord>,
    pub summaries: Vec<Summary>,
    pub failures: Vec<FailureRecord>,
}

impl StudyReport {
    /// Per-replication ISE of `target` for `estimator`, excluding failures.
    pub fn ise_values(&self, estimator: &str, target: &str) -> Vec<f64> {
        let Some(e) = self.config.estimators.iter().position(|s| s.label == estimator) else {
            return Vec::new();
        };
        self.replications
            .iter()
            .filter_map(|r| r.outcomes[e].as_ref())
            .filter_map(|o| target_value(o, target))
            .collect()
    }

    pub fn summary(&self, estimator: &str, target: &str) -> Option<&Summary> {
        self.summaries
            .iter()
            .find(|s| s.estimator == estimator && s.target == target)
    }

    pub fn mean_observed_fraction(&self) -> f64 {
        let n = self.replications.len().max(1) as f64;
        self.replications.iter().map(|r| r.observed_fraction).sum::<f64>() / n
    }
}

fn target_value(o: &EstimatorOutcome, target: &str) -> Option<f64> {
    if target == "g" {
        return Some(o.ise);
    }
    let j: usize = target.strip_prefix('g')?.parse().ok()?;
    o.ise_components.get(j.checked_sub(1)?).copied()
}

fn targets(d: usize) -> Vec<String> {
    std::iter::once("g".to_string())
        .chain((1..=d).map(|j| format!("g{j}")))
        .collect()
}

/// Summaries recomputed from the stored per-replication ISEs.
pub fn summarize(report: &StudyReport) -> Result<Vec<Summary>> {
    let d = report.config.scenario.design.d();
    let mut out = Vec::new();
    for est in &report.config.estimators {
        for target in targets(d) {
            let values = report.ise_values(&est.label, &target);
            if values.is_empty() {
                continue;
            }
            let trimmed = report
                .config
                .trims
                .iter()
                .map(|&t| TrimmedValue {
                    trim: t,
                    value: trimmed_mean(&values, t).ok(),
                })
                .collect();
            out.push(Summary {
                estimator: est.label.clone(),
                target,
                n: values.len(),
                mise: trimmed_mean(&values, 0.0)?,
                medise: median(&values)?,
                trimmed,
            });
        }
    }
    Ok(out)
}

fn fit_estimator(
    data: &Dataset,
    model: &TrueModel,
    study: &StudyConfig,
    spec: &EstimatorSpec,
    measure: &IntegrationMeasure,
    seed: u64,
) -> Result<EstimatorOutcome> {
    let design = study.scenario.design;
    let fit = &study.fit;
    let bw = match &spec.bandwidth {
        BandwidthChoice::Fixed { bw } => *bw,
        BandwidthChoice::Cv { cv } => {
            let mut cv = cv.clone();
            cv.seed = seed;
            let base = fit.additive(design, spec.loss, BandwidthSpec::new(1.0, 1.0)?);
            let res = match cv.criterion {
                CvCriterion::Classical => cv_classical(data, &base, &fit.scale, measure, &cv)?,
                CvCriterion::Robust => cv_robust(data, &base, &fit.scale, measure, &cv)?,
            };
            BandwidthSpec::new(res.best.0, res.best.1)?
        }
    };
    let cfg = fit.additive(design, spec.loss, bw);
    let scale = fit.scale.for_loss(data, &spec.loss)?;
    let additive: AdditiveFit = fit_additive(data, &cfg, &scale, measure)?;
    let ise = ise_regression(|x| additive.predict(x), |x| model.regression(x), data)?;
    let ise_components = additive
        .components
        .iter()
        .map(|c| ise_component(c, |x| model.component(c.alpha, x), data))
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimatorOutcome {
        label: spec.label.clone(),
        ise,
        ise_components,
        bandwidth: bw,
        mu: additive.mu,
        nonconverged_fraction: additive.nonconverged_fraction(),
        components: study
            .record_components
            .then(|| additive.components.iter().map(|c| c.values.clone()).collect()),
    })
}

fn run_replication(study: &StudyConfig, index: usize) -> (ReplicationRecord, Vec<FailureRecord>) {
    let seed = rng::replication_seed(study.base_seed, index as u64);
    let mut scenario = study.scenario.clone();
    scenario.seed = seed;
    let mut failures = Vec::new();
    let fail = |estimator: &str, e: &Error| FailureRecord {
        replication: index,
        estimator: estimator.to_string(),
        code: e.code().to_string(),
        message: e.to_string(),
    };
    let generated = gen_dataset(&scenario).and_then(|(data, model)| {
        let measure = IntegrationMeasure::uniform_box(scenario.design.support(), study.fit.m, seed)?;
        Ok((data, model, measure))
    });
    let (data, model, measure) = match generated {
        Ok(v) => v,
        Err(e) => {
            failures.push(fail("*", &e));
            let record = ReplicationRecord {
                index,
                seed,
                n_observed: 0,
                observed_fraction: 0.0,
                outcomes: vec![None; study.estimators.len()],
            };
            return (record, failures);
        }
    };
    let outcomes = study
        .estimators
        .iter()
        .map(|spec| match fit_estimator(&data, &model, study, spec, &measure, seed) {
            Ok(o) => Some(o),
            Err(e) => {
                failures.push(fail(&spec.label, &e));
                None
            }
        })
        .collect();
    let record = ReplicationRecord {
        index,
        seed,
        n_observed: data.n_observed(),
        observed_fraction: data.n_observed() as f64 / data.n() as f64,
        outcomes,
    };
    (record, failures)
}

/// Runs `config.replications` replications; replication `r` uses seed
/// `base_seed ^ r`. Failed fits are recorded and excluded from summaries.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.scenario.validate()?;
    if config.replications == 0 {
        return Err(Error::InvalidInput("need at least one replication".into()));
    }
    if config.estimators.is_empty() {
        return Err(Error::InvalidInput("no estimators configured".into()));
    }
    for t in &config.trims {
        if !(0.0..=0.5).contains(t) {
            return Err(Error::InvalidInput(format!("trim {t} outside [0, 0.5]")));
        }
    }
    let results: Vec<(ReplicationRecord, Vec<FailureRecord>)> = (0..config.replications)
        .into_par_iter()
        .map(|r| run_replication(config, r))
        .collect();
    let mut replications = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (rec, fails) in results {
        replications.push(rec);
        failures.extend(fails);
    }
    let (lo, hi) = config.scenario.design.bounds();
    let grid: Vec<f64> = (0..config.fit.grid_points)
        .map(|k| lo + (hi - lo) * k as f64 / (config.fit.grid_points - 1) as f64)
        .collect();
    let mut report = StudyReport {
        config: config.clone(),
        grids: vec![grid; config.scenario.design.d()],
        replications,
        summaries: Vec::new(),
        failures,
    };
    report.summaries = summarize(&report)?;
    Ok(report)
}

pub fn write_report_json(report: &StudyReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::InvalidInput(format!("cannot serialize report: {e}")))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report_json(path: impl AsRef<Path>) -> Result<StudyReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// One row per summary statistic and scenario; columns are
/// `<estimator>_<target>` for every estimator and target.
pub fn summary_table(reports: &[StudyReport]) -> String {
    let mut out = String::new();
    let Some(first) = reports.first() else {
        return out;
    };
    let d = first.config.scenario.design.d();
    let labels: Vec<String> = first.config.estimators.iter().map(|e| e.label.clone()).collect();
    let mut header = vec!["statistic".to_string(), "scenario".to_string()];
    for l in &labels {
        for t in targets(d) {
            header.push(format!("{l}_{t}"));
        }
    }
    out.push_str(&header.join(","));
    out.push('\n');

    let mut stats: Vec<(String, Box<dyn Fn(&Summary) -> Option<f64>>)> = vec![
        ("mise".into(), Box::new(|s: &Summary| Some(s.mise))),
        ("medise".into(), Box::new(|s: &Summary| Some(s.medise))),
    ];
    for &t in &first.config.trims {
        stats.push((
            format!("trim_{t}"),
            Box::new(move |s: &Summary| s.trimmed.iter().find(|v| v.trim == t).and_then(|v| v.value)),
        ));
    }
    for (name, get) in &stats {
        for rep in reports {
            let mut row = vec![name.clone(), rep.config.scenario.label()];
            for l in &labels {
                for t in targets(d) {
                    row.push(
                        rep.summary(l, &t)
                            .and_then(get)
                            .map(format_float)
                            .unwrap_or_else(|| "NA".into()),
                    );
                }
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

pub fn write_summary_csv(reports: &[StudyReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, summary_table(reports)).map_err(|e| Error::io(path, e))
}

/// Long format: `replication,estimator,component,x,value`.
pub fn components_long(report: &StudyReport) -> String {
    let mut out = String::from("replication,estimator,component,x,value\n");
    for rec in &report.replications {
        for o in rec.outcomes.iter().flatten() {
            let Some(comps) = &o.components else { continue };
            for (j, values) in comps.iter().enumerate() {
                for (x, v) in report.grids[j].iter().zip(values) {
                    out.push_str(&format!(
                        "{},{},{},{},{}\n",
                        rec.index,
                        o.label,
                        j + 1,
                        format_float(*x),
                        if v.is_nan() { "NA".into() } else { format_float(*v) }
                    ));
                }
            }
        }
    }
    out
}

pub fn write_components_csv(report: &StudyReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, components_long(report)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trimmed_mean_examples() {
        assert_eq!(trimmed_mean(&[1.0, 2.0, 3.0, 4.0, 100.0], 0.2).unwrap(), 3.0);
        assert_eq!(trimmed_mean(&[1.0, 2.0, 3.0, 4.0, 100.0], 0.0).unwrap(), 22.0);
        assert_eq!(trimmed_mean(&[1.0, 2.0, 3.0, 4.0, 100.0], 0.5).unwrap(), 3.0);
        assert_eq!(trimmed_mean(&[5.0, 1.0, 3.0, 2.0], 0.5).unwrap(), 2.5);
        assert!(trimmed_mean(&[1.0, 2.0], 0.49).is_err());
        assert!(trimmed_mean(&[], 0.1).is_err());
    }

    #[test]
    fn truths_integrate_to_zero() {
        for design in [DesignKind::D2, DesignKind::D4] {
            let model = TrueModel { design };
            let (lo, hi) = design.bounds();
            let gl = crate::quadrature::GaussLegendre::new(40);
            for j in 0..design.d() {
                let mean = gl.integrate(lo, hi, |x| model.component(j, x)) / (hi - lo);
                assert!(mean.abs() < 1e-12, "{design} g{}: {mean}", j + 1);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for design in [DesignKind::D2, DesignKind::D4] {
            let model = TrueModel { design };
            for j in 0..design.d() {
                for x in [-0.7, 0.2, 0.65] {
                    for order in 1..=2 {
                        let e = 1e-5;
                        let fd =
                            (model.derivative(j, order - 1, x + e) - model.derivative(j, order - 1, x - e)) / (2.0 * e);
                        assert!((model.derivative(j, order, x) - fd).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn full_response_design_is_complete() {
        let cfg = ScenarioConfig::new(DesignKind::D2, 500, Contamination::C0, Missing::Full, 3).unwrap();
        let (data, _) = gen_dataset(&cfg).unwrap();
        assert_eq!(data.n_observed(), 500);
        assert!(ScenarioConfig::new(DesignKind::D4, 10, Contamination::C2, Missing::Full, 1).is_err());
        assert!(ScenarioConfig::new(DesignKind::D4, 10, Contamination::C0, Missing::P2, 1).is_err());
    }

    #[test]
    fn contamination_only_changes_errors() {
        let base = ScenarioConfig::new(DesignKind::D2, 300, Contamination::C0, Missing::Full, 8).unwrap();
        let (clean, _) = gen_dataset(&base).unwrap();
        for c in [Contamination::C1, Contamination::C2, Contamination::C3] {
            let mut cfg = base.clone();
            cfg.contamination = c;
            let (dirty, _) = gen_dataset(&cfg).unwrap();
            assert_eq!(clean.x_flat(), dirty.x_flat());
        }
    }

    #[test]
    fn target_lookup() {
        let o = EstimatorOutcome {
            label: "x".into(),
            ise: 1.0,
            ise_components: vec![2.0, 3.0],
            bandwidth: BandwidthSpec::new(0.1, 0.1).unwrap(),
            mu: 0.0,
            nonconverged_fraction: 0.0,
            components: None,
        };
        assert_eq!(target_value(&o, "g"), Some(1.0));
        assert_eq!(target_value(&o, "g2"), Some(3.0));
        assert_eq!(target_value(&o, "g3"), None);
        assert_eq!(target_value(&o, "g0"), None);
    }

    #[test]
    fn names_round_trip() {
        for s in ["d2", "d4"] {
            assert_eq!(s.parse::<DesignKind>().unwrap().to_string(), s);
        }
        assert_eq!("C3".parse::<Contamination>().unwrap(), Contamination::C3);
        assert!("c9".parse::<Contamination>().is_err());
        assert_eq!("p2".parse::<Missing>().unwrap(), Missing::P2);
    }
}
