mod common;

use common::*;
use rand::Rng;
use rmint::data::{Dataset, EvaluationGrid};
use rmint::integration::{
    estimate_component, estimate_derivative, estimate_mu, fit_additive, predict, AdditiveConfig, ComponentEstimate,
    IntegrationMeasure,
};
use rmint::kernels::BandwidthSpec;
use rmint::localfit::local_m_fit;
use rmint::losses::LossSpec;
use rmint::scale::{ScaleConfig, ScaleEstimate};

fn unit_cfg(q: usize, h: f64, loss: LossSpec) -> AdditiveConfig {
    AdditiveConfig::new(q, BandwidthSpec::new(h, h).unwrap(), loss, vec![(0.0, 1.0); 2])
}

fn unit_measure(m: usize, seed: u64) -> IntegrationMeasure {
    IntegrationMeasure::uniform_box(vec![(0.0, 1.0); 2], m, seed).unwrap()
}

fn interior(c: &ComponentEstimate, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
    c.grid
        .points
        .iter()
        .zip(&c.values)
        .filter(move |(x, _)| **x >= lo && **x <= hi)
        .map(|(x, v)| (*x, *v))
}

#[test]
fn noiseless_components_respect_the_bias_bound() {
    let data = d2_dataset(11, 2000, 0.0);
    let (h, ht) = (0.1, 0.1);
    let mut cfg = unit_cfg(1, h, LossSpec::least_squares());
    cfg.bw = BandwidthSpec::new(h, ht).unwrap();
    let fit = fit_additive(&data, &cfg, &ScaleEstimate::Global(1.0), &unit_measure(300, 1)).unwrap();
    let sup_g2 = 2.0 * std::f64::consts::PI.powi(3);
    let bound = 5.0 * (h * h + ht * ht) * sup_g2;
    let truths: [fn(f64) -> f64; 2] = [g1, g2];
    for (c, g) in fit.components.iter().zip(truths) {
        for (x, v) in interior(c, 0.15, 0.85) {
            assert!((v - g(x)).abs() < bound, "x={x}: {v} vs {}", g(x));
        }
    }
}

#[test]
fn single_integration_point_reproduces_the_local_fit() {
    let data = d2_dataset(12, 300, 0.5);
    let cfg = unit_cfg(1, 0.2, LossSpec::huber(1.345));
    let u = 0.37;
    let measure = IntegrationMeasure::explicit(vec![0.0, u], 2).unwrap();
    let grid = EvaluationGrid::new(0, vec![0.3, 0.6]).unwrap();
    let scale = ScaleEstimate::Global(0.5);
    let est = estimate_derivative(&data, &cfg.local(0), &scale, &measure, &grid, 1).unwrap();
    for (k, &x) in grid.points.iter().enumerate() {
        let direct = local_m_fit(&data, &[x, u], &cfg.local(0), &scale).unwrap();
        assert!((est.values[k] - direct.beta[1]).abs() <= 1e-12 * direct.beta[1].abs().max(1.0));
    }
}

#[test]
fn zero_response_gives_zero_components() {
    let data = d2_dataset(13, 200, 0.0).map_responses(|_| 0.0);
    let cfg = unit_cfg(1, 0.2, LossSpec::least_squares());
    let grid = cfg.grid(1).unwrap();
    let c = estimate_component(
        &data,
        &cfg.local(1),
        &ScaleEstimate::Global(1.0),
        &unit_measure(50, 2),
        &grid,
    )
    .unwrap();
    assert!(c.values.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn derivative_of_linear_and_constant_responses() {
    let base = d2_dataset(14, 400, 0.0);
    let linear = Dataset::complete(
        base.x_flat().to_vec(),
        2,
        (0..base.n()).map(|i| 3.0 * base.x(i)[0]).collect(),
    )
    .unwrap();
    let cfg = unit_cfg(1, 0.2, LossSpec::least_squares());
    let grid = EvaluationGrid::new(0, vec![0.3, 0.5, 0.7]).unwrap();
    let m = unit_measure(60, 3);
    let d = estimate_derivative(&linear, &cfg.local(0), &ScaleEstimate::Global(1.0), &m, &grid, 1).unwrap();
    assert!(d.values.iter().all(|v| (v - 3.0).abs() < 1e-6), "{:?}", d.values);
    let flat = linear.map_responses(|_| 4.0);
    let d = estimate_derivative(&flat, &cfg.local(0), &ScaleEstimate::Global(1.0), &m, &grid, 1).unwrap();
    assert!(d.values.iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn derivative_of_the_quadratic_component() {
    let data = d2_dataset(15, 2000, 0.0);
    let cfg = unit_cfg(2, 0.1, LossSpec::least_squares());
    let grid = EvaluationGrid::new(0, vec![0.75]).unwrap();
    let d = estimate_derivative(
        &data,
        &cfg.local(0),
        &ScaleEstimate::Global(1.0),
        &unit_measure(300, 4),
        &grid,
        1,
    )
    .unwrap();
    assert!((d.values[0] - 12.0).abs() < 1.0, "{}", d.values[0]);
}

#[test]
fn centering_holds_on_a_fresh_sample() {
    let data = d2_dataset(16, 500, 0.5);
    let cfg = unit_cfg(1, 0.1, LossSpec::huber(1.345));
    let scale = ScaleConfig::global(vec![0.1, 0.1]).estimate(&data).unwrap();
    let fit = fit_additive(&data, &cfg, &scale, &unit_measure(500, 5)).unwrap();
    let mut r = rng(99);
    let m = 500;
    for c in &fit.components {
        let values: Vec<f64> = (0..m).map(|_| c.interpolate(r.random::<f64>()).unwrap()).collect();
        let mean = values.iter().sum::<f64>() / m as f64;
        let sd = variance(&values).sqrt();
        assert!(mean.abs() < 4.0 * sd / (m as f64).sqrt(), "mean {mean}, sd {sd}");
    }
}

#[test]
fn prediction_decomposes_into_intercept_and_components() {
    let data = d2_dataset(17, 300, 0.5);
    let cfg = unit_cfg(1, 0.15, LossSpec::huber(1.345));
    let scale = ScaleEstimate::Global(0.5);
    let fit = fit_additive(&data, &cfg, &scale, &unit_measure(100, 6)).unwrap();
    for x in [[0.2, 0.9], [0.55, 0.31], [0.0, 1.0]] {
        let direct =
            fit.intercept + fit.components[0].interpolate(x[0]).unwrap() + fit.components[1].interpolate(x[1]).unwrap();
        assert_eq!(fit.predict(&x).unwrap(), direct);
    }
    assert!(fit.predict(&[1.5, 0.5]).is_err());
}

fn analytic(alpha: usize, offset: f64, g: impl Fn(f64) -> f64) -> ComponentEstimate {
    let grid = EvaluationGrid::uniform(alpha, 0.0, 1.0, 11).unwrap();
    let values: Vec<f64> = grid.points.iter().map(|&x| g(x)).collect();
    ComponentEstimate {
        alpha,
        nu: 0,
        n_failed: vec![0; values.len()],
        grid,
        values,
        failures: vec![],
        offset,
        nonconverged: 0,
        fits: 0,
    }
}

#[test]
fn location_from_exact_effects() {
    let mu = 1.75;
    let base = d2_dataset(18, 100, 0.0);
    let (a, b) = (|x: f64| 2.0 * x - 1.0, |x: f64| 1.5 - 3.0 * x);
    let y: Vec<f64> = (0..base.n()).map(|i| mu + a(base.x(i)[0]) + b(base.x(i)[1])).collect();
    let data = Dataset::complete(base.x_flat().to_vec(), 2, y).unwrap();
    // uncentered integrated effects are mu + g_alpha
    let comps = [analytic(0, mu, a), analytic(1, mu, b)];
    assert!((estimate_mu(&data, &comps).unwrap() - mu).abs() < 1e-12);
    let zero = [analytic(0, 0.0, |_| 0.0), analytic(1, 0.0, |_| 0.0)];
    assert_eq!(predict(&zero, 2.0, &[0.3, 0.8]).unwrap(), 2.0);
}

#[test]
fn location_on_clean_data_and_under_shifts() {
    let data = d2_dataset(19, 500, 0.5);
    let cfg = unit_cfg(1, 0.1, LossSpec::huber(1.345));
    let scale_cfg = ScaleConfig::global(vec![0.1, 0.1]);
    let m = unit_measure(300, 7);
    let fit = fit_additive(&data, &cfg, &scale_cfg.estimate(&data).unwrap(), &m).unwrap();
    assert!(fit.mu.abs() < 0.1, "{}", fit.mu);
    let shifted = data.map_responses(|y| y + 2.0);
    let moved = fit_additive(&shifted, &cfg, &scale_cfg.estimate(&shifted).unwrap(), &m).unwrap();
    assert!((moved.intercept - fit.intercept - 2.0).abs() < 1e-6);
    assert!((moved.mu - fit.mu - 2.0).abs() < 0.1);
}

#[test]
fn least_squares_and_huber_agree_on_clean_data() {
    let (n, h, sigma) = (500, 0.1, 0.5);
    let data = d2_dataset(20, n, sigma);
    let scale = ScaleConfig::global(vec![0.1, 0.1]).estimate(&data).unwrap();
    let m = unit_measure(300, 8);
    let ls = fit_additive(
        &data,
        &unit_cfg(1, h, LossSpec::least_squares()),
        &ScaleEstimate::Global(1.0),
        &m,
    )
    .unwrap();
    let hub = fit_additive(&data, &unit_cfg(1, h, LossSpec::huber(1.345)), &scale, &m).unwrap();
    // standard error of the least squares component: sigma^2 (3/5) / (n h)
    let se = (sigma * sigma * 0.6 / (n as f64 * h)).sqrt();
    for (a, b) in ls.components.iter().zip(&hub.components) {
        let gap = interior(a, 0.1, 0.9)
            .zip(interior(b, 0.1, 0.9))
            .fold(0.0f64, |g, ((_, u), (_, v))| g.max((u - v).abs()));
        assert!(gap < 3.0 * se, "gap {gap} vs 3 se {}", 3.0 * se);
    }
}

#[test]
fn same_seed_gives_identical_estimates() {
    let data = d2_dataset(21, 300, 0.5);
    let cfg = unit_cfg(1, 0.15, LossSpec::tukey(4.685));
    let scale = ScaleEstimate::Global(0.5);
    let a = fit_additive(&data, &cfg, &scale, &unit_measure(100, 9)).unwrap();
    let b = fit_additive(&data, &cfg, &scale, &unit_measure(100, 9)).unwrap();
    assert_eq!(a, b);
    let c = fit_additive(&data, &cfg, &scale, &unit_measure(100, 10)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn sparse_windows_fail_grid_points() {
    let data = d2_dataset(22, 30, 0.5);
    let cfg = unit_cfg(1, 0.02, LossSpec::least_squares());
    let grid = cfg.grid(0).unwrap();
    let r = estimate_component(
        &data,
        &cfg.local(0),
        &ScaleEstimate::Global(1.0),
        &unit_measure(50, 11),
        &grid,
    );
    assert!(matches!(r, Err(rmint::Error::AllPointsFailed { alpha: 0 })));
}
