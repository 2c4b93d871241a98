mod common;

use common::*;
use proptest::prelude::*;
use rmint::data::Dataset;
use rmint::kernels::{BandwidthSpec, Kernel};
use rmint::localfit::{local_m_fit, local_m_fit_traced, objective, score, LocalFitConfig};
use rmint::losses::LossSpec;
use rmint::scale::ScaleEstimate;

fn cfg(alpha: usize, q: usize, h: f64, ht: f64, loss: LossSpec) -> LocalFitConfig {
    LocalFitConfig::new(alpha, q, BandwidthSpec::new(h, ht).unwrap(), loss)
}

fn rel_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn least_squares_matches_weighted_least_squares(seed in 0u64..10_000, q in 0usize..=2, d in 1usize..=3) {
        let data = random_dataset(seed, 40, d, 0.3, 0.1);
        let x0 = vec![0.5; d];
        let c = cfg(0, q, 0.7, 1.0, LossSpec::least_squares());
        let (t, y, w) = local_sample(&data, &x0, 0, 0.7, 1.0, epanechnikov, epanechnikov);
        prop_assume!(t.len() >= q + 2);
        let fit = local_m_fit(&data, &x0, &c, &ScaleEstimate::Global(1.0)).unwrap();
        let oracle = wls(&t, &y, &w, q).unwrap();
        prop_assert!(rel_gap(&fit.beta, &oracle) < 1e-10);
        prop_assert_eq!(fit.effective_n, t.len());
    }

    #[test]
    fn affine_equivariance(seed in 0u64..10_000, a in prop_oneof![-3.0..-0.2f64, 0.2..3.0f64], b in -5.0..5.0f64, huber in any::<bool>()) {
        let data = random_dataset(seed, 60, 2, 0.5, 0.0);
        let loss = if huber { LossSpec::huber(1.345) } else { LossSpec::least_squares() };
        let c = cfg(1, 1, 0.4, 0.6, loss);
        let x0 = [0.45, 0.55];
        let s = 0.5;
        let base = local_m_fit(&data, &x0, &c, &ScaleEstimate::Global(s)).unwrap();
        let moved = data.map_responses(|y| a * y + b);
        let fit = local_m_fit(&moved, &x0, &c, &ScaleEstimate::Global(a.abs() * s)).unwrap();
        let mut want: Vec<f64> = base.beta.iter().map(|v| a * v).collect();
        want[0] += b;
        let tol = if huber { 1e-6 } else { 1e-9 };
        prop_assert!(rel_gap(&fit.beta, &want) < tol, "{:?} vs {:?}", fit.beta, want);
    }

    #[test]
    fn translation_in_alpha_leaves_beta_unchanged(seed in 0u64..10_000, shift in -2.0..2.0f64) {
        let data = random_dataset(seed, 50, 2, 0.4, 0.0);
        let c = cfg(0, 2, 0.5, 0.8, LossSpec::huber(1.0));
        let x0 = [0.4, 0.6];
        let base = local_m_fit(&data, &x0, &c, &ScaleEstimate::Global(0.4)).unwrap();
        let mut x = data.x_flat().to_vec();
        for row in x.chunks_mut(2) {
            row[0] += shift;
        }
        let moved = Dataset::new(x, 2, data.responses().to_vec(), data.delta().to_vec()).unwrap();
        let fit = local_m_fit(&moved, &[x0[0] + shift, x0[1]], &c, &ScaleEstimate::Global(0.4)).unwrap();
        prop_assert!(rel_gap(&fit.beta, &base.beta) < 1e-8);
    }

    #[test]
    fn irls_objective_is_monotone_for_convex_losses(seed in 0u64..10_000, huber in any::<bool>(), q in 0usize..=2) {
        let data = random_dataset(seed, 60, 2, 0.6, 0.1);
        let loss = if huber { LossSpec::huber(1.0) } else { LossSpec::least_squares() };
        let c = cfg(0, q, 0.6, 0.8, loss);
        let x0 = [0.5, 0.5];
        let scale = ScaleEstimate::Global(0.5);
        let Ok((_, trace)) = local_m_fit_traced(&data, &x0, &c, &scale) else { return Ok(()) };
        let values: Vec<f64> = trace.iter().map(|b| objective(&data, b, &x0, &c, &scale).unwrap()).collect();
        for w in values.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{values:?}");
        }
    }

    #[test]
    fn converged_fits_solve_the_score_equations(seed in 0u64..10_000, tukey in any::<bool>()) {
        let data = random_dataset(seed, 50, 2, 0.5, 0.1);
        let loss = if tukey { LossSpec::tukey(4.685) } else { LossSpec::huber(1.345) };
        let c = cfg(1, 1, 0.5, 0.7, loss);
        let x0 = [0.5, 0.5];
        let scale = ScaleEstimate::Global(0.5);
        let fit = local_m_fit(&data, &x0, &c, &scale).unwrap();
        prop_assume!(fit.converged);
        let (_, _, w) = local_sample(&data, &x0, 1, 0.5, 0.7, epanechnikov, epanechnikov);
        let mass: f64 = w.iter().sum();
        let s = score(&data, &fit.beta, &x0, &c, &scale).unwrap();
        for v in s {
            prop_assert!(v.abs() / mass <= 1e-8);
        }
    }
}

#[test]
fn constant_response_with_signed_nuisance_weights() {
    let data = random_dataset(1, 80, 3, 0.0, 0.0).map_responses(|_| 7.0);
    let c = cfg(0, 1, 0.5, 0.9, LossSpec::huber(1.345)).with_kernels(Kernel::Epanechnikov, Kernel::FourthOrder);
    let fit = local_m_fit(&data, &[0.5, 0.5, 0.5], &c, &ScaleEstimate::Global(1.0)).unwrap();
    assert!((fit.beta[0] - 7.0).abs() < 1e-10);
    assert!(fit.beta[1].abs() < 1e-8);
}

#[test]
fn symmetric_residuals_give_zero_intercept_score() {
    // design symmetric about x, responses antisymmetric about 0
    let x = vec![-0.4, -0.2, 0.2, 0.4];
    let y = vec![-1.0, 2.0, -2.0, 1.0];
    let data = Dataset::complete(x, 1, y).unwrap();
    let c = cfg(0, 1, 1.0, 1.0, LossSpec::huber(1.345));
    let s = score(&data, &[0.0, 0.0], &[0.0], &c, &ScaleEstimate::Global(1.0)).unwrap();
    assert!(s[0].abs() < 1e-15);
}

#[test]
fn missing_responses_do_not_enter_the_fit() {
    let full = random_dataset(9, 40, 1, 0.3, 0.0);
    let mut delta = full.delta().to_vec();
    delta.iter_mut().step_by(3).for_each(|o| *o = false);
    let masked = Dataset::new(full.x_flat().to_vec(), 1, full.responses().to_vec(), delta.clone()).unwrap();
    let keep: Vec<usize> = (0..40).filter(|&i| delta[i]).collect();
    let sub = full.subset(&keep);
    let c = cfg(0, 1, 0.5, 0.5, LossSpec::huber(1.345));
    let a = local_m_fit(&masked, &[0.5], &c, &ScaleEstimate::Global(0.3)).unwrap();
    let b = local_m_fit(&sub, &[0.5], &c, &ScaleEstimate::Global(0.3)).unwrap();
    assert_eq!(a.beta, b.beta);
}
