//! Criterion 9: AR recovery and order selection.

use catscope::synth::rng::Rng;
use catscope::timeseries::{ar_fit, select_order};

use crate::Outcome;

const BURN_IN: usize = 200;

/// `x_t = c + Σ φ_k x_{t−k} + σ ε_t`, started at the process mean and run
/// through a burn-in before the `n` kept values.
fn simulate_ar(rng: &mut Rng, c: f64, phi: &[f64], sigma: f64, n: usize) -> Vec<f64> {
    let mean = c / (1.0 - phi.iter().sum::<f64>());
    let mut x = vec![mean; phi.len()];
    for _ in 0..BURN_IN + n {
        let t = x.len();
        let next = c + phi.iter().enumerate().map(|(k, p)| p * x[t - 1 - k]).sum::<f64>() + sigma * rng.normal();
        x.push(next);
    }
    x.split_off(x.len() - n)
}

pub fn ar_recovery() -> Outcome {
    // Noiseless AR(1): x_t = 0.5·x_{t−1}, x_0 = 1, n = 20.
    let series: Vec<f64> = (0..20).map(|t| 0.5f64.powi(t)).collect();
    let m = ar_fit(&series, 1).expect("fit");
    let exact_err = (m.coefficients[0] - 0.5).abs().max(m.intercept.abs());
    let exact = exact_err <= 1e-9;

    // AR(2) φ = (0.5, −0.3), c = 10, σ = 1, n = 500; seeds 1..=100.
    let mut within = 0;
    for seed in 1..=100u64 {
        let mut rng = Rng::seed_from_u64(seed);
        let x = simulate_ar(&mut rng, 10.0, &[0.5, -0.3], 1.0, 500);
        let m = ar_fit(&x, 2).expect("fit");
        if (m.coefficients[0] - 0.5).abs() <= 0.05 && (m.coefficients[1] + 0.3).abs() <= 0.05 {
            within += 1;
        }
    }

    // White noise, n = 500, p_max = 6; seeds 1..=200.
    let mut zero = 0;
    for seed in 1..=200u64 {
        let mut rng = Rng::seed_from_u64(10_000 + seed);
        let x: Vec<f64> = (0..500).map(|_| rng.normal()).collect();
        if select_order(&x, 6).expect("select") == 0 {
            zero += 1;
        }
    }

    Outcome::new(
        exact && within >= 95 && zero >= 180,
        format!(
            "noiseless AR(1) error {exact_err:.1e} ({}); AR(2) within ±0.05 in {within}/100 seeds (need 95); \
             AIC picks p=0 in {zero}/200 white-noise seeds (need 180)",
            if exact { "ok" } else { "FAIL" }
        ),
    )
}
