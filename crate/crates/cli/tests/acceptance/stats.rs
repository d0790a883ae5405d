//! Criteria 6–8: Student t functions, Welch calibration, planted effects.

use std::time::Instant;

use catscope::stats::{summarize, t_cdf, t_quantile, welch_test};
use catscope::synth::rng::Rng;
use catscope::synth::{gen_records, GroupEffects, SynthSpec};
use catscope::tabular::{split_counts, SplitRule};

use crate::Outcome;

pub fn welch_correctness() -> Outcome {
    let mut worst_rt: f64 = 0.0;
    for nu in [1.0, 2.0, 5.0, 10.0, 30.0, 100.0] {
        for k in 1..=99 {
            let p = k as f64 / 100.0;
            let x = t_quantile(p, nu).expect("quantile");
            worst_rt = worst_rt.max((t_cdf(x, nu).expect("cdf") - p).abs());
        }
    }
    let cauchy = (t_cdf(1.0, 1.0).expect("cdf") - 0.75).abs();
    let normal = (t_cdf(1.96, 1e6).expect("cdf") - 0.9750).abs();
    let a = summarize(&[1.0, 2.0, 3.0, 4.0, 5.0]).expect("summary");
    let b = summarize(&[2.0, 4.0, 6.0, 8.0, 10.0]).expect("summary");
    let w = welch_test(&a, &b, 0.95).expect("welch");
    let t_err = (w.t + 1.8974).abs();
    let nu_err = (w.nu - 5.8824).abs();
    Outcome::new(
        worst_rt <= 1e-9 && cauchy <= 1e-12 && normal <= 1e-4 && t_err <= 1e-4 && nu_err <= 1e-4,
        format!(
            "roundtrip {worst_rt:.1e}, t_cdf(1,1) err {cauchy:.1e}, t_cdf(1.96,1e6) err {normal:.1e}, \
             worked example t={:.5} nu={:.5}",
            w.t, w.nu
        ),
    )
}

/// Seeds 1..=2000, one per trial; both samples N(0, 1), n = 50 per side.
pub fn welch_calibration() -> Outcome {
    let start = Instant::now();
    let trials = 2000;
    let mut rejections = 0;
    for seed in 1..=trials {
        let mut rng = Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..50).map(|_| rng.normal()).collect();
        let b: Vec<f64> = (0..50).map(|_| rng.normal()).collect();
        let w = welch_test(&summarize(&a).unwrap(), &summarize(&b).unwrap(), 0.95).expect("welch");
        if w.rejects(0.05) {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / trials as f64;
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        (0.03..=0.07).contains(&rate) && secs < 60.0,
        format!("{rejections}/{trials} rejections at α=0.05 (rate {rate:.4}, need [0.03, 0.07]), {secs:.1}s"),
    )
}

/// Seeds 1..=100; 50 000 records, +20 accidents per summer day, default
/// trend plan; season split, 95% interval.
pub fn planted_effect() -> Outcome {
    let mut hits = 0;
    let mut misses = Vec::new();
    for seed in 1..=100u64 {
        let spec = SynthSpec {
            seed,
            rows: 50_000,
            effects: GroupEffects { summer_shift: 20.0 },
            ..SynthSpec::default()
        };
        let t = gen_records(&spec).expect("records");
        let split = split_counts(&t, &SplitRule::season(), &spec.window).expect("split");
        let a = summarize(&split.first.as_f64()).unwrap();
        let b = summarize(&split.second.as_f64()).unwrap();
        let w = welch_test(&a, &b, 0.95).expect("welch");
        if w.ci_low <= 20.0 && 20.0 <= w.ci_high && w.ci_low > 0.0 {
            hits += 1;
        } else {
            misses.push(format!("seed {seed}: [{:.3}, {:.3}]", w.ci_low, w.ci_high));
        }
    }
    Outcome::new(
        hits >= 95,
        format!("{hits}/100 intervals contain 20 and exclude 0 (need 95); misses: {}", misses.join("; ")),
    )
}
