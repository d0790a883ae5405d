//! Criteria 2–5: MCA identities against independent dense-algebra oracles.

use std::ops::RangeInclusive;
use std::time::Instant;

use catscope::mca::{build_burt, discrimination_measures, mca_fit, observation_scores};
use catscope::synth::rng::Rng;
use catscope::synth::{gen_categorical, Association, CategoricalPlan, SynthSpec, VariablePlan};
use catscope::{CategoricalTable, McaModel};
use nalgebra::{DMatrix, SymmetricEigen};

use crate::Outcome;

/// Criterion 2 and 4 tables.
const WIDE_SEEDS: RangeInclusive<u64> = 1..=200;
/// Criterion 3 and 4 tables (N ≤ 200, J ≤ 20).
const SMALL_SEEDS: RangeInclusive<u64> = 1001..=1060;
/// Criterion 5 tables (Q = 2).
const PAIR_SEEDS: RangeInclusive<u64> = 2001..=2100;

struct Shape {
    q: RangeInclusive<usize>,
    categories: RangeInclusive<usize>,
    n: RangeInclusive<usize>,
}

const WIDE: Shape = Shape { q: 2..=6, categories: 2..=8, n: 50..=5000 };
const SMALL: Shape = Shape { q: 2..=4, categories: 2..=5, n: 30..=200 };
const PAIR: Shape = Shape { q: 2..=2, categories: 2..=8, n: 50..=2000 };

fn pick(rng: &mut Rng, r: &RangeInclusive<usize>) -> usize {
    r.start() + rng.below((r.end() - r.start() + 1) as u64) as usize
}

/// Random table: each later variable copies an earlier one with a random
/// strength, so tables range from independent to near-deterministic.
fn random_table(seed: u64, shape: &Shape) -> CategoricalTable {
    let mut rng = Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xACCE);
    let q = pick(&mut rng, &shape.q);
    let variables: Vec<VariablePlan> = (0..q)
        .map(|k| VariablePlan {
            name: format!("v{k}"),
            categories: pick(&mut rng, &shape.categories),
        })
        .collect();
    let associations = (1..q)
        .map(|k| Association {
            from: format!("v{}", rng.below(k as u64)),
            to: format!("v{k}"),
            strength: rng.next_f64(),
        })
        .collect();
    let spec = SynthSpec {
        seed,
        rows: pick(&mut rng, &shape.n),
        categorical: CategoricalPlan { variables, associations },
        ..SynthSpec::default()
    };
    gen_categorical(&spec).expect("valid generated spec")
}

fn full_fit(t: &CategoricalTable) -> (McaModel, catscope::BurtMatrix) {
    let b = build_burt(t).expect("burt");
    let m = mca_fit(&b, t.j() - t.q()).expect("fit");
    (m, b)
}

pub fn inertia_identity() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for seed in WIDE_SEEDS {
        let t = random_table(seed, &WIDE);
        let (m, _) = full_fit(&t);
        let expected = (t.j() - t.q()) as f64 / t.q() as f64;
        let sum: f64 = m.inertias().iter().sum();
        worst = worst.max((sum - expected).abs());
        count += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::new(
        worst <= 1e-9 && secs < 30.0 && count >= 200,
        format!("{count} tables, max |Σλ − (J−Q)/Q| = {worst:.2e}, {secs:.1}s (limit 30s)"),
    )
}

/// Indicator-matrix path: standardized residual of Z, Gram matrix, dense
/// symmetric eigensolver. Returns eigenvalues (descending) and principal
/// column coordinates (J × J).
fn indicator_oracle(t: &CategoricalTable) -> (Vec<f64>, DMatrix<f64>) {
    let (n, q, j) = (t.n(), t.q(), t.j());
    let offsets = t.offsets();
    let mut z = DMatrix::<f64>::zeros(n, j);
    for i in 0..n {
        for (k, code) in t.row(i).iter().enumerate() {
            z[(i, offsets[k] + *code as usize)] = 1.0;
        }
    }
    let total = (n * q) as f64;
    let c: Vec<f64> = (0..j).map(|a| z.column(a).sum() / total).collect();
    let r = 1.0 / n as f64;
    let s = DMatrix::from_fn(n, j, |i, a| (z[(i, a)] / total - r * c[a]) / (r * c[a]).sqrt());
    let gram = s.transpose() * &s;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..j).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let coords = DMatrix::from_fn(j, j, |a, s| {
        eig.eigenvectors[(a, order[s])] * values[s].sqrt() / c[a].sqrt()
    });
    (values, coords)
}

/// Max coordinate error over dimensions whose eigenvalue is isolated, so the
/// eigenvector is unique up to sign. Returns (error, compared, skipped).
fn coordinate_error(m: &McaModel, values: &[f64], oracle: &DMatrix<f64>) -> (f64, usize, usize) {
    let ours = m.principal_coordinates();
    let mut worst: f64 = 0.0;
    let (mut compared, mut skipped) = (0, 0);
    for s in 0..m.dims() {
        let gap = [s.checked_sub(1), Some(s + 1)]
            .into_iter()
            .flatten()
            .filter_map(|k| values.get(k))
            .map(|v| (v - values[s]).abs())
            .fold(f64::INFINITY, f64::min);
        if values[s] < 1e-8 || gap < 1e-6 {
            skipped += 1;
            continue;
        }
        let dot: f64 = (0..m.j()).map(|a| ours[(a, s)] * oracle[(a, s)]).sum();
        let sign = if dot < 0.0 { -1.0 } else { 1.0 };
        for a in 0..m.j() {
            worst = worst.max((ours[(a, s)] - sign * oracle[(a, s)]).abs());
        }
        compared += 1;
    }
    (worst, compared, skipped)
}

pub fn oracle_equivalence() -> Outcome {
    let (mut worst_l, mut worst_g): (f64, f64) = (0.0, 0.0);
    let (mut compared, mut skipped, mut tables) = (0, 0, 0);
    for seed in SMALL_SEEDS {
        let t = random_table(seed, &SMALL);
        assert!(t.n() <= 200 && t.j() <= 20);
        let (m, _) = full_fit(&t);
        let (values, coords) = indicator_oracle(&t);
        for (s, l) in m.retained_inertias().iter().enumerate() {
            worst_l = worst_l.max((l - values[s]).abs());
        }
        // Everything past J − Q is structurally zero.
        for v in &values[m.dims()..] {
            worst_l = worst_l.max(v.abs());
        }
        let (g, c, k) = coordinate_error(&m, &values, &coords);
        worst_g = worst_g.max(g);
        compared += c;
        skipped += k;
        tables += 1;
    }
    Outcome::new(
        worst_l <= 1e-8 && worst_g <= 1e-8 && tables >= 50,
        format!(
            "{tables} tables, max inertia error {worst_l:.2e}, max coordinate error {worst_g:.2e} \
             over {compared} dims ({skipped} zero or tied dims skipped)"
        ),
    )
}

/// Correlation ratio of `scores` grouped by variable `k`'s categories.
fn eta_squared(t: &CategoricalTable, k: usize, scores: &[f64]) -> f64 {
    let cats = t.variables()[k].categories.len();
    let mut sums = vec![0.0; cats];
    let mut counts = vec![0.0; cats];
    for (i, f) in scores.iter().enumerate() {
        let c = t.row(i)[k] as usize;
        sums[c] += f;
        counts[c] += 1.0;
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let total: f64 = scores.iter().map(|f| (f - mean).powi(2)).sum();
    let between: f64 = sums
        .iter()
        .zip(&counts)
        .filter(|(_, n)| **n > 0.0)
        .map(|(s, n)| n * (s / n - mean).powi(2))
        .sum();
    between / total
}

pub fn discrimination_identity() -> Outcome {
    let mut worst_avg: f64 = 0.0;
    for seed in WIDE_SEEDS {
        let t = random_table(seed, &WIDE);
        let (m, b) = full_fit(&t);
        let d = discrimination_measures(&m, &b).expect("disc");
        for (s, l) in m.retained_inertias().iter().enumerate() {
            let avg = (0..t.q()).map(|k| d.get(k, s)).sum::<f64>() / t.q() as f64;
            worst_avg = worst_avg.max((avg - l).abs());
        }
    }
    let mut worst_eta: f64 = 0.0;
    let mut dims = 0;
    for seed in SMALL_SEEDS {
        let t = random_table(seed, &SMALL);
        let (m, b) = full_fit(&t);
        let d = discrimination_measures(&m, &b).expect("disc");
        for (s, l) in m.retained_inertias().iter().enumerate() {
            if *l <= 1e-12 {
                continue;
            }
            let scores = observation_scores(&t, &m, s).expect("scores");
            for k in 0..t.q() {
                worst_eta = worst_eta.max((eta_squared(&t, k, &scores) - d.get(k, s)).abs());
            }
            dims += 1;
        }
    }
    Outcome::new(
        worst_avg <= 1e-9 && worst_eta <= 1e-8,
        format!(
            "max |mean disc − λ| = {worst_avg:.2e} on {} tables; max |disc − η²| = {worst_eta:.2e} over {dims} dims",
            WIDE_SEEDS.count()
        ),
    )
}

pub fn two_variable_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut tables = 0;
    for seed in PAIR_SEEDS {
        let t = random_table(seed, &PAIR);
        let (m, _) = full_fit(&t);
        let (j1, j2) = (t.variables()[0].categories.len(), t.variables()[1].categories.len());
        let mut cross = DMatrix::<f64>::zeros(j1, j2);
        for i in 0..t.n() {
            let r = t.row(i);
            cross[(r[0] as usize, r[1] as usize)] += 1.0;
        }
        let p = cross / t.n() as f64;
        let rows: Vec<f64> = (0..j1).map(|a| p.row(a).sum()).collect();
        let cols: Vec<f64> = (0..j2).map(|b| p.column(b).sum()).collect();
        let s = DMatrix::from_fn(j1, j2, |a, b| (p[(a, b)] - rows[a] * cols[b]) / (rows[a] * cols[b]).sqrt());
        let mut sigma: Vec<f64> = s.singular_values().iter().copied().collect();
        sigma.sort_by(|x, y| y.total_cmp(x));
        let mut expected: Vec<f64> = sigma[..j1.min(j2) - 1]
            .iter()
            .flat_map(|s| [(1.0 + s) / 2.0, (1.0 - s) / 2.0])
            .collect();
        expected.extend(std::iter::repeat_n(0.5, j1.abs_diff(j2)));
        expected.sort_by(|x, y| y.total_cmp(x));
        let ours = m.retained_inertias();
        assert_eq!(ours.len(), expected.len());
        for (a, e) in ours.iter().zip(&expected) {
            worst = worst.max((a - e).abs());
        }
        tables += 1;
    }
    Outcome::new(worst <= 1e-8, format!("{tables} tables, max error {worst:.2e}"))
}
