//! Welch's two-sample t-test and the special functions behind it.
//!
//! The Student-t distribution is evaluated through the regularized incomplete
//! beta function (modified Lentz continued fraction) with a Lanczos
//! log-gamma, so the module has no external numeric dependencies.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const CF_EPS: f64 = 1e-15;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 100_000;

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection keeps the series in its accurate range.
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for I_x(a, b), evaluated by the modified Lentz method.
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// I_x(a, b) given both `x` and `y = 1 − x`, so callers near x = 1 can pass
/// an accurately computed complement.
fn inc_beta_split(x: f64, y: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * y.ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(y, b, a) / b
    }
}

/// Regularized incomplete beta function I_x(a, b).
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::precondition(format!("incomplete beta needs x in [0,1], got {x}")));
    }
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::precondition(format!(
            "incomplete beta needs a, b > 0, got a={a}, b={b}"
        )));
    }
    Ok(inc_beta_split(x, 1.0 - x, a, b))
}

fn check_dof(nu: f64) -> Result<()> {
    if nu > 0.0 && !nu.is_nan() {
        Ok(())
    } else {
        Err(Error::precondition(format!(
            "degrees of freedom must be positive, got {nu}"
        )))
    }
}

/// Upper tail P(T > x) for x ≥ 0.
fn t_upper_tail(x: f64, nu: f64) -> f64 {
    debug_assert!(x >= 0.0);
    let x2 = x * x;
    if !x2.is_finite() {
        return 0.0;
    }
    let denom = nu + x2;
    0.5 * inc_beta_split(nu / denom, x2 / denom, 0.5 * nu, 0.5)
}

/// Student-t cumulative distribution function.
pub fn t_cdf(x: f64, nu: f64) -> Result<f64> {
    check_dof(nu)?;
    if x.is_nan() {
        return Err(Error::precondition("t_cdf argument is NaN"));
    }
    let tail = t_upper_tail(x.abs(), nu);
    Ok(if x >= 0.0 { 1.0 - tail } else { tail })
}

/// Student-t survival function P(T > x).
pub fn t_sf(x: f64, nu: f64) -> Result<f64> {
    check_dof(nu)?;
    if x.is_nan() {
        return Err(Error::precondition("t_sf argument is NaN"));
    }
    let tail = t_upper_tail(x.abs(), nu);
    Ok(if x >= 0.0 { tail } else { 1.0 - tail })
}

/// Student-t density.
pub fn t_pdf(x: f64, nu: f64) -> Result<f64> {
    check_dof(nu)?;
    let ln = ln_gamma(0.5 * (nu + 1.0))
        - ln_gamma(0.5 * nu)
        - 0.5 * (nu * PI).ln()
        - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p();
    Ok(ln.exp())
}

/// Inverse of [`t_cdf`].
///
/// Brackets the root by doubling, then runs Newton steps that fall back to
/// bisection whenever they leave the bracket.
pub fn t_quantile(p: f64, nu: f64) -> Result<f64> {
    check_dof(nu)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::precondition(format!("quantile needs p in (0,1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p < 0.5 {
        return Ok(-upper_quantile(p, nu));
    }
    Ok(upper_quantile(1.0 - p, nu))
}

/// Solves P(T > x) = q for x > 0, q ∈ (0, 0.5).
fn upper_quantile(q: f64, nu: f64) -> f64 {
    // f(x) = q − tail(x) is increasing in x.
    let f = |x: f64| q - t_upper_tail(x, nu);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::MAX;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..300 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = t_pdf(x, nu).unwrap_or(0.0);
        let mut next = if slope > 0.0 { x - fx / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) || hi - lo <= 1e-15 * hi {
            return next;
        }
        x = next;
    }
    x
}

/// Sample size, mean and unbiased variance of one group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
}

impl SampleSummary {
    pub fn new(n: usize, mean: f64, variance: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::precondition(format!("a sample needs n ≥ 2, got {n}")));
        }
        if !mean.is_finite() || !variance.is_finite() || variance < 0.0 {
            return Err(Error::precondition(format!(
                "invalid sample moments: mean={mean}, variance={variance}"
            )));
        }
        Ok(SampleSummary { n, mean, variance })
    }

    fn var_of_mean(&self) -> f64 {
        self.variance / self.n as f64
    }
}

pub fn summarize(xs: &[f64]) -> Result<SampleSummary> {
    if xs.len() < 2 {
        return Err(Error::precondition(format!(
            "summarize needs at least 2 values, got {}",
            xs.len()
        )));
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::precondition("summarize input contains non-finite values"));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|v| (v - mean) * (v - mean)).sum();
    SampleSummary::new(xs.len(), mean, ss / (n - 1.0))
}

/// Outcome of a Welch two-sample t-test on `first − second`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WelchResult {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub nu: f64,
    pub p_two_sided: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub gamma: f64,
    pub mean_diff: f64,
    pub std_err: f64,
    /// Set when both samples have zero variance but different means.
    pub infinite_t: bool,
}

impl WelchResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_two_sided < alpha
    }
}

/// Welch's t-test with a two-sided p-value and a `gamma`-level confidence
/// interval for `a.mean − b.mean`.
pub fn welch_test(a: &SampleSummary, b: &SampleSummary, gamma: f64) -> Result<WelchResult> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::precondition(format!(
            "confidence level must lie in (0,1), got {gamma}"
        )));
    }
    let va = a.var_of_mean();
    let vb = b.var_of_mean();
    let diff = a.mean - b.mean;
    let se2 = va + vb;

    if se2 == 0.0 {
        if diff == 0.0 {
            return Err(Error::Degenerate(
                "both samples are constant with equal means; t is undefined".into(),
            ));
        }
        return Ok(WelchResult {
            t: diff.signum() * f64::INFINITY,
            nu: (a.n + b.n - 2) as f64,
            p_two_sided: 0.0,
            ci_low: diff,
            ci_high: diff,
            gamma,
            mean_diff: diff,
            std_err: 0.0,
            infinite_t: true,
        });
    }

    let se = se2.sqrt();
    let t = diff / se;
    let nu = se2 * se2
        / (va * va / (a.n as f64 - 1.0) + vb * vb / (b.n as f64 - 1.0));
    let p = (2.0 * t_upper_tail(t.abs(), nu)).clamp(0.0, 1.0);
    let half = t_quantile(0.5 * (1.0 + gamma), nu)? * se;
    Ok(WelchResult {
        t,
        nu,
        p_two_sided: p,
        ci_low: diff - half,
        ci_high: diff + half,
        gamma,
        mean_diff: diff,
        std_err: se,
        infinite_t: false,
    })
}
