//! Autoregressive models for count series.
//!
//! AR(p) with intercept is fitted by conditional least squares on the lagged
//! design matrix. The series is centred before solving and the intercept is
//! mapped back afterwards; this leaves the estimates unchanged in exact
//! arithmetic and keeps the normal equations well conditioned for series
//! with a large mean.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numkernel::{solve_least_squares, Matrix};

/// Residual sums of squares below this fraction of the centred total sum of
/// squares are indistinguishable from an exact fit.
const RSS_FLOOR: f64 = 1e-24;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArModel {
    pub p: usize,
    pub intercept: f64,
    /// `coefficients[i]` multiplies the value `i + 1` steps back.
    pub coefficients: Vec<f64>,
    /// Mean squared training residual.
    pub residual_variance: f64,
    pub n_train: usize,
    /// Lags (1-based) dropped as linearly dependent; their coefficient is 0.
    pub dropped_lags: Vec<usize>,
}

impl ArModel {
    pub fn rank_deficient(&self) -> bool {
        !self.dropped_lags.is_empty()
    }

    /// One-step prediction from the most recent values (`recent` ends with
    /// the latest observation).
    pub fn predict_next(&self, recent: &[f64]) -> f64 {
        debug_assert!(recent.len() >= self.p);
        let n = recent.len();
        self.intercept
            + self
                .coefficients
                .iter()
                .enumerate()
                .map(|(i, phi)| phi * recent[n - 1 - i])
                .sum::<f64>()
    }
}

struct WindowFit {
    model: ArModel,
    rss: f64,
    tss: f64,
}

/// Fits AR(p) on targets `start..n` (requires `start ≥ p`).
fn fit_window(series: &[f64], p: usize, start: usize) -> Result<WindowFit> {
    let n = series.len();
    debug_assert!(start >= p && start < n);
    let n_eff = n - start;
    let mean = series.iter().sum::<f64>() / n as f64;
    let y: Vec<f64> = series.iter().map(|v| v - mean).collect();

    let mut data = Vec::with_capacity(n_eff * (p + 1));
    for t in start..n {
        data.push(1.0);
        for lag in 1..=p {
            data.push(y[t - lag]);
        }
    }
    let design = Matrix::new(n_eff, p + 1, data)?;
    let target = &y[start..];
    let sol = solve_least_squares(&design, target)?;

    let coefficients = sol.x[1..].to_vec();
    let intercept = sol.x[0] + mean * (1.0 - coefficients.iter().sum::<f64>());
    let mut rss = 0.0;
    for t in start..n {
        let pred = intercept
            + coefficients
                .iter()
                .enumerate()
                .map(|(i, phi)| phi * series[t - 1 - i])
                .sum::<f64>();
        rss += (series[t] - pred).powi(2);
    }
    let wmean = target.iter().sum::<f64>() / n_eff as f64;
    let tss = target.iter().map(|v| (v - wmean).powi(2)).sum();
    Ok(WindowFit {
        model: ArModel {
            p,
            intercept,
            coefficients,
            residual_variance: rss / n_eff as f64,
            n_train: n,
            dropped_lags: sol.dropped.iter().filter(|&&c| c > 0).copied().collect(),
        },
        rss,
        tss,
    })
}

fn check_series(series: &[f64], p: usize) -> Result<()> {
    if series.len() < p + 2 {
        return Err(Error::precondition(format!(
            "AR({p}) needs at least {} observations, got {}",
            p + 2,
            series.len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::precondition("series contains non-finite values"));
    }
    Ok(())
}

/// Conditional least-squares AR(p) fit with intercept.
pub fn ar_fit(series: &[f64], p: usize) -> Result<ArModel> {
    check_series(series, p)?;
    Ok(fit_window(series, p, p)?.model)
}

/// Akaike information criterion of each order `0..=p_max`, all evaluated on
/// the common window `t = p_max..n`.
pub fn aic_table(series: &[f64], p_max: usize) -> Result<Vec<f64>> {
    check_series(series, p_max)?;
    let n_eff = (series.len() - p_max) as f64;
    (0..=p_max)
        .map(|p| {
            let fit = fit_window(series, p, p_max)?;
            let rss = fit.rss.max(RSS_FLOOR * fit.tss).max(f64::MIN_POSITIVE);
            Ok(n_eff * (rss / n_eff).ln() + 2.0 * (p as f64 + 1.0))
        })
        .collect()
}

/// AIC-minimising order in `0..=p_max`; ties go to the smaller order.
pub fn select_order(series: &[f64], p_max: usize) -> Result<usize> {
    let aic = aic_table(series, p_max)?;
    let mut best = 0;
    for (p, &v) in aic.iter().enumerate() {
        if v < aic[best] {
            best = p;
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastMode {
    /// Each step sees the true lagged values.
    OneStep,
    /// Each step feeds on earlier predictions.
    Recursive,
}

/// Predictions and, where actuals were supplied, their error.
///
/// `actuals` pairs with the first `actuals.len()` predictions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForecastEval {
    pub mode: ForecastMode,
    pub predictions: Vec<f64>,
    pub actuals: Vec<f64>,
    pub rmse: Option<f64>,
}

/// Forecasts `horizon` periods past `history`.
pub fn forecast(
    m: &ArModel,
    history: &[f64],
    horizon: usize,
    mode: ForecastMode,
    actuals: Option<&[f64]>,
) -> Result<ForecastEval> {
    if horizon == 0 {
        return Err(Error::precondition("forecast horizon must be at least 1"));
    }
    if history.len() < m.p {
        return Err(Error::precondition(format!(
            "AR({}) forecast needs {} history values, got {}",
            m.p,
            m.p,
            history.len()
        )));
    }
    if mode == ForecastMode::OneStep && actuals.is_none_or(|a| a.len() < horizon) {
        return Err(Error::precondition(
            "one-step forecasting needs actual values covering the horizon",
        ));
    }
    let mut buf: Vec<f64> = history.to_vec();
    let mut predictions = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let pred = m.predict_next(&buf);
        predictions.push(pred);
        buf.push(match mode {
            ForecastMode::OneStep => actuals.expect("checked above")[h],
            ForecastMode::Recursive => pred,
        });
    }
    let actuals: Vec<f64> = actuals
        .map(|a| a[..a.len().min(horizon)].to_vec())
        .unwrap_or_default();
    let rmse = if actuals.is_empty() {
        None
    } else {
        Some(rmse(&predictions[..actuals.len()], &actuals)?)
    };
    Ok(ForecastEval {
        mode,
        predictions,
        actuals,
        rmse,
    })
}

/// Forecast of a level series from a model fitted to its first differences.
///
/// `history` holds levels; predicted differences are integrated back onto
/// the last known level (the true one in one-step mode).
pub fn forecast_differenced(
    m: &ArModel,
    history: &[f64],
    horizon: usize,
    mode: ForecastMode,
    actuals: Option<&[f64]>,
) -> Result<ForecastEval> {
    let last = *history
        .last()
        .ok_or_else(|| Error::precondition("differenced forecast needs history"))?;
    let diff_hist = difference(history);
    let diff_actuals: Option<Vec<f64>> = actuals.map(|a| {
        std::iter::once(last)
            .chain(a.iter().copied())
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| w[1] - w[0])
            .collect()
    });
    let inner = forecast(m, &diff_hist, horizon, mode, diff_actuals.as_deref())?;
    let mut level = last;
    let mut predictions = Vec::with_capacity(horizon);
    for (h, d) in inner.predictions.iter().enumerate() {
        let base = match mode {
            ForecastMode::OneStep => {
                if h == 0 {
                    last
                } else {
                    actuals.expect("one-step has actuals")[h - 1]
                }
            }
            ForecastMode::Recursive => level,
        };
        level = base + d;
        predictions.push(level);
    }
    let actuals: Vec<f64> = actuals
        .map(|a| a[..a.len().min(horizon)].to_vec())
        .unwrap_or_default();
    let rmse = if actuals.is_empty() {
        None
    } else {
        Some(rmse(&predictions[..actuals.len()], &actuals)?)
    };
    Ok(ForecastEval {
        mode,
        predictions,
        actuals,
        rmse,
    })
}

/// In-sample one-step fitted values; `None` for the first `p` periods.
pub fn fitted_values(m: &ArModel, series: &[f64]) -> Vec<Option<f64>> {
    (0..series.len())
        .map(|t| (t >= m.p).then(|| m.predict_next(&series[..t])))
        .collect()
}

pub fn difference(series: &[f64]) -> Vec<f64> {
    series.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Root mean squared error.
pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.is_empty() || pred.len() != actual.len() {
        return Err(Error::precondition(format!(
            "rmse needs equal nonzero lengths, got {} and {}",
            pred.len(),
            actual.len()
        )));
    }
    let sse: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}
