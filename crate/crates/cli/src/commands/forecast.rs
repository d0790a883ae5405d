use catscope::format::fmt_sig;
use catscope::svg::{line_chart, Series};
use catscope::tabular::{aggregate_counts, Granularity};
use catscope::timeseries::{ar_fit, difference, forecast, forecast_differenced, select_order};
use catscope::{Error, ForecastMode, Result};
use serde_json::json;

use crate::args::{ForecastArgs, Format, Mode};
use crate::output::{csv_text, num, Outputs};

pub fn run(args: &ForecastArgs) -> Result<()> {
    let loaded = super::load(&args.input)?;
    let series = aggregate_counts(&loaded.table, Granularity::Monthly, &loaded.window)?;
    let values = series.as_f64();
    let n = values.len();
    if args.holdout >= n {
        return Err(Error::Precondition(format!(
            "holdout of {} months leaves no training data in a {n}-month series",
            args.holdout
        )));
    }
    let train = &values[..n - args.holdout];
    let held = &values[n - args.holdout..];
    let horizon = args.horizon.unwrap_or(args.holdout);
    let mode = match args.mode {
        Mode::Onestep => ForecastMode::OneStep,
        Mode::Recursive => ForecastMode::Recursive,
    };
    // Fitting target: levels, or first differences under --diff.
    let target = if args.diff { difference(train) } else { train.to_vec() };
    let p = match args.p {
        Some(p) => p,
        None => select_order(&target, args.p_max)?,
    };
    let model = ar_fit(&target, p)?;
    let actuals = (!held.is_empty()).then_some(held);
    let eval = if args.diff {
        forecast_differenced(&model, train, horizon, mode, actuals)?
    } else {
        forecast(&model, train, horizon, mode, actuals)?
    };

    let out = Outputs::create(&args.output.out, &args.output.format)?;
    let first = train.len();
    let rows: Vec<Vec<String>> = eval
        .predictions
        .iter()
        .enumerate()
        .map(|(h, pred)| {
            vec![
                series.period_label(first + h),
                eval.actuals.get(h).map(|a| fmt_sig(*a)).unwrap_or_default(),
                fmt_sig(*pred),
            ]
        })
        .collect();
    if out.wants(Format::Csv) {
        out.write("forecast.csv", &csv_text(&["period", "actual", "predicted"], &rows))?;
    }
    // The model description is always written; --format only selects extras.
    let model_json = json!({
        "p": model.p,
        "c": num(model.intercept),
        "phi": model.coefficients.iter().map(|x| num(*x)).collect::<Vec<_>>(),
        "sigma2": num(model.residual_variance),
        "rmse": eval.rmse.map_or(serde_json::Value::Null, num),
        "mode": match mode { ForecastMode::OneStep => "onestep", ForecastMode::Recursive => "recursive" },
        "diff": args.diff,
        "order_selection": match args.p {
            Some(_) => json!({ "method": "fixed" }),
            None => json!({ "method": "aic", "p_max": args.p_max }),
        },
        "dropped_lags": model.dropped_lags,
        "split": {
            "train_start": series.period_label(0),
            "train_end": series.period_label(first - 1),
            "train_periods": first,
            "holdout": args.holdout,
            "horizon": horizon,
        },
    });
    out.write_json("armodel.json", &model_json)?;
    if out.wants(Format::Json) {
        let value = json!(rows
            .iter()
            .zip(&eval.predictions)
            .enumerate()
            .map(|(h, (r, pred))| json!({
                "period": r[0],
                "actual": eval.actuals.get(h).map_or(serde_json::Value::Null, |a| num(*a)),
                "predicted": num(*pred),
            }))
            .collect::<Vec<_>>());
        out.write_json("forecast.json", &value)?;
    }
    if out.wants(Format::Svg) {
        let total = first + horizon;
        let periods: Vec<String> = (0..total.max(n)).map(|k| series.period_label(k)).collect();
        let actual = Series {
            name: "actual".into(),
            values: (0..periods.len()).map(|k| values.get(k).copied()).collect(),
        };
        let predicted = Series {
            name: "predicted".into(),
            values: (0..periods.len())
                .map(|k| k.checked_sub(first).and_then(|h| eval.predictions.get(h).copied()))
                .collect(),
        };
        out.write("forecast.svg", &line_chart("Monthly counts", "count", &periods, &[actual, predicted]))?;
    }

    let phi: Vec<String> = model.coefficients.iter().map(|x| fmt_sig(*x)).collect();
    println!("AR({}) c={} phi=[{}]", model.p, fmt_sig(model.intercept), phi.join(", "));
    match eval.rmse {
        Some(r) => println!("rmse={} over {} months", fmt_sig(r), eval.actuals.len()),
        None => println!("no actuals in the forecast horizon"),
    }
    Ok(())
}

