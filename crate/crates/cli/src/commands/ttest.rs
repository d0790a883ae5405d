use catscope::format::fmt_sig;
use catscope::stats::{summarize, welch_test};
use catscope::tabular::{split_counts, SplitRule};
use catscope::Result;
use serde_json::json;

use crate::args::{Format, TtestArgs};
use crate::output::{csv_text, num, Outputs};

const HEADER: [&str; 11] = [
    "rule", "n1", "n2", "mean1", "mean2", "t", "nu", "p_two_sided", "ci_low", "ci_high", "decision",
];

pub fn run(args: &TtestArgs) -> Result<()> {
    let loaded = super::load(&args.input)?;
    let rules: Vec<SplitRule> = args
        .rule
        .iter()
        .map(|r| SplitRule::parse(r, &loaded.schema.age_bands))
        .collect::<Result<_>>()?;
    let out = Outputs::create(&args.output.out, &args.output.format)?;

    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (text, rule) in args.rule.iter().zip(&rules) {
        let split = split_counts(&loaded.table, rule, &loaded.window)?;
        let a = summarize(&split.first.as_f64())?;
        let b = summarize(&split.second.as_f64())?;
        let w = welch_test(&a, &b, args.gamma)?;
        let decision = if w.rejects(args.alpha) { "reject" } else { "accept" };
        rows.push(vec![
            text.clone(),
            a.n.to_string(),
            b.n.to_string(),
            fmt_sig(a.mean),
            fmt_sig(b.mean),
            fmt_sig(w.t),
            fmt_sig(w.nu),
            fmt_sig(w.p_two_sided),
            fmt_sig(w.ci_low),
            fmt_sig(w.ci_high),
            decision.to_string(),
        ]);
        records.push(json!({
            "rule": text,
            "sides": [split.first.label, split.second.label],
            "n1": a.n, "n2": b.n,
            "mean1": num(a.mean), "mean2": num(b.mean),
            "var1": num(a.variance), "var2": num(b.variance),
            "t": num(w.t), "nu": num(w.nu),
            "p_two_sided": num(w.p_two_sided),
            "ci_low": num(w.ci_low), "ci_high": num(w.ci_high),
            "gamma": num(w.gamma), "alpha": num(args.alpha),
            "decision": decision,
        }));
        println!(
            "{text}: {} vs {}: t={} nu={} p={} ci=[{}, {}] {decision}",
            split.first.label,
            split.second.label,
            fmt_sig(w.t),
            fmt_sig(w.nu),
            fmt_sig(w.p_two_sided),
            fmt_sig(w.ci_low),
            fmt_sig(w.ci_high),
        );
    }
    if out.wants(Format::Csv) {
        out.write("ttest.csv", &csv_text(&HEADER, &rows))?;
    }
    if out.wants(Format::Json) {
        out.write_json("ttest.json", &json!(records))?;
    }
    Ok(())
}
