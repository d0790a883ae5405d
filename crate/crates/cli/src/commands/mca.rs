use catscope::format::fmt_sig;
use catscope::mca::{
    build_burt, category_points, discrimination_measures, mca_fit, CoordinateKind,
};
use catscope::svg::{scatter, ScatterPoint};
use catscope::tabular::{bin_to_categorical, LogicalField, VariableDef};
use catscope::Result;
use serde_json::json;

use crate::args::{Format, McaArgs};
use crate::output::{csv_text, num, Outputs};

pub fn run(args: &McaArgs) -> Result<()> {
    let loaded = super::load(&args.input)?;
    let fields: Vec<LogicalField> = if args.vars.is_empty() {
        let mut fields = vec![LogicalField::DayOfWeek];
        fields.extend(
            loaded
                .schema
                .fields()
                .map(|(f, _)| f)
                .filter(|f| !matches!(f, LogicalField::Date | LogicalField::Time | LogicalField::DayOfWeek)),
        );
        fields
    } else {
        args.vars.iter().map(|v| v.trim().parse()).collect::<Result<_>>()?
    };
    // Ingestion already restricted rows to the window.
    let table = loaded.table;
    let defs: Vec<VariableDef> = fields
        .iter()
        .map(|f| VariableDef::for_field(*f, &loaded.schema.age_bands))
        .collect();
    let cats = bin_to_categorical(&table, &defs)?;
    let burt = build_burt(&cats)?;
    let model = mca_fit(&burt, args.dims)?;
    let disc = discrimination_measures(&model, &burt)?;
    let kind = if args.standard { CoordinateKind::Standard } else { CoordinateKind::Principal };
    let coords = match kind {
        CoordinateKind::Standard => model.standard_coordinates(),
        CoordinateKind::Principal => model.principal_coordinates(),
    };
    let dims = model.dims();
    let dim_cols: Vec<String> = (1..=dims).map(|s| format!("dim{s}")).collect();
    let out = Outputs::create(&args.output.out, &args.output.format)?;

    let percents = model.percentages();
    // Single-variable analyses have no adjustment; the column is left out.
    let adjusted = if args.benzecri { model.benzecri_percentages() } else { None };
    let inertia_rows: Vec<Vec<String>> = model
        .inertias()
        .iter()
        .zip(&percents)
        .enumerate()
        .map(|(s, (l, p))| {
            let mut row = vec![(s + 1).to_string(), fmt_sig(*l), fmt_sig(*p)];
            row.extend(adjusted.as_ref().map(|a| fmt_sig(a[s])));
            row
        })
        .collect();
    let disc_rows: Vec<Vec<String>> = disc
        .variables
        .iter()
        .enumerate()
        .map(|(k, v)| {
            std::iter::once(v.clone())
                .chain(disc.row(k).iter().map(|x| fmt_sig(*x)))
                .collect()
        })
        .collect();
    let cat_rows: Vec<Vec<String>> = model
        .labels()
        .iter()
        .enumerate()
        .map(|(a, (var, cat))| {
            [var.clone(), cat.clone(), fmt_sig(model.masses()[a])]
                .into_iter()
                .chain((0..dims).map(|s| fmt_sig(coords[(a, s)])))
                .collect()
        })
        .collect();

    if out.wants(Format::Csv) {
        let mut header = vec!["dim", "lambda", "percent"];
        if adjusted.is_some() {
            header.push("adjusted_percent");
        }
        out.write("inertias.csv", &csv_text(&header, &inertia_rows))?;
        let header: Vec<String> = ["variable".to_string()].into_iter().chain(dim_cols.iter().cloned()).collect();
        out.write("discrimination.csv", &csv_text(&header, &disc_rows))?;
        let header: Vec<String> = ["variable", "category", "mass"]
            .iter()
            .map(|s| s.to_string())
            .chain(dim_cols.iter().cloned())
            .collect();
        out.write("categories.csv", &csv_text(&header, &cat_rows))?;
    }
    if out.wants(Format::Json) {
        let value = json!({
            "n": model.n(),
            "q": model.q(),
            "j": model.j(),
            "total_inertia": num(model.total_inertia()),
            "coordinates": if args.standard { "standard" } else { "principal" },
            "inertias": model.inertias().iter().zip(&percents).enumerate().map(|(s, (l, p))| {
                let mut entry = json!({ "dim": s + 1, "lambda": num(*l), "percent": num(*p) });
                if let Some(a) = &adjusted {
                    entry["adjusted_percent"] = num(a[s]);
                }
                entry
            }).collect::<Vec<_>>(),
            "discrimination": disc.variables.iter().enumerate().map(|(k, v)| json!({
                "variable": v,
                "values": disc.row(k).iter().map(|x| num(*x)).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "categories": model.labels().iter().enumerate().map(|(a, (var, cat))| json!({
                "variable": var,
                "category": cat,
                "mass": num(model.masses()[a]),
                "coordinates": (0..dims).map(|s| num(coords[(a, s)])).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        });
        out.write_json("mca.json", &value)?;
    }
    if out.wants(Format::Svg) {
        let y_dim = if dims > 1 { 1 } else { 0 };
        let y_title = if dims > 1 { "dimension 2" } else { "dimension 1" };
        let points: Vec<ScatterPoint> = disc
            .variables
            .iter()
            .enumerate()
            .map(|(k, v)| ScatterPoint { label: v.clone(), group: k, x: disc.get(k, 0), y: disc.get(k, y_dim) })
            .collect();
        out.write(
            "discrimination.svg",
            &scatter("Discrimination measures", "dimension 1", y_title, &points, true),
        )?;
        let vars = model.variable_names();
        let points: Vec<ScatterPoint> = category_points(&model, (0, y_dim), kind)?
            .into_iter()
            .map(|p| ScatterPoint {
                label: p.label(),
                group: vars.iter().position(|v| *v == p.variable).unwrap_or(0),
                x: p.x,
                y: p.y,
            })
            .collect();
        out.write(
            "categories.svg",
            &scatter("Category coordinates", "dimension 1", y_title, &points, true),
        )?;
    }

    println!("n={} q={} j={} total_inertia={}", model.n(), model.q(), model.j(), fmt_sig(model.total_inertia()));
    for row in inertia_rows.iter().take(dims) {
        println!("dim{}\tlambda={}\tpercent={}", row[0], row[1], row[2]);
    }
    Ok(())
}

