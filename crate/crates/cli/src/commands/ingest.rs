use std::collections::BTreeSet;

use catscope::tabular::Value;
use catscope::Result;

use crate::args::IngestCheckArgs;

/// Prints a plain-text report; writes no files.
pub fn run(args: &IngestCheckArgs) -> Result<()> {
    let loaded = super::load(&args.input)?;
    let t = &loaded.table;
    println!("records\t{}", t.len());
    println!("valid\t{}", t.valid_count());
    println!("dropped\t{}", t.dropped());
    println!("out_of_window\t{}", t.out_of_window());
    println!("window\t{}", loaded.window);
    println!("field\tcolumn\tdistinct\tmissing");
    for (field, mapping) in loaded.schema.fields() {
        let (distinct, missing) = match t.column(field) {
            Some(col) => {
                let mut seen = BTreeSet::new();
                let mut missing = 0;
                for (v, ok) in col.iter().zip(t.valid()) {
                    match (v, ok) {
                        (_, false) => {}
                        (Some(v), true) => {
                            seen.insert(v.label());
                        }
                        (None, true) => missing += 1,
                    }
                }
                (seen.len(), missing)
            }
            None => {
                let dates: BTreeSet<_> = t
                    .dates()
                    .iter()
                    .zip(t.valid())
                    .filter(|(_, ok)| **ok)
                    .map(|(d, _)| Value::Date(*d).label())
                    .collect();
                (dates.len(), 0)
            }
        };
        println!("{field}\t{}\t{distinct}\t{missing}", mapping.column);
    }
    Ok(())
}
