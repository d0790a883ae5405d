pub mod forecast;
pub mod ingest;
pub mod mca;
pub mod synth;
pub mod ttest;

use catscope::synth::default_schema;
use catscope::tabular::{ingest_csv, IngestOptions, RowPolicy};
use catscope::{DateWindow, Error, RecordTable, Result, SchemaMap};

use crate::args::InputArgs;

pub struct Loaded {
    pub schema: SchemaMap,
    pub table: RecordTable,
    /// Explicit window bounds, falling back to the observed date range.
    pub window: DateWindow,
}

pub fn load(args: &InputArgs) -> Result<Loaded> {
    let schema = match &args.schema {
        Some(path) => SchemaMap::load(path)?,
        None => default_schema(),
    };
    let unbounded = DateWindow::unbounded();
    let ingest_window = DateWindow::new(
        args.from.unwrap_or(unbounded.from),
        args.to.unwrap_or(unbounded.to),
    )?;
    let opts = IngestOptions {
        policy: if args.strict { RowPolicy::Strict } else { RowPolicy::Skip },
        window: ingest_window,
    };
    let table = ingest_csv(&args.input, &schema, &opts)?;
    let range = table
        .date_range()
        .ok_or_else(|| Error::Schema(format!("no valid records in {}", args.input.display())))?;
    let window = DateWindow::new(args.from.unwrap_or(range.from), args.to.unwrap_or(range.to))?;
    Ok(Loaded { schema, table, window })
}
