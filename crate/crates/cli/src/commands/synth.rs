use std::fs::File;
use std::io::BufWriter;

use catscope::synth::{default_schema, gen_records, write_records_csv, Association, SynthSpec};
use catscope::{DateWindow, Result};

use crate::args::SynthArgs;
use crate::output::{io_error, write_file};

pub fn spec_from_args(args: &SynthArgs) -> Result<SynthSpec> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            SynthSpec::from_toml(&text)?
        }
        None => SynthSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(rows) = args.rows {
        spec.rows = rows;
    }
    if args.from.is_some() || args.to.is_some() {
        spec.window = DateWindow::new(
            args.from.unwrap_or(spec.window.from),
            args.to.unwrap_or(spec.window.to),
        )?;
    }
    if let Some(shift) = args.summer_shift {
        spec.effects.summer_shift = shift;
    }
    for (from, to, strength) in &args.assoc {
        spec.records.associations.push(Association {
            from: from.clone(),
            to: to.clone(),
            strength: *strength,
        });
    }
    spec.validate()?;
    Ok(spec)
}

pub fn run(args: &SynthArgs) -> Result<()> {
    let spec = spec_from_args(args)?;
    let table = gen_records(&spec)?;
    std::fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let path = args.out.join("records.csv");
    let file = File::create(&path).map_err(|e| io_error(&path, e))?;
    write_records_csv(&table, BufWriter::new(file))?;
    eprintln!("wrote {}", path.display());
    write_file(&args.out.join("schema.toml"), &default_schema().to_toml())?;
    println!("{} records, {}", table.len(), spec.window);
    Ok(())
}
