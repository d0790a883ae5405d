use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use catscope::format::round_sig;
use catscope::{Error, Result};
use serde_json::Value;

use crate::args::Format;

/// Output directory plus the requested formats.
pub struct Outputs {
    dir: PathBuf,
    formats: BTreeSet<Format>,
}

impl Outputs {
    pub fn create(dir: &Path, formats: &[Format]) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            formats: formats.iter().copied().collect(),
        })
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<()> {
        write_file(&self.dir.join(name), contents)
    }

    pub fn write_json(&self, name: &str, value: &Value) -> Result<()> {
        self.write(name, &json_text(value))
    }
}

pub fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| io_error(path, e))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// CSV text with LF line endings.
pub fn csv_text<S: AsRef<str>>(header: &[S], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let header: Vec<&str> = header.iter().map(AsRef::as_ref).collect();
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn json_text(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json values serialize");
    s.push('\n');
    s
}

/// A float rounded to the output precision; non-finite values become null.
pub fn num(x: f64) -> Value {
    round_sig(x).map_or(Value::Null, Value::from)
}
