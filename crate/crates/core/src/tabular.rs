//! Record ingestion, categorical binning and count aggregation.
//!
//! A [`SchemaMap`] says which CSV column feeds each [`LogicalField`];
//! [`ingest_csv`] turns a file into a [`RecordTable`]; [`bin_to_categorical`]
//! produces the [`CategoricalTable`] consumed by MCA; [`aggregate_counts`] and
//! [`split_counts`] produce the date-indexed counts used by forecasting and
//! the t-test battery.
//!
//! # Schema file
//!
//! The schema is a TOML document:
//!
//! ```toml
//! date = "Date"                       # logical_field = column_name
//! district = "Postcode"
//! driver_age_band = { column = "Age_of_Driver", kind = "integer" }
//!
//! [bands]
//! driver_age = ["0-17", "18-25", "26-64", "65+"]
//!
//! [recode.driver_sex]
//! "1" = "Male"
//! "2" = "Female"
//! "-1" = ""                           # empty string means missing
//! ```
//!
//! `kind` is one of `date`, `integer`, `categorical`, `text`; each field has a
//! default kind. Recoding is applied to the trimmed raw cell before parsing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, Months, NaiveDate};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Category assigned to rows with no value for a binned field.
pub const MISSING_CATEGORY: &str = "(missing)";

const INGEST_CHUNK: usize = 16_384;

/// The logical columns the toolkit understands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicalField {
    Date,
    Time,
    DayOfWeek,
    DriverAgeBand,
    DriverSex,
    District,
    Weather,
    VehicleType,
    ProximityFlag,
}

impl LogicalField {
    pub const ALL: [LogicalField; 9] = [
        LogicalField::Date,
        LogicalField::Time,
        LogicalField::DayOfWeek,
        LogicalField::DriverAgeBand,
        LogicalField::DriverSex,
        LogicalField::District,
        LogicalField::Weather,
        LogicalField::VehicleType,
        LogicalField::ProximityFlag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LogicalField::Date => "date",
            LogicalField::Time => "time",
            LogicalField::DayOfWeek => "day_of_week",
            LogicalField::DriverAgeBand => "driver_age_band",
            LogicalField::DriverSex => "driver_sex",
            LogicalField::District => "district",
            LogicalField::Weather => "weather",
            LogicalField::VehicleType => "vehicle_type",
            LogicalField::ProximityFlag => "proximity_flag",
        }
    }

    pub fn default_kind(self) -> ParseKind {
        match self {
            LogicalField::Date => ParseKind::Date,
            LogicalField::Time => ParseKind::Text,
            LogicalField::DriverAgeBand => ParseKind::Integer,
            _ => ParseKind::Categorical,
        }
    }
}

impl fmt::Display for LogicalField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LogicalField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LogicalField::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::schema(format!("unknown logical field `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseKind {
    Date,
    Integer,
    Categorical,
    Text,
}

impl FromStr for ParseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "date" => Ok(ParseKind::Date),
            "integer" => Ok(ParseKind::Integer),
            "categorical" => Ok(ParseKind::Categorical),
            "text" => Ok(ParseKind::Text),
            other => Err(Error::schema(format!("unknown parse kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldMapping {
    pub column: String,
    pub kind: ParseKind,
    pub recode: BTreeMap<String, String>,
}

impl FieldMapping {
    pub fn new(column: impl Into<String>, kind: ParseKind) -> Self {
        FieldMapping {
            column: column.into(),
            kind,
            recode: BTreeMap::new(),
        }
    }
}

/// One labelled age interval; `hi = None` means open-ended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgeBand {
    pub label: String,
    pub lo: i64,
    pub hi: Option<i64>,
}

impl FromStr for AgeBand {
    type Err = Error;

    /// Parses `"lo-hi"` or `"lo+"`.
    fn from_str(s: &str) -> Result<Self> {
        let label: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::schema(format!("invalid age band `{s}` (expected `lo-hi` or `lo+`)"));
        if let Some(lo) = label.strip_suffix('+') {
            let lo = lo.parse().map_err(|_| bad())?;
            return Ok(AgeBand { label, lo, hi: None });
        }
        let (lo, hi) = label.split_once('-').ok_or_else(bad)?;
        let (lo, hi): (i64, i64) = (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?);
        if hi < lo {
            return Err(bad());
        }
        Ok(AgeBand { label, lo, hi: Some(hi) })
    }
}

impl AgeBand {
    pub fn contains(&self, age: i64) -> bool {
        age >= self.lo && self.hi.is_none_or(|hi| age <= hi)
    }
}

/// Ordered age bands; an age belongs to the first band containing it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgeBands(Vec<AgeBand>);

impl AgeBands {
    pub const DEFAULT_LABELS: [&'static str; 11] = [
        "0-5", "6-10", "11-15", "16-17", "18-25", "26-35", "36-45", "46-55", "56-64", "65-85",
        "85+",
    ];

    pub fn parse<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::schema("age band list is empty"));
        }
        labels
            .iter()
            .map(|l| l.as_ref().parse())
            .collect::<Result<Vec<_>>>()
            .map(AgeBands)
    }

    pub fn bands(&self) -> &[AgeBand] {
        &self.0
    }

    pub fn band_of(&self, age: i64) -> Option<&str> {
        self.0.iter().find(|b| b.contains(age)).map(|b| b.label.as_str())
    }

    /// Maps a raw cell (integer age or pre-banded label) onto a band label.
    ///
    /// Pre-banded ranges that fit inside a configured band map onto it;
    /// anything else is returned normalised (whitespace removed).
    pub fn classify(&self, value: &Value) -> String {
        match value {
            Value::Int(age) => self.band_of(*age).unwrap_or(MISSING_CATEGORY).to_string(),
            Value::Date(_) => MISSING_CATEGORY.to_string(),
            Value::Text(s) => {
                let norm: String = s.chars().filter(|c| !c.is_whitespace()).collect();
                if let Ok(age) = norm.parse::<i64>() {
                    return self.band_of(age).unwrap_or(MISSING_CATEGORY).to_string();
                }
                if self.0.iter().any(|b| b.label == norm) {
                    return norm;
                }
                if let Ok(range) = norm.parse::<AgeBand>() {
                    let fits = self.0.iter().find(|b| {
                        b.contains(range.lo)
                            && match (range.hi, b.hi) {
                                (Some(rh), Some(bh)) => rh <= bh,
                                (Some(_), None) => true,
                                (None, bh) => bh.is_none(),
                            }
                    });
                    if let Some(b) = fits {
                        return b.label.clone();
                    }
                }
                norm
            }
        }
    }

    fn rank(&self, label: &str) -> Option<usize> {
        self.0.iter().position(|b| b.label == label)
    }
}

impl Default for AgeBands {
    fn default() -> Self {
        AgeBands::parse(&AgeBands::DEFAULT_LABELS).expect("default bands parse")
    }
}

/// Column mapping from logical fields to CSV headers.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemaMap {
    fields: BTreeMap<LogicalField, FieldMapping>,
    pub age_bands: AgeBands,
}

impl SchemaMap {
    pub fn new(date_column: impl Into<String>) -> Self {
        let mut fields = BTreeMap::new();
        fields.insert(LogicalField::Date, FieldMapping::new(date_column, ParseKind::Date));
        SchemaMap {
            fields,
            age_bands: AgeBands::default(),
        }
    }

    pub fn with_field(mut self, field: LogicalField, mapping: FieldMapping) -> Self {
        self.fields.insert(field, mapping);
        self
    }

    pub fn mapping(&self, field: LogicalField) -> Option<&FieldMapping> {
        self.fields.get(&field)
    }

    pub fn fields(&self) -> impl Iterator<Item = (LogicalField, &FieldMapping)> {
        self.fields.iter().map(|(f, m)| (*f, m))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }

    /// Renders the schema back into its TOML form.
    pub fn to_toml(&self) -> String {
        let quote = |s: &str| toml::Value::String(s.to_string()).to_string();
        let mut out = String::new();
        for (field, m) in &self.fields {
            if m.kind == field.default_kind() {
                out.push_str(&format!("{} = {}\n", field, quote(&m.column)));
            } else {
                let kind = match m.kind {
                    ParseKind::Date => "date",
                    ParseKind::Integer => "integer",
                    ParseKind::Categorical => "categorical",
                    ParseKind::Text => "text",
                };
                out.push_str(&format!(
                    "{} = {{ column = {}, kind = \"{kind}\" }}\n",
                    field,
                    quote(&m.column)
                ));
            }
        }
        out.push_str("\n[bands]\ndriver_age = [");
        let labels: Vec<String> = self.age_bands.bands().iter().map(|b| quote(&b.label)).collect();
        out.push_str(&labels.join(", "));
        out.push_str("]\n");
        for (field, m) in &self.fields {
            if m.recode.is_empty() {
                continue;
            }
            out.push_str(&format!("\n[recode.{field}]\n"));
            for (from, to) in &m.recode {
                out.push_str(&format!("{} = {}\n", quote(from), quote(to)));
            }
        }
        out
    }
}

impl FromStr for SchemaMap {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let doc: toml::Table = text
            .parse()
            .map_err(|e| Error::schema(format!("schema file is not valid TOML: {e}")))?;
        let mut fields = BTreeMap::new();
        let mut age_bands = AgeBands::default();
        let mut recodes: Vec<(LogicalField, BTreeMap<String, String>)> = Vec::new();

        for (key, value) in &doc {
            match key.as_str() {
                "bands" => {
                    let table = value
                        .as_table()
                        .ok_or_else(|| Error::schema("[bands] must be a table"))?;
                    for (k, v) in table {
                        if k != "driver_age" {
                            return Err(Error::schema(format!("unknown band set `{k}`")));
                        }
                        let labels = v
                            .as_array()
                            .and_then(|a| a.iter().map(|x| x.as_str()).collect::<Option<Vec<_>>>())
                            .ok_or_else(|| Error::schema("bands.driver_age must be a list of strings"))?;
                        age_bands = AgeBands::parse(&labels)?;
                    }
                }
                "recode" => {
                    let table = value
                        .as_table()
                        .ok_or_else(|| Error::schema("[recode] must contain field tables"))?;
                    for (k, v) in table {
                        let field: LogicalField = k.parse()?;
                        let map = v
                            .as_table()
                            .ok_or_else(|| Error::schema(format!("[recode.{k}] must be a table")))?
                            .iter()
                            .map(|(from, to)| {
                                to.as_str().map(|t| (from.clone(), t.to_string())).ok_or_else(|| {
                                    Error::schema(format!("recode.{k}.{from} must be a string"))
                                })
                            })
                            .collect::<Result<BTreeMap<_, _>>>()?;
                        recodes.push((field, map));
                    }
                }
                name => {
                    let field: LogicalField = name.parse()?;
                    let mapping = match value {
                        toml::Value::String(col) => FieldMapping::new(col.clone(), field.default_kind()),
                        toml::Value::Table(t) => {
                            for k in t.keys() {
                                if k != "column" && k != "kind" {
                                    return Err(Error::schema(format!("unknown key `{k}` for field `{name}`")));
                                }
                            }
                            let col = t
                                .get("column")
                                .and_then(|c| c.as_str())
                                .ok_or_else(|| Error::schema(format!("field `{name}` needs a `column`")))?;
                            let kind = match t.get("kind") {
                                Some(k) => k
                                    .as_str()
                                    .ok_or_else(|| Error::schema(format!("field `{name}`: kind must be a string")))?
                                    .parse()?,
                                None => field.default_kind(),
                            };
                            FieldMapping::new(col, kind)
                        }
                        _ => {
                            return Err(Error::schema(format!(
                                "field `{name}` must map to a column name or a table"
                            )))
                        }
                    };
                    fields.insert(field, mapping);
                }
            }
        }

        match fields.get(&LogicalField::Date) {
            None => return Err(Error::schema("the `date` field mapping is mandatory")),
            Some(m) if m.kind != ParseKind::Date => {
                return Err(Error::schema("the `date` field must use kind `date`"))
            }
            _ => {}
        }
        for (field, map) in recodes {
            let m = fields.get_mut(&field).ok_or_else(|| {
                Error::schema(format!("recode table for unmapped field `{field}`"))
            })?;
            m.recode = map;
        }
        Ok(SchemaMap { fields, age_bands })
    }
}

/// Inclusive calendar date range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct DateWindow {
    pub from: NaiveDate,
    pub to: NaiveDate,
}

impl DateWindow {
    pub fn new(from: NaiveDate, to: NaiveDate) -> Result<Self> {
        if from > to {
            return Err(Error::precondition(format!("empty date window {from}..{to}")));
        }
        Ok(DateWindow { from, to })
    }

    /// Window wide enough for any real record.
    pub fn unbounded() -> Self {
        DateWindow {
            from: NaiveDate::from_ymd_opt(1900, 1, 1).unwrap(),
            to: NaiveDate::from_ymd_opt(2100, 12, 31).unwrap(),
        }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        d >= self.from && d <= self.to
    }

    pub fn contains_window(&self, other: &DateWindow) -> bool {
        self.contains(other.from) && self.contains(other.to)
    }

    pub fn num_days(&self) -> usize {
        (self.to - self.from).num_days() as usize + 1
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> {
        self.from.iter_days().take(self.num_days())
    }

    /// The window of equal length ending the day before this one starts.
    pub fn preceding(&self) -> Result<DateWindow> {
        let len = self.num_days() as u64;
        let to = self
            .from
            .pred_opt()
            .ok_or_else(|| Error::precondition("no date precedes the window"))?;
        let from = to
            .checked_sub_days(chrono::Days::new(len - 1))
            .ok_or_else(|| Error::precondition("preceding window underflows the calendar"))?;
        Ok(DateWindow { from, to })
    }
}

impl fmt::Display for DateWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.from, self.to)
    }
}

/// Accepts `YYYY-MM-DD` or `DD/MM/YYYY`.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%d/%m/%Y"))
        .ok()
}

/// A parsed cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Date(NaiveDate),
    Int(i64),
    Text(String),
}

impl Value {
    pub fn label(&self) -> String {
        match self {
            Value::Date(d) => d.to_string(),
            Value::Int(i) => i.to_string(),
            Value::Text(s) => s.clone(),
        }
    }

    /// Interprets the value as a boolean flag.
    pub fn as_flag(&self) -> Option<bool> {
        match self {
            Value::Int(0) => Some(false),
            Value::Int(1) => Some(true),
            Value::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" | "y" | "t" => Some(true),
                "0" | "false" | "no" | "n" | "f" => Some(false),
                _ => None,
            },
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RowPolicy {
    /// Drop malformed rows and count them.
    #[default]
    Skip,
    /// Abort on the first malformed row.
    Strict,
}

#[derive(Clone, Copy, Debug)]
pub struct IngestOptions {
    pub policy: RowPolicy,
    /// Rows dated outside this window are excluded (and counted separately).
    pub window: DateWindow,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            policy: RowPolicy::Skip,
            window: DateWindow::unbounded(),
        }
    }
}

/// Typed accident records.
///
/// Every stored date lies inside [`RecordTable::window`].
#[derive(Clone, Debug, PartialEq)]
pub struct RecordTable {
    window: DateWindow,
    dates: Vec<NaiveDate>,
    columns: BTreeMap<LogicalField, Vec<Option<Value>>>,
    valid: Vec<bool>,
    dropped: usize,
    out_of_window: usize,
}

impl RecordTable {
    pub fn empty(window: DateWindow, fields: &[LogicalField]) -> Self {
        RecordTable {
            window,
            dates: Vec::new(),
            columns: fields
                .iter()
                .filter(|f| **f != LogicalField::Date)
                .map(|f| (*f, Vec::new()))
                .collect(),
            valid: Vec::new(),
            dropped: 0,
            out_of_window: 0,
        }
    }

    /// Appends a row. `values` must follow the order of [`RecordTable::fields`].
    pub fn push(&mut self, date: NaiveDate, values: Vec<Option<Value>>) -> Result<()> {
        if !self.window.contains(date) {
            return Err(Error::precondition(format!("date {date} outside window {}", self.window)));
        }
        if values.len() != self.columns.len() {
            return Err(Error::schema(format!(
                "row has {} values, table has {} fields",
                values.len(),
                self.columns.len()
            )));
        }
        self.dates.push(date);
        for (col, v) in self.columns.values_mut().zip(values) {
            col.push(v);
        }
        self.valid.push(true);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn window(&self) -> DateWindow {
        self.window
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    /// Non-date fields in column order.
    pub fn fields(&self) -> Vec<LogicalField> {
        self.columns.keys().copied().collect()
    }

    pub fn column(&self, field: LogicalField) -> Option<&[Option<Value>]> {
        self.columns.get(&field).map(|c| c.as_slice())
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Malformed rows dropped during ingestion.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Well-formed rows excluded for falling outside the ingestion window.
    pub fn out_of_window(&self) -> usize {
        self.out_of_window
    }

    /// Clears the validity flag of rows failing `keep`.
    pub fn retain_valid(&mut self, mut keep: impl FnMut(usize) -> bool) {
        for i in 0..self.valid.len() {
            if self.valid[i] && !keep(i) {
                self.valid[i] = false;
            }
        }
    }

    /// Earliest and latest date among valid rows.
    pub fn date_range(&self) -> Option<DateWindow> {
        let mut it = self.dates.iter().zip(&self.valid).filter(|(_, v)| **v).map(|(d, _)| *d);
        let first = it.next()?;
        let (lo, hi) = it.fold((first, first), |(lo, hi), d| (lo.min(d), hi.max(d)));
        Some(DateWindow { from: lo, to: hi })
    }

    fn valid_rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.valid.iter().enumerate().filter(|(_, v)| **v).map(|(i, _)| i)
    }
}

struct ParsedRow {
    date: NaiveDate,
    values: Vec<Option<Value>>,
}

enum RowOutcome {
    Ok(ParsedRow),
    OutOfWindow,
    Malformed { field: String, message: String },
}

struct ColumnPlan {
    field: LogicalField,
    index: usize,
    mapping: FieldMapping,
}

fn parse_cell(raw: &[u8], mapping: &FieldMapping) -> std::result::Result<Option<Value>, String> {
    let text = std::str::from_utf8(raw).map_err(|_| "invalid UTF-8".to_string())?;
    let mut text = text.trim();
    if let Some(re) = mapping.recode.get(text) {
        text = re.as_str();
    }
    let text = text.trim();
    if text.is_empty() {
        return Ok(None);
    }
    match mapping.kind {
        ParseKind::Date => parse_date(text)
            .map(|d| Some(Value::Date(d)))
            .ok_or_else(|| format!("invalid date `{text}`")),
        ParseKind::Integer => text
            .parse::<i64>()
            .map(|i| Some(Value::Int(i)))
            .map_err(|_| format!("invalid integer `{text}`")),
        ParseKind::Categorical | ParseKind::Text => Ok(Some(Value::Text(text.to_string()))),
    }
}

fn parse_record(
    rec: &csv::ByteRecord,
    date: &ColumnPlan,
    others: &[ColumnPlan],
    window: &DateWindow,
) -> RowOutcome {
    let malformed = |plan: &ColumnPlan, message: String| RowOutcome::Malformed {
        field: plan.field.name().to_string(),
        message,
    };
    let date_value = match rec.get(date.index).map(|raw| parse_cell(raw, &date.mapping)) {
        None => return malformed(date, "missing cell".into()),
        Some(Err(m)) => return malformed(date, m),
        Some(Ok(None)) => return malformed(date, "empty date".into()),
        Some(Ok(Some(Value::Date(d)))) => d,
        Some(Ok(Some(_))) => unreachable!("date kind yields dates"),
    };
    let mut values = Vec::with_capacity(others.len());
    for plan in others {
        match rec.get(plan.index).map(|raw| parse_cell(raw, &plan.mapping)) {
            None => return malformed(plan, "missing cell".into()),
            Some(Err(m)) => return malformed(plan, m),
            Some(Ok(v)) => values.push(v),
        }
    }
    if !window.contains(date_value) {
        return RowOutcome::OutOfWindow;
    }
    RowOutcome::Ok(ParsedRow {
        date: date_value,
        values,
    })
}

/// Reads a CSV file (comma separated, double-quote escaping, UTF-8, header
/// row) into a [`RecordTable`].
///
/// Rows are parsed in parallel chunks and reassembled in source order, so the
/// result does not depend on the thread count.
pub fn ingest_csv(path: &Path, schema: &SchemaMap, opts: &IngestOptions) -> Result<RecordTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(std::io::BufReader::new(file), schema, opts).map_err(|e| match e {
        Error::Csv(err) if matches!(err.kind(), csv::ErrorKind::Io(_)) => {
            let msg = err.to_string();
            Error::io(path, std::io::Error::other(msg))
        }
        other => other,
    })
}

/// [`ingest_csv`] over any reader.
pub fn ingest_reader<R: std::io::Read>(
    reader: R,
    schema: &SchemaMap,
    opts: &IngestOptions,
) -> Result<RecordTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .byte_headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let h = String::from_utf8_lossy(h);
            let h = if i == 0 { h.trim_start_matches('\u{feff}') } else { &h };
            h.trim().to_string()
        })
        .collect();

    let mut plans = Vec::new();
    for (field, mapping) in schema.fields() {
        let index = headers
            .iter()
            .position(|h| *h == mapping.column)
            .ok_or_else(|| {
                Error::schema(format!(
                    "column `{}` (mapped to `{field}`) not found in header",
                    mapping.column
                ))
            })?;
        plans.push(ColumnPlan {
            field,
            index,
            mapping: mapping.clone(),
        });
    }
    let date_pos = plans
        .iter()
        .position(|p| p.field == LogicalField::Date)
        .ok_or_else(|| Error::schema("the `date` field mapping is mandatory"))?;
    let date_plan = plans.remove(date_pos);

    // Records that fail at the CSV layer become malformed rows.
    let mut records: Vec<std::result::Result<csv::ByteRecord, String>> = Vec::new();
    for rec in rdr.byte_records() {
        match rec {
            Ok(r) => records.push(Ok(r)),
            Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => return Err(e.into()),
            Err(e) => records.push(Err(e.to_string())),
        }
    }

    let outcomes: Vec<Vec<RowOutcome>> = records
        .par_chunks(INGEST_CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(|r| match r {
                    Ok(rec) => parse_record(rec, &date_plan, &plans, &opts.window),
                    Err(msg) => RowOutcome::Malformed {
                        field: "(record)".into(),
                        message: msg.clone(),
                    },
                })
                .collect()
        })
        .collect();

    let mut fields: Vec<LogicalField> = plans.iter().map(|p| p.field).collect();
    fields.sort();
    let mut table = RecordTable::empty(opts.window, &fields);
    // `plans` is already in field order (schema fields iterate sorted).
    for (row_idx, outcome) in outcomes.into_iter().flatten().enumerate() {
        match outcome {
            RowOutcome::Ok(row) => table.push(row.date, row.values)?,
            RowOutcome::OutOfWindow => table.out_of_window += 1,
            RowOutcome::Malformed { field, message } => match opts.policy {
                RowPolicy::Skip => table.dropped += 1,
                RowPolicy::Strict => {
                    return Err(Error::Row {
                        row: row_idx + 1,
                        field,
                        message,
                    })
                }
            },
        }
    }
    Ok(table)
}

/// How a logical field becomes categories.
#[derive(Clone, Debug, PartialEq)]
pub enum BinRule {
    /// Each distinct value is a category.
    Identity,
    /// Integer or pre-banded ages mapped onto bands.
    AgeBand(AgeBands),
    /// Leading alphabetic prefix of a postcode, upper-cased.
    DistrictPrefix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariableDef {
    pub name: String,
    pub field: LogicalField,
    pub rule: BinRule,
}

impl VariableDef {
    /// The natural binning for a field: age bands for ages, postcode area for
    /// districts, identity otherwise.
    pub fn for_field(field: LogicalField, bands: &AgeBands) -> Self {
        let rule = match field {
            LogicalField::DriverAgeBand => BinRule::AgeBand(bands.clone()),
            LogicalField::District => BinRule::DistrictPrefix,
            _ => BinRule::Identity,
        };
        VariableDef {
            name: field.name().to_string(),
            field,
            rule,
        }
    }
}

/// Leading alphabetic run of a postcode (`"WA4 6HL"` → `"WA"`).
pub fn district_prefix(s: &str) -> Option<String> {
    let prefix: String = s
        .trim()
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .map(|c| c.to_ascii_uppercase())
        .collect();
    (!prefix.is_empty()).then_some(prefix)
}

const WEEKDAYS: [&str; 7] = [
    "Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday",
];

fn weekday_name(d: NaiveDate) -> &'static str {
    WEEKDAYS[d.weekday().num_days_from_monday() as usize]
}

fn weekday_rank(label: &str) -> Option<usize> {
    WEEKDAYS.iter().position(|w| w.eq_ignore_ascii_case(label))
}

/// One categorical variable: a name and its ordered categories.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Variable {
    pub name: String,
    pub categories: Vec<String>,
}

/// N observations × Q categorical variables stored as category codes.
///
/// Every listed category is used by at least one observation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CategoricalTable {
    n: usize,
    variables: Vec<Variable>,
    codes: Vec<u32>,
}

impl CategoricalTable {
    /// Builds a table from row-major codes, pruning categories no row uses.
    pub fn new(variables: Vec<Variable>, codes: Vec<u32>) -> Result<Self> {
        let q = variables.len();
        if q == 0 {
            return Err(Error::precondition("a categorical table needs at least one variable"));
        }
        if !codes.len().is_multiple_of(q) {
            return Err(Error::schema(format!(
                "{} codes cannot fill rows of {q} variables",
                codes.len()
            )));
        }
        let n = codes.len() / q;
        let mut used: Vec<Vec<bool>> = variables.iter().map(|v| vec![false; v.categories.len()]).collect();
        for row in codes.chunks_exact(q) {
            for (k, &c) in row.iter().enumerate() {
                let slot = used[k].get_mut(c as usize).ok_or_else(|| {
                    Error::schema(format!(
                        "code {c} out of range for variable `{}` ({} categories)",
                        variables[k].name,
                        variables[k].categories.len()
                    ))
                })?;
                *slot = true;
            }
        }
        let mut remap: Vec<Vec<u32>> = Vec::with_capacity(q);
        let mut pruned = Vec::with_capacity(q);
        for (var, used) in variables.into_iter().zip(&used) {
            let mut map = vec![u32::MAX; used.len()];
            let mut cats = Vec::new();
            for (old, cat) in var.categories.into_iter().enumerate() {
                if used[old] {
                    map[old] = cats.len() as u32;
                    cats.push(cat);
                }
            }
            remap.push(map);
            pruned.push(Variable {
                name: var.name,
                categories: cats,
            });
        }
        let codes = codes
            .chunks_exact(q)
            .flat_map(|row| row.iter().enumerate().map(|(k, &c)| remap[k][c as usize]).collect::<Vec<_>>())
            .collect();
        Ok(CategoricalTable {
            n,
            variables: pruned,
            codes,
        })
    }

    /// Builds a table from per-variable label columns. Categories are
    /// ordered by first appearance.
    pub fn from_labels(names: &[&str], columns: &[Vec<String>]) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::schema("one label column per variable name is required"));
        }
        let n = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::schema("label columns differ in length"));
        }
        let mut variables = Vec::new();
        let mut lookups = Vec::new();
        for (name, col) in names.iter().zip(columns) {
            let mut cats: Vec<String> = Vec::new();
            let mut index: BTreeMap<&str, u32> = BTreeMap::new();
            for label in col {
                if !index.contains_key(label.as_str()) {
                    index.insert(label, cats.len() as u32);
                    cats.push(label.clone());
                }
            }
            lookups.push(index);
            variables.push(Variable {
                name: name.to_string(),
                categories: cats,
            });
        }
        let mut codes = Vec::with_capacity(n * names.len());
        for i in 0..n {
            for (col, index) in columns.iter().zip(&lookups) {
                codes.push(index[col[i].as_str()]);
            }
        }
        CategoricalTable::new(variables, codes)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.variables.len()
    }

    /// Total category count.
    pub fn j(&self) -> usize {
        self.variables.iter().map(|v| v.categories.len()).sum()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    /// Start index of each variable's block among the J categories.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.variables
            .iter()
            .map(|v| {
                let o = acc;
                acc += v.categories.len();
                o
            })
            .collect()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        let q = self.q();
        &self.codes[i * q..(i + 1) * q]
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    /// `"variable=category"` for every category in block order.
    pub fn category_labels(&self) -> Vec<(String, String)> {
        self.variables
            .iter()
            .flat_map(|v| v.categories.iter().map(move |c| (v.name.clone(), c.clone())))
            .collect()
    }
}

/// Bins the valid rows of `t` into a [`CategoricalTable`].
///
/// Missing values become the [`MISSING_CATEGORY`]. `day_of_week` is derived
/// from the date when the table has no such column.
pub fn bin_to_categorical(t: &RecordTable, defs: &[VariableDef]) -> Result<CategoricalTable> {
    if defs.is_empty() {
        return Err(Error::precondition("no variables requested"));
    }
    let rows: Vec<usize> = t.valid_rows().collect();
    let mut names = Vec::with_capacity(defs.len());
    let mut columns = Vec::with_capacity(defs.len());
    for def in defs {
        let labels: Vec<String> = match (def.field, t.column(def.field)) {
            (LogicalField::Date, _) => rows.iter().map(|&i| t.dates[i].to_string()).collect(),
            (LogicalField::DayOfWeek, None) => {
                rows.iter().map(|&i| weekday_name(t.dates[i]).to_string()).collect()
            }
            (field, None) => {
                return Err(Error::schema(format!("field `{field}` is not present in the table")))
            }
            (_, Some(col)) => rows
                .iter()
                .map(|&i| match &col[i] {
                    None => MISSING_CATEGORY.to_string(),
                    Some(v) => match &def.rule {
                        BinRule::Identity => v.label(),
                        BinRule::AgeBand(bands) => bands.classify(v),
                        BinRule::DistrictPrefix => {
                            district_prefix(&v.label()).unwrap_or_else(|| MISSING_CATEGORY.to_string())
                        }
                    },
                })
                .collect(),
        };
        names.push(def.name.as_str());
        columns.push(labels);
    }
    let mut table = CategoricalTable::from_labels(&names, &columns)?;
    // Canonical category order: bands in band order, weekdays in week order,
    // everything else lexicographic, with the missing category last.
    for (k, def) in defs.iter().enumerate() {
        let key = |c: &str| -> (u8, usize, String) {
            if c == MISSING_CATEGORY {
                return (2, 0, String::new());
            }
            if let BinRule::AgeBand(b) = &def.rule {
                if let Some(r) = b.rank(c) {
                    return (0, r, String::new());
                }
            }
            if def.field == LogicalField::DayOfWeek {
                if let Some(r) = weekday_rank(c) {
                    return (0, r, String::new());
                }
            }
            (1, 0, c.to_string())
        };
        table.reorder_categories(k, |a, b| key(a).cmp(&key(b)));
    }
    Ok(table)
}

impl CategoricalTable {
    fn reorder_categories(&mut self, k: usize, cmp: impl Fn(&str, &str) -> std::cmp::Ordering) {
        let cats = &self.variables[k].categories;
        let mut order: Vec<usize> = (0..cats.len()).collect();
        order.sort_by(|&a, &b| cmp(&cats[a], &cats[b]));
        let mut new_code = vec![0u32; cats.len()];
        for (new, &old) in order.iter().enumerate() {
            new_code[old] = new as u32;
        }
        let sorted = order.iter().map(|&o| cats[o].clone()).collect();
        self.variables[k].categories = sorted;
        let q = self.q();
        for row in self.codes.chunks_exact_mut(q) {
            row[k] = new_code[row[k] as usize];
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Daily,
    Monthly,
}

/// Gap-free counts per period starting at `start` (a month's first day for
/// monthly series).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountSeries {
    pub granularity: Granularity,
    pub start: NaiveDate,
    pub counts: Vec<u64>,
}

impl CountSeries {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    pub fn period_start(&self, k: usize) -> NaiveDate {
        match self.granularity {
            Granularity::Daily => self.start + chrono::Days::new(k as u64),
            Granularity::Monthly => self.start + Months::new(k as u32),
        }
    }

    /// `YYYY-MM-DD` for daily series, `YYYY-MM` for monthly ones.
    pub fn period_label(&self, k: usize) -> String {
        let d = self.period_start(k);
        match self.granularity {
            Granularity::Daily => d.to_string(),
            Granularity::Monthly => format!("{:04}-{:02}", d.year(), d.month()),
        }
    }
}

fn month_index(d: NaiveDate) -> i64 {
    d.year() as i64 * 12 + d.month0() as i64
}

fn first_of_month(d: NaiveDate) -> NaiveDate {
    NaiveDate::from_ymd_opt(d.year(), d.month(), 1).expect("valid month")
}

/// Counts valid rows per period within `window`, filling gaps with zero.
pub fn aggregate_counts(
    t: &RecordTable,
    granularity: Granularity,
    window: &DateWindow,
) -> Result<CountSeries> {
    if !t.window().contains_window(window) {
        return Err(Error::precondition(format!(
            "window {window} is not inside the table's window {}",
            t.window()
        )));
    }
    let (start, periods) = match granularity {
        Granularity::Daily => (window.from, window.num_days()),
        Granularity::Monthly => (
            first_of_month(window.from),
            (month_index(window.to) - month_index(window.from) + 1) as usize,
        ),
    };
    let mut counts = vec![0u64; periods];
    for i in t.valid_rows() {
        let d = t.dates[i];
        if !window.contains(d) {
            continue;
        }
        let k = match granularity {
            Granularity::Daily => (d - start).num_days() as usize,
            Granularity::Monthly => (month_index(d) - month_index(start)) as usize,
        };
        counts[k] += 1;
    }
    Ok(CountSeries {
        granularity,
        start,
        counts,
    })
}

/// How to split rows into two groups for a daily-count comparison.
#[derive(Clone, Debug, PartialEq)]
pub enum SplitRule {
    /// Accident month in `summer` vs in `winter` (months 1–12).
    Season { summer: Vec<u32>, winter: Vec<u32> },
    /// Driver age band in set A vs set B.
    AgeBand {
        first: Vec<String>,
        second: Vec<String>,
        bands: AgeBands,
    },
    /// The equal-length window immediately before `during` vs `during`.
    DateWindow { during: DateWindow },
    /// Boolean column true vs false.
    Flag { field: LogicalField },
    /// Male vs female driver.
    Sex,
}

impl SplitRule {
    pub fn season() -> Self {
        SplitRule::Season {
            summer: vec![6, 7, 8],
            winter: vec![12, 1, 2],
        }
    }

    /// Default event window: 2012-07-27 through 2012-08-12.
    pub fn olympics_2012() -> Self {
        SplitRule::DateWindow {
            during: DateWindow {
                from: NaiveDate::from_ymd_opt(2012, 7, 27).unwrap(),
                to: NaiveDate::from_ymd_opt(2012, 8, 12).unwrap(),
            },
        }
    }

    /// Parses the command-line form: `season`, `sex`, `flag:FIELD`,
    /// `window:FROM:TO`, or `age:A1,A2:B1,B2`.
    pub fn parse(s: &str, bands: &AgeBands) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::precondition(format!("invalid split rule `{s}`"));
        match parts.as_slice() {
            ["season"] => Ok(SplitRule::season()),
            ["sex"] => Ok(SplitRule::Sex),
            ["flag", field] => Ok(SplitRule::Flag { field: field.parse()? }),
            ["window", from, to] => {
                let from = parse_date(from).ok_or_else(bad)?;
                let to = parse_date(to).ok_or_else(bad)?;
                Ok(SplitRule::DateWindow {
                    during: DateWindow::new(from, to)?,
                })
            }
            ["age", a, b] => {
                let set = |x: &str| -> Result<Vec<String>> {
                    let labels: Vec<String> = x.split(',').map(|l| l.trim().to_string()).filter(|l| !l.is_empty()).collect();
                    if labels.is_empty() {
                        return Err(bad());
                    }
                    for l in &labels {
                        if bands.rank(l).is_none() {
                            return Err(Error::precondition(format!("unknown age band `{l}`")));
                        }
                    }
                    Ok(labels)
                };
                Ok(SplitRule::AgeBand {
                    first: set(a)?,
                    second: set(b)?,
                    bands: bands.clone(),
                })
            }
            _ => Err(bad()),
        }
    }

    pub fn side_labels(&self) -> (String, String) {
        match self {
            SplitRule::Season { .. } => ("summer".into(), "winter".into()),
            SplitRule::AgeBand { first, second, .. } => {
                (format!("age {}", first.join(",")), format!("age {}", second.join(",")))
            }
            SplitRule::DateWindow { .. } => ("before".into(), "during".into()),
            SplitRule::Flag { field } => (format!("{field}=true"), format!("{field}=false")),
            SplitRule::Sex => ("male".into(), "female".into()),
        }
    }

    fn required_field(&self) -> Option<LogicalField> {
        match self {
            SplitRule::AgeBand { .. } => Some(LogicalField::DriverAgeBand),
            SplitRule::Flag { field } => Some(*field),
            SplitRule::Sex => Some(LogicalField::DriverSex),
            _ => None,
        }
    }
}

/// Daily counts for one side of a split, one entry per eligible day.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DailySample {
    pub label: String,
    pub days: Vec<NaiveDate>,
    pub counts: Vec<u64>,
}

impl DailySample {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitCounts {
    pub first: DailySample,
    pub second: DailySample,
    /// Valid rows inside the analysis window that match neither side.
    pub neither: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    First,
    Second,
}

fn sex_side(v: &Value) -> Option<Side> {
    match v.label().trim().to_ascii_lowercase().as_str() {
        "male" | "m" => Some(Side::First),
        "female" | "f" => Some(Side::Second),
        _ => None,
    }
}

/// Splits valid rows into two groups and counts each group per eligible day.
///
/// Eligible days are the days of `window` for attribute rules (every day in
/// the window, zero-count days included), the days of `window` falling in
/// the side's months for the season rule, and the two side windows for the
/// date-window rule (which must lie inside the table's window).
pub fn split_counts(t: &RecordTable, rule: &SplitRule, window: &DateWindow) -> Result<SplitCounts> {
    if let Some(field) = rule.required_field() {
        if t.column(field).is_none() {
            return Err(Error::schema(format!("split rule needs field `{field}`, which is not mapped")));
        }
    }
    let (label_a, label_b) = rule.side_labels();

    let (days_a, days_b): (Vec<NaiveDate>, Vec<NaiveDate>) = match rule {
        SplitRule::Season { summer, winter } => (
            window.days().filter(|d| summer.contains(&d.month())).collect(),
            window.days().filter(|d| winter.contains(&d.month())).collect(),
        ),
        SplitRule::DateWindow { during } => {
            let before = during.preceding()?;
            for w in [&before, during] {
                if !t.window().contains_window(w) {
                    return Err(Error::precondition(format!(
                        "split window {w} is not inside the table's window {}",
                        t.window()
                    )));
                }
            }
            (before.days().collect(), during.days().collect())
        }
        _ => (window.days().collect(), window.days().collect()),
    };

    let classify = |i: usize| -> Option<Side> {
        let d = t.dates[i];
        match rule {
            SplitRule::Season { summer, winter } => {
                if summer.contains(&d.month()) {
                    Some(Side::First)
                } else if winter.contains(&d.month()) {
                    Some(Side::Second)
                } else {
                    None
                }
            }
            SplitRule::DateWindow { during } => {
                let before = during.preceding().ok()?;
                if before.contains(d) {
                    Some(Side::First)
                } else if during.contains(d) {
                    Some(Side::Second)
                } else {
                    None
                }
            }
            SplitRule::AgeBand { first, second, bands } => {
                let band = t.column(LogicalField::DriverAgeBand)?[i].as_ref().map(|v| bands.classify(v))?;
                if first.contains(&band) {
                    Some(Side::First)
                } else if second.contains(&band) {
                    Some(Side::Second)
                } else {
                    None
                }
            }
            SplitRule::Flag { field } => match t.column(*field)?[i].as_ref()?.as_flag()? {
                true => Some(Side::First),
                false => Some(Side::Second),
            },
            SplitRule::Sex => sex_side(t.column(LogicalField::DriverSex)?[i].as_ref()?),
        }
    };

    let index = |days: &[NaiveDate]| -> BTreeMap<NaiveDate, usize> {
        days.iter().enumerate().map(|(k, d)| (*d, k)).collect()
    };
    let (idx_a, idx_b) = (index(&days_a), index(&days_b));
    let mut counts_a = vec![0u64; days_a.len()];
    let mut counts_b = vec![0u64; days_b.len()];
    let (mut rows_a, mut rows_b, mut neither) = (0usize, 0usize, 0usize);
    let eligible_a: BTreeSet<NaiveDate> = days_a.iter().copied().collect();
    let eligible_b: BTreeSet<NaiveDate> = days_b.iter().copied().collect();

    for i in t.valid_rows() {
        let d = t.dates[i];
        let side = classify(i);
        let counted = match side {
            Some(Side::First) if eligible_a.contains(&d) => {
                counts_a[idx_a[&d]] += 1;
                rows_a += 1;
                true
            }
            Some(Side::Second) if eligible_b.contains(&d) => {
                counts_b[idx_b[&d]] += 1;
                rows_b += 1;
                true
            }
            _ => false,
        };
        if !counted && window.contains(d) {
            neither += 1;
        }
    }
    if rows_a == 0 {
        return Err(Error::EmptyGroup { side: label_a });
    }
    if rows_b == 0 {
        return Err(Error::EmptyGroup { side: label_b });
    }
    Ok(SplitCounts {
        first: DailySample {
            label: label_a,
            days: days_a,
            counts: counts_a,
        },
        second: DailySample {
            label: label_b,
            days: days_b,
            counts: counts_b,
        },
        neither,
    })
}
