//! Seeded generators for datasets with planted structure.
//!
//! Every generator is a pure function of its [`SynthSpec`]: the same spec
//! (seed included) yields the same table, bit for bit.

pub mod rng;

use std::f64::consts::TAU;
use std::io::Write;

use chrono::{Datelike, NaiveDate};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::tabular::{
    CategoricalTable, CountSeries, DateWindow, FieldMapping, Granularity, LogicalField,
    ParseKind, RecordTable, SchemaMap, Value, Variable,
};

pub use rng::Rng;

/// Pairwise dependence between two variables: with probability `strength`
/// the `to` variable copies a fixed mapping of the `from` category.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Association {
    pub from: String,
    pub to: String,
    pub strength: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariablePlan {
    pub name: String,
    pub categories: usize,
}

/// Abstract categorical variables for [`gen_categorical`].
#[derive(Clone, Debug, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CategoricalPlan {
    pub variables: Vec<VariablePlan>,
    pub associations: Vec<Association>,
}

/// Attribute distribution of generated accident records.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecordPlan {
    pub male_share: f64,
    pub proximity_share: f64,
    /// Associations between record attributes, named by logical field
    /// (`district`, `driver_age_band`, `driver_sex`, `weather`,
    /// `vehicle_type`, `proximity_flag`).
    pub associations: Vec<Association>,
}

impl Default for RecordPlan {
    fn default() -> Self {
        RecordPlan {
            male_share: 0.6,
            proximity_share: 0.3,
            associations: Vec::new(),
        }
    }
}

/// Shifts in expected daily counts for groups of days.
#[derive(Clone, Debug, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupEffects {
    /// Extra expected accidents per day in June–August.
    pub summer_shift: f64,
}

/// Monthly level `base + slope·t + amplitude·sin(2πt/12)`, `t` counted in
/// months from the window start.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrendPlan {
    pub base: f64,
    pub slope: f64,
    pub amplitude: f64,
    /// Standard deviation of the Gaussian noise added by [`gen_series`].
    pub noise_sd: f64,
    /// Length of [`gen_series`] output; defaults to the months in the window.
    pub months: Option<usize>,
}

impl Default for TrendPlan {
    fn default() -> Self {
        TrendPlan {
            base: 1000.0,
            slope: -2.0,
            amplitude: 80.0,
            noise_sd: 30.0,
            months: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub rows: usize,
    pub window: DateWindow,
    pub categorical: CategoricalPlan,
    pub records: RecordPlan,
    pub effects: GroupEffects,
    pub trend: TrendPlan,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 42,
            rows: 100_000,
            window: DateWindow {
                from: NaiveDate::from_ymd_opt(2005, 1, 1).unwrap(),
                to: NaiveDate::from_ymd_opt(2015, 12, 31).unwrap(),
            },
            categorical: CategoricalPlan::default(),
            records: RecordPlan::default(),
            effects: GroupEffects::default(),
            trend: TrendPlan::default(),
        }
    }
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SynthSpec =
            toml::from_str(text).map_err(|e| Error::precondition(format!("invalid synth spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 {
            return Err(Error::precondition("synth spec needs at least one row"));
        }
        if self.window.from > self.window.to {
            return Err(Error::precondition("synth window is empty"));
        }
        let check_assoc = |a: &Association| {
            if !(0.0..=1.0).contains(&a.strength) {
                return Err(Error::precondition(format!(
                    "association strength {} for {}→{} is outside [0, 1]",
                    a.strength, a.from, a.to
                )));
            }
            Ok(())
        };
        for v in &self.categorical.variables {
            if v.categories < 2 {
                return Err(Error::precondition(format!(
                    "variable `{}` needs at least 2 categories",
                    v.name
                )));
            }
        }
        for a in &self.categorical.associations {
            check_assoc(a)?;
        }
        for a in &self.records.associations {
            check_assoc(a)?;
            for name in [&a.from, &a.to] {
                if !RECORD_ATTRIBUTES.contains(&name.as_str()) {
                    return Err(Error::precondition(format!("unknown record attribute `{name}`")));
                }
            }
        }
        for (name, p) in [
            ("male_share", self.records.male_share),
            ("proximity_share", self.records.proximity_share),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::precondition(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !self.effects.summer_shift.is_finite() || self.trend.noise_sd < 0.0 {
            return Err(Error::precondition("invalid effect or noise parameters"));
        }
        Ok(())
    }
}

/// Resolves associations into, for each variable, an optional
/// `(source index, strength)` with the source generated earlier.
fn association_sources(names: &[&str], assoc: &[Association]) -> Result<Vec<Option<(usize, f64)>>> {
    let mut sources = vec![None; names.len()];
    for a in assoc {
        let from = names.iter().position(|n| *n == a.from);
        let to = names.iter().position(|n| *n == a.to);
        let (Some(from), Some(to)) = (from, to) else {
            return Err(Error::precondition(format!(
                "association {}→{} names an unknown variable",
                a.from, a.to
            )));
        };
        if from >= to {
            return Err(Error::precondition(format!(
                "association {}→{} must point from an earlier variable to a later one",
                a.from, a.to
            )));
        }
        if sources[to].is_some() {
            return Err(Error::precondition(format!("variable `{}` has two association sources", a.to)));
        }
        sources[to] = Some((from, a.strength));
    }
    Ok(sources)
}

/// Draws one row of category indices, in variable order.
fn draw_row(rng: &mut Rng, sizes: &[usize], sources: &[Option<(usize, f64)>], out: &mut Vec<usize>) {
    out.clear();
    for (k, &size) in sizes.iter().enumerate() {
        let code = match sources[k] {
            // Fixed mapping: the source code modulo this variable's size (a
            // bijection when the sizes agree).
            Some((src, v)) if rng.bernoulli(v) => out[src] % size,
            _ => rng.below(size as u64) as usize,
        };
        out.push(code);
    }
}

/// Categorical table with the planned variables and associations.
pub fn gen_categorical(spec: &SynthSpec) -> Result<CategoricalTable> {
    spec.validate()?;
    let plan = &spec.categorical;
    if plan.variables.is_empty() {
        return Err(Error::precondition("categorical plan has no variables"));
    }
    let names: Vec<&str> = plan.variables.iter().map(|v| v.name.as_str()).collect();
    let sizes: Vec<usize> = plan.variables.iter().map(|v| v.categories).collect();
    let sources = association_sources(&names, &plan.associations)?;
    let mut rng = Rng::seed_from_u64(spec.seed);
    let mut codes = Vec::with_capacity(spec.rows * sizes.len());
    let mut row = Vec::with_capacity(sizes.len());
    for _ in 0..spec.rows {
        draw_row(&mut rng, &sizes, &sources, &mut row);
        codes.extend(row.iter().map(|&c| c as u32));
    }
    let variables = plan
        .variables
        .iter()
        .map(|v| Variable {
            name: v.name.clone(),
            categories: (0..v.categories).map(|c| format!("c{c}")).collect(),
        })
        .collect();
    CategoricalTable::new(variables, codes)
}

const RECORD_ATTRIBUTES: [&str; 6] = [
    "district",
    "driver_age_band",
    "driver_sex",
    "weather",
    "vehicle_type",
    "proximity_flag",
];

const AREAS: [&str; 12] = ["WA", "GU", "M", "B", "LS", "BS", "CF", "EH", "G", "L", "NE", "SW"];
const WEATHER: [&str; 5] = ["Fine", "Raining", "Snowing", "Fog", "High winds"];
const VEHICLES: [&str; 5] = ["Car", "Motorcycle", "Van", "Bus", "Pedal cycle"];
/// Driver age bands drawn by the generator (ages 17–90).
const DRIVER_AGES: [(i64, i64); 8] = [(17, 17), (18, 25), (26, 35), (36, 45), (46, 55), (56, 64), (65, 85), (86, 90)];
const WEEKDAYS: [&str; 7] = [
    "Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday",
];
const LETTERS: &[u8] = b"ABDEFGHJLNPQRSTUWXYZ";

/// CSV header written by [`write_records_csv`].
pub const CSV_HEADER: [&str; 9] = [
    "Date",
    "Time",
    "Day_of_Week",
    "Age_of_Driver",
    "Sex_of_Driver",
    "Postcode",
    "Weather_Conditions",
    "Vehicle_Type",
    "Near_Subway",
];

/// Schema mapping for files produced by [`write_records_csv`].
pub fn default_schema() -> SchemaMap {
    let cat = |c: &str| FieldMapping::new(c, ParseKind::Categorical);
    SchemaMap::new("Date")
        .with_field(LogicalField::Time, FieldMapping::new("Time", ParseKind::Text))
        .with_field(LogicalField::DayOfWeek, cat("Day_of_Week"))
        .with_field(LogicalField::DriverAgeBand, FieldMapping::new("Age_of_Driver", ParseKind::Integer))
        .with_field(LogicalField::DriverSex, cat("Sex_of_Driver"))
        .with_field(LogicalField::District, cat("Postcode"))
        .with_field(LogicalField::Weather, cat("Weather_Conditions"))
        .with_field(LogicalField::VehicleType, cat("Vehicle_Type"))
        .with_field(LogicalField::ProximityFlag, cat("Near_Subway"))
}

fn month_offset(window: &DateWindow, d: NaiveDate) -> i64 {
    (d.year() as i64 * 12 + d.month0() as i64)
        - (window.from.year() as i64 * 12 + window.from.month0() as i64)
}

fn trend_level(plan: &TrendPlan, t: f64) -> f64 {
    plan.base + plan.slope * t + plan.amplitude * (TAU * t / 12.0).sin()
}

fn is_summer(d: NaiveDate) -> bool {
    (6..=8).contains(&d.month())
}

/// Expected accidents per day: the month's trend level as a daily rate
/// shape, scaled so the expected total is `rows`, plus the summer shift.
///
/// Month length does not affect the daily rate, so a flat trend gives every
/// day the same base and group effects show up undistorted.
pub fn daily_rates(spec: &SynthSpec) -> Result<Vec<f64>> {
    let days: Vec<NaiveDate> = spec.window.days().collect();
    let shape: Vec<f64> = days
        .iter()
        .map(|&d| trend_level(&spec.trend, month_offset(&spec.window, d) as f64).max(0.0))
        .collect();
    let shifts: Vec<f64> = days
        .iter()
        .map(|&d| if is_summer(d) { spec.effects.summer_shift } else { 0.0 })
        .collect();
    let shape_total: f64 = shape.iter().sum();
    let shift_total: f64 = shifts.iter().sum();
    let remaining = spec.rows as f64 - shift_total;
    if shape_total <= 0.0 || remaining <= 0.0 {
        return Err(Error::precondition(
            "trend plan and group effects leave no room for the requested row count",
        ));
    }
    let scale = remaining / shape_total;
    let rates: Vec<f64> = shape.iter().zip(&shifts).map(|(s, h)| s * scale + h).collect();
    if rates.iter().any(|r| *r < 0.0) {
        return Err(Error::precondition("group effects drive a daily rate negative"));
    }
    Ok(rates)
}

/// Accident records whose daily counts follow the trend and group-effect
/// plans. Exactly `rows` records are produced, sorted by date.
pub fn gen_records(spec: &SynthSpec) -> Result<RecordTable> {
    spec.validate()?;
    let rates = daily_rates(spec)?;
    let mut cumulative = Vec::with_capacity(rates.len());
    let mut acc = 0.0;
    for r in &rates {
        acc += r;
        cumulative.push(acc);
    }
    let total = acc;
    let mut rng = Rng::seed_from_u64(spec.seed);

    let mut day_counts = vec![0usize; rates.len()];
    for _ in 0..spec.rows {
        let u = rng.next_f64() * total;
        let k = cumulative.partition_point(|&c| c <= u).min(rates.len() - 1);
        day_counts[k] += 1;
    }

    let sizes = [AREAS.len(), DRIVER_AGES.len(), 2, WEATHER.len(), VEHICLES.len(), 2];
    let sources = association_sources(&RECORD_ATTRIBUTES, &spec.records.associations)?;
    let fields = [
        LogicalField::Time,
        LogicalField::DayOfWeek,
        LogicalField::DriverAgeBand,
        LogicalField::DriverSex,
        LogicalField::District,
        LogicalField::Weather,
        LogicalField::VehicleType,
        LogicalField::ProximityFlag,
    ];
    let mut table = RecordTable::empty(spec.window, &fields);
    let mut codes = Vec::with_capacity(sizes.len());
    for (day, &count) in spec.window.days().zip(&day_counts) {
        for _ in 0..count {
            draw_row(&mut rng, &sizes, &sources, &mut codes);
            // Binary attributes without an association source use their shares.
            let sex_male = match sources[2] {
                Some(_) => codes[2] == 0,
                None => rng.bernoulli(spec.records.male_share),
            };
            let near = match sources[5] {
                Some(_) => codes[5] == 0,
                None => rng.bernoulli(spec.records.proximity_share),
            };
            let (lo, hi) = DRIVER_AGES[codes[1]];
            let age = lo + rng.below((hi - lo + 1) as u64) as i64;
            let postcode = format!(
                "{}{} {}{}{}",
                AREAS[codes[0]],
                1 + rng.below(20),
                rng.below(10),
                LETTERS[rng.below(LETTERS.len() as u64) as usize] as char,
                LETTERS[rng.below(LETTERS.len() as u64) as usize] as char,
            );
            let time = format!("{:02}:{:02}", rng.below(24), rng.below(60));
            let text = |s: &str| Some(Value::Text(s.to_string()));
            // Order follows `fields` sorted by LogicalField.
            let values = vec![
                Some(Value::Text(time)),
                text(WEEKDAYS[day.weekday().num_days_from_monday() as usize]),
                Some(Value::Int(age)),
                text(if sex_male { "Male" } else { "Female" }),
                Some(Value::Text(postcode)),
                text(WEATHER[codes[3]]),
                text(VEHICLES[codes[4]]),
                text(if near { "Yes" } else { "No" }),
            ];
            table.push(day, values)?;
        }
    }
    Ok(table)
}

/// Writes records in the standard CSV layout ([`CSV_HEADER`]); dates are
/// written `DD/MM/YYYY`.
pub fn write_records_csv<W: Write>(table: &RecordTable, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    let order = [
        LogicalField::Time,
        LogicalField::DayOfWeek,
        LogicalField::DriverAgeBand,
        LogicalField::DriverSex,
        LogicalField::District,
        LogicalField::Weather,
        LogicalField::VehicleType,
        LogicalField::ProximityFlag,
    ];
    let columns: Vec<&[Option<Value>]> = order
        .iter()
        .map(|f| {
            table
                .column(*f)
                .ok_or_else(|| Error::schema(format!("record table lacks field `{f}`")))
        })
        .collect::<Result<_>>()?;
    let mut record = Vec::with_capacity(CSV_HEADER.len());
    for (i, d) in table.dates().iter().enumerate() {
        record.clear();
        record.push(d.format("%d/%m/%Y").to_string());
        for col in &columns {
            record.push(col[i].as_ref().map(|v| v.label()).unwrap_or_default());
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// Monthly counts `round(max(0, level(t) + noise))`.
pub fn gen_series(spec: &SynthSpec) -> Result<CountSeries> {
    spec.validate()?;
    let plan = &spec.trend;
    let months = plan
        .months
        .unwrap_or_else(|| (month_offset(&spec.window, spec.window.to) + 1) as usize);
    if months == 0 {
        return Err(Error::precondition("series length must be positive"));
    }
    let mut rng = Rng::seed_from_u64(spec.seed);
    let counts = (0..months)
        .map(|t| {
            let noise = if plan.noise_sd > 0.0 { plan.noise_sd * rng.normal() } else { 0.0 };
            (trend_level(plan, t as f64) + noise).max(0.0).round() as u64
        })
        .collect();
    Ok(CountSeries {
        granularity: Granularity::Monthly,
        start: NaiveDate::from_ymd_opt(spec.window.from.year(), spec.window.from.month(), 1).unwrap(),
        counts,
    })
}
