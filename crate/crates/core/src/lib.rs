//! Analysis toolkit for tables of categorical event records.
//!
//! The crate covers three pipelines over the same ingested data:
//!
//! * [`mca`]: multiple correspondence analysis via the Burt matrix, with
//!   principal inertias, category coordinates and per-variable
//!   discrimination measures.
//! * [`stats`]: Welch's two-sample t-test with Welch–Satterthwaite degrees of
//!   freedom, two-sided p-values and confidence intervals.
//! * [`timeseries`]: AR(p) fitting by conditional least squares, AIC order
//!   selection, forecasting and RMSE evaluation.
//!
//! [`tabular`] turns CSV files into typed record tables, [`synth`] generates
//! seeded datasets with planted structure, and [`numkernel`] holds the dense
//! linear algebra used by everything above.

pub mod error;
pub mod format;
pub mod mca;
pub mod numkernel;
pub mod stats;
pub mod svg;
pub mod synth;
pub mod tabular;
pub mod timeseries;

pub use error::{Error, Result};

pub use numkernel::{Matrix, SymEigen};
pub use stats::{SampleSummary, WelchResult};


pub use tabular::{CategoricalTable, CountSeries, DateWindow, RecordTable, SchemaMap};
pub use mca::{BurtMatrix, DiscriminationTable, McaModel};
pub use timeseries::{ArModel, ForecastEval, ForecastMode};
