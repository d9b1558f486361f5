//! Water-quality prediction toolkit: ingest monitoring-station samples,
//! attach geographic labels, clean and split them, fit and compare six
//! regression families, and derive maps, forecasts and importance reports.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod error;
pub mod eval;
pub mod geo;
pub mod ingest;
pub mod linalg;
pub mod matrix;
pub mod models;
pub mod pipeline;
pub mod preprocess;
pub mod products;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    ClimateEncoding, FeatureRegime, GeoType, Indicator, KoppenClass, MajorClimate, RegimeKind, SampleRecord,
    SiteLabels,
};
