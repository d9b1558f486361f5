//! Outlier filtering, train/test splitting and design-matrix assembly.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::IngestReport;
use crate::matrix::{mean, sample_variance, Matrix};
use crate::types::{
    ClimateEncoding, FeatureRegime, GeoType, Indicator, KoppenClass, MajorClimate, RegimeKind,
    SampleRecord,
};

/// z-value of the two-sided 95% interval.
pub const Z_95: f64 = 1.96;

pub const SPATIO_TEMPORAL_COLUMNS: [&str; 4] = ["Month", "Year", "Latitude", "Longitude"];
pub const CLIMATE_GROUP: &str = "Climate Zone";
pub const GEOTYPE_GROUP: &str = "Geographical Type";

/// Cleaned, enriched records plus where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<SampleRecord>,
    pub split_seed: u64,
    pub provenance: Option<IngestReport>,
}

impl Dataset {
    pub fn new(records: Vec<SampleRecord>, split_seed: u64) -> Result<Self> {
        if let Some(i) = records.iter().position(|r| !r.is_enriched()) {
            return Err(Error::UnenrichedRecord(i));
        }
        Ok(Dataset {
            records,
            split_seed,
            provenance: None,
        })
    }

    pub fn split(&self, ratio: f64) -> Result<(Vec<SampleRecord>, Vec<SampleRecord>)> {
        split(&self.records, ratio, self.split_seed)
    }
}

/// Symmetric acceptance interval `center ± half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub center: f64,
    pub half_width: f64,
}

impl Bounds {
    pub fn lo(&self) -> f64 {
        self.center - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.center + self.half_width
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo() && v <= self.hi()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierSplit {
    pub kept: Vec<SampleRecord>,
    pub removed: Vec<SampleRecord>,
    /// Indexed by [`Indicator::index`].
    pub bounds: [Bounds; 4],
}

/// Per-indicator `mean ± 1.96·sd` over the pooled input; a record is dropped
/// when any of its indicators lies strictly outside its interval.
pub fn outlier_bounds(records: &[SampleRecord]) -> Result<[Bounds; 4]> {
    if records.len() < 2 {
        return Err(Error::EmptyInput("outlier filtering needs at least two records"));
    }
    Ok(Indicator::ALL.map(|ind| {
        let xs: Vec<f64> = records.iter().map(|r| r.value(ind)).collect();
        let (lo, hi) = xs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        if lo == hi {
            return Bounds {
                center: lo,
                half_width: 0.0,
            };
        }
        let m = mean(&xs);
        Bounds {
            center: m,
            half_width: Z_95 * sample_variance(&xs, m).sqrt(),
        }
    }))
}

pub fn filter_outliers(records: &[SampleRecord]) -> Result<OutlierSplit> {
    let bounds = outlier_bounds(records)?;
    let (kept, removed) = records
        .iter()
        .cloned()
        .partition(|r| Indicator::ALL.iter().all(|&i| bounds[i.index()].contains(r.value(i))));
    Ok(OutlierSplit {
        kept,
        removed,
        bounds,
    })
}

/// Row indices of a seeded uniform train/test partition. Both halves are
/// returned in ascending index order.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 5 {
        return Err(Error::TooFewRecords { needed: 5, got: n });
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!("split ratio {ratio} not in (0, 1)")));
    }
    let n_train = (ratio * n as f64 + 1e-9).floor() as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(
    records: &[SampleRecord],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<SampleRecord>, Vec<SampleRecord>)> {
    let (tr, te) = split_indices(records.len(), ratio, seed)?;
    Ok((
        tr.iter().map(|&i| records[i].clone()).collect(),
        te.iter().map(|&i| records[i].clone()).collect(),
    ))
}

/// A one-hot encoded categorical variable occupying consecutive columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneHotGroup {
    pub name: String,
    pub columns: Vec<usize>,
}

/// Column names plus categorical grouping of a design matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct FeatureLayout {
    pub columns: Vec<String>,
    pub groups: Vec<OneHotGroup>,
}

impl FeatureLayout {
    pub fn numeric(columns: Vec<String>) -> Self {
        FeatureLayout {
            columns,
            groups: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn group_of(&self, col: usize) -> Option<&OneHotGroup> {
        self.groups.iter().find(|g| g.columns.contains(&col))
    }

    /// Original variables in column order: each numeric column by itself,
    /// each one-hot group once (at its first column).
    pub fn variables(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        for (j, name) in self.columns.iter().enumerate() {
            match self.group_of(j) {
                Some(g) if g.columns[0] == j => out.push((g.name.clone(), g.columns.clone())),
                Some(_) => {}
                None => out.push((name.clone(), vec![j])),
            }
        }
        out
    }

    /// True when the layout is exactly the spatio-temporal column set.
    pub fn is_spatio_temporal(&self) -> bool {
        self.groups.is_empty() && self.columns.iter().map(String::as_str).eq(SPATIO_TEMPORAL_COLUMNS)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub layout: FeatureLayout,
    pub regime: Option<FeatureRegime>,
}

impl DesignMatrix {
    /// Plain numeric matrix with generated column names `x0, x1, ...`.
    pub fn numeric(x: Matrix, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::LengthMismatch(x.rows(), y.len()));
        }
        let names = (0..x.cols()).map(|j| format!("x{j}")).collect();
        Ok(DesignMatrix {
            x,
            y,
            layout: FeatureLayout::numeric(names),
            regime: None,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn select_rows(&self, idx: &[usize]) -> DesignMatrix {
        DesignMatrix {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            layout: self.layout.clone(),
            regime: self.regime,
        }
    }

    /// CSV dump: header = column names plus the target, then one row per sample.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let target = self
            .regime
            .map_or("y".to_string(), |r| r.target.display_name().to_string());
        let mut header = self.layout.columns.clone();
        header.push(target);
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut row: Vec<String> = self.x.row(i).iter().map(|v| v.to_string()).collect();
            row.push(self.y[i].to_string());
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Column layout for a regime. Fixed order: month, year, latitude, longitude,
/// then (V-D only) the three companion indicators in indicator order, the
/// climate one-hot block and the geographical-type one-hot block.
pub fn regime_layout(regime: &FeatureRegime) -> FeatureLayout {
    let mut columns: Vec<String> = SPATIO_TEMPORAL_COLUMNS.iter().map(|s| s.to_string()).collect();
    let mut groups = Vec::new();
    if regime.kind == RegimeKind::VariableDependent {
        columns.extend(regime.companions().map(|i| i.display_name().to_string()));
        let climate_levels: Vec<&str> = match regime.climate_encoding {
            ClimateEncoding::Major => MajorClimate::ALL.iter().map(|m| m.code()).collect(),
            ClimateEncoding::Sub => KoppenClass::ALL.iter().map(|k| k.code()).collect(),
            ClimateEncoding::None => Vec::new(),
        };
        if !climate_levels.is_empty() {
            let start = columns.len();
            columns.extend(climate_levels.iter().map(|l| format!("{CLIMATE_GROUP}={l}")));
            groups.push(OneHotGroup {
                name: CLIMATE_GROUP.into(),
                columns: (start..columns.len()).collect(),
            });
        }
        let start = columns.len();
        columns.extend(GeoType::ALL.iter().map(|g| format!("{GEOTYPE_GROUP}={}", g.name())));
        groups.push(OneHotGroup {
            name: GEOTYPE_GROUP.into(),
            columns: (start..columns.len()).collect(),
        });
    }
    FeatureLayout { columns, groups }
}

fn feature_row(r: &SampleRecord, idx: usize, regime: &FeatureRegime, out: &mut Vec<f64>) -> Result<()> {
    out.extend([r.month as f64, r.year as f64, r.latitude, r.longitude]);
    if regime.kind == RegimeKind::SpatioTemporal {
        return Ok(());
    }
    let labels = r.labels.ok_or(Error::UnenrichedRecord(idx))?;
    out.extend(regime.companions().map(|i| r.value(i)));
    match regime.climate_encoding {
        ClimateEncoding::Major => {
            let m = labels.climate_zone.major();
            out.extend(MajorClimate::ALL.iter().map(|&c| f64::from(u8::from(c == m))));
        }
        ClimateEncoding::Sub => {
            out.extend(KoppenClass::ALL.iter().map(|&c| f64::from(u8::from(c == labels.climate_zone))));
        }
        ClimateEncoding::None => {}
    }
    out.extend(GeoType::ALL.iter().map(|&g| f64::from(u8::from(g == labels.geographical_type))));
    Ok(())
}

/// Builds the design matrix for `regime`. Spatio-temporal matrices only use
/// coordinates and time, so they accept unenriched records.
pub fn assemble(records: &[SampleRecord], regime: &FeatureRegime) -> Result<DesignMatrix> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no records to assemble"));
    }
    let layout = regime_layout(regime);
    let mut data = Vec::with_capacity(records.len() * layout.len());
    for (i, r) in records.iter().enumerate() {
        feature_row(r, i, regime, &mut data)?;
    }
    Ok(DesignMatrix {
        x: Matrix::from_vec(records.len(), layout.len(), data)?,
        y: records.iter().map(|r| r.value(regime.target)).collect(),
        layout,
        regime: Some(*regime),
    })
}

/// Spatio-temporal feature row for an arbitrary place and time.
pub fn spatio_temporal_row(month: u8, year: i32, lat: f64, lon: f64) -> [f64; 4] {
    [month as f64, year as f64, lat, lon]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::SiteLabels;

    fn table_row() -> SampleRecord {
        SampleRecord {
            station_id: 1,
            latitude: 37.8019,
            longitude: -121.6203,
            county: "Alameda".into(),
            year: 1975,
            month: 1,
            ph: 6.9,
            dissolved_oxygen: 11.1,
            specific_conductance: 415.0,
            water_temperature: 8.9,
            labels: Some(SiteLabels {
                climate_zone: KoppenClass::BSk,
                geographical_type: GeoType::Inland,
            }),
        }
    }

    #[test]
    fn constant_indicators_remove_nothing() {
        let recs = vec![table_row(); 20];
        let out = filter_outliers(&recs).unwrap();
        assert_eq!(out.kept.len(), 20);
        assert!(out.removed.is_empty());
        assert!(out.bounds.iter().all(|b| b.half_width == 0.0));
    }

    #[test]
    fn absurd_temperature_is_removed() {
        use rand_distr::{Distribution, Normal};
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(15.0, 5.0).unwrap();
        let mut recs: Vec<SampleRecord> = (0..200)
            .map(|_| {
                let mut r = table_row();
                r.water_temperature = normal.sample(&mut rng);
                r
            })
            .collect();
        recs[17].water_temperature = 1000.0;
        let out = filter_outliers(&recs).unwrap();
        assert!(out.removed.iter().any(|r| r.water_temperature == 1000.0));
        assert!(out.kept.iter().all(|r| r.water_temperature < 100.0));
    }

    #[test]
    fn filter_needs_two_records() {
        assert!(matches!(filter_outliers(&[table_row()]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn split_sizes() {
        let (tr, te) = split_indices(64185, 0.8, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (51348, 12837));
        let (tr, te) = split_indices(10, 0.8, 1).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        assert!(matches!(split_indices(4, 0.8, 1), Err(Error::TooFewRecords { .. })));
    }

    #[test]
    fn split_is_seeded() {
        let a = split_indices(100, 0.8, 42).unwrap();
        let b = split_indices(100, 0.8, 42).unwrap();
        let c = split_indices(100, 0.8, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn spatio_temporal_row_of_table_record() {
        let dm = assemble(&[table_row()], &FeatureRegime::spatio_temporal(Indicator::Ph)).unwrap();
        assert_eq!(dm.x.row(0), &[1.0, 1975.0, 37.8019, -121.6203]);
        assert_eq!(dm.y, vec![6.9]);
        assert!(dm.layout.is_spatio_temporal());
    }

    #[test]
    fn variable_dependent_row_of_table_record() {
        let regime = FeatureRegime::variable_dependent(Indicator::Ph, ClimateEncoding::Major);
        let dm = assemble(&[table_row()], &regime).unwrap();
        assert_eq!(
            dm.x.row(0),
            &[1.0, 1975.0, 37.8019, -121.6203, 11.1, 415.0, 8.9, 1.0, 0.0, 0.0, 1.0, 0.0]
        );
        assert_eq!(dm.layout.variables().len(), 9);
    }

    #[test]
    fn unenriched_rejected_for_vd_only() {
        let mut r = table_row();
        r.labels = None;
        let vd = FeatureRegime::variable_dependent(Indicator::Ph, ClimateEncoding::Major);
        assert!(matches!(assemble(&[r.clone()], &vd), Err(Error::UnenrichedRecord(0))));
        assert!(assemble(&[r], &FeatureRegime::spatio_temporal(Indicator::Ph)).is_ok());
        assert!(matches!(assemble(&[], &vd), Err(Error::EmptyInput(_))));
    }
}
