//! Derived products: gridded maps, point forecasts with a 95% band, and
//! feature-importance reports.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::rmse;
use crate::geo::{format_ascii_grid, GridHeader, LatLon, Polygon};
use crate::matrix::Matrix;
use crate::models::{fit, ModelKind, ModelSpec, TrainedModel};
use crate::preprocess::{DesignMatrix, FeatureLayout, CLIMATE_GROUP, GEOTYPE_GROUP, SPATIO_TEMPORAL_COLUMNS, Z_95};
use crate::types::{Indicator, SampleRecord, SiteLabels};

pub const NODATA: f64 = -9999.0;
/// Smallest half-width of a residual band.
pub const MIN_BAND_HALF_WIDTH: f64 = 1e-12;
pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 30;
pub const DEFAULT_STATEWIDE_SITES: usize = 500;
pub const DEFAULT_PERMUTATION_REPEATS: usize = 5;

/// Fixed values for the variable-dependent predictors, used when a map or
/// forecast is requested from a variable-dependent model.
#[derive(Debug, Clone, PartialEq)]
pub struct Companions {
    pub values: Vec<(Indicator, f64)>,
    pub labels: SiteLabels,
}

/// Feature row for `layout` at one place and time.
pub fn feature_row(
    layout: &FeatureLayout,
    month: u8,
    year: i32,
    lat: f64,
    lon: f64,
    companions: Option<&Companions>,
) -> Result<Vec<f64>> {
    let need = |what: &str| {
        Error::RegimeMismatch(format!(
            "model uses `{what}`; only spatio-temporal models can be evaluated without companion values"
        ))
    };
    layout
        .columns
        .iter()
        .map(|name| {
            let st = [month as f64, year as f64, lat, lon];
            if let Some(k) = SPATIO_TEMPORAL_COLUMNS.iter().position(|c| c == name) {
                return Ok(st[k]);
            }
            let c = companions.ok_or_else(|| need(name))?;
            if let Some((_, v)) = c.values.iter().find(|(i, _)| i.display_name() == name) {
                return Ok(*v);
            }
            if let Some(level) = name.strip_prefix(&format!("{CLIMATE_GROUP}=")) {
                let z = c.labels.climate_zone;
                return Ok(f64::from(u8::from(level == z.code() || level == z.major().code())));
            }
            if let Some(level) = name.strip_prefix(&format!("{GEOTYPE_GROUP}=")) {
                return Ok(f64::from(u8::from(level == c.labels.geographical_type.name())));
            }
            Err(need(name))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    pub const CALIFORNIA: BoundingBox = BoundingBox {
        lat_min: 32.5,
        lat_max: 42.0,
        lon_min: -124.4,
        lon_max: -114.1,
    };

    /// `(nrows, ncols)` at `resolution` degrees per cell.
    pub fn dims(&self, resolution: f64) -> (usize, usize) {
        let n = |extent: f64| ((extent / resolution - 1e-9).ceil() as usize).max(1);
        (n(self.lat_max - self.lat_min), n(self.lon_max - self.lon_min))
    }
}

/// Model predictions at cell centers, row-major with row 0 northernmost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridProduct {
    pub bbox: BoundingBox,
    pub resolution: f64,
    pub month: u8,
    pub year: i32,
    pub indicator: Option<Indicator>,
    pub model: ModelKind,
    pub nrows: usize,
    pub ncols: usize,
    pub values: Vec<f64>,
}

impl GridProduct {
    pub fn cell_center(&self, row: usize, col: usize) -> LatLon {
        LatLon::new(
            self.bbox.lat_max - (row as f64 + 0.5) * self.resolution,
            self.bbox.lon_min + (col as f64 + 0.5) * self.resolution,
        )
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.ncols + col]
    }

    pub fn header(&self) -> GridHeader {
        GridHeader {
            ncols: self.ncols,
            nrows: self.nrows,
            xll: self.bbox.lon_min,
            yll: self.bbox.lat_max - self.nrows as f64 * self.resolution,
            cellsize: self.resolution,
            nodata: NODATA,
        }
    }

    pub fn to_ascii(&self) -> String {
        format_ascii_grid(&self.header(), &self.values)
    }

    /// `lat,lon,value` for every in-mask cell, north to south, west to east.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["lat", "lon", "value"])?;
        for r in 0..self.nrows {
            for c in 0..self.ncols {
                let v = self.get(r, c);
                if v != NODATA {
                    let p = self.cell_center(r, c);
                    w.write_record([p.lat.to_string(), p.lon.to_string(), v.to_string()])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("<grid csv>", e))
    }

    pub fn write_files(&self, csv_path: &Path, ascii_path: &Path) -> Result<()> {
        let f = std::fs::File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
        self.write_csv(std::io::BufWriter::new(f))?;
        std::fs::write(ascii_path, self.to_ascii()).map_err(|e| Error::io(ascii_path, e))
    }
}

/// Predicts every cell whose center lies inside `mask` at a fixed month and
/// year. Cells outside the mask hold [`NODATA`].
pub fn interpolate_grid(
    model: &TrainedModel,
    bbox: BoundingBox,
    resolution: f64,
    month: u8,
    year: i32,
    mask: &Polygon,
    companions: Option<&Companions>,
) -> Result<GridProduct> {
    if !(resolution > 0.0) || !(bbox.lat_max > bbox.lat_min) || !(bbox.lon_max > bbox.lon_min) {
        return Err(Error::InvalidArgument("grid needs a positive resolution and extent".into()));
    }
    if !(1..=12).contains(&month) {
        return Err(Error::InvalidArgument(format!("month {month} outside 1..=12")));
    }
    let (nrows, ncols) = bbox.dims(resolution);
    let mut grid = GridProduct {
        bbox,
        resolution,
        month,
        year,
        indicator: None,
        model: model.kind(),
        nrows,
        ncols,
        values: vec![NODATA; nrows * ncols],
    };
    let cells: Vec<usize> = (0..nrows * ncols)
        .filter(|&k| mask.contains(grid.cell_center(k / ncols, k % ncols)))
        .collect();
    if cells.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut data = Vec::with_capacity(cells.len() * model.layout.len());
    for &k in &cells {
        let p = grid.cell_center(k / ncols, k % ncols);
        data.extend(feature_row(&model.layout, month, year, p.lat, p.lon, companions)?);
    }
    let x = Matrix::from_vec(cells.len(), model.layout.len(), data)?;
    let pred = model.predict_matrix(&x)?;
    for (&k, v) in cells.iter().zip(pred) {
        grid.values[k] = v;
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastPoint {
    pub year: i32,
    pub month: u8,
    pub prediction: f64,
    pub lo: f64,
    pub hi: f64,
    /// Mean prediction over the statewide site sample; NaN without sites.
    pub statewide_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSeries {
    pub location: LatLon,
    pub start_year: i32,
    pub end_year: i32,
    pub points: Vec<ForecastPoint>,
}

impl ForecastSeries {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["year", "month", "prediction", "lo", "hi", "statewide_mean"])?;
        for p in &self.points {
            w.write_record([
                p.year.to_string(),
                p.month.to_string(),
                p.prediction.to_string(),
                p.lo.to_string(),
                p.hi.to_string(),
                p.statewide_mean.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<forecast csv>", e))
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// How the 95% band around a forecast is formed.
#[derive(Debug, Clone, Copy)]
pub enum BandMethod<'a> {
    /// `prediction ± 1.96 · rmse`, typically the cross-validated RMSE.
    Residual { rmse: f64 },
    /// Pointwise 2.5/97.5 percentiles of `resamples` refits on bootstrap
    /// resamples of `data`, widened to contain the prediction.
    Bootstrap {
        data: &'a DesignMatrix,
        resamples: usize,
        seed: u64,
    },
}

/// Sorted distinct station coordinates, a seeded subset of at most `max`.
pub fn station_sample(records: &[SampleRecord], max: usize, seed: u64) -> Vec<LatLon> {
    let set: BTreeSet<(u64, u64)> = records
        .iter()
        .map(|r| (r.latitude.to_bits(), r.longitude.to_bits()))
        .collect();
    let mut coords: Vec<(u64, u64)> = set.into_iter().collect();
    if coords.len() > max {
        coords.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        coords.truncate(max);
        coords.sort_unstable();
    }
    coords
        .into_iter()
        .map(|(a, b)| LatLon::new(f64::from_bits(a), f64::from_bits(b)))
        .collect()
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn series_matrix(times: &[(i32, u8)], sites: &[LatLon]) -> Result<Matrix> {
    let mut data = Vec::with_capacity(times.len() * sites.len() * 4);
    for &(y, m) in times {
        for s in sites {
            data.extend([m as f64, y as f64, s.lat, s.lon]);
        }
    }
    Matrix::from_vec(times.len() * sites.len(), 4, data)
}

/// Monthly predictions at `location` from January of `start_year` through
/// December of `end_year`, with a 95% band and the mean over `sites`.
pub fn forecast_point(
    model: &TrainedModel,
    location: LatLon,
    start_year: i32,
    end_year: i32,
    band: BandMethod<'_>,
    sites: &[LatLon],
) -> Result<ForecastSeries> {
    if !model.layout.is_spatio_temporal() {
        return Err(Error::RegimeMismatch("forecasts need a spatio-temporal model".into()));
    }
    if start_year > end_year {
        return Err(Error::InvalidArgument(format!("start year {start_year} after end year {end_year}")));
    }
    let times: Vec<(i32, u8)> = (start_year..=end_year).flat_map(|y| (1..=12u8).map(move |m| (y, m))).collect();
    let here = series_matrix(&times, &[location])?;
    let pred = model.predict_matrix(&here)?;

    let (lo, hi): (Vec<f64>, Vec<f64>) = match band {
        BandMethod::Residual { rmse } => {
            let h = (Z_95 * rmse).max(MIN_BAND_HALF_WIDTH);
            pred.iter().map(|p| (p - h, p + h)).unzip()
        }
        BandMethod::Bootstrap { data, resamples, seed } => {
            if resamples < 2 {
                return Err(Error::InvalidArgument("bootstrap needs at least 2 resamples".into()));
            }
            let n = data.n();
            let refits: Vec<Vec<f64>> = (0..resamples as u64)
                .into_par_iter()
                .map(|b| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(b);
                    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                    let spec: ModelSpec = model.spec.clone().with_seed(model.spec.seed.wrapping_add(b));
                    fit(&spec, &data.select_rows(&idx))?.predict_matrix(&here)
                })
                .collect::<Result<_>>()?;
            (0..times.len())
                .map(|t| {
                    let mut v: Vec<f64> = refits.iter().map(|r| r[t]).collect();
                    v.sort_by(f64::total_cmp);
                    (percentile(&v, 0.025).min(pred[t]), percentile(&v, 0.975).max(pred[t]))
                })
                .unzip()
        }
    };

    let statewide: Vec<f64> = if sites.is_empty() {
        vec![f64::NAN; times.len()]
    } else {
        let all = model.predict_matrix(&series_matrix(&times, sites)?)?;
        all.chunks(sites.len())
            .map(|c| c.iter().sum::<f64>() / sites.len() as f64)
            .collect()
    };

    let points = (0..times.len())
        .map(|t| ForecastPoint {
            year: times[t].0,
            month: times[t].1,
            prediction: pred[t],
            lo: lo[t],
            hi: hi[t],
            statewide_mean: statewide[t],
        })
        .collect();
    Ok(ForecastSeries {
        location,
        start_year,
        end_year,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImportanceMethod {
    Gain,
    Permutation,
}

/// Normalized importance per original variable; one-hot groups appear once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub method: ImportanceMethod,
    pub entries: Vec<(String, f64)>,
}

impl ImportanceReport {
    /// Aggregates per-column scores into variables and normalizes them to
    /// sum 1. A report with no mass stays all zeros.
    pub fn from_columns(method: ImportanceMethod, layout: &FeatureLayout, per_column: &[f64]) -> Self {
        let raw: Vec<(String, f64)> = layout
            .variables()
            .into_iter()
            .map(|(name, cols)| (name, cols.iter().map(|&c| per_column[c].max(0.0)).sum()))
            .collect();
        Self::normalized(method, raw)
    }

    fn normalized(method: ImportanceMethod, raw: Vec<(String, f64)>) -> Self {
        let total: f64 = raw.iter().map(|(_, v)| v).sum();
        let entries = raw
            .into_iter()
            .map(|(n, v)| (n, if total > 0.0 { v / total } else { 0.0 }))
            .collect();
        ImportanceReport { method, entries }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v).sum()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "importance"])?;
        for (n, v) in &self.entries {
            w.write_record([n.as_str(), &v.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<importance csv>", e))
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Total split gain per variable, for random forests and gradient boosting.
pub fn importance_gain(model: &TrainedModel) -> Result<ImportanceReport> {
    let gains = model.split_gains()?;
    Ok(ImportanceReport::from_columns(ImportanceMethod::Gain, &model.layout, &gains))
}

/// Mean RMSE increase when a variable's columns are shuffled jointly,
/// clamped at zero and normalized.
pub fn importance_permutation(
    model: &TrainedModel,
    data: &DesignMatrix,
    seed: u64,
    repeats: usize,
) -> Result<ImportanceReport> {
    if data.layout.columns != model.layout.columns {
        return Err(Error::ColumnMismatch {
            expected: model.layout.columns.clone(),
            got: data.layout.columns.clone(),
        });
    }
    if repeats == 0 {
        return Err(Error::InvalidArgument("permutation importance needs at least one repeat".into()));
    }
    let baseline = rmse(&model.predict_matrix(&data.x)?, &data.y)?;
    let vars = model.layout.variables();
    let raw: Vec<(String, f64)> = vars
        .par_iter()
        .enumerate()
        .map(|(v, (name, cols))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(v as u64);
            let mut total = 0.0;
            for _ in 0..repeats {
                let mut perm: Vec<usize> = (0..data.n()).collect();
                perm.shuffle(&mut rng);
                let mut x = data.x.clone();
                for (i, &src) in perm.iter().enumerate() {
                    for &c in cols {
                        x.set(i, c, data.x.get(src, c));
                    }
                }
                total += rmse(&model.predict_matrix(&x)?, &data.y)? - baseline;
            }
            Ok((name.clone(), (total / repeats as f64).max(0.0)))
        })
        .collect::<Result<_>>()?;
    Ok(ImportanceReport::normalized(ImportanceMethod::Permutation, raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{fit, ModelKind, ModelSpec};
    use crate::preprocess::FeatureLayout;

    fn st_model(y: impl Fn(f64, f64) -> f64) -> TrainedModel {
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for i in 0..40 {
            let (lat, lon) = (33.0 + i as f64 * 0.2, -120.0 + (i % 7) as f64 * 0.3);
            rows.push([((i % 12) + 1) as f64, 2000.0 + (i % 5) as f64, lat, lon]);
            ys.push(y(lat, lon));
        }
        let mut d = DesignMatrix::numeric(Matrix::from_rows(&rows).unwrap(), ys).unwrap();
        d.layout = FeatureLayout::numeric(SPATIO_TEMPORAL_COLUMNS.iter().map(|s| s.to_string()).collect());
        fit(&ModelSpec::new(ModelKind::Linear), &d).unwrap()
    }

    fn square(lat0: f64, lat1: f64, lon0: f64, lon1: f64) -> Polygon {
        Polygon::new(vec![
            LatLon::new(lat0, lon0),
            LatLon::new(lat0, lon1),
            LatLon::new(lat1, lon1),
            LatLon::new(lat1, lon0),
        ])
        .unwrap()
    }

    #[test]
    fn single_cell_matches_direct_prediction() {
        let m = st_model(|lat, _| 35.0 - 0.7 * lat);
        let bbox = BoundingBox {
            lat_min: 36.0,
            lat_max: 36.5,
            lon_min: -121.0,
            lon_max: -120.5,
        };
        let g = interpolate_grid(&m, bbox, 0.5, 7, 2023, &square(30.0, 40.0, -125.0, -115.0), None).unwrap();
        assert_eq!((g.nrows, g.ncols), (1, 1));
        let x = Matrix::from_rows(&[[7.0, 2023.0, 36.25, -120.75]]).unwrap();
        assert_eq!(g.values[0], m.predict_matrix(&x).unwrap()[0]);
    }

    #[test]
    fn statewide_dims_and_empty_mask() {
        assert_eq!(BoundingBox::CALIFORNIA.dims(0.1), (95, 103));
        let m = st_model(|lat, _| lat);
        let r = interpolate_grid(&m, BoundingBox::CALIFORNIA, 0.5, 7, 2023, &square(0.0, 1.0, 0.0, 1.0), None);
        assert!(matches!(r, Err(Error::EmptyMask)));
    }

    #[test]
    fn forecast_length_and_band() {
        let m = st_model(|lat, lon| lat + 0.1 * lon);
        let f = forecast_point(
            &m,
            LatLon::new(37.7749, -122.4194),
            2023,
            2023,
            BandMethod::Residual { rmse: 0.0 },
            &[],
        )
        .unwrap();
        assert_eq!(f.points.len(), 12);
        assert!(f.points.iter().all(|p| p.lo < p.prediction && p.prediction < p.hi));
    }

    #[test]
    fn zero_mass_importance_stays_zero() {
        let layout = FeatureLayout::numeric(vec!["a".into(), "b".into()]);
        let r = ImportanceReport::from_columns(ImportanceMethod::Gain, &layout, &[0.0, 0.0]);
        assert_eq!(r.total(), 0.0);
    }
}
