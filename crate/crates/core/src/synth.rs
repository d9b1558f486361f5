//! Synthetic station data with closed-form ground truth, plus matching
//! geography (coastline, climate raster, region outline).

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{distance_to_coast_km, ClimateLegend, ClimateRaster, Coastline, GridHeader, LatLon, Polygon};
use crate::ingest::write_records_file;
use crate::products::BoundingBox;
use crate::types::{KoppenClass, SampleRecord};

/// Simplified California shoreline, north to south, as (lat, lon).
const COAST: [(f64, f64); 29] = [
    (42.00, -124.21),
    (41.75, -124.20),
    (41.06, -124.14),
    (40.80, -124.16),
    (40.44, -124.41),
    (40.03, -124.07),
    (39.45, -123.81),
    (38.95, -123.74),
    (38.31, -123.05),
    (38.00, -123.02),
    (37.81, -122.53),
    (37.46, -122.44),
    (36.96, -122.02),
    (36.60, -121.89),
    (36.31, -121.90),
    (35.67, -121.28),
    (35.37, -120.86),
    (34.45, -120.47),
    (34.41, -119.69),
    (34.27, -119.29),
    (34.09, -119.06),
    (34.01, -118.50),
    (33.74, -118.41),
    (33.76, -118.19),
    (33.60, -117.88),
    (33.46, -117.71),
    (33.19, -117.38),
    (32.85, -117.27),
    (32.53, -117.12),
];

/// Land border from the Mexican line back to the Oregon line.
const INLAND_BORDER: [(f64, f64); 5] = [
    (32.72, -114.72),
    (34.30, -114.13),
    (35.00, -114.63),
    (39.00, -120.00),
    (42.00, -120.00),
];

pub fn california_coastline() -> Coastline {
    Coastline::new(COAST.iter().map(|&(a, b)| LatLon::new(a, b)).collect()).expect("static coastline")
}

pub fn california_outline() -> Polygon {
    let pts = COAST.iter().chain(&INLAND_BORDER).map(|&(a, b)| LatLon::new(a, b)).collect();
    Polygon::new(pts).expect("static outline")
}

/// Rule-based Köppen zoning that puts all nine classes in plausible places.
pub fn synthetic_climate(p: LatLon) -> KoppenClass {
    let (lat, lon) = (p.lat, p.lon);
    if lat >= 41.0 && lon > -121.0 {
        KoppenClass::Dsc
    } else if lat >= 40.0 && lon > -122.0 {
        KoppenClass::Dsb
    } else if lat >= 37.5 && lon > -120.5 {
        KoppenClass::Dsa
    } else if lon > -116.5 && lat < 35.5 {
        KoppenClass::BWh
    } else if lon > -118.0 && lat < 37.5 {
        KoppenClass::BWk
    } else if lat < 36.0 && lon > -119.5 {
        KoppenClass::BSk
    } else if lon > -120.5 && lat < 38.5 {
        KoppenClass::BSh
    } else if lon < -121.5 && lat > 36.0 {
        KoppenClass::Csb
    } else {
        KoppenClass::Csa
    }
}

/// Raster of [`synthetic_climate`] at cell centers covering `bbox`.
pub fn synthetic_raster(bbox: BoundingBox, cellsize: f64) -> ClimateRaster {
    let (nrows, ncols) = bbox.dims(cellsize);
    let header = GridHeader {
        ncols,
        nrows,
        xll: bbox.lon_min,
        yll: bbox.lat_max - nrows as f64 * cellsize,
        cellsize,
        nodata: -9999.0,
    };
    let legend = ClimateLegend::california();
    let cells = (0..nrows * ncols)
        .map(|k| {
            let (r, c) = (k / ncols, k % ncols);
            let p = LatLon::new(
                bbox.lat_max - (r as f64 + 0.5) * cellsize,
                bbox.lon_min + (c as f64 + 0.5) * cellsize,
            );
            legend.code_of(synthetic_climate(p))
        })
        .collect();
    ClimateRaster::new(header, cells, legend).expect("consistent raster")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureTruth {
    pub intercept: f64,
    pub lat_slope: f64,
    pub seasonal_amplitude: f64,
    pub year_trend: f64,
    pub noise_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OxygenTruth {
    pub intercept: f64,
    /// Decrease per °C of the observed water temperature.
    pub temperature_coupling: f64,
    pub noise_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhTruth {
    pub intercept: f64,
    pub seasonal_amplitude: f64,
    /// Change per degree of latitude away from the bbox midpoint.
    pub lat_slope: f64,
    pub noise_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConductanceTruth {
    pub baseline: f64,
    pub coastal_excess: f64,
    pub decay_km: f64,
    pub noise_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_stations: usize,
    pub samples_per_station: usize,
    pub year_min: i32,
    pub year_max: i32,
    pub bbox: BoundingBox,
    pub seed: u64,
    pub water_temperature: TemperatureTruth,
    pub dissolved_oxygen: OxygenTruth,
    pub ph: PhTruth,
    pub specific_conductance: ConductanceTruth,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_stations: 500,
            samples_per_station: 100,
            year_min: 1956,
            year_max: 2023,
            bbox: BoundingBox::CALIFORNIA,
            seed: 42,
            water_temperature: TemperatureTruth {
                intercept: 35.0,
                lat_slope: 0.7,
                seasonal_amplitude: 5.0,
                year_trend: 0.03,
                noise_sd: 1.0,
            },
            dissolved_oxygen: OxygenTruth {
                intercept: 14.0,
                temperature_coupling: 0.2,
                noise_sd: 0.3,
            },
            ph: PhTruth {
                intercept: 7.8,
                seasonal_amplitude: 0.3,
                lat_slope: 0.15,
                noise_sd: 0.2,
            },
            specific_conductance: ConductanceTruth {
                baseline: 400.0,
                coastal_excess: 3000.0,
                decay_km: 15.0,
                noise_sd: 50.0,
            },
        }
    }
}

impl SynthSpec {
    pub fn with_noise_scale(mut self, k: f64) -> Self {
        self.water_temperature.noise_sd *= k;
        self.dissolved_oxygen.noise_sd *= k;
        self.ph.noise_sd *= k;
        self.specific_conductance.noise_sd *= k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.n_stations == 0 || self.samples_per_station == 0 {
            return bad("need at least one station and one sample per station");
        }
        if self.year_min > self.year_max {
            return bad("year_min after year_max");
        }
        let b = &self.bbox;
        if !(b.lat_min < b.lat_max && b.lon_min < b.lon_max)
            || b.lat_min < -90.0
            || b.lat_max > 90.0
            || b.lon_min < -180.0
            || b.lon_max > 180.0
        {
            return bad("bounding box is empty or off the globe");
        }
        let sds = [
            self.water_temperature.noise_sd,
            self.dissolved_oxygen.noise_sd,
            self.ph.noise_sd,
            self.specific_conductance.noise_sd,
        ];
        if sds.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return bad("noise sd must be finite and non-negative");
        }
        if !(self.specific_conductance.decay_km > 0.0) {
            return bad("conductance decay length must be positive");
        }
        Ok(())
    }

    fn seasonal(month: u8) -> f64 {
        (2.0 * std::f64::consts::PI * (month as f64 - 7.0) / 12.0).sin()
    }

    pub fn wt_truth(&self, lat: f64, year: i32, month: u8) -> f64 {
        let t = &self.water_temperature;
        t.intercept - t.lat_slope * lat + t.seasonal_amplitude * Self::seasonal(month) + t.year_trend * (year - 2000) as f64
    }

    /// Dissolved oxygen given the water temperature actually observed.
    pub fn do_truth(&self, observed_wt: f64) -> f64 {
        self.dissolved_oxygen.intercept - self.dissolved_oxygen.temperature_coupling * observed_wt
    }

    pub fn ph_truth(&self, lat: f64, month: u8) -> f64 {
        let p = &self.ph;
        let mid = 0.5 * (self.bbox.lat_min + self.bbox.lat_max);
        p.intercept + p.seasonal_amplitude * Self::seasonal(month) + p.lat_slope * (lat - mid)
    }

    pub fn sc_truth(&self, coast_km: f64) -> f64 {
        let s = &self.specific_conductance;
        s.baseline + s.coastal_excess * (-coast_km / s.decay_km).exp()
    }
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("validated sd")
}

/// Generates `n_stations × samples_per_station` records. Station `i` draws
/// from its own stream of the seeded generator, so output does not depend on
/// thread count.
pub fn generate(spec: &SynthSpec) -> Result<Vec<SampleRecord>> {
    spec.validate()?;
    let coast = california_coastline();
    let b = spec.bbox;
    let per_station: Vec<Vec<SampleRecord>> = (0..spec.n_stations)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(s as u64);
            let lat = rng.random_range(b.lat_min..=b.lat_max);
            let lon = rng.random_range(b.lon_min..=b.lon_max);
            let coast_km = distance_to_coast_km(LatLon::new(lat, lon), &coast);
            (0..spec.samples_per_station)
                .map(|_| {
                    let year = rng.random_range(spec.year_min..=spec.year_max);
                    let month = rng.random_range(1..=12u8);
                    let wt = spec.wt_truth(lat, year, month) + normal(spec.water_temperature.noise_sd).sample(&mut rng);
                    let dox = spec.do_truth(wt) + normal(spec.dissolved_oxygen.noise_sd).sample(&mut rng);
                    let ph = spec.ph_truth(lat, month) + normal(spec.ph.noise_sd).sample(&mut rng);
                    let sc = spec.sc_truth(coast_km) + normal(spec.specific_conductance.noise_sd).sample(&mut rng);
                    SampleRecord {
                        station_id: s as u64 + 1,
                        latitude: lat,
                        longitude: lon,
                        county: "Synthetic".into(),
                        year,
                        month,
                        ph,
                        dissolved_oxygen: dox,
                        specific_conductance: sc,
                        water_temperature: wt,
                        labels: None,
                    }
                })
                .collect()
        })
        .collect();
    Ok(per_station.concat())
}

/// Writes `data.csv`, `truth.json`, `coastline.csv`, `climate.asc`,
/// `climate_legend.csv` and `region.csv` into `dir`.
pub fn write_bundle(spec: &SynthSpec, dir: &Path) -> Result<Vec<SampleRecord>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let records = generate(spec)?;
    write_records_file(&dir.join("data.csv"), &records)?;
    let truth = dir.join("truth.json");
    std::fs::write(&truth, serde_json::to_string_pretty(spec)?).map_err(|e| Error::io(&truth, e))?;
    california_coastline().write_file(&dir.join("coastline.csv"))?;
    let raster = synthetic_raster(spec.bbox, 0.25);
    let asc = dir.join("climate.asc");
    std::fs::write(&asc, raster.to_ascii()).map_err(|e| Error::io(&asc, e))?;
    raster.legend().write_file(&dir.join("climate_legend.csv"))?;
    california_outline().write_file(&dir.join("region.csv"))?;
    Ok(records)
}
