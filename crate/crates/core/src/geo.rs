//! Great-circle distances, coastline proximity and Köppen raster lookup.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{GeoType, KoppenClass, SampleRecord, SiteLabels};

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Stations at or within this distance of the coastline are coastal.
pub const COASTAL_THRESHOLD_KM: f64 = 8.0;

/// Maximum spacing between vertices after coastline densification.
pub const DENSIFY_SPACING_KM: f64 = 1.0;

/// Geographic point in degrees.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        LatLon { lat, lon }
    }
}

pub fn haversine_km(a: LatLon, b: LatLon) -> f64 {
    // absolute differences keep d(a, b) == d(b, a) bit for bit
    let dlat = (a.lat - b.lat).abs().to_radians();
    let dlon = (a.lon - b.lon).abs().to_radians();
    let (la, lb) = (a.lat.to_radians(), b.lat.to_radians());
    let h = (dlat / 2.0).sin().powi(2) + la.cos() * lb.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Ordered coastline vertices. Construction densifies every segment so that
/// consecutive vertices are at most [`DENSIFY_SPACING_KM`] apart.
#[derive(Debug, Clone, PartialEq)]
pub struct Coastline {
    vertices: Vec<LatLon>,
    dense: Vec<LatLon>,
}

impl Coastline {
    pub fn new(vertices: Vec<LatLon>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidGeometry("coastline needs at least two vertices".into()));
        }
        if let Some(w) = vertices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGeometry(format!(
                "repeated coastline vertex ({}, {})",
                w[0].lat, w[0].lon
            )));
        }
        let mut dense = Vec::new();
        for w in vertices.windows(2) {
            let (a, b) = (w[0], w[1]);
            let steps = (haversine_km(a, b) / DENSIFY_SPACING_KM).ceil().max(1.0) as usize;
            for k in 0..steps {
                let t = k as f64 / steps as f64;
                dense.push(LatLon::new(a.lat + t * (b.lat - a.lat), a.lon + t * (b.lon - a.lon)));
            }
        }
        dense.push(*vertices.last().unwrap());
        Ok(Coastline { vertices, dense })
    }

    /// Reads `lon,lat` vertex pairs, one per line. A non-numeric first line is
    /// treated as a header.
    pub fn from_file(path: &Path) -> Result<Self> {
        Coastline::new(read_lonlat_file(path)?)
    }

    pub fn vertices(&self) -> &[LatLon] {
        &self.vertices
    }

    pub fn densified(&self) -> &[LatLon] {
        &self.dense
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        write_lonlat_file(path, &self.vertices)
    }
}

pub(crate) fn read_lonlat_file(path: &Path) -> Result<Vec<LatLon>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let parsed = match (parts.next(), parts.next()) {
            (Some(lon), Some(lat)) => lon.parse::<f64>().ok().zip(lat.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some((lon, lat)) => out.push(LatLon::new(lat, lon)),
            None if i == 0 => continue,
            None => {
                return Err(Error::InvalidGeometry(format!(
                    "{}:{}: expected lon,lat",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

pub(crate) fn write_lonlat_file(path: &Path, pts: &[LatLon]) -> Result<()> {
    let mut s = String::from("lon,lat\n");
    for p in pts {
        s.push_str(&format!("{},{}\n", p.lon, p.lat));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Minimum great-circle distance from `p` to the densified coastline.
pub fn distance_to_coast_km(p: LatLon, coast: &Coastline) -> f64 {
    coast
        .dense
        .iter()
        .map(|&v| haversine_km(p, v))
        .fold(f64::INFINITY, f64::min)
}

pub fn classify_distance(distance_km: f64) -> GeoType {
    if distance_km <= COASTAL_THRESHOLD_KM {
        GeoType::Coastal
    } else {
        GeoType::Inland
    }
}

pub fn classify_geotype(p: LatLon, coast: &Coastline) -> GeoType {
    classify_distance(distance_to_coast_km(p, coast))
}

/// Integer-code → sub-climate mapping for a raster. Codes may name climates
/// outside the nine California classes; those fail at lookup time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClimateLegend {
    codes: BTreeMap<i64, String>,
}

impl ClimateLegend {
    pub fn new(codes: BTreeMap<i64, String>) -> Self {
        ClimateLegend { codes }
    }

    /// Standard legend numbering the nine classes 1..=9.
    pub fn california() -> Self {
        ClimateLegend {
            codes: KoppenClass::ALL
                .iter()
                .enumerate()
                .map(|(i, k)| (i as i64 + 1, k.code().to_string()))
                .collect(),
        }
    }

    /// Reads `code,class` lines; a non-numeric first line is a header.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut codes = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.split_once(',') {
                Some((c, name)) if c.trim().parse::<i64>().is_ok() => {
                    codes.insert(c.trim().parse().unwrap(), name.trim().to_string());
                }
                _ if i == 0 => continue,
                _ => {
                    return Err(Error::InvalidRaster(format!(
                        "{}:{}: expected code,class",
                        path.display(),
                        i + 1
                    )))
                }
            }
        }
        Ok(ClimateLegend { codes })
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let mut s = String::from("code,class\n");
        for (c, name) in &self.codes {
            s.push_str(&format!("{c},{name}\n"));
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn class_of(&self, code: i64) -> Result<KoppenClass> {
        match self.codes.get(&code) {
            Some(name) => name.parse(),
            None => Err(Error::UnknownClimate(code.to_string())),
        }
    }

    pub fn code_of(&self, class: KoppenClass) -> Option<i64> {
        self.codes
            .iter()
            .find(|(_, n)| n.as_str() == class.code())
            .map(|(&c, _)| c)
    }
}

/// Header fields shared by the climate raster and exported grid products.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridHeader {
    pub ncols: usize,
    pub nrows: usize,
    pub xll: f64,
    pub yll: f64,
    pub cellsize: f64,
    pub nodata: f64,
}

/// Plain-text grid: six header lines then `nrows` rows of `ncols` values,
/// first row northernmost.
pub fn parse_ascii_grid(text: &str) -> Result<(GridHeader, Vec<f64>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut header = BTreeMap::new();
    for _ in 0..6 {
        let line = lines
            .next()
            .ok_or_else(|| Error::InvalidRaster("truncated header".into()))?;
        let mut it = line.split_whitespace();
        let (Some(k), Some(v), None) = (it.next(), it.next(), it.next()) else {
            return Err(Error::InvalidRaster(format!("bad header line `{line}`")));
        };
        let v: f64 = v
            .parse()
            .map_err(|_| Error::InvalidRaster(format!("bad header value `{line}`")))?;
        header.insert(k.to_ascii_lowercase(), v);
    }
    let get = |k: &str| {
        header
            .get(k)
            .copied()
            .ok_or_else(|| Error::InvalidRaster(format!("missing header `{k}`")))
    };
    let h = GridHeader {
        ncols: get("ncols")? as usize,
        nrows: get("nrows")? as usize,
        xll: get("xllcorner")?,
        yll: get("yllcorner")?,
        cellsize: get("cellsize")?,
        nodata: get("nodata_value")?,
    };
    if !(h.cellsize > 0.0) {
        return Err(Error::InvalidRaster("cellsize must be positive".into()));
    }
    let mut cells = Vec::with_capacity(h.ncols * h.nrows);
    for line in lines {
        for tok in line.split_whitespace() {
            cells.push(
                tok.parse::<f64>()
                    .map_err(|_| Error::InvalidRaster(format!("bad cell value `{tok}`")))?,
            );
        }
    }
    if cells.len() != h.ncols * h.nrows {
        return Err(Error::InvalidRaster(format!(
            "expected {} cells, found {}",
            h.ncols * h.nrows,
            cells.len()
        )));
    }
    Ok((h, cells))
}

pub fn format_ascii_grid(h: &GridHeader, cells: &[f64]) -> String {
    let mut s = format!(
        "ncols {}\nnrows {}\nxllcorner {}\nyllcorner {}\ncellsize {}\nNODATA_value {}\n",
        h.ncols, h.nrows, h.xll, h.yll, h.cellsize, h.nodata
    );
    for r in 0..h.nrows {
        let row: Vec<String> = cells[r * h.ncols..(r + 1) * h.ncols]
            .iter()
            .map(|v| v.to_string())
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

/// Köppen raster with integer cell codes resolved through a legend.
#[derive(Debug, Clone, PartialEq)]
pub struct ClimateRaster {
    pub header: GridHeader,
    /// Row-major, first row northernmost; `None` is NODATA.
    cells: Vec<Option<i64>>,
    legend: ClimateLegend,
    pub search_radius: usize,
}

impl ClimateRaster {
    pub const DEFAULT_SEARCH_RADIUS: usize = 3;

    pub fn new(header: GridHeader, cells: Vec<Option<i64>>, legend: ClimateLegend) -> Result<Self> {
        if !(header.cellsize > 0.0) {
            return Err(Error::InvalidRaster("cellsize must be positive".into()));
        }
        if cells.len() != header.ncols * header.nrows {
            return Err(Error::InvalidRaster("grid dimensions do not match cell count".into()));
        }
        Ok(ClimateRaster {
            header,
            cells,
            legend,
            search_radius: Self::DEFAULT_SEARCH_RADIUS,
        })
    }

    pub fn parse(text: &str, legend: ClimateLegend) -> Result<Self> {
        let (h, raw) = parse_ascii_grid(text)?;
        let cells = raw
            .into_iter()
            .map(|v| if v == h.nodata { None } else { Some(v.round() as i64) })
            .collect();
        ClimateRaster::new(h, cells, legend)
    }

    pub fn from_files(grid: &Path, legend: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(grid).map_err(|e| Error::io(grid, e))?;
        ClimateRaster::parse(&text, ClimateLegend::from_file(legend)?)
    }

    pub fn to_ascii(&self) -> String {
        let cells: Vec<f64> = self
            .cells
            .iter()
            .map(|c| c.map_or(self.header.nodata, |v| v as f64))
            .collect();
        format_ascii_grid(&self.header, &cells)
    }

    pub fn legend(&self) -> &ClimateLegend {
        &self.legend
    }

    /// (row, col) of the cell containing `p`, possibly outside the grid.
    fn cell_index(&self, p: LatLon) -> (i64, i64) {
        let h = &self.header;
        let top = h.yll + h.nrows as f64 * h.cellsize;
        let row = ((top - p.lat) / h.cellsize).floor() as i64;
        let col = ((p.lon - h.xll) / h.cellsize).floor() as i64;
        (row, col)
    }

    fn cell_center(&self, row: i64, col: i64) -> LatLon {
        let h = &self.header;
        let top = h.yll + h.nrows as f64 * h.cellsize;
        LatLon::new(
            top - (row as f64 + 0.5) * h.cellsize,
            h.xll + (col as f64 + 0.5) * h.cellsize,
        )
    }

    fn code_at(&self, row: i64, col: i64) -> Option<i64> {
        let h = &self.header;
        if row < 0 || col < 0 || row as usize >= h.nrows || col as usize >= h.ncols {
            return None;
        }
        self.cells[row as usize * h.ncols + col as usize]
    }

    /// Class of the cell containing `p`. NODATA (or off-grid) cells fall back
    /// to the classified cell whose center is nearest to the containing
    /// cell's center, within `search_radius` cells. Measuring from the cell
    /// center keeps the result constant across each cell.
    pub fn lookup(&self, p: LatLon) -> Result<KoppenClass> {
        let (row, col) = self.cell_index(p);
        if let Some(code) = self.code_at(row, col) {
            return self.legend.class_of(code);
        }
        let center = self.cell_center(row, col);
        let r = self.search_radius as i64;
        let mut best: Option<(f64, i64)> = None;
        for dr in -r..=r {
            for dc in -r..=r {
                let (rr, cc) = (row + dr, col + dc);
                if let Some(code) = self.code_at(rr, cc) {
                    let d = haversine_km(center, self.cell_center(rr, cc));
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, code));
                    }
                }
            }
        }
        match best {
            Some((_, code)) => self.legend.class_of(code),
            None => Err(Error::OutsideRaster { lat: p.lat, lon: p.lon }),
        }
    }
}

pub fn lookup_climate(p: LatLon, raster: &ClimateRaster) -> Result<KoppenClass> {
    raster.lookup(p)
}

/// Simple polygon (implicitly closed) for region masks.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<LatLon>,
}

impl Polygon {
    pub fn new(vertices: Vec<LatLon>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidGeometry("polygon needs at least three vertices".into()));
        }
        Ok(Polygon { vertices })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Polygon::new(read_lonlat_file(path)?)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        write_lonlat_file(path, &self.vertices)
    }

    pub fn vertices(&self) -> &[LatLon] {
        &self.vertices
    }

    /// Even-odd rule in the lon/lat plane.
    pub fn contains(&self, p: LatLon) -> bool {
        let v = &self.vertices;
        let mut inside = false;
        let mut j = v.len() - 1;
        for i in 0..v.len() {
            let (a, b) = (v[i], v[j]);
            if (a.lat > p.lat) != (b.lat > p.lat) {
                let x = a.lon + (p.lat - a.lat) / (b.lat - a.lat) * (b.lon - a.lon);
                if p.lon < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }
}

/// Attaches climate and geographical labels to every record. Each distinct
/// coordinate is resolved once and shares one label set.
pub fn enrich(records: &mut [SampleRecord], coast: &Coastline, raster: &ClimateRaster) -> Result<()> {
    let mut cache: HashMap<(u64, u64), SiteLabels> = HashMap::new();
    for r in records.iter_mut() {
        let key = (r.latitude.to_bits(), r.longitude.to_bits());
        let labels = match cache.get(&key) {
            Some(l) => *l,
            None => {
                let p = LatLon::new(r.latitude, r.longitude);
                let l = SiteLabels {
                    climate_zone: raster.lookup(p)?,
                    geographical_type: classify_geotype(p, coast),
                };
                cache.insert(key, l);
                l
            }
        };
        r.labels = Some(labels);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haversine_examples() {
        let sf = LatLon::new(37.7749, -122.4194);
        assert_eq!(haversine_km(sf, sf), 0.0);
        let d = haversine_km(LatLon::new(0.0, 0.0), LatLon::new(0.0, 1.0));
        assert!((d - 111.1951).abs() < 1e-4, "{d}");
        let la = LatLon::new(34.0522, -118.2437);
        let d = haversine_km(sf, la);
        assert!((d - 559.1).abs() < 1.0, "{d}");
    }

    #[test]
    fn coastline_validation() {
        assert!(Coastline::new(vec![LatLon::new(1.0, 1.0)]).is_err());
        let p = LatLon::new(1.0, 1.0);
        assert!(Coastline::new(vec![p, p]).is_err());
    }

    #[test]
    fn densified_spacing_is_bounded() {
        let c = Coastline::new(vec![LatLon::new(36.0, -122.0), LatLon::new(37.0, -122.5)]).unwrap();
        for w in c.densified().windows(2) {
            assert!(haversine_km(w[0], w[1]) <= DENSIFY_SPACING_KM + 1e-9);
        }
    }

    #[test]
    fn on_vertex_is_zero() {
        let a = LatLon::new(36.0, -122.0);
        let c = Coastline::new(vec![a, LatLon::new(37.0, -122.0)]).unwrap();
        assert_eq!(distance_to_coast_km(a, &c), 0.0);
    }

    #[test]
    fn boundary_is_inclusive() {
        assert_eq!(classify_distance(7.9), GeoType::Coastal);
        assert_eq!(classify_distance(8.0), GeoType::Coastal);
        assert_eq!(classify_distance(8.1), GeoType::Inland);
    }

    #[test]
    fn nodata_falls_back_to_neighbour() {
        let text = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n-9999 6\n";
        let r = ClimateRaster::parse(text, ClimateLegend::california()).unwrap();
        assert_eq!(r.lookup(LatLon::new(0.5, 0.5)).unwrap(), KoppenClass::Csb);
        assert_eq!(r.lookup(LatLon::new(0.5, 1.5)).unwrap(), KoppenClass::Csb);
    }

    #[test]
    fn far_outside_raster_errors() {
        let text = "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n4\n";
        let r = ClimateRaster::parse(text, ClimateLegend::california()).unwrap();
        assert_eq!(r.lookup(LatLon::new(0.5, 2.5)).unwrap(), KoppenClass::BSk);
        assert!(matches!(r.lookup(LatLon::new(0.5, 10.0)), Err(Error::OutsideRaster { .. })));
    }

    #[test]
    fn unknown_code_errors() {
        let mut codes = BTreeMap::new();
        codes.insert(1, "Af".to_string());
        let text = "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1\n";
        let r = ClimateRaster::parse(text, ClimateLegend::new(codes)).unwrap();
        assert!(matches!(r.lookup(LatLon::new(0.5, 0.5)), Err(Error::UnknownClimate(_))));
        let text = "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n42\n";
        let r = ClimateRaster::parse(text, ClimateLegend::california()).unwrap();
        assert!(matches!(r.lookup(LatLon::new(0.5, 0.5)), Err(Error::UnknownClimate(_))));
    }

    #[test]
    fn raster_shape_checked() {
        let text = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2 3\n";
        assert!(ClimateRaster::parse(text, ClimateLegend::california()).is_err());
        let text = "ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 0\nNODATA_value -9999\n1\n";
        assert!(ClimateRaster::parse(text, ClimateLegend::california()).is_err());
    }

    #[test]
    fn polygon_even_odd() {
        let sq = Polygon::new(vec![
            LatLon::new(0.0, 0.0),
            LatLon::new(0.0, 2.0),
            LatLon::new(2.0, 2.0),
            LatLon::new(2.0, 0.0),
        ])
        .unwrap();
        assert!(sq.contains(LatLon::new(1.0, 1.0)));
        assert!(!sq.contains(LatLon::new(3.0, 1.0)));
        assert!(!sq.contains(LatLon::new(1.0, -0.5)));
    }
}
