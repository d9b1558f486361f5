//! Parsing of station-record CSV exports, with the error-rectification rules
//! applied on the way in: NA rows dropped, positive longitudes negated when
//! that lands them in the study region, unparseable rows dropped.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{GeoType, Indicator, KoppenClass, SampleRecord, SiteLabels};

/// Header names for each record field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub station_id: String,
    pub latitude: String,
    pub longitude: String,
    pub county: String,
    pub year: String,
    pub month: String,
    pub ph: String,
    pub dissolved_oxygen: String,
    pub specific_conductance: String,
    pub water_temperature: String,
    /// Optional on input.
    pub climate_zone: String,
    /// Optional on input.
    pub geographical_type: String,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            station_id: "StationID".into(),
            latitude: "Latitude".into(),
            longitude: "Longitude".into(),
            county: "County".into(),
            year: "Year".into(),
            month: "Month".into(),
            ph: "pH".into(),
            dissolved_oxygen: "DissolvedOxygen".into(),
            specific_conductance: "SpecificConductance".into(),
            water_temperature: "WaterTemperature".into(),
            climate_zone: "ClimateZone".into(),
            geographical_type: "GeographicalType".into(),
        }
    }
}

impl Schema {
    /// Reads `field = Header Name` lines; unmentioned fields keep their default.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut schema = Schema::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("schema line {}: expected key = value", lineno + 1)))?;
            let value = value.trim().to_string();
            let slot = match key.trim() {
                "station_id" => &mut schema.station_id,
                "latitude" => &mut schema.latitude,
                "longitude" => &mut schema.longitude,
                "county" => &mut schema.county,
                "year" => &mut schema.year,
                "month" => &mut schema.month,
                "ph" => &mut schema.ph,
                "dissolved_oxygen" => &mut schema.dissolved_oxygen,
                "specific_conductance" => &mut schema.specific_conductance,
                "water_temperature" => &mut schema.water_temperature,
                "climate_zone" => &mut schema.climate_zone,
                "geographical_type" => &mut schema.geographical_type,
                other => return Err(Error::Config(format!("unknown schema field `{other}`"))),
            };
            *slot = value;
        }
        Ok(schema)
    }

    fn required(&self) -> [&str; 10] {
        [
            &self.station_id,
            &self.latitude,
            &self.longitude,
            &self.county,
            &self.year,
            &self.month,
            &self.ph,
            &self.dissolved_oxygen,
            &self.specific_conductance,
            &self.water_temperature,
        ]
    }
}

/// Region used to decide whether a sign-flipped longitude is plausible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionBounds {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl RegionBounds {
    pub const CALIFORNIA: RegionBounds = RegionBounds {
        lat_min: 32.5,
        lat_max: 42.1,
        lon_min: -124.5,
        lon_max: -114.1,
    };

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        (self.lat_min..=self.lat_max).contains(&lat) && (self.lon_min..=self.lon_max).contains(&lon)
    }
}

impl Default for RegionBounds {
    fn default() -> Self {
        RegionBounds::CALIFORNIA
    }
}

pub const CAT_NA: &str = "na_indicator";
pub const CAT_UNPARSEABLE: &str = "unparseable";
pub const CAT_OUT_OF_RANGE: &str = "out_of_range";
pub const CAT_LON_NEGATED: &str = "longitude_negated";
pub const CAT_LON_INVALID: &str = "longitude_not_correctable";
pub const CAT_BAD_LABEL: &str = "bad_label";

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub rows_dropped_na: usize,
    pub rows_dropped_invalid: usize,
    pub stations_merged: usize,
    /// Counts per error/correction category. Corrections (kept rows) are
    /// listed here too, e.g. `longitude_negated`.
    pub categories: BTreeMap<String, usize>,
}

impl IngestReport {
    fn bump(&mut self, cat: &str) {
        *self.categories.entry(cat.to_string()).or_default() += 1;
    }

    pub fn corrections(&self) -> usize {
        self.categories.get(CAT_LON_NEGATED).copied().unwrap_or(0) + self.stations_merged
    }

    pub fn merge(&mut self, other: &IngestReport) {
        self.rows_read += other.rows_read;
        self.rows_kept += other.rows_kept;
        self.rows_dropped_na += other.rows_dropped_na;
        self.rows_dropped_invalid += other.rows_dropped_invalid;
        self.stations_merged += other.stations_merged;
        for (k, v) in &other.categories {
            *self.categories.entry(k.clone()).or_default() += v;
        }
    }
}

enum RowOutcome {
    Kept(SampleRecord, bool),
    Na,
    Invalid(&'static str),
}

fn is_na(field: &str) -> bool {
    matches!(
        field.trim(),
        "" | "NA" | "N/A" | "na" | "n/a" | "NaN" | "nan" | "null" | "NULL"
    )
}

struct Columns {
    idx: [usize; 10],
    climate: Option<usize>,
    geotype: Option<usize>,
}

impl Columns {
    fn resolve(headers: &csv::StringRecord, schema: &Schema) -> Result<Self> {
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let mut idx = [0usize; 10];
        for (slot, name) in idx.iter_mut().zip(schema.required()) {
            *slot = find(name).ok_or_else(|| Error::MissingColumn(name.to_string()))?;
        }
        Ok(Columns {
            idx,
            climate: find(&schema.climate_zone),
            geotype: find(&schema.geographical_type),
        })
    }
}

fn parse_row(row: &csv::StringRecord, cols: &Columns, region: &RegionBounds) -> RowOutcome {
    let field = |i: usize| row.get(i).map(str::trim);
    let [sid, lat, lon, county, year, month, ph, dox, sc, wt] = cols.idx;

    let mut values = [0.0f64; 4];
    for (v, i) in values.iter_mut().zip([ph, dox, sc, wt]) {
        match field(i) {
            None => return RowOutcome::Invalid(CAT_UNPARSEABLE),
            Some(s) if is_na(s) => return RowOutcome::Na,
            Some(s) => match s.parse::<f64>() {
                Ok(x) if x.is_finite() => *v = x,
                _ => return RowOutcome::Invalid(CAT_UNPARSEABLE),
            },
        }
    }

    let parsed = (|| {
        Some((
            field(sid)?.parse::<u64>().ok()?,
            field(lat)?.parse::<f64>().ok()?,
            field(lon)?.parse::<f64>().ok()?,
            field(county)?.to_string(),
            field(year)?.parse::<i32>().ok()?,
            field(month)?.parse::<u8>().ok()?,
        ))
    })();
    let Some((station_id, latitude, mut longitude, county, year, month)) = parsed else {
        return RowOutcome::Invalid(CAT_UNPARSEABLE);
    };

    let labels = match (cols.climate.and_then(field), cols.geotype.and_then(field)) {
        (None | Some(""), None | Some("")) => None,
        (Some(c), Some(g)) => match (c.parse::<KoppenClass>(), g.parse::<GeoType>()) {
            (Ok(climate_zone), Ok(geographical_type)) => Some(SiteLabels {
                climate_zone,
                geographical_type,
            }),
            _ => return RowOutcome::Invalid(CAT_BAD_LABEL),
        },
        _ => return RowOutcome::Invalid(CAT_BAD_LABEL),
    };

    let mut corrected = false;
    if longitude >= 0.0 {
        if region.contains(latitude, -longitude) {
            longitude = -longitude;
            corrected = true;
        } else {
            return RowOutcome::Invalid(CAT_LON_INVALID);
        }
    }

    let record = SampleRecord {
        station_id,
        latitude,
        longitude,
        county,
        year,
        month,
        ph: values[0],
        dissolved_oxygen: values[1],
        specific_conductance: values[2],
        water_temperature: values[3],
        labels,
    };
    match record.validate() {
        Ok(()) => RowOutcome::Kept(record, corrected),
        Err(_) => RowOutcome::Invalid(CAT_OUT_OF_RANGE),
    }
}

/// Parses CSV text from any reader.
pub fn parse_reader<R: Read>(
    reader: R,
    schema: &Schema,
    region: &RegionBounds,
) -> Result<(Vec<SampleRecord>, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = Columns::resolve(&headers, schema)?;

    let mut report = IngestReport::default();
    let mut records = Vec::new();
    for row in rdr.records() {
        report.rows_read += 1;
        let outcome = match row {
            Ok(row) => parse_row(&row, &cols, region),
            Err(_) => RowOutcome::Invalid(CAT_UNPARSEABLE),
        };
        match outcome {
            RowOutcome::Kept(rec, corrected) => {
                if corrected {
                    report.bump(CAT_LON_NEGATED);
                }
                report.rows_kept += 1;
                records.push(rec);
            }
            RowOutcome::Na => {
                report.rows_dropped_na += 1;
                report.bump(CAT_NA);
            }
            RowOutcome::Invalid(cat) => {
                report.rows_dropped_invalid += 1;
                report.bump(cat);
            }
        }
    }
    if report.rows_read == 0 {
        return Err(Error::EmptyInput("no data rows"));
    }
    Ok((records, report))
}

pub fn parse_csv(
    path: &Path,
    schema: &Schema,
    region: &RegionBounds,
) -> Result<(Vec<SampleRecord>, IngestReport)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_reader(file, schema, region)
}

/// Parses several files and concatenates them in file-name order.
pub fn parse_csv_files(
    paths: &[PathBuf],
    schema: &Schema,
    region: &RegionBounds,
) -> Result<(Vec<SampleRecord>, IngestReport)> {
    let mut sorted: Vec<&PathBuf> = paths.iter().collect();
    sorted.sort_by(|a, b| a.file_name().cmp(&b.file_name()).then(a.cmp(b)));
    let mut all = Vec::new();
    let mut report = IngestReport::default();
    for p in sorted {
        let (recs, rep) = parse_csv(p, schema, region)?;
        all.extend(recs);
        report.merge(&rep);
    }
    Ok((all, report))
}

fn coord_key(lat: f64, lon: f64) -> (i64, i64) {
    ((lat * 1e4).round() as i64, (lon * 1e4).round() as i64)
}

/// Reassigns every record whose coordinates coincide (to 1e-4 degrees) with
/// another station to the smallest station id at that location. Returns how
/// many distinct station ids were folded into another.
pub fn merge_duplicate_stations(records: &mut [SampleRecord]) -> usize {
    let mut smallest: HashMap<(i64, i64), u64> = HashMap::new();
    for r in records.iter() {
        let e = smallest
            .entry(coord_key(r.latitude, r.longitude))
            .or_insert(r.station_id);
        *e = (*e).min(r.station_id);
    }
    let mut folded = std::collections::BTreeSet::new();
    for r in records.iter_mut() {
        let target = smallest[&coord_key(r.latitude, r.longitude)];
        if r.station_id != target {
            folded.insert((r.station_id, target));
            r.station_id = target;
        }
    }
    folded.len()
}

pub const HEADER: [&str; 12] = [
    "StationID",
    "Latitude",
    "Longitude",
    "County",
    "Year",
    "Month",
    "pH",
    "DissolvedOxygen",
    "SpecificConductance",
    "WaterTemperature",
    "ClimateZone",
    "GeographicalType",
];

/// Writes records in the default-schema CSV layout. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_records<W: Write>(writer: W, records: &[SampleRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(HEADER)?;
    for r in records {
        let (cz, gt) = match r.labels {
            Some(l) => (l.climate_zone.code().to_string(), l.geographical_type.name().to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([
            r.station_id.to_string(),
            r.latitude.to_string(),
            r.longitude.to_string(),
            r.county.clone(),
            r.year.to_string(),
            r.month.to_string(),
            r.ph.to_string(),
            r.dissolved_oxygen.to_string(),
            r.specific_conductance.to_string(),
            r.water_temperature.to_string(),
            cz,
            gt,
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_records_file(path: &Path, records: &[SampleRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(std::io::BufWriter::new(file), records)
}

/// Reads a file previously written by [`write_records_file`].
pub fn read_records_file(path: &Path) -> Result<Vec<SampleRecord>> {
    let (recs, report) = parse_csv(path, &Schema::default(), &RegionBounds::default())?;
    if report.rows_kept != report.rows_read {
        return Err(Error::ModelFormat(format!(
            "{} contains {} rejected rows",
            path.display(),
            report.rows_read - report.rows_kept
        )));
    }
    Ok(recs)
}

/// Convenience used by tests and the pipeline: values in indicator order.
pub fn indicator_values(r: &SampleRecord) -> [f64; 4] {
    Indicator::ALL.map(|i| r.value(i))
}
