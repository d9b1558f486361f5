//! File-based pipeline stages behind the `wq` subcommands. Each stage reads
//! the previous stage's artifacts from the output directory, writes its own
//! and records a manifest with content hashes of everything it touched.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::run_comparison;
use crate::geo::{enrich, ClimateRaster, Coastline, LatLon, Polygon};
use crate::ingest::{parse_csv_files, read_records_file, write_records_file, RegionBounds, Schema};
use crate::models::{cv_rmse, default_grid, tune, ModelKind, TrainedModel};
use crate::preprocess::{assemble, filter_outliers, split, Bounds};
use crate::products::{
    forecast_point, importance_gain, importance_permutation, interpolate_grid, station_sample, BandMethod,
    BoundingBox, Companions, ImportanceMethod, DEFAULT_BOOTSTRAP_RESAMPLES, DEFAULT_PERMUTATION_REPEATS,
    DEFAULT_STATEWIDE_SITES,
};
use crate::synth::{write_bundle, SynthSpec};
use crate::types::{FeatureRegime, GeoType, Indicator, KoppenClass, RegimeKind, SiteLabels};

pub const RECORDS: &str = "records.csv";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const ENRICHED: &str = "enriched.csv";
pub const CLEAN: &str = "clean.csv";
pub const OUTLIERS: &str = "outliers.json";
pub const TRAIN: &str = "train.csv";
pub const TEST: &str = "test.csv";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_TXT: &str = "report.txt";

/// Provenance written next to every stage's outputs. Only `timestamp`
/// changes between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub timestamp: u64,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub config: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageOutput {
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::StageInputMissing(path.to_path_buf()))
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn finish(cfg: &RunConfig, stage: &str, inputs: &[PathBuf], outputs: Vec<PathBuf>, summary: String) -> Result<StageOutput> {
    let hashes = |ps: &[PathBuf]| -> Result<BTreeMap<String, String>> {
        ps.iter().map(|p| Ok((p.display().to_string(), sha256_file(p)?))).collect()
    };
    let manifest = Manifest {
        stage: stage.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        inputs: hashes(inputs)?,
        outputs: hashes(&outputs)?,
        config: cfg.entries().clone(),
    };
    let dir = cfg.out_dir().join("manifests");
    create_dir(&dir)?;
    write_text(&dir.join(format!("{stage}.json")), &serde_json::to_string_pretty(&manifest)?)?;
    Ok(StageOutput {
        artifacts: outputs,
        summary,
    })
}

pub fn synth_spec(cfg: &RunConfig) -> Result<SynthSpec> {
    let d = SynthSpec::default();
    Ok(SynthSpec {
        n_stations: cfg.usize("synth.stations", d.n_stations)?,
        samples_per_station: cfg.usize("synth.samples", d.samples_per_station)?,
        seed: cfg.u64("synth.seed", d.seed)?,
        ..d
    }
    .with_noise_scale(cfg.f64("synth.noise_scale", 1.0)?))
}

/// Synthetic bundle: data, ground truth, coastline, climate raster, region.
pub fn run_synth(cfg: &RunConfig) -> Result<StageOutput> {
    let dir = cfg.out_dir();
    let spec = synth_spec(cfg)?;
    let records = write_bundle(&spec, &dir)?;
    let outputs = ["data.csv", "truth.json", "coastline.csv", "climate.asc", "climate_legend.csv", "region.csv"]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    finish(
        cfg,
        "synth",
        &[],
        outputs,
        format!("generated {} records at {} stations", records.len(), spec.n_stations),
    )
}

pub fn run_ingest(cfg: &RunConfig) -> Result<StageOutput> {
    let paths = cfg.data_paths();
    for p in &paths {
        require(p)?;
    }
    let schema = match cfg.schema_path() {
        Some(p) => {
            require(&p)?;
            Schema::from_file(&p)?
        }
        None => Schema::default(),
    };
    let (records, report) = parse_csv_files(&paths, &schema, &RegionBounds::default())?;
    if records.is_empty() {
        return Err(Error::EmptyInput("no valid records after ingest"));
    }
    let dir = cfg.out_dir();
    create_dir(&dir)?;
    let out = dir.join(RECORDS);
    write_records_file(&out, &records)?;
    let rep = dir.join(INGEST_REPORT);
    write_text(&rep, &serde_json::to_string_pretty(&report)?)?;
    let mut inputs = paths.clone();
    inputs.extend(cfg.schema_path());
    finish(
        cfg,
        "ingest",
        &inputs,
        vec![out, rep],
        format!("kept {} of {} rows", report.rows_kept, report.rows_read),
    )
}

pub fn run_enrich(cfg: &RunConfig) -> Result<StageOutput> {
    let dir = cfg.out_dir();
    let input = dir.join(RECORDS);
    let coast_p = cfg.path("coastline", "coastline.csv");
    let grid_p = cfg.path("climate_raster", "climate.asc");
    let legend_p = cfg.path("climate_legend", "climate_legend.csv");
    for p in [&input, &coast_p, &grid_p, &legend_p] {
        require(p)?;
    }
    let mut records = read_records_file(&input)?;
    let coast = Coastline::from_file(&coast_p)?;
    let raster = ClimateRaster::from_files(&grid_p, &legend_p)?;
    enrich(&mut records, &coast, &raster)?;
    let coastal = records
        .iter()
        .filter(|r| r.labels.is_some_and(|l| l.geographical_type == GeoType::Coastal))
        .count();
    let out = dir.join(ENRICHED);
    write_records_file(&out, &records)?;
    finish(
        cfg,
        "enrich",
        &[input, coast_p, grid_p, legend_p],
        vec![out],
        format!("labelled {} records ({coastal} coastal)", records.len()),
    )
}

#[derive(Serialize)]
struct OutlierSummary {
    bounds: BTreeMap<String, Bounds>,
    kept: usize,
    removed: usize,
}

pub fn run_clean(cfg: &RunConfig) -> Result<StageOutput> {
    let dir = cfg.out_dir();
    let input = dir.join(ENRICHED);
    require(&input)?;
    let records = read_records_file(&input)?;
    let o = filter_outliers(&records)?;
    let ratio = cfg.f64("split_ratio", 0.8)?;
    let seed = cfg.u64("split_seed", 0)?;
    let (train, test) = split(&o.kept, ratio, seed)?;
    let paths: Vec<PathBuf> = [CLEAN, OUTLIERS, TRAIN, TEST].iter().map(|f| dir.join(f)).collect();
    write_records_file(&paths[0], &o.kept)?;
    let summary = OutlierSummary {
        bounds: Indicator::ALL
            .iter()
            .map(|i| (i.display_name().to_string(), o.bounds[i.index()]))
            .collect(),
        kept: o.kept.len(),
        removed: o.removed.len(),
    };
    write_text(&paths[1], &serde_json::to_string_pretty(&summary)?)?;
    write_records_file(&paths[2], &train)?;
    write_records_file(&paths[3], &test)?;
    finish(
        cfg,
        "clean",
        &[input],
        paths,
        format!(
            "removed {} outliers; {} train / {} test",
            o.removed.len(),
            train.len(),
            test.len()
        ),
    )
}

pub fn model_file_name(model: ModelKind, target: Indicator, regime: RegimeKind) -> String {
    format!("{}_{}_{}.json", model.token(), target.token(), regime.token())
}

pub fn model_path(cfg: &RunConfig, model: ModelKind, target: Indicator, regime: RegimeKind) -> PathBuf {
    cfg.out_dir().join("models").join(model_file_name(model, target, regime))
}

fn feature_regime(cfg: &RunConfig, target: Indicator, regime: RegimeKind) -> Result<FeatureRegime> {
    Ok(match regime {
        RegimeKind::SpatioTemporal => FeatureRegime::spatio_temporal(target),
        RegimeKind::VariableDependent => FeatureRegime::variable_dependent(target, cfg.climate_encoding()?),
    })
}

/// Tunes and fits every selected (model, target, regime) on the training split.
pub fn run_train(cfg: &RunConfig) -> Result<StageOutput> {
    let dir = cfg.out_dir();
    let input = dir.join(TRAIN);
    require(&input)?;
    let train = read_records_file(&input)?;
    let cmp = cfg.comparison()?;
    create_dir(&dir.join("models"))?;
    let cells = cmp.cells();
    let outputs: Vec<PathBuf> = cells
        .par_iter()
        .map(|&(m, t, r)| {
            let data = assemble(&train, &feature_regime(cfg, t, r)?)?;
            let grid = cmp
                .tune
                .then(|| cmp.grids.get(&m).cloned().unwrap_or_else(|| default_grid(m)));
            let model = tune(&cmp.spec_for(m)?, &data, grid.as_ref(), cmp.folds, cmp.model_seed)?;
            let path = model_path(cfg, m, t, r);
            model.save(&path)?;
            Ok(path)
        })
        .collect::<Result<_>>()?;
    let n = outputs.len();
    finish(cfg, "train", &[input], outputs, format!("trained {n} models"))
}

pub fn run_evaluate(cfg: &RunConfig, with_reference: bool) -> Result<StageOutput> {
    let dir = cfg.out_dir();
    let input = dir.join(CLEAN);
    require(&input)?;
    let records = read_records_file(&input)?;
    let report = run_comparison(&records, &cfg.comparison()?)?;
    let csv = dir.join(REPORT_CSV);
    report.write_csv_file(&csv)?;
    let txt = dir.join(REPORT_TXT);
    write_text(&txt, &report.render_text(with_reference))?;
    let failed = report.entries.iter().filter(|e| e.outcome.is_err()).count();
    finish(
        cfg,
        "evaluate",
        &[input],
        vec![csv, txt],
        format!("{} cells evaluated, {failed} failed", report.entries.len()),
    )
}

fn load_model(cfg: &RunConfig, m: ModelKind, t: Indicator, r: RegimeKind) -> Result<(PathBuf, TrainedModel)> {
    let p = model_path(cfg, m, t, r);
    require(&p)?;
    let model = TrainedModel::load(&p)?;
    Ok((p, model))
}

/// Parses `do=9, sc=500, wt=15, climate=Csb, geotype=Inland`.
pub fn parse_companions(text: &str) -> Result<Companions> {
    let mut values = Vec::new();
    let (mut climate, mut geo) = (None, None);
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("companions: expected key=value, got `{part}`")))?;
        let (k, v) = (k.trim(), v.trim());
        match k {
            "climate" => climate = Some(v.parse::<KoppenClass>()?),
            "geotype" => geo = Some(v.parse::<GeoType>()?),
            _ => {
                let i: Indicator = k.parse()?;
                let x: f64 = v
                    .parse()
                    .map_err(|_| Error::Config(format!("companions: bad number `{v}`")))?;
                values.push((i, x));
            }
        }
    }
    let (Some(climate_zone), Some(geographical_type)) = (climate, geo) else {
        return Err(Error::Config("companions need climate=<class> and geotype=<Inland|Coastal>".into()));
    };
    Ok(Companions {
        values,
        labels: SiteLabels {
            climate_zone,
            geographical_type,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRequest {
    pub model: ModelKind,
    pub indicator: Indicator,
    pub regime: RegimeKind,
    pub month: u8,
    pub year: i32,
}

pub fn run_interpolate(cfg: &RunConfig, req: GridRequest) -> Result<StageOutput> {
    let (mp, model) = load_model(cfg, req.model, req.indicator, req.regime)?;
    let region_p = cfg.path("region", "region.csv");
    require(&region_p)?;
    let mask = Polygon::from_file(&region_p)?;
    let companions = cfg.raw("companions").map(parse_companions).transpose()?;
    let mut grid = interpolate_grid(
        &model,
        BoundingBox::CALIFORNIA,
        cfg.f64("grid_resolution", 0.1)?,
        req.month,
        req.year,
        &mask,
        companions.as_ref(),
    )?;
    grid.indicator = Some(req.indicator);
    let dir = cfg.out_dir().join("grids");
    create_dir(&dir)?;
    let stem = format!(
        "grid_{}_{}_{}_{}_{:02}",
        req.indicator.token(),
        req.model.token(),
        req.regime.token(),
        req.year,
        req.month
    );
    let (csv, asc) = (dir.join(format!("{stem}.csv")), dir.join(format!("{stem}.asc")));
    grid.write_files(&csv, &asc)?;
    let cells = grid.values.iter().filter(|&&v| v != crate::products::NODATA).count();
    finish(
        cfg,
        "interpolate",
        &[mp, region_p],
        vec![csv, asc],
        format!("{} x {} grid, {cells} cells in region", grid.nrows, grid.ncols),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastRequest {
    pub model: ModelKind,
    pub indicator: Indicator,
    pub location: LatLon,
    pub start_year: i32,
    pub end_year: i32,
}

pub fn run_forecast(cfg: &RunConfig, req: ForecastRequest) -> Result<StageOutput> {
    let (mp, model) = load_model(cfg, req.model, req.indicator, RegimeKind::SpatioTemporal)?;
    let dir = cfg.out_dir();
    let (clean_p, train_p) = (dir.join(CLEAN), dir.join(TRAIN));
    require(&clean_p)?;
    require(&train_p)?;
    let sites = station_sample(
        &read_records_file(&clean_p)?,
        cfg.usize("statewide_sites", DEFAULT_STATEWIDE_SITES)?,
        cfg.u64("split_seed", 0)?,
    );
    let train = assemble(
        &read_records_file(&train_p)?,
        &FeatureRegime::spatio_temporal(req.indicator),
    )?;
    let band = match cfg.raw("band").unwrap_or("residual") {
        "bootstrap" => BandMethod::Bootstrap {
            data: &train,
            resamples: cfg.usize("bootstrap_resamples", DEFAULT_BOOTSTRAP_RESAMPLES)?,
            seed: cfg.u64("model_seed", 0)?,
        },
        _ => BandMethod::Residual {
            rmse: match model.summary.cv_rmse {
                Some(v) => v,
                None => cv_rmse(&model.spec, &train, cfg.usize("folds", 5)?, cfg.u64("model_seed", 0)?)?,
            },
        },
    };
    let series = forecast_point(&model, req.location, req.start_year, req.end_year, band, &sites)?;
    let out = dir.join(format!(
        "forecast_{}_{}_{}_{}.csv",
        req.indicator.token(),
        req.model.token(),
        req.start_year,
        req.end_year
    ));
    series.write_csv_file(&out)?;
    finish(
        cfg,
        "forecast",
        &[mp, clean_p, train_p],
        vec![out],
        format!("{} monthly points", series.points.len()),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportanceRequest {
    pub model: ModelKind,
    pub indicator: Indicator,
    pub regime: RegimeKind,
    pub method: ImportanceMethod,
}

pub fn run_importance(cfg: &RunConfig, req: ImportanceRequest) -> Result<StageOutput> {
    let (mp, model) = load_model(cfg, req.model, req.indicator, req.regime)?;
    let mut inputs = vec![mp];
    let report = match req.method {
        ImportanceMethod::Gain => importance_gain(&model)?,
        ImportanceMethod::Permutation => {
            let test_p = cfg.out_dir().join(TEST);
            require(&test_p)?;
            let data = assemble(&read_records_file(&test_p)?, &feature_regime(cfg, req.indicator, req.regime)?)?;
            inputs.push(test_p);
            importance_permutation(
                &model,
                &data,
                cfg.u64("model_seed", 0)?,
                cfg.usize("permutation_repeats", DEFAULT_PERMUTATION_REPEATS)?,
            )?
        }
    };
    let method = match req.method {
        ImportanceMethod::Gain => "gain",
        ImportanceMethod::Permutation => "permutation",
    };
    let out = cfg.out_dir().join(format!(
        "importance_{}_{}_{}_{method}.csv",
        req.indicator.token(),
        req.model.token(),
        req.regime.token()
    ));
    report.write_csv_file(&out)?;
    let top = report
        .entries
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(String::new(), |(n, v)| format!("; top {n} ({v:.3})"));
    finish(
        cfg,
        "importance",
        &inputs,
        vec![out],
        format!("{} variables{top}", report.entries.len()),
    )
}
