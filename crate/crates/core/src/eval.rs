//! Metrics and the model × indicator × regime comparison report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::write_records;
use crate::matrix::mean;
use crate::models::{default_grid, tune, Grid, GridPoint, ModelKind, ModelSpec};
use crate::preprocess::{assemble, split};
use crate::types::{ClimateEncoding, FeatureRegime, Indicator, RegimeKind, SampleRecord};

fn check_lengths(pred: &[f64], obs: &[f64]) -> Result<()> {
    if pred.len() != obs.len() {
        return Err(Error::LengthMismatch(pred.len(), obs.len()));
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("metric of empty vectors"));
    }
    Ok(())
}

/// Root mean squared error.
pub fn rmse(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check_lengths(pred, obs)?;
    let ss: f64 = pred.iter().zip(obs).map(|(p, o)| (p - o) * (p - o)).sum();
    Ok((ss / pred.len() as f64).sqrt())
}

/// Coefficient of determination with the total sum of squares taken about
/// the mean of `obs`. Can be negative.
pub fn r_squared(pred: &[f64], obs: &[f64]) -> Result<f64> {
    check_lengths(pred, obs)?;
    if obs.len() < 2 {
        return Err(Error::TooFewRecords { needed: 2, got: obs.len() });
    }
    let m = mean(obs);
    let ss_tot: f64 = obs.iter().map(|o| (o - m) * (o - m)).sum();
    if !(ss_tot > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let ss_res: f64 = pred.iter().zip(obs).map(|(p, o)| (p - o) * (p - o)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Test-set RMSE and R² from the published six-model comparison on the full
/// California extract, indexed `[model in report order][indicator][S-T, V-D]`.
pub const REFERENCE_RMSE: [[[f64; 2]; 4]; 6] = [
    [[0.548, 0.498], [1.989, 1.913], [1285.151, 405.445], [5.086, 4.516]],
    [[0.408, 0.378], [1.362, 1.452], [631.505, 257.467], [1.918, 1.859]],
    [[0.446, 0.465], [1.483, 1.856], [733.691, 346.392], [2.234, 2.757]],
    [[0.495, 0.428], [1.718, 1.649], [1273.048, 380.100], [2.524, 2.221]],
    [[0.478, 0.432], [1.686, 1.715], [961.122, 348.542], [2.445, 2.306]],
    [[0.402, 0.376], [1.355, 1.380], [601.385, 247.900], [1.838, 1.738]],
];

pub const REFERENCE_R2: [[[f64; 2]; 4]; 6] = [
    [[0.085, 0.207], [0.059, 0.230], [0.051, 0.210], [0.161, 0.339]],
    [[0.493, 0.542], [0.559, 0.557], [0.771, 0.682], [0.881, 0.900]],
    [[0.393, 0.309], [0.476, 0.275], [0.691, 0.425], [0.838, 0.757]],
    [[0.254, 0.415], [0.298, 0.428], [0.068, 0.306], [0.793, 0.842]],
    [[0.302, 0.402], [0.324, 0.381], [0.469, 0.417], [0.806, 0.830]],
    [[0.507, 0.548], [0.563, 0.599], [0.792, 0.705], [0.890, 0.903]],
];

fn regime_index(r: RegimeKind) -> usize {
    match r {
        RegimeKind::SpatioTemporal => 0,
        RegimeKind::VariableDependent => 1,
    }
}

fn model_index(m: ModelKind) -> usize {
    ModelKind::ALL.iter().position(|&k| k == m).expect("listed kind")
}

/// Published reference `(rmse, r2)` for one cell.
pub fn reference_score(model: ModelKind, indicator: Indicator, regime: RegimeKind) -> (f64, f64) {
    let (m, i, r) = (model_index(model), indicator.index(), regime_index(regime));
    (REFERENCE_RMSE[m][i][r], REFERENCE_R2[m][i][r])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub rmse: f64,
    pub r2: f64,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub model: ModelKind,
    pub indicator: Indicator,
    pub regime: RegimeKind,
    pub seed: u64,
    /// Scores, or the error message of a cell that failed.
    pub outcome: std::result::Result<CellScore, String>,
    pub cv_rmse: Option<f64>,
    pub params: GridPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub split_seeds: Vec<u64>,
    pub model_seed: u64,
    pub split_ratio: f64,
    pub folds: usize,
    pub dataset_sha256: String,
    pub n_records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Ordered by split seed, then model, indicator and regime.
    pub entries: Vec<ReportEntry>,
    pub metadata: ReportMetadata,
}

#[derive(Debug, Clone)]
pub struct ComparisonConfig {
    pub models: Vec<ModelKind>,
    pub targets: Vec<Indicator>,
    pub regimes: Vec<RegimeKind>,
    pub split_seeds: Vec<u64>,
    pub split_ratio: f64,
    pub folds: usize,
    pub model_seed: u64,
    pub climate_encoding: ClimateEncoding,
    /// Fixed overrides applied to every fit of a family.
    pub params: BTreeMap<ModelKind, GridPoint>,
    /// Search grids; families without an entry use [`default_grid`].
    pub grids: BTreeMap<ModelKind, Grid>,
    /// When false every cell fits its family's spec as given.
    pub tune: bool,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            models: ModelKind::ALL.to_vec(),
            targets: Indicator::ALL.to_vec(),
            regimes: RegimeKind::ALL.to_vec(),
            split_seeds: vec![0],
            split_ratio: 0.8,
            folds: 5,
            model_seed: 0,
            climate_encoding: ClimateEncoding::Major,
            params: BTreeMap::new(),
            grids: BTreeMap::new(),
            tune: true,
        }
    }
}

impl ComparisonConfig {
    pub fn spec_for(&self, model: ModelKind) -> Result<ModelSpec> {
        let mut spec = ModelSpec::new(model).with_seed(self.model_seed);
        if let Some(p) = self.params.get(&model) {
            for (k, &v) in p {
                spec.set(k, v)?;
            }
        }
        Ok(spec)
    }

    /// Requested (model, indicator, regime) triples in report order.
    pub fn cells(&self) -> Vec<(ModelKind, Indicator, RegimeKind)> {
        let mut out = Vec::new();
        for &m in &self.models {
            for &t in &self.targets {
                for &r in &self.regimes {
                    out.push((m, t, r));
                }
            }
        }
        out
    }

    fn regime(&self, target: Indicator, kind: RegimeKind) -> FeatureRegime {
        match kind {
            RegimeKind::SpatioTemporal => FeatureRegime::spatio_temporal(target),
            RegimeKind::VariableDependent => FeatureRegime::variable_dependent(target, self.climate_encoding),
        }
    }
}

/// SHA-256 of the canonical CSV serialization of `records`.
pub fn dataset_hash(records: &[SampleRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_records(&mut buf, records)?;
    Ok(hex::encode(Sha256::digest(&buf)))
}

fn run_cell(
    cfg: &ComparisonConfig,
    train: &[SampleRecord],
    test: &[SampleRecord],
    model: ModelKind,
    regime: FeatureRegime,
) -> Result<(CellScore, Option<f64>, GridPoint)> {
    let train_dm = assemble(train, &regime)?;
    let test_dm = assemble(test, &regime)?;
    let base = cfg.spec_for(model)?;
    let grid = cfg
        .tune
        .then(|| cfg.grids.get(&model).cloned().unwrap_or_else(|| default_grid(model)));
    let fitted = tune(&base, &train_dm, grid.as_ref(), cfg.folds, cfg.model_seed)?;
    let pred = fitted.predict(&test_dm)?;
    let score = CellScore {
        rmse: rmse(&pred, &test_dm.y)?,
        r2: r_squared(&pred, &test_dm.y)?,
        n_test: test_dm.n(),
    };
    Ok((score, fitted.summary.cv_rmse, fitted.spec.params))
}

/// Splits `records` once per seed, then tunes, fits and scores every
/// requested (model, indicator, regime) cell. Failing cells are recorded
/// with their error and do not stop the others.
pub fn run_comparison(records: &[SampleRecord], cfg: &ComparisonConfig) -> Result<EvaluationReport> {
    if cfg.split_seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one split seed is required".into()));
    }
    let mut entries = Vec::new();
    for &seed in &cfg.split_seeds {
        let (train, test) = split(records, cfg.split_ratio, seed)?;
        let cells = cfg.cells();
        let results: Vec<ReportEntry> = cells
            .par_iter()
            .map(|&(model, indicator, regime)| {
                let res = run_cell(cfg, &train, &test, model, cfg.regime(indicator, regime));
                let (outcome, cv_rmse, params) = match res {
                    Ok((s, cv, p)) => (Ok(s), cv, p),
                    Err(e) => (Err(e.to_string()), None, GridPoint::new()),
                };
                ReportEntry {
                    model,
                    indicator,
                    regime,
                    seed,
                    outcome,
                    cv_rmse,
                    params,
                }
            })
            .collect();
        entries.extend(results);
    }
    Ok(EvaluationReport {
        entries,
        metadata: ReportMetadata {
            split_seeds: cfg.split_seeds.clone(),
            model_seed: cfg.model_seed,
            split_ratio: cfg.split_ratio,
            folds: cfg.folds,
            dataset_sha256: dataset_hash(records)?,
            n_records: records.len(),
        },
    })
}

pub const REPORT_HEADER: [&str; 7] = ["model", "indicator", "regime", "rmse", "r2", "n_test", "seed"];

impl EvaluationReport {
    pub fn get(&self, model: ModelKind, indicator: Indicator, regime: RegimeKind) -> Option<&ReportEntry> {
        self.entries
            .iter()
            .find(|e| e.model == model && e.indicator == indicator && e.regime == regime)
    }

    /// Mean `(rmse, r2)` over split seeds for one cell; `None` if every seed failed.
    pub fn mean_score(&self, model: ModelKind, indicator: Indicator, regime: RegimeKind) -> Option<(f64, f64)> {
        let ok: Vec<CellScore> = self
            .entries
            .iter()
            .filter(|e| e.model == model && e.indicator == indicator && e.regime == regime)
            .filter_map(|e| e.outcome.as_ref().ok().copied())
            .collect();
        if ok.is_empty() {
            return None;
        }
        let k = ok.len() as f64;
        Some((
            ok.iter().map(|s| s.rmse).sum::<f64>() / k,
            ok.iter().map(|s| s.r2).sum::<f64>() / k,
        ))
    }

    /// CSV with one row per cell and seed; failed cells leave the metrics empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(REPORT_HEADER)?;
        for e in &self.entries {
            let (rmse, r2, n) = match &e.outcome {
                Ok(s) => (s.rmse.to_string(), s.r2.to_string(), s.n_test.to_string()),
                Err(_) => (String::new(), String::new(), String::new()),
            };
            w.write_record([
                e.model.label(),
                e.indicator.display_name(),
                e.regime.label(),
                &rmse,
                &r2,
                &n,
                &e.seed.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<report csv>", e))
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    fn present<T: PartialEq + Copy>(&self, f: impl Fn(&ReportEntry) -> T) -> Vec<T> {
        let mut out = Vec::new();
        for e in &self.entries {
            let v = f(e);
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }

    /// Aligned text tables, rows = models and columns = indicator × regime.
    /// The best value of each column is marked with `*`. With
    /// `with_reference` the published scores follow in the same layout.
    pub fn render_text(&self, with_reference: bool) -> String {
        let models = self.present(|e| e.model);
        let indicators = self.present(|e| e.indicator);
        let regimes = self.present(|e| e.regime);
        let columns: Vec<(Indicator, RegimeKind)> = indicators
            .iter()
            .flat_map(|&i| regimes.iter().map(move |&r| (i, r)))
            .collect();

        let mut out = String::new();
        let _ = writeln!(
            out,
            "split seeds {:?}, model seed {}, dataset sha256 {}",
            self.metadata.split_seeds, self.metadata.model_seed, self.metadata.dataset_sha256
        );
        for (title, pick, lower_better) in [("RMSE", 0usize, true), ("R2", 1, false)] {
            let cell = |m, (i, r): (Indicator, RegimeKind)| {
                self.mean_score(m, i, r).map(|s| if pick == 0 { s.0 } else { s.1 })
            };
            let refs = |m, (i, r): (Indicator, RegimeKind)| {
                let s = reference_score(m, i, r);
                Some(if pick == 0 { s.0 } else { s.1 })
            };
            table(&mut out, &format!("Test {title}"), &models, &columns, lower_better, cell);
            if with_reference {
                table(
                    &mut out,
                    &format!("Published reference {title}"),
                    &models,
                    &columns,
                    lower_better,
                    refs,
                );
            }
        }
        let failures: Vec<&ReportEntry> = self.entries.iter().filter(|e| e.outcome.is_err()).collect();
        if !failures.is_empty() {
            let _ = writeln!(out, "\nFailed cells:");
            for e in failures {
                let _ = writeln!(
                    out,
                    "  {} {} {} seed {}: {}",
                    e.model.label(),
                    e.indicator.display_name(),
                    e.regime.label(),
                    e.seed,
                    e.outcome.as_ref().unwrap_err()
                );
            }
        }
        out
    }
}

fn table(
    out: &mut String,
    title: &str,
    models: &[ModelKind],
    columns: &[(Indicator, RegimeKind)],
    lower_better: bool,
    value: impl Fn(ModelKind, (Indicator, RegimeKind)) -> Option<f64>,
) {
    let best: Vec<Option<f64>> = columns
        .iter()
        .map(|&c| {
            models
                .iter()
                .filter_map(|&m| value(m, c))
                .reduce(|a, b| if (b < a) == lower_better { b } else { a })
        })
        .collect();
    let headers: Vec<String> = columns
        .iter()
        .map(|(i, r)| format!("{} {}", i.display_name(), r.label()))
        .collect();
    let width = headers.iter().map(String::len).max().unwrap_or(0).max(11);
    let _ = writeln!(out, "\n{title}");
    let _ = write!(out, "{:<8}", "Method");
    for h in &headers {
        let _ = write!(out, " {h:>width$}");
    }
    out.push('\n');
    for &m in models {
        let _ = write!(out, "{:<8}", m.label());
        for (c, b) in columns.iter().zip(&best) {
            let s = match value(m, *c) {
                Some(v) if Some(v) == *b => format!("*{v:.3}"),
                Some(v) => format!("{v:.3}"),
                None => "err".to_string(),
            };
            let _ = write!(out, " {s:>width$}");
        }
        out.push('\n');
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(rmse(&[1.0], &[4.0]).unwrap(), 3.0);
        assert_eq!(r_squared(&[1.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.5);
        assert_eq!(r_squared(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn metric_errors() {
        assert!(matches!(rmse(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch(1, 2))));
        assert!(matches!(rmse(&[], &[]), Err(Error::EmptyInput(_))));
        assert!(matches!(r_squared(&[1.0, 2.0], &[3.0, 3.0]), Err(Error::ZeroVariance)));
    }

    #[test]
    fn reference_values() {
        let gb = ModelKind::GradientBoosting;
        assert_eq!(reference_score(gb, Indicator::Ph, RegimeKind::SpatioTemporal).0, 0.402);
        assert_eq!(reference_score(gb, Indicator::Ph, RegimeKind::VariableDependent).0, 0.376);
        assert_eq!(reference_score(gb, Indicator::WaterTemperature, RegimeKind::SpatioTemporal).1, 0.890);
        assert_eq!(reference_score(gb, Indicator::WaterTemperature, RegimeKind::VariableDependent).1, 0.903);
        assert_eq!(reference_score(ModelKind::Linear, Indicator::WaterTemperature, RegimeKind::SpatioTemporal).1, 0.161);
    }
}
