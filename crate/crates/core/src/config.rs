//! Flat `key = value` run configuration with command-line overrides.
//!
//! Lines are `key = value`; `#` starts a comment. Relative paths resolve
//! against the directory of the config file (or the working directory for
//! overrides and defaults). Recognised keys:
//!
//! | key | default |
//! |---|---|
//! | `out_dir` | `wq-out` |
//! | `data` | `<out_dir>/data.csv` (comma-separated list allowed) |
//! | `schema` | none |
//! | `coastline`, `climate_raster`, `climate_legend`, `region` | `<out_dir>/coastline.csv`, `climate.asc`, `climate_legend.csv`, `region.csv` |
//! | `split_seed`, `split_ratio`, `repeats` | `0`, `0.8`, `1` |
//! | `model_seed`, `folds`, `tune` | `0`, `5`, `true` |
//! | `models`, `targets`, `regimes` | `all`, `all`, `st,vd` |
//! | `climate_encoding` | `major` (`sub`, `none`) |
//! | `<model>.<param>` | family defaults, e.g. `gb.n_rounds = 300` |
//! | `grid.<model>.<param>` | search axis, e.g. `grid.gb.max_depth = 4,6` |
//! | `grid_resolution` | `0.1` |
//! | `band`, `bootstrap_resamples`, `statewide_sites` | `residual`, `30`, `500` |
//! | `permutation_repeats` | `5` |
//! | `companions` | none; required for V-D products, e.g. `ph=7.8, do=9, sc=500, wt=15, climate=Csb, geotype=Inland` |
//! | `synth.stations`, `synth.samples`, `synth.seed`, `synth.noise_scale` | `500`, `100`, `42`, `1` |

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::ComparisonConfig;
use crate::models::{param_table, Grid, GridPoint, ModelKind};
use crate::types::{ClimateEncoding, Indicator, RegimeKind};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "WQ_CONFIG";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    /// Directory that relative paths in `values` resolve against, per key.
    bases: BTreeMap<String, PathBuf>,
}

fn parse_lines(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{origin}:{}: expected key = value", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("{origin}:{}: empty key", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_list<T: FromStr<Err = Error> + Copy>(v: &str, all: &[T]) -> Result<Vec<T>> {
    if v.trim().eq_ignore_ascii_case("all") {
        return Ok(all.to_vec());
    }
    v.split(',').map(|s| s.trim().parse()).collect()
}

impl RunConfig {
    /// Loads `path` (if any) and applies `overrides` (`key=value` strings).
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::Config(format!("config file {} not found", p.display())),
                _ => Error::io(p, e),
            })?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            for (k, v) in parse_lines(&text, &p.display().to_string())? {
                cfg.bases.insert(k.clone(), base.clone());
                cfg.values.insert(k, v);
            }
        }
        for o in overrides {
            for (k, v) in parse_lines(o, "--set")? {
                cfg.bases.remove(&k);
                cfg.values.insert(k, v);
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.bases.remove(key);
        self.values.insert(key.to_string(), value.into());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    fn parsed<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    pub fn u64(&self, key: &str, default: u64) -> Result<u64> {
        self.parsed(key, default)
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize> {
        self.parsed(key, default)
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        self.parsed(key, default)
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key).map(str::to_ascii_lowercase).as_deref() {
            None => Ok(default),
            Some("1" | "true" | "yes" | "on") => Ok(true),
            Some("0" | "false" | "no" | "off") => Ok(false),
            Some(v) => Err(Error::Config(format!("`{key}`: expected a boolean, got `{v}`"))),
        }
    }

    fn resolve(&self, key: &str, v: &str) -> PathBuf {
        let p = PathBuf::from(v);
        match self.bases.get(key) {
            Some(base) if p.is_relative() => base.join(p),
            _ => p,
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.raw("out_dir")
            .map(|v| self.resolve("out_dir", v))
            .unwrap_or_else(|| PathBuf::from("wq-out"))
    }

    /// A path setting, defaulting to `file_name` inside the output directory.
    pub fn path(&self, key: &str, file_name: &str) -> PathBuf {
        match self.raw(key) {
            Some(v) => self.resolve(key, v),
            None => self.out_dir().join(file_name),
        }
    }

    pub fn data_paths(&self) -> Vec<PathBuf> {
        match self.raw("data") {
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| self.resolve("data", s))
                .collect(),
            None => vec![self.out_dir().join("data.csv")],
        }
    }

    pub fn schema_path(&self) -> Option<PathBuf> {
        self.raw("schema").map(|v| self.resolve("schema", v))
    }

    pub fn models(&self) -> Result<Vec<ModelKind>> {
        parse_list(self.raw("models").unwrap_or("all"), &ModelKind::ALL)
    }

    pub fn targets(&self) -> Result<Vec<Indicator>> {
        parse_list(self.raw("targets").unwrap_or("all"), &Indicator::ALL)
    }

    pub fn regimes(&self) -> Result<Vec<RegimeKind>> {
        parse_list(self.raw("regimes").unwrap_or("st,vd"), &RegimeKind::ALL)
    }

    pub fn climate_encoding(&self) -> Result<ClimateEncoding> {
        self.raw("climate_encoding")
            .unwrap_or("major")
            .parse()
            .map_err(|e: Error| Error::Config(format!("`climate_encoding`: {e}")))
    }

    /// Fixed hyperparameters per family from `<model>.<param>` keys.
    pub fn model_params(&self) -> Result<BTreeMap<ModelKind, GridPoint>> {
        let mut out: BTreeMap<ModelKind, GridPoint> = BTreeMap::new();
        for (k, v) in &self.values {
            let Some((m, p)) = k.split_once('.') else { continue };
            let Ok(kind) = m.parse::<ModelKind>() else { continue };
            let x: f64 = v
                .parse()
                .map_err(|_| Error::Config(format!("`{k}`: cannot parse `{v}`")))?;
            out.entry(kind).or_default().insert(p.to_string(), x);
        }
        Ok(out)
    }

    /// Search grids per family from `grid.<model>.<param> = a,b,...` keys.
    pub fn grids(&self) -> Result<BTreeMap<ModelKind, Grid>> {
        let mut axes: BTreeMap<ModelKind, Vec<(String, Vec<f64>)>> = BTreeMap::new();
        for (k, v) in &self.values {
            let Some(rest) = k.strip_prefix("grid.") else { continue };
            let (m, p) = rest
                .split_once('.')
                .ok_or_else(|| Error::Config(format!("`{k}`: expected grid.<model>.<param>")))?;
            let kind: ModelKind = m.parse().map_err(|_| Error::Config(format!("`{k}`: unknown model `{m}`")))?;
            let vals = v
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::Config(format!("`{k}`: cannot parse `{v}`")))?;
            axes.entry(kind).or_default().push((p.to_string(), vals));
        }
        Ok(axes
            .into_iter()
            .map(|(kind, axes)| {
                let mut grid: Grid = vec![GridPoint::new()];
                for (name, vals) in axes {
                    grid = grid
                        .into_iter()
                        .flat_map(|g| {
                            vals.iter().map({
                                let name = name.clone();
                                move |&v| {
                                    let mut g = g.clone();
                                    g.insert(name.clone(), v);
                                    g
                                }
                            })
                        })
                        .collect();
                }
                (kind, grid)
            })
            .collect())
    }

    pub fn comparison(&self) -> Result<ComparisonConfig> {
        let split_seed = self.u64("split_seed", 0)?;
        let repeats = self.u64("repeats", 1)?.max(1);
        Ok(ComparisonConfig {
            models: self.models()?,
            targets: self.targets()?,
            regimes: self.regimes()?,
            split_seeds: (split_seed..split_seed + repeats).collect(),
            split_ratio: self.f64("split_ratio", 0.8)?,
            folds: self.usize("folds", 5)?,
            model_seed: self.u64("model_seed", 0)?,
            climate_encoding: self.climate_encoding()?,
            params: self.model_params()?,
            grids: self.grids()?,
            tune: self.bool("tune", true)?,
        })
    }

    /// Rejects malformed values early so no stage starts on a bad config.
    fn check(&self) -> Result<()> {
        self.models()?;
        self.targets()?;
        self.regimes()?;
        self.climate_encoding()?;
        for (kind, params) in self.model_params()? {
            for name in params.keys() {
                if !param_table(kind).iter().any(|d| d.name == name) {
                    return Err(Error::Config(format!("`{}.{name}` is not a parameter", kind.token())));
                }
            }
        }
        self.grids()?;
        let ratio = self.f64("split_ratio", 0.8)?;
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::Config(format!("`split_ratio` must lie in (0, 1), got {ratio}")));
        }
        if self.usize("folds", 5)? < 2 {
            return Err(Error::Config("`folds` must be at least 2".into()));
        }
        match self.raw("band").unwrap_or("residual") {
            "residual" | "bootstrap" => {}
            v => return Err(Error::Config(format!("`band`: unknown method `{v}`"))),
        }
        Ok(())
    }
}
