use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wq_core::config::{RunConfig, CONFIG_ENV};
use wq_core::geo::LatLon;
use wq_core::models::ModelKind;
use wq_core::pipeline::{self, ForecastRequest, GridRequest, ImportanceRequest, StageOutput};
use wq_core::products::ImportanceMethod;
use wq_core::{Error, Indicator, RegimeKind};

#[derive(Parser)]
#[command(name = "wq", version, about = "Water-quality modelling pipeline")]
struct Cli {
    /// Config file of `key = value` lines (default: $WQ_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set gb.n_rounds=200`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory for all artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Selection {
    /// Model families (`all` or a list such as `gb,lm`).
    #[arg(long)]
    models: Option<String>,
    /// Target indicators (`all` or a list such as `ph,wt`).
    #[arg(long)]
    targets: Option<String>,
    /// Regimes (`st`, `vd` or `st,vd`).
    #[arg(long)]
    regimes: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Band {
    Residual,
    Bootstrap,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Gain,
    Permutation,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset with matching coastline, climate raster and region.
    Synth {
        /// Number of stations.
        #[arg(long)]
        stations: Option<usize>,
        /// Samples per station.
        #[arg(long)]
        samples: Option<usize>,
        /// Generator seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Multiplier on every noise standard deviation.
        #[arg(long)]
        noise_scale: Option<f64>,
    },
    /// Parse and rectify raw station CSV files.
    Ingest {
        /// Comma-separated input CSV paths.
        #[arg(long)]
        data: Option<String>,
        /// Column-name mapping file of `field = column` lines.
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Attach climate-zone and coastal/inland labels.
    Enrich,
    /// Remove outliers and split into train and test sets.
    Clean,
    /// Tune and fit models on the training split.
    Train(Selection),
    /// Compare models on held-out data and write the report.
    Evaluate {
        #[command(flatten)]
        sel: Selection,
        /// Number of split seeds to average over.
        #[arg(long)]
        repeats: Option<u64>,
        /// Append the published reference scores to the text report.
        #[arg(long)]
        reference: bool,
    },
    /// Predict a gridded map for one month.
    Interpolate {
        /// Model family, e.g. `gam` or `gb`.
        #[arg(long)]
        model: ModelKind,
        /// Indicator to map (`ph`, `do`, `sc`, `wt`).
        #[arg(long)]
        indicator: Indicator,
        /// Month, 1-12.
        #[arg(long)]
        month: u8,
        /// Year.
        #[arg(long)]
        year: i32,
        /// Feature regime of the trained model.
        #[arg(long, default_value = "st")]
        regime: RegimeKind,
        /// Cell size in degrees.
        #[arg(long)]
        resolution: Option<f64>,
        /// Fixed companion values for variable-dependent models, e.g.
        /// `do=9,sc=500,wt=15,climate=Csb,geotype=Inland`.
        #[arg(long)]
        companions: Option<String>,
    },
    /// Monthly forecast with a 95% band at one location.
    Forecast {
        /// Model family.
        #[arg(long, default_value = "gam")]
        model: ModelKind,
        /// One indicator; all four when omitted, one file each.
        #[arg(long)]
        indicator: Option<Indicator>,
        /// Latitude in degrees.
        #[arg(long, allow_hyphen_values = true)]
        lat: f64,
        /// Longitude in degrees (negative west).
        #[arg(long, allow_hyphen_values = true)]
        lon: f64,
        /// First year.
        #[arg(long)]
        start: i32,
        /// Last year, inclusive.
        #[arg(long)]
        end: i32,
        /// Uncertainty band method (default from config).
        #[arg(long, value_enum)]
        band: Option<Band>,
    },
    /// Feature-importance report for a trained model.
    Importance {
        /// Model family.
        #[arg(long)]
        model: ModelKind,
        /// Indicator the model predicts.
        #[arg(long)]
        indicator: Indicator,
        /// Feature regime of the trained model.
        #[arg(long, default_value = "st")]
        regime: RegimeKind,
        /// Importance method.
        #[arg(long, value_enum, default_value = "gain")]
        method: Method,
    },
}

fn apply_selection(cfg: &mut RunConfig, sel: &Selection) {
    for (k, v) in [("models", &sel.models), ("targets", &sel.targets), ("regimes", &sel.regimes)] {
        if let Some(v) = v {
            cfg.set(k, v.clone());
        }
    }
}

fn run(cli: Cli) -> wq_core::Result<StageOutput> {
    let config_path = cli.config.or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let mut cfg = RunConfig::load(config_path.as_deref(), &cli.overrides)?;
    if let Some(out) = &cli.out {
        cfg.set("out_dir", out.display().to_string());
    }
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--jobs: {e}")))?;
    }
    let set_opt = |cfg: &mut RunConfig, k: &str, v: Option<String>| {
        if let Some(v) = v {
            cfg.set(k, v);
        }
    };
    match cli.cmd {
        Command::Synth {
            stations,
            samples,
            seed,
            noise_scale,
        } => {
            set_opt(&mut cfg, "synth.stations", stations.map(|v| v.to_string()));
            set_opt(&mut cfg, "synth.samples", samples.map(|v| v.to_string()));
            set_opt(&mut cfg, "synth.seed", seed.map(|v| v.to_string()));
            set_opt(&mut cfg, "synth.noise_scale", noise_scale.map(|v| v.to_string()));
            pipeline::run_synth(&cfg)
        }
        Command::Ingest { data, schema } => {
            set_opt(&mut cfg, "data", data);
            set_opt(&mut cfg, "schema", schema.map(|p| p.display().to_string()));
            pipeline::run_ingest(&cfg)
        }
        Command::Enrich => pipeline::run_enrich(&cfg),
        Command::Clean => pipeline::run_clean(&cfg),
        Command::Train(sel) => {
            apply_selection(&mut cfg, &sel);
            pipeline::run_train(&cfg)
        }
        Command::Evaluate { sel, repeats, reference } => {
            apply_selection(&mut cfg, &sel);
            set_opt(&mut cfg, "repeats", repeats.map(|v| v.to_string()));
            pipeline::run_evaluate(&cfg, reference)
        }
        Command::Interpolate {
            model,
            indicator,
            month,
            year,
            regime,
            resolution,
            companions,
        } => {
            set_opt(&mut cfg, "grid_resolution", resolution.map(|v| v.to_string()));
            set_opt(&mut cfg, "companions", companions);
            pipeline::run_interpolate(
                &cfg,
                GridRequest {
                    model,
                    indicator,
                    regime,
                    month,
                    year,
                },
            )
        }
        Command::Forecast {
            model,
            indicator,
            lat,
            lon,
            start,
            end,
            band,
        } => {
            set_opt(
                &mut cfg,
                "band",
                band.map(|b| match b {
                    Band::Residual => "residual".to_string(),
                    Band::Bootstrap => "bootstrap".to_string(),
                }),
            );
            let indicators = indicator.map_or(Indicator::ALL.to_vec(), |t| vec![t]);
            let mut combined = StageOutput::default();
            for indicator in indicators {
                let out = pipeline::run_forecast(
                    &cfg,
                    ForecastRequest {
                        model,
                        indicator,
                        location: LatLon::new(lat, lon),
                        start_year: start,
                        end_year: end,
                    },
                )?;
                combined.artifacts.extend(out.artifacts);
                if !combined.summary.is_empty() {
                    combined.summary.push('\n');
                }
                combined.summary.push_str(&out.summary);
            }
            Ok(combined)
        }
        Command::Importance {
            model,
            indicator,
            regime,
            method,
        } => pipeline::run_importance(
            &cfg,
            ImportanceRequest {
                model,
                indicator,
                regime,
                method: match method {
                    Method::Gain => ImportanceMethod::Gain,
                    Method::Permutation => ImportanceMethod::Permutation,
                },
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            println!("{}", out.summary);
            for p in out.artifacts {
                println!("  wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error [{}]: {e}", e.category());
            ExitCode::from(match e.category() {
                "config" => 2,
                "stage-input" => 3,
                _ => 1,
            })
        }
    }
}
