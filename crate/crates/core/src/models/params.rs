use crate::error::{Error, Result};

use super::ModelKind;

/// Documented default and valid range of one hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamDef {
    pub name: &'static str,
    pub default: f64,
    pub min: f64,
    pub max: f64,
    /// Lower bound is exclusive.
    pub min_exclusive: bool,
    pub integer: bool,
    pub help: &'static str,
}

const fn p(name: &'static str, default: f64, min: f64, max: f64, integer: bool, help: &'static str) -> ParamDef {
    ParamDef {
        name,
        default,
        min,
        max,
        min_exclusive: false,
        integer,
        help,
    }
}

const fn px(name: &'static str, default: f64, min: f64, max: f64, help: &'static str) -> ParamDef {
    ParamDef {
        name,
        default,
        min,
        max,
        min_exclusive: true,
        integer: false,
        help,
    }
}

const INF: f64 = f64::INFINITY;

const LINEAR: &[ParamDef] = &[];

const RANDOM_FOREST: &[ParamDef] = &[
    p("n_trees", 300.0, 1.0, 100_000.0, true, "number of trees"),
    p("max_depth", 0.0, 0.0, 256.0, true, "maximum tree depth; 0 = unbounded"),
    p("min_samples_leaf", 5.0, 1.0, INF, true, "minimum samples per leaf"),
    p("max_features", 0.0, 0.0, INF, true, "features tried per split; 0 = ceil(p/3)"),
    p("bootstrap", 1.0, 0.0, 1.0, true, "1 = resample rows with replacement per tree"),
    p("max_bins", 256.0, 2.0, 65_535.0, true, "histogram bins per feature"),
];

const GRADIENT_BOOSTING: &[ParamDef] = &[
    p("n_rounds", 500.0, 1.0, 100_000.0, true, "boosting rounds"),
    px("learning_rate", 0.1, 0.0, 100.0, "shrinkage applied to each tree"),
    p("max_depth", 6.0, 0.0, 256.0, true, "maximum tree depth; 0 = unbounded"),
    p("min_samples_leaf", 5.0, 1.0, INF, true, "minimum samples per leaf"),
    px("subsample", 0.8, 0.0, 1.0, "row fraction sampled per round"),
    px("colsample", 0.8, 0.0, 1.0, "column fraction sampled per tree"),
    p("lambda", 1.0, 0.0, INF, false, "L2 penalty on leaf values"),
    p("max_bins", 256.0, 2.0, 65_535.0, true, "histogram bins per feature"),
];

const GAUSSIAN_PROCESS: &[ParamDef] = &[
    p("lengthscale", 0.0, 0.0, INF, false, "shared lengthscale in standardized units; 0 = tune by marginal likelihood"),
    p("signal_variance", 0.0, 0.0, INF, false, "kernel variance; 0 = tune by marginal likelihood"),
    px("nugget_ratio", 1e-2, 0.0, INF, "nugget as a fraction of var(y)"),
    p("max_train_points", 2000.0, 1.0, INF, true, "seeded subsample cap for the exact posterior"),
    p("tune_points", 500.0, 2.0, INF, true, "subsample cap for marginal-likelihood tuning"),
    p("zero_mean", 0.0, 0.0, 1.0, true, "1 = zero prior mean instead of the training mean"),
];

const SUPPORT_VECTOR: &[ParamDef] = &[
    p("epsilon_ratio", 0.1, 0.0, INF, false, "insensitive-tube half width as a fraction of sd(y)"),
    px("c", 1.0, 0.0, INF, "box constraint, in standardized target units"),
    p("gamma", 0.0, 0.0, INF, false, "RBF kernel width; 0 = 1/p"),
    px("tol", 1e-3, 0.0, INF, "maximal-violating-pair stopping tolerance"),
    p("max_train_points", 5000.0, 2.0, INF, true, "seeded subsample cap"),
    p("max_iter", 0.0, 0.0, INF, true, "iteration cap; 0 = max(10^7, 100 n)"),
];

const ADDITIVE: &[ParamDef] = &[
    p("knots", 10.0, 4.0, 200.0, true, "equally spaced knots per numeric feature"),
    p("lambda", 0.0, 0.0, INF, false, "smoothing penalty; 0 = per-feature GCV over a fixed grid"),
    px("tol", 1e-6, 0.0, INF, "backfitting convergence tolerance"),
    p("max_sweeps", 100.0, 1.0, 100_000.0, true, "backfitting sweep cap"),
];

pub fn param_table(kind: ModelKind) -> &'static [ParamDef] {
    match kind {
        ModelKind::Linear => LINEAR,
        ModelKind::RandomForest => RANDOM_FOREST,
        ModelKind::GradientBoosting => GRADIENT_BOOSTING,
        ModelKind::GaussianProcess => GAUSSIAN_PROCESS,
        ModelKind::SupportVector => SUPPORT_VECTOR,
        ModelKind::Additive => ADDITIVE,
    }
}

pub(super) fn lookup(kind: ModelKind, key: &str) -> Result<&'static ParamDef> {
    param_table(kind)
        .iter()
        .find(|d| d.name == key)
        .ok_or_else(|| Error::InvalidHyperparameter {
            name: key.to_string(),
            value: f64::NAN,
            reason: format!("not a parameter of {}", kind.token()),
        })
}

pub(super) fn check(kind: ModelKind, key: &str, value: f64) -> Result<()> {
    let def = lookup(kind, key)?;
    let bad = |reason: String| {
        Err(Error::InvalidHyperparameter {
            name: key.to_string(),
            value,
            reason,
        })
    };
    if value.is_nan() {
        return bad("NaN".into());
    }
    let below = if def.min_exclusive { value <= def.min } else { value < def.min };
    if below || value > def.max {
        let open = if def.min_exclusive { "(" } else { "[" };
        return bad(format!("outside {open}{}, {}]", def.min, def.max));
    }
    if def.integer && value.fract() != 0.0 {
        return bad("must be an integer".into());
    }
    Ok(())
}
