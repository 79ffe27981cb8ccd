//! Flag definitions, the key=value config file, and flag resolution.
//!
//! Every subcommand accepts the same flag set; which flags are required is
//! checked per command. A `--config` file supplies defaults with one
//! `key = value` per line (keys are the long flag names); explicit flags win
//! on conflict.

use std::path::{Path, PathBuf};

use clap::Args;
use gw_core::distance::DistanceMetric;
use gw_core::gwr::SelectionCriterion;
use gw_core::weighting::{Bandwidth, KernelFamily};

use crate::{CliError, CliResult};

#[derive(Args, Clone, Debug, Default)]
pub struct Flags {
    /// Input CSV with a header row
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,

    /// Name of the x (or longitude) coordinate column [default: first column]
    #[arg(long, value_name = "COLUMN")]
    pub x: Option<String>,

    /// Name of the y (or latitude) coordinate column [default: second column]
    #[arg(long, value_name = "COLUMN")]
    pub y: Option<String>,

    /// Treat coordinates as longitude/latitude degrees (great-circle distances)
    #[arg(long)]
    pub geographic: bool,

    /// Dependent variable (regression commands)
    #[arg(long, value_name = "COLUMN")]
    pub dependent: Option<String>,

    /// Comma-separated analysis or predictor variables
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    pub vars: Option<Vec<String>>,

    /// Kernel: global, gaussian, exponential, boxcar, bisquare, tricube
    #[arg(long, value_name = "NAME")]
    pub kernel: Option<String>,

    /// Bandwidth: a number, or "auto" to optimise it (gwr, gwr-lcr, gwpca)
    #[arg(long, value_name = "VALUE|auto")]
    pub bw: Option<String>,

    /// Interpret --bw as a nearest-neighbour count instead of a distance
    #[arg(long)]
    pub adaptive: bool,

    /// Objective for automatic bandwidth selection
    #[arg(long, value_name = "cv|aicc")]
    pub criterion: Option<String>,

    /// Number of retained components (gwpca)
    #[arg(long, value_name = "COUNT")]
    pub k: Option<usize>,

    /// Robust variant: none, filtered, iterative (gwr); none, mcd (gwpca)
    #[arg(long, value_name = "NAME")]
    pub robust: Option<String>,

    /// Condition-number threshold for the compensated ridge [default: 30]
    #[arg(long, value_name = "KAPPA")]
    pub cn_thresh: Option<f64>,

    /// Apply the local ridge adjustment (gwr-lcr)
    #[arg(long)]
    pub adjust: bool,

    /// Include median, interquartile range, and quantile imbalance (gwss)
    #[arg(long)]
    pub quantiles: bool,

    /// CSV of prediction locations and regressors (gwr-predict)
    #[arg(long, value_name = "PATH")]
    pub predict_input: Option<PathBuf>,

    /// Output path [default: stdout]
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Output format
    #[arg(long, value_name = "csv|geojson")]
    pub format: Option<String>,

    /// Random seed for the robust covariance search [default: 42]
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,

    /// Worker thread count [default: all cores]
    #[arg(long, value_name = "COUNT")]
    pub threads: Option<usize>,

    /// Distance cache file: read if present, otherwise computed and written
    #[arg(long, value_name = "PATH")]
    pub dist_cache: Option<PathBuf>,

    /// Great-circle sphere radius in metres [default: WGS84 equatorial]
    #[arg(long, value_name = "METRES")]
    pub earth_radius: Option<f64>,

    /// Minkowski exponent for projected coordinates [default: 2 (Euclidean)]
    #[arg(long, value_name = "P")]
    pub p: Option<f64>,

    /// Config file of key=value lines; explicit flags win on conflict
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Geojson,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Robust {
    None,
    Filtered,
    Iterative,
    Mcd,
}

/// Bandwidth request: an explicit value or an optimiser run.
#[derive(Clone, Copy, Debug)]
pub enum BwSpec {
    Auto,
    Value(Bandwidth),
}

/// Fully resolved run configuration with defaults applied.
pub struct Resolved {
    pub input: PathBuf,
    pub x: Option<String>,
    pub y: Option<String>,
    pub geographic: bool,
    pub dependent: Option<String>,
    pub vars: Vec<String>,
    pub family: KernelFamily,
    pub bw: Option<BwSpec>,
    /// Whether --adaptive was set; for --bw auto it picks the search domain.
    pub adaptive: bool,
    pub criterion: SelectionCriterion,
    pub k: Option<usize>,
    pub robust: Robust,
    pub cn_thresh: f64,
    pub adjust: bool,
    pub quantiles: bool,
    pub predict_input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub seed: u64,
    pub threads: Option<usize>,
    pub dist_cache: Option<PathBuf>,
    pub metric: DistanceMetric,
}

fn parse_bool(key: &str, value: &str) -> CliResult<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(CliError::validation(format!(
            "config key {key}: expected true or false, got {value:?}"
        ))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::validation(format!("config key {key}: cannot parse {value:?}")))
}

/// Reads the config file into (key, value) pairs. Keys are lowercased with
/// dashes normalised to underscores; values lose one layer of quotes.
fn config_entries(path: &Path) -> CliResult<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
    let mut entries = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::validation(format!(
                "config line {}: expected key = value, got {line:?}",
                lineno + 1
            )));
        };
        let key = k.trim().to_lowercase().replace('-', "_");
        let mut value = v.trim();
        if value.len() >= 2
            && ((value.starts_with('"') && value.ends_with('"'))
                || (value.starts_with('\'') && value.ends_with('\'')))
        {
            value = &value[1..value.len() - 1];
        }
        entries.push((key, value.to_string()));
    }
    Ok(entries)
}

/// Applies config entries underneath the explicit flags.
fn apply_config(flags: &mut Flags, entries: &[(String, String)]) -> CliResult<()> {
    for (key, value) in entries {
        match key.as_str() {
            "input" => fill(&mut flags.input, || PathBuf::from(value)),
            "x" => fill(&mut flags.x, || value.clone()),
            "y" => fill(&mut flags.y, || value.clone()),
            "geographic" => flags.geographic |= parse_bool(key, value)?,
            "dependent" => fill(&mut flags.dependent, || value.clone()),
            "vars" => fill(&mut flags.vars, || {
                value.split(',').map(|s| s.trim().to_string()).collect()
            }),
            "kernel" => fill(&mut flags.kernel, || value.clone()),
            "bw" => fill(&mut flags.bw, || value.clone()),
            "adaptive" => flags.adaptive |= parse_bool(key, value)?,
            "criterion" => fill(&mut flags.criterion, || value.clone()),
            "k" => fill_parsed(&mut flags.k, key, value)?,
            "robust" => fill(&mut flags.robust, || value.clone()),
            "cn_thresh" => fill_parsed(&mut flags.cn_thresh, key, value)?,
            "adjust" => flags.adjust |= parse_bool(key, value)?,
            "quantiles" => flags.quantiles |= parse_bool(key, value)?,
            "predict_input" => fill(&mut flags.predict_input, || PathBuf::from(value)),
            "out" => fill(&mut flags.out, || PathBuf::from(value)),
            "format" => fill(&mut flags.format, || value.clone()),
            "seed" => fill_parsed(&mut flags.seed, key, value)?,
            "threads" => fill_parsed(&mut flags.threads, key, value)?,
            "dist_cache" => fill(&mut flags.dist_cache, || PathBuf::from(value)),
            "earth_radius" => fill_parsed(&mut flags.earth_radius, key, value)?,
            "p" => fill_parsed(&mut flags.p, key, value)?,
            _ => {
                return Err(CliError::validation(format!(
                    "config key {key:?} is not a recognised flag"
                )))
            }
        }
    }
    Ok(())
}

fn fill<T>(slot: &mut Option<T>, make: impl FnOnce() -> T) {
    if slot.is_none() {
        *slot = Some(make());
    }
}

fn fill_parsed<T: std::str::FromStr>(
    slot: &mut Option<T>,
    key: &str,
    value: &str,
) -> CliResult<()> {
    if slot.is_none() {
        *slot = Some(parse_num(key, value)?);
    }
    Ok(())
}

fn parse_kernel(name: &str) -> CliResult<KernelFamily> {
    match name.to_lowercase().as_str() {
        "global" => Ok(KernelFamily::Global),
        "gaussian" => Ok(KernelFamily::Gaussian),
        "exponential" => Ok(KernelFamily::Exponential),
        "boxcar" => Ok(KernelFamily::Boxcar),
        "bisquare" => Ok(KernelFamily::Bisquare),
        "tricube" => Ok(KernelFamily::Tricube),
        _ => Err(CliError::validation(format!(
            "unknown kernel {name:?}; expected global, gaussian, exponential, boxcar, bisquare, or tricube"
        ))),
    }
}

fn parse_bw(text: &str, adaptive: bool) -> CliResult<BwSpec> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(BwSpec::Auto);
    }
    let value: f64 = text
        .parse()
        .map_err(|_| CliError::validation(format!("--bw expects a number or \"auto\", got {text:?}")))?;
    if adaptive {
        if value < 1.0 || value.fract() != 0.0 {
            return Err(CliError::validation(format!(
                "an adaptive bandwidth is a whole neighbour count >= 1, got {text}"
            )));
        }
        Ok(BwSpec::Value(Bandwidth::Adaptive(value as usize)))
    } else {
        if !(value > 0.0) {
            return Err(CliError::validation(format!(
                "a fixed bandwidth must be positive, got {text}"
            )));
        }
        Ok(BwSpec::Value(Bandwidth::Fixed(value)))
    }
}

pub fn resolve(mut flags: Flags) -> CliResult<Resolved> {
    if let Some(cfg) = flags.config.clone() {
        let entries = config_entries(&cfg)?;
        apply_config(&mut flags, &entries)?;
    }
    let input = flags
        .input
        .ok_or_else(|| CliError::validation("missing --input"))?;
    let family = match &flags.kernel {
        Some(name) => parse_kernel(name)?,
        None => KernelFamily::Bisquare,
    };
    let bw = match &flags.bw {
        Some(text) => Some(parse_bw(text, flags.adaptive)?),
        None => None,
    };
    let criterion = match flags.criterion.as_deref() {
        None | Some("cv") => SelectionCriterion::Cv,
        Some("aicc") => SelectionCriterion::Aicc,
        Some(other) => {
            return Err(CliError::validation(format!(
                "--criterion must be cv or aicc, got {other:?}"
            )))
        }
    };
    let robust = match flags.robust.as_deref() {
        None | Some("none") => Robust::None,
        Some("filtered") => Robust::Filtered,
        Some("iterative") => Robust::Iterative,
        Some("mcd") => Robust::Mcd,
        Some(other) => {
            return Err(CliError::validation(format!(
                "--robust must be none, filtered, iterative, or mcd, got {other:?}"
            )))
        }
    };
    let format = match flags.format.as_deref() {
        None | Some("csv") => OutputFormat::Csv,
        Some("geojson") => OutputFormat::Geojson,
        Some(other) => {
            return Err(CliError::validation(format!(
                "--format must be csv or geojson, got {other:?}"
            )))
        }
    };
    let metric = if flags.geographic {
        match flags.earth_radius {
            Some(r) if r > 0.0 => DistanceMetric::GreatCircle { radius: r },
            Some(r) => {
                return Err(CliError::validation(format!(
                    "--earth-radius must be positive, got {r}"
                )))
            }
            None => DistanceMetric::great_circle(),
        }
    } else {
        let p = flags.p.unwrap_or(2.0);
        if p < 1.0 {
            return Err(CliError::validation(format!(
                "--p must be at least 1, got {p}"
            )));
        }
        DistanceMetric::Minkowski { p }
    };
    Ok(Resolved {
        input,
        x: flags.x,
        y: flags.y,
        geographic: flags.geographic,
        dependent: flags.dependent,
        vars: flags.vars.unwrap_or_default(),
        family,
        bw,
        adaptive: flags.adaptive,
        criterion,
        k: flags.k,
        robust,
        cn_thresh: flags.cn_thresh.unwrap_or(30.0),
        adjust: flags.adjust,
        quantiles: flags.quantiles,
        predict_input: flags.predict_input,
        out: flags.out,
        format,
        seed: flags.seed.unwrap_or(42),
        threads: flags.threads,
        dist_cache: flags.dist_cache,
        metric,
    })
}
