//! Run configuration: defaults, a JSON config file, and command-line flags,
//! merged in that order (flags win). The resolved configuration is archived
//! beside every run's outputs and embedded in each output document.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use tripforge_core::features::FeatureMask;
use tripforge_core::gbdt::GbdtConfig;
use tripforge_core::ingest::ColumnMap;
use tripforge_core::lasso::LassoConfig;

use crate::usage_error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Destination,
    Duration,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Destination => "destination",
            Task::Duration => "duration",
        })
    }
}

/// Fully resolved configuration for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub trips: Vec<PathBuf>,
    pub stations: Option<PathBuf>,
    pub preset: String,
    pub mask: FeatureMask,
    pub seed: u64,
    pub gbdt: GbdtConfig,
    pub lasso: LassoConfig,
    /// Duration-model penalty; when absent the run uses 0.01 * alpha_max
    /// computed from its training set.
    pub alpha: Option<f64>,
    pub out: PathBuf,
    pub k: usize,
    pub year: Option<i32>,
    pub threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            trips: Vec::new(),
            stations: None,
            preset: "auto".into(),
            mask: FeatureMask::All,
            seed: 7,
            gbdt: GbdtConfig::default(),
            lasso: LassoConfig::default(),
            alpha: None,
            out: PathBuf::from("tripforge-out"),
            k: 10,
            year: None,
            threshold: 0.5,
        }
    }
}

impl RunConfig {
    pub fn column_map(&self) -> Result<ColumnMap> {
        ColumnMap::preset(&self.preset).ok_or_else(|| {
            usage_error(format!(
                "unknown preset `{}` (available: auto, {})",
                self.preset,
                ColumnMap::preset_names().join(", ")
            ))
        })
    }

    /// Input paths must exist before any output is created.
    pub fn check_inputs(&self) -> Result<()> {
        if self.trips.is_empty() {
            return Err(usage_error("no trip files given (use --trips)"));
        }
        let stations =
            self.stations.as_ref().ok_or_else(|| usage_error("no station file given (use --stations)"))?;
        for path in self.trips.iter().chain([stations]) {
            if !path.is_file() {
                return Err(usage_error(format!("input not found: {}", path.display())));
            }
        }
        Ok(())
    }
}

/// Values an optional JSON config file may set; any omitted field falls back
/// to the built-in default.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub trips: Option<Vec<PathBuf>>,
    pub stations: Option<PathBuf>,
    pub preset: Option<String>,
    pub mask: Option<String>,
    pub seed: Option<u64>,
    pub trees: Option<usize>,
    pub learning_rate: Option<f64>,
    pub depth: Option<usize>,
    pub min_leaf: Option<usize>,
    pub subsample: Option<f64>,
    pub alpha: Option<f64>,
    pub lasso_max_iterations: Option<usize>,
    pub lasso_tolerance: Option<f64>,
    pub out: Option<PathBuf>,
    pub k: Option<usize>,
    pub year: Option<i32>,
    pub threshold: Option<f64>,
}

/// Flags shared by the pipeline subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file; explicit flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Trip CSV files.
    #[arg(long, num_args = 1..)]
    pub trips: Option<Vec<PathBuf>>,
    /// Station CSV file.
    #[arg(long)]
    pub stations: Option<PathBuf>,
    /// Column-map preset: auto (per-file detection), default, divvy2013,
    /// divvy2014, divvy2015.
    #[arg(long)]
    pub preset: Option<String>,
    /// Feature mask: all, user, station, time.
    #[arg(long)]
    pub mask: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Boosting rounds.
    #[arg(long)]
    pub trees: Option<usize>,
    /// Boosting learning rate.
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    /// Tree depth limit.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Minimum rows per leaf.
    #[arg(long)]
    pub min_leaf: Option<usize>,
    /// Row fraction per boosting round.
    #[arg(long)]
    pub subsample: Option<f64>,
    /// Duration-model penalty weight; defaults to 0.01 * alpha_max.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Rows in top-k listings and predictions.
    #[arg(long)]
    pub k: Option<usize>,
    /// Report year for the per-day and per-month views.
    #[arg(long)]
    pub year: Option<i32>,
    /// Classification probability threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let file: ConfigFile = match &self.config {
            None => ConfigFile::default(),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config file {}", path.display()))?;
                serde_json::from_str(&text).map_err(|e| {
                    usage_error(format!("bad config file {}: {e}", path.display()))
                })?
            }
        };

        let defaults = RunConfig::default();
        let mask_name = self.mask.clone().or(file.mask);
        let mask = match mask_name {
            None => defaults.mask,
            Some(name) => FeatureMask::parse(&name).ok_or_else(|| {
                usage_error(format!("unknown mask `{name}` (use all, user, station, or time)"))
            })?,
        };
        let gbdt = GbdtConfig {
            n_trees: self.trees.or(file.trees).unwrap_or(defaults.gbdt.n_trees),
            learning_rate: self
                .learning_rate
                .or(file.learning_rate)
                .unwrap_or(defaults.gbdt.learning_rate),
            max_depth: self.depth.or(file.depth).unwrap_or(defaults.gbdt.max_depth),
            min_samples_leaf: self.min_leaf.or(file.min_leaf).unwrap_or(defaults.gbdt.min_samples_leaf),
            subsample: self.subsample.or(file.subsample).unwrap_or(defaults.gbdt.subsample),
            seed: self.seed.or(file.seed).unwrap_or(defaults.gbdt.seed),
        };
        let lasso = LassoConfig {
            alpha: defaults.lasso.alpha,
            max_iterations: file.lasso_max_iterations.unwrap_or(defaults.lasso.max_iterations),
            tolerance: file.lasso_tolerance.unwrap_or(defaults.lasso.tolerance),
        };
        Ok(RunConfig {
            trips: self.trips.clone().or(file.trips).unwrap_or_default(),
            stations: self.stations.clone().or(file.stations),
            preset: self.preset.clone().or(file.preset).unwrap_or(defaults.preset),
            mask,
            seed: self.seed.or(file.seed).unwrap_or(defaults.seed),
            gbdt,
            lasso,
            alpha: self.alpha.or(file.alpha),
            out: self.out.clone().or(file.out).unwrap_or(defaults.out),
            k: self.k.or(file.k).unwrap_or(defaults.k),
            year: self.year.or(file.year),
            threshold: self.threshold.or(file.threshold).unwrap_or(defaults.threshold),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn flags_win_over_file_which_wins_over_defaults() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(
            file,
            r#"{{"seed": 99, "trees": 50, "mask": "station", "out": "from-file"}}"#
        )
        .unwrap();
        let args = CommonArgs {
            config: Some(file.path().to_path_buf()),
            seed: Some(11),
            ..Default::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.seed, 11, "flag beats file");
        assert_eq!(cfg.gbdt.n_trees, 50, "file beats default");
        assert_eq!(cfg.mask, FeatureMask::StationOnly);
        assert_eq!(cfg.out, PathBuf::from("from-file"));
        assert_eq!(cfg.k, 10, "default survives");
        assert_eq!(cfg.gbdt.seed, 11, "seed flows into the booster");
    }

    #[test]
    fn unknown_config_key_is_a_usage_error() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, r#"{{"tres": 50}}"#).unwrap();
        let args = CommonArgs { config: Some(file.path().to_path_buf()), ..Default::default() };
        let err = args.resolve().unwrap_err();
        assert_eq!(crate::exit_code(&err), 2);
    }

    #[test]
    fn bad_mask_is_a_usage_error() {
        let args = CommonArgs { mask: Some("everything".into()), ..Default::default() };
        let err = args.resolve().unwrap_err();
        assert_eq!(crate::exit_code(&err), 2);
    }
}
