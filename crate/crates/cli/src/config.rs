//! Flag, config-file and default resolution. Precedence: command-line flag,
//! then the `--config` TOML file, then the built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use dermvgg::data::{AugmentConfig, Normalization};
use dermvgg::train::HyperParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Default, Args)]
pub struct TrainArgs {
    /// TOML file with any of the keys below (snake_case).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset root holding train/ and test/ class folders.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Output directory for checkpoints, final.wts and train_log.jsonl.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Archive whose conv-base tensors initialize the network.
    #[arg(long)]
    pub weights_in: Option<PathBuf>,
    /// Keep the convolutional base fixed (default).
    #[arg(long, overrides_with = "no_freeze_base")]
    pub freeze_base: bool,
    /// Train the convolutional base together with the head.
    #[arg(long)]
    pub no_freeze_base: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// scale01 or imagenet.
    #[arg(long)]
    pub normalization: Option<Normalization>,
    #[arg(long)]
    pub no_augment: bool,
    #[arg(long)]
    pub rotation_deg: Option<f64>,
    #[arg(long)]
    pub shift_frac: Option<f64>,
    #[arg(long)]
    pub zoom_frac: Option<f64>,
    /// Square input side in pixels.
    #[arg(long)]
    pub input_size: Option<usize>,
    /// Divide every layer width by this factor (1 = standard VGG16).
    #[arg(long)]
    pub width_divisor: Option<usize>,
    /// Keep every epoch checkpoint instead of only the latest and best.
    #[arg(long)]
    pub keep_all_checkpoints: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    data_dir: Option<PathBuf>,
    out: Option<PathBuf>,
    model: Option<PathBuf>,
    weights_in: Option<PathBuf>,
    freeze_base: Option<bool>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    lr: Option<f64>,
    seed: Option<u64>,
    normalization: Option<Normalization>,
    augment: Option<bool>,
    rotation_deg: Option<f64>,
    shift_frac: Option<f64>,
    zoom_frac: Option<f64>,
    input_size: Option<usize>,
    width_divisor: Option<usize>,
    keep_all_checkpoints: Option<bool>,
}

fn read_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Fully resolved `train` settings; echoed before the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub data_dir: PathBuf,
    pub out: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights_in: Option<PathBuf>,
    pub freeze_base: bool,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub normalization: Normalization,
    pub augment: bool,
    pub rotation_deg: f64,
    pub shift_frac: f64,
    pub zoom_frac: f64,
    pub input_size: usize,
    pub width_divisor: usize,
    pub keep_all_checkpoints: bool,
}

impl TrainConfig {
    pub fn resolve(args: &TrainArgs) -> Result<Self, CliError> {
        let file = read_file_config(args.config.as_deref())?;
        let hp = HyperParams::default();
        let aug = AugmentConfig::default();
        let data_dir =
            args.data_dir.clone().or(file.data_dir).ok_or_else(|| CliError::Config("--data-dir is required".into()))?;
        let freeze_base = if args.no_freeze_base {
            false
        } else if args.freeze_base {
            true
        } else {
            file.freeze_base.unwrap_or(true)
        };
        let augment = if args.no_augment { false } else { file.augment.unwrap_or(aug.enabled) };
        let cfg = Self {
            data_dir,
            out: args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("output")),
            weights_in: args.weights_in.clone().or(file.weights_in),
            freeze_base,
            epochs: args.epochs.or(file.epochs).unwrap_or(hp.epochs),
            batch_size: args.batch_size.or(file.batch_size).unwrap_or(hp.batch_size),
            lr: args.lr.or(file.lr).unwrap_or(hp.learning_rate),
            seed: args.seed.or(file.seed).unwrap_or(hp.seed),
            normalization: args.normalization.or(file.normalization).unwrap_or_default(),
            augment,
            rotation_deg: args.rotation_deg.or(file.rotation_deg).unwrap_or(aug.rotation_max_deg),
            shift_frac: args.shift_frac.or(file.shift_frac).unwrap_or(aug.shift_max_frac),
            zoom_frac: args.zoom_frac.or(file.zoom_frac).unwrap_or(aug.zoom_max_frac),
            input_size: args.input_size.or(file.input_size).unwrap_or(150),
            width_divisor: args.width_divisor.or(file.width_divisor).unwrap_or(1),
            keep_all_checkpoints: args.keep_all_checkpoints || file.keep_all_checkpoints.unwrap_or(false),
        };
        if cfg.width_divisor == 0 {
            return Err(CliError::Config("--width-divisor must be at least 1".into()));
        }
        cfg.hyper_params().validate()?;
        cfg.augment_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn hyper_params(&self) -> HyperParams {
        HyperParams {
            learning_rate: self.lr,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            ..HyperParams::default()
        }
    }

    pub fn augment_config(&self) -> AugmentConfig {
        AugmentConfig {
            enabled: self.augment,
            rotation_max_deg: self.rotation_deg,
            shift_max_frac: self.shift_frac,
            zoom_max_frac: self.zoom_frac,
        }
    }
}

#[derive(Debug, Default, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Model archive to evaluate (e.g. final.wts or an epoch checkpoint).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Directory for report.json, report.csv, confusion.csv and roc_<class>.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalConfig {
    pub data_dir: PathBuf,
    pub model: PathBuf,
    pub out: PathBuf,
    pub batch_size: usize,
}

impl EvalConfig {
    pub fn resolve(args: &EvalArgs) -> Result<Self, CliError> {
        let file = read_file_config(args.config.as_deref())?;
        let required =
            |v: Option<PathBuf>, flag: &str| v.ok_or_else(|| CliError::Config(format!("{flag} is required")));
        let cfg = Self {
            data_dir: required(args.data_dir.clone().or(file.data_dir), "--data-dir")?,
            model: required(args.model.clone().or(file.model), "--model")?,
            out: args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("eval")),
            batch_size: args.batch_size.or(file.batch_size).unwrap_or(HyperParams::default().batch_size),
        };
        if cfg.batch_size == 0 {
            return Err(CliError::Config("--batch-size must be at least 1".into()));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Default, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Image to classify.
    pub image: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictConfig {
    pub model: PathBuf,
    pub image: PathBuf,
}

impl PredictConfig {
    pub fn resolve(args: &PredictArgs) -> Result<Self, CliError> {
        let file = read_file_config(args.config.as_deref())?;
        let model = args.model.clone().or(file.model).ok_or_else(|| CliError::Config("--model is required".into()))?;
        Ok(Self { model, image: args.image.clone() })
    }
}

/// Prints the resolved settings as TOML, ready to be saved and passed back
/// through `--config`.
pub fn echo<T: Serialize>(command: &str, cfg: &T) -> Result<(), CliError> {
    let text = toml::to_string(cfg).map_err(|e| CliError::Config(e.to_string()))?;
    println!("# {command}: resolved configuration");
    print!("{text}");
    println!();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_paper_table() {
        let args = TrainArgs { data_dir: Some("d".into()), ..Default::default() };
        let cfg = TrainConfig::resolve(&args).unwrap();
        assert_eq!((cfg.epochs, cfg.batch_size, cfg.lr, cfg.input_size), (150, 8, 1e-4, 150));
        assert!(cfg.freeze_base && cfg.augment);
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "data_dir = \"x\"\nepochs = 3\nbatch_size = 4\nfreeze_base = false\n").unwrap();
        let args = TrainArgs { config: Some(path.clone()), epochs: Some(5), ..Default::default() };
        let cfg = TrainConfig::resolve(&args).unwrap();
        assert_eq!((cfg.epochs, cfg.batch_size, cfg.lr), (5, 4, 1e-4));
        assert!(!cfg.freeze_base);
        let args = TrainArgs { config: Some(path), freeze_base: true, ..Default::default() };
        assert!(TrainConfig::resolve(&args).unwrap().freeze_base);
    }

    #[test]
    fn bad_values_are_config_errors() {
        let args = TrainArgs { data_dir: Some("d".into()), lr: Some(-1.0), ..Default::default() };
        assert_eq!(TrainConfig::resolve(&args).unwrap_err().exit_code(), 1);
        assert_eq!(TrainConfig::resolve(&TrainArgs::default()).unwrap_err().exit_code(), 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        fs::write(&path, "data_dir = \"x\"\nepochz = 3\n").unwrap();
        let args = TrainArgs { config: Some(path), ..Default::default() };
        assert_eq!(TrainConfig::resolve(&args).unwrap_err().exit_code(), 1);
    }
}
