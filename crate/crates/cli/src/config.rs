//! Experiment configuration: built-in defaults, overridden by a TOML file,
//! overridden by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use kcalmap_core::dataset::{SplitRatios, SyntheticSceneConfig, DEFAULT_IMAGE_SIZE};
use kcalmap_core::seed::derive_seed;
use kcalmap_core::grayscale::DEFAULT_GRAYSCALE_SCALE;
use kcalmap_nn::decoder::RegressionDecoderConfig;
use kcalmap_nn::EncoderConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub manifest: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub encoder_checkpoint: Option<PathBuf>,
    pub decoder_checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Seed of the train/val/test shuffle; derived from the root seed when
    /// absent.
    pub split_seed: Option<u64>,
    pub image_size: u32,
    pub train_ratio: f64,
    pub val_ratio: f64,
    pub test_ratio: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        let r = SplitRatios::default();
        Self {
            split_seed: None,
            image_size: DEFAULT_IMAGE_SIZE,
            train_ratio: r.train,
            val_ratio: r.val,
            test_ratio: r.test,
        }
    }
}

impl DatasetConfig {
    pub fn ratios(&self) -> SplitRatios {
        SplitRatios {
            train: self.train_ratio,
            val: self.val_ratio,
            test: self.test_ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub runs: usize,
    pub histogram: bool,
    /// Panels drawn for the largest over- and under-estimates of run 0
    /// (0 disables).
    pub panels: usize,
    pub grayscale_scale: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            runs: 5,
            histogram: true,
            panels: 3,
            grayscale_scale: DEFAULT_GRAYSCALE_SCALE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root seed; every component derives its own stream from it.
    pub seed: u64,
    pub paths: PathsConfig,
    pub dataset: DatasetConfig,
    pub encoder: EncoderConfig,
    pub decoder: RegressionDecoderConfig,
    pub eval: EvalConfig,
    /// Scene generator settings; its size and seed come from `dataset` and
    /// the root seed.
    pub synth: SyntheticSceneConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            paths: PathsConfig::default(),
            dataset: DatasetConfig::default(),
            encoder: EncoderConfig {
                image_size: DEFAULT_IMAGE_SIZE as usize,
                ..EncoderConfig::default()
            },
            decoder: RegressionDecoderConfig::default(),
            eval: EvalConfig::default(),
            synth: SyntheticSceneConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` when given; built-in defaults otherwise.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                Self::from_toml(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    pub fn split_seed(&self) -> u64 {
        self.dataset
            .split_seed
            .unwrap_or_else(|| derive_seed(self.seed, "split", 0))
    }

    pub fn manifest(&self) -> anyhow::Result<&Path> {
        match &self.paths.manifest {
            Some(p) if p.is_file() => Ok(p),
            Some(p) => bail!("manifest {} does not exist", p.display()),
            None => bail!("no manifest given (use --manifest or paths.manifest)"),
        }
    }

    pub fn output_dir(&self) -> anyhow::Result<&Path> {
        self.paths
            .output_dir
            .as_deref()
            .context("no output directory given (use --out or paths.output_dir)")
    }
}
