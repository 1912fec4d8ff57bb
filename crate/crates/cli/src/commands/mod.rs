mod densify;
mod eval;
mod report;
mod synth;
mod train;

use std::fmt;

use anyhow::Context;
use kcalmap_core::dataset::{augment_fourfold, load_manifest, split_with, DatasetSplit};
use kcalmap_core::EatingOccasion;

use crate::config::PipelineConfig;
use crate::{Cli, Command, DatasetFlags, DEVICE_ENV};

/// Errors in how the tool was invoked; reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub(crate) fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = PipelineConfig::load(cli.config.as_deref()).map_err(|e| usage(format!("{e:#}")))?;
    match cli.command {
        Command::Synth(a) => synth::run(cfg, a),
        Command::Densify(a) => densify::run(cfg, a),
        Command::TrainEncoder(a) => {
            check_device()?;
            train::run_encoder(cfg, a)
        }
        Command::TrainDecoder(a) => {
            check_device()?;
            train::run_decoder(cfg, a)
        }
        Command::Eval(a) => {
            check_device()?;
            eval::run(cfg, a)
        }
        Command::Report(a) => report::run(a),
    }
}

/// Only the CPU backend is compiled in.
fn check_device() -> anyhow::Result<()> {
    match std::env::var(DEVICE_ENV) {
        Err(_) => Ok(()),
        Ok(v) if v.is_empty() || v.eq_ignore_ascii_case("cpu") => Ok(()),
        Ok(v) => Err(usage(format!(
            "{DEVICE_ENV}={v} is not available in this build (supported: cpu)"
        ))),
    }
}

pub(crate) fn apply_dataset_flags(cfg: &mut PipelineConfig, flags: &DatasetFlags) {
    if let Some(m) = &flags.manifest {
        cfg.paths.manifest = Some(m.clone());
    }
    if let Some(s) = flags.size {
        cfg.dataset.image_size = s;
    }
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    cfg.encoder.image_size = cfg.dataset.image_size as usize;
}

/// Occasions of one manifest partitioned by the configured split.
pub(crate) struct Dataset {
    pub split: DatasetSplit,
    pub train: Vec<EatingOccasion>,
    pub val: Vec<EatingOccasion>,
    pub test: Vec<EatingOccasion>,
}

impl Dataset {
    pub fn load(cfg: &PipelineConfig) -> anyhow::Result<Self> {
        let path = cfg.manifest().map_err(|e| usage(e.to_string()))?;
        let occasions = load_manifest(path, Some(cfg.dataset.image_size))
            .with_context(|| format!("loading {}", path.display()))?;
        let ids: Vec<&str> = occasions.iter().map(EatingOccasion::id).collect();
        let split = split_with(&ids, cfg.split_seed(), cfg.dataset.ratios())?;
        let (train, val, test) = split.partition(&occasions);
        let own = |v: Vec<&EatingOccasion>| v.into_iter().cloned().collect::<Vec<_>>();
        log::info!(
            "{} occasions: {} train / {} val / {} test",
            occasions.len(),
            train.len(),
            val.len(),
            test.len()
        );
        Ok(Self {
            train: own(train),
            val: own(val),
            test: own(test),
            split,
        })
    }

    /// Training occasions with their flipped variants.
    pub fn augmented_train(&self) -> Vec<EatingOccasion> {
        self.train.iter().flat_map(augment_fourfold).collect()
    }
}
