use std::path::{Path, PathBuf};

use anyhow::Context;
use kcalmap_core::eval::DensityEncoder;
use kcalmap_nn::decoder::{train_regression_decoder, BackboneKind, DecoderModel};
use kcalmap_nn::encoder::{train_encoder, write_history_csv};
use kcalmap_nn::EncoderModel;

use super::{apply_dataset_flags, usage, Dataset};
use crate::config::PipelineConfig;
use crate::{TrainDecoderArgs, TrainEncoderArgs};

/// Trains an encoder on the augmented training split with `seed`.
pub(crate) fn fit_encoder(
    cfg: &PipelineConfig,
    data: &Dataset,
    seed: u64,
    checkpoint: Option<&Path>,
) -> anyhow::Result<EncoderModel> {
    let mut ec = cfg.encoder.clone();
    ec.seed = seed;
    ec.validate().map_err(|e| usage(e.to_string()))?;
    Ok(train_encoder(&ec, &data.augmented_train(), checkpoint)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum DecoderChoice {
    Summation,
    Regression(BackboneKind),
}

impl std::str::FromStr for DecoderChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("summation") {
            Ok(Self::Summation)
        } else {
            s.parse().map(Self::Regression)
        }
    }
}

/// Fits the chosen decoder on maps from `encoder` (augmented training
/// split, validation split for early stopping).
pub(crate) fn fit_decoder(
    cfg: &PipelineConfig,
    data: &Dataset,
    encoder: &dyn DensityEncoder,
    choice: DecoderChoice,
    seed: u64,
) -> anyhow::Result<DecoderModel> {
    match choice {
        DecoderChoice::Summation => Ok(DecoderModel::Summation),
        DecoderChoice::Regression(kind) => {
            let mut dc = cfg.decoder.clone();
            dc.backbone = kind;
            dc.seed = seed;
            dc.validate().map_err(|e| usage(e.to_string()))?;
            let model = train_regression_decoder(&dc, encoder, &data.augmented_train(), &data.val)?;
            Ok(DecoderModel::Regression(model))
        }
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

pub fn run_encoder(mut cfg: PipelineConfig, args: TrainEncoderArgs) -> anyhow::Result<()> {
    apply_dataset_flags(&mut cfg, &args.data);
    let e = &mut cfg.encoder;
    if let Some(v) = args.epochs {
        e.epochs = v;
    }
    if let Some(v) = args.batch_size {
        e.batch_size = v;
    }
    if let Some(v) = args.lr {
        e.learning_rate = v;
    }
    if let Some(v) = args.l1_weight {
        e.l1_weight = v;
    }
    if let Some(v) = args.density_norm {
        e.density_norm = Some(v);
    }
    if let Some(v) = args.generator_width {
        e.generator_width = v;
    }
    if let Some(v) = args.discriminator_width {
        e.discriminator_width = v;
    }
    if let Some(v) = args.save_every {
        e.save_every = v;
    }
    if let Some(o) = args.out {
        cfg.paths.encoder_checkpoint = Some(o);
    }
    let out = cfg
        .paths
        .encoder_checkpoint
        .clone()
        .ok_or_else(|| usage("no checkpoint path given (use --out or paths.encoder_checkpoint)"))?;
    cfg.encoder.validate().map_err(|e| usage(e.to_string()))?;

    let data = Dataset::load(&cfg)?;
    let model = fit_encoder(&cfg, &data, cfg.seed, Some(&out))?;
    let history = sibling(&out, ".history.csv");
    write_history_csv(model.history(), &history)?;
    let split = sibling(&out, ".split.json");
    std::fs::write(&split, serde_json::to_string_pretty(&data.split)? + "\n")?;
    let last = kcalmap_nn::encoder::epoch_means(model.history()).last().copied();
    println!(
        "trained {} epochs (final mean L1 {}); checkpoint {}, history {}",
        model.epochs_trained(),
        last.map_or("n/a".into(), |s| format!("{:.5}", s.loss_l1)),
        out.display(),
        history.display()
    );
    Ok(())
}

pub fn run_decoder(mut cfg: PipelineConfig, args: TrainDecoderArgs) -> anyhow::Result<()> {
    apply_dataset_flags(&mut cfg, &args.data);
    let d = &mut cfg.decoder;
    if let Some(v) = args.epochs {
        d.epochs = v;
    }
    if let Some(v) = args.patience {
        d.patience = v;
    }
    if let Some(v) = args.lr {
        d.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        d.batch_size = v;
    }
    if let Some(v) = args.width {
        d.width = v;
    }
    if let Some(p) = args.pretrained_weights {
        d.pretrained = true;
        d.pretrained_weights = Some(p);
    }
    if let Some(e) = args.encoder {
        cfg.paths.encoder_checkpoint = Some(e);
    }
    if let Some(o) = args.out {
        cfg.paths.decoder_checkpoint = Some(o);
    }
    let choice = match args.decoder {
        Some(s) => s.parse::<DecoderChoice>().map_err(usage)?,
        None => DecoderChoice::Regression(cfg.decoder.backbone),
    };
    let out = cfg
        .paths
        .decoder_checkpoint
        .clone()
        .ok_or_else(|| usage("no checkpoint path given (use --out or paths.decoder_checkpoint)"))?;
    let enc_path = cfg
        .paths
        .encoder_checkpoint
        .clone()
        .ok_or_else(|| usage("no encoder checkpoint given (use --encoder)"))?;
    let encoder = EncoderModel::load(&enc_path).with_context(|| format!("loading {}", enc_path.display()))?;
    cfg.dataset.image_size = encoder.config().image_size as u32;

    let data = Dataset::load(&cfg)?;
    let model = fit_decoder(&cfg, &data, &encoder, choice, cfg.seed)?;
    model.save(&out)?;
    match &model {
        DecoderModel::Summation => println!("summation decoder written to {}", out.display()),
        DecoderModel::Regression(r) => println!(
            "{} trained, best epoch {} of {}; checkpoint {}",
            model.name(),
            r.best_epoch(),
            r.history().len(),
            out.display()
        ),
    }
    Ok(())
}
