use std::path::Path;

use candle_core::{Device, Tensor};
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use kcalmap_core::seed::derive_seed;
use kcalmap_core::EatingOccasion;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::normalize::max_density;
use super::{EncoderConfig, EncoderModel};
use crate::error::{Error, Result};
use crate::layers::bce_with_logits;
use crate::tensor::{image_to_tensor, map_to_tensor};

/// Losses recorded after one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub step: usize,
    /// Adversarial part of the generator loss.
    pub loss_adv_g: f64,
    /// Mean absolute error between generated and target unit-range maps.
    pub loss_l1: f64,
    pub loss_d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub loss_adv_g: f64,
    pub loss_l1: f64,
    pub loss_d: f64,
}

/// Per-epoch means of a step history, in epoch order.
pub fn epoch_means(history: &[LossRecord]) -> Vec<EpochSummary> {
    let mut out: Vec<(EpochSummary, usize)> = Vec::new();
    for r in history {
        match out.last_mut() {
            Some((s, n)) if s.epoch == r.epoch => {
                s.loss_adv_g += r.loss_adv_g;
                s.loss_l1 += r.loss_l1;
                s.loss_d += r.loss_d;
                *n += 1;
            }
            _ => out.push((
                EpochSummary {
                    epoch: r.epoch,
                    loss_adv_g: r.loss_adv_g,
                    loss_l1: r.loss_l1,
                    loss_d: r.loss_d,
                },
                1,
            )),
        }
    }
    out.into_iter()
        .map(|(s, n)| {
            let n = n as f64;
            EpochSummary {
                loss_adv_g: s.loss_adv_g / n,
                loss_l1: s.loss_l1 / n,
                loss_d: s.loss_d / n,
                ..s
            }
        })
        .collect()
}

pub fn write_history_csv(history: &[LossRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(e.to_string()))?;
    for r in history {
        w.serialize(r).map_err(|e| Error::Config(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Trains from scratch and writes a checkpoint to `checkpoint` (when given)
/// every `save_every` epochs and at the end.
pub fn train_encoder(
    config: &EncoderConfig,
    train: &[EatingOccasion],
    checkpoint: Option<&Path>,
) -> Result<EncoderModel> {
    train_encoder_with(config, train, checkpoint, |_| {})
}

/// As [`train_encoder`], calling `on_epoch` after every epoch.
pub fn train_encoder_with(
    config: &EncoderConfig,
    train: &[EatingOccasion],
    checkpoint: Option<&Path>,
    mut on_epoch: impl FnMut(&EpochSummary),
) -> Result<EncoderModel> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Config("no training occasions".into()));
    }
    let size = (config.image_size, config.image_size);
    for occ in train {
        if occ.shape() != size {
            return Err(Error::ShapeMismatch {
                expected: size,
                actual: occ.shape(),
            });
        }
    }
    let targets = train
        .iter()
        .map(|o| o.density_map())
        .collect::<kcalmap_core::Result<Vec<_>>>()?;
    let k = match config.density_norm {
        Some(k) => k,
        None => max_density(&targets),
    };
    let mut model = EncoderModel::new(config.clone(), k)?;
    let device = Device::Cpu;
    let factor = (1.0 / k) as f32;

    let adam = |lr| ParamsAdamW {
        lr,
        beta1: config.beta1,
        beta2: config.beta2,
        eps: 1e-8,
        weight_decay: 0.0,
    };
    let mut opt_g = AdamW::new(model.gen_vars.all_vars(), adam(config.learning_rate))?;
    let mut opt_d = AdamW::new(model.disc_vars.all_vars(), adam(config.learning_rate))?;

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..config.epochs {
        let lr = config.learning_rate_at(epoch);
        opt_g.set_learning_rate(lr);
        opt_d.set_learning_rate(lr);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "encoder-shuffle", epoch as u64));
        order.shuffle(&mut rng);

        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            let mut imgs = Vec::with_capacity(batch.len());
            let mut maps = Vec::with_capacity(batch.len());
            for &i in batch {
                imgs.push(image_to_tensor(train[i].image(), &device)?);
                // Targets above k only occur with a user-supplied constant.
                maps.push(map_to_tensor(&targets[i], factor, &device)?.clamp(0f32, 1f32)?);
            }
            let img = Tensor::cat(&imgs, 0)?;
            let target = Tensor::cat(&maps, 0)?;

            let fake = model.generator.forward(&img)?;

            let d_real = model.discriminator.forward(&img, &target)?;
            let d_fake = model.discriminator.forward(&img, &fake.detach())?;
            let loss_d = ((bce_with_logits(&d_real, 1.0)? + bce_with_logits(&d_fake, 0.0)?)? * 0.5)?;
            let loss_d_val = f64::from(loss_d.to_scalar::<f32>()?);
            if !loss_d_val.is_finite() {
                return Err(Error::Divergence { epoch, step, what: "discriminator loss" });
            }
            opt_d.backward_step(&loss_d)?;

            let d_fake = model.discriminator.forward(&img, &fake)?;
            let adv = bce_with_logits(&d_fake, 1.0)?;
            let l1 = (&fake - &target)?.abs()?.mean_all()?;
            let loss_g = (&adv + (&l1 * config.l1_weight)?)?;
            let adv_val = f64::from(adv.to_scalar::<f32>()?);
            let l1_val = f64::from(l1.to_scalar::<f32>()?);
            if !(adv_val.is_finite() && l1_val.is_finite()) {
                return Err(Error::Divergence { epoch, step, what: "generator loss" });
            }
            opt_g.backward_step(&loss_g)?;

            model.history.push(LossRecord {
                epoch,
                step,
                loss_adv_g: adv_val,
                loss_l1: l1_val,
                loss_d: loss_d_val,
            });
        }
        model.epochs_trained = epoch + 1;

        let start = model.history.iter().position(|r| r.epoch == epoch).unwrap_or(0);
        if let Some(summary) = epoch_means(&model.history[start..]).first() {
            log::info!(
                "epoch {}: l1 {:.5} adv {:.4} d {:.4}",
                epoch + 1,
                summary.loss_l1,
                summary.loss_adv_g,
                summary.loss_d
            );
            on_epoch(summary);
        }
        if let Some(path) = checkpoint {
            if config.save_every > 0 && (epoch + 1) % config.save_every == 0 {
                model.save(path)?;
            }
        }
    }
    if let Some(path) = checkpoint {
        model.save(path)?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(epoch: usize, step: usize, l1: f64) -> LossRecord {
        LossRecord {
            epoch,
            step,
            loss_adv_g: 1.0,
            loss_l1: l1,
            loss_d: 0.5,
        }
    }

    #[test]
    fn epoch_means_group_consecutive_steps() {
        let h = [rec(0, 0, 1.0), rec(0, 1, 3.0), rec(1, 0, 0.5)];
        let m = epoch_means(&h);
        assert_eq!(m.len(), 2);
        assert_eq!((m[0].epoch, m[0].loss_l1), (0, 2.0));
        assert_eq!((m[1].epoch, m[1].loss_l1), (1, 0.5));
        assert!(epoch_means(&[]).is_empty());
    }

    #[test]
    fn history_csv_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        write_history_csv(&[rec(0, 0, 0.25)], &p).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert_eq!(text.lines().next().unwrap(), "epoch,step,loss_adv_g,loss_l1,loss_d");
        assert_eq!(text.lines().count(), 2);
    }
}
