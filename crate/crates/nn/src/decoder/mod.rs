//! Calorie decoders: the parameter-free summation decoder and trainable
//! regression networks used as baselines.

mod backbone;
mod early_stop;

pub use backbone::{Backbone, BackboneKind, INPUT_CHANNELS};
pub use early_stop::{EarlyStopping, Observation};

use std::path::{Path, PathBuf};

use candle_core::{DType, Device, Tensor};
use candle_nn::{AdamW, Optimizer, ParamsAdamW, VarBuilder, VarMap};
use kcalmap_core::eval::{CalorieDecoder, DensityEncoder};
use kcalmap_core::seed::derive_seed;
use kcalmap_core::{summation_decode, DensityMap, EatingOccasion};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{read_checkpoint, write_checkpoint, CheckpointKind};
use crate::error::{Error, Result};
use crate::init::{reinit_vars, restore, snapshot, ParamInit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionDecoderConfig {
    pub backbone: BackboneKind,
    /// Channel count of the first stage.
    pub width: usize,
    /// Units in the hidden fully connected layer.
    pub hidden: usize,
    pub epochs: usize,
    /// Stop after this many epochs without a new best validation loss.
    pub patience: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Start from the weights in `pretrained_weights` instead of a fresh
    /// initialization.
    pub pretrained: bool,
    pub pretrained_weights: Option<PathBuf>,
    pub seed: u64,
}

impl Default for RegressionDecoderConfig {
    fn default() -> Self {
        Self {
            backbone: BackboneKind::Vgg16,
            width: 16,
            hidden: 64,
            epochs: 50,
            patience: 20,
            learning_rate: 1e-4,
            batch_size: 16,
            pretrained: false,
            pretrained_weights: None,
            seed: 0,
        }
    }
}

impl RegressionDecoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.hidden == 0 || self.batch_size == 0 {
            return Err(Error::Config("width, hidden and batch_size must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.pretrained && self.pretrained_weights.is_none() {
            return Err(Error::Config(
                "pretrained decoder requested but no pretrained_weights file given".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoderEpoch {
    /// 1-based.
    pub epoch: usize,
    /// Mean absolute error in kCal over the training maps.
    pub train_l1: f64,
    pub val_l1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitOutcome {
    pub epochs_run: usize,
    /// 1-based epoch whose parameters were restored.
    pub best_epoch: usize,
}

/// Runs up to `epochs` epochs, keeps a copy of `vars` at every new best
/// loss returned by `run_epoch` (called with 1-based epochs) and restores
/// that copy before returning.
pub fn fit_with_early_stopping(
    vars: &VarMap,
    epochs: usize,
    patience: usize,
    mut run_epoch: impl FnMut(usize) -> Result<f64>,
) -> Result<FitOutcome> {
    let mut stopper = EarlyStopping::new(patience);
    let mut best = snapshot(vars)?;
    let mut epochs_run = 0;
    for epoch in 1..=epochs {
        let loss = run_epoch(epoch)?;
        epochs_run = epoch;
        let obs = stopper.observe(epoch, loss);
        if obs.improved {
            best = snapshot(vars)?;
        }
        if obs.stop {
            break;
        }
    }
    restore(vars, &best)?;
    Ok(FitOutcome {
        epochs_run,
        best_epoch: stopper.best().map_or(0, |(e, _)| e),
    })
}

fn regression_init(name: &str, dims: &[usize]) -> ParamInit {
    let leaf = name.rsplit('.').next().unwrap_or(name);
    match (leaf, dims.len()) {
        // The head starts out predicting the training mean.
        ("bias", 1) if name.starts_with("fc2.") => ParamInit::Const(1.0),
        ("running_mean", _) | ("bias", _) => ParamInit::Const(0.0),
        ("running_var", _) => ParamInit::Const(1.0),
        ("weight", 1) if name.contains(backbone::RESIDUAL_OUT_NORM) => ParamInit::Const(0.0),
        ("weight", 1) => ParamInit::Const(1.0),
        ("weight", 4) => {
            // He initialization over the fan-out.
            let fan_out = dims[0] * dims[2] * dims[3];
            ParamInit::Normal { mean: 0.0, std: (2.0 / fan_out as f64).sqrt() }
        }
        (_, 2) => ParamInit::Normal { mean: 0.0, std: (1.0 / dims[1] as f64).sqrt() },
        _ => ParamInit::Normal { mean: 0.0, std: 0.01 },
    }
}

fn map_batch(maps: &[&DensityMap]) -> Result<Tensor> {
    let (h, w) = maps[0].shape();
    let mut data = Vec::with_capacity(maps.len() * INPUT_CHANNELS * h * w);
    for m in maps {
        if m.shape() != (h, w) {
            return Err(Error::ShapeMismatch {
                expected: (h, w),
                actual: m.shape(),
            });
        }
        for _ in 0..INPUT_CHANNELS {
            data.extend_from_slice(m.values());
        }
    }
    Ok(Tensor::from_vec(data, (maps.len(), INPUT_CHANNELS, h, w), &Device::Cpu)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RegressionMeta {
    config: RegressionDecoderConfig,
    kcal_scale: f64,
    best_epoch: usize,
    history: Vec<DecoderEpoch>,
}

pub struct RegressionDecoder {
    config: RegressionDecoderConfig,
    kcal_scale: f64,
    best_epoch: usize,
    history: Vec<DecoderEpoch>,
    vars: VarMap,
    net: Backbone,
}

impl std::fmt::Debug for RegressionDecoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RegressionDecoder")
            .field("config", &self.config)
            .field("kcal_scale", &self.kcal_scale)
            .field("best_epoch", &self.best_epoch)
            .finish_non_exhaustive()
    }
}

impl RegressionDecoder {
    /// Freshly initialized network. Outputs are multiplied by `kcal_scale`.
    pub fn new(config: RegressionDecoderConfig, kcal_scale: f64) -> Result<Self> {
        if !(kcal_scale.is_finite() && kcal_scale > 0.0) {
            return Err(Error::Config(format!("kcal_scale must be positive, got {kcal_scale}")));
        }
        let vars = VarMap::new();
        let vb = VarBuilder::from_varmap(&vars, DType::F32, &Device::Cpu);
        let net = Backbone::new(config.backbone, config.width, config.hidden, vb)?;
        reinit_vars(&vars, derive_seed(config.seed, "decoder-init", 0), regression_init)?;
        Ok(Self {
            config,
            kcal_scale,
            best_epoch: 0,
            history: Vec::new(),
            vars,
            net,
        })
    }

    pub fn config(&self) -> &RegressionDecoderConfig {
        &self.config
    }

    pub fn kcal_scale(&self) -> f64 {
        self.kcal_scale
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn history(&self) -> &[DecoderEpoch] {
        &self.history
    }

    pub fn parameters(&self) -> Result<Vec<(String, Tensor)>> {
        snapshot(&self.vars)
    }

    /// Overwrites the network weights with those of another decoder
    /// checkpoint of the same architecture.
    pub fn load_weights(&self, path: &Path) -> Result<()> {
        let ckpt = read_checkpoint::<DecoderMeta>(path, CheckpointKind::Decoder)?;
        match &ckpt.meta {
            DecoderMeta::Regression(m)
                if m.config.backbone == self.config.backbone
                    && m.config.width == self.config.width
                    && m.config.hidden == self.config.hidden =>
            {
                ckpt.restore_into("decoder", &self.vars)
            }
            _ => Err(Error::Checkpoint(format!(
                "{} does not hold a {} decoder of width {} / hidden {}",
                path.display(),
                self.config.backbone,
                self.config.width,
                self.config.hidden
            ))),
        }
    }

    fn predict_batch(&self, maps: &[&DensityMap], train: bool) -> Result<Tensor> {
        let x = map_batch(maps)?;
        Ok(self.net.forward(&x, train)?)
    }

    pub fn predict(&self, map: &DensityMap) -> Result<f64> {
        let y = self.predict_batch(&[map], false)?;
        let v: Vec<f32> = y.to_vec1()?;
        Ok(f64::from(v[0]) * self.kcal_scale)
    }

    fn mean_abs_error(&self, maps: &[DensityMap], kcal: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (chunk, truth) in maps.chunks(32).zip(kcal.chunks(32)) {
            let refs: Vec<&DensityMap> = chunk.iter().collect();
            let y: Vec<f32> = self.predict_batch(&refs, false)?.to_vec1()?;
            for (p, t) in y.iter().zip(truth) {
                total += (f64::from(*p) * self.kcal_scale - t).abs();
            }
        }
        Ok(total / maps.len() as f64)
    }
}

impl CalorieDecoder for RegressionDecoder {
    fn decode(&self, map: &DensityMap) -> kcalmap_core::Result<f64> {
        Ok(self.predict(map)?)
    }
}

/// Maps produced by a frozen encoder, paired with true totals.
fn encode_all(encoder: &dyn DensityEncoder, occasions: &[EatingOccasion]) -> Result<(Vec<DensityMap>, Vec<f64>)> {
    let maps = occasions
        .iter()
        .map(|o| encoder.encode(o))
        .collect::<kcalmap_core::Result<Vec<_>>>()?;
    Ok((maps, occasions.iter().map(EatingOccasion::total_kcal).collect()))
}

/// Trains a regression decoder on maps produced by `encoder`, which is only
/// borrowed and never updated. Validation L1 drives early stopping and the
/// best epoch's weights are kept; with no validation occasions the training
/// loss is used instead.
pub fn train_regression_decoder(
    config: &RegressionDecoderConfig,
    encoder: &dyn DensityEncoder,
    train: &[EatingOccasion],
    val: &[EatingOccasion],
) -> Result<RegressionDecoder> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Config("no training occasions".into()));
    }
    let (train_maps, train_kcal) = encode_all(encoder, train)?;
    let (val_maps, val_kcal) = encode_all(encoder, val)?;
    let scale = train_kcal.iter().sum::<f64>() / train_kcal.len() as f64;

    let mut model = RegressionDecoder::new(config.clone(), scale)?;
    if config.pretrained {
        let path = config.pretrained_weights.as_deref().expect("validated");
        model.load_weights(path)?;
    }
    let params = ParamsAdamW {
        lr: config.learning_rate,
        weight_decay: 0.0,
        ..Default::default()
    };
    let mut opt = AdamW::new(model.vars.all_vars(), params)?;
    let mut order: Vec<usize> = (0..train_maps.len()).collect();
    let mut history = Vec::new();

    let outcome = fit_with_early_stopping(&model.vars, config.epochs, config.patience, |epoch| {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "decoder-shuffle", epoch as u64));
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            let maps: Vec<&DensityMap> = batch.iter().map(|&i| &train_maps[i]).collect();
            let target: Vec<f32> = batch.iter().map(|&i| (train_kcal[i] / scale) as f32).collect();
            let target = Tensor::from_vec(target, batch.len(), &Device::Cpu)?;
            let pred = model.predict_batch(&maps, true)?;
            let loss = (pred - target)?.abs()?.mean_all()?;
            let v = f64::from(loss.to_scalar::<f32>()?);
            if !v.is_finite() {
                return Err(Error::Divergence { epoch, step, what: "decoder loss" });
            }
            total += v * scale * batch.len() as f64;
            opt.backward_step(&loss)?;
        }
        let train_l1 = total / train_maps.len() as f64;
        let val_l1 = if val_maps.is_empty() {
            train_l1
        } else {
            model.mean_abs_error(&val_maps, &val_kcal)?
        };
        log::info!("decoder epoch {epoch}: train {train_l1:.2} kCal, val {val_l1:.2} kCal");
        history.push(DecoderEpoch { epoch, train_l1, val_l1 });
        Ok(val_l1)
    })?;
    model.best_epoch = outcome.best_epoch;
    model.history = history;
    Ok(model)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "decoder_kind", rename_all = "snake_case")]
enum DecoderMeta {
    Summation,
    Regression(RegressionMeta),
}

/// Either decoder behind one type, with a shared checkpoint format.
#[derive(Debug)]
pub enum DecoderModel {
    Summation,
    Regression(RegressionDecoder),
}

impl DecoderModel {
    pub fn name(&self) -> String {
        match self {
            Self::Summation => "summation".into(),
            Self::Regression(r) => format!(
                "{}-{}",
                r.config.backbone,
                if r.config.pretrained { "pretrained" } else { "scratch" }
            ),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            Self::Summation => write_checkpoint(path, CheckpointKind::Decoder, &[], &DecoderMeta::Summation),
            Self::Regression(r) => {
                let meta = DecoderMeta::Regression(RegressionMeta {
                    config: r.config.clone(),
                    kcal_scale: r.kcal_scale,
                    best_epoch: r.best_epoch,
                    history: r.history.clone(),
                });
                write_checkpoint(path, CheckpointKind::Decoder, &[("decoder", &r.vars)], &meta)
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt = read_checkpoint::<DecoderMeta>(path, CheckpointKind::Decoder)?;
        match &ckpt.meta {
            DecoderMeta::Summation => Ok(Self::Summation),
            DecoderMeta::Regression(m) => {
                let mut r = RegressionDecoder::new(m.config.clone(), m.kcal_scale)?;
                ckpt.restore_into("decoder", &r.vars)?;
                r.best_epoch = m.best_epoch;
                r.history = m.history.clone();
                Ok(Self::Regression(r))
            }
        }
    }
}

impl CalorieDecoder for DecoderModel {
    fn decode(&self, map: &DensityMap) -> kcalmap_core::Result<f64> {
        match self {
            Self::Summation => Ok(summation_decode(map)),
            Self::Regression(r) => r.decode(map),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_nn::Init;

    #[test]
    fn pretrained_without_weights_is_rejected() {
        let c = RegressionDecoderConfig {
            pretrained: true,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn restores_best_epoch_parameters() {
        let vars = VarMap::new();
        let vb = VarBuilder::from_varmap(&vars, DType::F32, &Device::Cpu);
        vb.get_with_hints(1, "p", Init::Const(0.0)).unwrap();
        let set = |v: f32| {
            let data = vars.data().lock().unwrap();
            data["p"].set(&Tensor::new(&[v], &Device::Cpu).unwrap()).unwrap();
        };
        let out = fit_with_early_stopping(&vars, 10, 2, |e| {
            set(e as f32);
            Ok([3.0, 2.0, 2.5, 2.5, 1.0][e - 1])
        })
        .unwrap();
        assert_eq!(out, FitOutcome { epochs_run: 4, best_epoch: 2 });
        let p: Vec<f32> = vars.data().lock().unwrap()["p"].as_tensor().to_vec1().unwrap();
        assert_eq!(p, vec![2.0]);
    }

    #[test]
    fn init_rules() {
        assert_eq!(regression_init("layer1.0.c2.bn_out.weight", &[8]), ParamInit::Const(0.0));
        assert_eq!(regression_init("stem.bn.weight", &[8]), ParamInit::Const(1.0));
        assert_eq!(regression_init("stem.bn.running_var", &[8]), ParamInit::Const(1.0));
        assert_eq!(regression_init("fc2.bias", &[1]), ParamInit::Const(1.0));
        assert_eq!(regression_init("fc1.bias", &[8]), ParamInit::Const(0.0));
        assert_eq!(
            regression_init("stem.conv.weight", &[8, 3, 7, 7]),
            ParamInit::Normal { mean: 0.0, std: (2.0f64 / (8.0 * 49.0)).sqrt() }
        );
    }
}
