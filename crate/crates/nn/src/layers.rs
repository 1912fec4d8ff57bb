//! Small building blocks shared by the networks.

use candle_core::{Result, Tensor};
use candle_nn::{Conv2dConfig, ConvTranspose2dConfig, GroupNorm, VarBuilder};

pub(crate) fn down_conv(cin: usize, cout: usize, vb: VarBuilder) -> Result<candle_nn::Conv2d> {
    let cfg = Conv2dConfig {
        padding: 1,
        stride: 2,
        ..Default::default()
    };
    candle_nn::conv2d(cin, cout, 4, cfg, vb)
}

pub(crate) fn up_conv(cin: usize, cout: usize, vb: VarBuilder) -> Result<candle_nn::ConvTranspose2d> {
    let cfg = ConvTranspose2dConfig {
        padding: 1,
        stride: 2,
        ..Default::default()
    };
    candle_nn::conv_transpose2d(cin, cout, 4, cfg, vb)
}

/// Per-sample, per-channel normalization with a learned affine transform.
pub(crate) fn instance_norm(channels: usize, vb: VarBuilder) -> Result<GroupNorm> {
    candle_nn::group_norm(channels, channels, 1e-5, vb)
}

/// Numerically stable binary cross-entropy on logits, averaged over all
/// elements: `max(x, 0) - x t + log(1 + exp(-|x|))`.
pub fn bce_with_logits(logits: &Tensor, target: f32) -> Result<Tensor> {
    let pos = logits.relu()?;
    let soft = logits.abs()?.neg()?.exp()?.affine(1.0, 1.0)?.log()?;
    let cross = logits.affine(f64::from(target), 0.0)?;
    ((pos - cross)? + soft)?.mean_all()
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    fn naive(x: f64, t: f64) -> f64 {
        let p = 1.0 / (1.0 + (-x).exp());
        -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
    }

    #[test]
    fn bce_matches_the_textbook_formula() {
        let xs = [-3.0f32, -0.5, 0.0, 0.7, 4.0];
        let t = Tensor::new(&xs, &Device::Cpu).unwrap();
        for target in [0.0f32, 1.0] {
            let got = bce_with_logits(&t, target).unwrap().to_scalar::<f32>().unwrap();
            let want = xs.iter().map(|&x| naive(x.into(), target.into())).sum::<f64>() / xs.len() as f64;
            assert!((f64::from(got) - want).abs() < 1e-5, "{got} vs {want}");
        }
    }

    #[test]
    fn bce_is_finite_for_extreme_logits() {
        let t = Tensor::new(&[-200f32, 200.0], &Device::Cpu).unwrap();
        for target in [0.0, 1.0] {
            let v = bce_with_logits(&t, target).unwrap().to_scalar::<f32>().unwrap();
            assert!((v - 100.0).abs() < 1e-3, "{v}");
        }
    }
}
