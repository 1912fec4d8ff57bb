//! PatchGAN discriminator over the image concatenated with a unit-range
//! density map. Emits one logit per receptive-field patch.

use candle_core::{Result, Tensor};
use candle_nn::{Conv2d, Conv2dConfig, GroupNorm, Module, VarBuilder};

use super::generator::IMAGE_CHANNELS;
use crate::layers::instance_norm;

const LAYERS: usize = 3;

pub struct Discriminator {
    convs: Vec<(Conv2d, Option<GroupNorm>)>,
}

impl Discriminator {
    pub fn new(base: usize, vb: VarBuilder) -> Result<Self> {
        let conv = |cin, cout, stride, vb| {
            let cfg = Conv2dConfig {
                padding: 1,
                stride,
                ..Default::default()
            };
            candle_nn::conv2d(cin, cout, 4, cfg, vb)
        };
        let mut convs = Vec::with_capacity(LAYERS + 2);
        convs.push((conv(IMAGE_CHANNELS + 1, base, 2, vb.pp("conv0"))?, None));
        let mut prev = base;
        for n in 1..=LAYERS {
            let cur = base * (1usize << n.min(3));
            let stride = if n < LAYERS { 2 } else { 1 };
            let c = conv(prev, cur, stride, vb.pp(format!("conv{n}")))?;
            let norm = instance_norm(cur, vb.pp(format!("norm{n}")))?;
            convs.push((c, Some(norm)));
            prev = cur;
        }
        convs.push((conv(prev, 1, 1, vb.pp(format!("conv{}", LAYERS + 1)))?, None));
        Ok(Self { convs })
    }

    /// Patch logits for `image` `(N, 3, S, S)` and `density` `(N, 1, S, S)`.
    pub fn forward(&self, image: &Tensor, density: &Tensor) -> Result<Tensor> {
        let mut x = Tensor::cat(&[image, density], 1)?;
        let last = self.convs.len() - 1;
        for (i, (conv, norm)) in self.convs.iter().enumerate() {
            x = conv.forward(&x)?;
            if let Some(n) = norm {
                x = n.forward(&x)?;
            }
            if i < last {
                x = candle_nn::ops::leaky_relu(&x, 0.2)?;
            }
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{DType, Device};
    use candle_nn::VarMap;

    #[test]
    fn patch_grid_shape() {
        let vars = VarMap::new();
        let vb = VarBuilder::from_varmap(&vars, DType::F32, &Device::Cpu);
        let d = Discriminator::new(4, vb).unwrap();
        let img = Tensor::zeros((1, 3, 64, 64), DType::F32, &Device::Cpu).unwrap();
        let map = Tensor::zeros((1, 1, 64, 64), DType::F32, &Device::Cpu).unwrap();
        assert_eq!(d.forward(&img, &map).unwrap().dims(), &[1, 1, 6, 6]);
    }
}
