//! U-Net generator: stride-2 encoder down to a 4x4 bottleneck, mirrored
//! decoder with skip connections, sigmoid output in `[0, 1]`.

use candle_core::{Result, Tensor};
use candle_nn::{Conv2d, ConvTranspose2d, GroupNorm, Module, VarBuilder};

use crate::layers::{down_conv, instance_norm, up_conv};

pub(crate) const IMAGE_CHANNELS: usize = 3;

struct Down {
    conv: Conv2d,
    norm: Option<GroupNorm>,
}

struct Up {
    conv: ConvTranspose2d,
    norm: Option<GroupNorm>,
}

pub struct Generator {
    downs: Vec<Down>,
    ups: Vec<Up>,
}

fn width(base: usize, level: usize) -> usize {
    base * (1usize << level.min(3))
}

impl Generator {
    pub fn new(depth: usize, base: usize, vb: VarBuilder) -> Result<Self> {
        let mut downs = Vec::with_capacity(depth);
        for i in 0..depth {
            let cin = if i == 0 { IMAGE_CHANNELS } else { width(base, i - 1) };
            let cout = width(base, i);
            let vb = vb.pp(format!("down{i}"));
            let conv = down_conv(cin, cout, vb.pp("conv"))?;
            let norm = if i == 0 || i + 1 == depth {
                None
            } else {
                Some(instance_norm(cout, vb.pp("norm"))?)
            };
            downs.push(Down { conv, norm });
        }
        let mut ups = Vec::with_capacity(depth);
        for i in 0..depth {
            let cin = if i + 1 == depth { width(base, i) } else { 2 * width(base, i) };
            let vb = vb.pp(format!("up{i}"));
            let (cout, norm) = if i == 0 {
                (1, None)
            } else {
                let c = width(base, i - 1);
                (c, Some(instance_norm(c, vb.pp("norm"))?))
            };
            ups.push(Up {
                conv: up_conv(cin, cout, vb.pp("conv"))?,
                norm,
            });
        }
        Ok(Self { downs, ups })
    }

    /// `(N, 3, S, S)` in `[-1, 1]` to `(N, 1, S, S)` in `[0, 1]`.
    pub fn forward(&self, image: &Tensor) -> Result<Tensor> {
        let mut skips = Vec::with_capacity(self.downs.len());
        let mut x = image.clone();
        for (i, d) in self.downs.iter().enumerate() {
            if i > 0 {
                x = candle_nn::ops::leaky_relu(&x, 0.2)?;
            }
            x = d.conv.forward(&x)?;
            if let Some(n) = &d.norm {
                x = n.forward(&x)?;
            }
            skips.push(x.clone());
        }
        for (i, u) in self.ups.iter().enumerate().rev() {
            if i + 1 < self.ups.len() {
                x = Tensor::cat(&[&x, &skips[i]], 1)?;
            }
            x = u.conv.forward(&x.relu()?)?;
            if let Some(n) = &u.norm {
                x = n.forward(&x)?;
            }
        }
        candle_nn::ops::sigmoid(&x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{DType, Device};
    use candle_nn::VarMap;

    #[test]
    fn output_shape_and_range() {
        let vars = VarMap::new();
        let vb = VarBuilder::from_varmap(&vars, DType::F32, &Device::Cpu);
        let g = Generator::new(3, 4, vb).unwrap();
        let x = Tensor::randn(0f32, 1.0, (2, 3, 32, 32), &Device::Cpu).unwrap();
        let y = g.forward(&x).unwrap();
        assert_eq!(y.dims(), &[2, 1, 32, 32]);
        let v: Vec<f32> = y.flatten_all().unwrap().to_vec1().unwrap();
        assert!(v.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn channel_widths_cap_at_eight_times_base() {
        assert_eq!((0..6).map(|i| width(2, i)).collect::<Vec<_>>(), vec![2, 4, 8, 16, 16, 16]);
    }
}
