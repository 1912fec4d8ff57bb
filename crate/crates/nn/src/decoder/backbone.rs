//! Convolutional regressors mapping a density map to one scalar: a
//! VGG-16 layout with batch norm and ResNet-18 / ResNet-50 layouts, all
//! with channel counts scaled by a base width.

use candle_core::{Result, Tensor};
use candle_nn::{BatchNorm, Conv2d, Conv2dConfig, Linear, Module, ModuleT, VarBuilder};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackboneKind {
    Vgg16,
    Resnet18,
    Resnet50,
}

impl BackboneKind {
    pub const ALL: [BackboneKind; 3] = [Self::Vgg16, Self::Resnet18, Self::Resnet50];

    pub fn name(self) -> &'static str {
        match self {
            Self::Vgg16 => "vgg16",
            Self::Resnet18 => "resnet18",
            Self::Resnet50 => "resnet50",
        }
    }
}

impl std::str::FromStr for BackboneKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown backbone `{s}` (expected vgg16, resnet18 or resnet50)"))
    }
}

impl std::fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Channels the regression decoders read: the map replicated three times.
pub const INPUT_CHANNELS: usize = 3;

fn conv(cin: usize, cout: usize, k: usize, stride: usize, vb: VarBuilder) -> Result<Conv2d> {
    let cfg = Conv2dConfig {
        padding: k / 2,
        stride,
        ..Default::default()
    };
    candle_nn::conv2d_no_bias(cin, cout, k, cfg, vb)
}

fn bn(c: usize, vb: VarBuilder) -> Result<BatchNorm> {
    candle_nn::batch_norm(c, 1e-5, vb)
}

struct ConvBn {
    conv: Conv2d,
    bn: BatchNorm,
}

impl ConvBn {
    fn new(cin: usize, cout: usize, k: usize, stride: usize, vb: VarBuilder, bn_name: &str) -> Result<Self> {
        Ok(Self {
            conv: conv(cin, cout, k, stride, vb.pp("conv"))?,
            bn: bn(cout, vb.pp(bn_name))?,
        })
    }

    fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        self.bn.forward_t(&self.conv.forward(x)?, train)
    }
}

/// The last norm layer of every residual branch is named `bn_out` so that
/// initialization can zero its gain.
pub(crate) const RESIDUAL_OUT_NORM: &str = "bn_out";

struct Block {
    convs: Vec<ConvBn>,
    shortcut: Option<ConvBn>,
}

impl Block {
    fn basic(cin: usize, cout: usize, stride: usize, vb: VarBuilder) -> Result<Self> {
        let convs = vec![
            ConvBn::new(cin, cout, 3, stride, vb.pp("c1"), "bn")?,
            ConvBn::new(cout, cout, 3, 1, vb.pp("c2"), RESIDUAL_OUT_NORM)?,
        ];
        Self::with_shortcut(convs, cin, cout, stride, vb)
    }

    fn bottleneck(cin: usize, planes: usize, stride: usize, vb: VarBuilder) -> Result<Self> {
        let cout = planes * 4;
        let convs = vec![
            ConvBn::new(cin, planes, 1, 1, vb.pp("c1"), "bn")?,
            ConvBn::new(planes, planes, 3, stride, vb.pp("c2"), "bn")?,
            ConvBn::new(planes, cout, 1, 1, vb.pp("c3"), RESIDUAL_OUT_NORM)?,
        ];
        Self::with_shortcut(convs, cin, cout, stride, vb)
    }

    fn with_shortcut(convs: Vec<ConvBn>, cin: usize, cout: usize, stride: usize, vb: VarBuilder) -> Result<Self> {
        let shortcut = if stride != 1 || cin != cout {
            Some(ConvBn::new(cin, cout, 1, stride, vb.pp("shortcut"), "bn")?)
        } else {
            None
        };
        Ok(Self { convs, shortcut })
    }

    fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let mut y = x.clone();
        let last = self.convs.len() - 1;
        for (i, c) in self.convs.iter().enumerate() {
            y = c.forward(&y, train)?;
            if i < last {
                y = y.relu()?;
            }
        }
        let skip = match &self.shortcut {
            Some(s) => s.forward(x, train)?,
            None => x.clone(),
        };
        (y + skip)?.relu()
    }
}

enum Body {
    /// `None` entries are 2x2 max pools.
    Vgg(Vec<Option<ConvBn>>),
    Resnet { stem: ConvBn, blocks: Vec<Block> },
}

pub struct Backbone {
    body: Body,
    hidden: Linear,
    head: Linear,
}

const VGG16: [usize; 18] = [1, 1, 0, 2, 2, 0, 4, 4, 4, 0, 8, 8, 8, 0, 8, 8, 8, 0];

impl Backbone {
    /// `width` plays the role of 64 in the full-size networks.
    pub fn new(kind: BackboneKind, width: usize, hidden: usize, vb: VarBuilder) -> Result<Self> {
        let (body, features) = match kind {
            BackboneKind::Vgg16 => {
                let mut layers = Vec::new();
                let mut cin = INPUT_CHANNELS;
                for (i, &m) in VGG16.iter().enumerate() {
                    if m == 0 {
                        layers.push(None);
                    } else {
                        let c = width * m;
                        layers.push(Some(ConvBn::new(cin, c, 3, 1, vb.pp(format!("features.{i}")), "bn")?));
                        cin = c;
                    }
                }
                (Body::Vgg(layers), cin)
            }
            BackboneKind::Resnet18 | BackboneKind::Resnet50 => {
                let bottleneck = kind == BackboneKind::Resnet50;
                let depths: [usize; 4] = if bottleneck { [3, 4, 6, 3] } else { [2, 2, 2, 2] };
                let stem = ConvBn::new(INPUT_CHANNELS, width, 7, 2, vb.pp("stem"), "bn")?;
                let mut blocks = Vec::new();
                let mut cin = width;
                for (stage, &n) in depths.iter().enumerate() {
                    let planes = width << stage;
                    for b in 0..n {
                        let stride = if stage > 0 && b == 0 { 2 } else { 1 };
                        let vb = vb.pp(format!("layer{}.{b}", stage + 1));
                        let block = if bottleneck {
                            Block::bottleneck(cin, planes, stride, vb)?
                        } else {
                            Block::basic(cin, planes, stride, vb)?
                        };
                        cin = if bottleneck { planes * 4 } else { planes };
                        blocks.push(block);
                    }
                }
                (Body::Resnet { stem, blocks }, cin)
            }
        };
        Ok(Self {
            body,
            hidden: candle_nn::linear(features, hidden, vb.pp("fc1"))?,
            head: candle_nn::linear(hidden, 1, vb.pp("fc2"))?,
        })
    }

    /// `(N, 3, H, W)` to `(N,)` raw outputs.
    pub fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let mut x = x.clone();
        match &self.body {
            Body::Vgg(layers) => {
                for l in layers {
                    x = match l {
                        Some(c) => c.forward(&x, train)?.relu()?,
                        None if x.dim(2)? >= 2 && x.dim(3)? >= 2 => x.max_pool2d(2)?,
                        None => x,
                    };
                }
            }
            Body::Resnet { stem, blocks } => {
                x = stem.forward(&x, train)?.relu()?;
                if x.dim(2)? >= 2 && x.dim(3)? >= 2 {
                    x = x.max_pool2d(2)?;
                }
                for b in blocks {
                    x = b.forward(&x, train)?;
                }
            }
        }
        let pooled = x.mean((2, 3))?;
        let h = self.hidden.forward(&pooled)?.relu()?;
        self.head.forward(&h)?.squeeze(1)
    }
}
