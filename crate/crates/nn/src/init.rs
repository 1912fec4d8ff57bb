//! Seeded parameter initialization.
//!
//! Candle draws initial weights from a thread-local generator, so every
//! model here overwrites its parameters from a ChaCha stream walked in
//! sorted-name order. Same seed, same weights.

use candle_core::{Device, Tensor};
use candle_nn::VarMap;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamInit {
    Normal { mean: f64, std: f64 },
    Const(f32),
}

pub fn reinit_vars(
    vars: &VarMap,
    seed: u64,
    rule: impl Fn(&str, &[usize]) -> ParamInit,
) -> Result<()> {
    let data = vars.data().lock().expect("var map lock poisoned");
    let mut names: Vec<&String> = data.keys().collect();
    names.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for name in names {
        let var = &data[name];
        let dims = var.dims().to_vec();
        let n: usize = dims.iter().product();
        let values: Vec<f32> = match rule(name, &dims) {
            ParamInit::Const(c) => vec![c; n],
            ParamInit::Normal { mean, std } => {
                let dist = Normal::new(mean, std).expect("valid normal parameters");
                (0..n).map(|_| dist.sample(&mut rng) as f32).collect()
            }
        };
        var.set(&Tensor::from_vec(values, dims.as_slice(), &Device::Cpu)?)?;
    }
    Ok(())
}

/// Copies of every parameter keyed by name.
pub fn snapshot(vars: &VarMap) -> Result<Vec<(String, Tensor)>> {
    let data = vars.data().lock().expect("var map lock poisoned");
    let mut out = data
        .iter()
        .map(|(k, v)| Ok((k.clone(), v.as_tensor().copy()?)))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

pub fn restore(vars: &VarMap, saved: &[(String, Tensor)]) -> Result<()> {
    let data = vars.data().lock().expect("var map lock poisoned");
    for (name, t) in saved {
        if let Some(var) = data.get(name) {
            var.set(t)?;
        }
    }
    Ok(())
}
