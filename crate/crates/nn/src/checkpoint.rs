//! Safetensors checkpoints carrying named parameter groups plus a JSON
//! header describing how to rebuild the model around them.

use std::collections::HashMap;
use std::path::Path;

use candle_core::{Device, Tensor};
use candle_nn::VarMap;
use safetensors::SafeTensors;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "kcalmap-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
const HEADER_KEY: &str = "kcalmap";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointKind {
    Encoder,
    Decoder,
}

#[derive(Serialize, serde::Deserialize)]
struct Envelope<M> {
    format: String,
    version: u32,
    kind: CheckpointKind,
    meta: M,
}

/// Writes every variable of each `(prefix, vars)` group as `prefix.name`.
pub(crate) fn write_checkpoint<M: Serialize>(
    path: &Path,
    kind: CheckpointKind,
    groups: &[(&str, &VarMap)],
    meta: &M,
) -> Result<()> {
    let mut tensors: Vec<(String, Tensor)> = Vec::new();
    for (prefix, vars) in groups {
        for (name, t) in crate::init::snapshot(vars)? {
            tensors.push((format!("{prefix}.{name}"), t));
        }
    }
    let envelope = Envelope {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        kind,
        meta,
    };
    let header = HashMap::from([(HEADER_KEY.to_string(), serde_json::to_string(&envelope)?)]);
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    safetensors::serialize_to_file(tensors, Some(header), path)?;
    Ok(())
}

pub(crate) struct LoadedCheckpoint<M> {
    pub meta: M,
    tensors: HashMap<String, Tensor>,
}

impl<M> LoadedCheckpoint<M> {
    /// Overwrites every variable in `vars` with the stored `prefix.name`.
    pub fn restore_into(&self, prefix: &str, vars: &VarMap) -> Result<()> {
        let data = vars.data().lock().expect("var map lock poisoned");
        for (name, var) in data.iter() {
            let key = format!("{prefix}.{name}");
            let t = self
                .tensors
                .get(&key)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor `{key}`")))?;
            if t.dims() != var.dims() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{key}` has shape {:?}, model expects {:?}",
                    t.dims(),
                    var.dims()
                )));
            }
            var.set(t)?;
        }
        Ok(())
    }

    pub fn has_group(&self, prefix: &str) -> bool {
        let p = format!("{prefix}.");
        self.tensors.keys().any(|k| k.starts_with(&p))
    }
}

/// Reads the header only.
pub fn checkpoint_kind(path: &Path) -> Result<CheckpointKind> {
    let buf = std::fs::read(path)?;
    let env: Envelope<serde_json::Value> = read_envelope(&buf)?;
    Ok(env.kind)
}

fn read_envelope<M: DeserializeOwned>(buf: &[u8]) -> Result<Envelope<M>> {
    let (_, metadata) = SafeTensors::read_metadata(buf)?;
    let text = metadata
        .metadata()
        .as_ref()
        .and_then(|m| m.get(HEADER_KEY))
        .ok_or_else(|| Error::Checkpoint("no model header".into()))?;
    let env: Envelope<M> = serde_json::from_str(text)?;
    if env.format != CHECKPOINT_FORMAT || env.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format {} v{}",
            env.format, env.version
        )));
    }
    Ok(env)
}

pub(crate) fn read_checkpoint<M: DeserializeOwned>(
    path: &Path,
    kind: CheckpointKind,
) -> Result<LoadedCheckpoint<M>> {
    let buf = std::fs::read(path)?;
    let env: Envelope<M> = read_envelope(&buf)?;
    if env.kind != kind {
        return Err(Error::Checkpoint(format!(
            "expected a {kind:?} checkpoint, found {:?}",
            env.kind
        )));
    }
    let tensors = candle_core::safetensors::load_buffer(&buf, &Device::Cpu)?;
    Ok(LoadedCheckpoint {
        meta: env.meta,
        tensors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::DType;
    use candle_nn::{Init, VarBuilder};

    #[test]
    fn roundtrip_and_kind_checks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.safetensors");
        let vars = VarMap::new();
        let vb = VarBuilder::from_varmap(&vars, DType::F32, &Device::Cpu);
        let w = vb.get_with_hints((2, 3), "w", Init::Randn { mean: 0.0, stdev: 1.0 }).unwrap();
        write_checkpoint(&path, CheckpointKind::Decoder, &[("m", &vars)], &42u32).unwrap();
        assert_eq!(checkpoint_kind(&path).unwrap(), CheckpointKind::Decoder);

        let other = VarMap::new();
        let vb2 = VarBuilder::from_varmap(&other, DType::F32, &Device::Cpu);
        let w2 = vb2.get_with_hints((2, 3), "w", Init::Const(0.0)).unwrap();
        let loaded: LoadedCheckpoint<u32> = read_checkpoint(&path, CheckpointKind::Decoder).unwrap();
        assert_eq!(loaded.meta, 42);
        assert!(loaded.has_group("m") && !loaded.has_group("x"));
        loaded.restore_into("m", &other).unwrap();
        let a: Vec<Vec<f32>> = w.to_vec2().unwrap();
        let b: Vec<Vec<f32>> = w2.to_vec2().unwrap();
        assert_eq!(a, b);

        assert!(read_checkpoint::<u32>(&path, CheckpointKind::Encoder).is_err());
        assert!(loaded.restore_into("x", &other).is_err());
        std::fs::write(&path, b"garbage").unwrap();
        assert!(checkpoint_kind(&path).is_err());
    }
}
