//! Single-file tensor container.
//!
//! Layout: `b"TDCK"`, `u32` format version, `u64` header length, the JSON
//! header, then every tensor's values as little-endian `f64` in header
//! order. Offsets in the header count bytes from the start of the payload.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ParamStore, Tensor};
use crate::toymodel::{ModelDims, ModelPolicy, ToyVqaModel};

pub const MAGIC: &[u8; 4] = b"TDCK";
pub const VERSION: u32 = 1;
const PREFIX: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
    pub offset: u64,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub dtype: String,
    pub config_hash: String,
    pub dims: ModelDims,
    /// Absent for a bare backbone.
    pub policy: Option<ModelPolicy>,
    pub best_epoch: Option<usize>,
    pub best_val_loss: Option<f64>,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub values: Vec<Tensor>,
}

impl Checkpoint {
    pub fn of_model(model: &ToyVqaModel, config_hash: &str) -> Self {
        let mut tensors = Vec::new();
        let mut values = Vec::new();
        let mut offset = 0u64;
        for (_, p) in model.store.iter() {
            let bytes = 8 * p.value.numel() as u64;
            tensors.push(TensorEntry {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
                trainable: p.trainable,
                offset,
                bytes,
            });
            offset += bytes;
            values.push(p.value.clone());
        }
        Self {
            header: CheckpointHeader {
                dtype: "f64".into(),
                config_hash: config_hash.into(),
                dims: model.dims.clone(),
                policy: model.policy.clone(),
                best_epoch: None,
                best_val_loss: None,
                tensors,
            },
            values,
        }
    }

    pub fn with_best(mut self, epoch: usize, val_loss: f64) -> Self {
        self.header.best_epoch = Some(epoch);
        self.header.best_val_loss = Some(val_loss);
        self
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let payload: usize = self.values.iter().map(|t| 8 * t.numel()).sum();
        let mut out = Vec::with_capacity(PREFIX + header.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for t in &self.values {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: String| Error::Format(format!("checkpoint: {msg}"));
        if bytes.len() < PREFIX || &bytes[..4] != MAGIC {
            return Err(bad("missing TDCK magic".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(bad(format!("unsupported format version {version}")));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = PREFIX
            .checked_add(header_len)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| bad(format!("header length {header_len} exceeds file")))?;
        let header: CheckpointHeader = serde_json::from_slice(&bytes[PREFIX..body])
            .map_err(|e| bad(format!("header: {e}")))?;
        if header.dtype != "f64" {
            return Err(bad(format!("unsupported dtype `{}`", header.dtype)));
        }
        let payload = &bytes[body..];
        let mut values = Vec::with_capacity(header.tensors.len());
        let mut expected = 0u64;
        for e in &header.tensors {
            let numel: usize = e.shape.iter().product();
            if e.offset != expected || e.bytes != 8 * numel as u64 {
                return Err(bad(format!(
                    "tensor `{}` has inconsistent offset or size",
                    e.name
                )));
            }
            let (start, end) = (e.offset as usize, (e.offset + e.bytes) as usize);
            if end > payload.len() {
                return Err(bad(format!(
                    "tensor `{}` runs past the end of the file",
                    e.name
                )));
            }
            let data = payload[start..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            values.push(Tensor::new(e.shape.clone(), data)?);
            expected = e.offset + e.bytes;
        }
        if expected as usize != payload.len() {
            return Err(bad(format!(
                "{} trailing payload bytes",
                payload.len() - expected as usize
            )));
        }
        Ok(Self { header, values })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Fails unless the checkpoint was written under `hash`.
    pub fn expect_hash(&self, hash: &str) -> Result<()> {
        if self.header.config_hash != hash {
            return Err(Error::Config(format!(
                "checkpoint was written for config {} but this config hashes to {hash}",
                self.header.config_hash
            )));
        }
        Ok(())
    }

    /// Copies values and flags into a store with exactly the same tensors.
    pub fn apply(&self, store: &mut ParamStore) -> Result<()> {
        if store.len() != self.values.len() {
            return Err(Error::Config(format!(
                "checkpoint holds {} tensors, model has {}",
                self.values.len(),
                store.len()
            )));
        }
        let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
        for ((id, entry), value) in ids.into_iter().zip(&self.header.tensors).zip(&self.values) {
            let p = store.get(id);
            if p.name != entry.name || p.value.shape() != value.shape() {
                return Err(Error::Config(format!(
                    "checkpoint tensor `{}` {:?} does not match model tensor `{}` {:?}",
                    entry.name,
                    value.shape(),
                    p.name,
                    p.value.shape()
                )));
            }
            *store.value_mut(id) = value.clone();
            store.set_trainable(id, entry.trainable);
        }
        Ok(())
    }

    /// Rebuilds the model the checkpoint was taken from.
    pub fn to_model(&self) -> Result<ToyVqaModel> {
        let mut model = ToyVqaModel::backbone(&self.header.dims, 0)?;
        if let Some(policy) = &self.header.policy {
            model.freeze();
            model.wrap(policy, 0)?;
        }
        self.apply(&mut model.store)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::AdapterKind;

    fn model() -> ToyVqaModel {
        let mut m = ToyVqaModel::backbone(&ModelDims::default(), 4).unwrap();
        m.freeze();
        m.wrap(
            &ModelPolicy::with_vision(crate::adapters::AdapterConfig::of_kind(
                AdapterKind::TemporalDora,
            )),
            5,
        )
        .unwrap();
        m
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let ck = Checkpoint::of_model(&model(), "abc").with_best(3, 0.1 + 0.2);
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert_eq!(back.header.best_val_loss, Some(0.1 + 0.2));
    }

    #[test]
    fn rebuilt_model_matches_bitwise() {
        let m = model();
        let rebuilt = Checkpoint::of_model(&m, "h").to_model().unwrap();
        for ((_, a), (_, b)) in m.store.iter().zip(rebuilt.store.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.trainable, b.trainable);
            assert!(a
                .value
                .data()
                .iter()
                .zip(b.value.data())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn corrupt_files_are_format_errors() {
        let bytes = Checkpoint::of_model(&model(), "h").to_bytes().unwrap();
        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        let mut wrong_version = bytes.clone();
        wrong_version[4] = 9;
        let truncated = &bytes[..bytes.len() - 8];
        let mut extra = bytes.clone();
        extra.push(0);
        for b in [
            &wrong_magic[..],
            &wrong_version[..],
            truncated,
            &extra[..],
            &bytes[..10],
        ] {
            assert!(matches!(Checkpoint::from_bytes(b), Err(Error::Format(_))));
        }
    }

    #[test]
    fn hash_and_layout_mismatches_are_config_errors() {
        let ck = Checkpoint::of_model(&model(), "h");
        assert!(matches!(ck.expect_hash("other"), Err(Error::Config(_))));
        let mut backbone = ToyVqaModel::backbone(&ModelDims::default(), 4).unwrap();
        assert!(matches!(
            ck.apply(&mut backbone.store),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn unwritable_path_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        fs::write(&file, b"x").unwrap();
        let ck = Checkpoint::of_model(&model(), "h");
        assert!(matches!(
            ck.save(&file.join("sub/ck.tdck")),
            Err(Error::Io { .. })
        ));
        ck.save(&dir.path().join("new/dir/ck.tdck")).unwrap();
    }
}
