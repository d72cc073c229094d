use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Model, ModelConfig};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::text::Vocabulary;

const MAGIC: &[u8; 8] = b"SIMPCKPT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub tensor: Tensor,
}

/// Binary container: a JSON header followed by raw little-endian `f64`
/// tensor data, so values round-trip bitwise.
///
/// Layout: 8-byte magic, `u32` version, `u64` header length, header JSON
/// (`{"meta": .., "tensors": [{"name", "shape"}, ..]}`), then each tensor's
/// values in header order.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: Value,
    pub tensors: Vec<NamedTensor>,
}

#[derive(Serialize, Deserialize)]
struct Descriptor {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    meta: Value,
    tensors: Vec<Descriptor>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name).map(|t| &t.tensor)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            meta: self.meta.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Descriptor {
                    name: t.name.clone(),
                    shape: t.tensor.shape().to_vec(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| corrupt(e.to_string()))?;
        let values: usize = self.tensors.iter().map(|t| t.tensor.len()).sum();
        let mut out = Vec::with_capacity(20 + json.len() + 8 * values);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for t in &self.tensors {
            for v in t.tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(corrupt("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(corrupt(format!("unsupported checkpoint version {version}")));
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let body = bytes
            .get(20..20 + header_len)
            .ok_or_else(|| corrupt("truncated header"))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| corrupt(e.to_string()))?;
        let mut offset = 20 + header_len;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for d in header.tensors {
            let len: usize = d.shape.iter().product();
            let raw = bytes
                .get(offset..offset + 8 * len)
                .ok_or_else(|| corrupt(format!("truncated data for `{}`", d.name)))?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            offset += 8 * len;
            tensors.push(NamedTensor {
                name: d.name,
                tensor: Tensor::new(d.shape, data)?,
            });
        }
        if offset != bytes.len() {
            return Err(corrupt("trailing bytes after tensor data"));
        }
        Ok(Self {
            meta: header.meta,
            tensors,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

impl Model {
    /// Checkpoint holding the config, vocabulary and every parameter.
    pub fn to_checkpoint(&self) -> Result<Checkpoint> {
        let meta = serde_json::json!({
            "model": self.config,
            "vocab": self.vocab,
        });
        Ok(Checkpoint {
            meta,
            tensors: self
                .store
                .iter()
                .map(|(_, p)| NamedTensor {
                    name: p.name.clone(),
                    tensor: p.value.clone(),
                })
                .collect(),
        })
    }

    /// Rebuilds a model from a checkpoint written by [`Model::to_checkpoint`],
    /// possibly with extra tensors and metadata.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let config: ModelConfig = serde_json::from_value(ckpt.meta.get("model").cloned().unwrap_or(Value::Null))
            .map_err(|e| corrupt(format!("model config: {e}")))?;
        let vocab: Vocabulary = serde_json::from_value(ckpt.meta.get("vocab").cloned().unwrap_or(Value::Null))
            .map_err(|e| corrupt(format!("vocabulary: {e}")))?;
        let mut model = Model::new(config, vocab, None, 0)?;
        let ids: Vec<_> = model.store.iter().map(|(id, p)| (id, p.name.clone())).collect();
        for (id, name) in ids {
            let t = ckpt
                .tensor(&name)
                .ok_or_else(|| corrupt(format!("missing parameter `{name}`")))?;
            if t.shape() != model.store.value(id).shape() {
                return Err(corrupt(format!(
                    "parameter `{name}` has shape {:?}, expected {:?}",
                    t.shape(),
                    model.store.value(id).shape()
                )));
            }
            *model.store.value_mut(id) = t.clone();
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint()?.write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::read(path)?)
    }
}
