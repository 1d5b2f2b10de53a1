//! Binary checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "LADC" | u32 version | u64 header length | header JSON (model config + vocabulary)
//! u32 entry count
//! per entry: u32 name length | name (UTF-8) | u8 group | u8 dtype | u32 rank | u64 dims[rank] | values
//! ```
//!
//! The only dtype is `0` (f64, 8 bytes per value).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Vocabulary;
use crate::model::{parameter_layout, Model, ModelConfig, ModelError};
use crate::tensor::{ParamGroup, ParamStore, Tensor};

pub const MAGIC: &[u8; 4] = b"LADC";
pub const VERSION: u32 = 1;
const DTYPE_F64: u8 = 0;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0} (this build reads {VERSION})")]
    UnsupportedVersion(u32),
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CheckpointError>;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: Vocabulary,
}

fn group_tag(g: ParamGroup) -> u8 {
    match g {
        ParamGroup::LanguageModel => 0,
        ParamGroup::Lookahead => 1,
        ParamGroup::Classifier => 2,
    }
}

fn group_from_tag(t: u8) -> Result<ParamGroup> {
    match t {
        0 => Ok(ParamGroup::LanguageModel),
        1 => Ok(ParamGroup::Lookahead),
        2 => Ok(ParamGroup::Classifier),
        _ => Err(CheckpointError::Corrupt(format!("unknown parameter group tag {t}"))),
    }
}

pub fn to_bytes(model: &Model) -> Vec<u8> {
    let header = serde_json::to_vec(&Header {
        config: model.config.clone(),
        vocab: model.vocab.clone(),
    })
    .expect("config and vocabulary always serialize");
    let mut out = Vec::with_capacity(16 + header.len() + model.params.num_scalars() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(model.params.len() as u32).to_le_bytes());
    for (_, p) in model.params.iter() {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.push(group_tag(p.group));
        out.push(DTYPE_F64);
        out.extend_from_slice(&(p.value.shape().len() as u32).to_le_bytes());
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| CheckpointError::Corrupt("length overflows".into()))
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<Model> {
    let mut r = Reader { buf, pos: 0 };
    if buf.len() < 4 || r.take(4)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let header_len = r.len()?;
    let header: Header =
        serde_json::from_slice(r.take(header_len)?).map_err(|e| CheckpointError::Corrupt(format!("header: {e}")))?;
    let layout = parameter_layout(&header.config, header.vocab.len());
    let count = r.u32()? as usize;
    if count != layout.len() {
        return Err(CheckpointError::Corrupt(format!(
            "config expects {} parameters, file has {count}",
            layout.len()
        )));
    }
    let mut params = ParamStore::new();
    for (name, group, shape) in layout {
        let name_len = r.u32()? as usize;
        let found = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| CheckpointError::Corrupt("parameter name is not UTF-8".into()))?;
        if found != name {
            return Err(CheckpointError::Corrupt(format!("expected parameter `{name}`, found `{found}`")));
        }
        if group_from_tag(r.u8()?)? != group {
            return Err(CheckpointError::Corrupt(format!("wrong group for `{name}`")));
        }
        let dtype = r.u8()?;
        if dtype != DTYPE_F64 {
            return Err(CheckpointError::Corrupt(format!("unknown dtype {dtype} for `{name}`")));
        }
        let rank = r.u32()? as usize;
        let dims = (0..rank).map(|_| r.len()).collect::<Result<Vec<_>>>()?;
        if dims != shape {
            return Err(ModelError::Tensor(crate::tensor::TensorError::ShapeMismatch {
                op: "checkpoint",
                left: shape,
                right: dims,
            })
            .into());
        }
        let n: usize = dims.iter().product();
        let bytes = r.take(n.checked_mul(8).ok_or(CheckpointError::Truncated)?)?;
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CheckpointError::Corrupt(format!("non-finite value in `{name}`")));
        }
        params
            .insert(&name, group, Tensor::new(dims, data).map_err(ModelError::from)?)
            .map_err(ModelError::from)?;
    }
    if r.pos != buf.len() {
        return Err(CheckpointError::Corrupt(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Ok(Model::from_parts(header.config, header.vocab, params)?)
}

pub fn save(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    Ok(fs::write(path, to_bytes(model))?)
}

pub fn load(path: impl AsRef<Path>) -> Result<Model> {
    from_bytes(&fs::read(path)?)
}
