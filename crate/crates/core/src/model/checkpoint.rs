//! Parameter checkpoints.
//!
//! Layout:
//!
//! ```text
//! bytes 0..8     magic "NGCCKPT1"
//! bytes 8..16    header length H, u64 little-endian
//! bytes 16..16+H JSON header {"config": ModelConfig, "tensors": [{"name", "shape"}, ...]}
//! rest           every tensor's values as f64 little-endian, in header order
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::init_shapes;
use super::{init_params, ModelConfig, ModelParams};
use crate::error::{NgcError, Result};

pub const MAGIC: &[u8; 8] = b"NGCCKPT1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
}

pub fn write_checkpoint<W: Write>(params: &ModelParams, mut out: W) -> Result<()> {
    let named = params.named();
    let header = Header {
        config: params.config,
        tensors: named
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header)?;
    out.write_all(MAGIC)?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    for (_, t) in &named {
        for v in &t.values {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<ModelParams> {
    let mut magic = [0u8; 8];
    input
        .read_exact(&mut magic)
        .map_err(|e| NgcError::Load(format!("checkpoint too short: {e}")))?;
    if &magic != MAGIC {
        return Err(NgcError::Load("not a checkpoint (bad magic)".into()));
    }
    let mut len = [0u8; 8];
    input
        .read_exact(&mut len)
        .map_err(|e| NgcError::Load(format!("truncated header length: {e}")))?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 24 {
        return Err(NgcError::Load(format!("implausible header length {len}")));
    }
    let mut json = vec![0u8; len];
    input
        .read_exact(&mut json)
        .map_err(|e| NgcError::Load(format!("truncated header: {e}")))?;
    let header: Header =
        serde_json::from_slice(&json).map_err(|e| NgcError::Load(format!("bad checkpoint header: {e}")))?;
    header
        .config
        .validate()
        .map_err(|e| NgcError::Load(format!("checkpoint config: {e}")))?;
    let mut params = init_params(&header.config)?;
    let expected = init_shapes(&header.config);
    if header.tensors.len() != expected.len() {
        return Err(NgcError::Load(format!(
            "header lists {} tensors, config implies {}",
            header.tensors.len(),
            expected.len()
        )));
    }
    let names: Vec<String> = params.named().into_iter().map(|(n, _)| n).collect();
    for ((entry, shape), name) in header.tensors.iter().zip(&expected).zip(&names) {
        if &entry.name != name || &entry.shape != shape {
            return Err(NgcError::Load(format!(
                "tensor {} {:?} where {name} {shape:?} expected",
                entry.name, entry.shape
            )));
        }
    }
    let mut buf = [0u8; 8];
    for t in params.tensors_mut() {
        for v in t.values.iter_mut() {
            input
                .read_exact(&mut buf)
                .map_err(|e| NgcError::Load(format!("truncated tensor data: {e}")))?;
            *v = f64::from_le_bytes(buf);
        }
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(NgcError::Load(format!("{} trailing bytes after tensor data", rest.len())));
    }
    params.validate().map_err(|e| NgcError::Load(e.to_string()))?;
    Ok(params)
}

pub fn save(params: &ModelParams, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| NgcError::Io(format!("{}: {e}", path.display())))?;
    write_checkpoint(params, std::io::BufWriter::new(file))
}

pub fn load(path: &Path) -> Result<ModelParams> {
    let file = std::fs::File::open(path).map_err(|e| NgcError::Load(format!("{}: {e}", path.display())))?;
    read_checkpoint(std::io::BufReader::new(file))
}
