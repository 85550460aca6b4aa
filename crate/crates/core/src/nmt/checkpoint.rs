//! Model persistence.
//!
//! Layout: the 5-byte magic `VBNN1`, a little-endian u32 header length,
//! a JSON header carrying the model spec, seed, epoch, and tensor
//! shapes, then each tensor's data as little-endian f32 in header order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelSpec, NmtError};
use crate::neural::Tensor;

pub const MAGIC: &[u8; 5] = b"VBNN1";
const FORMAT_VERSION: u32 = 1;
/// Caps header allocation when reading untrusted files.
const MAX_HEADER_LEN: u32 = 1 << 20;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    spec: ModelSpec,
    seed: u64,
    epoch: usize,
    tensors: Vec<TensorEntry>,
}

/// Provenance recorded alongside the weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub epoch: usize,
}

pub fn save_checkpoint(
    model: &Model<f32>,
    meta: CheckpointMeta,
    path: impl AsRef<Path>,
) -> Result<(), NmtError> {
    let mut w = BufWriter::new(File::create(path)?);
    let header = Header {
        format_version: FORMAT_VERSION,
        spec: model.spec,
        seed: meta.seed,
        epoch: meta.epoch,
        tensors: model
            .named_tensors()
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let header_bytes = serde_json::to_vec(&header).expect("header serializes");
    w.write_all(MAGIC)?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for t in model.param_tensors() {
        for &v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Model<f32>, CheckpointMeta), NmtError> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}

/// Decode a checkpoint from raw bytes.
pub fn parse_checkpoint(bytes: &[u8]) -> Result<(Model<f32>, CheckpointMeta), NmtError> {
    read_checkpoint(&mut std::io::Cursor::new(bytes))
}

fn read_checkpoint(r: &mut impl Read) -> Result<(Model<f32>, CheckpointMeta), NmtError> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NmtError::VersionMismatch(format!(
            "bad magic {:?}",
            String::from_utf8_lossy(&magic)
        )));
    }
    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes)?;
    let header_len = u32::from_le_bytes(len_bytes);
    if header_len == 0 || header_len > MAX_HEADER_LEN {
        return Err(NmtError::VersionMismatch(format!(
            "implausible header length {header_len}"
        )));
    }
    let mut header_bytes = vec![0u8; header_len as usize];
    r.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| NmtError::VersionMismatch(format!("header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(NmtError::VersionMismatch(format!(
            "format version {}",
            header.format_version
        )));
    }

    // A freshly built model defines the expected tensor list; the header
    // must agree exactly before any data is accepted.
    let skeleton = skeleton_model(header.spec)?;
    let expect_names = skeleton.tensor_names();
    if header.tensors.len() != expect_names.len() {
        return Err(NmtError::VersionMismatch(format!(
            "{} tensors in header, spec wants {}",
            header.tensors.len(),
            expect_names.len()
        )));
    }
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for ((entry, name), expect) in header
        .tensors
        .iter()
        .zip(&expect_names)
        .zip(skeleton.param_tensors())
    {
        if &entry.name != name || entry.shape != expect.shape() {
            return Err(crate::neural::NeuralError::ShapeMismatch(format!(
                "tensor {} shaped {:?}, spec wants {} shaped {:?}",
                entry.name,
                entry.shape,
                name,
                expect.shape()
            ))
            .into());
        }
        let count: usize = entry.shape.iter().product();
        let mut raw = vec![0u8; count * 4];
        r.read_exact(&mut raw)?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        tensors.push(Tensor::from_vec(&entry.shape, data).map_err(NmtError::Neural)?);
    }

    let mut model = skeleton;
    for (dst, src) in model.param_tensors_mut().into_iter().zip(tensors) {
        *dst = src;
    }
    Ok((
        model,
        CheckpointMeta {
            seed: header.seed,
            epoch: header.epoch,
        },
    ))
}

/// Zero-valued model with a validated spec; weights are overwritten by
/// the caller.
fn skeleton_model(spec: ModelSpec) -> Result<Model<f32>, NmtError> {
    let mut model = super::build_model::<f32>(spec, 0)?;
    for t in model.param_tensors_mut() {
        t.fill(0.0);
    }
    Ok(model)
}
