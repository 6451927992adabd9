//! Binary checkpoint container.
//!
//! ```text
//! magic        8 bytes  "SRDFTCKP"
//! version      u32 LE
//! header_len   u64 LE, then header_len bytes of UTF-8 JSON
//!              {"model": ModelConfig, "layout": ModelLayout, "optimizer": OptimizerConfig}
//! adam_step    u64 LE
//! n_arrays     u32 LE
//! per array:   name_len u32 LE, name bytes,
//!              ndim u32 LE, dims u64 LE × ndim,
//!              values f64 LE × prod(dims), row-major
//! ```
//!
//! Arrays are `param/<block>`, `adam_m/<block>`, `adam_v/<block>` for every
//! block of [`Weights::blocks`]. Loading validates everything before
//! returning, so a bad file never yields partial state.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{AdamState, ModelConfig, ModelLayout, ModelParams, OptimizerConfig, Weights};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"SRDFTCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model: ModelConfig,
    layout: ModelLayout,
    optimizer: OptimizerConfig,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_array(out: &mut Vec<u8>, name: &str, m: &DMatrix<f64>) {
    put_u32(out, name.len() as u32);
    out.extend_from_slice(name.as_bytes());
    put_u32(out, 2);
    put_u64(out, m.nrows() as u64);
    put_u64(out, m.ncols() as u64);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
}

pub fn write_checkpoint(params: &ModelParams, state: &AdamState, optimizer: &OptimizerConfig) -> Vec<u8> {
    let header = Header { model: params.config.clone(), layout: params.layout.clone(), optimizer: *optimizer };
    let json = serde_json::to_vec(&header).expect("plain data serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION);
    put_u64(&mut out, json.len() as u64);
    out.extend_from_slice(&json);
    put_u64(&mut out, state.step);
    let groups = [("param", &params.weights), ("adam_m", &state.m), ("adam_v", &state.v)];
    let n: usize = groups.iter().map(|(_, w)| w.blocks().len()).sum();
    put_u32(&mut out, n as u32);
    for (prefix, w) in groups {
        for (name, m) in w.blocks() {
            put_array(&mut out, &format!("{prefix}/{name}"), m);
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("truncated file: need {n} bytes at offset {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("length overflows".into()))
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<(ModelParams, AdamState, OptimizerConfig)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {version}, this build reads version {CHECKPOINT_VERSION}"
        )));
    }
    let header_len = r.len()?;
    let header: Header =
        serde_json::from_slice(r.take(header_len)?).map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
    let step = r.u64()?;
    let n = r.u32()? as usize;
    let mut arrays: HashMap<String, DMatrix<f64>> = HashMap::new();
    for _ in 0..n {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Checkpoint("array name is not UTF-8".into()))?
            .to_string();
        let ndim = r.u32()? as usize;
        if ndim != 2 {
            return Err(Error::Checkpoint(format!("array `{name}` has {ndim} dimensions, expected 2")));
        }
        let (rows, cols) = (r.len()?, r.len()?);
        let count = rows
            .checked_mul(cols)
            .and_then(|c| c.checked_mul(8))
            .ok_or_else(|| Error::Checkpoint(format!("array `{name}` is too large")))?;
        let raw = r.take(count)?;
        let values: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        arrays.insert(name, DMatrix::from_row_slice(rows, cols, &values));
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }

    let template = ModelParams::new(header.model, header.layout)?;
    let mut fill = |prefix: &str| -> Result<Weights> {
        let mut w = Weights::zeros_like(&template.weights);
        for (name, block) in w.blocks_mut() {
            let key = format!("{prefix}/{name}");
            let a = arrays.remove(&key).ok_or_else(|| Error::Checkpoint(format!("missing array `{key}`")))?;
            if a.shape() != block.shape() {
                return Err(Error::Checkpoint(format!(
                    "array `{key}` has shape {:?}, configuration implies {:?}",
                    a.shape(),
                    block.shape()
                )));
            }
            *block = a;
        }
        Ok(w)
    };
    let weights = fill("param")?;
    let m = fill("adam_m")?;
    let v = fill("adam_v")?;
    if let Some(extra) = arrays.keys().next() {
        return Err(Error::Checkpoint(format!("unexpected array `{extra}`")));
    }
    let params = ModelParams { weights, ..template };
    Ok((params, AdamState { step, m, v }, header.optimizer))
}

pub fn save_checkpoint(
    params: &ModelParams,
    state: &AdamState,
    optimizer: &OptimizerConfig,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_checkpoint(params, state, optimizer)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelParams, AdamState, OptimizerConfig)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}
