//! NNW weight files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "NNW1"  u32 record_count
//! record* := u8 kind  u8 dim_count  u32 dims[dim_count]  [f32 weight[..]  f32 bias[..]]
//! u32 crc32 of every preceding byte
//! ```
//!
//! Record dims by kind: Conv2D `[in_h, in_w, kernel, stride, padding]`
//! (weight `kernel*kernel`, bias 1); MaxPool2D `[in_h, in_w, size, stride]`;
//! Linear `[out, in]` (weight `out*in`, bias `out`); ReLU, Flatten and Tanh
//! carry their input shape.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::layer::{Conv2d, Layer, LayerKind, Linear, MaxPool2d};
use super::network::{NetError, Network};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"NNW1";
const MAX_DIMS: usize = 8;
const MAX_ELEMENTS: usize = 1 << 28;

#[derive(Debug, Error)]
pub enum NnwError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("bad magic bytes, expected \"NNW1\"")]
    BadMagic,
    #[error("file declares zero layer records")]
    NoLayers,
    #[error("record {index}: {reason}")]
    Record { index: usize, reason: String },
    #[error("file truncated before the trailing checksum")]
    MissingChecksum,
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("{0} unexpected trailing bytes after checksum")]
    Trailing(usize),
    #[error("layers do not form a valid network: {0}")]
    Network(#[from] NetError),
}

pub fn encode(net: &Network) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        let dims: Vec<usize> = match layer {
            Layer::Conv2d(c) => vec![c.in_h, c.in_w, c.kernel, c.stride, c.padding],
            Layer::MaxPool2d(p) => vec![p.in_h, p.in_w, p.size, p.stride],
            Layer::Linear(l) => vec![l.out_dim(), l.in_dim()],
            Layer::Relu(s) | Layer::Flatten(s) | Layer::Tanh(s) => s.clone(),
        };
        out.push(layer.kind() as u8);
        out.push(dims.len() as u8);
        for d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for p in layer.params() {
            for v in p.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Network, NnwError> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4) != Some(MAGIC.as_slice()) {
        return Err(NnwError::BadMagic);
    }
    let count = cur.u32().ok_or(NnwError::Record {
        index: 0,
        reason: "truncated record count".into(),
    })? as usize;
    if count == 0 {
        return Err(NnwError::NoLayers);
    }
    let mut layers = Vec::new();
    for index in 0..count {
        layers.push(read_record(&mut cur, index)?);
    }
    let body_len = cur.pos;
    let stored = cur.u32().ok_or(NnwError::MissingChecksum)?;
    let computed = crc32fast::hash(&bytes[..body_len]);
    if stored != computed {
        return Err(NnwError::Checksum { stored, computed });
    }
    if cur.pos != bytes.len() {
        return Err(NnwError::Trailing(bytes.len() - cur.pos));
    }
    Ok(Network::from_layers(layers)?)
}

fn read_record(cur: &mut Cursor<'_>, index: usize) -> Result<Layer, NnwError> {
    let err = |reason: String| NnwError::Record { index, reason };
    let tag = cur.u8().ok_or_else(|| err("truncated kind tag".into()))?;
    let kind = LayerKind::from_tag(tag).ok_or_else(|| err(format!("unknown kind tag {tag}")))?;
    let dim_count = cur.u8().ok_or_else(|| err("truncated dim count".into()))? as usize;
    if dim_count == 0 && !matches!(kind, LayerKind::Relu | LayerKind::Tanh | LayerKind::Flatten)
        || dim_count > MAX_DIMS
    {
        return Err(err(format!("{} record has {dim_count} dims", kind.name())));
    }
    let mut dims = Vec::with_capacity(dim_count);
    for _ in 0..dim_count {
        let d = cur.u32().ok_or_else(|| err("truncated dims".into()))? as usize;
        dims.push(d);
    }
    let expect = |n: usize| -> Result<(), NnwError> {
        if dims.len() != n {
            Err(err(format!(
                "{} record needs {n} dims, has {}",
                kind.name(),
                dims.len()
            )))
        } else {
            Ok(())
        }
    };
    let mut read_tensor = |shape: &[usize]| -> Result<Tensor, NnwError> {
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|&n| n <= MAX_ELEMENTS && n > 0);
        let n = n.ok_or_else(|| err(format!("unreasonable tensor shape {shape:?}")))?;
        let raw = cur
            .take(n * 4)
            .ok_or_else(|| err("truncated parameter data".into()))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Tensor::new(shape.to_vec(), data).map_err(|e| err(e.to_string()))
    };
    let layer = match kind {
        LayerKind::Conv2d => {
            expect(5)?;
            let k = dims[2];
            let weight = read_tensor(&[k, k])?;
            let bias = read_tensor(&[1])?;
            Layer::Conv2d(Conv2d {
                in_h: dims[0],
                in_w: dims[1],
                kernel: k,
                stride: dims[3],
                padding: dims[4],
                weight,
                bias,
            })
        }
        LayerKind::MaxPool2d => {
            expect(4)?;
            Layer::MaxPool2d(MaxPool2d {
                in_h: dims[0],
                in_w: dims[1],
                size: dims[2],
                stride: dims[3],
            })
        }
        LayerKind::Linear => {
            expect(2)?;
            let weight = read_tensor(&[dims[0], dims[1]])?;
            let bias = read_tensor(&[dims[0]])?;
            Layer::Linear(Linear { weight, bias })
        }
        LayerKind::Relu => Layer::Relu(dims),
        LayerKind::Flatten => Layer::Flatten(dims),
        LayerKind::Tanh => Layer::Tanh(dims),
    };
    Ok(layer)
}

pub fn save(net: &Network, path: &Path) -> Result<(), NnwError> {
    fs::write(path, encode(net)).map_err(|source| NnwError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load(path: &Path) -> Result<Network, NnwError> {
    let bytes = fs::read(path).map_err(|source| NnwError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}
