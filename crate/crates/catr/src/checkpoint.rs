//! Binary checkpoints, little-endian throughout:
//!
//! | bytes            | content                                  |
//! |------------------|------------------------------------------|
//! | 4                | magic `CATR`                             |
//! | 4                | format version (u32)                     |
//! | 4                | layer count `n` (u32)                    |
//! | 8 · n            | `(fan_in, fan_out)` per layer (u32 pairs) |
//! | 8 · params       | parameters as f64 in flat order          |

use std::path::Path;

use catr_core::nn::{LayerShape, Layout, ModelParams};

pub const MAGIC: &[u8; 4] = b"CATR";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a checkpoint (bad magic)")]
    Magic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("checkpoint has {0} trailing bytes")]
    Trailing(usize),
    #[error("checkpoint layout does not match the configured network: {0}")]
    Layout(String),
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
}

pub fn encode(params: &ModelParams) -> Vec<u8> {
    let shapes = params.layout().shapes();
    let mut out = Vec::with_capacity(12 + 8 * shapes.len() + 8 * params.values().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(shapes.len() as u32).to_le_bytes());
    for s in shapes {
        out.extend_from_slice(&(s.fan_in as u32).to_le_bytes());
        out.extend_from_slice(&(s.fan_out as u32).to_le_bytes());
    }
    for v in params.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.bytes.len() < n {
            return Err(CheckpointError::Truncated);
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ModelParams, CheckpointError> {
    let mut r = Reader { bytes };
    if r.take(4)? != MAGIC {
        return Err(CheckpointError::Magic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let layers = r.u32()? as usize;
    if layers > 1024 {
        return Err(CheckpointError::Layout(format!("{layers} layers")));
    }
    let mut shapes = Vec::with_capacity(layers);
    for _ in 0..layers {
        let fan_in = r.u32()? as usize;
        let fan_out = r.u32()? as usize;
        shapes.push(LayerShape { fan_in, fan_out });
    }
    let layout = Layout::from_shapes(&shapes).map_err(|e| CheckpointError::Layout(e.to_string()))?;
    let mut values = Vec::with_capacity(layout.param_count());
    for _ in 0..layout.param_count() {
        values.push(f64::from_le_bytes(r.take(8)?.try_into().expect("8 bytes")));
    }
    if !r.bytes.is_empty() {
        return Err(CheckpointError::Trailing(r.bytes.len()));
    }
    ModelParams::from_values(layout, values).map_err(|e| CheckpointError::Layout(e.to_string()))
}

pub fn save(params: &ModelParams, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, encode(params))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ModelParams, CheckpointError> {
    decode(&std::fs::read(path)?)
}

/// Loads a checkpoint and checks it against the network the config describes.
pub fn load_matching(path: &Path, expected: &Layout) -> Result<ModelParams, CheckpointError> {
    let params = load(path)?;
    if params.layout().shapes() != expected.shapes() {
        return Err(CheckpointError::Layout(format!(
            "file has {} layers / {} parameters, config expects {} layers / {} parameters",
            params.layout().shapes().len(),
            params.layout().param_count(),
            expected.shapes().len(),
            expected.param_count()
        )));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use catr_core::nn::NetConfig;

    fn small() -> ModelParams {
        let net = NetConfig { route_hidden: 4, node_embed: 3, fusion: 5, trunk: 4, hftr_levels: 2, value_heads: 5 };
        ModelParams::init(Layout::new(net).unwrap(), 9)
    }

    #[test]
    fn round_trip_is_exact() {
        let p = small();
        let back = decode(&encode(&p)).unwrap();
        assert_eq!(back.layout().shapes(), p.layout().shapes());
        assert_eq!(back.values(), p.values());
    }

    #[test]
    fn header_layout() {
        let p = small();
        let bytes = encode(&p);
        assert_eq!(&bytes[..4], b"CATR");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        let n = p.layout().shapes().len();
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize, n);
        assert_eq!(bytes.len(), 12 + 8 * n + 8 * p.layout().param_count());
        // first layer is the route branch input: 9 routing features in
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 9);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = encode(&small());
        assert!(matches!(decode(b"NOPE"), Err(CheckpointError::Magic)));
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(CheckpointError::Truncated)));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode(&extra), Err(CheckpointError::Trailing(1))));
        let mut version = bytes.clone();
        version[4] = 7;
        assert!(matches!(decode(&version), Err(CheckpointError::Version(7))));
        let mut shape = bytes;
        shape[12] = 10;
        assert!(matches!(decode(&shape), Err(CheckpointError::Layout(_))));
    }
}
