//! Model checkpoints.
//!
//! ```text
//! magic        4 bytes "CAAM"
//! version      u16
//! n_rows, filters1, filters2, num_classes   u32 each
//! num_params   u64
//! params       num_params f32
//! checksum     u64, FNV-1a 64 of everything before it
//! ```

use std::path::Path;

use super::model::{Cnn3, Cnn3Spec};
use crate::dataset::Fnv1a64;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CAAM";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 * 4 + 8;

pub fn write_checkpoint(model: &Cnn3<f32>) -> Vec<u8> {
    let s = model.spec();
    let mut out = Vec::with_capacity(HEADER_LEN + model.num_params() * 4 + 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in [s.n_rows, s.filters1, s.filters2, s.num_classes] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&(model.num_params() as u64).to_le_bytes());
    for p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let sum = Fnv1a64::hash(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Cnn3<f32>> {
    if bytes.len() < HEADER_LEN + 8 {
        return Err(Error::Length {
            expected: (HEADER_LEN + 8) as u64,
            found: bytes.len() as u64,
        });
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Format("not a CNN-3 checkpoint (bad magic)".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let u = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let spec = Cnn3Spec {
        n_rows: u(6),
        filters1: u(10),
        filters2: u(14),
        num_classes: u(18),
    };
    let num_params = u64::from_le_bytes(bytes[22..30].try_into().unwrap());
    let expected = HEADER_LEN as u64 + num_params * 4 + 8;
    if bytes.len() as u64 != expected {
        return Err(Error::Length {
            expected,
            found: bytes.len() as u64,
        });
    }
    let body = &bytes[..bytes.len() - 8];
    let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
    let found = Fnv1a64::hash(body);
    if found != stored {
        return Err(Error::Corruption {
            expected: stored,
            found,
        });
    }
    let params = body[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Cnn3::from_params(spec, params)
}

pub fn save_checkpoint(model: &Cnn3<f32>, path: &Path) -> Result<()> {
    std::fs::write(path, write_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Cnn3<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}
