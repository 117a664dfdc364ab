//! Checkpoints, bit-packed quantized export and model-size accounting.
//!
//! All multi-byte fields are little-endian. Both formats start with a 4-byte
//! magic and a `u16` version, followed by the JSON network spec prefixed by
//! its `u32` length.

mod checkpoint;
mod packing;
mod quantized;

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

pub use checkpoint::{
    load_checkpoint, load_checkpoint_with_meta, save_checkpoint, save_checkpoint_with,
    CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use packing::{pack_indices, packed_len, unpack_indices};
pub use quantized::{
    export_quantized, import_quantized, read_quantized, ExportSummary, QuantizedLayer,
    QuantizedModel, QUANT_MAGIC, QUANT_VERSION,
};

use crate::error::{Error, Result};
use crate::network::{Network, NetworkSpec};

/// Fixed header of the quantized file that is counted as model size:
/// magic, version and layer count.
pub const SIZE_HEADER_BYTES: u64 = 8;
/// Per-layer metadata counted as model size: kind, weight count, bits,
/// level min/max, alpha and beta.
pub const SIZE_LAYER_BYTES: u64 = 26;

/// Storage for the synaptic weights at `bits` precision.
///
/// At 32 bits this is exactly `4 * P`. Low-bit sizes add the packed indices
/// of every layer plus the header and per-layer metadata; the JSON topology
/// description is not counted.
pub fn model_size_bytes(net: &Network, bits: u32) -> Result<u64> {
    let counts: Vec<u64> = net
        .synapses()
        .iter()
        .flatten()
        .map(|s| s.weights.len() as u64)
        .collect();
    size_for_counts(&counts, bits)
}

pub(crate) fn size_for_counts(counts: &[u64], bits: u32) -> Result<u64> {
    match bits {
        32 => Ok(4 * counts.iter().sum::<u64>()),
        1 | 2 | 4 | 8 => Ok(SIZE_HEADER_BYTES
            + counts
                .iter()
                .map(|&p| (p * bits as u64).div_ceil(8) + SIZE_LAYER_BYTES)
                .sum::<u64>()),
        other => Err(Error::UnsupportedBits(other)),
    }
}

/// `model_size_bytes(net, 32) / model_size_bytes(net, bits)`.
pub fn compression_ratio(net: &Network, bits: u32) -> Result<f64> {
    Ok(model_size_bytes(net, 32)? as f64 / model_size_bytes(net, bits)? as f64)
}

pub(crate) fn spec_blob(spec: &NetworkSpec) -> Result<Vec<u8>> {
    Ok(serde_json::to_vec(spec)?)
}

pub(crate) fn spec_hash(blob: &[u8]) -> [u8; 32] {
    Sha256::digest(blob).into()
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes to a sibling temp file, then renames over `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParam(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

/// Little-endian cursor that reports the offset of any short read.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated {
                offset: self.pos as u64,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut a = [0u8; N];
        a.copy_from_slice(self.take(N)?);
        Ok(a)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    pub fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let found: [u8; 4] = self.array()?;
        if found != expected {
            return Err(Error::BadMagic { expected, found });
        }
        Ok(())
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::TrailingBytes {
                offset: self.pos as u64,
            });
        }
        Ok(())
    }
}
