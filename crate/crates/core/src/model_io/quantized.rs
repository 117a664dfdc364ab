//! Bit-packed low-bit model (`SNNQ`).
//!
//! ```text
//! "SNNQ" | version u16 | spec_len u32 | spec JSON | layer count u16
//! per synaptic layer:
//!   kind u8 | weight count u64 | bits u8 | level min f32 | level max f32
//!   alpha f32 | beta f32 | packed level indices
//! ```
//!
//! Indices are packed LSB-first and zero-padded to a byte boundary.

use std::fs;
use std::path::Path;

use super::packing::{pack_indices, packed_len, unpack_indices};
use super::{model_size_bytes, spec_blob, write_atomic, Reader};
use crate::error::{Error, Result};
use crate::network::{Network, NetworkSpec, Synapse};
use crate::quantizer::{dequantize, derive_spec, uniform_levels, Precision};

pub const QUANT_MAGIC: [u8; 4] = *b"SNNQ";
pub const QUANT_VERSION: u16 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExportSummary {
    /// Bytes written, including the topology description.
    pub bytes: u64,
    pub compression_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedLayer {
    pub layer: usize,
    pub kind: u8,
    pub bits: u8,
    pub level_min: f32,
    pub level_max: f32,
    pub alpha: f32,
    pub beta: f32,
    pub indices: Vec<u8>,
}

/// Decoded contents of a quantized model file.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedModel {
    pub spec: NetworkSpec,
    pub layers: Vec<QuantizedLayer>,
}

impl QuantizedModel {
    /// Inference-only network whose weights are the dequantized levels.
    pub fn to_network(&self) -> Result<Network> {
        let mut synapses: Vec<Option<Synapse>> = vec![None; self.spec.layers.len()];
        for q in &self.layers {
            let qspec = derive_spec(uniform_levels(q.bits as u32)?)?;
            let alpha = q.alpha as f64;
            let weights = q
                .indices
                .iter()
                .map(|&i| dequantize(i as usize, &qspec, alpha))
                .collect();
            synapses[q.layer] = Some(Synapse {
                weights,
                quant: None,
            });
        }
        let spec = self.spec.clone().with_precision(Precision::Full);
        Network::from_parts(spec, synapses)
    }
}

fn to_f32_exact(v: f64, what: &str, layer: usize) -> Result<f32> {
    let f = v as f32;
    if f as f64 != v {
        return Err(Error::InvalidParam(format!(
            "layer {layer}: {what} {v} is not representable in 32 bits"
        )));
    }
    Ok(f)
}

pub fn export_quantized(net: &Network, path: impl AsRef<Path>) -> Result<ExportSummary> {
    let mut layers = Vec::new();
    for l in net.synaptic_layers() {
        let s = net.synapse(l).expect("synaptic layer");
        let q = s.quant.as_ref().ok_or(Error::NothingToPack(l))?;
        let bits = q.bits();
        let levels = q.spec.levels();
        if uniform_levels(bits)? != *levels || derive_spec(levels.clone())? != q.spec {
            return Err(Error::InvalidParam(format!(
                "layer {l}: only uniform {bits}-bit levels with midpoint borders can be packed"
            )));
        }
        let alpha = to_f32_exact(q.state.alpha, "alpha", l)?;
        let beta = to_f32_exact(q.state.beta, "beta", l)?;
        let indices: Vec<u8> = net
            .level_indices(l)
            .expect("quantized layer")
            .into_iter()
            .map(|i| i as u8)
            .collect();
        layers.push(QuantizedLayer {
            layer: l,
            kind: net.spec().layers[l].tag(),
            bits: bits as u8,
            level_min: levels.min() as f32,
            level_max: levels.max() as f32,
            alpha,
            beta,
            indices,
        });
    }
    let bits = layers.first().map(|q| q.bits as u32).unwrap_or(32);
    let bytes = encode(net.spec(), &layers)?;
    write_atomic(path.as_ref(), &bytes)?;
    Ok(ExportSummary {
        bytes: bytes.len() as u64,
        compression_ratio: model_size_bytes(net, 32)? as f64 / model_size_bytes(net, bits)? as f64,
    })
}

pub fn import_quantized(path: impl AsRef<Path>) -> Result<Network> {
    read_quantized(path)?.to_network()
}

pub fn read_quantized(path: impl AsRef<Path>) -> Result<QuantizedModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub(crate) fn encode(spec: &NetworkSpec, layers: &[QuantizedLayer]) -> Result<Vec<u8>> {
    let blob = spec_blob(spec)?;
    let mut out = Vec::new();
    out.extend_from_slice(&QUANT_MAGIC);
    out.extend_from_slice(&QUANT_VERSION.to_le_bytes());
    out.extend_from_slice(&(blob.len() as u32).to_le_bytes());
    out.extend_from_slice(&blob);
    out.extend_from_slice(&(layers.len() as u16).to_le_bytes());
    for q in layers {
        out.push(q.kind);
        out.extend_from_slice(&(q.indices.len() as u64).to_le_bytes());
        out.push(q.bits);
        for v in [q.level_min, q.level_max, q.alpha, q.beta] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&pack_indices(&q.indices, q.bits as u32)?);
    }
    Ok(out)
}

pub(crate) fn decode(bytes: &[u8]) -> Result<QuantizedModel> {
    let mut r = Reader::new(bytes);
    r.magic(QUANT_MAGIC)?;
    let version = r.u16()?;
    if version != QUANT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let blob_len = r.u32()? as usize;
    let spec: NetworkSpec = serde_json::from_slice(r.take(blob_len)?)?;
    let shapes = spec.shapes()?;
    let synaptic: Vec<usize> = (0..spec.layers.len())
        .filter(|&i| spec.layers[i].is_synaptic())
        .collect();
    let n_layers = r.u16()? as usize;
    if n_layers != synaptic.len() {
        return Err(Error::Corrupt(format!(
            "{n_layers} layer records for {} synaptic layers",
            synaptic.len()
        )));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for &l in &synaptic {
        let kind = r.u8()?;
        if kind != spec.layers[l].tag() {
            return Err(Error::Corrupt(format!(
                "layer {l}: kind {kind} does not match spec"
            )));
        }
        let count = r.u64()? as usize;
        let expect = crate::network::synaptic_weight_count(&spec.layers[l], &shapes[l]);
        if count != expect {
            return Err(Error::Corrupt(format!(
                "layer {l}: {count} weights, topology needs {expect}"
            )));
        }
        let bits = r.u8()?;
        let levels = uniform_levels(bits as u32)?;
        let level_min = r.f32()?;
        let level_max = r.f32()?;
        if level_min as f64 != levels.min() || level_max as f64 != levels.max() {
            return Err(Error::Corrupt(format!(
                "layer {l}: level range [{level_min}, {level_max}] does not match {bits}-bit levels"
            )));
        }
        let alpha = r.f32()?;
        let beta = r.f32()?;
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::Corrupt(format!("layer {l}: non-positive scale")));
        }
        let packed = r.take(packed_len(count, bits as u32))?;
        let indices = unpack_indices(packed, bits as u32, count)?;
        if let Some(position) = indices.iter().position(|&i| i as usize >= levels.len()) {
            return Err(Error::IndexOutOfRange {
                layer: l,
                position: position as u64,
                index: indices[position] as u32,
                levels: levels.len(),
            });
        }
        layers.push(QuantizedLayer {
            layer: l,
            kind,
            bits,
            level_min,
            level_max,
            alpha,
            beta,
            indices,
        });
    }
    r.finish()?;
    Ok(QuantizedModel { spec, layers })
}
