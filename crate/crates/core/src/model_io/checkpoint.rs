//! Full-precision checkpoint (`SNNC`).
//!
//! ```text
//! "SNNC" | version u16 | spec_len u32 | spec JSON | sha256(spec JSON) [32]
//! epoch u64 | temperature f64 | seed u64 | layer count u16
//! per synaptic layer:
//!   kind u8 | weight count u64 | bits u8 (32 = unquantized)
//!   if quantized: level count u16 | levels f64.. | borders f64..
//!                 alpha f64 | beta f64 | temperature f64
//!   weights f32..
//! ```

use std::fs;
use std::path::Path;

use super::{hex, spec_blob, spec_hash, write_atomic, Reader};
use crate::error::{Error, Result};
use crate::network::{LayerQuantizer, Network, NetworkSpec, Synapse};
use crate::quantizer::{LayerQuantState, QuantLevels, QuantSpec};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"SNNC";
pub const CHECKPOINT_VERSION: u16 = 1;

/// Training context stored next to the weights.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CheckpointMeta {
    pub epoch: u64,
    pub temperature: f64,
    pub seed: u64,
}

pub fn save_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let temperature = net
        .synapses()
        .iter()
        .flatten()
        .find_map(|s| s.quant.as_ref().map(|q| q.state.temperature))
        .unwrap_or(0.0);
    let meta = CheckpointMeta {
        temperature,
        ..CheckpointMeta::default()
    };
    save_checkpoint_with(net, &meta, path)
}

pub fn save_checkpoint_with(
    net: &Network,
    meta: &CheckpointMeta,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_atomic(path.as_ref(), &encode(net, meta)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    Ok(load_checkpoint_with_meta(path)?.0)
}

pub fn load_checkpoint_with_meta(path: impl AsRef<Path>) -> Result<(Network, CheckpointMeta)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub(crate) fn encode(net: &Network, meta: &CheckpointMeta) -> Result<Vec<u8>> {
    let blob = spec_blob(net.spec())?;
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(blob.len() as u32).to_le_bytes());
    out.extend_from_slice(&blob);
    out.extend_from_slice(&spec_hash(&blob));
    out.extend_from_slice(&meta.epoch.to_le_bytes());
    out.extend_from_slice(&meta.temperature.to_le_bytes());
    out.extend_from_slice(&meta.seed.to_le_bytes());
    let layers = net.synaptic_layers();
    out.extend_from_slice(&(layers.len() as u16).to_le_bytes());
    for l in layers {
        let s = net.synapse(l).expect("synaptic layer");
        out.push(net.spec().layers[l].tag());
        out.extend_from_slice(&(s.weights.len() as u64).to_le_bytes());
        match &s.quant {
            None => out.push(32),
            Some(q) => {
                out.push(q.bits() as u8);
                let levels = q.spec.levels().values();
                out.extend_from_slice(&(levels.len() as u16).to_le_bytes());
                for v in levels.iter().chain(q.spec.borders()) {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                for v in [q.state.alpha, q.state.beta, q.state.temperature] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        for (i, &w) in s.weights.iter().enumerate() {
            let f = w as f32;
            if f as f64 != w {
                return Err(Error::InvalidParam(format!(
                    "layer {l} weight {i} ({w}) is not representable in 32 bits"
                )));
            }
            out.extend_from_slice(&f.to_le_bytes());
        }
    }
    Ok(out)
}

pub(crate) fn decode(bytes: &[u8]) -> Result<(Network, CheckpointMeta)> {
    let mut r = Reader::new(bytes);
    r.magic(CHECKPOINT_MAGIC)?;
    let version = r.u16()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let blob_len = r.u32()? as usize;
    let blob = r.take(blob_len)?;
    let stored: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
    let computed = spec_hash(blob);
    if stored != computed {
        return Err(Error::HashMismatch {
            stored: hex(&stored),
            computed: hex(&computed),
        });
    }
    let spec: NetworkSpec = serde_json::from_slice(blob)?;
    let meta = CheckpointMeta {
        epoch: r.u64()?,
        temperature: r.f64()?,
        seed: r.u64()?,
    };
    let expected: Vec<usize> = (0..spec.layers.len())
        .filter(|&i| spec.layers[i].is_synaptic())
        .collect();
    let n_layers = r.u16()? as usize;
    if n_layers != expected.len() {
        return Err(Error::Corrupt(format!(
            "{n_layers} layer records for {} synaptic layers",
            expected.len()
        )));
    }
    let mut synapses: Vec<Option<Synapse>> = vec![None; spec.layers.len()];
    for &l in &expected {
        let kind = r.u8()?;
        if kind != spec.layers[l].tag() {
            return Err(Error::Corrupt(format!(
                "layer {l}: kind {kind} does not match spec"
            )));
        }
        let count = r.u64()? as usize;
        let bits = r.u8()?;
        if bits as u32 != spec.precision.bits() {
            return Err(Error::Corrupt(format!(
                "layer {l}: {bits}-bit record in a {}-bit network",
                spec.precision.bits()
            )));
        }
        let quant = if bits == 32 {
            None
        } else {
            let n = r.u16()? as usize;
            if n < 2 {
                return Err(Error::Corrupt(format!("layer {l}: {n} levels")));
            }
            let levels = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let borders = (0..n - 1).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let spec = QuantSpec::with_borders(QuantLevels::new(levels)?, borders)?;
            let state = LayerQuantState::new(r.f64()?, r.f64()?, r.f64()?)?;
            Some(LayerQuantizer { spec, state })
        };
        if count > bytes.len() / 4 {
            return Err(Error::Truncated {
                offset: r.pos() as u64,
            });
        }
        let weights = (0..count)
            .map(|_| r.f32().map(f64::from))
            .collect::<Result<Vec<_>>>()?;
        synapses[l] = Some(Synapse { weights, quant });
    }
    r.finish()?;
    Ok((Network::from_parts(spec, synapses)?, meta))
}
