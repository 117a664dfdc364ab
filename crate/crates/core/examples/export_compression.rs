//! Model-size accounting for the full-size CIFAR10-DVS topology, and a
//! bit-exact export/import round trip of a small quantized network.
//!
//! cargo run --release --example export_compression

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snnq::data::FrameTensor;
use snnq::model_io::{compression_ratio, export_quantized, import_quantized, model_size_bytes};
use snnq::network::presets::preset;
use snnq::{build_network, Precision, Result};

const MIB: f64 = 1024.0 * 1024.0;

fn main() -> Result<()> {
    let big = build_network(preset("table1-cifar10dvs")?, 0)?;
    println!("table1-cifar10dvs: {} parameters", big.parameter_count());
    for bits in [32, 8, 4, 2, 1] {
        let bytes = model_size_bytes(&big, bits)?;
        println!(
            "  {bits:>2}-bit  {:>9} bytes  {:.3} MiB  CR {:.2}",
            bytes,
            bytes as f64 / MIB,
            compression_ratio(&big, bits)?
        );
    }

    let dir = std::env::temp_dir().join("snnq-export-example");
    std::fs::create_dir_all(&dir).map_err(|e| snnq::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for bits in [8, 4, 2, 1] {
        let spec = preset("desk-tiny")?.with_precision(Precision::from_bits(bits)?);
        let net = build_network(spec.clone(), bits as u64)?;
        let path = dir.join(format!("desk-tiny-{bits}bit.snnq"));
        let summary = export_quantized(&net, &path)?;
        let back = import_quantized(&path)?;
        let mut same = 0;
        for _ in 0..20 {
            let n = spec.timesteps * spec.input.len();
            let data = (0..n).map(|_| rng.gen_range(0..3) as f64).collect();
            let f = FrameTensor::new(spec.timesteps, spec.input, data, 0)?;
            let (a, _) = net.forward(&f, snnq::Mode::InferHard)?;
            let (b, _) = back.forward(&f, snnq::Mode::InferHard)?;
            same += usize::from(a == b);
        }
        println!(
            "desk-tiny {bits}-bit: {} bytes on disk, CR {:.2}, identical outputs {same}/20",
            summary.bytes, summary.compression_ratio
        );
    }
    Ok(())
}
