//! Finite-difference check of the BPTT gradients on a small conv + LIF +
//! dense network, in full precision and with the soft quantizer.
//!
//! The second pass scales the synapses up so that every LIF layer has
//! membranes below, inside and above the surrogate window.
//!
//! cargo run --release --example gradcheck

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snnq::data::FrameTensor;
use snnq::network::presets::preset;
use snnq::trainer::gradcheck;
use snnq::{build_network, NetworkSpec, Precision, Result};

fn random_frames(spec: &NetworkSpec, label: usize, seed: u64) -> Result<FrameTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.timesteps * spec.input.len();
    let data = (0..n)
        .map(|_| {
            if rng.gen_bool(0.4) {
                rng.gen_range(1..4) as f64
            } else {
                0.0
            }
        })
        .collect();
    FrameTensor::new(spec.timesteps, spec.input, data, label)
}

fn main() -> Result<()> {
    for gains in [[1.0, 1.0, 1.0], [6.0, 15.0, 20.0]] {
        println!("synapse gains {gains:?}");
        for bits in [32, 8, 4, 2, 1] {
            let spec = preset("gradcheck-mini")?.with_precision(Precision::from_bits(bits)?);
            let mut net = build_network(spec.clone(), 3)?;
            for (layer, gain) in net.synaptic_layers().into_iter().zip(gains) {
                net.scale_synapse(layer, gain)?;
            }
            net.set_temperature(2.0)?;
            let sample = random_frames(&spec, 1, 11)?;
            let r = gradcheck(&net, &sample, 1e-6, 1e-3)?;
            println!(
                "  bits {bits:>2}: {:>3} params  max rel err {:.2e}  flips {:.1}%  worst {}",
                r.checked,
                r.max_rel_err,
                100.0 * r.flip_fraction,
                r.worst_coordinate
                    .map(|c| c.to_string())
                    .unwrap_or_default()
            );
        }
    }
    Ok(())
}
