//! A single LIF neuron under constant drive: silent, sub-threshold and
//! periodically spiking.
//!
//! cargo run --example lif_neuron

use snnq::neuron::{lif_sequence, LifParams};
use snnq::Result;

fn main() -> Result<()> {
    let p = LifParams::default();
    println!(
        "tau {} threshold {} reset {}",
        p.tau, p.v_threshold, p.v_reset
    );
    for drive in [0.0, 1.0, 3.0] {
        let input: Vec<Vec<f64>> = vec![vec![drive]; 8];
        let (spikes, tape) = lif_sequence(&input, &p, None)?;
        let h: Vec<String> = tape.h.iter().map(|h| format!("{:.4}", h[0])).collect();
        let s: String = spikes
            .iter()
            .map(|s| if s[0] > 0.0 { '|' } else { '.' })
            .collect();
        println!("x = {drive}: spikes {s}  H = [{}]", h.join(", "));
    }
    Ok(())
}
