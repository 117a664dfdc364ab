//! Accuracy and compression ratio across bit widths on the synthetic task.
//!
//! cargo run --release --example sweep_bits -- [epochs]

use snnq::data::{gen_synthetic, split, to_frames, SyntheticSpec};
use snnq::model_io::{compression_ratio, model_size_bytes};
use snnq::network::presets::preset;
use snnq::trainer::{train, TrainConfig};
use snnq::{build_network, Precision, Result};

fn main() -> Result<()> {
    let epochs: usize = std::env::args()
        .nth(1)
        .map(|e| e.parse().expect("epochs"))
        .unwrap_or(20);
    let streams = gen_synthetic(&SyntheticSpec::moving_bars(3, 250), 1)?;
    let (train_streams, test_streams) = split(&streams, 0.2, 2)?;
    let train_set = to_frames(&train_streams, 10)?;
    let test_set = to_frames(&test_streams, 10)?;
    let cfg = TrainConfig {
        epochs,
        seed: 4,
        ..TrainConfig::default()
    };

    println!("bits,test_acc,model_bytes,compression_ratio");
    for bits in [32, 8, 4, 2, 1] {
        let spec = preset("desk-tiny")?.with_precision(Precision::from_bits(bits)?);
        let mut net = build_network(spec, 3)?;
        let history = train(&mut net, &train_set, &test_set, &cfg)?;
        println!(
            "{bits},{:.4},{},{:.2}",
            history.last().map_or(0.0, |r| r.test_acc),
            model_size_bytes(&net, bits)?,
            compression_ratio(&net, bits)?
        );
    }
    Ok(())
}
