//! Quantization-aware training on the 3-class moving-bar task.
//!
//! cargo run --release --example train_synthetic -- [bits] [epochs] [lr0]

use std::time::Instant;

use snnq::data::{gen_synthetic, split, to_frames, SyntheticSpec};
use snnq::network::presets::preset;
use snnq::trainer::{train_with, TrainConfig};
use snnq::{build_network, Precision, Result};

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let bits: u32 = arg(0, "1").parse().expect("bits");
    let epochs: usize = arg(1, "50").parse().expect("epochs");
    let lr0: f64 = arg(2, "0.001").parse().expect("lr0");

    let streams = gen_synthetic(&SyntheticSpec::moving_bars(3, 250), 1)?;
    let (train_streams, test_streams) = split(&streams, 0.2, 2)?;
    let train_set = to_frames(&train_streams, 10)?;
    let test_set = to_frames(&test_streams, 10)?;

    let spec = preset("desk-tiny")?.with_precision(Precision::from_bits(bits)?);
    let mut net = build_network(spec, 3)?;
    let cfg = TrainConfig {
        epochs,
        lr0,
        seed: 4,
        ..TrainConfig::default()
    };
    println!(
        "{bits}-bit desk-tiny: {} parameters, {} train / {} test samples",
        net.parameter_count(),
        train_set.len(),
        test_set.len()
    );
    let start = Instant::now();
    let history = train_with(&mut net, &train_set, &test_set, &cfg, |r| {
        println!(
            "epoch {:>3}  lr {:.2e}  T {:>5.1}  loss {:.4}  train {:.3}  test {:.3}  ({:.0}s)",
            r.epoch,
            r.lr,
            r.temperature,
            r.train_loss,
            r.train_acc,
            r.test_acc,
            start.elapsed().as_secs_f64()
        )
    })?;
    println!(
        "final test accuracy {:.3}",
        history.last().map_or(0.0, |r| r.test_acc)
    );
    Ok(())
}
