//! Hard and soft quantizer transfer curves as CSV.
//!
//! Shows the sigmoid staircase sharpening towards the step function as the
//! temperature grows.
//!
//! cargo run --release --example quantizer_curves -- [bits] > curves.csv

use snnq::quantizer::{derive_spec, quantize_soft, quantize_step, uniform_levels, LayerQuantState};
use snnq::Result;

fn main() -> Result<()> {
    let bits: u32 = std::env::args()
        .nth(1)
        .map(|b| b.parse().expect("bits"))
        .unwrap_or(2);
    let spec = derive_spec(uniform_levels(bits)?)?;
    let temps = [1.0, 4.0, 16.0, 64.0];
    let top = spec.levels().max();

    print!("w,hard");
    for t in temps {
        print!(",soft_t{t}");
    }
    println!();
    for i in 0..=200 {
        let w = -1.25 * top + 2.5 * top * i as f64 / 200.0;
        let hard = quantize_step(w, &spec, &LayerQuantState::new(1.0, 1.0, 1.0)?);
        print!("{w:.4},{hard}");
        for t in temps {
            let st = LayerQuantState::new(1.0, 1.0, t)?;
            print!(",{:.6}", quantize_soft(w, &spec, &st));
        }
        println!();
    }
    eprintln!(
        "{bits}-bit: {} levels, borders {:?}",
        spec.levels().len(),
        spec.borders()
    );
    Ok(())
}
