//! Synthesize one moving-bar recording, round-trip it through the event
//! file format and integrate it into frames.
//!
//! cargo run --example events_to_frames

use snnq::data::{
    events_to_frames, gen_synthetic, read_event_file, write_event_file, SyntheticSpec,
};
use snnq::Result;

fn main() -> Result<()> {
    let samples = gen_synthetic(&SyntheticSpec::moving_bars(3, 1), 5)?;
    let dir = std::env::temp_dir().join("snnq-events-example");
    std::fs::create_dir_all(&dir).map_err(|e| snnq::Error::Io {
        path: dir.clone(),
        source: e,
    })?;

    for (stream, label) in &samples {
        let path = dir.join(format!("class{label}.aer"));
        write_event_file(&path, stream)?;
        let back = read_event_file(&path)?;
        assert_eq!(&back, stream);

        let frames = events_to_frames(&back, 10)?;
        println!(
            "class {label}: {} events -> {} frames of {:?}, {} counts",
            back.len(),
            frames.timesteps(),
            frames.shape(),
            frames.total()
        );
        // ON-polarity activity of the middle slice, one character per pixel
        let s = frames.shape();
        for y in 0..s.height {
            let row: String = (0..s.width)
                .map(|x| match frames.get(5, 1, y, x) as u32 {
                    0 => '.',
                    1 => '+',
                    _ => '#',
                })
                .collect();
            println!("  {row}");
        }
    }
    Ok(())
}
