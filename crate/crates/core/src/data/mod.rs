//! Event ingestion, frame integration, synthetic datasets and splitting.

mod events;
mod frames;
mod synthetic;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use events::{
    read_event_file, write_event_file, Event, EventStream, EVENT_HEADER_LEN, EVENT_MAGIC,
    EVENT_RECORD_LEN, EVENT_VERSION,
};
pub use frames::{events_to_frames, events_to_frames_with, FrameTensor, Slicing};
pub use synthetic::{gen_synthetic, ClassPattern, SyntheticSpec};

use crate::error::{Error, Result};

/// Seeded shuffle, then the last `round(n * test_fraction)` items (at least
/// one, at most `n - 1`) become the test split.
pub fn split<T: Clone>(dataset: &[T], test_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParam(format!(
            "test_fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = dataset.len();
    if n < 2 {
        return Err(Error::InvalidParam(format!(
            "cannot split a dataset of {n} samples"
        )));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train = order[..n - n_test]
        .iter()
        .map(|&i| dataset[i].clone())
        .collect();
    let test = order[n - n_test..]
        .iter()
        .map(|&i| dataset[i].clone())
        .collect();
    Ok((train, test))
}

/// Integrates every stream into `t_slices` frames.
pub fn to_frames(streams: &[(EventStream, usize)], t_slices: usize) -> Result<Vec<FrameTensor>> {
    streams
        .iter()
        .map(|(s, label)| {
            let mut f = events_to_frames(s, t_slices)?;
            f.label = *label;
            Ok(f)
        })
        .collect()
}
