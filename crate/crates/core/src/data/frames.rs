use super::events::EventStream;
use crate::error::{Error, Result};
use crate::network::Shape;

/// Time-major frame stack `[T x C x H x W]` with the sample label.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameTensor {
    timesteps: usize,
    shape: Shape,
    data: Vec<f64>,
    pub label: usize,
}

impl FrameTensor {
    pub fn new(timesteps: usize, shape: Shape, data: Vec<f64>, label: usize) -> Result<Self> {
        if data.len() != timesteps * shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {timesteps} x {:?}",
                data.len(),
                shape
            )));
        }
        Ok(FrameTensor {
            timesteps,
            shape,
            data,
            label,
        })
    }

    pub fn zeros(timesteps: usize, shape: Shape, label: usize) -> Self {
        FrameTensor {
            timesteps,
            shape,
            data: vec![0.0; timesteps * shape.len()],
            label,
        }
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn timestep(&self, t: usize) -> &[f64] {
        let n = self.shape.len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn get(&self, t: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(t, c, y, x)]
    }

    fn index(&self, t: usize, c: usize, y: usize, x: usize) -> usize {
        ((t * self.shape.channels + c) * self.shape.height + y) * self.shape.width + x
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// How an event stream is cut into time slices.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Slicing {
    /// Equal event count per slice; the remainder goes to the last slice.
    #[default]
    EventCount,
    /// Equal time span per slice between the first and last timestamp.
    Duration,
}

/// Integrates events into `t_slices` two-polarity count frames.
pub fn events_to_frames(stream: &EventStream, t_slices: usize) -> Result<FrameTensor> {
    events_to_frames_with(stream, t_slices, Slicing::EventCount)
}

pub fn events_to_frames_with(
    stream: &EventStream,
    t_slices: usize,
    slicing: Slicing,
) -> Result<FrameTensor> {
    if t_slices == 0 {
        return Err(Error::InvalidParam("t_slices must be >= 1".into()));
    }
    if stream.is_empty() {
        return Err(Error::EmptyStream);
    }
    stream.validate()?;
    let shape = Shape::new(2, stream.height as usize, stream.width as usize);
    let mut frames = FrameTensor::zeros(t_slices, shape, stream.label as usize);
    let n = stream.len();
    let per_slice = n / t_slices;
    let t_first = stream.events[0].t as u64;
    let span = stream.events[n - 1].t as u64 - t_first + 1;
    for (k, e) in stream.events.iter().enumerate() {
        let slice = match slicing {
            Slicing::EventCount => k
                .checked_div(per_slice)
                .map_or(t_slices - 1, |s| s.min(t_slices - 1)),
            Slicing::Duration => {
                (((e.t as u64 - t_first) * t_slices as u64 / span) as usize).min(t_slices - 1)
            }
        };
        let idx = frames.index(slice, e.polarity as usize, e.y as usize, e.x as usize);
        frames.data[idx] += 1.0;
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::events::Event;

    fn stream(events: Vec<Event>) -> EventStream {
        EventStream {
            width: 3,
            height: 3,
            label: 1,
            events,
        }
    }

    fn slice_totals(f: &FrameTensor) -> Vec<f64> {
        (0..f.timesteps())
            .map(|t| f.timestep(t).iter().sum())
            .collect()
    }

    #[test]
    fn one_event_per_slice() {
        let evs = (0..10)
            .map(|i| Event {
                t: i,
                x: (i % 3) as u16,
                y: 0,
                polarity: (i % 2) as u8,
            })
            .collect();
        let f = events_to_frames(&stream(evs), 10).unwrap();
        assert_eq!(slice_totals(&f), vec![1.0; 10]);
        assert_eq!(f.total(), 10.0);
        assert_eq!(f.label, 1);
    }

    #[test]
    fn repeated_pixel_accumulates() {
        let evs = vec![
            Event {
                t: 0,
                x: 1,
                y: 1,
                polarity: 0
            };
            3
        ];
        let f = events_to_frames(&stream(evs), 1).unwrap();
        assert_eq!(f.get(0, 0, 1, 1), 3.0);
    }

    #[test]
    fn remainder_goes_to_last_slice() {
        let evs = (0..25)
            .map(|i| Event {
                t: i,
                x: 0,
                y: 0,
                polarity: 1,
            })
            .collect();
        let f = events_to_frames(&stream(evs), 10).unwrap();
        let mut expect = vec![2.0; 10];
        expect[9] = 7.0;
        assert_eq!(slice_totals(&f), expect);
    }

    #[test]
    fn duration_slicing_uses_timestamps() {
        let evs = [0u32, 1, 2, 90, 99]
            .iter()
            .map(|&t| Event {
                t,
                x: 0,
                y: 0,
                polarity: 0,
            })
            .collect();
        let f = events_to_frames_with(&stream(evs), 2, Slicing::Duration).unwrap();
        assert_eq!(slice_totals(&f), vec![3.0, 2.0]);
    }

    #[test]
    fn empty_stream_rejected() {
        assert!(matches!(
            events_to_frames(&stream(vec![]), 4),
            Err(Error::EmptyStream)
        ));
    }
}
