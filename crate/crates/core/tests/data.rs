#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;
use snnq::data::{
    events_to_frames, events_to_frames_with, gen_synthetic, read_event_file, split, to_frames,
    write_event_file, Event, EventStream, FrameTensor, Slicing, SyntheticSpec, EVENT_HEADER_LEN,
    EVENT_RECORD_LEN,
};
use snnq::Error;

fn stream_strategy() -> impl Strategy<Value = EventStream> {
    (1u16..40, 1u16..40, 0u16..10).prop_flat_map(|(w, h, label)| {
        prop::collection::vec((0u32..1000, 0..w, 0..h, 0u8..2), 1..200).prop_map(move |raw| {
            let mut t = 0;
            let events = raw
                .into_iter()
                .map(|(dt, x, y, polarity)| {
                    t += dt;
                    Event { t, x, y, polarity }
                })
                .collect();
            EventStream {
                width: w,
                height: h,
                label,
                events,
            }
        })
    })
}

proptest! {
    #[test]
    fn bytes_round_trip(s in stream_strategy()) {
        let bytes = s.to_bytes();
        prop_assert_eq!(bytes.len(), EVENT_HEADER_LEN + s.len() * EVENT_RECORD_LEN);
        let back = EventStream::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn frames_conserve_events(s in stream_strategy(), t_slices in 1usize..12) {
        for slicing in [Slicing::EventCount, Slicing::Duration] {
            let f = events_to_frames_with(&s, t_slices, slicing).unwrap();
            prop_assert_eq!(f.total(), s.len() as f64);
            prop_assert_eq!(f.timesteps(), t_slices);
            prop_assert!(f.data().iter().all(|&v| v >= 0.0 && v.fract() == 0.0));
        }
    }

    #[test]
    fn slices_respect_time_order(s in stream_strategy(), t_slices in 1usize..12) {
        let f = events_to_frames(&s, t_slices).unwrap();
        let per = s.len() / t_slices;
        let totals: Vec<f64> = (0..t_slices).map(|t| f.timestep(t).iter().sum()).collect();
        if per > 0 {
            for t in 0..t_slices - 1 {
                prop_assert_eq!(totals[t], per as f64);
            }
        }
        // Every event of slice k precedes every event of slice k + 1.
        let mut last_t_of_slice = vec![None::<u32>; t_slices];
        let mut first_t_of_slice = vec![None::<u32>; t_slices];
        for (k, e) in s.events.iter().enumerate() {
            let slice = k.checked_div(per).map_or(t_slices - 1, |s| s.min(t_slices - 1));
            first_t_of_slice[slice].get_or_insert(e.t);
            last_t_of_slice[slice] = Some(e.t);
        }
        for k in 0..t_slices - 1 {
            if let (Some(a), Some(b)) = (last_t_of_slice[k], first_t_of_slice[k + 1]) {
                prop_assert!(a <= b);
            }
        }
    }
}

fn small_stream() -> EventStream {
    EventStream {
        width: 4,
        height: 4,
        label: 2,
        events: (0..6)
            .map(|i| Event {
                t: 10 * i,
                x: i as u16 % 4,
                y: 1,
                polarity: (i % 2) as u8,
            })
            .collect(),
    }
}

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.aer");
    let s = small_stream();
    write_event_file(&path, &s).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), s.to_bytes());
    assert_eq!(read_event_file(&path).unwrap(), s);
}

#[test]
fn malformed_streams_are_located() {
    let bytes = small_stream().to_bytes();
    assert!(matches!(
        EventStream::from_bytes(&bytes[..bytes.len() - 3]),
        Err(Error::Truncated { offset }) if offset == (EVENT_HEADER_LEN + 5 * EVENT_RECORD_LEN) as u64
    ));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(
        EventStream::from_bytes(&bad),
        Err(Error::BadMagic { .. })
    ));

    let mut regress = small_stream();
    regress.events[3].t = 0;
    assert!(matches!(
        EventStream::from_bytes(&regress.to_bytes()),
        Err(Error::TimestampRegression { record: 3, .. })
    ));
    let mut outside = small_stream();
    outside.events[1].x = 4;
    assert!(matches!(
        EventStream::from_bytes(&outside.to_bytes()),
        Err(Error::CoordinateOutOfRange { record: 1, .. })
    ));
    let mut polarity = small_stream();
    polarity.events[2].polarity = 2;
    assert!(matches!(
        EventStream::from_bytes(&polarity.to_bytes()),
        Err(Error::BadPolarity { record: 2, .. })
    ));
    let mut trailing = bytes;
    trailing.push(0);
    assert!(matches!(
        EventStream::from_bytes(&trailing),
        Err(Error::TrailingBytes { .. })
    ));
}

#[test]
fn empty_stream_and_zero_slices_rejected() {
    let mut s = small_stream();
    assert!(events_to_frames(&s, 0).is_err());
    s.events.clear();
    assert!(matches!(events_to_frames(&s, 4), Err(Error::EmptyStream)));
}

#[test]
fn split_is_seeded_partition() {
    let data: Vec<u32> = (0..50).collect();
    let (a, b) = split(&data, 0.2, 7).unwrap();
    assert_eq!((a.len(), b.len()), (40, 10));
    assert_eq!(split(&data, 0.2, 7).unwrap(), (a.clone(), b.clone()));
    let mut all: Vec<u32> = a.into_iter().chain(b).collect();
    all.sort();
    assert_eq!(all, data);
    assert!(split(&data, 0.0, 1).is_err());
    assert!(split(&data[..1], 0.5, 1).is_err());
}

#[test]
fn synthetic_generation_is_seeded_and_balanced() {
    let spec = SyntheticSpec::moving_bars(3, 5);
    let a = gen_synthetic(&spec, 1).unwrap();
    assert_eq!(a, gen_synthetic(&spec, 1).unwrap());
    assert_ne!(a, gen_synthetic(&spec, 2).unwrap());
    for k in 0..3 {
        assert_eq!(a.iter().filter(|(_, l)| *l == k).count(), 5);
    }
    for (s, _) in &a {
        assert_eq!(s.len(), 600);
        s.validate().unwrap();
    }
}

fn centroid(frames: &[&FrameTensor]) -> Vec<f64> {
    let mut c = vec![0.0; frames[0].data().len()];
    for f in frames {
        c.iter_mut().zip(f.data()).for_each(|(a, b)| *a += b);
    }
    c.iter_mut().for_each(|a| *a /= frames.len() as f64);
    c
}

#[test]
fn noiseless_classes_are_centroid_separable() {
    let spec = SyntheticSpec {
        noise_rate: 0.0,
        ..SyntheticSpec::moving_bars(3, 40)
    };
    let frames = to_frames(&gen_synthetic(&spec, 5).unwrap(), 10).unwrap();
    let (train, test) = split(&frames, 0.25, 6).unwrap();
    let centroids: Vec<Vec<f64>> = (0..3)
        .map(|k| centroid(&train.iter().filter(|f| f.label == k).collect::<Vec<_>>()))
        .collect();
    let correct = test
        .iter()
        .filter(|f| {
            let dist = |c: &Vec<f64>| {
                c.iter()
                    .zip(f.data())
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
            };
            let best = (0..3)
                .min_by(|&a, &b| dist(&centroids[a]).total_cmp(&dist(&centroids[b])))
                .unwrap();
            best == f.label
        })
        .count();
    assert_eq!(correct, test.len());
}
