//! Address-event streams and the `AERS` event file format.
//!
//! Layout (little-endian, no padding):
//!
//! ```text
//! "AERS" | version u16 = 1 | width u16 | height u16 | label u16 | count u64
//! count x { t u32 (us) | x u16 | y u16 | polarity u8 }
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const EVENT_MAGIC: [u8; 4] = *b"AERS";
pub const EVENT_VERSION: u16 = 1;
pub const EVENT_HEADER_LEN: usize = 20;
pub const EVENT_RECORD_LEN: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    /// Timestamp in microseconds.
    pub t: u32,
    pub x: u16,
    pub y: u16,
    /// 0 = OFF, 1 = ON.
    pub polarity: u8,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventStream {
    pub width: u16,
    pub height: u16,
    pub label: u16,
    pub events: Vec<Event>,
}

impl EventStream {
    /// Checks ordering and coordinate ranges.
    pub fn validate(&self) -> Result<()> {
        let mut prev = 0u32;
        for (k, e) in self.events.iter().enumerate() {
            let record = k as u64;
            let offset = (EVENT_HEADER_LEN + k * EVENT_RECORD_LEN) as u64;
            if e.x >= self.width || e.y >= self.height {
                return Err(Error::CoordinateOutOfRange {
                    record,
                    offset,
                    x: e.x,
                    y: e.y,
                    width: self.width,
                    height: self.height,
                });
            }
            if e.polarity > 1 {
                return Err(Error::BadPolarity {
                    record,
                    offset,
                    polarity: e.polarity,
                });
            }
            if k > 0 && e.t < prev {
                return Err(Error::TimestampRegression {
                    record,
                    offset,
                    t: e.t,
                    prev,
                });
            }
            prev = e.t;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(EVENT_HEADER_LEN + self.events.len() * EVENT_RECORD_LEN);
        out.extend_from_slice(&EVENT_MAGIC);
        out.extend_from_slice(&EVENT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.label.to_le_bytes());
        out.extend_from_slice(&(self.events.len() as u64).to_le_bytes());
        for e in &self.events {
            out.extend_from_slice(&e.t.to_le_bytes());
            out.extend_from_slice(&e.x.to_le_bytes());
            out.extend_from_slice(&e.y.to_le_bytes());
            out.push(e.polarity);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::Truncated {
                offset: bytes.len() as u64,
            });
        }
        let mut found = [0u8; 4];
        found.copy_from_slice(&bytes[..4]);
        if found != EVENT_MAGIC {
            return Err(Error::BadMagic {
                expected: EVENT_MAGIC,
                found,
            });
        }
        if bytes.len() < EVENT_HEADER_LEN {
            return Err(Error::Truncated {
                offset: bytes.len() as u64,
            });
        }
        let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
        let version = u16_at(4);
        if version != EVENT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let width = u16_at(6);
        let height = u16_at(8);
        let label = u16_at(10);
        let mut count_bytes = [0u8; 8];
        count_bytes.copy_from_slice(&bytes[12..20]);
        let count = u64::from_le_bytes(count_bytes);
        if count == 0 {
            return Err(Error::EmptyStream);
        }

        let mut events = Vec::with_capacity(count.min(1 << 24) as usize);
        let mut offset = EVENT_HEADER_LEN;
        let mut prev = 0u32;
        for record in 0..count {
            if bytes.len() < offset + EVENT_RECORD_LEN {
                return Err(Error::Truncated {
                    offset: offset as u64,
                });
            }
            let r = &bytes[offset..offset + EVENT_RECORD_LEN];
            let e = Event {
                t: u32::from_le_bytes([r[0], r[1], r[2], r[3]]),
                x: u16::from_le_bytes([r[4], r[5]]),
                y: u16::from_le_bytes([r[6], r[7]]),
                polarity: r[8],
            };
            if e.x >= width || e.y >= height {
                return Err(Error::CoordinateOutOfRange {
                    record,
                    offset: offset as u64,
                    x: e.x,
                    y: e.y,
                    width,
                    height,
                });
            }
            if e.polarity > 1 {
                return Err(Error::BadPolarity {
                    record,
                    offset: offset as u64,
                    polarity: e.polarity,
                });
            }
            if record > 0 && e.t < prev {
                return Err(Error::TimestampRegression {
                    record,
                    offset: offset as u64,
                    t: e.t,
                    prev,
                });
            }
            prev = e.t;
            events.push(e);
            offset += EVENT_RECORD_LEN;
        }
        if offset != bytes.len() {
            return Err(Error::TrailingBytes {
                offset: offset as u64,
            });
        }
        Ok(EventStream {
            width,
            height,
            label,
            events,
        })
    }
}

pub fn read_event_file(path: impl AsRef<Path>) -> Result<EventStream> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EventStream::from_bytes(&bytes)
}

pub fn write_event_file(path: impl AsRef<Path>, stream: &EventStream) -> Result<()> {
    stream.validate()?;
    if stream.is_empty() {
        return Err(Error::EmptyStream);
    }
    let path = path.as_ref();
    fs::write(path, stream.to_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(events: Vec<Event>) -> EventStream {
        EventStream {
            width: 4,
            height: 3,
            label: 2,
            events,
        }
    }

    fn ev(t: u32, x: u16, y: u16, polarity: u8) -> Event {
        Event { t, x, y, polarity }
    }

    #[test]
    fn single_record_roundtrip() {
        let s = stream(vec![ev(7, 3, 2, 1)]);
        let bytes = s.to_bytes();
        assert_eq!(bytes.len(), EVENT_HEADER_LEN + EVENT_RECORD_LEN);
        let back = EventStream::from_bytes(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn empty_payload_rejected() {
        let bytes = stream(vec![]).to_bytes();
        assert!(matches!(
            EventStream::from_bytes(&bytes),
            Err(Error::EmptyStream)
        ));
    }

    #[test]
    fn timestamp_regression_cites_record() {
        let s = stream(vec![ev(5, 0, 0, 0), ev(9, 1, 1, 1), ev(8, 2, 2, 0)]);
        match EventStream::from_bytes(&s.to_bytes()) {
            Err(Error::TimestampRegression { record, offset, .. }) => {
                assert_eq!(record, 2);
                assert_eq!(offset, (EVENT_HEADER_LEN + 2 * EVENT_RECORD_LEN) as u64);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn distinct_format_errors() {
        let good = stream(vec![ev(1, 0, 0, 0), ev(2, 1, 1, 1)]).to_bytes();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(
            EventStream::from_bytes(&bad),
            Err(Error::BadMagic { .. })
        ));

        let cut = &good[..good.len() - 3];
        match EventStream::from_bytes(cut) {
            Err(Error::Truncated { offset }) => {
                assert_eq!(offset, (EVENT_HEADER_LEN + EVENT_RECORD_LEN) as u64)
            }
            other => panic!("{other:?}"),
        }

        let mut bad = good.clone();
        bad[EVENT_HEADER_LEN + 4] = 9; // x of record 0
        assert!(matches!(
            EventStream::from_bytes(&bad),
            Err(Error::CoordinateOutOfRange { record: 0, .. })
        ));

        let mut bad = good.clone();
        bad[EVENT_HEADER_LEN + EVENT_RECORD_LEN + 8] = 2;
        assert!(matches!(
            EventStream::from_bytes(&bad),
            Err(Error::BadPolarity { record: 1, .. })
        ));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(
            EventStream::from_bytes(&bad),
            Err(Error::UnsupportedVersion(2))
        ));

        let mut bad = good.clone();
        bad.push(0);
        assert!(matches!(
            EventStream::from_bytes(&bad),
            Err(Error::TrailingBytes { .. })
        ));
    }
}
