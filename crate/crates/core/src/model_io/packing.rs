use crate::error::{Error, Result};

fn check_bits(bits: u32) -> Result<()> {
    match bits {
        1 | 2 | 4 | 8 => Ok(()),
        other => Err(Error::UnsupportedBits(other)),
    }
}

/// Bytes needed for `count` indices of `bits` each.
pub fn packed_len(count: usize, bits: u32) -> usize {
    (count * bits as usize).div_ceil(8)
}

/// Packs indices LSB-first within each byte, zero-padding the last byte.
pub fn pack_indices(indices: &[u8], bits: u32) -> Result<Vec<u8>> {
    check_bits(bits)?;
    let mask = ((1u16 << bits) - 1) as u8;
    let mut out = vec![0u8; packed_len(indices.len(), bits)];
    for (i, &idx) in indices.iter().enumerate() {
        if idx & !mask != 0 {
            return Err(Error::InvalidParam(format!(
                "index {idx} at position {i} does not fit in {bits} bits"
            )));
        }
        let bit = i * bits as usize;
        out[bit / 8] |= idx << (bit % 8);
    }
    Ok(out)
}

/// Inverse of [`pack_indices`]. Padding bits must be zero.
pub fn unpack_indices(bytes: &[u8], bits: u32, count: usize) -> Result<Vec<u8>> {
    check_bits(bits)?;
    if bytes.len() != packed_len(count, bits) {
        return Err(Error::Corrupt(format!(
            "{} packed bytes for {count} indices of {bits} bits",
            bytes.len()
        )));
    }
    let mask = ((1u16 << bits) - 1) as u8;
    let out: Vec<u8> = (0..count)
        .map(|i| {
            let bit = i * bits as usize;
            (bytes[bit / 8] >> (bit % 8)) & mask
        })
        .collect();
    let used = count * bits as usize;
    if !used.is_multiple_of(8) && bytes[used / 8] >> (used % 8) != 0 {
        return Err(Error::Corrupt("non-zero padding bits".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lsb_first_layout() {
        assert_eq!(pack_indices(&[1, 0, 1, 1], 1).unwrap(), vec![0b1101]);
        assert_eq!(pack_indices(&[1, 2, 0, 2], 2).unwrap(), vec![0b10_00_10_01]);
        assert_eq!(pack_indices(&[0xA, 0x3, 0x7], 4).unwrap(), vec![0x3A, 0x07]);
        assert_eq!(pack_indices(&[200, 1], 8).unwrap(), vec![200, 1]);
    }

    #[test]
    fn hundred_four_bit_indices_take_fifty_bytes() {
        assert_eq!(pack_indices(&[5; 100], 4).unwrap().len(), 50);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(pack_indices(&[2], 1).is_err());
        assert!(matches!(
            pack_indices(&[0], 3),
            Err(Error::UnsupportedBits(3))
        ));
        assert!(unpack_indices(&[0xF0], 1, 4).is_err());
        assert!(unpack_indices(&[0, 0], 4, 1).is_err());
    }
}
