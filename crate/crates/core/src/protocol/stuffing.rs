//! Header-collision escaping for the instruction/parameter region.
//!
//! Every `FF FF FD` in the raw region is followed on the wire by an extra
//! `FD`, so the header sequence `FF FF FD 00` can never appear inside a frame.

use super::ProtocolError;

const ESCAPE: u8 = 0xFD;

fn ends_with_pattern(window: u32) -> bool {
    window & 0x00FF_FFFF == 0x00FF_FFFD
}

/// Escape `payload` for transmission.
pub fn stuff(payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload.len() + payload.len() / 3);
    let mut window = 0u32;
    for &b in payload {
        out.push(b);
        window = (window << 8) | b as u32;
        if ends_with_pattern(window) {
            out.push(ESCAPE);
            // The escape byte is not part of the raw stream, so the window
            // is reset to avoid the raw FD participating in a second match.
            window = 0;
        }
    }
    out
}

/// Number of bytes `stuff` would add to `payload`.
pub fn stuffed_len(payload: &[u8]) -> usize {
    let mut window = 0u32;
    let mut extra = 0;
    for &b in payload {
        window = (window << 8) | b as u32;
        if ends_with_pattern(window) {
            extra += 1;
            window = 0;
        }
    }
    payload.len() + extra
}

/// Undo [`stuff`]. Fails if an `FF FF FD` is not followed by the escape byte.
pub fn unstuff(wire: &[u8]) -> Result<Vec<u8>, ProtocolError> {
    let mut out = Vec::with_capacity(wire.len());
    let mut window = 0u32;
    let mut iter = wire.iter().copied().enumerate();
    while let Some((_, b)) = iter.next() {
        out.push(b);
        window = (window << 8) | b as u32;
        if ends_with_pattern(window) {
            match iter.next() {
                Some((_, ESCAPE)) => window = 0,
                Some((offset, _)) => return Err(ProtocolError::MalformedEscape { offset }),
                None => return Err(ProtocolError::MalformedEscape { offset: wire.len() }),
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Straightforward scan-and-insert over a slice window.
    fn stuff_reference(x: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < x.len() {
            if i + 3 <= x.len() && x[i..i + 3] == [0xFF, 0xFF, 0xFD] {
                out.extend_from_slice(&[0xFF, 0xFF, 0xFD, 0xFD]);
                i += 3;
            } else {
                out.push(x[i]);
                i += 1;
            }
        }
        out
    }

    #[test]
    fn no_pattern_is_untouched() {
        assert_eq!(stuff(&[1, 2, 3]), vec![1, 2, 3]);
        assert_eq!(unstuff(&[1, 2, 3]).unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn single_pattern() {
        assert_eq!(stuff(&[0xFF, 0xFF, 0xFD]), vec![0xFF, 0xFF, 0xFD, 0xFD]);
        assert_eq!(unstuff(&[0xFF, 0xFF, 0xFD, 0xFD]).unwrap(), vec![0xFF, 0xFF, 0xFD]);
    }

    #[test]
    fn repeated_pattern() {
        let raw = [0xFF, 0xFF, 0xFD, 0xFF, 0xFF, 0xFD];
        let expected = vec![0xFF, 0xFF, 0xFD, 0xFD, 0xFF, 0xFF, 0xFD, 0xFD];
        assert_eq!(stuff_reference(&raw), expected);
        assert_eq!(stuff(&raw), expected);
    }

    #[test]
    fn raw_fd_after_pattern() {
        let raw = [0xFF, 0xFF, 0xFD, 0xFD];
        assert_eq!(stuff(&raw), vec![0xFF, 0xFF, 0xFD, 0xFD, 0xFD]);
        assert_eq!(unstuff(&stuff(&raw)).unwrap(), raw);
    }

    #[test]
    fn dangling_pattern_is_framing_error() {
        assert!(matches!(
            unstuff(&[0x01, 0xFF, 0xFF, 0xFD]),
            Err(ProtocolError::MalformedEscape { offset: 4 })
        ));
        assert!(matches!(
            unstuff(&[0xFF, 0xFF, 0xFD, 0x00]),
            Err(ProtocolError::MalformedEscape { offset: 3 })
        ));
    }

    fn pattern_heavy_bytes() -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(prop_oneof![Just(0xFFu8), Just(0xFD), Just(0x00), any::<u8>()], 0..64)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn roundtrip(x in pattern_heavy_bytes()) {
            let wire = stuff(&x);
            prop_assert_eq!(wire.len(), stuffed_len(&x));
            prop_assert_eq!(&wire, &stuff_reference(&x));
            prop_assert_eq!(unstuff(&wire).unwrap(), x);
            let header = [0xFF, 0xFF, 0xFD, 0x00];
            prop_assert!(!wire.windows(4).any(|w| w == header));
        }
    }
}
