//! Binary 8-bit PGM (`P5`, maxval 255).
//!
//! Writers emit `P5\n<width> <height>\n255\n` followed by the row-major
//! payload, so a 1x1 black image is the 12 bytes
//! `50 35 0a 31 20 31 0a 32 35 35 0a 00`. The reader accepts any netpbm
//! header whitespace and `#` comments.

use std::path::Path;

use layerkit_core::{Radargram, SemanticMap};

use super::{read_file, write_atomic, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

pub fn encode(height: usize, width: usize, data: &[u8]) -> Vec<u8> {
    debug_assert_eq!(data.len(), height * width);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(data);
    out
}

fn err(offset: usize, message: impl Into<String>) -> Error {
    Error::Pgm {
        offset,
        message: message.into(),
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    /// Returns the number's value and the offset of its first digit.
    fn number(&mut self, what: &str) -> Result<(usize, usize)> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(err(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .map(|v| (v, start))
            .ok_or_else(|| err(start, format!("{what} is too large")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Pgm> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(err(0, "missing P5 magic number"));
    }
    let mut c = Cursor { bytes, pos: 2 };
    let (width, _) = c.number("width")?;
    let (height, _) = c.number("height")?;
    let (maxval, maxval_at) = c.number("maxval")?;
    if maxval != 255 {
        return Err(err(
            maxval_at,
            format!("maxval {maxval} unsupported, need 255"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(err(maxval_at, format!("empty image {width}x{height}")));
    }
    match bytes.get(c.pos) {
        Some(b) if b.is_ascii_whitespace() => c.pos += 1,
        _ => return Err(err(c.pos, "expected one whitespace byte after maxval")),
    }
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| err(0, "image dimensions overflow"))?;
    let payload = &bytes[c.pos..];
    if payload.len() < expected {
        return Err(err(
            bytes.len(),
            format!("truncated payload: {} of {expected} bytes", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(err(c.pos + expected, "trailing bytes after payload"));
    }
    Ok(Pgm {
        height,
        width,
        data: payload.to_vec(),
    })
}

pub fn read_radargram(path: &Path) -> Result<Radargram> {
    let p = decode(&read_file(path)?)?;
    Ok(Radargram::new(p.height, p.width, p.data)?)
}

pub fn write_radargram(path: &Path, image: &Radargram) -> Result<()> {
    write_atomic(path, &encode(image.height(), image.width(), image.pixels()))
}

/// Class maps are stored with gray value = class id.
pub fn read_semantic(path: &Path) -> Result<SemanticMap> {
    let p = decode(&read_file(path)?)?;
    Ok(SemanticMap::new(p.height, p.width, p.data)?)
}

pub fn write_semantic(path: &Path, map: &SemanticMap) -> Result<()> {
    write_atomic(path, &encode(map.height(), map.width(), map.classes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_pixel_file() {
        let bytes = encode(1, 1, &[0]);
        assert!(bytes.len() <= 13);
        assert_eq!(bytes, b"P5\n1 1\n255\n\0");
        assert_eq!(decode(&bytes).unwrap().data, vec![0]);
    }

    #[test]
    fn header_comments_and_whitespace() {
        let p = decode(b"P5 # made by hand\n2\t1\r\n255 \x07\x08").unwrap();
        assert_eq!((p.height, p.width, p.data), (1, 2, vec![7, 8]));
    }

    #[test]
    fn rejects_wide_maxval() {
        let e = decode(b"P5\n1 1\n65535\n\0\0").unwrap_err();
        assert!(matches!(e, Error::Pgm { offset: 7, .. }), "{e}");
        assert!(e.to_string().contains("65535"));
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(
            decode(b"P2\n1 1\n255\n0"),
            Err(Error::Pgm { offset: 0, .. })
        ));
        assert!(matches!(
            decode(b"P5\nx 1\n255\n\0"),
            Err(Error::Pgm { offset: 3, .. })
        ));
        assert!(matches!(
            decode(b"P5\n2 2\n255\n\0\0"),
            Err(Error::Pgm { offset: 13, .. })
        ));
        assert!(decode(b"P5\n1 1\n255\n\0\0").is_err());
        assert!(decode(b"P5\n0 1\n255\n").is_err());
        assert!(decode(b"P5\n1 1\n255").is_err());
    }

    proptest! {
        #[test]
        fn round_trip(h in 1usize..64, w in 1usize..64, seed in any::<u64>()) {
            let data: Vec<u8> = (0..h * w).map(|i| (seed.rotate_left(i as u32 % 64) as usize ^ i) as u8).collect();
            let p = decode(&encode(h, w, &data)).unwrap();
            prop_assert_eq!(p, Pgm { height: h, width: w, data });
        }
    }
}
