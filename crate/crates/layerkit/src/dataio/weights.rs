//! Network weights in the `TSEG1` format.
//!
//! ```text
//! TSEG1
//! conv1.weight 8 1 3 3
//! conv1.bias 8
//! conv2.weight 16 8 3 3
//! conv2.bias 16
//! conv3.weight 28 16 1 1
//! conv3.bias 28
//!
//! <little-endian f32 values, tensors in the order above, row-major>
//! ```
//!
//! The class count is taken from the `conv3.bias` shape; every other shape
//! must match the fixed architecture.

use std::fmt::Write as _;
use std::path::Path;

use layerkit_core::tinyseg::{TinyNet, TENSOR_NAMES};

use super::{read_file, write_atomic, Error, Result};

pub const MAGIC: &str = "TSEG1";

pub fn encode(net: &TinyNet<f32>) -> Vec<u8> {
    let tensors = net.tensors();
    let mut header = format!("{MAGIC}\n");
    for t in &tensors {
        header.push_str(t.name);
        for d in &t.shape {
            let _ = write!(header, " {d}");
        }
        header.push('\n');
    }
    header.push('\n');
    let mut out = header.into_bytes();
    for t in &tensors {
        for v in t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn err(offset: usize, message: impl Into<String>) -> Error {
    Error::Weights {
        offset,
        message: message.into(),
    }
}

pub fn decode(bytes: &[u8]) -> Result<TinyNet<f32>> {
    let mut pos = 0;
    let next_line = |pos: &mut usize| -> Result<(usize, String)> {
        let start = *pos;
        let end = bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|i| start + i)
            .ok_or_else(|| err(start, "unterminated header line"))?;
        let line = std::str::from_utf8(&bytes[start..end])
            .map_err(|_| err(start, "header is not UTF-8"))?
            .to_string();
        *pos = end + 1;
        Ok((start, line))
    };

    let (at, magic) = next_line(&mut pos)?;
    if magic != MAGIC {
        return Err(err(at, format!("expected `{MAGIC}` magic line")));
    }
    let mut shapes = Vec::with_capacity(TENSOR_NAMES.len());
    for name in TENSOR_NAMES {
        let (at, line) = next_line(&mut pos)?;
        let mut fields = line.split(' ');
        if fields.next() != Some(name) {
            return Err(err(at, format!("expected tensor `{name}`, found `{line}`")));
        }
        let shape = fields
            .map(|f| f.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| err(at, format!("invalid shape in `{line}`")))?;
        shapes.push((at, shape));
    }
    let (at, blank) = next_line(&mut pos)?;
    if !blank.is_empty() {
        return Err(err(at, "expected blank line after tensor list"));
    }

    let (bias_at, bias_shape) = &shapes[5];
    let num_classes = match bias_shape.as_slice() {
        [n] => *n,
        _ => return Err(err(*bias_at, "conv3.bias must be one-dimensional")),
    };
    let mut net = TinyNet::<f32>::zeros(num_classes).map_err(|e| err(*bias_at, e.to_string()))?;
    for ((at, shape), expected) in shapes.iter().zip(net.tensors()) {
        if *shape != expected.shape {
            return Err(err(
                *at,
                format!(
                    "{} has shape {shape:?}, expected {:?}",
                    expected.name, expected.shape
                ),
            ));
        }
    }

    let expected: usize = net.tensors().iter().map(|t| t.data.len() * 4).sum();
    let payload = &bytes[pos..];
    if payload.len() != expected {
        return Err(err(
            pos,
            format!("payload is {} bytes, expected {expected}", payload.len()),
        ));
    }
    let mut values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    for t in net.tensors_mut() {
        for (slot, v) in t.iter_mut().zip(&mut values) {
            *slot = v;
        }
    }
    Ok(net)
}

pub fn read(path: &Path) -> Result<TinyNet<f32>> {
    decode(&read_file(path)?)
}

pub fn write(path: &Path, net: &TinyNet<f32>) -> Result<()> {
    write_atomic(path, &encode(net))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let bytes = encode(&TinyNet::zeros(3).unwrap());
        let header = "TSEG1\nconv1.weight 8 1 3 3\nconv1.bias 8\nconv2.weight 16 8 3 3\n\
                      conv2.bias 16\nconv3.weight 3 16 1 1\nconv3.bias 3\n\n";
        assert!(bytes.starts_with(header.as_bytes()));
        let params = 8 * 9 + 8 + 16 * 8 * 9 + 16 + 3 * 16 + 3;
        assert_eq!(bytes.len(), header.len() + 4 * params);
    }

    #[test]
    fn rejects_bad_files() {
        let good = encode(&TinyNet::init(4, 1).unwrap());
        assert!(decode(&good[..good.len() - 1]).is_err());
        let mut extra = good.clone();
        extra.push(0);
        assert!(decode(&extra).is_err());
        assert!(matches!(
            decode(b"TSEG2\n"),
            Err(Error::Weights { offset: 0, .. })
        ));

        let text = String::from_utf8_lossy(&good).replace("conv2.bias 16", "conv2.bias 15");
        assert!(decode(text.as_bytes()).is_err());
        let swapped = String::from_utf8_lossy(&good).replacen("conv1.bias", "conv2.bias", 1);
        assert!(matches!(
            decode(swapped.as_bytes()),
            Err(Error::Weights { offset: 27, .. })
        ));
    }

    proptest! {
        #[test]
        fn round_trip(classes in 2usize..30, seed in any::<u64>()) {
            let net = TinyNet::<f32>::init(classes, seed).unwrap();
            let bytes = encode(&net);
            let back = decode(&bytes).unwrap();
            prop_assert_eq!(&back, &net);
            prop_assert_eq!(encode(&back), bytes);
        }
    }
}
