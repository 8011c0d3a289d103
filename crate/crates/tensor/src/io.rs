//! Tensor blob encoding.
//!
//! Layout: `u64` little-endian header length, a JSON header
//! `{"name", "shape", "dtype"}`, then the values as little-endian `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TensorError};
use crate::tensor::{numel, Tensor};

pub const DTYPE: &str = "f64le";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobHeader {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
}

fn ser_err(msg: impl Into<String>) -> TensorError {
    TensorError::Serialization(msg.into())
}

pub fn encode(name: &str, tensor: &Tensor) -> Vec<u8> {
    let header = BlobHeader {
        name: name.to_string(),
        shape: tensor.shape().to_vec(),
        dtype: DTYPE.to_string(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(8 + json.len() + 8 * tensor.numel());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for v in tensor.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<(BlobHeader, Tensor)> {
    let len_bytes: [u8; 8] = bytes
        .get(..8)
        .ok_or_else(|| ser_err("truncated header length"))?
        .try_into()
        .expect("eight bytes");
    let hlen = u64::from_le_bytes(len_bytes) as usize;
    let body_start = 8usize
        .checked_add(hlen)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| ser_err("truncated header"))?;
    let header: BlobHeader =
        serde_json::from_slice(&bytes[8..body_start]).map_err(|e| ser_err(e.to_string()))?;
    if header.dtype != DTYPE {
        return Err(ser_err(format!("unsupported dtype {}", header.dtype)));
    }
    let body = &bytes[body_start..];
    let n = numel(&header.shape);
    if body.len() != 8 * n {
        return Err(ser_err(format!(
            "{}: expected {} data bytes, found {}",
            header.name,
            8 * n,
            body.len()
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
        .collect();
    let tensor = Tensor::new(header.shape.clone(), data)?;
    Ok((header, tensor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(
            dims in proptest::collection::vec(1usize..4, 0..4),
            seed in any::<u64>(),
        ) {
            let mut rng = crate::RngState::new(seed);
            let t = Tensor::randn(dims.clone(), &mut rng);
            let bytes = encode("w", &t);
            let (h, back) = decode(&bytes).unwrap();
            prop_assert_eq!(h.shape, dims);
            prop_assert_eq!(h.name, "w");
            let same = back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
            prop_assert_eq!(encode("w", &back), bytes);
        }
    }

    #[test]
    fn truncated_is_error() {
        let bytes = encode("x", &Tensor::ones([3]));
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode(&bytes[..4]).is_err());
    }
}
