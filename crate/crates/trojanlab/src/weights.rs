//! Binary weight file format.
//!
//! Layout: magic `TJTX`, format version (u32 LE), dims V, d, h, C (u64 LE),
//! then the matrices row-major as f64 LE in the order embedding, encoder
//! weights, encoder bias, classifier weights, classifier bias. Round-trips
//! are bit-exact.

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Matrix, ModelParams};

pub const MAGIC: &[u8; 4] = b"TJTX";
pub const FORMAT_VERSION: u32 = 1;

/// Serialize parameters to the weight file byte layout.
pub fn save_weights(params: &ModelParams) -> Vec<u8> {
    let (v, d, h, c) = (
        params.vocab_size(),
        params.embed_dim(),
        params.hidden_dim(),
        params.num_classes(),
    );
    let total = v * d + d * h + h + h * c + c;
    let mut out = Vec::with_capacity(4 + 4 + 32 + total * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    for dim in [v, d, h, c] {
        out.extend_from_slice(&(dim as u64).to_le_bytes());
    }
    for tensor in [
        params.embedding.data(),
        params.w_enc.data(),
        params.b_enc.as_slice(),
        params.w_cls.data(),
        params.b_cls.as_slice(),
    ] {
        for value in tensor {
            out.extend_from_slice(&value.to_le_bytes());
        }
    }
    out
}

fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::Truncated);
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

fn read_u64(bytes: &mut &[u8]) -> Result<u64> {
    let raw = take(bytes, 8)?;
    Ok(u64::from_le_bytes(raw.try_into().unwrap()))
}

fn read_f64_vec(bytes: &mut &[u8], count: usize) -> Result<Vec<f64>> {
    let raw = take(bytes, count.checked_mul(8).ok_or(Error::DimensionOverflow)?)?;
    Ok(raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn to_dim(raw: u64) -> Result<usize> {
    usize::try_from(raw).map_err(|_| Error::DimensionOverflow)
}

/// Parse a weight file produced by [`save_weights`].
pub fn load_weights(mut bytes: &[u8]) -> Result<ModelParams> {
    let magic = take(&mut bytes, 4)?;
    if magic != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = u32::from_le_bytes(take(&mut bytes, 4)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let v = to_dim(read_u64(&mut bytes)?)?;
    let d = to_dim(read_u64(&mut bytes)?)?;
    let h = to_dim(read_u64(&mut bytes)?)?;
    let c = to_dim(read_u64(&mut bytes)?)?;

    // Reject dimension products the host cannot address before allocating.
    let counts = [
        v.checked_mul(d),
        d.checked_mul(h),
        Some(h),
        h.checked_mul(c),
        Some(c),
    ];
    let mut sizes = [0usize; 5];
    for (slot, count) in sizes.iter_mut().zip(counts) {
        *slot = count.ok_or(Error::DimensionOverflow)?;
    }
    sizes
        .iter()
        .try_fold(0usize, |acc, &n| acc.checked_add(n))
        .and_then(|total| total.checked_mul(8))
        .ok_or(Error::DimensionOverflow)?;

    let embedding = Matrix::from_vec(v, d, read_f64_vec(&mut bytes, sizes[0])?);
    let w_enc = Matrix::from_vec(d, h, read_f64_vec(&mut bytes, sizes[1])?);
    let b_enc = read_f64_vec(&mut bytes, sizes[2])?;
    let w_cls = Matrix::from_vec(h, c, read_f64_vec(&mut bytes, sizes[3])?);
    let b_cls = read_f64_vec(&mut bytes, sizes[4])?;

    if !bytes.is_empty() {
        return Err(Error::TrailingBytes);
    }

    Ok(ModelParams {
        embedding,
        w_enc,
        b_enc,
        w_cls,
        b_cls,
    })
}

/// Write a weight file to disk.
pub fn write_weights_file(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, save_weights(params))?;
    Ok(())
}

/// Read a weight file from disk.
pub fn read_weights_file(path: impl AsRef<Path>) -> Result<ModelParams> {
    load_weights(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_params(seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ModelParams::zeros(5, 3, 4, 2);
        for v in p.embedding.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        for v in p.w_enc.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        p.b_enc[0] = -0.0; // sign of zero must survive the round trip
        p
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = sample_params(1);
        let back = load_weights(&save_weights(&p)).unwrap();
        assert_eq!(save_weights(&back), save_weights(&p));
        assert!(back.b_enc[0].is_sign_negative());
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let mut bytes = save_weights(&sample_params(2));
        bytes[0] = b'X';
        assert!(matches!(load_weights(&bytes), Err(Error::BadMagic)));
    }

    #[test]
    fn truncation_mid_matrix_is_rejected() {
        let bytes = save_weights(&sample_params(3));
        let cut = &bytes[..bytes.len() - 9];
        assert!(matches!(load_weights(cut), Err(Error::Truncated)));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let mut bytes = save_weights(&sample_params(4));
        bytes.push(0);
        assert!(matches!(load_weights(&bytes), Err(Error::TrailingBytes)));
    }

    #[test]
    fn unsupported_version_is_rejected() {
        let mut bytes = save_weights(&sample_params(5));
        bytes[4] = 9;
        assert!(matches!(
            load_weights(&bytes),
            Err(Error::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn overflowing_dims_are_rejected() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for dim in [u64::MAX, u64::MAX, 2u64, 2u64] {
            bytes.extend_from_slice(&dim.to_le_bytes());
        }
        assert!(matches!(
            load_weights(&bytes),
            Err(Error::DimensionOverflow)
        ));
    }

    proptest! {
        #[test]
        fn random_params_round_trip(seed: u64) {
            let p = sample_params(seed);
            let bytes = save_weights(&p);
            let back = load_weights(&bytes).unwrap();
            prop_assert_eq!(save_weights(&back), bytes);
        }
    }
}
