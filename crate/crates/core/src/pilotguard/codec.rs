//! Binary model blob:
//!
//! ```text
//! "TWPG" | format u16 | model version u32 | seed u64 | K u32 | P u32
//! | label len u16 | label utf-8 | P × pilot u32
//! | (P+1)·K weights f64 | (P+1) bias f64 | K mean f64 | K std f64 | crc32 u32
//! ```
//!
//! Little-endian throughout; the checksum covers every preceding byte.

use thiserror::Error;

use super::config::PilotConfig;
use super::data::NormStats;
use super::model::ClassifierModel;

pub const MAGIC: [u8; 4] = *b"TWPG";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelCodecError {
    #[error("not a model blob (bad magic)")]
    BadMagic,
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("unknown format version {0}")]
    UnknownVersion(u16),
    #[error("blob truncated")]
    Truncated,
    #[error("invalid model: {0}")]
    Invalid(String),
}

/// Bytes before the pilot list and float arrays, for a label of `label_len`.
pub fn header_len(label_len: usize) -> usize {
    4 + 2 + 4 + 8 + 4 + 4 + 2 + label_len
}

pub fn encoded_len(k: usize, p: usize, label_len: usize) -> usize {
    header_len(label_len) + 4 * p + 8 * ((p + 1) * k + (p + 1) + 2 * k) + 4
}

pub fn encode_model(model: &ClassifierModel) -> Vec<u8> {
    let cfg = &model.pilot_config;
    let label = cfg.label().as_bytes();
    let mut out = Vec::with_capacity(encoded_len(cfg.n_subcarriers(), cfg.n_pilots(), label.len()));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&model.version.to_le_bytes());
    out.extend_from_slice(&model.seed.to_le_bytes());
    out.extend_from_slice(&(cfg.n_subcarriers() as u32).to_le_bytes());
    out.extend_from_slice(&(cfg.n_pilots() as u32).to_le_bytes());
    out.extend_from_slice(&(label.len() as u16).to_le_bytes());
    out.extend_from_slice(label);
    for &i in cfg.pilot_indices() {
        out.extend_from_slice(&(i as u32).to_le_bytes());
    }
    for v in model
        .weights
        .iter()
        .chain(&model.bias)
        .chain(&model.norm.mean)
        .chain(&model.norm.std)
    {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelCodecError> {
        if self.bytes.len() < n {
            return Err(ModelCodecError::Truncated);
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], ModelCodecError> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }

    fn u16(&mut self) -> Result<u16, ModelCodecError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32, ModelCodecError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64, ModelCodecError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ModelCodecError> {
        let raw = self.take(n.checked_mul(8).ok_or(ModelCodecError::Truncated)?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

/// Checks magic, then checksum, then format version.
pub fn decode_model(blob: &[u8]) -> Result<ClassifierModel, ModelCodecError> {
    if blob.len() < MAGIC.len() || blob[..4] != MAGIC {
        return Err(ModelCodecError::BadMagic);
    }
    if blob.len() < header_len(0) + 4 {
        return Err(ModelCodecError::Truncated);
    }
    let (body, tail) = blob.split_at(blob.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(ModelCodecError::Checksum { stored, computed });
    }
    let mut cur = Cursor { bytes: &body[4..] };
    let format = cur.u16()?;
    if format != FORMAT_VERSION {
        return Err(ModelCodecError::UnknownVersion(format));
    }
    let version = cur.u32()?;
    let seed = cur.u64()?;
    let k = cur.u32()? as usize;
    let p = cur.u32()? as usize;
    let label_len = cur.u16()? as usize;
    let label = std::str::from_utf8(cur.take(label_len)?)
        .map_err(|_| ModelCodecError::Invalid("label is not UTF-8".into()))?
        .to_owned();
    let pilots = (0..p).map(|_| cur.u32().map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?;
    let pilot_config = PilotConfig::new(k, pilots, label).map_err(|e| ModelCodecError::Invalid(e.to_string()))?;
    let weights = cur.f64s((p + 1) * k)?;
    let bias = cur.f64s(p + 1)?;
    let mean = cur.f64s(k)?;
    let std = cur.f64s(k)?;
    if !cur.bytes.is_empty() {
        return Err(ModelCodecError::Invalid(format!("{} trailing bytes", cur.bytes.len())));
    }
    let model = ClassifierModel {
        pilot_config,
        weights,
        bias,
        norm: NormStats { mean, std },
        version,
        seed,
    };
    if !model.is_consistent() {
        return Err(ModelCodecError::Invalid("non-finite parameters".into()));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ClassifierModel {
        let cfg = PilotConfig::mhz10();
        let mut m = ClassifierModel::zeros(
            cfg,
            NormStats {
                mean: (0..64).map(|i| i as f64 * 0.1).collect(),
                std: vec![1.5; 64],
            },
        );
        m.weights.iter_mut().enumerate().for_each(|(i, w)| *w = (i as f64).sin());
        m.bias = vec![0.1, -0.2, 0.3, -0.4, f64::MIN_POSITIVE];
        m.version = 7;
        m.seed = u64::MAX;
        m
    }

    #[test]
    fn round_trip_is_bitwise() {
        let m = model();
        let blob = encode_model(&m);
        let back = decode_model(&blob).unwrap();
        assert_eq!(back, m);
        assert_eq!(encode_model(&back), blob);
    }

    #[test]
    fn size_follows_layout() {
        let blob = encode_model(&model());
        let header = 4 + 2 + 4 + 8 + 4 + 4 + 2 + "10 MHz".len() + 4 * 4;
        assert_eq!(blob.len(), header + 8 * (5 * 64 + 5 + 2 * 64) + 4);
        assert_eq!(blob.len(), encoded_len(64, 4, 6));
    }

    #[test]
    fn distinct_errors() {
        let blob = encode_model(&model());
        let mut flipped = blob.clone();
        flipped[100] ^= 0x01;
        assert!(matches!(decode_model(&flipped), Err(ModelCodecError::Checksum { .. })));

        let mut magic = blob.clone();
        magic[0] = b'X';
        assert_eq!(decode_model(&magic), Err(ModelCodecError::BadMagic));

        let mut version = blob.clone();
        version[4] = 9;
        let n = version.len();
        let crc = crc32fast::hash(&version[..n - 4]);
        version[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert_eq!(decode_model(&version), Err(ModelCodecError::UnknownVersion(9)));

        assert_eq!(decode_model(b"TW"), Err(ModelCodecError::BadMagic));
        assert_eq!(decode_model(b"TWPG\x01\x00"), Err(ModelCodecError::Truncated));
    }
}
