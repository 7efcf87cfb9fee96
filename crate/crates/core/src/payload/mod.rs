//! On-disk form of a compressed code.
//!
//! Container layout, little-endian:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0  | 4 | magic `SQZ3` |
//! | 4  | 2 | version (1) |
//! | 6  | 4 | code width `d_c` |
//! | 10 | 1 | quantization bits (8 or 16) |
//! | 11 | 1 | entropy flag (0 raw, 1 range-coded) |
//! | 12 | 4 | scale (f32) |
//! | 16 | 4 | offset (f32) |
//! | 20 | 8 | codec fingerprint |
//! | 28 | 8 | bridge fingerprint |
//! | 36 | … | body |
//! | end−4 | 4 | CRC32 of everything before it |
//!
//! A raw body is `d_c·bits/8` bytes of codes (u8, or u16 LE). A coded body
//! is a u32 length followed by that many range-coder bytes.

mod quantize;
mod range;

pub use quantize::{dequantize, quantize, Quantized};
pub use range::{range_decode, range_encode};

use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::Fingerprint;

pub const MAGIC: [u8; 4] = *b"SQZ3";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 36;
pub const CRC_LEN: usize = 4;

#[derive(Debug, Error)]
pub enum PayloadError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("not a payload file (magic {0:02x?})")]
    BadMagic([u8; 4]),
    #[error("unsupported payload version {0}")]
    BadVersion(u16),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Crc { stored: u32, computed: u32 },
    #[error("corrupt body at byte {position}: {reason}")]
    Corrupt { position: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayloadHeader {
    pub d_c: u32,
    pub bits: u8,
    pub entropy_coded: bool,
    pub scale: f32,
    pub offset: f32,
    pub codec_fingerprint: Fingerprint,
    pub bridge_fingerprint: Fingerprint,
}

/// Which stored fingerprints differ from the ones a caller is about to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FingerprintMismatch {
    pub codec: bool,
    pub bridge: bool,
}

impl PayloadHeader {
    /// `None` when both fingerprints match; a mismatch is also logged as a
    /// warning and left for the caller to act on.
    pub fn check_fingerprints(
        &self,
        codec: Fingerprint,
        bridge: Fingerprint,
    ) -> Option<FingerprintMismatch> {
        let m = FingerprintMismatch {
            codec: codec != self.codec_fingerprint,
            bridge: bridge != self.bridge_fingerprint,
        };
        if !(m.codec || m.bridge) {
            return None;
        }
        if m.codec {
            warn!(
                "payload was written for codec {}, not {codec}",
                self.codec_fingerprint
            );
        }
        if m.bridge {
            warn!(
                "payload was written for bridge {}, not {bridge}",
                self.bridge_fingerprint
            );
        }
        Some(m)
    }
}

fn raw_body(codes: &[u16], bits: u8) -> Vec<u8> {
    if bits == 8 {
        codes.iter().map(|&c| c as u8).collect()
    } else {
        codes.iter().flat_map(|c| c.to_le_bytes()).collect()
    }
}

/// Serializes `z` into a container. With `entropy` set the body is
/// range-coded, unless that comes out no smaller than the raw body.
pub fn encode_payload(
    z: &[f64],
    bits: u8,
    entropy: bool,
    codec_fingerprint: Fingerprint,
    bridge_fingerprint: Fingerprint,
) -> Result<Vec<u8>, PayloadError> {
    let q = quantize(z, bits)?;
    let d_c = u32::try_from(z.len()).map_err(|_| PayloadError::Invalid("code too long".into()))?;
    let raw = raw_body(&q.codes, bits);
    let mut body = raw.clone();
    let mut coded = false;
    if entropy {
        let enc = range_encode(&q.codes, bits)?;
        if enc.len() + 4 < raw.len() {
            body = (enc.len() as u32).to_le_bytes().to_vec();
            body.extend(enc);
            coded = true;
        }
    }
    let mut out = Vec::with_capacity(HEADER_LEN + body.len() + CRC_LEN);
    out.extend(MAGIC);
    out.extend(VERSION.to_le_bytes());
    out.extend(d_c.to_le_bytes());
    out.push(bits);
    out.push(coded as u8);
    out.extend(q.scale.to_le_bytes());
    out.extend(q.offset.to_le_bytes());
    out.extend(codec_fingerprint.0);
    out.extend(bridge_fingerprint.0);
    out.extend(body);
    out.extend(crc32fast::hash(&out).to_le_bytes());
    Ok(out)
}

fn le<const N: usize>(bytes: &[u8], at: usize) -> [u8; N] {
    bytes[at..at + N].try_into().expect("length checked")
}

/// Parses and validates a container, returning the dequantized code.
///
/// Checks run in order: magic, checksum, version, then body layout. A
/// truncated file therefore fails its checksum.
pub fn decode_payload(bytes: &[u8]) -> Result<(Vec<f64>, PayloadHeader), PayloadError> {
    if bytes.len() >= 4 && bytes[..4] != MAGIC {
        return Err(PayloadError::BadMagic(le(bytes, 0)));
    }
    if bytes.len() < CRC_LEN {
        return Err(PayloadError::Crc {
            stored: 0,
            computed: crc32fast::hash(&[]),
        });
    }
    let split = bytes.len() - CRC_LEN;
    let stored = u32::from_le_bytes(le(bytes, split));
    let computed = crc32fast::hash(&bytes[..split]);
    if stored != computed {
        return Err(PayloadError::Crc { stored, computed });
    }
    if split < HEADER_LEN {
        return Err(PayloadError::Corrupt {
            position: split,
            reason: "header is incomplete".into(),
        });
    }
    let version = u16::from_le_bytes(le(bytes, 4));
    if version != VERSION {
        return Err(PayloadError::BadVersion(version));
    }
    let header = PayloadHeader {
        d_c: u32::from_le_bytes(le(bytes, 6)),
        bits: bytes[10],
        entropy_coded: match bytes[11] {
            0 => false,
            1 => true,
            f => {
                return Err(PayloadError::Corrupt {
                    position: 11,
                    reason: format!("entropy flag {f}"),
                })
            }
        },
        scale: f32::from_le_bytes(le(bytes, 12)),
        offset: f32::from_le_bytes(le(bytes, 16)),
        codec_fingerprint: Fingerprint(le(bytes, 20)),
        bridge_fingerprint: Fingerprint(le(bytes, 28)),
    };
    quantize::check_bits(header.bits).map_err(|_| PayloadError::Corrupt {
        position: 10,
        reason: format!("{} quantization bits", header.bits),
    })?;
    if !(header.scale.is_finite() && header.scale >= 0.0 && header.offset.is_finite()) {
        return Err(PayloadError::Corrupt {
            position: 12,
            reason: "non-finite or negative scale/offset".into(),
        });
    }
    let n = header.d_c as usize;
    let body = &bytes[HEADER_LEN..split];
    let codes = if header.entropy_coded {
        if body.len() < 4 {
            return Err(PayloadError::Corrupt {
                position: HEADER_LEN,
                reason: "missing coded length".into(),
            });
        }
        let len = u32::from_le_bytes(le(body, 0)) as usize;
        if len != body.len() - 4 {
            return Err(PayloadError::Corrupt {
                position: HEADER_LEN,
                reason: format!(
                    "coded length {len} but {} body bytes follow",
                    body.len() - 4
                ),
            });
        }
        range_decode(&body[4..], n, header.bits).map_err(|e| match e {
            PayloadError::Corrupt { position, reason } => PayloadError::Corrupt {
                position: position + HEADER_LEN + 4,
                reason,
            },
            e => e,
        })?
    } else {
        let expected = n * header.bits as usize / 8;
        if body.len() != expected {
            return Err(PayloadError::Corrupt {
                position: HEADER_LEN,
                reason: format!(
                    "raw body has {} bytes, d_c={n} needs {expected}",
                    body.len()
                ),
            });
        }
        if header.bits == 8 {
            body.iter().map(|&b| b as u16).collect()
        } else {
            body.chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect()
        }
    };
    let z = dequantize(&Quantized {
        codes,
        bits: header.bits,
        scale: header.scale,
        offset: header.offset,
    })?;
    Ok((z, header))
}

/// Writes a container and returns its size in bytes.
pub fn write_payload(
    path: &Path,
    z: &[f64],
    bits: u8,
    entropy: bool,
    codec_fingerprint: Fingerprint,
    bridge_fingerprint: Fingerprint,
) -> Result<usize, PayloadError> {
    let bytes = encode_payload(z, bits, entropy, codec_fingerprint, bridge_fingerprint)?;
    std::fs::write(path, &bytes)?;
    Ok(bytes.len())
}

pub fn read_payload(path: &Path) -> Result<(Vec<f64>, PayloadHeader), PayloadError> {
    decode_payload(&std::fs::read(path)?)
}

/// Size of the quantized code alone, the figure compression ratios are
/// quoted against.
pub fn code_bytes(d_c: usize, bits: u8) -> usize {
    d_c * bits as usize / 8
}

/// Bytes of an uncompressed cloud stored as `f32` xyz triples.
pub fn raw_cloud_bytes(n_points: usize) -> usize {
    n_points * 3 * 4
}

pub fn compression_ratio(original_bytes: u64, payload_bytes: u64) -> Result<f64, PayloadError> {
    if original_bytes == 0 || payload_bytes == 0 {
        return Err(PayloadError::Invalid(
            "compression ratio needs positive sizes".into(),
        ));
    }
    Ok(original_bytes as f64 / payload_bytes as f64)
}
