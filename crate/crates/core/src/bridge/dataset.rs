//! Synthetic `(z_E, z_G)` pairs: sample `z_G` from the generator's prior,
//! generate a cloud, re-encode it with `E`.
//!
//! File layout (little-endian): magic `SQZP`, `u16` version, 8-byte codec
//! fingerprint, `u64` seed, `u32` requested count, `u32` skipped count,
//! `u32` stored count `n`, `u32` `d_E`, `u32` `d_G`, then `n×d_E` and
//! `n×d_G` `f64` values, then a CRC32 of everything before it. The split is
//! the contiguous 80/10/10 split of the stored items.

use std::path::Path;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::BridgeError;
use crate::codec::CodecPair;
use crate::fingerprint::Fingerprint;
use crate::geometry::{DatasetSplit, PointCloud};
use crate::nn::Tensor;

pub const DATASET_MAGIC: &[u8; 4] = b"SQZP";
const DATASET_VERSION: u16 = 1;
const CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub codec_fingerprint: Fingerprint,
    pub seed: u64,
    pub requested: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairedLatentDataset {
    pub z_e: Tensor,
    pub z_g: Tensor,
    pub split: DatasetSplit,
    pub provenance: Provenance,
}

impl PairedLatentDataset {
    pub fn len(&self) -> usize {
        self.z_e.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn d_e(&self) -> usize {
        self.z_e.cols()
    }

    pub fn d_g(&self) -> usize {
        self.z_g.cols()
    }

    /// Rows `idx` of both latent matrices.
    pub fn gather(&self, idx: &[usize]) -> (Tensor, Tensor) {
        (gather_rows(&self.z_e, idx), gather_rows(&self.z_g, idx))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let p = &self.provenance;
        let mut out = Vec::with_capacity(48 + 8 * (self.z_e.len() + self.z_g.len()));
        out.extend_from_slice(DATASET_MAGIC);
        out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
        out.extend_from_slice(&p.codec_fingerprint.0);
        out.extend_from_slice(&p.seed.to_le_bytes());
        for v in [p.requested, p.skipped, self.len(), self.d_e(), self.d_g()] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in self.z_e.data().iter().chain(self.z_g.data()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BridgeError> {
        const HEAD: usize = 4 + 2 + 8 + 8 + 5 * 4;
        let bad = |m: &str| BridgeError::Format(format!("paired dataset: {m}"));
        if bytes.len() < HEAD + 4 || &bytes[..4] != DATASET_MAGIC {
            return Err(bad("missing SQZP header"));
        }
        let (body, crc) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(crc.try_into().expect("4 bytes")) {
            return Err(bad("checksum mismatch"));
        }
        let version = u16::from_le_bytes([body[4], body[5]]);
        if version != DATASET_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let fingerprint = Fingerprint(body[6..14].try_into().expect("8 bytes"));
        let seed = u64::from_le_bytes(body[14..22].try_into().expect("8 bytes"));
        let u = |i: usize| {
            u32::from_le_bytes(body[22 + 4 * i..26 + 4 * i].try_into().expect("4 bytes")) as usize
        };
        let (requested, skipped, n, d_e, d_g) = (u(0), u(1), u(2), u(3), u(4));
        let values: Vec<f64> = body[HEAD..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        if body.len() - HEAD != 8 * n * (d_e + d_g) {
            return Err(bad("payload size does not match the header"));
        }
        let (e, g) = values.split_at(n * d_e);
        Ok(Self {
            z_e: Tensor::matrix(n, d_e, e.to_vec())?,
            z_g: Tensor::matrix(n, d_g, g.to_vec())?,
            split: DatasetSplit::new(n),
            provenance: Provenance {
                codec_fingerprint: fingerprint,
                seed,
                requested,
                skipped,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), BridgeError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, BridgeError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

pub(crate) fn gather_rows(t: &Tensor, idx: &[usize]) -> Tensor {
    let c = t.cols();
    let data = idx.iter().flat_map(|&i| t.row(i).iter().copied()).collect();
    Tensor::matrix(idx.len(), c, data).expect("rows of a valid tensor")
}

/// Draws `n` pairs from `codec`. Items whose generated cloud or latent is not
/// finite are skipped with a warning; more than 1% skips aborts.
pub fn gen_paired_dataset(
    codec: &CodecPair,
    n: usize,
    seed: u64,
) -> Result<PairedLatentDataset, BridgeError> {
    if n < 10 {
        return Err(BridgeError::Config(format!(
            "need at least 10 pairs, asked for {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let item_seeds: Vec<u64> = (0..n).map(|_| rng.random()).collect();
    let (d_e, d_g) = (codec.d_e(), codec.d_g());
    let mut z_e = Vec::with_capacity(n * d_e);
    let mut z_g = Vec::with_capacity(n * d_g);
    let mut skipped = 0;
    for (c, seeds) in item_seeds.chunks(CHUNK).enumerate() {
        let latents: Vec<Vec<f64>> = seeds
            .iter()
            .map(|&s| codec.sample_generator_latent(s))
            .collect();
        let mut kept_g = Vec::new();
        let mut clouds = Vec::new();
        for (j, zg) in latents.into_iter().enumerate() {
            match codec.generate(&zg) {
                Ok(pc) => {
                    kept_g.push(zg);
                    clouds.push(pc);
                }
                Err(e) => {
                    warn!("paired item {} skipped: {e}", c * CHUNK + j);
                    skipped += 1;
                }
            }
        }
        if clouds.is_empty() {
            continue;
        }
        let refs: Vec<&PointCloud> = clouds.iter().collect();
        let encoded = codec.encoder().encode_batch(&refs);
        for (j, zg) in kept_g.into_iter().enumerate() {
            let ze = match &encoded {
                Ok(t) => t.row(j).to_vec(),
                Err(_) => match codec.encode(&clouds[j]) {
                    Ok(z) => z,
                    Err(e) => {
                        warn!("paired item in chunk {c} skipped: {e}");
                        skipped += 1;
                        continue;
                    }
                },
            };
            z_e.extend(ze);
            z_g.extend(zg);
        }
    }
    if skipped * 100 > n {
        return Err(BridgeError::TooManySkips {
            skipped,
            requested: n,
        });
    }
    let kept = n - skipped;
    Ok(PairedLatentDataset {
        z_e: Tensor::matrix(kept, d_e, z_e)?,
        z_g: Tensor::matrix(kept, d_g, z_g)?,
        split: DatasetSplit::new(kept),
        provenance: Provenance {
            codec_fingerprint: codec.fingerprint(),
            seed,
            requested: n,
            skipped,
        },
    })
}
