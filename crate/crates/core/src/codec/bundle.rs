//! On-disk codec bundle: a directory holding `encoder.sqzn`,
//! `generator.sqzn`, optionally `paired_encoder.sqzn`, and `codec.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CodecError, CodecPair, LatentPrior, PointDecoder, PointEncoder};
use crate::fingerprint::{sha256_hex, Fingerprint};
use crate::nn::{read_checkpoint, write_checkpoint};

pub const CODEC_MANIFEST: &str = "codec.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleFile {
    pub name: String,
    pub sha256: String,
}

/// Metadata stored next to the checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodecManifest {
    pub d_e: usize,
    pub d_g: usize,
    pub n_points: usize,
    /// Number of encoder layers applied per point before the max pool.
    pub encoder_pool_after: usize,
    pub paired_encoder_pool_after: Option<usize>,
    pub prior_mean: Vec<f32>,
    pub prior_std: Vec<f32>,
    pub fingerprint: Fingerprint,
    pub files: Vec<BundleFile>,
}

fn read_checked(dir: &Path, manifest: &CodecManifest, name: &str) -> Result<Vec<u8>, CodecError> {
    let entry = manifest
        .files
        .iter()
        .find(|f| f.name == name)
        .ok_or_else(|| CodecError::Bundle(format!("manifest does not list {name}")))?;
    let bytes = std::fs::read(dir.join(name))?;
    if sha256_hex(&bytes) != entry.sha256 {
        return Err(CodecError::Bundle(format!(
            "{name} does not match its manifest hash"
        )));
    }
    Ok(bytes)
}

impl CodecPair {
    pub fn save(&self, dir: &Path) -> Result<(), CodecError> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        let mut put = |name: &str, bytes: Vec<u8>| -> Result<(), CodecError> {
            std::fs::write(dir.join(name), &bytes)?;
            files.push(BundleFile {
                name: name.into(),
                sha256: sha256_hex(&bytes),
            });
            Ok(())
        };
        put(
            "encoder.sqzn",
            write_checkpoint(&self.encoder.concatenated()?),
        )?;
        put("generator.sqzn", write_checkpoint(&self.generator.net))?;
        if let Some(pe) = &self.paired_encoder {
            put("paired_encoder.sqzn", write_checkpoint(&pe.concatenated()?))?;
        }
        let manifest = CodecManifest {
            d_e: self.d_e(),
            d_g: self.d_g(),
            n_points: self.n_points(),
            encoder_pool_after: self.encoder.pointwise.layers().len(),
            paired_encoder_pool_after: self
                .paired_encoder
                .as_ref()
                .map(|pe| pe.pointwise.layers().len()),
            prior_mean: self.prior.mean().iter().map(|&v| v as f32).collect(),
            prior_std: self.prior.std().iter().map(|&v| v as f32).collect(),
            fingerprint: self.fingerprint,
            files,
        };
        std::fs::write(
            dir.join(CODEC_MANIFEST),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(())
    }

    /// Loads a bundle, verifying file hashes and the stored fingerprint.
    pub fn load(dir: &Path) -> Result<Self, CodecError> {
        let manifest: CodecManifest =
            serde_json::from_slice(&std::fs::read(dir.join(CODEC_MANIFEST))?)?;
        let enc_net = read_checkpoint(&read_checked(dir, &manifest, "encoder.sqzn")?)?;
        let encoder = PointEncoder::split(&enc_net, manifest.encoder_pool_after)?;
        let generator = PointDecoder::new(read_checkpoint(&read_checked(
            dir,
            &manifest,
            "generator.sqzn",
        )?)?)?;
        let paired_encoder = match manifest.paired_encoder_pool_after {
            Some(k) => {
                let net = read_checkpoint(&read_checked(dir, &manifest, "paired_encoder.sqzn")?)?;
                Some(PointEncoder::split(&net, k)?)
            }
            None => None,
        };
        let prior = LatentPrior::new(
            manifest.prior_mean.iter().map(|&v| v as f64).collect(),
            manifest.prior_std.iter().map(|&v| v as f64).collect(),
        )?;
        let pair = CodecPair::new(encoder, generator, prior, paired_encoder)?;
        if pair.d_e() != manifest.d_e
            || pair.d_g() != manifest.d_g
            || pair.n_points() != manifest.n_points
        {
            return Err(CodecError::Bundle(
                "manifest dimensions disagree with checkpoints".into(),
            ));
        }
        if pair.fingerprint != manifest.fingerprint {
            return Err(CodecError::Bundle(format!(
                "fingerprint {} does not match manifest {}",
                pair.fingerprint, manifest.fingerprint
            )));
        }
        Ok(pair)
    }
}
