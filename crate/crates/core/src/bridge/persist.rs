//! Bridge directory: `forward.sqzn`, `reverse.sqzn` and `bridge.json`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Bridge, BridgeError, Direction, MappingArch, MappingNetwork};
use crate::fingerprint::{sha256_hex, Fingerprint};
use crate::nn::{read_checkpoint, write_checkpoint};

pub const BRIDGE_MANIFEST: &str = "bridge.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BridgeManifest {
    pub d_e: usize,
    pub d_c: usize,
    pub d_g: usize,
    pub lambda_gram: f64,
    pub lambda_gen: f64,
    pub codec_fingerprint: Fingerprint,
    pub forward_arch: MappingArch,
    pub reverse_arch: MappingArch,
    pub forward_sha256: String,
    pub reverse_sha256: String,
    /// Hash of the two checkpoints, identifying this bridge in payloads.
    pub fingerprint: Fingerprint,
}

impl Bridge {
    /// Content hash of both mapping networks as stored on disk.
    pub fn fingerprint(&self) -> Fingerprint {
        let f = write_checkpoint(&self.forward.net);
        let r = write_checkpoint(&self.reverse.net);
        Fingerprint::of_parts([f.as_slice(), r.as_slice()])
    }

    /// Rounds both networks to `f32`, making them identical to what `save`
    /// writes.
    pub fn round_to_f32(&mut self) {
        self.forward.net.round_to_f32();
        self.reverse.net.round_to_f32();
    }

    pub fn save(&self, dir: &Path) -> Result<BridgeManifest, BridgeError> {
        std::fs::create_dir_all(dir)?;
        let f = write_checkpoint(&self.forward.net);
        let r = write_checkpoint(&self.reverse.net);
        std::fs::write(dir.join("forward.sqzn"), &f)?;
        std::fs::write(dir.join("reverse.sqzn"), &r)?;
        let manifest = BridgeManifest {
            d_e: self.d_e(),
            d_c: self.d_c(),
            d_g: self.d_g(),
            lambda_gram: self.lambda_gram,
            lambda_gen: self.lambda_gen,
            codec_fingerprint: self.codec_fingerprint,
            forward_arch: self.forward.arch,
            reverse_arch: self.reverse.arch,
            forward_sha256: sha256_hex(&f),
            reverse_sha256: sha256_hex(&r),
            fingerprint: Fingerprint::of_parts([f.as_slice(), r.as_slice()]),
        };
        std::fs::write(
            dir.join(BRIDGE_MANIFEST),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(manifest)
    }

    pub fn load(dir: &Path) -> Result<Self, BridgeError> {
        let manifest: BridgeManifest =
            serde_json::from_slice(&std::fs::read(dir.join(BRIDGE_MANIFEST))?)?;
        let f = std::fs::read(dir.join("forward.sqzn"))?;
        let r = std::fs::read(dir.join("reverse.sqzn"))?;
        if sha256_hex(&f) != manifest.forward_sha256 || sha256_hex(&r) != manifest.reverse_sha256 {
            return Err(BridgeError::Format(
                "bridge checkpoint does not match its manifest hash".into(),
            ));
        }
        let bridge = Bridge {
            forward: MappingNetwork {
                direction: Direction::Forward,
                arch: manifest.forward_arch,
                net: read_checkpoint(&f)?,
            },
            reverse: MappingNetwork {
                direction: Direction::Reverse,
                arch: manifest.reverse_arch,
                net: read_checkpoint(&r)?,
            },
            lambda_gram: manifest.lambda_gram,
            lambda_gen: manifest.lambda_gen,
            codec_fingerprint: manifest.codec_fingerprint,
        };
        if bridge.d_e() != manifest.d_e
            || bridge.d_c() != manifest.d_c
            || bridge.d_g() != manifest.d_g
        {
            return Err(BridgeError::Format(
                "manifest dimensions disagree with checkpoints".into(),
            ));
        }
        if bridge.reverse.in_dim() != bridge.d_c() {
            return Err(BridgeError::Format(
                "forward output and reverse input widths differ".into(),
            ));
        }
        Ok(bridge)
    }
}
