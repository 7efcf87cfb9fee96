//! Pipeline configuration.
//!
//! One JSON document holds every setting. Any key can be overridden from the
//! command line as `--set section.key=value`, where `value` is parsed as JSON
//! and falls back to a plain string. `PipelineConfig::default()` is the
//! standard toy pipeline.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use squeeze3d::bridge::{MappingArch, TrainConfig};
use squeeze3d::codec::{AutoencoderArch, AutoencoderConfig};
use squeeze3d::fingerprint::{sha256_hex, Fingerprint};
use squeeze3d::nn::{AdamConfig, OptimizerKind};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root of every random stream.
    pub seed: u64,
    pub data: DataConfig,
    pub codec: CodecConfig,
    pub pairs: PairsConfig,
    pub bridge: BridgeConfig,
    pub payload: PayloadConfig,
    pub eval: EvalConfig,
    pub ablation: AblationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub n_shapes: usize,
    pub n_points: usize,
}

/// Widths of one autoencoder; the point count comes from `data`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoencoderWidths {
    pub point_widths: Vec<usize>,
    pub head_widths: Vec<usize>,
    pub decoder_widths: Vec<usize>,
    pub latent_dim: usize,
}

impl AutoencoderWidths {
    pub fn arch(&self, n_points: usize) -> AutoencoderArch {
        AutoencoderArch {
            point_widths: self.point_widths.clone(),
            head_widths: self.head_widths.clone(),
            decoder_widths: self.decoder_widths.clone(),
            latent_dim: self.latent_dim,
            n_points,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodecConfig {
    /// Autoencoder whose encoder becomes the codec's encoder.
    pub encoder_side: AutoencoderWidths,
    /// Autoencoder whose decoder becomes the codec's generator.
    pub generator_side: AutoencoderWidths,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Re-express the generator's latent in whitened coordinates before
    /// fitting its prior.
    pub whiten_generator: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairsConfig {
    pub n_pairs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BridgeConfig {
    pub d_c: usize,
    pub lambda_gram: f64,
    pub lambda_gen: f64,
    pub optimizer: OptimizerKind,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub decay_epochs: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub forward_arch: MappingArch,
    pub reverse_arch: MappingArch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayloadConfig {
    pub bits: u8,
    pub entropy: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub pointsim_k: usize,
    /// Rows per batch for spectral analysis.
    pub analysis_batch: usize,
    /// Cap on evaluated test items; 0 means all.
    pub max_items: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationConfig {
    pub d_c: Vec<usize>,
    pub lambda_gram: Vec<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let bridge = TrainConfig::default();
        Self {
            seed: 0,
            data: DataConfig {
                n_shapes: 1000,
                n_points: 256,
            },
            codec: CodecConfig {
                encoder_side: AutoencoderWidths {
                    point_widths: vec![64, 128],
                    head_widths: vec![256],
                    decoder_widths: vec![256, 512],
                    latent_dim: 256,
                },
                generator_side: AutoencoderWidths {
                    point_widths: vec![48, 96],
                    head_widths: vec![192],
                    decoder_widths: vec![192, 384],
                    latent_dim: 128,
                },
                epochs: 12,
                batch_size: 16,
                lr: 1e-3,
                whiten_generator: true,
            },
            pairs: PairsConfig { n_pairs: 5000 },
            bridge: BridgeConfig {
                d_c: bridge.d_c,
                lambda_gram: bridge.lambda_gram,
                lambda_gen: bridge.lambda_gen,
                optimizer: bridge.optimizer,
                lr_initial: bridge.lr_initial,
                lr_final: bridge.lr_final,
                decay_epochs: bridge.decay_epochs,
                epochs: bridge.epochs,
                batch_size: bridge.batch_size,
                dropout: bridge.dropout,
                forward_arch: MappingArch::FeedforwardResidual { hidden: 256 },
                reverse_arch: MappingArch::DeepResidual {
                    hidden: 256,
                    depth: 4,
                },
            },
            payload: PayloadConfig {
                bits: 16,
                entropy: true,
            },
            eval: EvalConfig {
                pointsim_k: 8,
                analysis_batch: 16,
                max_items: 0,
            },
            ablation: AblationConfig {
                d_c: vec![32, 64, 128, 256],
                lambda_gram: vec![0.0, 0.01, 0.1, 1.0],
            },
        }
    }
}

/// Named random streams derived from the root seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stream {
    Data,
    CodecEncoder,
    CodecGenerator,
    Pairs,
    Bridge,
}

impl Stream {
    pub fn name(self) -> &'static str {
        match self {
            Stream::Data => "data",
            Stream::CodecEncoder => "codec.encoder",
            Stream::CodecGenerator => "codec.generator",
            Stream::Pairs => "pairs",
            Stream::Bridge => "bridge",
        }
    }
}

/// Seed of a named stream: the leading 8 bytes of a hash of the root seed
/// and the stream name.
pub fn stream_seed(root: u64, name: &str) -> u64 {
    u64::from_le_bytes(Fingerprint::of_parts([root.to_le_bytes().as_slice(), name.as_bytes()]).0)
}

impl PipelineConfig {
    pub fn seed_for(&self, stream: Stream) -> u64 {
        stream_seed(self.seed, stream.name())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(
            serde_json::to_string(self)
                .expect("config serializes")
                .as_bytes(),
        )
    }

    /// Applies `key.path=value` overrides in order.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, CliError> {
        let mut doc = serde_json::to_value(self).expect("config serializes");
        for o in overrides {
            let o = o.as_ref();
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override {o:?} is not key=value")))?;
            let value =
                serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            let mut slot = &mut doc;
            for part in key.split('.') {
                slot = slot
                    .get_mut(part)
                    .ok_or_else(|| CliError::Config(format!("unknown config key {key:?}")))?;
            }
            *slot = value;
        }
        let cfg: Self = serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.data.n_shapes < 10 || self.data.n_points == 0 {
            return bad("data needs at least 10 shapes and one point per shape");
        }
        if self.codec.epochs == 0 || self.codec.batch_size == 0 || !(self.codec.lr > 0.0) {
            return bad("codec training needs positive epochs, batch size and rate");
        }
        if self.pairs.n_pairs < 10 {
            return bad("at least 10 pairs are needed");
        }
        if !matches!(self.payload.bits, 8 | 16) {
            return bad("payload.bits must be 8 or 16");
        }
        if self.eval.pointsim_k == 0 || self.eval.analysis_batch == 0 {
            return bad("eval.pointsim_k and eval.analysis_batch must be positive");
        }
        self.train_config(self.bridge.d_c, self.bridge.lambda_gram, 0)
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        for &d_c in &self.ablation.d_c {
            for &lambda in &self.ablation.lambda_gram {
                self.train_config(d_c, lambda, 0).validate().map_err(|e| {
                    CliError::Config(format!(
                        "ablation cell d_c={d_c}, lambda_gram={lambda}: {e}"
                    ))
                })?;
            }
        }
        Ok(())
    }

    pub fn encoder_arch(&self) -> AutoencoderArch {
        self.codec.encoder_side.arch(self.data.n_points)
    }

    pub fn generator_arch(&self) -> AutoencoderArch {
        self.codec.generator_side.arch(self.data.n_points)
    }

    pub fn autoencoder_config(&self, seed: u64) -> AutoencoderConfig {
        AutoencoderConfig {
            epochs: self.codec.epochs,
            batch_size: self.codec.batch_size,
            lr: self.codec.lr,
            optimizer: OptimizerKind::Adam(AdamConfig::default()),
            seed,
        }
    }

    /// Bridge training settings with the given width, gram weight and seed.
    pub fn train_config(&self, d_c: usize, lambda_gram: f64, seed: u64) -> TrainConfig {
        let b = &self.bridge;
        TrainConfig {
            d_c,
            lambda_gram,
            lambda_gen: b.lambda_gen,
            optimizer: b.optimizer,
            lr_initial: b.lr_initial,
            lr_final: b.lr_final,
            decay_epochs: b.decay_epochs,
            epochs: b.epochs,
            batch_size: b.batch_size,
            dropout: b.dropout,
            seed,
        }
    }
}
