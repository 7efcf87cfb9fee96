//! Mapping networks between the encoder's latent space and the generator's,
//! through a short compressed code.

mod dataset;
mod loss;
mod persist;
mod train;

pub use dataset::{gen_paired_dataset, PairedLatentDataset, Provenance, DATASET_MAGIC};
pub use loss::{bridge_loss, bridge_loss_and_grads, gram_term, BridgeGradients, LossBreakdown};
pub use persist::{BridgeManifest, BRIDGE_MANIFEST};
pub use train::{train_bridge, EpochLog, TrainConfig, TrainingLog};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{CodecError, CodecPair};
use crate::fingerprint::Fingerprint;
use crate::geometry::PointCloud;
use crate::nn::{LayerSpec, Network, NnError, Tensor};

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dataset was generated with codec {dataset}, not {codec}")]
    Provenance {
        dataset: Fingerprint,
        codec: Fingerprint,
    },
    #[error("{skipped} of {requested} items had non-finite latents")]
    TooManySkips { skipped: usize, requested: usize },
    #[error(
        "training diverged at epoch {epoch}; last finite state is from epoch {last_finite_epoch:?}"
    )]
    Diverged {
        epoch: usize,
        last_finite_epoch: Option<usize>,
        last_finite: Option<Box<Bridge>>,
    },
    #[error("codec parameters changed during bridge training")]
    CodecModified,
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Forward,
    Reverse,
}

/// Layer layout of a mapping network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum MappingArch {
    /// A single linear layer.
    Linear,
    /// linear → LN → GELU → dropout → linear, plus the first linear's
    /// output → LN → GELU → dropout → linear.
    FeedforwardResidual { hidden: usize },
    /// linear → LN (kept as a global residual), `depth` hidden layers of
    /// linear → GELU → dropout with the global residual re-added after the
    /// first and a local residual around every fourth, then a final linear.
    DeepResidual { hidden: usize, depth: usize },
}

impl MappingArch {
    pub fn specs(&self, in_dim: usize, out_dim: usize, dropout: f64) -> Vec<LayerSpec> {
        match *self {
            MappingArch::Linear => vec![LayerSpec::linear(in_dim, out_dim)],
            MappingArch::FeedforwardResidual { hidden: h } => vec![
                LayerSpec::linear(in_dim, h),
                LayerSpec::layernorm(h),
                LayerSpec::gelu(h),
                LayerSpec::dropout(h, dropout),
                LayerSpec::linear(h, h),
                LayerSpec::residual(h, 1),
                LayerSpec::layernorm(h),
                LayerSpec::gelu(h),
                LayerSpec::dropout(h, dropout),
                LayerSpec::linear(h, out_dim),
            ],
            MappingArch::DeepResidual { hidden: h, depth } => {
                let mut specs = vec![LayerSpec::linear(in_dim, h), LayerSpec::layernorm(h)];
                let global = specs.len();
                for i in 1..=depth {
                    let input = specs.len();
                    specs.push(LayerSpec::linear(h, h));
                    specs.push(LayerSpec::gelu(h));
                    specs.push(LayerSpec::dropout(h, dropout));
                    if i == 1 {
                        specs.push(LayerSpec::residual(h, global));
                    }
                    if i % 4 == 0 {
                        specs.push(LayerSpec::residual(h, input));
                    }
                }
                specs.push(LayerSpec::linear(h, out_dim));
                specs
            }
        }
    }

    fn validate(&self) -> Result<(), BridgeError> {
        let ok = match *self {
            MappingArch::Linear => true,
            MappingArch::FeedforwardResidual { hidden } => hidden > 0,
            MappingArch::DeepResidual { hidden, depth } => hidden > 0 && depth > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(BridgeError::Config(format!(
                "{self:?} needs positive sizes"
            )))
        }
    }
}

#[derive(Clone, Debug)]
pub struct MappingNetwork {
    pub direction: Direction,
    pub arch: MappingArch,
    pub net: Network,
}

impl MappingNetwork {
    pub fn in_dim(&self) -> usize {
        self.net.in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.net.out_dim()
    }

    /// Eval-mode map of one vector.
    pub fn apply(&self, z: &[f64]) -> Result<Vec<f64>, BridgeError> {
        if z.len() != self.in_dim() {
            return Err(BridgeError::Dimension(format!(
                "{:?} mapping expects {} values, got {}",
                self.direction,
                self.in_dim(),
                z.len()
            )));
        }
        Ok(self
            .net
            .predict(&Tensor::matrix(1, z.len(), z.to_vec())?)?
            .into_data())
    }
}

/// Trained forward and reverse mapping networks plus what they were
/// trained against.
#[derive(Clone, Debug)]
pub struct Bridge {
    pub forward: MappingNetwork,
    pub reverse: MappingNetwork,
    pub lambda_gram: f64,
    pub lambda_gen: f64,
    pub codec_fingerprint: Fingerprint,
}

impl Bridge {
    pub fn d_e(&self) -> usize {
        self.forward.in_dim()
    }

    pub fn d_c(&self) -> usize {
        self.forward.out_dim()
    }

    pub fn d_g(&self) -> usize {
        self.reverse.out_dim()
    }

    fn check_codec(&self, codec: &CodecPair) -> Result<(), BridgeError> {
        if codec.d_e() != self.d_e() || codec.d_g() != self.d_g() {
            return Err(BridgeError::Dimension(format!(
                "bridge maps {}→{}→{} but the codec has d_E={} and d_G={}",
                self.d_e(),
                self.d_c(),
                self.d_g(),
                codec.d_e(),
                codec.d_g()
            )));
        }
        Ok(())
    }
}

/// `z_comp = F_E(E(pc))`.
pub fn compress(
    codec: &CodecPair,
    bridge: &Bridge,
    pc: &PointCloud,
) -> Result<Vec<f64>, BridgeError> {
    bridge.check_codec(codec)?;
    bridge.forward.apply(&codec.encode(pc)?)
}

/// `G(F_D(z_comp))`.
pub fn decompress(
    codec: &CodecPair,
    bridge: &Bridge,
    z_comp: &[f64],
) -> Result<PointCloud, BridgeError> {
    bridge.check_codec(codec)?;
    Ok(codec.generate(&bridge.reverse.apply(z_comp)?)?)
}

/// `(1 − t)·a + t·b` for `t ∈ [0, 1]`.
pub fn interpolate(a: &[f64], b: &[f64], t: f64) -> Result<Vec<f64>, BridgeError> {
    if a.len() != b.len() {
        return Err(BridgeError::Dimension(format!(
            "codes of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(BridgeError::Config(format!("t = {t} outside [0, 1]")));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (1.0 - t) * x + t * y)
        .collect())
}
