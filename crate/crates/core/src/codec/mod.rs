//! Toy point-cloud autoencoders and the frozen encoder/generator pair built
//! from two of them.

mod bundle;
mod train;
mod whiten;

pub use bundle::{CodecManifest, CODEC_MANIFEST};
pub use train::{
    chamfer_with_grad, train_autoencoder, Autoencoder, AutoencoderConfig, TrainReport,
};
pub use whiten::WHITEN_FLOOR;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint::Fingerprint;
use crate::geometry::{GeometryError, PointCloud};
use crate::nn::{write_checkpoint, LayerSpec, Network, NnError, Tensor};

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("training diverged at epoch {epoch}, step {step}; last finite state is from epoch {last_finite_epoch:?}")]
    Diverged {
        epoch: usize,
        step: usize,
        last_finite_epoch: Option<usize>,
        last_finite: Option<Box<Autoencoder>>,
    },
    #[error("codec bundle: {0}")]
    Bundle(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Layer widths of one autoencoder. Every hidden layer is linear followed by
/// GELU; the last per-point width is the pooled feature width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderArch {
    pub point_widths: Vec<usize>,
    pub head_widths: Vec<usize>,
    pub decoder_widths: Vec<usize>,
    pub latent_dim: usize,
    pub n_points: usize,
}

fn mlp(input: usize, hidden: &[usize], output: Option<usize>) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    let mut d = input;
    for &w in hidden {
        specs.push(LayerSpec::linear(d, w));
        specs.push(LayerSpec::gelu(w));
        d = w;
    }
    if let Some(o) = output {
        specs.push(LayerSpec::linear(d, o));
    }
    specs
}

impl AutoencoderArch {
    pub fn validate(&self) -> Result<(), CodecError> {
        if self.latent_dim == 0 || self.n_points == 0 || self.point_widths.is_empty() {
            return Err(CodecError::Invalid(
                "latent_dim, n_points and point_widths must be non-empty/positive".into(),
            ));
        }
        Ok(())
    }

    pub fn pointwise_specs(&self) -> Vec<LayerSpec> {
        mlp(3, &self.point_widths, None)
    }

    pub fn head_specs(&self) -> Vec<LayerSpec> {
        let pooled = *self.point_widths.last().expect("validated");
        mlp(pooled, &self.head_widths, Some(self.latent_dim))
    }

    pub fn decoder_specs(&self) -> Vec<LayerSpec> {
        mlp(
            self.latent_dim,
            &self.decoder_widths,
            Some(3 * self.n_points),
        )
    }
}

/// Shared per-point MLP, coordinate-wise max pool, dense head.
#[derive(Clone, Debug)]
pub struct PointEncoder {
    pub(crate) pointwise: Network,
    pub(crate) head: Network,
}

/// Pooled features plus, per cloud and feature, the row that won the max.
pub(crate) struct Pooled {
    pub features: Tensor,
    pub argmax: Vec<usize>,
}

/// Max over each run of `n` consecutive rows.
pub(crate) fn max_pool(acts: &Tensor, counts: &[usize]) -> Pooled {
    let c = acts.cols();
    let mut features = Vec::with_capacity(counts.len() * c);
    let mut argmax = Vec::with_capacity(counts.len() * c);
    let mut start = 0;
    for &n in counts {
        let mut best: Vec<f64> = acts.row(start).to_vec();
        let mut idx = vec![start; c];
        for r in start + 1..start + n {
            for (j, &v) in acts.row(r).iter().enumerate() {
                if v > best[j] {
                    best[j] = v;
                    idx[j] = r;
                }
            }
        }
        features.extend(best);
        argmax.extend(idx);
        start += n;
    }
    Pooled {
        features: Tensor::from_parts(vec![counts.len(), c], features),
        argmax,
    }
}

pub(crate) fn stack_points(clouds: &[&PointCloud]) -> Tensor {
    let data: Vec<f64> = clouds.iter().flat_map(|pc| pc.flat()).collect();
    let rows = data.len() / 3;
    Tensor::from_parts(vec![rows, 3], data)
}

impl PointEncoder {
    pub fn new(pointwise: Network, head: Network) -> Result<Self, CodecError> {
        if pointwise.in_dim() != 3 || pointwise.out_dim() != head.in_dim() {
            return Err(CodecError::Dimension(format!(
                "pointwise {}→{} does not feed head {}→{}",
                pointwise.in_dim(),
                pointwise.out_dim(),
                head.in_dim(),
                head.out_dim()
            )));
        }
        Ok(Self { pointwise, head })
    }

    pub fn latent_dim(&self) -> usize {
        self.head.out_dim()
    }

    pub fn pointwise(&self) -> &Network {
        &self.pointwise
    }

    pub fn head(&self) -> &Network {
        &self.head
    }

    /// Latent of a normalized cloud.
    pub fn encode(&self, pc: &PointCloud) -> Result<Vec<f64>, CodecError> {
        Ok(self.encode_batch(&[pc])?.into_data())
    }

    /// One latent row per cloud; clouds may differ in size.
    pub fn encode_batch(&self, clouds: &[&PointCloud]) -> Result<Tensor, CodecError> {
        if clouds.is_empty() {
            return Err(CodecError::Invalid("no clouds to encode".into()));
        }
        let acts = self.pointwise.predict(&stack_points(clouds))?;
        let counts: Vec<usize> = clouds.iter().map(|pc| pc.len()).collect();
        let pooled = max_pool(&acts, &counts);
        Ok(self.head.predict(&pooled.features)?)
    }

    /// Encodes from a flat `x y z …` slice.
    pub fn encode_flat(&self, flat: &[f64]) -> Result<Vec<f64>, CodecError> {
        if flat.is_empty() || !flat.len().is_multiple_of(3) {
            return Err(CodecError::Dimension(format!(
                "{} values do not form 3-D points",
                flat.len()
            )));
        }
        self.encode(&PointCloud::from_flat(flat)?)
    }

    fn round_to_f32(&mut self) {
        self.pointwise.round_to_f32();
        self.head.round_to_f32();
    }

    /// The per-point layers followed by the head layers, for storage.
    pub(crate) fn concatenated(&self) -> Result<Network, NnError> {
        let layers = self
            .pointwise
            .layers()
            .iter()
            .chain(self.head.layers())
            .cloned()
            .collect();
        Network::from_layers(layers)
    }

    pub(crate) fn split(net: &Network, pool_after: usize) -> Result<Self, CodecError> {
        let layers = net.layers();
        if pool_after == 0 || pool_after >= layers.len() {
            return Err(CodecError::Bundle(format!(
                "pool position {pool_after} outside the encoder"
            )));
        }
        let pointwise = Network::from_layers(layers[..pool_after].to_vec())?;
        let head = Network::from_layers(layers[pool_after..].to_vec())?;
        Self::new(pointwise, head)
    }
}

/// Dense decoder from a latent vector to `N×3` coordinates.
#[derive(Clone, Debug)]
pub struct PointDecoder {
    pub(crate) net: Network,
}

impl PointDecoder {
    pub fn new(net: Network) -> Result<Self, CodecError> {
        if !net.out_dim().is_multiple_of(3) {
            return Err(CodecError::Dimension(format!(
                "decoder output {} is not N×3",
                net.out_dim()
            )));
        }
        Ok(Self { net })
    }

    pub fn latent_dim(&self) -> usize {
        self.net.in_dim()
    }

    pub fn n_points(&self) -> usize {
        self.net.out_dim() / 3
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn generate(&self, z: &[f64]) -> Result<PointCloud, CodecError> {
        if z.len() != self.latent_dim() {
            return Err(CodecError::Dimension(format!(
                "generator expects {} latent values, got {}",
                self.latent_dim(),
                z.len()
            )));
        }
        let out = self
            .net
            .predict(&Tensor::vector(z.to_vec())?.reshape(vec![1, z.len()])?)?;
        Ok(PointCloud::from_flat(out.data())?)
    }

    pub fn generate_batch(&self, z: &Tensor) -> Result<Vec<PointCloud>, CodecError> {
        if z.rank() != 2 || z.cols() != self.latent_dim() {
            return Err(CodecError::Dimension(format!(
                "generator expects [batch, {}], got {:?}",
                self.latent_dim(),
                z.shape()
            )));
        }
        let out = self.net.predict(z)?;
        (0..out.rows())
            .map(|i| Ok(PointCloud::from_flat(out.row(i))?))
            .collect()
    }
}

/// Diagonal Gaussian over a latent space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentPrior {
    mean: Vec<f64>,
    std: Vec<f64>,
}

/// Floor applied to fitted standard deviations.
pub const PRIOR_STD_FLOOR: f64 = 1e-6;

impl LatentPrior {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self, CodecError> {
        if mean.is_empty() || mean.len() != std.len() {
            return Err(CodecError::Dimension(format!(
                "prior mean {} vs std {}",
                mean.len(),
                std.len()
            )));
        }
        if !mean.iter().all(|v| v.is_finite()) || !std.iter().all(|s| s.is_finite() && *s >= 0.0) {
            return Err(CodecError::Invalid(
                "prior needs finite mean and finite non-negative std".into(),
            ));
        }
        Ok(Self { mean, std })
    }

    /// Per-coordinate mean and population std of the rows of `latents`, with
    /// the std floored at `PRIOR_STD_FLOOR`.
    pub fn fit(latents: &Tensor) -> Result<Self, CodecError> {
        if latents.rank() != 2 || latents.rows() == 0 {
            return Err(CodecError::Invalid(
                "prior needs at least one latent row".into(),
            ));
        }
        let (b, d) = (latents.rows() as f64, latents.cols());
        let mut mean = vec![0.0; d];
        for i in 0..latents.rows() {
            for (m, v) in mean.iter_mut().zip(latents.row(i)) {
                *m += v / b;
            }
        }
        let mut var = vec![0.0; d];
        for i in 0..latents.rows() {
            for ((s, v), m) in var.iter_mut().zip(latents.row(i)).zip(&mean) {
                *s += (v - m) * (v - m) / b;
            }
        }
        let std = var
            .into_iter()
            .map(|v| v.sqrt().max(PRIOR_STD_FLOOR))
            .collect();
        Self::new(mean, std)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    /// `mean + std ⊙ ε` with `ε` standard normal, drawn from a ChaCha stream
    /// seeded by `seed`.
    pub fn sample(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.mean
            .iter()
            .zip(&self.std)
            .map(|(m, s)| {
                let e: f64 = StandardNormal.sample(&mut rng);
                m + s * e
            })
            .collect()
    }

    fn round_to_f32(&mut self) {
        for v in self.mean.iter_mut().chain(&mut self.std) {
            *v = *v as f32 as f64;
        }
    }
}

pub fn sample_generator_latent(prior: &LatentPrior, seed: u64) -> Vec<f64> {
    prior.sample(seed)
}

/// The frozen encoder `E`, generator `G` and `G`'s latent prior.
///
/// Construction rounds every parameter to `f32`, so a pair reloaded from disk
/// is bit-identical to the one that was saved. `paired_encoder` is the encoder
/// trained alongside `G`; it is only used to measure `G`'s own round-trip
/// quality and is not part of the fingerprint.
#[derive(Clone, Debug)]
pub struct CodecPair {
    encoder: PointEncoder,
    generator: PointDecoder,
    prior: LatentPrior,
    paired_encoder: Option<PointEncoder>,
    fingerprint: Fingerprint,
}

impl CodecPair {
    pub fn new(
        mut encoder: PointEncoder,
        generator: PointDecoder,
        mut prior: LatentPrior,
        paired_encoder: Option<PointEncoder>,
    ) -> Result<Self, CodecError> {
        let mut generator = generator;
        if prior.dim() != generator.latent_dim() {
            return Err(CodecError::Dimension(format!(
                "prior has {} dims, generator expects {}",
                prior.dim(),
                generator.latent_dim()
            )));
        }
        let mut paired_encoder = paired_encoder;
        if let Some(pe) = &paired_encoder {
            if pe.latent_dim() != generator.latent_dim() {
                return Err(CodecError::Dimension(
                    "paired encoder does not match generator".into(),
                ));
            }
        }
        encoder.round_to_f32();
        generator.net.round_to_f32();
        prior.round_to_f32();
        if let Some(pe) = &mut paired_encoder {
            pe.round_to_f32();
        }
        let fingerprint = Self::compute_fingerprint(&encoder, &generator)?;
        Ok(Self {
            encoder,
            generator,
            prior,
            paired_encoder,
            fingerprint,
        })
    }

    /// Builds the pair from two trained autoencoders: `E` from `a`, `G` and
    /// its prior from `b`.
    pub fn from_autoencoders(a: &Autoencoder, b: &Autoencoder) -> Result<Self, CodecError> {
        Self::new(
            a.encoder.clone(),
            b.decoder.clone(),
            b.prior.clone(),
            Some(b.encoder.clone()),
        )
    }

    fn compute_fingerprint(
        encoder: &PointEncoder,
        generator: &PointDecoder,
    ) -> Result<Fingerprint, CodecError> {
        let e = write_checkpoint(&encoder.concatenated()?);
        let g = write_checkpoint(&generator.net);
        Ok(Fingerprint::of_parts([e.as_slice(), g.as_slice()]))
    }

    /// Hash of the current parameters, recomputed from scratch.
    pub fn recompute_fingerprint(&self) -> Result<Fingerprint, CodecError> {
        Self::compute_fingerprint(&self.encoder, &self.generator)
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    pub fn d_e(&self) -> usize {
        self.encoder.latent_dim()
    }

    pub fn d_g(&self) -> usize {
        self.generator.latent_dim()
    }

    pub fn n_points(&self) -> usize {
        self.generator.n_points()
    }

    pub fn encoder(&self) -> &PointEncoder {
        &self.encoder
    }

    pub fn generator(&self) -> &PointDecoder {
        &self.generator
    }

    pub fn prior(&self) -> &LatentPrior {
        &self.prior
    }

    pub fn paired_encoder(&self) -> Option<&PointEncoder> {
        self.paired_encoder.as_ref()
    }

    pub fn encode(&self, pc: &PointCloud) -> Result<Vec<f64>, CodecError> {
        self.encoder.encode(pc)
    }

    pub fn generate(&self, z: &[f64]) -> Result<PointCloud, CodecError> {
        self.generator.generate(z)
    }

    pub fn sample_generator_latent(&self, seed: u64) -> Vec<f64> {
        self.prior.sample(seed)
    }

    /// `G(encode_B(pc))`, the generator's own reconstruction.
    pub fn reference_round_trip(&self, pc: &PointCloud) -> Result<PointCloud, CodecError> {
        let enc = self
            .paired_encoder
            .as_ref()
            .ok_or_else(|| CodecError::Invalid("pair has no paired encoder".into()))?;
        self.generator.generate(&enc.encode(pc)?)
    }
}
