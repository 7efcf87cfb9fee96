//! Latent whitening folded into the networks.
//!
//! With training latents of mean `μ` and covariance `V Λ Vᵀ`, the new latent
//! is `z' = Λ^{-1/2} Vᵀ (z − μ)`. The encoder head's last linear layer absorbs
//! the map and the decoder's first linear layer absorbs its inverse, so
//! reconstructions are unchanged while the training latents become
//! uncorrelated with unit variance. A diagonal prior over `z'` then matches
//! the full covariance of the original latents.

use super::train::finish;
use super::{Autoencoder, CodecError, PointDecoder, PointEncoder};
use crate::geometry::PointCloud;
use crate::nn::{svd, LayerKind, Network, Tensor};

/// Eigenvalues below this fraction of the largest are raised to it.
pub const WHITEN_FLOOR: f64 = 1e-4;

fn latents(encoder: &PointEncoder, clouds: &[PointCloud]) -> Result<Tensor, CodecError> {
    let mut rows = Vec::with_capacity(clouds.len() * encoder.latent_dim());
    for chunk in clouds.chunks(64) {
        let refs: Vec<&PointCloud> = chunk.iter().collect();
        rows.extend(encoder.encode_batch(&refs)?.into_data());
    }
    Ok(Tensor::matrix(clouds.len(), encoder.latent_dim(), rows)?)
}

fn replace_linear(
    net: &Network,
    index: usize,
    weight: Tensor,
    bias: Tensor,
) -> Result<Network, CodecError> {
    let mut layers = net.layers().to_vec();
    layers[index].params = vec![weight, bias];
    Ok(Network::from_layers(layers)?)
}

impl Autoencoder {
    /// Re-expresses the latent space in whitened coordinates computed from
    /// `train` and refits the prior.
    pub fn whitened(&self, train: &[PointCloud]) -> Result<Autoencoder, CodecError> {
        let head = &self.encoder.head;
        let dec = &self.decoder.net;
        let last = head.layers().len() - 1;
        if head.layers()[last].spec.kind != LayerKind::Linear
            || dec.layers()[0].spec.kind != LayerKind::Linear
        {
            return Err(CodecError::Invalid(
                "whitening needs linear layers on both sides of the latent".into(),
            ));
        }
        if train.len() < 2 {
            return Err(CodecError::Invalid(
                "whitening needs at least two training clouds".into(),
            ));
        }
        let z = latents(&self.encoder, train)?;
        let (n, d) = (z.rows(), z.cols());
        let mut mu = vec![0.0; d];
        for i in 0..n {
            for (m, v) in mu.iter_mut().zip(z.row(i)) {
                *m += v / n as f64;
            }
        }
        let mut x = z.clone();
        for i in 0..n {
            for (v, m) in x.row_mut(i).iter_mut().zip(&mu) {
                *v -= m;
            }
        }
        let cov = x.t_matmul(&x)?.scale(1.0 / n as f64);
        let eig = svd(&cov)?;
        let top = eig.sigma[0].max(f64::MIN_POSITIVE);
        let root: Vec<f64> = eig
            .sigma
            .iter()
            .map(|&l| l.max(WHITEN_FLOOR * top).sqrt())
            .collect();
        // whiten = Λ^{-1/2} Vᵀ, color = V Λ^{1/2}
        let mut whiten = eig.v.transpose();
        for (i, r) in root.iter().enumerate() {
            for v in whiten.row_mut(i) {
                *v /= r;
            }
        }
        let mut color = eig.v.clone();
        for i in 0..d {
            for (v, r) in color.row_mut(i).iter_mut().zip(&root) {
                *v *= r;
            }
        }
        let mu_t = Tensor::vector(mu.clone())?.reshape(vec![d, 1])?;

        let hp = &head.layers()[last].params;
        let w_head = whiten.matmul(&hp[0])?;
        let shifted: Vec<f64> = hp[1].data().iter().zip(&mu).map(|(b, m)| b - m).collect();
        let b_head = whiten
            .matmul(&Tensor::vector(shifted)?.reshape(vec![d, 1])?)?
            .reshape(vec![d])?;
        let head = replace_linear(head, last, w_head, b_head)?;

        let dp = &dec.layers()[0].params;
        let w_dec = dp[0].matmul(&color)?;
        let out = dp[0].rows();
        let b_dec = dp[1].add(&dp[0].matmul(&mu_t)?.reshape(vec![out])?)?;
        let dec = replace_linear(dec, 0, w_dec, b_dec)?;

        let encoder = PointEncoder::new(self.encoder.pointwise.clone(), head)?;
        finish(encoder, PointDecoder::new(dec)?, train, self.report.clone())
    }
}
