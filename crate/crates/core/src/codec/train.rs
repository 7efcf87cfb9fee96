use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    max_pool, stack_points, AutoencoderArch, CodecError, LatentPrior, PointDecoder, PointEncoder,
};
use crate::geometry::{chamfer, nearest_neighbors, PointCloud};
use crate::nn::{AdamConfig, Mode, Network, NnError, OptimizerKind, OptimizerState, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            lr: 1e-3,
            optimizer: OptimizerKind::Adam(AdamConfig::default()),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training-batch Chamfer per epoch.
    pub epoch_loss: Vec<f64>,
    /// Mean validation Chamfer per epoch; empty without a validation set.
    pub val_chamfer: Vec<f64>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    /// Eval-mode Chamfer of the kept parameters on the training set.
    pub train_chamfer: f64,
}

/// A trained encoder/decoder pair with the prior fitted to its training
/// latents.
#[derive(Clone, Debug)]
pub struct Autoencoder {
    pub encoder: PointEncoder,
    pub decoder: PointDecoder,
    pub prior: LatentPrior,
    pub report: TrainReport,
}

impl Autoencoder {
    pub fn reconstruct(&self, pc: &PointCloud) -> Result<PointCloud, CodecError> {
        self.decoder.generate(&self.encoder.encode(pc)?)
    }

    /// Mean Chamfer between each cloud and its reconstruction.
    pub fn mean_chamfer(&self, clouds: &[PointCloud]) -> Result<f64, CodecError> {
        mean_chamfer(&self.encoder, &self.decoder, clouds)
    }
}

fn mean_chamfer(
    enc: &PointEncoder,
    dec: &PointDecoder,
    clouds: &[PointCloud],
) -> Result<f64, CodecError> {
    let mut total = 0.0;
    for chunk in clouds.chunks(64) {
        let refs: Vec<&PointCloud> = chunk.iter().collect();
        let recon = dec.generate_batch(&enc.encode_batch(&refs)?)?;
        total += recon
            .iter()
            .zip(chunk)
            .map(|(r, pc)| chamfer(r, pc))
            .sum::<f64>();
    }
    Ok(total / clouds.len() as f64)
}

/// Chamfer distance between `pred` (flat `x y z …`) and `target`, with its
/// gradient with respect to `pred`.
pub fn chamfer_with_grad(pred: &[f64], target: &PointCloud) -> Result<(f64, Vec<f64>), CodecError> {
    let p = PointCloud::from_flat(pred)?;
    let (np, nt) = (p.len() as f64, target.len() as f64);
    let fwd = nearest_neighbors(&p, target);
    let bwd = nearest_neighbors(target, &p);
    let mut grad = vec![0.0; pred.len()];
    let mut loss = 0.0;
    for (i, &(j, d)) in fwd.iter().enumerate() {
        loss += d / np;
        let t = target.points()[j];
        for k in 0..3 {
            grad[3 * i + k] += 2.0 * (pred[3 * i + k] - t[k]) / np;
        }
    }
    for (j, &(i, d)) in bwd.iter().enumerate() {
        loss += d / nt;
        let t = target.points()[j];
        for k in 0..3 {
            grad[3 * i + k] += 2.0 * (pred[3 * i + k] - t[k]) / nt;
        }
    }
    Ok((loss, grad))
}

struct Nets {
    pointwise: Network,
    head: Network,
    decoder: Network,
}

impl Nets {
    fn params(&self) -> Vec<&Tensor> {
        let mut p = self.pointwise.params();
        p.extend(self.head.params());
        p.extend(self.decoder.params());
        p
    }

    fn snapshot(&self) -> Result<(PointEncoder, PointDecoder), CodecError> {
        Ok((
            PointEncoder::new(self.pointwise.clone(), self.head.clone())?,
            PointDecoder::new(self.decoder.clone())?,
        ))
    }
}

/// Mean batch Chamfer and its gradient for every parameter, in the order
/// pointwise, head, decoder. The gradient is `None` when the loss is not
/// finite.
fn batch_gradients(
    nets: &Nets,
    batch: &[&PointCloud],
    seed: u64,
) -> Result<(f64, Option<Vec<Tensor>>), CodecError> {
    let counts: Vec<usize> = batch.iter().map(|pc| pc.len()).collect();
    let (acts, pw_cache) = nets
        .pointwise
        .forward(&stack_points(batch), Mode::Train, seed)?;
    let pooled = max_pool(&acts, &counts);
    let (z, head_cache) = nets.head.forward(&pooled.features, Mode::Train, seed ^ 1)?;
    let (out, dec_cache) = nets.decoder.forward(&z, Mode::Train, seed ^ 2)?;
    let b = batch.len() as f64;
    let mut upstream = Vec::with_capacity(out.len());
    let mut loss = 0.0;
    for (i, pc) in batch.iter().enumerate() {
        let (l, g) = chamfer_with_grad(out.row(i), pc)?;
        loss += l / b;
        upstream.extend(g.into_iter().map(|v| v / b));
    }
    if !loss.is_finite() {
        return Ok((loss, None));
    }
    let upstream = Tensor::matrix(out.rows(), out.cols(), upstream)?;
    let (g_dec, gz) = nets.decoder.backward(&dec_cache, &upstream)?;
    let (g_head, g_pooled) = nets.head.backward(&head_cache, &gz)?;
    let c = acts.cols();
    let mut g_acts = Tensor::zeros(acts.shape());
    for (slot, &row) in pooled.argmax.iter().enumerate() {
        let (cloud, col) = (slot / c, slot % c);
        let v = g_acts.get(row, col) + g_pooled.get(cloud, col);
        g_acts.set(row, col, v);
    }
    let (g_pw, _) = nets.pointwise.backward(&pw_cache, &g_acts)?;
    let grads = [g_pw, g_head, g_dec]
        .iter()
        .flat_map(|g| g.flat().into_iter().cloned())
        .collect();
    Ok((loss, Some(grads)))
}

fn train_step(
    nets: &mut Nets,
    opt: &mut OptimizerState,
    batch: &[&PointCloud],
    lr: f64,
    seed: u64,
) -> Result<f64, CodecError> {
    let (loss, grads) = batch_gradients(nets, batch, seed)?;
    let Some(grads) = grads else { return Ok(loss) };
    let grad_refs: Vec<&Tensor> = grads.iter().collect();
    let mut params = nets.pointwise.params_mut();
    params.extend(nets.head.params_mut());
    params.extend(nets.decoder.params_mut());
    opt.step(&mut params, &grad_refs, lr)?;
    Ok(loss)
}

/// Trains an autoencoder on `train` with the Chamfer loss.
///
/// When `val` is non-empty the parameters from the epoch with the lowest
/// validation Chamfer are kept; otherwise the final ones. A non-finite loss
/// aborts with `CodecError::Diverged`, carrying the state from the last
/// epoch that completed with finite values.
pub fn train_autoencoder(
    train: &[PointCloud],
    val: &[PointCloud],
    arch: &AutoencoderArch,
    config: &AutoencoderConfig,
) -> Result<Autoencoder, CodecError> {
    arch.validate()?;
    if train.is_empty() {
        return Err(CodecError::Invalid("empty training set".into()));
    }
    if config.batch_size == 0 || config.epochs == 0 || !(config.lr > 0.0) {
        return Err(CodecError::Invalid(
            "epochs, batch_size and lr must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut nets = Nets {
        pointwise: Network::new(arch.pointwise_specs(), &mut rng)?,
        head: Network::new(arch.head_specs(), &mut rng)?,
        decoder: Network::new(arch.decoder_specs(), &mut rng)?,
    };
    let mut opt = OptimizerState::new(config.optimizer, &nets.params());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut report = TrainReport::default();
    let mut best: Option<(f64, PointEncoder, PointDecoder)> = None;
    let mut last_finite: Option<(usize, PointEncoder, PointDecoder)> = None;
    let mut step = 0usize;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for idx in order.chunks(config.batch_size) {
            let batch: Vec<&PointCloud> = idx.iter().map(|&i| &train[i]).collect();
            let loss = train_step(
                &mut nets,
                &mut opt,
                &batch,
                config.lr,
                config.seed.wrapping_add(step as u64),
            );
            let loss = match loss {
                Ok(l) if l.is_finite() => l,
                Ok(_) | Err(CodecError::Nn(NnError::NonFinite(_))) => {
                    let (last_finite_epoch, last) = match last_finite.take() {
                        Some((e, enc, dec)) => {
                            (Some(e), Some(finish(enc, dec, train, report.clone())?))
                        }
                        None => (None, None),
                    };
                    return Err(CodecError::Diverged {
                        epoch,
                        step,
                        last_finite_epoch,
                        last_finite: last.map(Box::new),
                    });
                }
                Err(e) => return Err(e),
            };
            epoch_loss += loss;
            batches += 1;
            step += 1;
        }
        report.epoch_loss.push(epoch_loss / batches as f64);
        let (enc, dec) = nets.snapshot()?;
        if val.is_empty() {
            best = Some((f64::NAN, enc.clone(), dec.clone()));
            report.best_epoch = epoch;
        } else {
            let v = mean_chamfer(&enc, &dec, val)?;
            report.val_chamfer.push(v);
            if best.as_ref().is_none_or(|(b, _, _)| v < *b) {
                best = Some((v, enc.clone(), dec.clone()));
                report.best_epoch = epoch;
            }
        }
        debug!(
            "autoencoder epoch {epoch}: loss {:.6}",
            report.epoch_loss[epoch]
        );
        last_finite = Some((epoch, enc, dec));
    }
    let (_, enc, dec) = best.expect("at least one epoch");
    let ae = finish(enc, dec, train, report)?;
    info!(
        "autoencoder d={} trained: train chamfer {:.5}, best epoch {}",
        arch.latent_dim, ae.report.train_chamfer, ae.report.best_epoch
    );
    Ok(ae)
}

pub(super) fn finish(
    encoder: PointEncoder,
    decoder: PointDecoder,
    train: &[PointCloud],
    mut report: TrainReport,
) -> Result<Autoencoder, CodecError> {
    let mut rows = Vec::new();
    for chunk in train.chunks(64) {
        let refs: Vec<&PointCloud> = chunk.iter().collect();
        rows.extend(encoder.encode_batch(&refs)?.into_data());
    }
    let latents = Tensor::matrix(train.len(), encoder.latent_dim(), rows)?;
    let prior = LatentPrior::fit(&latents)?;
    report.train_chamfer = mean_chamfer(&encoder, &decoder, train)?;
    Ok(Autoencoder {
        encoder,
        decoder,
        prior,
        report,
    })
}
