use std::fmt::Write as _;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{bridge_loss, bridge_loss_and_grads, LossBreakdown};
use super::{Bridge, BridgeError, Direction, MappingArch, MappingNetwork, PairedLatentDataset};
use crate::codec::CodecPair;
use crate::nn::{AdamConfig, Mode, Network, NnError, OptimizerKind, OptimizerState, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub d_c: usize,
    pub lambda_gram: f64,
    pub lambda_gen: f64,
    pub optimizer: OptimizerKind,
    pub lr_initial: f64,
    pub lr_final: f64,
    /// Epochs over which the rate falls linearly from initial to final.
    pub decay_epochs: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            d_c: 64,
            lambda_gram: 0.1,
            lambda_gen: 1.0,
            optimizer: OptimizerKind::Adam(AdamConfig::default()),
            lr_initial: 1e-3,
            lr_final: 1e-5,
            decay_epochs: 15,
            epochs: 15,
            batch_size: 16,
            dropout: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), BridgeError> {
        let bad = |m: String| Err(BridgeError::Config(m));
        if self.epochs == 0 || self.batch_size == 0 || self.d_c == 0 {
            return bad("epochs, batch_size and d_c must be at least 1".into());
        }
        if !(self.lambda_gram >= 0.0 && self.lambda_gen >= 0.0) {
            return bad("loss weights must be non-negative".into());
        }
        if self.lambda_gram > 0.0 && self.batch_size > self.d_c {
            return bad(format!(
                "batch size {} exceeds d_c {} with a gram term",
                self.batch_size, self.d_c
            ));
        }
        if !(self.lr_initial > 0.0 && self.lr_final >= 0.0) {
            return bad("learning rates must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    /// Rate for a zero-based epoch.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if self.decay_epochs == 0 {
            return self.lr_final;
        }
        let f = (epoch as f64 / self.decay_epochs as f64).min(1.0);
        self.lr_initial + (self.lr_final - self.lr_initial) * f
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train: LossBreakdown,
    pub val: LossBreakdown,
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_gram,train_recon,val_gram,val_recon,lr\n");
        for e in &self.epochs {
            writeln!(
                s,
                "{},{},{},{},{},{}",
                e.epoch,
                e.train.gram_term,
                e.train.recon_term,
                e.val.gram_term,
                e.val.recon_term,
                e.lr
            )
            .expect("writing to a String");
        }
        s
    }
}

/// Mean loss over `idx` in eval mode, in batches of `b` rows.
fn evaluate(
    fwd: &MappingNetwork,
    rev: &MappingNetwork,
    data: &PairedLatentDataset,
    idx: &[usize],
    b: usize,
    config: &TrainConfig,
) -> Result<LossBreakdown, BridgeError> {
    let (mut gram, mut rec, mut count) = (0.0, 0.0, 0.0);
    for chunk in idx.chunks(b) {
        let (ze, zg) = data.gather(chunk);
        let l = bridge_loss(
            fwd,
            rev,
            &ze,
            &zg,
            config.lambda_gram,
            config.lambda_gen,
            Mode::Eval,
            0,
        )?;
        let w = chunk.len() as f64;
        gram += l.gram_term * w;
        rec += l.recon_term * w;
        count += w;
    }
    Ok(LossBreakdown::new(
        gram / count,
        rec / count,
        config.lambda_gram,
        config.lambda_gen,
    ))
}

fn params_of<'a>(fwd: &'a mut MappingNetwork, rev: &'a mut MappingNetwork) -> Vec<&'a mut Tensor> {
    let mut p = fwd.net.params_mut();
    p.extend(rev.net.params_mut());
    p
}

/// Trains both mapping networks jointly on the dataset's training split.
///
/// The codec is only read: its fingerprint must match the dataset's
/// provenance, and it is recomputed afterwards to confirm the parameters are
/// bit-identical. The returned bridge is the one with the lowest validation
/// loss.
pub fn train_bridge(
    codec: &CodecPair,
    data: &PairedLatentDataset,
    forward_arch: MappingArch,
    reverse_arch: MappingArch,
    config: &TrainConfig,
) -> Result<(Bridge, TrainingLog), BridgeError> {
    config.validate()?;
    forward_arch.validate()?;
    reverse_arch.validate()?;
    let before = codec.recompute_fingerprint()?;
    if data.provenance.codec_fingerprint != before {
        return Err(BridgeError::Provenance {
            dataset: data.provenance.codec_fingerprint,
            codec: before,
        });
    }
    if data.d_e() != codec.d_e() || data.d_g() != codec.d_g() {
        return Err(BridgeError::Dimension(
            "dataset widths do not match the codec".into(),
        ));
    }
    if config.d_c > data.d_e() {
        return Err(BridgeError::Config(format!(
            "d_c {} exceeds d_E {}",
            config.d_c,
            data.d_e()
        )));
    }
    if data.split.train.is_empty() || data.split.val.is_empty() {
        return Err(BridgeError::Config(
            "dataset needs non-empty train and val splits".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut fwd = MappingNetwork {
        direction: Direction::Forward,
        arch: forward_arch,
        net: Network::new(
            forward_arch.specs(data.d_e(), config.d_c, config.dropout),
            &mut rng,
        )?,
    };
    let mut rev = MappingNetwork {
        direction: Direction::Reverse,
        arch: reverse_arch,
        net: Network::new(
            reverse_arch.specs(config.d_c, data.d_g(), config.dropout),
            &mut rng,
        )?,
    };
    let all: Vec<&Tensor> = fwd
        .net
        .params()
        .into_iter()
        .chain(rev.net.params())
        .collect();
    let mut opt = OptimizerState::new(config.optimizer, &all);
    let make = |f: &MappingNetwork, r: &MappingNetwork| Bridge {
        forward: f.clone(),
        reverse: r.clone(),
        lambda_gram: config.lambda_gram,
        lambda_gen: config.lambda_gen,
        codec_fingerprint: before,
    };
    let mut order = data.split.train.clone();
    let mut log = TrainingLog::default();
    let mut best: Option<(f64, Bridge)> = None;
    let mut last_finite: Option<(usize, Bridge)> = None;
    let mut step: u64 = 0;
    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        order.shuffle(&mut rng);
        let (mut gram, mut rec, mut count) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(config.batch_size) {
            let (ze, zg) = data.gather(chunk);
            let seed = config
                .seed
                .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                .wrapping_add(step);
            let result = bridge_loss_and_grads(
                &fwd,
                &rev,
                &ze,
                &zg,
                config.lambda_gram,
                config.lambda_gen,
                seed,
            );
            let (loss, grads) = match result {
                Ok(r) => r,
                Err(BridgeError::Nn(NnError::NonFinite(_))) => {
                    let (last_finite_epoch, last) = last_finite
                        .take()
                        .map(|(e, b)| (Some(e), Some(b)))
                        .unwrap_or_default();
                    return Err(BridgeError::Diverged {
                        epoch,
                        last_finite_epoch,
                        last_finite: last.map(Box::new),
                    });
                }
                Err(e) => return Err(e),
            };
            let g: Vec<&Tensor> = grads
                .forward
                .flat()
                .into_iter()
                .chain(grads.reverse.flat())
                .collect();
            opt.step(&mut params_of(&mut fwd, &mut rev), &g, lr)?;
            let w = chunk.len() as f64;
            gram += loss.gram_term * w;
            rec += loss.recon_term * w;
            count += w;
            step += 1;
        }
        let train = LossBreakdown::new(
            gram / count,
            rec / count,
            config.lambda_gram,
            config.lambda_gen,
        );
        let val = evaluate(&fwd, &rev, data, &data.split.val, config.batch_size, config)?;
        if !val.is_finite() {
            let (last_finite_epoch, last) = last_finite
                .take()
                .map(|(e, b)| (Some(e), Some(b)))
                .unwrap_or_default();
            return Err(BridgeError::Diverged {
                epoch,
                last_finite_epoch,
                last_finite: last.map(Box::new),
            });
        }
        debug!(
            "bridge epoch {epoch}: train {:.6} val {:.6} lr {lr:.2e}",
            train.total, val.total
        );
        log.epochs.push(EpochLog {
            epoch,
            train,
            val,
            lr,
        });
        let snapshot = make(&fwd, &rev);
        if best.as_ref().is_none_or(|(b, _)| val.total < *b) {
            best = Some((val.total, snapshot.clone()));
            log.best_epoch = epoch;
        }
        last_finite = Some((epoch, snapshot));
    }
    if codec.recompute_fingerprint()? != before {
        return Err(BridgeError::CodecModified);
    }
    let (_, mut bridge) = best.expect("at least one epoch");
    bridge.round_to_f32();
    info!(
        "bridge d_c={} trained: best epoch {}, val recon {:.6}",
        config.d_c, log.best_epoch, log.epochs[log.best_epoch].val.recon_term
    );
    Ok((bridge, log))
}
