use serde::{Deserialize, Serialize};

use super::{BridgeError, MappingNetwork};
use crate::nn::{Gradients, Mode, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub gram_term: f64,
    pub recon_term: f64,
    pub total: f64,
    pub lambda_gram: f64,
    pub lambda_gen: f64,
}

impl LossBreakdown {
    pub fn new(gram_term: f64, recon_term: f64, lambda_gram: f64, lambda_gen: f64) -> Self {
        let total = lambda_gram * gram_term + lambda_gen * recon_term;
        Self {
            gram_term,
            recon_term,
            total,
            lambda_gram,
            lambda_gen,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.gram_term.is_finite() && self.recon_term.is_finite() && self.total.is_finite()
    }
}

/// `ZZᵀ − I_B` for a `B×d` batch.
fn gram_residual(z: &Tensor) -> Tensor {
    let mut m = z.matmul_t(z).expect("Z Zᵀ is square");
    for i in 0..z.rows() {
        let v = m.get(i, i) - 1.0;
        m.set(i, i, v);
    }
    m
}

/// `‖ZZᵀ − I_B‖_F² / B²`.
pub fn gram_term(z: &Tensor) -> f64 {
    let b = z.rows() as f64;
    let m = gram_residual(z);
    m.data().iter().map(|v| v * v).sum::<f64>() / (b * b)
}

/// Gradient of `gram_term` with respect to `Z`: `4 (ZZᵀ − I) Z / B²`.
fn gram_grad(z: &Tensor) -> Tensor {
    let b = z.rows() as f64;
    gram_residual(z)
        .matmul(z)
        .expect("B×B times B×d")
        .scale(4.0 / (b * b))
}

/// Mean over rows of the squared L2 distance, and its gradient.
fn recon(pred: &Tensor, target: &Tensor) -> (f64, Tensor) {
    let b = pred.rows() as f64;
    let diff = pred.sub(target).expect("same shape");
    let value = diff.data().iter().map(|v| v * v).sum::<f64>() / b;
    (value, diff.scale(2.0 / b))
}

fn check_batch(
    fwd: &MappingNetwork,
    rev: &MappingNetwork,
    z_e: &Tensor,
    z_g: &Tensor,
    lambda_gram: f64,
) -> Result<(), BridgeError> {
    if z_e.rank() != 2 || z_g.rank() != 2 || z_e.rows() == 0 || z_e.rows() != z_g.rows() {
        return Err(BridgeError::Dimension(format!(
            "batch shapes {:?} and {:?}",
            z_e.shape(),
            z_g.shape()
        )));
    }
    if fwd.out_dim() != rev.in_dim() {
        return Err(BridgeError::Dimension(format!(
            "forward emits {} values, reverse expects {}",
            fwd.out_dim(),
            rev.in_dim()
        )));
    }
    if z_e.cols() != fwd.in_dim() || z_g.cols() != rev.out_dim() {
        return Err(BridgeError::Dimension(format!(
            "batch widths {}/{} vs networks {}/{}",
            z_e.cols(),
            z_g.cols(),
            fwd.in_dim(),
            rev.out_dim()
        )));
    }
    if lambda_gram > 0.0 && z_e.rows() > fwd.out_dim() {
        return Err(BridgeError::Config(format!(
            "batch of {} rows cannot be orthonormal in {} dimensions",
            z_e.rows(),
            fwd.out_dim()
        )));
    }
    Ok(())
}

/// Joint objective on one batch without gradients.
pub fn bridge_loss(
    fwd: &MappingNetwork,
    rev: &MappingNetwork,
    z_e: &Tensor,
    z_g: &Tensor,
    lambda_gram: f64,
    lambda_gen: f64,
    mode: Mode,
    seed: u64,
) -> Result<LossBreakdown, BridgeError> {
    check_batch(fwd, rev, z_e, z_g, lambda_gram)?;
    let (z, _) = fwd.net.forward(z_e, mode, seed)?;
    let (y, _) = rev.net.forward(&z, mode, seed ^ 1)?;
    Ok(LossBreakdown::new(
        gram_term(&z),
        recon(&y, z_g).0,
        lambda_gram,
        lambda_gen,
    ))
}

#[derive(Clone, Debug)]
pub struct BridgeGradients {
    pub forward: Gradients,
    pub reverse: Gradients,
}

/// Joint objective and its gradients for both networks, backpropagating the
/// reconstruction error through the reverse network into the forward one.
pub fn bridge_loss_and_grads(
    fwd: &MappingNetwork,
    rev: &MappingNetwork,
    z_e: &Tensor,
    z_g: &Tensor,
    lambda_gram: f64,
    lambda_gen: f64,
    seed: u64,
) -> Result<(LossBreakdown, BridgeGradients), BridgeError> {
    check_batch(fwd, rev, z_e, z_g, lambda_gram)?;
    let (z, fwd_cache) = fwd.net.forward(z_e, Mode::Train, seed)?;
    let (y, rev_cache) = rev.net.forward(&z, Mode::Train, seed ^ 1)?;
    let gram = gram_term(&z);
    let (rec, d_y) = recon(&y, z_g);
    let loss = LossBreakdown::new(gram, rec, lambda_gram, lambda_gen);
    if !loss.is_finite() {
        return Err(BridgeError::Nn(crate::nn::NnError::NonFinite(
            "bridge loss".into(),
        )));
    }
    let (reverse, mut d_z) = rev.net.backward(&rev_cache, &d_y.scale(lambda_gen))?;
    if lambda_gram != 0.0 {
        d_z.add_assign(&gram_grad(&z).scale(lambda_gram))?;
    }
    let (forward, _) = fwd.net.backward(&fwd_cache, &d_z)?;
    Ok((loss, BridgeGradients { forward, reverse }))
}
