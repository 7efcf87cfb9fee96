//! Adam and Muon.
//!
//! Muon orthogonalizes the Nesterov momentum of each 2-D parameter with a
//! quintic Newton-Schulz iteration; 1-D parameters (biases, layernorm gains)
//! take the Adam rule with Muon's learning rate.

use serde::{Deserialize, Serialize};

use super::{NnError, Tensor};

/// Quintic Newton-Schulz coefficients `(a, b, c)` for
/// `X ← aX + (bA + cA²)X` with `A = XXᵀ`.
pub const NS_COEFFS: (f64, f64, f64) = (3.4445, -4.7750, 2.0315);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled weight decay; 0 disables it.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuonConfig {
    pub momentum: f64,
    pub ns_steps: usize,
    pub nesterov: bool,
    /// Rule used for parameters that are not matrices.
    pub fallback: AdamConfig,
}

impl Default for MuonConfig {
    fn default() -> Self {
        Self {
            momentum: 0.95,
            ns_steps: 6,
            nesterov: true,
            fallback: AdamConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam(AdamConfig),
    Muon(MuonConfig),
}

#[derive(Clone, Debug)]
pub struct OptimizerState {
    kind: OptimizerKind,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

/// Orthogonalizes `g` with `steps` quintic Newton-Schulz iterations after
/// scaling it to unit Frobenius norm. A zero matrix maps to itself.
pub fn newton_schulz(g: &Tensor, steps: usize) -> Tensor {
    let (a, b, c) = NS_COEFFS;
    let transposed = g.rows() > g.cols();
    let mut x = if transposed { g.transpose() } else { g.clone() };
    let norm = x.frobenius_norm();
    if norm == 0.0 {
        return g.clone();
    }
    x = x.scale(1.0 / norm);
    for _ in 0..steps {
        let gram = x.matmul_t(&x).expect("square");
        let gram2 = gram.matmul(&gram).expect("square");
        let mut poly = gram.scale(b);
        for (p, q) in poly.data_mut().iter_mut().zip(gram2.data()) {
            *p += c * q;
        }
        let mut next = poly.matmul(&x).expect("conformant");
        for (n, v) in next.data_mut().iter_mut().zip(x.data()) {
            *n += a * v;
        }
        x = next;
    }
    if transposed {
        x.transpose()
    } else {
        x
    }
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, params: &[&Tensor]) -> Self {
        let zeros = |ps: &[&Tensor]| {
            ps.iter()
                .map(|p| Tensor::zeros(p.shape()))
                .collect::<Vec<_>>()
        };
        Self {
            kind,
            step: 0,
            first: zeros(params),
            second: zeros(params),
        }
    }

    pub fn adam(config: AdamConfig, params: &[&Tensor]) -> Self {
        Self::new(OptimizerKind::Adam(config), params)
    }

    pub fn muon(config: MuonConfig, params: &[&Tensor]) -> Self {
        Self::new(OptimizerKind::Muon(config), params)
    }

    pub fn kind(&self) -> &OptimizerKind {
        &self.kind
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    fn validate(&self, params: &[&mut Tensor], grads: &[&Tensor]) -> Result<(), NnError> {
        if params.len() != self.first.len() || grads.len() != self.first.len() {
            return Err(NnError::Optimizer(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, ((p, g), m)) in params.iter().zip(grads).zip(&self.first).enumerate() {
            if p.shape() != m.shape() || g.shape() != m.shape() {
                return Err(NnError::Optimizer(format!(
                    "tensor {i}: shape {:?} / grad {:?} vs buffer {:?}",
                    p.shape(),
                    g.shape(),
                    m.shape()
                )));
            }
            if !g.is_finite() {
                return Err(NnError::NonFinite(format!("gradient {i}")));
            }
        }
        Ok(())
    }

    /// Dispatches to the configured rule.
    pub fn step(
        &mut self,
        params: &mut [&mut Tensor],
        grads: &[&Tensor],
        lr: f64,
    ) -> Result<(), NnError> {
        match self.kind {
            OptimizerKind::Adam(_) => self.adam_step(params, grads, lr),
            OptimizerKind::Muon(_) => self.muon_step(params, grads, lr),
        }
    }

    /// Bias-corrected Adam. Gradients are checked before anything is touched,
    /// so a rejected step leaves parameters and state unchanged.
    pub fn adam_step(
        &mut self,
        params: &mut [&mut Tensor],
        grads: &[&Tensor],
        lr: f64,
    ) -> Result<(), NnError> {
        let OptimizerKind::Adam(cfg) = self.kind else {
            return Err(NnError::Optimizer(
                "adam_step on a non-Adam optimizer".into(),
            ));
        };
        self.validate(params, grads)?;
        self.step += 1;
        for i in 0..params.len() {
            adam_update(
                &cfg,
                self.step,
                &mut self.first[i],
                &mut self.second[i],
                params[i],
                grads[i],
                lr,
            );
        }
        Ok(())
    }

    pub fn muon_step(
        &mut self,
        params: &mut [&mut Tensor],
        grads: &[&Tensor],
        lr: f64,
    ) -> Result<(), NnError> {
        let OptimizerKind::Muon(cfg) = self.kind else {
            return Err(NnError::Optimizer(
                "muon_step on a non-Muon optimizer".into(),
            ));
        };
        self.validate(params, grads)?;
        self.step += 1;
        for i in 0..params.len() {
            if params[i].rank() != 2 {
                adam_update(
                    &cfg.fallback,
                    self.step,
                    &mut self.first[i],
                    &mut self.second[i],
                    params[i],
                    grads[i],
                    lr,
                );
                continue;
            }
            let buf = &mut self.first[i];
            for (m, g) in buf.data_mut().iter_mut().zip(grads[i].data()) {
                *m = cfg.momentum * *m + g;
            }
            let direction = if cfg.nesterov {
                let data = grads[i]
                    .data()
                    .iter()
                    .zip(buf.data())
                    .map(|(g, m)| g + cfg.momentum * m)
                    .collect();
                Tensor::from_parts(buf.shape().to_vec(), data)
            } else {
                buf.clone()
            };
            let ortho = newton_schulz(&direction, cfg.ns_steps);
            let aspect = (params[i].rows() as f64 / params[i].cols() as f64)
                .max(1.0)
                .sqrt();
            for (p, o) in params[i].data_mut().iter_mut().zip(ortho.data()) {
                *p -= lr * aspect * o;
            }
        }
        Ok(())
    }
}

fn adam_update(
    cfg: &AdamConfig,
    step: u64,
    m: &mut Tensor,
    v: &mut Tensor,
    p: &mut Tensor,
    g: &Tensor,
    lr: f64,
) {
    let bc1 = 1.0 - cfg.beta1.powi(step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(step as i32);
    let (m, v) = (m.data_mut(), v.data_mut());
    for (j, (p, &g)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
        m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
        v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[j] / bc1;
        let v_hat = v[j] / bc2;
        if cfg.weight_decay != 0.0 {
            *p -= lr * cfg.weight_decay * *p;
        }
        *p -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::vector(vec![v]).unwrap()
    }

    #[test]
    fn adam_single_step_closed_form() {
        let mut p = scalar(1.0);
        let g = scalar(1.0);
        let mut st = OptimizerState::adam(AdamConfig::default(), &[&p]);
        st.adam_step(&mut [&mut p], &[&g], 0.1).unwrap();
        // m̂ = v̂ = 1, update = 0.1 / (1 + 1e-8)
        assert!((p.data()[0] - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn adam_zero_gradient_is_a_no_op() {
        let mut p = Tensor::vector(vec![0.3, -2.0, 5.0]).unwrap();
        let before = p.clone();
        let g = Tensor::zeros(&[3]);
        let mut st = OptimizerState::adam(AdamConfig::default(), &[&p]);
        for _ in 0..5 {
            st.adam_step(&mut [&mut p], &[&g], 0.1).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn non_finite_gradient_rejected_without_side_effects() {
        let mut p = scalar(1.0);
        let good = scalar(0.5);
        let mut st = OptimizerState::adam(AdamConfig::default(), &[&p]);
        st.adam_step(&mut [&mut p], &[&good], 0.1).unwrap();
        let snapshot = (p.clone(), st.first.clone(), st.second.clone(), st.step);
        let bad = Tensor::from_parts(vec![1], vec![f64::INFINITY]);
        assert!(matches!(
            st.adam_step(&mut [&mut p], &[&bad], 0.1),
            Err(NnError::NonFinite(_))
        ));
        assert_eq!((p, st.first, st.second, st.step), snapshot);
    }

    #[test]
    fn wrong_rule_rejected() {
        let mut p = scalar(1.0);
        let g = scalar(1.0);
        let mut st = OptimizerState::adam(AdamConfig::default(), &[&p]);
        assert!(st.muon_step(&mut [&mut p], &[&g], 0.1).is_err());
    }

    #[test]
    fn muon_vectors_follow_adam_rule() {
        let mut a = Tensor::vector(vec![1.0, 2.0]).unwrap();
        let mut b = a.clone();
        let g = Tensor::vector(vec![0.3, -0.7]).unwrap();
        let mut adam = OptimizerState::adam(AdamConfig::default(), &[&a]);
        let mut muon = OptimizerState::muon(MuonConfig::default(), &[&b]);
        for _ in 0..3 {
            adam.adam_step(&mut [&mut a], &[&g], 0.01).unwrap();
            muon.muon_step(&mut [&mut b], &[&g], 0.01).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn zero_matrix_is_fixed_by_newton_schulz() {
        let z = Tensor::zeros(&[3, 4]);
        assert_eq!(newton_schulz(&z, 6), z);
    }
}
