//! Sequential dense networks with skip connections and hand-written backward
//! passes.
//!
//! A network is a list of layers applied in order. Activation `0` is the
//! network input and activation `i + 1` is the output of layer `i`; a
//! residual-add layer at position `i` adds activation `skip_from` to its own
//! input (activation `i`).

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NnError, Tensor};

pub const LAYERNORM_EPS: f64 = 1e-5;

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn fresh_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerKind {
    Linear,
    LayerNorm,
    Gelu,
    Dropout,
    ResidualAdd,
}

impl LayerKind {
    pub fn code(self) -> u8 {
        match self {
            LayerKind::Linear => 0,
            LayerKind::LayerNorm => 1,
            LayerKind::Gelu => 2,
            LayerKind::Dropout => 3,
            LayerKind::ResidualAdd => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => LayerKind::Linear,
            1 => LayerKind::LayerNorm,
            2 => LayerKind::Gelu,
            3 => LayerKind::Dropout,
            4 => LayerKind::ResidualAdd,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
    /// Only meaningful for dropout layers.
    pub dropout_rate: f64,
    /// Only meaningful for residual-add layers: index of the activation added
    /// to this layer's input.
    pub skip_from: usize,
}

impl LayerSpec {
    pub fn linear(in_dim: usize, out_dim: usize) -> Self {
        Self {
            kind: LayerKind::Linear,
            in_dim,
            out_dim,
            dropout_rate: 0.0,
            skip_from: 0,
        }
    }

    pub fn layernorm(dim: usize) -> Self {
        Self {
            kind: LayerKind::LayerNorm,
            in_dim: dim,
            out_dim: dim,
            dropout_rate: 0.0,
            skip_from: 0,
        }
    }

    pub fn gelu(dim: usize) -> Self {
        Self {
            kind: LayerKind::Gelu,
            in_dim: dim,
            out_dim: dim,
            dropout_rate: 0.0,
            skip_from: 0,
        }
    }

    pub fn dropout(dim: usize, rate: f64) -> Self {
        Self {
            kind: LayerKind::Dropout,
            in_dim: dim,
            out_dim: dim,
            dropout_rate: rate,
            skip_from: 0,
        }
    }

    pub fn residual(dim: usize, skip_from: usize) -> Self {
        Self {
            kind: LayerKind::ResidualAdd,
            in_dim: dim,
            out_dim: dim,
            dropout_rate: 0.0,
            skip_from,
        }
    }

    /// Shapes of the trainable tensors this layer owns.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match self.kind {
            LayerKind::Linear => vec![vec![self.out_dim, self.in_dim], vec![self.out_dim]],
            LayerKind::LayerNorm => vec![vec![self.out_dim], vec![self.out_dim]],
            _ => vec![],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Arithmetic precision for inference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    F64,
    /// Every activation is rounded to `f32` after each layer.
    F32,
}

#[derive(Clone, Debug)]
pub struct Layer {
    pub spec: LayerSpec,
    /// Linear: `[weight (out×in), bias (out)]`; layernorm: `[gain, shift]`.
    pub params: Vec<Tensor>,
}

#[derive(Clone, Debug)]
pub struct Network {
    layers: Vec<Layer>,
    version: u64,
}

#[derive(Clone, Debug)]
enum Aux {
    None,
    Norm { xhat: Tensor, inv_std: Vec<f64> },
    Mask(Vec<f64>),
    Cdf(Vec<f64>),
}

/// Everything the backward pass needs from a training-mode forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    version: u64,
    mode: Mode,
    acts: Vec<Tensor>,
    aux: Vec<Aux>,
}

impl ForwardCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn output(&self) -> &Tensor {
        self.acts.last().expect("cache holds the input at least")
    }
}

/// Parameter gradients, laid out exactly like `Layer::params`.
#[derive(Clone, Debug)]
pub struct Gradients {
    pub layers: Vec<Vec<Tensor>>,
}

impl Gradients {
    pub fn flat(&self) -> Vec<&Tensor> {
        self.layers.iter().flatten().collect()
    }

    pub fn all_zero(&self) -> bool {
        self.layers
            .iter()
            .flatten()
            .all(|t| t.data().iter().all(|&v| v == 0.0))
    }
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

pub fn gelu(x: f64) -> f64 {
    x * normal_cdf(x)
}

pub fn gelu_grad(x: f64) -> f64 {
    let cdf = normal_cdf(x);
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    cdf + x * pdf
}

impl Network {
    /// Validates the layer chain and initializes parameters: Kaiming-uniform
    /// fan-in weights, zero biases, unit layernorm gains.
    pub fn new(specs: Vec<LayerSpec>, rng: &mut impl Rng) -> Result<Self, NnError> {
        validate_specs(&specs)?;
        let layers = specs
            .into_iter()
            .map(|spec| {
                let params = match spec.kind {
                    LayerKind::Linear => {
                        let bound = (6.0 / spec.in_dim as f64).sqrt();
                        let w = (0..spec.in_dim * spec.out_dim)
                            .map(|_| rng.random_range(-bound..bound))
                            .collect();
                        vec![
                            Tensor::from_parts(vec![spec.out_dim, spec.in_dim], w),
                            Tensor::zeros(&[spec.out_dim]),
                        ]
                    }
                    LayerKind::LayerNorm => vec![
                        Tensor::from_parts(vec![spec.out_dim], vec![1.0; spec.out_dim]),
                        Tensor::zeros(&[spec.out_dim]),
                    ],
                    _ => vec![],
                };
                Layer { spec, params }
            })
            .collect();
        Ok(Self {
            layers,
            version: fresh_version(),
        })
    }

    /// Assembles a network from explicit parameters, checking every shape.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, NnError> {
        let specs: Vec<LayerSpec> = layers.iter().map(|l| l.spec.clone()).collect();
        validate_specs(&specs)?;
        for (i, layer) in layers.iter().enumerate() {
            let shapes = layer.spec.param_shapes();
            if shapes.len() != layer.params.len()
                || shapes
                    .iter()
                    .zip(&layer.params)
                    .any(|(s, p)| s.as_slice() != p.shape())
            {
                return Err(NnError::Shape(format!(
                    "layer {i}: parameter shapes do not match spec"
                )));
            }
            if !layer.params.iter().all(Tensor::is_finite) {
                return Err(NnError::NonFinite(format!("layer {i} parameters")));
            }
        }
        Ok(Self {
            layers,
            version: fresh_version(),
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty network").spec.out_dim
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| &l.params)
            .map(Tensor::len)
            .sum()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| &l.params).collect()
    }

    /// Mutable access invalidates every outstanding forward cache.
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.version = fresh_version();
        self.layers.iter_mut().flat_map(|l| &mut l.params).collect()
    }

    /// Rounds every parameter to the nearest `f32`, so the in-memory network
    /// is exactly what a checkpoint stores.
    pub fn round_to_f32(&mut self) {
        for p in self.params_mut() {
            for v in p.data_mut() {
                *v = *v as f32 as f64;
            }
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<(), NnError> {
        if x.rank() != 2 || x.cols() != self.in_dim() {
            return Err(NnError::Shape(format!(
                "network expects [batch, {}] input, got {:?}",
                self.in_dim(),
                x.shape()
            )));
        }
        if !x.is_finite() {
            return Err(NnError::NonFinite("network input".into()));
        }
        Ok(())
    }

    /// Forward pass recording everything needed for `backward`.
    ///
    /// Dropout masks are drawn from a ChaCha stream seeded by `seed`, so the
    /// same `(parameters, x, mode, seed)` always yields the same bits.
    pub fn forward(
        &self,
        x: &Tensor,
        mode: Mode,
        seed: u64,
    ) -> Result<(Tensor, ForwardCache), NnError> {
        self.check_input(x)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acts: Vec<Tensor> = Vec::with_capacity(self.layers.len() + 1);
        let mut aux = Vec::with_capacity(self.layers.len());
        acts.push(x.clone());
        for layer in &self.layers {
            let input = acts.last().expect("input pushed");
            let (out, a) = layer_forward(layer, input, &acts, mode, &mut rng);
            acts.push(out);
            aux.push(a);
        }
        let y = acts.last().expect("non-empty").clone();
        if !y.is_finite() {
            return Err(NnError::NonFinite("network output".into()));
        }
        Ok((
            y,
            ForwardCache {
                version: self.version,
                mode,
                acts,
                aux,
            },
        ))
    }

    /// Eval-mode forward pass without a cache.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor, NnError> {
        self.predict_with(x, Precision::F64)
    }

    pub fn predict_with(&self, x: &Tensor, precision: Precision) -> Result<Tensor, NnError> {
        self.check_input(x)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut acts: Vec<Tensor> = Vec::with_capacity(self.layers.len() + 1);
        acts.push(round_to(x.clone(), precision));
        for layer in &self.layers {
            let input = acts.last().expect("input pushed");
            let (out, _) = layer_forward(layer, input, &acts, Mode::Eval, &mut rng);
            acts.push(round_to(out, precision));
        }
        let y = acts.pop().expect("non-empty");
        if !y.is_finite() {
            return Err(NnError::NonFinite("network output".into()));
        }
        Ok(y)
    }

    /// Backpropagates `upstream` (gradient of the loss w.r.t. the output)
    /// through the recorded forward pass.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: &Tensor,
    ) -> Result<(Gradients, Tensor), NnError> {
        if cache.mode != Mode::Train {
            return Err(NnError::Cache(
                "backward needs a train-mode forward cache".into(),
            ));
        }
        if cache.version != self.version {
            return Err(NnError::Cache(
                "forward cache is stale: parameters changed since it was recorded".into(),
            ));
        }
        if upstream.shape() != cache.output().shape() {
            return Err(NnError::Shape(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.shape(),
                cache.output().shape()
            )));
        }
        if !upstream.is_finite() {
            return Err(NnError::NonFinite("upstream gradient".into()));
        }
        let n = self.layers.len();
        let mut act_grads: Vec<Option<Tensor>> = vec![None; n + 1];
        act_grads[n] = Some(upstream.clone());
        let mut param_grads: Vec<Vec<Tensor>> = vec![Vec::new(); n];
        for i in (0..n).rev() {
            let g = act_grads[i + 1]
                .take()
                .unwrap_or_else(|| Tensor::zeros(cache.acts[i + 1].shape()));
            let layer = &self.layers[i];
            let input = &cache.acts[i];
            let (pg, gx) = layer_backward(layer, input, &cache.aux[i], &g);
            param_grads[i] = pg;
            accumulate(&mut act_grads[i], gx);
            if layer.spec.kind == LayerKind::ResidualAdd {
                accumulate(&mut act_grads[layer.spec.skip_from], g);
            }
        }
        let input_grad = act_grads[0]
            .take()
            .unwrap_or_else(|| Tensor::zeros(cache.acts[0].shape()));
        let grads = Gradients {
            layers: param_grads,
        };
        if !input_grad.is_finite() || !grads.flat().iter().all(|t| t.is_finite()) {
            return Err(NnError::NonFinite("gradients".into()));
        }
        Ok((grads, input_grad))
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(existing) => {
            for (a, b) in existing.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        None => *slot = Some(g),
    }
}

fn round_to(mut t: Tensor, precision: Precision) -> Tensor {
    if precision == Precision::F32 {
        for v in t.data_mut() {
            *v = *v as f32 as f64;
        }
    }
    t
}

pub fn validate_specs(specs: &[LayerSpec]) -> Result<(), NnError> {
    if specs.is_empty() {
        return Err(NnError::Shape("network has no layers".into()));
    }
    let mut dims = vec![specs[0].in_dim];
    for (i, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(NnError::Shape(format!("layer {i}: zero dimension")));
        }
        if s.in_dim != dims[i] {
            return Err(NnError::Shape(format!(
                "layer {i} ({:?}) expects {} inputs but receives {}",
                s.kind, s.in_dim, dims[i]
            )));
        }
        match s.kind {
            LayerKind::Linear => {}
            LayerKind::Dropout if !(0.0..1.0).contains(&s.dropout_rate) => {
                return Err(NnError::Shape(format!(
                    "layer {i}: dropout rate {} outside [0,1)",
                    s.dropout_rate
                )));
            }
            LayerKind::ResidualAdd => {
                if s.skip_from > i || dims[s.skip_from] != s.in_dim {
                    return Err(NnError::Shape(format!(
                        "layer {i}: residual source {} is not an earlier activation of width {}",
                        s.skip_from, s.in_dim
                    )));
                }
            }
            _ => {}
        }
        if s.kind != LayerKind::Linear && s.out_dim != s.in_dim {
            return Err(NnError::Shape(format!(
                "layer {i} ({:?}) must preserve width",
                s.kind
            )));
        }
        dims.push(s.out_dim);
    }
    Ok(())
}

fn layer_forward(
    layer: &Layer,
    x: &Tensor,
    acts: &[Tensor],
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> (Tensor, Aux) {
    let spec = &layer.spec;
    match spec.kind {
        LayerKind::Linear => {
            let (w, b) = (&layer.params[0], &layer.params[1]);
            let mut y = x.matmul_t(w).expect("validated dims");
            let cols = y.cols();
            for row in y.data_mut().chunks_mut(cols) {
                for (v, bias) in row.iter_mut().zip(b.data()) {
                    *v += bias;
                }
            }
            (y, Aux::None)
        }
        LayerKind::LayerNorm => {
            let (gain, shift) = (layer.params[0].data(), layer.params[1].data());
            let d = x.cols();
            let mut xhat = x.clone();
            let mut y = x.clone();
            let mut inv_std = Vec::with_capacity(x.rows());
            for r in 0..x.rows() {
                let row = x.row(r);
                let mean = row.iter().sum::<f64>() / d as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
                let is = 1.0 / (var + LAYERNORM_EPS).sqrt();
                inv_std.push(is);
                let xh = xhat.row_mut(r);
                for (j, v) in row.iter().enumerate() {
                    xh[j] = (v - mean) * is;
                }
                let xh = xhat.row(r).to_vec();
                for (j, out) in y.row_mut(r).iter_mut().enumerate() {
                    *out = gain[j] * xh[j] + shift[j];
                }
            }
            (y, Aux::Norm { xhat, inv_std })
        }
        LayerKind::Gelu => {
            let cdf: Vec<f64> = x.data().iter().map(|&v| normal_cdf(v)).collect();
            let data = x.data().iter().zip(&cdf).map(|(&v, c)| v * c).collect();
            let aux = if mode == Mode::Train {
                Aux::Cdf(cdf)
            } else {
                Aux::None
            };
            (Tensor::from_parts(x.shape().to_vec(), data), aux)
        }
        LayerKind::Dropout => {
            let p = spec.dropout_rate;
            if mode == Mode::Eval || p == 0.0 {
                return (x.clone(), Aux::Mask(vec![1.0; x.len()]));
            }
            let keep = 1.0 / (1.0 - p);
            let mask: Vec<f64> = (0..x.len())
                .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
                .collect();
            let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
            (
                Tensor::from_parts(x.shape().to_vec(), data),
                Aux::Mask(mask),
            )
        }
        LayerKind::ResidualAdd => {
            let y = x.add(&acts[spec.skip_from]).expect("validated dims");
            (y, Aux::None)
        }
    }
}

fn layer_backward(layer: &Layer, x: &Tensor, aux: &Aux, g: &Tensor) -> (Vec<Tensor>, Tensor) {
    match layer.spec.kind {
        LayerKind::Linear => {
            let w = &layer.params[0];
            let dw = g.t_matmul(x).expect("validated dims");
            let mut db = vec![0.0; g.cols()];
            for r in 0..g.rows() {
                for (acc, v) in db.iter_mut().zip(g.row(r)) {
                    *acc += v;
                }
            }
            let dx = g.matmul(w).expect("validated dims");
            (vec![dw, Tensor::from_parts(vec![g.cols()], db)], dx)
        }
        LayerKind::LayerNorm => {
            let Aux::Norm { xhat, inv_std } = aux else {
                unreachable!("layernorm cache")
            };
            let gain = layer.params[0].data();
            let d = x.cols();
            let mut dgain = vec![0.0; d];
            let mut dshift = vec![0.0; d];
            let mut dx = Tensor::zeros(x.shape());
            for r in 0..x.rows() {
                let gr = g.row(r);
                let xh = xhat.row(r);
                let mut sum_dxh = 0.0;
                let mut sum_dxh_xh = 0.0;
                for j in 0..d {
                    dgain[j] += gr[j] * xh[j];
                    dshift[j] += gr[j];
                    let dxh = gr[j] * gain[j];
                    sum_dxh += dxh;
                    sum_dxh_xh += dxh * xh[j];
                }
                let is = inv_std[r];
                let out = dx.row_mut(r);
                for j in 0..d {
                    let dxh = gr[j] * gain[j];
                    out[j] = is / d as f64 * (d as f64 * dxh - sum_dxh - xh[j] * sum_dxh_xh);
                }
            }
            (
                vec![
                    Tensor::from_parts(vec![d], dgain),
                    Tensor::from_parts(vec![d], dshift),
                ],
                dx,
            )
        }
        LayerKind::Gelu => {
            let Aux::Cdf(cdf) = aux else {
                unreachable!("gelu cache")
            };
            let data = x
                .data()
                .iter()
                .zip(cdf)
                .zip(g.data())
                .map(|((&v, c), &gv)| {
                    gv * (c + v * (-0.5 * v * v).exp() / (2.0 * std::f64::consts::PI).sqrt())
                })
                .collect();
            (vec![], Tensor::from_parts(x.shape().to_vec(), data))
        }
        LayerKind::Dropout => {
            let Aux::Mask(mask) = aux else {
                unreachable!("dropout cache")
            };
            let data = g.data().iter().zip(mask).map(|(gv, m)| gv * m).collect();
            (vec![], Tensor::from_parts(x.shape().to_vec(), data))
        }
        LayerKind::ResidualAdd => (vec![], g.clone()),
    }
}
