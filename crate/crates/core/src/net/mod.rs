//! A small fully-connected classifier whose hidden nonlinearities are
//! pluggable activation layers, trained with hand-written backpropagation
//! and plain SGD.

mod matrix;
mod scores;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use matrix::Matrix;
pub use scores::{softmax, softmax_xent, ScoreMatrix};
pub use train::{train, EpochStats, History, TrainConfig};

pub(crate) use scores::argmax;

use crate::activation::{
    init_state, param_lr_scale, regularization, ActivationSpec, ActivationState, Kernel,
};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense { in_dim: usize, out_dim: usize },
    Activation { spec: ActivationSpec, channels: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `out_dim x in_dim`, row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationLayer {
    pub spec: ActivationSpec,
    pub state: ActivationState,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Activation(ActivationLayer),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub seed: u64,
}

/// Inputs seen by every layer during a forward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    inputs: Vec<Matrix>,
}

impl Cache {
    /// The matrix fed into layer `i`.
    pub fn layer_input(&self, i: usize) -> Option<&Matrix> {
        self.inputs.get(i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerGrad {
    Dense { w: Vec<f64>, b: Vec<f64> },
    Activation { params: Vec<f64> },
}

/// Gradients congruent with a [`Network`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    /// All gradient entries, in layer order.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            match g {
                LayerGrad::Dense { w, b } => {
                    out.extend_from_slice(w);
                    out.extend_from_slice(b);
                }
                LayerGrad::Activation { params } => out.extend_from_slice(params),
            }
        }
        out
    }
}

/// Builds `dims[0] -> dims[1] -> ... -> dims[last]` with one activation
/// layer after every hidden dense layer. Dense weights are uniform in
/// `±sqrt(6 / (fan_in + fan_out))`, biases zero. Dense weights and each
/// activation layer draw from separate seed streams, so two networks that
/// differ only in their activations share identical weights.
pub fn build_mlp(dims: &[usize], acts: &[ActivationSpec], seed: u64) -> Result<Network> {
    if dims.len() < 2 {
        return Err(Error::Config("need at least input and output dims".into()));
    }
    if acts.len() != dims.len() - 2 {
        return Err(Error::Config(format!(
            "{} hidden layers but {} activation specs",
            dims.len() - 2,
            acts.len()
        )));
    }
    if let Some(d) = dims.iter().position(|&d| d == 0) {
        return Err(Error::Config(format!("dimension {d} is zero")));
    }
    let mut weight_rng = seed::rng(seed::subseed(seed, &[0]));
    let mut layers = Vec::new();
    for (i, pair) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w = (0..fan_in * fan_out)
            .map(|_| weight_rng.gen_range(-bound..bound))
            .collect();
        layers.push(Layer::Dense(Dense {
            in_dim: fan_in,
            out_dim: fan_out,
            w,
            b: vec![0.0; fan_out],
        }));
        if let Some(spec) = acts.get(i) {
            spec.validate()?;
            let mut act_rng = seed::rng(seed::subseed(seed, &[1, i as u64]));
            let state = init_state(spec, fan_out, &mut act_rng);
            state.check(spec, fan_out)?;
            layers.push(Layer::Activation(ActivationLayer {
                spec: spec.clone(),
                state,
            }));
        }
    }
    Ok(Network { layers, seed })
}

fn dense_forward(d: &Dense, x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows, d.out_dim);
    for r in 0..x.rows {
        let xr = x.row(r);
        let or = out.row_mut(r);
        for (o, y) in or.iter_mut().enumerate() {
            let wr = &d.w[o * d.in_dim..(o + 1) * d.in_dim];
            *y = d.b[o] + wr.iter().zip(xr).map(|(w, x)| w * x).sum::<f64>();
        }
    }
    out
}

fn activation_forward(a: &ActivationLayer, x: &Matrix) -> Matrix {
    let kernel = Kernel::new(&a.spec);
    let mut out = Matrix::zeros(x.rows, x.cols);
    for r in 0..x.rows {
        let xr = x.row(r);
        for c in 0..x.cols {
            out.data[r * x.cols + c] = kernel.eval(a.state.channel(c), xr, c, 1.0, None).y;
        }
    }
    out
}

impl Network {
    pub fn input_dim(&self) -> usize {
        match self.layers.first() {
            Some(Layer::Dense(d)) => d.in_dim,
            _ => 0,
        }
    }

    pub fn classes(&self) -> usize {
        self.layers
            .iter()
            .rev()
            .find_map(|l| match l {
                Layer::Dense(d) => Some(d.out_dim),
                _ => None,
            })
            .unwrap_or(0)
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Dense(d) => LayerSpec::Dense {
                    in_dim: d.in_dim,
                    out_dim: d.out_dim,
                },
                Layer::Activation(a) => LayerSpec::Activation {
                    spec: a.spec.clone(),
                    channels: a.state.channels,
                },
            })
            .collect()
    }

    pub fn activation_specs(&self) -> Vec<&ActivationSpec> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Activation(a) => Some(&a.spec),
                _ => None,
            })
            .collect()
    }

    fn last_dense(&self) -> Option<usize> {
        self.layers.iter().rposition(|l| matches!(l, Layer::Dense(_)))
    }

    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, Cache)> {
        if batch.cols != self.input_dim() {
            return Err(Error::Shape(format!(
                "batch has {} columns, network expects {}",
                batch.cols,
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for layer in &self.layers {
            let y = match layer {
                Layer::Dense(d) => dense_forward(d, &x),
                Layer::Activation(a) => activation_forward(a, &x),
            };
            inputs.push(std::mem::replace(&mut x, y));
        }
        Ok((x, Cache { inputs }))
    }

    pub fn logits(&self, batch: &Matrix) -> Result<Matrix> {
        Ok(self.forward(batch)?.0)
    }

    /// Sum of the activation regularization penalties.
    pub fn regularization(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Activation(a) => regularization(&a.spec, &a.state).value,
                _ => 0.0,
            })
            .sum()
    }

    /// Cross-entropy plus regularization.
    pub fn loss(&self, batch: &Matrix, labels: &[usize]) -> Result<f64> {
        let (logits, _) = self.forward(batch)?;
        Ok(softmax_xent(&logits, labels)?.0 + self.regularization())
    }

    /// Backpropagates `dlogits` through the cached forward pass. Activation
    /// parameter gradients include the regularization term.
    pub fn backward(&self, cache: &Cache, dlogits: &Matrix) -> Result<Gradients> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::Shape("cache does not match network depth".into()));
        }
        let rows = cache.inputs.first().map_or(0, |m| m.rows);
        if dlogits.rows != rows || dlogits.cols != self.classes() {
            return Err(Error::Shape(format!(
                "dlogits is {}x{}, expected {}x{}",
                dlogits.rows,
                dlogits.cols,
                rows,
                self.classes()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = dlogits.clone();
        for (li, (layer, x)) in self.layers.iter().zip(&cache.inputs).enumerate().rev() {
            let need_dx = li > 0;
            match layer {
                Layer::Dense(d) => {
                    if x.cols != d.in_dim || upstream.cols != d.out_dim {
                        return Err(Error::Shape(format!("stale cache at layer {li}")));
                    }
                    let mut gw = vec![0.0; d.w.len()];
                    let mut gb = vec![0.0; d.out_dim];
                    let mut dx = Matrix::zeros(x.rows, d.in_dim);
                    for r in 0..x.rows {
                        let xr = x.row(r);
                        let gr = upstream.row(r);
                        for (o, &g) in gr.iter().enumerate() {
                            if g == 0.0 {
                                continue;
                            }
                            gb[o] += g;
                            let row_w = &mut gw[o * d.in_dim..(o + 1) * d.in_dim];
                            for (gwi, &xi) in row_w.iter_mut().zip(xr) {
                                *gwi += g * xi;
                            }
                            if need_dx {
                                let wr = &d.w[o * d.in_dim..(o + 1) * d.in_dim];
                                for (dxi, &wi) in dx.row_mut(r).iter_mut().zip(wr) {
                                    *dxi += g * wi;
                                }
                            }
                        }
                    }
                    grads.push(LayerGrad::Dense { w: gw, b: gb });
                    upstream = dx;
                }
                Layer::Activation(a) => {
                    if x.cols != a.state.channels || upstream.cols != x.cols {
                        return Err(Error::Shape(format!("stale cache at layer {li}")));
                    }
                    let kernel = Kernel::new(&a.spec);
                    let n = x.cols;
                    let p = a.state.per_channel;
                    let mut gp = vec![0.0; n * p];
                    let mut dx = Matrix::zeros(x.rows, n);
                    for r in 0..x.rows {
                        let xr = x.row(r);
                        for c in 0..n {
                            let g = upstream.get(r, c);
                            let pt = kernel.eval(
                                a.state.channel(c),
                                xr,
                                c,
                                g,
                                (p > 0).then(|| &mut gp[c * p..(c + 1) * p]),
                            );
                            dx.data[r * n + c] += g * pt.dx;
                            if pt.dx_next != 0.0 {
                                dx.data[r * n + (c + 1) % n] += g * pt.dx_next;
                            }
                        }
                    }
                    let reg = regularization(&a.spec, &a.state);
                    for (g, r) in gp.iter_mut().zip(&reg.grad.values) {
                        *g += r;
                    }
                    grads.push(LayerGrad::Activation { params: gp });
                    upstream = dx;
                }
            }
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    /// `p <- p - lr_p * g_p`. The final dense layer uses
    /// `base_lr * last_layer_lr_mult`, activation parameters
    /// `base_lr * param_lr_scale(spec)`, everything else `base_lr`.
    /// Positivity constraints are re-applied afterwards.
    pub fn sgd_step(&mut self, grads: &Gradients, cfg: &TrainConfig) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(Error::Shape("gradients do not match network".into()));
        }
        for (li, (layer, g)) in self.layers.iter().zip(&grads.layers).enumerate() {
            let ok = match (layer, g) {
                (Layer::Dense(d), LayerGrad::Dense { w, b }) => {
                    w.len() == d.w.len() && b.len() == d.b.len()
                }
                (Layer::Activation(a), LayerGrad::Activation { params }) => {
                    params.len() == a.state.values.len()
                }
                _ => false,
            };
            if !ok {
                return Err(Error::Shape(format!("gradient for layer {li} has the wrong shape")));
            }
            let finite = match g {
                LayerGrad::Dense { w, b } => w.iter().chain(b).all(|v| v.is_finite()),
                LayerGrad::Activation { params } => params.iter().all(|v| v.is_finite()),
            };
            if !finite {
                return Err(Error::NonFiniteGradient(format!("layer {li}")));
            }
        }
        let backup = self.layers.clone();
        let last = self.last_dense();
        for (li, (layer, g)) in self.layers.iter_mut().zip(&grads.layers).enumerate() {
            match (layer, g) {
                (Layer::Dense(d), LayerGrad::Dense { w, b }) => {
                    let lr = if Some(li) == last {
                        cfg.base_lr * cfg.last_layer_lr_mult
                    } else {
                        cfg.base_lr
                    };
                    for (p, g) in d.w.iter_mut().zip(w) {
                        *p -= lr * g;
                    }
                    for (p, g) in d.b.iter_mut().zip(b) {
                        *p -= lr * g;
                    }
                }
                (Layer::Activation(a), LayerGrad::Activation { params }) => {
                    let lr = cfg.base_lr * param_lr_scale(&a.spec);
                    for (p, g) in a.state.values.iter_mut().zip(params) {
                        *p -= lr * g;
                    }
                    a.state.clamp(&a.spec.layout());
                }
                _ => unreachable!("shapes checked above"),
            }
        }
        if !self.flat_params().iter().all(|v| v.is_finite()) {
            self.layers = backup;
            return Err(Error::NonFiniteGradient("step overflowed the weights".into()));
        }
        Ok(())
    }

    /// Softmax probabilities for `samples`, paired with `labels`.
    pub fn predict_proba(&self, samples: &Matrix, labels: &[usize]) -> Result<ScoreMatrix> {
        let logits = self.logits(samples)?;
        ScoreMatrix::new(softmax(&logits), labels.to_vec())
    }

    /// All parameters flattened in the same order as [`Gradients::flat`].
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            match l {
                Layer::Dense(d) => {
                    out.extend_from_slice(&d.w);
                    out.extend_from_slice(&d.b);
                }
                Layer::Activation(a) => out.extend_from_slice(&a.state.values),
            }
        }
        out
    }

    /// Mutable access to the `i`-th entry of [`Network::flat_params`].
    pub fn param_mut(&mut self, mut i: usize) -> Option<&mut f64> {
        for l in &mut self.layers {
            let slices: Vec<&mut Vec<f64>> = match l {
                Layer::Dense(d) => vec![&mut d.w, &mut d.b],
                Layer::Activation(a) => vec![&mut a.state.values],
            };
            for s in slices {
                if i < s.len() {
                    return Some(&mut s[i]);
                }
                i -= s.len();
            }
        }
        None
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NetworkDoc::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: NetworkDoc = serde_json::from_str(s)?;
        doc.into_network()
    }
}

/// On-disk form of a network:
/// `{layers: [...], weights: [[w..., b...], ...], act_states: [...], seed}`.
/// Each `weights` entry holds one dense layer's row-major weight matrix
/// followed by its bias vector.
#[derive(Debug, Serialize, Deserialize)]
struct NetworkDoc {
    layers: Vec<LayerSpec>,
    weights: Vec<Vec<f64>>,
    act_states: Vec<ActivationState>,
    seed: u64,
}

impl From<&Network> for NetworkDoc {
    fn from(net: &Network) -> Self {
        let mut weights = Vec::new();
        let mut act_states = Vec::new();
        for l in &net.layers {
            match l {
                Layer::Dense(d) => weights.push([d.w.as_slice(), d.b.as_slice()].concat()),
                Layer::Activation(a) => act_states.push(a.state.clone()),
            }
        }
        NetworkDoc {
            layers: net.layer_specs(),
            weights,
            act_states,
            seed: net.seed,
        }
    }
}

impl NetworkDoc {
    fn into_network(self) -> Result<Network> {
        let mut weights = self.weights.into_iter();
        let mut states = self.act_states.into_iter();
        let mut layers = Vec::new();
        for spec in self.layers {
            match spec {
                LayerSpec::Dense { in_dim, out_dim } => {
                    let mut w = weights
                        .next()
                        .ok_or_else(|| Error::Shape("missing dense weights".into()))?;
                    if w.len() != in_dim * out_dim + out_dim {
                        return Err(Error::Shape(format!(
                            "dense {in_dim}->{out_dim} has {} stored values",
                            w.len()
                        )));
                    }
                    let b = w.split_off(in_dim * out_dim);
                    layers.push(Layer::Dense(Dense {
                        in_dim,
                        out_dim,
                        w,
                        b,
                    }));
                }
                LayerSpec::Activation { spec, channels } => {
                    let state = states
                        .next()
                        .ok_or_else(|| Error::Shape("missing activation state".into()))?;
                    spec.validate()?;
                    state.check(&spec, channels)?;
                    layers.push(Layer::Activation(ActivationLayer { spec, state }));
                }
            }
        }
        Ok(Network {
            layers,
            seed: self.seed,
        })
    }
}
