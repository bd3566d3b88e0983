//! Central finite-difference validation of the analytic activation gradients.
//!
//! Points are sampled away from every kink (see
//! [`kink_distance`](crate::activation::kink_distance)) and parameter states
//! are randomly perturbed away from their initial values so that zero
//! coefficients do not hide mistakes.

use std::fmt;

use rand::Rng;

use crate::activation::{
    act_forward, act_grad_input, act_grad_params, init_state, kink_distance, ActivationSpec,
    ActivationState, Constraint,
};
use crate::error::Result;
use crate::net::{build_mlp, softmax_xent, Layer, Matrix, Network};
use crate::seed;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub points: usize,
    pub channels: usize,
    pub step: f64,
    pub tolerance: f64,
    pub min_kink_distance: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            points: 100,
            channels: 3,
            step: 1e-6,
            tolerance: 1e-5,
            min_kink_distance: 1e-3,
            seed: 0,
        }
    }
}

/// Deliberate corruption of one analytic derivative, for exercising the
/// failure path. `target` is `"x"` or a parameter segment name.
#[derive(Debug, Clone, PartialEq)]
pub struct Fault {
    pub target: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    /// `"x"` or `"<segment>[<index>]"`.
    pub target: String,
    pub x: Vec<f64>,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationCheck {
    pub name: String,
    pub points: usize,
    pub max_err_input: f64,
    pub max_err_params: f64,
    pub mismatches: Vec<Mismatch>,
}

impl ActivationCheck {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

impl fmt::Display for ActivationCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "{status} {:<16} points={:<4} max_rel_err dx={:.2e} params={:.2e}",
            self.name, self.points, self.max_err_input, self.max_err_params
        )?;
        if let Some(m) = self.mismatches.first() {
            write!(
                f,
                "  first mismatch: d/d{} analytic={:.6e} numeric={:.6e} ({} total)",
                m.target,
                m.analytic,
                m.numeric,
                self.mismatches.len()
            )?;
        }
        Ok(())
    }
}

/// Relative error used throughout: `|a - n| / max(1, |a|)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

/// Half-width of the input interval sampled for `spec`.
pub fn sample_range(spec: &ActivationSpec) -> f64 {
    if spec.kind.uses_max_input() {
        5.0 * spec.max_input
    } else {
        5.0
    }
}

/// Moves every learnable parameter away from its initial value: free
/// parameters by `U(-0.5, 0.5)`, positive ones by a factor in `[0.7, 1.3]`.
pub fn perturb_state<R: Rng + ?Sized>(
    spec: &ActivationSpec,
    state: &mut ActivationState,
    rng: &mut R,
) {
    let layout = spec.layout();
    for c in 0..state.channels {
        let ch = state.channel_mut(c);
        for seg in layout.segments() {
            for v in &mut ch[seg.offset..seg.offset + seg.len] {
                match seg.constraint {
                    Constraint::Free => *v += rng.gen_range(-0.5..0.5),
                    Constraint::Positive => *v *= rng.gen_range(0.7..1.3),
                }
            }
        }
    }
}

/// A random state and a random input at least `min_kink_distance` away
/// from every kink.
pub fn sample_point<R: Rng + ?Sized>(
    spec: &ActivationSpec,
    channels: usize,
    min_kink_distance: f64,
    rng: &mut R,
) -> Result<(ActivationState, Vec<f64>)> {
    let range = sample_range(spec);
    loop {
        let mut state = init_state(spec, channels, rng);
        perturb_state(spec, &mut state, rng);
        let x: Vec<f64> = (0..channels).map(|_| rng.gen_range(-range..range)).collect();
        if kink_distance(spec, &state, &x)? > min_kink_distance {
            return Ok((state, x));
        }
    }
}

fn target_name(spec: &ActivationSpec, j: usize) -> String {
    match spec.layout().locate(j) {
        Some((name, i)) => format!("{name}[{i}]"),
        None => format!("theta[{j}]"),
    }
}

fn fault_hits(fault: Option<&Fault>, target: &str) -> bool {
    fault.is_some_and(|f| target == f.target || target.split('[').next() == Some(f.target.as_str()))
}

pub fn check_activation(spec: &ActivationSpec, cfg: &GradCheckConfig) -> Result<ActivationCheck> {
    check_activation_with(spec, cfg, None)
}

pub fn check_activation_with(
    spec: &ActivationSpec,
    cfg: &GradCheckConfig,
    fault: Option<&Fault>,
) -> Result<ActivationCheck> {
    spec.validate()?;
    let name = spec.registry_name();
    let mut rng = seed::rng(seed::subseed(cfg.seed, &[seed::name_hash(&name)]));
    let n = cfg.channels;
    let h = cfg.step;
    let mut report = ActivationCheck {
        name,
        points: cfg.points,
        max_err_input: 0.0,
        max_err_params: 0.0,
        mismatches: Vec::new(),
    };

    for _ in 0..cfg.points {
        let (mut state, x) = sample_point(spec, n, cfg.min_kink_distance, &mut rng)?;

        // dy/dx: full n x n Jacobian against the diagonal / neighbour form
        let ig = act_grad_input(spec, &state, &x)?;
        for c in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let yp = act_forward(spec, &state, &xp)?;
            let ym = act_forward(spec, &state, &xm)?;
            for o in 0..n {
                let numeric = (yp[o] - ym[o]) / (2.0 * h);
                let mut analytic = 0.0;
                if o == c {
                    analytic += ig.diag[o];
                }
                if let Some(next) = &ig.next {
                    if (o + 1) % n == c {
                        analytic += next[o];
                    }
                }
                if fault_hits(fault, "x") && o == c {
                    analytic += 0.1 * (1.0 + analytic.abs());
                }
                let e = rel_err(analytic, numeric);
                report.max_err_input = report.max_err_input.max(e);
                if !(e < cfg.tolerance) {
                    report.mismatches.push(Mismatch {
                        target: "x".into(),
                        x: x.clone(),
                        analytic,
                        numeric,
                        rel_err: e,
                    });
                }
            }
        }

        if state.per_channel == 0 {
            continue;
        }
        let pg = act_grad_params(spec, &state, &x)?;
        for c in 0..n {
            for j in 0..state.per_channel {
                let idx = c * state.per_channel + j;
                let orig = state.values[idx];
                state.values[idx] = orig + h;
                let yp = act_forward(spec, &state, &x)?;
                state.values[idx] = orig - h;
                let ym = act_forward(spec, &state, &x)?;
                state.values[idx] = orig;
                let target = target_name(spec, j);
                for o in 0..n {
                    let numeric = (yp[o] - ym[o]) / (2.0 * h);
                    let mut analytic = if o == c { pg.values[idx] } else { 0.0 };
                    if o == c && fault_hits(fault, &target) {
                        analytic += 0.1 * (1.0 + analytic.abs());
                    }
                    let e = rel_err(analytic, numeric);
                    report.max_err_params = report.max_err_params.max(e);
                    if !(e < cfg.tolerance) {
                        report.mismatches.push(Mismatch {
                            target: target.clone(),
                            x: x.clone(),
                            analytic,
                            numeric,
                            rel_err: e,
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

/// Settings for the whole-network check: a small MLP whose hidden layers
/// all use the activation under test.
#[derive(Debug, Clone)]
pub struct NetCheckConfig {
    pub dims: Vec<usize>,
    pub batches: usize,
    pub batch_size: usize,
    pub step: f64,
    pub tolerance: f64,
    pub min_kink_distance: f64,
    pub seed: u64,
}

impl Default for NetCheckConfig {
    fn default() -> Self {
        NetCheckConfig {
            dims: vec![2, 3, 3, 2],
            batches: 10,
            batch_size: 4,
            step: 1e-6,
            tolerance: 1e-4,
            min_kink_distance: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCheck {
    pub name: String,
    pub batches: usize,
    pub parameters: usize,
    pub max_err: f64,
    /// `(flat parameter index, analytic, numeric)` for every failure.
    pub mismatches: Vec<(usize, f64, f64)>,
}

impl NetworkCheck {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

impl fmt::Display for NetworkCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "{status} {:<16} batches={:<3} params={:<4} max_rel_err={:.2e}",
            self.name, self.batches, self.parameters, self.max_err
        )?;
        if let Some((i, a, n)) = self.mismatches.first() {
            write!(f, "  first mismatch: param {i} analytic={a:.6e} numeric={n:.6e}")?;
        }
        Ok(())
    }
}

fn min_pre_activation_kink_distance(net: &Network, batch: &Matrix) -> Result<f64> {
    let (_, cache) = net.forward(batch)?;
    let mut best = f64::INFINITY;
    for (i, layer) in net.layers.iter().enumerate() {
        if let (Layer::Activation(a), Some(input)) = (layer, cache.layer_input(i)) {
            for row in input.iter_rows() {
                best = best.min(kink_distance(&a.spec, &a.state, row)?);
            }
        }
    }
    Ok(best)
}

/// Compares backpropagated gradients of the total loss (cross-entropy plus
/// regularization) with central differences over every network parameter,
/// on `cfg.batches` random networks and batches. Batches with a
/// pre-activation near a kink are redrawn.
pub fn check_network(spec: &ActivationSpec, cfg: &NetCheckConfig) -> Result<NetworkCheck> {
    spec.validate()?;
    let name = spec.registry_name();
    let mut rng = seed::rng(seed::subseed(cfg.seed, &[1, seed::name_hash(&name)]));
    let hidden = cfg.dims.len().saturating_sub(2);
    let inputs = cfg.dims[0];
    let classes = *cfg.dims.last().unwrap_or(&1);
    let acts = vec![spec.clone(); hidden];
    let mut report = NetworkCheck {
        name,
        batches: cfg.batches,
        parameters: 0,
        max_err: 0.0,
        mismatches: Vec::new(),
    };
    let h = cfg.step;
    for _ in 0..cfg.batches {
        let (mut net, batch, labels) = loop {
            let mut net = build_mlp(&cfg.dims, &acts, rng.gen())?;
            for layer in &mut net.layers {
                if let Layer::Activation(a) = layer {
                    perturb_state(&a.spec, &mut a.state, &mut rng);
                }
            }
            let data: Vec<f64> = (0..cfg.batch_size * inputs)
                .map(|_| rng.gen_range(-2.0..2.0))
                .collect();
            let batch = Matrix::from_vec(cfg.batch_size, inputs, data)?;
            let labels: Vec<usize> = (0..cfg.batch_size).map(|_| rng.gen_range(0..classes)).collect();
            if min_pre_activation_kink_distance(&net, &batch)? > cfg.min_kink_distance {
                break (net, batch, labels);
            }
        };
        let (logits, cache) = net.forward(&batch)?;
        let (_, dlogits) = softmax_xent(&logits, &labels)?;
        let analytic = net.backward(&cache, &dlogits)?.flat();
        report.parameters = analytic.len();
        for (i, &a) in analytic.iter().enumerate() {
            let orig = net.flat_params()[i];
            *net.param_mut(i).expect("index within parameters") = orig + h;
            let lp = net.loss(&batch, &labels)?;
            *net.param_mut(i).expect("index within parameters") = orig - h;
            let lm = net.loss(&batch, &labels)?;
            *net.param_mut(i).expect("index within parameters") = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let e = rel_err(a, numeric);
            report.max_err = report.max_err.max(e);
            if !(e < cfg.tolerance) {
                report.mismatches.push((i, a, numeric));
            }
        }
    }
    Ok(report)
}
