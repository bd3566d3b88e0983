use super::kernel::Kernel;
use super::{ActivationKind, ActivationSpec, ActivationState, HatFamily, ParamGrads};
use crate::error::{Error, Result};

/// Weight of the L2 penalty on APLU/Splash slopes.
pub const REGULARIZATION_WEIGHT: f64 = 1e-3;

/// Input derivatives of one activation layer at one sample.
///
/// `diag[c] = dy_c / dx_c`. For the pairwise activation output `c` also
/// depends on input `c + 1` (wrapping), and `next[c] = dy_c / dx_{c+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputGrad {
    pub diag: Vec<f64>,
    pub next: Option<Vec<f64>>,
}

fn prepare(spec: &ActivationSpec, state: &ActivationState, x: &[f64]) -> Result<()> {
    spec.validate()?;
    state.check(spec, x.len())
}

pub fn act_forward(spec: &ActivationSpec, state: &ActivationState, x: &[f64]) -> Result<Vec<f64>> {
    prepare(spec, state, x)?;
    let kernel = Kernel::new(spec);
    Ok((0..x.len())
        .map(|c| kernel.eval(state.channel(c), x, c, 1.0, None).y)
        .collect())
}

pub fn act_grad_input(
    spec: &ActivationSpec,
    state: &ActivationState,
    x: &[f64],
) -> Result<InputGrad> {
    prepare(spec, state, x)?;
    let kernel = Kernel::new(spec);
    let points: Vec<_> = (0..x.len())
        .map(|c| kernel.eval(state.channel(c), x, c, 1.0, None))
        .collect();
    Ok(InputGrad {
        diag: points.iter().map(|p| p.dx).collect(),
        next: spec
            .kind
            .is_pairwise()
            .then(|| points.iter().map(|p| p.dx_next).collect()),
    })
}

/// `dy_c / d theta_c` for every channel `c`.
pub fn act_grad_params(
    spec: &ActivationSpec,
    state: &ActivationState,
    x: &[f64],
) -> Result<ParamGrads> {
    prepare(spec, state, x)?;
    if state.per_channel == 0 {
        return Err(Error::NoParameters(spec.registry_name()));
    }
    let kernel = Kernel::new(spec);
    let mut grads = ParamGrads::zeros(state.channels, state.per_channel);
    for (c, g) in grads.values.chunks_mut(state.per_channel).enumerate() {
        kernel.eval(state.channel(c), x, c, 1.0, Some(g));
    }
    Ok(grads)
}

fn push_hat_kinks(out: &mut Vec<f64>, family: HatFamily, a: f64, l: f64) {
    out.extend([a - l, a, a + l]);
    if family == HatFamily::Gaussian {
        out.extend([a + 2.0 * l, a + 3.0 * l]);
    }
}

/// Points where the forward map of `channel` is not differentiable in its
/// own input. For the pairwise activation this covers the one-dimensional
/// PReLU part only; see [`kink_distance`] for the full two-dimensional set.
pub fn kink_points(
    spec: &ActivationSpec,
    state: &ActivationState,
    channel: usize,
) -> Result<Vec<f64>> {
    use ActivationKind::*;
    if channel >= state.channels {
        return Err(Error::Shape(format!(
            "channel {channel} out of range for {} channels",
            state.channels
        )));
    }
    let layout = spec.layout();
    let p = |name: &str| state.named(&layout, name, channel).unwrap_or(&[]);
    let kernel = Kernel::new(spec);
    let hats = spec.k.saturating_sub(1);
    let mut out = Vec::new();
    match spec.kind {
        Swish | SwishLearnable | Mish | Srs => {}
        Relu | LeakyRelu | Prelu | TanElu | SoftLearnable | SoftLearnable2 | Melu2d => {
            out.push(0.0)
        }
        Elu => {
            if spec.constants.elu_alpha != 1.0 {
                out.push(0.0);
            }
        }
        Pdelu => out.extend([0.0, -1.0 / (1.0 - spec.constants.pdelu_t)]),
        Srelu => out.extend([p("t_l")[0], p("t_r")[0]]),
        Aplu => {
            out.push(0.0);
            out.extend_from_slice(p("b"));
        }
        Splash => {
            out.push(0.0);
            out.extend(p("b").iter().flat_map(|&b| [b, -b]));
        }
        Melu | SmallGalu | Galu | SymmetricMelu | SymmetricGalu | FlexibleMelu => {
            let family = spec.kind.hat_family().expect("grid kind");
            let grid = kernel.grid(family);
            out.push(0.0);
            for j in 0..hats {
                let a = if spec.kind == FlexibleMelu {
                    p("peaks")[j]
                } else {
                    grid.a[j]
                };
                push_hat_kinks(&mut out, family, a, grid.lambda[j]);
            }
            if matches!(spec.kind, SymmetricMelu | SymmetricGalu) {
                let mirrored: Vec<f64> = out.iter().map(|v| -v).collect();
                out.extend(mirrored);
            }
        }
        MeluGalu => {
            out.push(0.0);
            for family in [HatFamily::Mexican, HatFamily::Gaussian] {
                let grid = kernel.grid(family);
                for j in 0..hats {
                    push_hat_kinks(&mut out, family, grid.a[j], grid.lambda[j]);
                }
            }
        }
    }
    for v in &mut out {
        // fold -0.0 into 0.0 so dedup treats them alike
        *v += 0.0;
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

/// Smallest distance from the sample `x` to any non-differentiable point of
/// the layer. For the pairwise activation the circular hat boundaries and
/// centers in the `(x_c, x_{c+1})` plane are included.
pub fn kink_distance(spec: &ActivationSpec, state: &ActivationState, x: &[f64]) -> Result<f64> {
    state.check(spec, x.len())?;
    let mut best = f64::INFINITY;
    for c in 0..x.len() {
        for k in kink_points(spec, state, c)? {
            best = best.min((x[c] - k).abs());
        }
    }
    if spec.kind.is_pairwise() {
        let kernel = Kernel::new(spec);
        let grid = kernel.grid(HatFamily::Mexican);
        let hats = spec.k - 1;
        for c in 0..x.len() {
            let (x0, x1) = (x[c], x[(c + 1) % x.len()]);
            best = best.min(x1.abs());
            for u in 0..hats {
                for v in 0..hats {
                    let r = (x0 - grid.a[u]).hypot(x1 - grid.a[v]);
                    best = best.min(r).min((r - grid.lambda[u.max(v)]).abs());
                }
            }
        }
    }
    Ok(best)
}

/// Penalty term added to the loss, with its gradient laid out like the state.
#[derive(Debug, Clone, PartialEq)]
pub struct Regularization {
    pub value: f64,
    pub grad: ParamGrads,
}

/// `0.001 * sum |a_c|^2` over the hinge slopes of APLU and Splash (both
/// slope vectors for Splash). Hinge positions are not penalized. Every other
/// kind returns zero with an empty gradient.
pub fn regularization(spec: &ActivationSpec, state: &ActivationState) -> Regularization {
    let slopes: &[&str] = match spec.kind {
        ActivationKind::Aplu => &["a"],
        ActivationKind::Splash => &["a_pos", "a_neg"],
        _ => {
            return Regularization {
                value: 0.0,
                grad: ParamGrads::empty(),
            }
        }
    };
    let layout = spec.layout();
    let mut grad = ParamGrads::zeros(state.channels, state.per_channel);
    let mut value = 0.0;
    for c in 0..state.channels {
        let ch = state.channel(c);
        for name in slopes {
            let seg = layout.segment(name).expect("slope segment");
            for j in seg.offset..seg.offset + seg.len {
                value += ch[j] * ch[j];
                grad.values[c * state.per_channel + j] = 2.0 * REGULARIZATION_WEIGHT * ch[j];
            }
        }
    }
    Regularization {
        value: REGULARIZATION_WEIGHT * value,
        grad,
    }
}

/// Learning-rate multiplier for an activation's parameters: `1 / maxInput`
/// for APLU and Splash, `1` otherwise.
pub fn param_lr_scale(spec: &ActivationSpec) -> f64 {
    match spec.kind {
        ActivationKind::Aplu | ActivationKind::Splash => 1.0 / spec.max_input,
        _ => 1.0,
    }
}
