//! Pointwise evaluation of every activation: value, derivative with respect
//! to the input(s), and derivatives with respect to the channel's parameters.
//!
//! At a kink the derivative of the branch on the right (`x >= threshold`)
//! is returned, except for SReLU which follows its own `x <= t^l` split.

use super::grid::{gaussian_hat, gaussian_hat_dx, mexican_hat, mexican_hat_dx};
use super::{ActivationKind, ActivationSpec, FixedGrid, HatFamily};

/// An activation spec with its grids resolved, ready for repeated evaluation.
pub(crate) struct Kernel<'a> {
    spec: &'a ActivationSpec,
    mexican: FixedGrid,
    gaussian: FixedGrid,
}

/// Value and input derivatives at one output channel. `dx_next` is the
/// derivative with respect to the neighbouring channel and is only non-zero
/// for the pairwise activation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Point {
    pub y: f64,
    pub dx: f64,
    pub dx_next: f64,
}

#[inline]
fn relu(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        0.0
    }
}

#[inline]
fn step(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Adds `v` to `g[i]` when gradients are requested.
#[inline]
fn acc(g: &mut Option<&mut [f64]>, i: usize, v: f64) {
    if let Some(g) = g.as_deref_mut() {
        g[i] += v;
    }
}

impl<'a> Kernel<'a> {
    pub fn new(spec: &'a ActivationSpec) -> Self {
        Kernel {
            spec,
            mexican: FixedGrid::for_family(HatFamily::Mexican, spec.max_input),
            gaussian: FixedGrid::for_family(HatFamily::Gaussian, spec.max_input),
        }
    }

    pub fn grid(&self, family: HatFamily) -> &FixedGrid {
        match family {
            HatFamily::Mexican => &self.mexican,
            HatFamily::Gaussian => &self.gaussian,
        }
    }

    /// Evaluates output channel `c` given the full channel vector `xs`.
    /// Parameter derivatives are *added* into `dtheta` (length
    /// `per_channel`), each multiplied by `scale`.
    pub fn eval(
        &self,
        theta: &[f64],
        xs: &[f64],
        c: usize,
        scale: f64,
        dtheta: Option<&mut [f64]>,
    ) -> Point {
        if self.spec.kind.is_pairwise() {
            let next = xs[(c + 1) % xs.len()];
            self.melu2d(theta, xs[c], next, scale, dtheta)
        } else {
            let (y, dx) = self.scalar(theta, xs[c], scale, dtheta);
            Point { y, dx, dx_next: 0.0 }
        }
    }

    /// Elementwise kinds: returns `(y, dy/dx)`.
    pub fn scalar(
        &self,
        theta: &[f64],
        x: f64,
        scale: f64,
        mut g: Option<&mut [f64]>,
    ) -> (f64, f64) {
        use ActivationKind::*;
        let spec = self.spec;
        let k1 = spec.k.saturating_sub(1);
        let n = spec.hinges;
        match spec.kind {
            Relu => (relu(x), step(x)),
            LeakyRelu => {
                let a = spec.constants.leaky_slope;
                if x >= 0.0 {
                    (x, 1.0)
                } else {
                    (a * x, a)
                }
            }
            Elu => {
                let a = spec.constants.elu_alpha;
                if x >= 0.0 {
                    (x, 1.0)
                } else {
                    (a * x.exp_m1(), a * x.exp())
                }
            }
            Prelu => {
                let a = theta[0];
                if x >= 0.0 {
                    (x, 1.0)
                } else {
                    acc(&mut g, 0, scale * x);
                    (a * x, a)
                }
            }
            Srelu => {
                let (al, ar, tl, tr) = (theta[0], theta[1], theta[2], theta[3]);
                if x <= tl {
                    acc(&mut g, 0, scale * (x - tl));
                    acc(&mut g, 2, scale * (1.0 - al));
                    (tl + al * (x - tl), al)
                } else if x < tr {
                    (x, 1.0)
                } else {
                    acc(&mut g, 1, scale * (x - tr));
                    acc(&mut g, 3, scale * (1.0 - ar));
                    (tr + ar * (x - tr), ar)
                }
            }
            Aplu => {
                let (a, b) = theta.split_at(n);
                let (y, dx) = hinges(a, b, x, scale, &mut g, 0, n);
                (relu(x) + y, step(x) + dx)
            }
            Splash => {
                let a_pos = &theta[..n];
                let a_neg = &theta[n..2 * n];
                let b = &theta[2 * n..3 * n];
                let (yp, dp) = hinges(a_pos, b, x, scale, &mut g, 0, 2 * n);
                let (yn, dn) = hinges(a_neg, b, -x, scale, &mut g, n, 2 * n);
                (
                    relu(x) + yp + relu(-x) + yn,
                    step(x) + dp - step(-x) - dn,
                )
            }
            Melu | SmallGalu | Galu => {
                let family = spec.kind.hat_family().expect("grid kind");
                self.hat_sum(family, None, theta, x, scale, &mut g, 0)
            }
            FlexibleMelu => {
                let (coeffs, peaks) = theta.split_at(1 + k1);
                self.hat_sum(HatFamily::Mexican, Some(peaks), coeffs, x, scale, &mut g, 0)
            }
            SymmetricMelu | SymmetricGalu => {
                let family = spec.kind.hat_family().expect("grid kind");
                let (y1, d1) = self.hat_sum(family, None, theta, x, scale, &mut g, 0);
                let (y2, d2) = self.hat_sum(family, None, theta, -x, scale, &mut g, 0);
                (y1 + y2, d1 - d2)
            }
            MeluGalu => {
                let mix = theta[0];
                let melu = &theta[1..2 + k1];
                let galu = &theta[2 + k1..3 + 2 * k1];
                let (ym, dm) =
                    self.hat_sum(HatFamily::Mexican, None, melu, x, scale * (1.0 - mix), &mut g, 1);
                let (yg, dg) =
                    self.hat_sum(HatFamily::Gaussian, None, galu, x, scale * mix, &mut g, 2 + k1);
                acc(&mut g, 0, scale * (yg - ym));
                ((1.0 - mix) * ym + mix * yg, (1.0 - mix) * dm + mix * dg)
            }
            Pdelu => {
                let a = theta[0];
                if x >= 0.0 {
                    (x, 1.0)
                } else {
                    let t = spec.constants.pdelu_t;
                    let p = 1.0 / (1.0 - t);
                    let u = (1.0 + (1.0 - t) * x).max(0.0);
                    let up = u.powf(p);
                    acc(&mut g, 0, scale * (up - 1.0));
                    let du = if u > 0.0 { u.powf(p - 1.0) } else { 0.0 };
                    (a * (up - 1.0), a * du)
                }
            }
            Swish | SwishLearnable => {
                let beta = if spec.kind == Swish {
                    spec.constants.swish_beta
                } else {
                    theta[0]
                };
                let s = sigmoid(beta * x);
                let ds = s * (1.0 - s);
                if spec.kind == SwishLearnable {
                    acc(&mut g, 0, scale * x * x * ds);
                }
                (x * s, s + beta * x * ds)
            }
            Mish => {
                let alpha = theta[0];
                let z = alpha * x;
                let t = softplus(z).tanh();
                let dt_dz = (1.0 - t * t) * sigmoid(z);
                acc(&mut g, 0, scale * x * x * dt_dz);
                (x * t, t + x * alpha * dt_dz)
            }
            Srs => {
                let (alpha, beta) = (theta[0], theta[1]);
                let e = (-x / beta).exp();
                let d = x / alpha + e;
                let d2 = d * d;
                acc(&mut g, 0, scale * x * x / (alpha * alpha * d2));
                acc(&mut g, 1, -scale * x * x * e / (beta * beta * d2));
                (x / d, e * (1.0 + x / beta) / d2)
            }
            SoftLearnable | SoftLearnable2 => {
                let alpha = theta[0];
                let beta = if spec.kind == SoftLearnable {
                    spec.constants.soft_beta
                } else {
                    theta[1]
                };
                if x >= 0.0 {
                    (x, 1.0)
                } else {
                    let z = beta * x;
                    let sp = softplus(z) - std::f64::consts::LN_2;
                    let s = sigmoid(z);
                    acc(&mut g, 0, scale * sp);
                    if spec.kind == SoftLearnable2 {
                        acc(&mut g, 1, scale * alpha * x * s);
                    }
                    (alpha * sp, alpha * beta * s)
                }
            }
            TanElu => {
                let t = x.tanh();
                acc(&mut g, 0, scale * t);
                (relu(x) + theta[0] * t, step(x) + theta[0] * (1.0 - t * t))
            }
            Melu2d => unreachable!("pairwise kind evaluated through Kernel::eval"),
        }
    }

    /// `PReLU^{c0}(x) + sum_j c_j hat_j(x)`. `coeffs = [c0, c_1..c_{k-1}]`
    /// starts at `g[offset]`; learnable peaks, when given, follow directly
    /// after the coefficients in `g`.
    #[allow(clippy::too_many_arguments)]
    fn hat_sum(
        &self,
        family: HatFamily,
        peaks: Option<&[f64]>,
        coeffs: &[f64],
        x: f64,
        scale: f64,
        g: &mut Option<&mut [f64]>,
        offset: usize,
    ) -> (f64, f64) {
        let grid = self.grid(family);
        let c0 = coeffs[0];
        let (mut y, mut dx) = if x >= 0.0 { (x, 1.0) } else { (c0 * x, c0) };
        if x < 0.0 {
            acc(g, offset, scale * x);
        }
        let hats = coeffs.len() - 1;
        for j in 0..hats {
            let a = peaks.map_or(grid.a[j], |p| p[j]);
            let l = grid.lambda[j];
            let (h, dh) = match family {
                HatFamily::Mexican => (mexican_hat(x, a, l), mexican_hat_dx(x, a, l)),
                HatFamily::Gaussian => (gaussian_hat(x, a, l), gaussian_hat_dx(x, a, l)),
            };
            let c = coeffs[1 + j];
            y += c * h;
            dx += c * dh;
            acc(g, offset + 1 + j, scale * h);
            if peaks.is_some() {
                // d hat / d a = -d hat / d x
                acc(g, offset + 1 + hats + j, -scale * c * dh);
            }
        }
        (y, dx)
    }

    /// Two-input MeLU on `(x0, x1)`; coefficients form a `(k-1) x (k-1)`
    /// matrix, hat `(u, v)` is centered at `(a_u, a_v)` with radius
    /// `lambda_{max(u, v)}` under the Euclidean norm.
    fn melu2d(&self, theta: &[f64], x0: f64, x1: f64, scale: f64, mut g: Option<&mut [f64]>) -> Point {
        let grid = &self.mexican;
        let hats = self.spec.k - 1;
        let c0 = theta[0];
        let mut y = 0.0;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for (x, d) in [(x0, &mut d0), (x1, &mut d1)] {
            if x >= 0.0 {
                y += x;
                *d += 1.0;
            } else {
                y += c0 * x;
                *d += c0;
                acc(&mut g, 0, scale * x);
            }
        }
        for u in 0..hats {
            for v in 0..hats {
                let l = grid.lambda[u.max(v)];
                let e0 = x0 - grid.a[u];
                let e1 = x1 - grid.a[v];
                let r = e0.hypot(e1);
                if r >= l {
                    continue;
                }
                let idx = 1 + u * hats + v;
                let c = theta[idx];
                let h = l - r;
                y += c * h;
                acc(&mut g, idx, scale * h);
                if r > 0.0 {
                    d0 -= c * e0 / r;
                    d1 -= c * e1 / r;
                }
            }
        }
        Point { y, dx: d0, dx_next: d1 }
    }
}

/// `sum_c a_c max(0, b_c - x)` with derivatives; `a` sits at `g[a_off..]`
/// and `b` at `g[b_off..]`.
#[allow(clippy::too_many_arguments)]
fn hinges(
    a: &[f64],
    b: &[f64],
    x: f64,
    scale: f64,
    g: &mut Option<&mut [f64]>,
    a_off: usize,
    b_off: usize,
) -> (f64, f64) {
    let mut y = 0.0;
    let mut dx = 0.0;
    for (i, (&ai, &bi)) in a.iter().zip(b).enumerate() {
        if x < bi {
            y += ai * (bi - x);
            dx -= ai;
            acc(g, a_off + i, scale * (bi - x));
            acc(g, b_off + i, scale * ai);
        }
    }
    (y, dx)
}
