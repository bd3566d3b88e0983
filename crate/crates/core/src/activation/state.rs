use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ActivationKind, ActivationSpec, FixedGrid, HatFamily, SreluInit};
use crate::error::{Error, Result};

/// Lower bound kept by parameters that must stay strictly positive.
pub const POSITIVE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    Free,
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Const(f64),
    /// Uniform on `(0, maxInput]`.
    UniformUpTo(f64),
    /// Centers of the fixed grid, entry by entry.
    GridCenters(HatFamily),
}

/// A named run of parameters inside one channel's parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub name: &'static str,
    pub offset: usize,
    pub len: usize,
    pub constraint: Constraint,
    pub init: Init,
}

/// Shape of the per-channel parameter vector of an activation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamLayout {
    segments: Vec<Segment>,
    per_channel: usize,
}

impl ParamLayout {
    fn push(&mut self, name: &'static str, len: usize, constraint: Constraint, init: Init) {
        self.segments.push(Segment {
            name,
            offset: self.per_channel,
            len,
            constraint,
            init,
        });
        self.per_channel += len;
    }

    pub fn for_spec(spec: &ActivationSpec) -> Self {
        use ActivationKind::*;
        use Constraint::*;

        let mut l = ParamLayout::default();
        let hats = spec.k.saturating_sub(1);
        let n = spec.hinges;
        let m = spec.max_input;
        match spec.kind {
            Relu | LeakyRelu | Elu | Swish => {}
            Prelu => l.push("a", 1, Free, Init::Const(0.0)),
            Srelu => {
                let (al, ar, tl, tr) = match spec.srelu_init {
                    SreluInit::Fixed => (0.5, 0.2, -2.0, 1.5),
                    SreluInit::MaxInput => (0.0, 1.0, 0.0, m),
                };
                l.push("a_l", 1, Free, Init::Const(al));
                l.push("a_r", 1, Free, Init::Const(ar));
                l.push("t_l", 1, Free, Init::Const(tl));
                l.push("t_r", 1, Free, Init::Const(tr));
            }
            Aplu => {
                l.push("a", n, Free, Init::Const(0.0));
                l.push("b", n, Free, Init::UniformUpTo(m));
            }
            Splash => {
                l.push("a_pos", n, Free, Init::Const(0.0));
                l.push("a_neg", n, Free, Init::Const(0.0));
                l.push("b", n, Free, Init::UniformUpTo(m));
            }
            Melu | SmallGalu | Galu | SymmetricMelu | SymmetricGalu => {
                l.push("c0", 1, Free, Init::Const(0.0));
                l.push("c", hats, Free, Init::Const(0.0));
            }
            FlexibleMelu => {
                l.push("c0", 1, Free, Init::Const(0.0));
                l.push("c", hats, Free, Init::Const(0.0));
                l.push("peaks", hats, Free, Init::GridCenters(HatFamily::Mexican));
            }
            Melu2d => {
                l.push("c0", 1, Free, Init::Const(0.0));
                l.push("c", hats * hats, Free, Init::Const(0.0));
            }
            MeluGalu => {
                l.push("mix", 1, Free, Init::Const(0.5));
                l.push("melu_c0", 1, Free, Init::Const(0.0));
                l.push("melu_c", hats, Free, Init::Const(0.0));
                l.push("galu_c0", 1, Free, Init::Const(0.0));
                l.push("galu_c", hats, Free, Init::Const(0.0));
            }
            Pdelu => l.push("a", 1, Free, Init::Const(1.0)),
            SwishLearnable => l.push("beta", 1, Free, Init::Const(1.0)),
            Mish => l.push("alpha", 1, Free, Init::Const(1.0)),
            Srs => {
                l.push("alpha", 1, Positive, Init::Const(5.0));
                l.push("beta", 1, Positive, Init::Const(3.0));
            }
            SoftLearnable => l.push("alpha", 1, Positive, Init::Const(1.0)),
            SoftLearnable2 => {
                l.push("alpha", 1, Positive, Init::Const(1.0));
                l.push("beta", 1, Positive, Init::Const(1.0));
            }
            TanElu => l.push("a", 1, Free, Init::Const(0.0)),
        }
        l
    }

    pub fn per_channel(&self) -> usize {
        self.per_channel
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, name: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.name == name)
    }

    /// Name of the segment holding per-channel index `j`, and the index inside it.
    pub fn locate(&self, j: usize) -> Option<(&'static str, usize)> {
        self.segments
            .iter()
            .find(|s| (s.offset..s.offset + s.len).contains(&j))
            .map(|s| (s.name, j - s.offset))
    }
}

/// Learnable parameters of one activation layer, stored channel-major:
/// channel `c` owns `values[c * per_channel .. (c + 1) * per_channel]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationState {
    pub channels: usize,
    pub per_channel: usize,
    pub values: Vec<f64>,
}

impl ActivationState {
    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c * self.per_channel..(c + 1) * self.per_channel]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let p = self.per_channel;
        &mut self.values[c * p..(c + 1) * p]
    }

    /// Values of segment `name` for channel `c`.
    pub fn named(&self, layout: &ParamLayout, name: &str, c: usize) -> Option<&[f64]> {
        let seg = layout.segment(name)?;
        let ch = self.channel(c);
        Some(&ch[seg.offset..seg.offset + seg.len])
    }

    pub fn named_mut(&mut self, layout: &ParamLayout, name: &str, c: usize) -> Option<&mut [f64]> {
        let seg = layout.segment(name)?;
        let ch = self.channel_mut(c);
        Some(&mut ch[seg.offset..seg.offset + seg.len])
    }

    pub fn check(&self, spec: &ActivationSpec, channels: usize) -> Result<()> {
        let per_channel = spec.layout().per_channel();
        if self.channels != channels
            || self.per_channel != per_channel
            || self.values.len() != channels * per_channel
        {
            return Err(Error::Shape(format!(
                "{} state is {}x{} ({} values), expected {}x{}",
                spec.kind,
                self.channels,
                self.per_channel,
                self.values.len(),
                channels,
                per_channel
            )));
        }
        if spec.kind.is_pairwise() && channels < 2 {
            return Err(Error::Shape(format!(
                "{} needs at least 2 channels, got {channels}",
                spec.kind
            )));
        }
        Ok(())
    }

    /// Raises constrained parameters back to [`POSITIVE_FLOOR`].
    pub fn clamp(&mut self, layout: &ParamLayout) {
        for c in 0..self.channels {
            let ch = self.channel_mut(c);
            for seg in layout.segments() {
                if seg.constraint == Constraint::Positive {
                    for v in &mut ch[seg.offset..seg.offset + seg.len] {
                        *v = v.max(POSITIVE_FLOOR);
                    }
                }
            }
        }
    }
}

/// Per-channel derivatives `dy_c / d theta_c`, laid out like [`ActivationState`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub channels: usize,
    pub per_channel: usize,
    pub values: Vec<f64>,
}

impl ParamGrads {
    pub fn zeros(channels: usize, per_channel: usize) -> Self {
        ParamGrads {
            channels,
            per_channel,
            values: vec![0.0; channels * per_channel],
        }
    }

    pub fn empty() -> Self {
        ParamGrads::zeros(0, 0)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.values[c * self.per_channel..(c + 1) * self.per_channel]
    }

    pub fn named(&self, layout: &ParamLayout, name: &str, c: usize) -> Option<&[f64]> {
        let seg = layout.segment(name)?;
        let ch = self.channel(c);
        Some(&ch[seg.offset..seg.offset + seg.len])
    }
}

pub fn init_state<R: Rng + ?Sized>(
    spec: &ActivationSpec,
    channels: usize,
    rng: &mut R,
) -> ActivationState {
    let layout = spec.layout();
    let p = layout.per_channel();
    let mut values = Vec::with_capacity(channels * p);
    for _ in 0..channels {
        for seg in layout.segments() {
            match seg.init {
                Init::Const(v) => values.extend(std::iter::repeat(v).take(seg.len)),
                Init::UniformUpTo(max) => {
                    values.extend((0..seg.len).map(|_| max - rng.gen_range(0.0..max)))
                }
                Init::GridCenters(family) => {
                    let grid = FixedGrid::for_family(family, spec.max_input);
                    values.extend_from_slice(&grid.a[..seg.len]);
                }
            }
        }
    }
    ActivationState {
        channels,
        per_channel: p,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn melu_starts_at_zero() {
        let spec = ActivationSpec::from_name("melu_k8").unwrap();
        let s = init_state(&spec, 4, &mut seed::rng(1));
        assert_eq!(s.values.len(), 4 * 8);
        assert!(s.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn srelu_constants() {
        let spec = ActivationSpec::from_name("srelu").unwrap();
        let s = init_state(&spec, 2, &mut seed::rng(1));
        assert_eq!(s.values, vec![0.5, 0.2, -2.0, 1.5, 0.5, 0.2, -2.0, 1.5]);

        let mut alt = spec.clone();
        alt.srelu_init = SreluInit::MaxInput;
        alt.max_input = 255.0;
        let s = init_state(&alt, 1, &mut seed::rng(1));
        assert_eq!(s.values, vec![0.0, 1.0, 0.0, 255.0]);
    }

    #[test]
    fn aplu_hinges_are_reproducible() {
        let spec = ActivationSpec::from_name("aplu").unwrap().with_max_input(255.0);
        let layout = spec.layout();
        let a = init_state(&spec, 3, &mut seed::rng(11));
        let b = init_state(&spec, 3, &mut seed::rng(11));
        assert_eq!(a, b);
        for c in 0..3 {
            assert_eq!(a.named(&layout, "a", c).unwrap(), &[0.0, 0.0, 0.0]);
            for &h in a.named(&layout, "b", c).unwrap() {
                assert!(h > 0.0 && h <= 255.0);
            }
        }
    }

    #[test]
    fn flexible_peaks_start_on_grid() {
        let spec = ActivationSpec::from_name("flexible_melu").unwrap();
        let layout = spec.layout();
        let s = init_state(&spec, 1, &mut seed::rng(0));
        assert_eq!(s.named(&layout, "peaks", 0).unwrap(), &[2.0, 1.0, 3.0]);
    }

    #[test]
    fn other_defaults() {
        let cases = [
            ("mish", "alpha", 1.0),
            ("swish_learnable", "beta", 1.0),
            ("srs", "alpha", 5.0),
            ("srs", "beta", 3.0),
            ("soft_learnable", "alpha", 1.0),
            ("soft_learnable2", "beta", 1.0),
            ("tanelu", "a", 0.0),
            ("melu_galu", "mix", 0.5),
            ("pdelu", "a", 1.0),
            ("prelu", "a", 0.0),
        ];
        for (name, param, want) in cases {
            let spec = ActivationSpec::from_name(name).unwrap();
            let s = init_state(&spec, 2, &mut seed::rng(0));
            assert_eq!(s.named(&spec.layout(), param, 1).unwrap(), &[want], "{name}.{param}");
        }
    }

    #[test]
    fn clamp_keeps_positive_params_positive() {
        let spec = ActivationSpec::from_name("srs").unwrap();
        let layout = spec.layout();
        let mut s = init_state(&spec, 1, &mut seed::rng(0));
        s.values = vec![-1.0, 0.0];
        s.clamp(&layout);
        assert_eq!(s.values, vec![POSITIVE_FLOOR, POSITIVE_FLOOR]);
    }

    #[test]
    fn melu2d_coefficient_matrix() {
        let spec = ActivationSpec::from_name("melu2d").unwrap();
        assert_eq!(spec.layout().segment("c").unwrap().len, 9);
    }
}
