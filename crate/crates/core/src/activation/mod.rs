//! Activation functions with hand-derived gradients.
//!
//! Every activation is described by an immutable [`ActivationSpec`] and a
//! per-channel [`ActivationState`] holding its learnable parameters. The
//! operations in this module are pure functions of `(spec, state, x)`.

pub mod approx;
mod grid;
mod kernel;
mod ops;
mod state;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use grid::{
    build_grid, gaussian_hat, gaussian_hat_dx, mexican_hat, mexican_hat_dx, FixedGrid, HatFamily,
    GRID_LEN,
};
pub use ops::{
    act_forward, act_grad_input, act_grad_params, kink_distance, kink_points, param_lr_scale,
    regularization, InputGrad, Regularization, REGULARIZATION_WEIGHT,
};
pub use state::{
    init_state, ActivationState, Constraint, Init, ParamGrads, ParamLayout, Segment,
    POSITIVE_FLOOR,
};

pub(crate) use kernel::Kernel;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActivationKind {
    Relu,
    LeakyRelu,
    Elu,
    Prelu,
    Srelu,
    Aplu,
    Melu,
    SmallGalu,
    Galu,
    Pdelu,
    Swish,
    SwishLearnable,
    Mish,
    Srs,
    SoftLearnable,
    SoftLearnable2,
    Splash,
    Melu2d,
    TanElu,
    MeluGalu,
    SymmetricMelu,
    SymmetricGalu,
    FlexibleMelu,
}

impl ActivationKind {
    pub const ALL: [ActivationKind; 23] = [
        ActivationKind::Relu,
        ActivationKind::LeakyRelu,
        ActivationKind::Elu,
        ActivationKind::Prelu,
        ActivationKind::Srelu,
        ActivationKind::Aplu,
        ActivationKind::Melu,
        ActivationKind::SmallGalu,
        ActivationKind::Galu,
        ActivationKind::Pdelu,
        ActivationKind::Swish,
        ActivationKind::SwishLearnable,
        ActivationKind::Mish,
        ActivationKind::Srs,
        ActivationKind::SoftLearnable,
        ActivationKind::SoftLearnable2,
        ActivationKind::Splash,
        ActivationKind::Melu2d,
        ActivationKind::TanElu,
        ActivationKind::MeluGalu,
        ActivationKind::SymmetricMelu,
        ActivationKind::SymmetricGalu,
        ActivationKind::FlexibleMelu,
    ];

    /// Hat family of the fixed grid, for kinds built on exactly one grid.
    pub fn hat_family(self) -> Option<HatFamily> {
        use ActivationKind::*;
        match self {
            Melu | Melu2d | SymmetricMelu | FlexibleMelu => Some(HatFamily::Mexican),
            SmallGalu | Galu | SymmetricGalu => Some(HatFamily::Gaussian),
            _ => None,
        }
    }

    /// Kinds whose shape depends on `k` (number of parameters per channel).
    pub fn uses_k(self) -> bool {
        self.hat_family().is_some() || self == ActivationKind::MeluGalu
    }

    /// Kinds whose shape depends on `maxInput`.
    pub fn uses_max_input(self) -> bool {
        use ActivationKind::*;
        self.uses_k() || matches!(self, Aplu | Splash | Srelu)
    }

    /// Kinds with a hinge count `n`.
    pub fn uses_hinges(self) -> bool {
        matches!(self, ActivationKind::Aplu | ActivationKind::Splash)
    }

    /// Pairwise (non elementwise) activation.
    pub fn is_pairwise(self) -> bool {
        self == ActivationKind::Melu2d
    }

    fn label(self) -> &'static str {
        use ActivationKind::*;
        match self {
            Relu => "ReLU",
            LeakyRelu => "LeakyReLU",
            Elu => "ELU",
            Prelu => "PReLU",
            Srelu => "SReLU",
            Aplu => "APLU",
            Melu => "MeLU",
            SmallGalu => "SmallGaLU",
            Galu => "GaLU",
            Pdelu => "PDELU",
            Swish => "Swish",
            SwishLearnable => "SwishLearnable",
            Mish => "Mish",
            Srs => "SRS",
            SoftLearnable => "SoftLearnable",
            SoftLearnable2 => "SoftLearnable2",
            Splash => "Splash",
            Melu2d => "MeLU2D",
            TanElu => "TanELU",
            MeluGalu => "MeLUGaLU",
            SymmetricMelu => "SymmetricMeLU",
            SymmetricGalu => "SymmetricGaLU",
            FlexibleMelu => "FlexibleMeLU",
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Constants that are fixed (not learned) for a given activation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedConstants {
    pub leaky_slope: f64,
    pub elu_alpha: f64,
    pub swish_beta: f64,
    pub pdelu_t: f64,
    pub soft_beta: f64,
}

impl Default for FixedConstants {
    fn default() -> Self {
        FixedConstants {
            leaky_slope: 0.01,
            elu_alpha: 1.0,
            swish_beta: 1.0,
            pdelu_t: 0.9,
            soft_beta: 1.0,
        }
    }
}

/// Initial SReLU parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SreluInit {
    /// `a^l = 0.5, a^r = 0.2, t^l = -2, t^r = 1.5`.
    #[default]
    Fixed,
    /// `a^l = 0, t^l = 0, t^r = maxInput`, with `a^r = 1` (plain ReLU below `t^r`).
    MaxInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationSpec {
    pub kind: ActivationKind,
    /// Parameters per channel for the hat-based kinds (one PReLU slope plus
    /// `k - 1` hat coefficients).
    pub k: usize,
    pub max_input: f64,
    /// Hinge count `n` for APLU and Splash.
    pub hinges: usize,
    pub constants: FixedConstants,
    pub srelu_init: SreluInit,
}

pub const DEFAULT_HINGES: usize = 3;

impl ActivationSpec {
    pub fn new(kind: ActivationKind) -> Self {
        let k = match kind {
            ActivationKind::Melu => 8,
            ActivationKind::SmallGalu => 2,
            _ => 4,
        };
        ActivationSpec {
            kind,
            k,
            max_input: 1.0,
            hinges: DEFAULT_HINGES,
            constants: FixedConstants::default(),
            srelu_init: SreluInit::default(),
        }
    }

    /// Looks up a registry name such as `"melu_k8"` or `"srelu"`.
    pub fn from_name(name: &str) -> Result<Self> {
        let entry = registry_entry(name)?;
        let mut spec = ActivationSpec::new(entry.kind);
        spec.k = entry.k;
        Ok(spec)
    }

    pub fn with_max_input(mut self, max_input: f64) -> Self {
        self.max_input = max_input;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_hinges(mut self, hinges: usize) -> Self {
        self.hinges = hinges;
        self
    }

    /// Stable textual identifier used in configs and on the command line.
    pub fn registry_name(&self) -> String {
        match self.kind {
            ActivationKind::Melu => format!("melu_k{}", self.k),
            kind => REGISTRY
                .iter()
                .find(|e| e.kind == kind)
                .map(|e| e.name.to_string())
                .unwrap_or_else(|| kind.to_string()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.max_input.is_finite() && self.max_input > 0.0) {
            return Err(Error::Config(format!(
                "maxInput must be positive and finite, got {}",
                self.max_input
            )));
        }
        let k_ok = match self.kind {
            ActivationKind::Melu => matches!(self.k, 4 | 8),
            ActivationKind::SmallGalu => self.k == 2,
            ActivationKind::Galu => self.k == 4,
            kind if kind.uses_k() => (2..=GRID_LEN + 1).contains(&self.k),
            _ => true,
        };
        if !k_ok {
            return Err(Error::Config(format!("k = {} is not valid for {}", self.k, self.kind)));
        }
        if self.kind.uses_hinges() && self.hinges == 0 {
            return Err(Error::Config(format!("{} needs at least one hinge", self.kind)));
        }
        let t = self.constants.pdelu_t;
        if self.kind == ActivationKind::Pdelu && !(t.is_finite() && t < 1.0) {
            return Err(Error::Config(format!("PDELU t must be < 1, got {t}")));
        }
        Ok(())
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::for_spec(self)
    }

    pub fn is_learnable(&self) -> bool {
        self.layout().per_channel() > 0
    }
}

/// One row of the activation registry.
#[derive(Debug, Clone, Copy)]
pub struct RegistryEntry {
    pub name: &'static str,
    pub kind: ActivationKind,
    pub k: usize,
    pub summary: &'static str,
}

macro_rules! entry {
    ($name:literal, $kind:ident, $k:literal, $summary:literal) => {
        RegistryEntry {
            name: $name,
            kind: ActivationKind::$kind,
            k: $k,
            summary: $summary,
        }
    };
}

/// Registered activations, in alphabetical order. MeLU appears twice
/// (`k = 4` and `k = 8`); every other kind once.
pub const REGISTRY: [RegistryEntry; 24] = [
    entry!("aplu", Aplu, 4, "ReLU plus n learnable hinges"),
    entry!("elu", Elu, 4, "exponential linear unit, a = 1"),
    entry!("flexible_melu", FlexibleMelu, 4, "MeLU with learnable hat centers"),
    entry!("galu", Galu, 4, "PReLU plus 3 gaussian-type hats"),
    entry!("leaky_relu", LeakyRelu, 4, "leaky ReLU, a = 0.01"),
    entry!("melu2d", Melu2d, 4, "pairwise MeLU over neighbouring channels"),
    entry!("melu_galu", MeluGalu, 4, "learnable mix of MeLU and GaLU"),
    entry!("melu_k4", Melu, 4, "PReLU plus 3 mexican hats"),
    entry!("melu_k8", Melu, 8, "PReLU plus 7 mexican hats"),
    entry!("mish", Mish, 4, "x tanh(softplus(alpha x)), alpha learnable"),
    entry!("pdelu", Pdelu, 4, "deformable exponential unit, t = 0.9"),
    entry!("prelu", Prelu, 4, "ReLU with learnable negative slope"),
    entry!("relu", Relu, 4, "rectified linear unit"),
    entry!("sgalu", SmallGalu, 2, "PReLU plus 1 gaussian-type hat"),
    entry!("soft_learnable", SoftLearnable, 4, "soft exponential, alpha learnable"),
    entry!("soft_learnable2", SoftLearnable2, 4, "soft exponential, alpha and beta learnable"),
    entry!("splash", Splash, 4, "symmetric pair of APLUs"),
    entry!("srelu", Srelu, 4, "S-shaped ReLU, learnable thresholds and slopes"),
    entry!("srs", Srs, 4, "soft root sign"),
    entry!("swish", Swish, 4, "x sigmoid(x)"),
    entry!("swish_learnable", SwishLearnable, 4, "x sigmoid(beta x), beta learnable"),
    entry!("symmetric_galu", SymmetricGalu, 4, "GaLU(x) + GaLU(-x), shared coefficients"),
    entry!("symmetric_melu", SymmetricMelu, 4, "MeLU(x) + MeLU(-x), shared coefficients"),
    entry!("tanelu", TanElu, 4, "ReLU(x) + a tanh(x)"),
];

pub fn registry_entry(name: &str) -> Result<&'static RegistryEntry> {
    REGISTRY
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownActivation(name.to_string()))
}

impl FromStr for ActivationSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ActivationSpec::from_name(s)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;

    #[test]
    fn registry_covers_every_kind() {
        let kinds: BTreeSet<_> = REGISTRY.iter().map(|e| e.kind).collect();
        assert_eq!(kinds.len(), ActivationKind::ALL.len());
        assert_eq!(REGISTRY.len(), 24);
    }

    #[test]
    fn registry_is_sorted_and_round_trips() {
        for pair in REGISTRY.windows(2) {
            assert!(pair[0].name < pair[1].name);
        }
        for e in REGISTRY.iter() {
            let spec = ActivationSpec::from_name(e.name).unwrap();
            spec.validate().unwrap();
            assert_eq!(spec.registry_name(), e.name);
        }
    }

    #[test]
    fn k_invariants() {
        assert!(ActivationSpec::new(ActivationKind::Melu).with_k(5).validate().is_err());
        assert!(ActivationSpec::new(ActivationKind::Galu).with_k(8).validate().is_err());
        assert!(ActivationSpec::new(ActivationKind::SmallGalu).validate().is_ok());
        assert!(ActivationSpec::new(ActivationKind::Relu).with_max_input(0.0).validate().is_err());
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(
            ActivationSpec::from_name("gelu"),
            Err(Error::UnknownActivation(_))
        ));
    }
}
