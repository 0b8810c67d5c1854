//! Additive attacks on unattacked observations.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::gaussian::Observation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackKind {
    /// Constant offset `am`.
    A,
    /// Gaussian offset with mean `am` and standard deviation `sigma_a`.
    B,
    /// `am` plus a `Uniform(0, um)` offset.
    C,
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackKind::A => "A",
            AttackKind::B => "B",
            AttackKind::C => "C",
        })
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(AttackKind::A),
            "B" | "b" => Ok(AttackKind::B),
            "C" | "c" => Ok(AttackKind::C),
            other => Err(Error::InvalidAttack(format!(
                "unknown attack type {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Offset {
    Constant,
    Normal(Normal<f64>),
    Uniform(Option<Uniform<f64>>),
}

/// A validated attack: kind, parameters and target sensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSpec {
    kind: AttackKind,
    am: f64,
    sigma_a: Option<f64>,
    um: Option<f64>,
    targets: Coalition,
    offset: Offset,
}

impl AttackSpec {
    /// `sigma_a` must be given exactly when `kind` is B, `um` exactly when
    /// `kind` is C.
    pub fn new(
        kind: AttackKind,
        am: f64,
        sigma_a: Option<f64>,
        um: Option<f64>,
        targets: Coalition,
    ) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidAttack(msg.to_owned()));
        if !am.is_finite() {
            return bad("am must be finite");
        }
        if targets.is_empty() {
            return bad("targets must be nonempty");
        }
        match (kind, sigma_a, um) {
            (AttackKind::B, None, _) => return bad("sigma_a is required for a type-B attack"),
            (AttackKind::C, _, None) => return bad("um is required for a type-C attack"),
            (AttackKind::A | AttackKind::C, Some(_), _) => {
                return bad("sigma_a only applies to type-B attacks")
            }
            (AttackKind::A | AttackKind::B, _, Some(_)) => {
                return bad("um only applies to type-C attacks")
            }
            _ => {}
        }
        let offset = match kind {
            AttackKind::A => Offset::Constant,
            AttackKind::B => {
                let s = sigma_a.expect("checked above");
                if !(s.is_finite() && s >= 0.0) {
                    return bad("sigma_a must be a non-negative finite number");
                }
                Offset::Normal(Normal::new(am, s).expect("finite parameters"))
            }
            AttackKind::C => {
                let w = um.expect("checked above");
                if !(w.is_finite() && w >= 0.0) {
                    return bad("um must be a non-negative finite number");
                }
                Offset::Uniform((w > 0.0).then(|| Uniform::new(0.0, w).expect("positive width")))
            }
        };
        Ok(Self {
            kind,
            am,
            sigma_a,
            um,
            targets,
            offset,
        })
    }

    pub fn constant(am: f64, targets: Coalition) -> Result<Self> {
        Self::new(AttackKind::A, am, None, None, targets)
    }

    pub fn gaussian(am: f64, sigma_a: f64, targets: Coalition) -> Result<Self> {
        Self::new(AttackKind::B, am, Some(sigma_a), None, targets)
    }

    pub fn uniform(am: f64, um: f64, targets: Coalition) -> Result<Self> {
        Self::new(AttackKind::C, am, None, Some(um), targets)
    }

    pub fn kind(&self) -> AttackKind {
        self.kind
    }

    pub fn am(&self) -> f64 {
        self.am
    }

    pub fn sigma_a(&self) -> Option<f64> {
        self.sigma_a
    }

    pub fn um(&self) -> Option<f64> {
        self.um
    }

    pub fn targets(&self) -> Coalition {
        self.targets
    }

    /// Draws the offset added to one target sensor.
    fn draw_offset<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.offset {
            Offset::Constant => self.am,
            Offset::Normal(d) => d.sample(rng),
            Offset::Uniform(Some(d)) => d.sample(rng) + self.am,
            Offset::Uniform(None) => self.am,
        }
    }

    /// Returns `x` with an independently drawn offset added at every target
    /// sensor. Other sensors are copied unchanged.
    pub fn apply<R: Rng + ?Sized>(&self, x: &Observation, rng: &mut R) -> Result<Observation> {
        if x.len() != self.targets.universe() {
            return Err(Error::DimensionMismatch {
                expected: self.targets.universe(),
                actual: x.len(),
            });
        }
        let mut out = x.clone();
        let values = out.values_mut();
        for j in self.targets {
            values[j] += self.draw_offset(rng);
        }
        Observation::new(out.into_inner())
    }
}

/// Free-function form of [`AttackSpec::apply`].
pub fn apply_attack<R: Rng + ?Sized>(
    spec: &AttackSpec,
    x: &Observation,
    rng: &mut R,
) -> Result<Observation> {
    spec.apply(x, rng)
}
