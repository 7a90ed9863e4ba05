//! Boundary coefficients and the affine steady profiles they select.

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::{Result, SlabError};

/// Above this value a finite heat-transfer coefficient is treated as a
/// perfectly conducting wall by the eigenvalue solver.
pub const BETA_INFINITY_THRESHOLD: f64 = 1e12;

/// Heat-transfer coefficient in `[0, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Beta {
    Finite(f64),
    Infinite,
}

impl Beta {
    pub fn is_infinite(self) -> bool {
        matches!(self, Beta::Infinite)
    }

    pub fn is_zero(self) -> bool {
        matches!(self, Beta::Finite(v) if v == 0.0)
    }

    /// Finite value, `None` for `∞`.
    pub fn finite(self) -> Option<f64> {
        match self {
            Beta::Finite(v) => Some(v),
            Beta::Infinite => None,
        }
    }

    pub fn value(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn wall(self) -> WallKind {
        match self {
            Beta::Infinite => WallKind::Dirichlet,
            Beta::Finite(v) if v == 0.0 => WallKind::Neumann,
            Beta::Finite(_) => WallKind::Robin,
        }
    }
}

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Beta::Finite(v) => s.serialize_f64(*v),
            Beta::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Beta;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a nonnegative number or the string \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Beta, E> {
                if v.is_finite() && v >= 0.0 {
                    Ok(Beta::Finite(v))
                } else if v == f64::INFINITY {
                    Ok(Beta::Infinite)
                } else {
                    Err(E::custom(format!("heat-transfer coefficient must be >= 0, got {v}")))
                }
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Beta, E> {
                self.visit_f64(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Beta, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Beta, E> {
                match v {
                    "inf" | "infinity" | "Infinity" => Ok(Beta::Infinite),
                    _ => Err(E::custom(format!("expected \"inf\", got \"{v}\""))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Boundary behaviour of one wall.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallKind {
    Neumann,
    Robin,
    Dirichlet,
}

/// Which trace constraints the admissible space carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Both coefficients finite: no trace constraint.
    Free,
    /// `β₊ = ∞`: zero trace on the top.
    TopDirichlet,
    /// `β₋ = ∞`: zero trace on the bottom.
    BottomDirichlet,
    BothDirichlet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCoefficients {
    pub beta_plus: Beta,
    pub beta_minus: Beta,
    pub kappa: f64,
    pub depth: f64,
    pub theta_bar: f64,
}

impl BoundaryCoefficients {
    pub fn new(beta_plus: Beta, beta_minus: Beta, kappa: f64, depth: f64, theta_bar: f64) -> Result<Self> {
        for (name, b) in [("beta_plus", beta_plus), ("beta_minus", beta_minus)] {
            if let Beta::Finite(v) = b {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(SlabError::InvalidParameter(format!("{name} must be >= 0, got {v}")));
                }
            }
        }
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(SlabError::InvalidParameter(format!("kappa must be positive, got {kappa}")));
        }
        if !(depth.is_finite() && depth > 0.0) {
            return Err(SlabError::InvalidParameter(format!("depth must be positive, got {depth}")));
        }
        if !theta_bar.is_finite() {
            return Err(SlabError::InvalidParameter("theta_bar must be finite".into()));
        }
        Ok(Self { beta_plus, beta_minus, kappa, depth, theta_bar })
    }

    pub fn regime(&self) -> Regime {
        match (self.beta_plus.is_infinite(), self.beta_minus.is_infinite()) {
            (false, false) => Regime::Free,
            (true, false) => Regime::TopDirichlet,
            (false, true) => Regime::BottomDirichlet,
            (true, true) => Regime::BothDirichlet,
        }
    }

    pub fn is_neumann(&self) -> bool {
        self.beta_plus.is_zero() && self.beta_minus.is_zero()
    }
}

/// `θ_eq(x3) = a + b (x3 + d)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumProfile {
    pub a: f64,
    pub b: f64,
    pub regime: Regime,
    /// Free constant used when both walls are insulating.
    pub constant: f64,
    pub depth: f64,
}

impl EquilibriumProfile {
    pub fn at(&self, x3: f64) -> f64 {
        self.a + self.b * (x3 + self.depth)
    }

    pub fn top(&self) -> f64 {
        self.a + self.b * self.depth
    }

    pub fn bottom(&self) -> f64 {
        self.a
    }
}

/// Steady affine profile for any pair of coefficients; `constant` is only
/// used for two insulating walls.
pub fn equilibrium_profile(bc: &BoundaryCoefficients, constant: f64) -> EquilibriumProfile {
    let (k, d, t) = (bc.kappa, bc.depth, bc.theta_bar);
    let (a, b) = match (bc.beta_plus, bc.beta_minus) {
        (Beta::Infinite, Beta::Infinite) => (0.0, t / d),
        (Beta::Infinite, Beta::Finite(bm)) => (k * t / (k + bm * d), bm * t / (k + bm * d)),
        (Beta::Finite(bp), Beta::Infinite) => (0.0, bp * t / (k + bp * d)),
        (Beta::Finite(bp), Beta::Finite(bm)) => {
            if bp == 0.0 && bm == 0.0 {
                (constant, 0.0)
            } else {
                let den = k * (bp + bm) + bp * bm * d;
                (k * bp * t / den, bp * bm * t / den)
            }
        }
    };
    EquilibriumProfile { a, b, regime: bc.regime(), constant, depth: d }
}

/// `∂3 θ_eq`.
pub fn equilibrium_gradient(bc: &BoundaryCoefficients) -> f64 {
    equilibrium_profile(bc, 0.0).b
}

/// Residuals of the two wall conditions `κ b = β₊(θ̄ − θ(0))`, `κ b = β₋ θ(−d)`;
/// an infinite coefficient is read as the Dirichlet condition it represents.
pub fn robin_residuals(bc: &BoundaryCoefficients, p: &EquilibriumProfile) -> (f64, f64) {
    let top = match bc.beta_plus {
        Beta::Infinite => p.top() - bc.theta_bar,
        Beta::Finite(bp) => bc.kappa * p.b - bp * (bc.theta_bar - p.top()),
    };
    let bottom = match bc.beta_minus {
        Beta::Infinite => p.bottom(),
        Beta::Finite(bm) => bc.kappa * p.b - bm * p.bottom(),
    };
    (top, bottom)
}
