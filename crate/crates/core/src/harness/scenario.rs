//! JSON scenario schema.
//!
//! Every section is optional; omitted keys take the defaults below and
//! unknown keys are rejected with the path of the offending field.
//!
//! ```json
//! {
//!   "name": "eigenmode",
//!   "domain": { "l1": 1, "l2": 1, "depth": 1, "kind": "periodic" },
//!   "grid": { "n1": 16, "n2": 4, "nz": 33 },
//!   "physics": { "kappa": 1, "beta_plus": "inf", "beta_minus": 0, "theta_bar": 0, "constant": 0 },
//!   "regime": "rigid",
//!   "velocity": { "family": "cellular", "amplitude": 1, "decay_rate": 2 },
//!   "surface": { "amplitude": 0.01, "mode": [1, 0] },
//!   "initial": { "preset": "vertical_eigenmode" },
//!   "run": { "t_end": 1, "dt": 0.001, "stride": 10, "fit_fraction": 0.5 },
//!   "experiment": { "kind": "trajectory" },
//!   "seed": 0
//! }
//! ```

use serde::{Deserialize, Serialize};

use crate::equilibrium::{Beta, BoundaryCoefficients};
use crate::geometry::{HorizontalKind, SlabDomain, SlabGrid};
use crate::moving_sim::FlowParams;
use crate::rigid_sim::VelocityFamily;
use crate::{Result, SlabError};

fn one() -> f64 {
    1.0
}

fn insulated() -> Beta {
    Beta::Finite(0.0)
}

fn first_mode() -> u32 {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    #[serde(default = "one")]
    pub l1: f64,
    #[serde(default = "one")]
    pub l2: f64,
    #[serde(default = "one")]
    pub depth: f64,
    #[serde(default = "periodic")]
    pub kind: HorizontalKind,
}

fn periodic() -> HorizontalKind {
    HorizontalKind::Periodic
}

impl Default for DomainSpec {
    fn default() -> Self {
        Self { l1: 1.0, l2: 1.0, depth: 1.0, kind: HorizontalKind::Periodic }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_n1")]
    pub n1: usize,
    #[serde(default = "default_n2")]
    pub n2: usize,
    #[serde(default = "default_nz")]
    pub nz: usize,
}

fn default_n1() -> usize {
    16
}
fn default_n2() -> usize {
    4
}
fn default_nz() -> usize {
    33
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { n1: default_n1(), n2: default_n2(), nz: default_nz() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSpec {
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "insulated")]
    pub beta_plus: Beta,
    #[serde(default = "insulated")]
    pub beta_minus: Beta,
    #[serde(default)]
    pub theta_bar: f64,
    /// Free additive constant of the insulated equilibrium.
    #[serde(default)]
    pub constant: f64,
}

impl Default for PhysicsSpec {
    fn default() -> Self {
        Self { kappa: 1.0, beta_plus: insulated(), beta_minus: insulated(), theta_bar: 0.0, constant: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    #[default]
    Rigid,
    Moving,
}

/// Velocity families. `manufactured` is the only family carrying a
/// kinematic surface law and so the only one accepted by moving runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocitySpec {
    #[default]
    Zero,
    Shear {
        amplitude: f64,
        #[serde(default)]
        decay_rate: f64,
    },
    Cellular {
        amplitude: f64,
        #[serde(default)]
        decay_rate: f64,
        #[serde(default = "first_mode")]
        mode: u32,
    },
    Manufactured {
        amplitude: f64,
        #[serde(default)]
        decay_rate: f64,
        #[serde(default = "first_mode")]
        mode: u32,
        #[serde(default)]
        c: f64,
    },
}

impl VelocitySpec {
    pub fn rigid_family(&self) -> Option<VelocityFamily> {
        match *self {
            VelocitySpec::Zero => Some(VelocityFamily::Zero),
            VelocitySpec::Shear { amplitude, decay_rate } => Some(VelocityFamily::Shear { amplitude, decay_rate }),
            VelocitySpec::Cellular { amplitude, decay_rate, mode } => {
                Some(VelocityFamily::Cellular { amplitude, decay_rate, mode })
            }
            VelocitySpec::Manufactured { .. } => None,
        }
    }

    pub fn flow_params(&self) -> Option<FlowParams> {
        match *self {
            VelocitySpec::Zero => Some(FlowParams { amplitude: 0.0, ..FlowParams::default() }),
            VelocitySpec::Manufactured { amplitude, decay_rate, mode, c } => Some(FlowParams { amplitude, decay_rate, mode, c }),
            _ => None,
        }
    }
}

/// Initial surface `ε sin(2π(m1 x1/L1 + m2 x2/L2))`; moving runs only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "default_surface_mode")]
    pub mode: (i64, i64),
}

fn default_surface_mode() -> (i64, i64) {
    (1, 0)
}

impl Default for SurfaceSpec {
    fn default() -> Self {
        Self { amplitude: 0.0, mode: default_surface_mode() }
    }
}

/// Initial deviation `w₀ = θ₀ − θ_eq`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `θ₀ = θ_eq`.
    #[default]
    Equilibrium,
    /// Principal vertical eigenfunction, optionally times `cos(2π(m1 x1/L1 + m2 x2/L2))`.
    VerticalEigenmode {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        horizontal_mode: (i64, i64),
    },
    /// Random combination of low horizontal and vertical modes.
    RandomBandLimited {
        /// Falls back to the scenario seed.
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default = "default_band")]
        horizontal_modes: u32,
        #[serde(default = "default_band")]
        vertical_modes: u32,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Gaussian bump in `x1/L1` centred in the box.
    Spreading {
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

fn default_band() -> u32 {
    2
}
fn default_sigma() -> f64 {
    0.1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default = "one")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Steps between recorded rows.
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Latter fraction of the samples used for rate fits.
    #[serde(default = "default_fit_fraction")]
    pub fit_fraction: f64,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_stride() -> usize {
    10
}
fn default_fit_fraction() -> f64 {
    0.5
}

impl Default for RunSpec {
    fn default() -> Self {
        Self { t_end: 1.0, dt: default_dt(), stride: default_stride(), fit_fraction: default_fit_fraction() }
    }
}

impl RunSpec {
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    #[default]
    Trajectory,
    /// Same run as `trajectory`, reported through the envelope gates only.
    EnvelopeCheck,
    /// Principal eigenvalue over the product of the two coefficient lists.
    EigenSweep {
        beta_plus: Vec<Beta>,
        beta_minus: Vec<Beta>,
        /// When positive, also minimizes the dense Rayleigh quotient at this `nz`.
        #[serde(default)]
        dense_nz: usize,
    },
    CoercivityAudit {
        #[serde(default = "default_trials")]
        trials: usize,
    },
    /// Ledger residuals on nested grids, halving `dt` with each level.
    RefinementStudy {
        #[serde(default = "default_levels")]
        levels: usize,
    },
}

fn default_trials() -> usize {
    16
}
fn default_levels() -> usize {
    2
}

impl Experiment {
    pub fn label(&self) -> &'static str {
        match self {
            Experiment::Trajectory => "trajectory",
            Experiment::EnvelopeCheck => "envelope_check",
            Experiment::EigenSweep { .. } => "eigen_sweep",
            Experiment::CoercivityAudit { .. } => "coercivity_audit",
            Experiment::RefinementStudy { .. } => "refinement_study",
        }
    }

    pub fn is_sweep(&self) -> bool {
        matches!(self, Experiment::EigenSweep { .. } | Experiment::CoercivityAudit { .. } | Experiment::RefinementStudy { .. })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub domain: DomainSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub physics: PhysicsSpec,
    #[serde(default)]
    pub regime: RegimeKind,
    #[serde(default)]
    pub velocity: VelocitySpec,
    #[serde(default)]
    pub surface: SurfaceSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
}

fn context(field: &str) -> impl Fn(SlabError) -> SlabError + '_ {
    move |e| SlabError::Config(format!("{field}: {e}"))
}

impl Scenario {
    pub fn slab_domain(&self) -> Result<SlabDomain> {
        let d = self.domain;
        SlabDomain::new(d.l1, d.l2, d.depth, d.kind).map_err(context("domain"))
    }

    pub fn slab_grid(&self) -> Result<SlabGrid> {
        let g = self.grid;
        SlabGrid::new(self.slab_domain()?, g.n1, g.n2, g.nz).map_err(context("grid"))
    }

    pub fn boundary(&self) -> Result<BoundaryCoefficients> {
        let p = self.physics;
        BoundaryCoefficients::new(p.beta_plus, p.beta_minus, p.kappa, self.domain.depth, p.theta_bar).map_err(context("physics"))
    }

    pub fn initial_seed(&self) -> u64 {
        match self.initial {
            InitialSpec::RandomBandLimited { seed: Some(s), .. } => s,
            _ => self.seed,
        }
    }

    /// Single-line JSON echo embedded in every output header.
    pub fn resolved_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.slab_grid()?;
        self.boundary()?;
        let r = self.run;
        if !(r.dt.is_finite() && r.dt > 0.0) {
            return Err(SlabError::Config(format!("run.dt: must be positive, got {}", r.dt)));
        }
        if !(r.t_end.is_finite() && r.t_end > 0.0) {
            return Err(SlabError::Config(format!("run.t_end: must be positive, got {}", r.t_end)));
        }
        if r.stride == 0 {
            return Err(SlabError::Config("run.stride: must be at least 1".into()));
        }
        if !(r.fit_fraction > 0.0 && r.fit_fraction <= 1.0) {
            return Err(SlabError::Config(format!("run.fit_fraction: must lie in (0, 1], got {}", r.fit_fraction)));
        }
        if let Some(f) = self.velocity.rigid_family() {
            f.validate().map_err(context("velocity"))?;
        }
        if let Some(p) = self.velocity.flow_params() {
            crate::moving_sim::manufacture_flow(p, &self.slab_grid()?).map_err(context("velocity"))?;
        }
        match self.regime {
            RegimeKind::Moving => {
                if self.velocity.flow_params().is_none() {
                    return Err(SlabError::Config(
                        "velocity: moving runs need the 'manufactured' or 'zero' family, which carry a kinematic surface law".into(),
                    ));
                }
                if !self.surface.amplitude.is_finite() {
                    return Err(SlabError::Config("surface.amplitude: must be finite".into()));
                }
            }
            RegimeKind::Rigid => {
                if self.surface.amplitude != 0.0 {
                    return Err(SlabError::Config("surface.amplitude: rigid runs have a flat surface".into()));
                }
            }
        }
        match &self.initial {
            InitialSpec::Spreading { sigma, .. } if !(*sigma > 0.0) => {
                return Err(SlabError::Config(format!("initial.sigma: must be positive, got {sigma}")));
            }
            InitialSpec::RandomBandLimited { vertical_modes: 0, .. } => {
                return Err(SlabError::Config("initial.vertical_modes: must be at least 1".into()));
            }
            _ => {}
        }
        match &self.experiment {
            Experiment::EigenSweep { beta_plus, beta_minus, .. } if beta_plus.is_empty() || beta_minus.is_empty() => {
                Err(SlabError::Config("experiment: eigen sweep needs nonempty coefficient lists".into()))
            }
            Experiment::CoercivityAudit { trials: 0 } => Err(SlabError::Config("experiment.trials: must be at least 1".into())),
            Experiment::RefinementStudy { levels } if *levels < 2 => {
                Err(SlabError::Config("experiment.levels: a refinement study needs at least 2 levels".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Parses and validates a scenario; schema errors carry the JSON path.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        SlabError::Config(format!("{path}: {}", e.into_inner()))
    })?;
    s.validate()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{equilibrium_gradient, Regime};

    #[test]
    fn minimal_config_fills_defaults() {
        let s = parse_scenario("{}").unwrap();
        assert_eq!(s.physics.kappa, 1.0);
        assert_eq!((s.domain.l1, s.domain.l2, s.domain.depth), (1.0, 1.0, 1.0));
        assert_eq!(s.velocity, VelocitySpec::Zero);
        assert_eq!(s.regime, RegimeKind::Rigid);
    }

    #[test]
    fn infinite_top_with_insulated_bottom_is_mixed() {
        let s = parse_scenario(r#"{"physics": {"beta_plus": "inf", "beta_minus": 0, "theta_bar": 2}}"#).unwrap();
        let bc = s.boundary().unwrap();
        assert_eq!(bc.regime(), Regime::TopDirichlet);
        assert_eq!(equilibrium_gradient(&bc), 0.0);
    }

    #[test]
    fn negative_coefficient_is_rejected_with_path() {
        let e = parse_scenario(r#"{"physics": {"beta_plus": -1}}"#).unwrap_err().to_string();
        assert!(e.contains("physics.beta_plus"), "{e}");
    }

    #[test]
    fn unknown_key_is_rejected_with_path() {
        let e = parse_scenario(r#"{"run": {"dt": 0.1, "steps": 3}}"#).unwrap_err().to_string();
        assert!(e.contains("run") && e.contains("steps"), "{e}");
        let e = parse_scenario(r#"{"velocity": {"family": "shear", "amplitude": 1, "speed": 2}}"#).unwrap_err().to_string();
        assert!(e.contains("speed"), "{e}");
    }

    #[test]
    fn nonpositive_dt_is_rejected() {
        assert!(parse_scenario(r#"{"run": {"dt": 0}}"#).is_err());
        assert!(parse_scenario(r#"{"run": {"dt": -1e-3}}"#).is_err());
    }

    #[test]
    fn moving_runs_need_a_kinematic_family() {
        let e = parse_scenario(r#"{"regime": "moving", "velocity": {"family": "shear", "amplitude": 1}}"#);
        assert!(matches!(e, Err(SlabError::Config(_))));
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = r#"{"name": "x", "physics": {"beta_plus": "inf", "beta_minus": 0.3},
            "regime": "moving", "velocity": {"family": "manufactured", "amplitude": 0.1, "c": 0.5},
            "surface": {"amplitude": 0.01, "mode": [1, 1]},
            "initial": {"preset": "random_band_limited", "seed": 9},
            "experiment": {"kind": "eigen_sweep", "beta_plus": [0, "inf"], "beta_minus": [1.5]}}"#;
        let s = parse_scenario(text).unwrap();
        assert_eq!(parse_scenario(&s.resolved_json()).unwrap(), s);
    }
}
