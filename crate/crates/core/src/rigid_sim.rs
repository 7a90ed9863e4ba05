//! Rigid-slab transport: prescribed velocities, the time stepper and the
//! per-step energy ledger.
//!
//! The state carries the deviation `w = θ − θ_eq` from the affine profile, so
//! walls with an infinite coefficient are homogeneous Dirichlet walls.

use std::f64::consts::PI;

use ndarray::{Array3, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::coercivity::dissipation_rigid;
use crate::equilibrium::{equilibrium_profile, BoundaryCoefficients, EquilibriumProfile};
use crate::geometry::{GeometryTensors, SlabGrid};
use crate::spectral::Spectral2d;
use crate::stepper::{cn_heun_stage, Explicit, StageCoefficients, WallCondition};
use crate::vertical::{d3_field, d3_sbp_field};
use crate::{Field3, Result, SlabError};

/// Grid state of one trajectory.
#[derive(Clone, Debug)]
pub struct ScalarState {
    pub grid: SlabGrid,
    pub bc: BoundaryCoefficients,
    pub equilibrium: EquilibriumProfile,
    /// `w = θ − θ_eq`.
    pub w: Field3,
    pub t: f64,
}

impl ScalarState {
    /// Wraps a deviation field. Traces on Dirichlet walls must vanish to
    /// rounding and are then set to exactly zero.
    pub fn from_deviation(grid: SlabGrid, bc: BoundaryCoefficients, constant: f64, mut w: Field3, t: f64) -> Result<Self> {
        grid.check_field(&w, "deviation")?;
        if (grid.depth() - bc.depth).abs() > 1e-14 * bc.depth {
            return Err(SlabError::GridMismatch(format!("grid depth {} but bc depth {}", grid.depth(), bc.depth)));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(SlabError::NonFinite("initial deviation".into()));
        }
        let scale = w.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (inf, k, name) in [(bc.beta_plus.is_infinite(), grid.top(), "top"), (bc.beta_minus.is_infinite(), 0, "bottom")] {
            if inf {
                let mut plane = w.index_axis_mut(Axis(2), k);
                if plane.iter().any(|v| v.abs() > 1e-10 * scale) {
                    return Err(SlabError::Regime(format!("deviation does not vanish on the Dirichlet {name} wall")));
                }
                plane.fill(0.0);
            }
        }
        let equilibrium = equilibrium_profile(&bc, constant);
        Ok(Self { grid, bc, equilibrium, w, t })
    }

    /// Builds the state from the full temperature `θ`.
    pub fn from_theta(grid: SlabGrid, bc: BoundaryCoefficients, constant: f64, theta: &Field3, t: f64) -> Result<Self> {
        let eq = equilibrium_profile(&bc, constant);
        let mut w = theta.clone();
        Zip::indexed(&mut w).for_each(|(_, _, k), v| *v -= eq.at(grid.x3(k)));
        Self::from_deviation(grid, bc, constant, w, t)
    }

    pub fn theta(&self) -> Field3 {
        let mut th = self.w.clone();
        Zip::indexed(&mut th).for_each(|(_, _, k), v| *v += self.equilibrium.at(self.grid.x3(k)));
        th
    }

    /// `‖w‖_{L²}`.
    pub fn norm(&self) -> f64 {
        self.grid.l2_norm(&self.w)
    }

    /// `½‖w‖²`.
    pub fn energy(&self) -> f64 {
        0.5 * self.grid.inner(&self.w, &self.w)
    }
}

/// Velocity on the grid with its diagnostics.
#[derive(Clone, Debug)]
pub struct VelocitySample {
    pub t: f64,
    pub u: [Field3; 3],
    /// Sup-norm of the discrete divergence (`div_𝒜` for pulled-back flows).
    pub divergence_residual: f64,
    /// Sup-norm of `u3` on the walls where it must vanish.
    pub wall_residual: f64,
    pub l2_norm: f64,
    pub max_speed: f64,
    /// All three components are identically zero.
    pub is_zero: bool,
}

impl VelocitySample {
    pub fn zero(grid: &SlabGrid, t: f64) -> Self {
        let z = grid.zeros();
        Self {
            t,
            u: [z.clone(), z.clone(), z],
            divergence_residual: 0.0,
            wall_residual: 0.0,
            l2_norm: 0.0,
            max_speed: 0.0,
            is_zero: true,
        }
    }

    /// Fills the metadata from the components with the flat divergence.
    pub fn from_components(grid: &SlabGrid, t: f64, u: [Field3; 3]) -> Self {
        let spec = grid.spectral();
        let div = spec.div_field(&u[0], &u[1]) + d3_field(&u[2], grid.h());
        let top = grid.top();
        let wall_residual = [0, top]
            .iter()
            .flat_map(|&k| u[2].index_axis(Axis(2), k).to_owned())
            .fold(0.0f64, |m, v| m.max(v.abs()));
        Self::with_diagnostics(grid, t, u, sup(&div), wall_residual)
    }

    pub fn with_diagnostics(grid: &SlabGrid, t: f64, u: [Field3; 3], divergence_residual: f64, wall_residual: f64) -> Self {
        let l2_norm = (grid.inner(&u[0], &u[0]) + grid.inner(&u[1], &u[1]) + grid.inner(&u[2], &u[2])).sqrt();
        let mut max_speed = 0.0f64;
        Zip::from(&u[0]).and(&u[1]).and(&u[2]).for_each(|a, b, c| {
            max_speed = max_speed.max((a * a + b * b + c * c).sqrt());
        });
        let is_zero = max_speed == 0.0;
        Self { t, u, divergence_residual, wall_residual, l2_norm, max_speed, is_zero }
    }
}

fn sup(f: &Field3) -> f64 {
    f.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Anything that can produce the velocity at a given time. Rigid flows ignore
/// the geometry; pulled-back flows evaluate themselves through it.
pub trait VelocityField: Send + Sync {
    fn sample(&self, t: f64, grid: &SlabGrid, geometry: &GeometryTensors) -> Result<VelocitySample>;

    /// `g(t) ≥ ‖u(t)‖_{L²}` used as forcing in the decay envelopes; defaults to the sampled norm.
    fn forcing_bound(&self, t: f64, grid: &SlabGrid, geometry: &GeometryTensors) -> Result<f64> {
        Ok(self.sample(t, grid, geometry)?.l2_norm)
    }
}

fn default_mode() -> u32 {
    1
}

/// Prescribed rigid velocity families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum VelocityFamily {
    Zero,
    /// `u = (amplitude · sin(π x3/d) e^{−at}, 0, 0)`.
    Shear { amplitude: f64, decay_rate: f64 },
    /// Stream-function cell `ψ = amplitude e^{−at} (L1/2πm) sin(2πm x1/L1) sin(π(x3+d)/d)`.
    Cellular {
        amplitude: f64,
        decay_rate: f64,
        #[serde(default = "default_mode")]
        mode: u32,
    },
}

impl Default for VelocityFamily {
    fn default() -> Self {
        VelocityFamily::Zero
    }
}

impl VelocityFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            VelocityFamily::Zero => Ok(()),
            VelocityFamily::Shear { amplitude, decay_rate } | VelocityFamily::Cellular { amplitude, decay_rate, .. } => {
                if !(amplitude.is_finite() && amplitude >= 0.0) {
                    return Err(SlabError::InvalidParameter(format!("velocity amplitude must be >= 0, got {amplitude}")));
                }
                if !(decay_rate.is_finite() && decay_rate >= 0.0) {
                    return Err(SlabError::InvalidParameter(format!("velocity decay rate must be >= 0, got {decay_rate}")));
                }
                if let VelocityFamily::Cellular { mode: 0, .. } = self {
                    return Err(SlabError::InvalidParameter("cellular mode must be >= 1".into()));
                }
                Ok(())
            }
        }
    }
}

/// Samples a rigid velocity family on the grid.
pub fn make_velocity_rigid(family: &VelocityFamily, t: f64, grid: &SlabGrid) -> Result<VelocitySample> {
    family.validate()?;
    let d = grid.depth();
    match *family {
        VelocityFamily::Zero => Ok(VelocitySample::zero(grid, t)),
        VelocityFamily::Shear { amplitude, decay_rate } => {
            let s = amplitude * (-decay_rate * t).exp();
            let u1 = grid.field_from_fn(|_, _, x3| s * (PI * x3 / d).sin());
            let z = grid.zeros();
            Ok(VelocitySample::from_components(grid, t, [u1, z.clone(), z]))
        }
        VelocityFamily::Cellular { amplitude, decay_rate, mode } => {
            let s = amplitude * (-decay_rate * t).exp();
            let l1 = grid.domain.l1;
            let q = 2.0 * PI * mode as f64 / l1;
            let u1 = grid.field_from_fn(|x1, _, x3| s / q * (PI / d) * (q * x1).sin() * (PI * (x3 + d) / d).cos());
            let mut u3 = grid.field_from_fn(|x1, _, x3| -s * (q * x1).cos() * (PI * (x3 + d) / d).sin());
            u3.index_axis_mut(Axis(2), 0).fill(0.0);
            u3.index_axis_mut(Axis(2), grid.top()).fill(0.0);
            Ok(VelocitySample::from_components(grid, t, [u1, grid.zeros(), u3]))
        }
    }
}

impl VelocityField for VelocityFamily {
    fn sample(&self, t: f64, grid: &SlabGrid, _geometry: &GeometryTensors) -> Result<VelocitySample> {
        make_velocity_rigid(self, t, grid)
    }
}

/// Rejects `dt` above the advective bound `0.5 h_min / ‖u‖_∞`.
pub fn check_cfl(grid: &SlabGrid, dt: f64, samples: &[&VelocitySample]) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SlabError::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let speed = samples.iter().fold(0.0f64, |m, s| m.max(s.max_speed));
    if speed > 0.0 {
        let limit = 0.5 * grid.h_min() / speed;
        if dt > limit {
            return Err(SlabError::Stability { dt, limit });
        }
    }
    Ok(())
}

/// `−∂1(u1 w) − ∂2(u2 w) − D3(u3 w) − b u3` with the summation-by-parts `D3`.
pub(crate) fn rigid_explicit(spec: &Spectral2d, grid: &SlabGrid, u: &VelocitySample, slope: f64, w: &Field3) -> Field3 {
    if u.is_zero {
        return grid.zeros();
    }
    let f1 = &u.u[0] * w;
    let f2 = &u.u[1] * w;
    let f3 = &u.u[2] * w;
    let mut out = spec.div_field(&f1, &f2);
    out.mapv_inplace(|v| -v);
    out -= &d3_sbp_field(&f3, grid.h());
    if slope != 0.0 {
        Zip::from(&mut out).and(&u.u[2]).for_each(|o, &u3| *o -= slope * u3);
    }
    out
}

/// Rigid stepper with cached transforms and wall conditions.
pub struct RigidSolver {
    grid: SlabGrid,
    spec: Spectral2d,
    top: WallCondition,
    bottom: WallCondition,
    flat: GeometryTensors,
}

impl RigidSolver {
    pub fn new(grid: &SlabGrid, bc: &BoundaryCoefficients) -> Result<Self> {
        Ok(Self {
            grid: *grid,
            spec: grid.spectral(),
            top: WallCondition::uniform(grid, bc.beta_plus.finite()),
            bottom: WallCondition::uniform(grid, bc.beta_minus.finite()),
            flat: GeometryTensors::flat(grid),
        })
    }

    pub fn grid(&self) -> &SlabGrid {
        &self.grid
    }

    /// One step: exact horizontal diffusion over `dt/2`, a Crank–Nicolson
    /// vertical stage with Heun-corrected advection, and another `dt/2` of
    /// horizontal diffusion.
    pub fn step(&self, state: &ScalarState, u: &dyn VelocityField, dt: f64) -> Result<ScalarState> {
        let grid = &self.grid;
        let u0 = u.sample(state.t, grid, &self.flat)?;
        let u1 = u.sample(state.t + dt, grid, &self.flat)?;
        check_cfl(grid, dt, &[&u0, &u1])?;
        let kappa = state.bc.kappa;
        let slope = state.equilibrium.b;

        // Insulated walls: step the centred field so the constant state is exact.
        let shift = if state.bc.is_neumann() { grid.integrate(&state.w) / (grid.domain.area() * grid.depth()) } else { 0.0 };
        let mut w = if shift == 0.0 { state.w.clone() } else { state.w.mapv(|v| v - shift) };
        self.spec.heat_field(&mut w, 0.5 * kappa * dt);
        let coeffs =
            StageCoefficients { kappa, j_start: None, j_end: None, g33: None, top: &self.top, bottom: &self.bottom };
        let mut w = cn_heun_stage(grid, &coeffs, &w, dt, |v, end| {
            let s = if end { &u1 } else { &u0 };
            Ok(Explicit { bulk: rigid_explicit(&self.spec, grid, s, slope, v), top_flux: None })
        })?;
        self.spec.heat_field(&mut w, 0.5 * kappa * dt);
        if shift != 0.0 {
            w.mapv_inplace(|v| v + shift);
        }
        Ok(ScalarState { w, t: state.t + dt, ..state.clone() })
    }
}

/// Single rigid step; see [`RigidSolver::step`].
pub fn step_rigid(state: &ScalarState, u: &dyn VelocityField, dt: f64) -> Result<ScalarState> {
    RigidSolver::new(&state.grid, &state.bc)?.step(state, u, dt)
}

/// One row of the rigid energy ledger.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    /// Time of the later state.
    pub t: f64,
    pub norm: f64,
    /// `½‖w‖²` of the later state.
    pub energy: f64,
    /// `𝒟_β` at the midpoint state.
    pub dissipation: f64,
    /// `−∂3θ_eq ∫ w u3` at the midpoint.
    pub rhs: f64,
    /// `(E⁺ − E)/dt + D − RHS`.
    pub residual: f64,
    /// `∫ w` of the later state.
    pub mean: f64,
}

pub(crate) fn check_consecutive(t0: f64, t1: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0) || ((t1 - t0) - dt).abs() > 1e-9 * dt.max(t1.abs() * 1e-6) {
        return Err(SlabError::Precondition(format!("states at t = {t0} and {t1} are not dt = {dt} apart")));
    }
    Ok(())
}

/// Discrete form of the energy identity between two consecutive states.
pub fn energy_ledger_rigid(before: &ScalarState, after: &ScalarState, u: &dyn VelocityField, dt: f64) -> Result<EnergyReport> {
    check_consecutive(before.t, after.t, dt)?;
    let grid = &before.grid;
    grid.check_field(&after.w, "later state")?;
    let mid = (&before.w + &after.w) * 0.5;
    let e0 = before.energy();
    let e1 = after.energy();
    let d = dissipation_rigid(&mid, &before.bc, grid)?.value;
    let us = u.sample(0.5 * (before.t + after.t), grid, &GeometryTensors::flat(grid))?;
    let slope = before.equilibrium.b;
    let rhs = if us.is_zero || slope == 0.0 { 0.0 } else { -slope * grid.inner(&mid, &us.u[2]) };
    let residual = (e1 - e0) / dt + d - rhs;
    Ok(EnergyReport { t: after.t, norm: after.norm(), energy: e1, dissipation: d, rhs, residual, mean: grid.integrate(&after.w) })
}

/// `∫_Ω (θ − θ_eq)`, conserved for insulated walls.
pub fn conserved_mean_rigid(state: &ScalarState) -> Result<f64> {
    if !state.bc.is_neumann() {
        return Err(SlabError::Regime("the mean is only conserved for two insulated walls".into()));
    }
    if state.grid.domain.is_proxy() {
        return Err(SlabError::Regime("mean conservation needs a periodic cross-section".into()));
    }
    Ok(state.grid.integrate(&state.w))
}

/// Advances `n` steps, returning every state including the initial one.
pub fn integrate_rigid(state: &ScalarState, u: &dyn VelocityField, dt: f64, n: usize) -> Result<Vec<ScalarState>> {
    let solver = RigidSolver::new(&state.grid, &state.bc)?;
    let mut out = Vec::with_capacity(n + 1);
    out.push(state.clone());
    for _ in 0..n {
        let next = solver.step(out.last().expect("nonempty"), u, dt)?;
        out.push(next);
    }
    Ok(out)
}

/// Zero field helper used by tests and presets.
pub fn zero_deviation(grid: &SlabGrid) -> Field3 {
    Array3::zeros(grid.shape())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::Beta;
    use crate::geometry::SlabDomain;

    fn grid(n: usize, nz: usize) -> SlabGrid {
        SlabGrid::new(SlabDomain::periodic(1.0, 1.0, 1.0).unwrap(), n, n, nz).unwrap()
    }

    #[test]
    fn negative_amplitude_is_rejected() {
        let g = grid(4, 9);
        let f = VelocityFamily::Shear { amplitude: -1.0, decay_rate: 0.0 };
        assert!(make_velocity_rigid(&f, 0.0, &g).is_err());
        let f = VelocityFamily::Cellular { amplitude: 1.0, decay_rate: -1.0, mode: 1 };
        assert!(make_velocity_rigid(&f, 0.0, &g).is_err());
    }

    #[test]
    fn shear_is_exactly_solenoidal() {
        let g = grid(8, 17);
        let s = make_velocity_rigid(&VelocityFamily::Shear { amplitude: 2.0, decay_rate: 1.0 }, 0.3, &g).unwrap();
        assert_eq!(s.divergence_residual, 0.0);
        assert_eq!(s.wall_residual, 0.0);
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let g = grid(4, 17);
        let bc = BoundaryCoefficients::new(Beta::Finite(1.5), Beta::Infinite, 1.0, 1.0, 2.0).unwrap();
        let s = ScalarState::from_deviation(g, bc, 0.0, g.zeros(), 0.0).unwrap();
        let n = step_rigid(&s, &VelocityFamily::Zero, 0.01).unwrap();
        assert!(n.w.iter().all(|v| v.abs() <= 1e-12));
    }

    #[test]
    fn cfl_violation_is_reported() {
        let g = grid(8, 9);
        let bc = BoundaryCoefficients::new(Beta::Infinite, Beta::Infinite, 1.0, 1.0, 0.0).unwrap();
        let s = ScalarState::from_deviation(g, bc, 0.0, g.zeros(), 0.0).unwrap();
        let u = VelocityFamily::Cellular { amplitude: 100.0, decay_rate: 0.0, mode: 1 };
        assert!(matches!(step_rigid(&s, &u, 0.1), Err(SlabError::Stability { .. })));
    }

    #[test]
    fn ledger_rejects_mismatched_times() {
        let g = grid(4, 9);
        let bc = BoundaryCoefficients::new(Beta::Infinite, Beta::Infinite, 1.0, 1.0, 0.0).unwrap();
        let s = ScalarState::from_deviation(g, bc, 0.0, g.zeros(), 0.0).unwrap();
        let n = step_rigid(&s, &VelocityFamily::Zero, 0.01).unwrap();
        assert!(energy_ledger_rigid(&s, &n, &VelocityFamily::Zero, 0.02).is_err());
    }

    #[test]
    fn mean_requires_insulated_walls() {
        let g = grid(4, 9);
        let bc = BoundaryCoefficients::new(Beta::Finite(1.0), Beta::Finite(0.0), 1.0, 1.0, 0.0).unwrap();
        let s = ScalarState::from_deviation(g, bc, 0.0, g.zeros(), 0.0).unwrap();
        assert!(matches!(conserved_mean_rigid(&s), Err(SlabError::Regime(_))));
    }
}
