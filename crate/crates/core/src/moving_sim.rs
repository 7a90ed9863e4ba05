//! Transport in the flattened moving slab with a manufactured flow.
//!
//! The solver advances the conserved density `q = J w` of
//!
//! `∂t(Jw) = ∂3((∂tη̄ d̃ − U3) w) − ∂1(U1 w) − ∂2(U2 w) + κ ∂k(J𝒜_{jk}𝒜_{jl} ∂l w) + b(∂tη̄ d̃ − U3 + κJ𝒜_{jl}∂l𝒜_{j3})`
//!
//! with `U1 = J u1`, `U2 = J u2`, `U3 = u3 − A u1 − B u2`. The horizontal
//! Laplacian of `q` is integrated exactly, the `G33 = K(1 + A² + B²)` part
//! implicitly, and the cross terms together with `−κ∂i(w ∂iJ)` explicitly.
//! The top Robin condition prescribes the total normal flux, so the explicit
//! cross flux is removed at the top node. With `η ≡ 0` every extra term
//! vanishes and the scheme is the rigid one operation for operation.

use ndarray::{Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::coercivity::dissipation_moving;
use crate::equilibrium::BoundaryCoefficients;
use crate::geometry::{compute_geometry, geometry_bounds, GeometryBounds, GeometryTensors, SlabGrid, SurfaceFunction};
use crate::rigid_sim::{check_cfl, check_consecutive, ScalarState, VelocityField, VelocitySample};
use crate::spectral::Spectral2d;
use crate::stepper::{cn_heun_stage, Explicit, StageCoefficients, WallCondition};
use crate::vertical::{d3_field, d3_sbp_field};
use crate::{Field2, Field3, Result, SlabError};

fn default_mode() -> u32 {
    1
}

/// Parameters of `ψ = amplitude e^{−at} sin(2πm y1/L1) ρ(y3)` with
/// `ρ(y3) = (y3 + d)²(c − y3)/d³`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowParams {
    pub amplitude: f64,
    pub decay_rate: f64,
    #[serde(default = "default_mode")]
    pub mode: u32,
    /// Root of the envelope above the bottom; `c = 0` keeps a flat top impermeable.
    #[serde(default)]
    pub c: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self { amplitude: 0.0, decay_rate: 0.0, mode: 1, c: 0.0 }
    }
}

/// Divergence-free flow `U = (∂_{y3}ψ, 0, −∂_{y1}ψ)` in the moving domain,
/// sampled through the flattening map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedFlow {
    pub params: FlowParams,
    depth: f64,
    l1: f64,
}

pub fn manufacture_flow(params: FlowParams, grid: &SlabGrid) -> Result<ManufacturedFlow> {
    let FlowParams { amplitude, decay_rate, mode, c } = params;
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(SlabError::InvalidParameter(format!("flow amplitude must be >= 0, got {amplitude}")));
    }
    if !(decay_rate.is_finite() && decay_rate >= 0.0) {
        return Err(SlabError::InvalidParameter(format!("flow decay rate must be >= 0, got {decay_rate}")));
    }
    if mode == 0 {
        return Err(SlabError::InvalidParameter("flow mode must be >= 1".into()));
    }
    if !c.is_finite() || c <= -grid.depth() {
        return Err(SlabError::InvalidParameter(format!(
            "envelope root c = {c} must lie above the bottom so that rho and rho' vanish only there"
        )));
    }
    Ok(ManufacturedFlow { params, depth: grid.depth(), l1: grid.domain.l1 })
}

impl ManufacturedFlow {
    pub fn is_zero(&self) -> bool {
        self.params.amplitude == 0.0
    }

    fn q(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.params.mode as f64 / self.l1
    }

    fn rho(&self, y: f64) -> f64 {
        let d = self.depth;
        (y + d).powi(2) * (self.params.c - y) / (d * d * d)
    }

    fn rho_prime(&self, y: f64) -> f64 {
        let d = self.depth;
        (2.0 * (y + d) * (self.params.c - y) - (y + d).powi(2)) / (d * d * d)
    }

    /// `(U1, U3)` at a physical point.
    pub fn velocity_at(&self, t: f64, y1: f64, y3: f64) -> (f64, f64) {
        let s = self.params.amplitude * (-self.params.decay_rate * t).exp();
        let q = self.q();
        (s * (q * y1).sin() * self.rho_prime(y3), -s * q * (q * y1).cos() * self.rho(y3))
    }

    /// `u·𝒩 = −U1 ∂1η + U3` evaluated on the surface `y3 = η`.
    pub fn kinematic_rate(&self, eta: &Field2, t: f64, grid: &SlabGrid, spec: &Spectral2d) -> Field2 {
        if self.is_zero() {
            return grid.surface_zeros();
        }
        let d1 = spec.deriv(eta.view(), 0);
        Array2::from_shape_fn(eta.dim(), |(i, j)| {
            let (u1, u3) = self.velocity_at(t, grid.x1(i), eta[[i, j]]);
            -u1 * d1[[i, j]] + u3
        })
    }
}

impl VelocityField for ManufacturedFlow {
    fn sample(&self, t: f64, grid: &SlabGrid, g: &GeometryTensors) -> Result<VelocitySample> {
        if self.is_zero() {
            return Ok(VelocitySample::zero(grid, t));
        }
        if g.shape() != grid.shape() {
            return Err(SlabError::GridMismatch("geometry tensors do not match the grid".into()));
        }
        let mut u1 = grid.zeros();
        let mut u3 = grid.zeros();
        for ((i, j, k), v) in u1.indexed_iter_mut() {
            let y3 = grid.x3(k) + g.eta_bar[[i, j, k]] * g.d_tilde[k];
            let (a, b) = self.velocity_at(t, grid.x1(i), y3);
            *v = a;
            u3[[i, j, k]] = b;
        }
        let u2 = grid.zeros();
        let spec = grid.spectral();
        let h = grid.h();
        let (d31, d33) = (d3_field(&u1, h), d3_field(&u3, h));
        let d11 = spec.deriv_field(&u1, 0);
        let mut div = grid.zeros();
        Zip::indexed(&mut div).for_each(|idx, o| {
            let kk = g.k[idx];
            *o = d11[idx] - g.a[idx] * kk * d31[idx] + kk * d33[idx];
        });
        let bottom = u3.index_axis(Axis(2), 0).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let div_res = div.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(VelocitySample::with_diagnostics(grid, t, [u1, u2, u3], div_res, bottom))
    }
}

/// Advances `η` by Heun's method on `∂tη = rate(η, t)` and stores the rate at the new time.
pub fn evolve_surface_with<F>(eta: &SurfaceFunction, dt: f64, mut rate: F) -> Result<SurfaceFunction>
where
    F: FnMut(&Field2, f64) -> Result<Field2>,
{
    let t0 = eta.t;
    let k1 = rate(&eta.eta, t0)?;
    let pred = &eta.eta + &(&k1 * dt);
    let k2 = rate(&pred, t0 + dt)?;
    let next = Zip::from(&eta.eta).and(&k1).and(&k2).map_collect(|e, a, b| e + 0.5 * dt * (a + b));
    if next.iter().any(|v| !v.is_finite()) {
        return Err(SlabError::NonFinite("surface update".into()));
    }
    let dnext = rate(&next, t0 + dt)?;
    Ok(SurfaceFunction { eta: next, dt_eta: Some(dnext), t: t0 + dt })
}

/// Kinematic update of the surface for a manufactured flow.
pub fn evolve_surface(eta: &SurfaceFunction, flow: &ManufacturedFlow, grid: &SlabGrid, dt: f64) -> Result<SurfaceFunction> {
    let spec = grid.spectral();
    evolve_surface_with(eta, dt, |e, t| Ok(flow.kinematic_rate(e, t, grid, &spec)))
}

/// `L²`, `H^{3/2}` and `‖∇η‖_{H^{1/2}}` norms of a surface function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurfaceNorms {
    pub l2: f64,
    pub h32: f64,
    pub grad_h12: f64,
}

pub fn surface_norms(f: &Field2, grid: &SlabGrid, spec: &Spectral2d) -> SurfaceNorms {
    let modes = spec.forward(f.view());
    let kmag = spec.kmag();
    let scale = grid.domain.area() / ((grid.n1 * grid.n2) as f64).powi(2);
    let (mut l2, mut h32, mut g12) = (0.0, 0.0, 0.0);
    for ((i, j), c) in modes.indexed_iter() {
        let q2 = kmag[[i, j]].powi(2);
        let a = c.norm_sqr() * scale;
        l2 += a;
        h32 += (1.0 + q2).powf(1.5) * a;
        g12 += q2 * (1.0 + q2).sqrt() * a;
    }
    SurfaceNorms { l2: l2.sqrt(), h32: h32.sqrt(), grad_h12: g12.sqrt() }
}

/// State of a moving-slab trajectory.
#[derive(Clone, Debug)]
pub struct MovingState {
    pub scalar: ScalarState,
    pub surface: SurfaceFunction,
    pub geometry: GeometryTensors,
    /// Bounds of the current geometry.
    pub bounds: GeometryBounds,
    /// Running supremum of the bounds since the start.
    pub running: GeometryBounds,
    /// Outside the smallness hypotheses.
    pub flagged: bool,
    /// `(∫J₀)⁻¹ ∫ w₀ J₀` for insulated walls, zero otherwise.
    pub theta_avg: f64,
}

impl MovingState {
    pub fn new(scalar: ScalarState, eta: Field2, flow: &ManufacturedFlow) -> Result<Self> {
        let grid = scalar.grid;
        grid.check_surface(&eta, "eta")?;
        let spec = grid.spectral();
        let dt_eta = flow.kinematic_rate(&eta, scalar.t, &grid, &spec);
        let surface = SurfaceFunction { eta, dt_eta: Some(dt_eta), t: scalar.t };
        let geometry = compute_geometry(&surface, &grid)?;
        let bounds = geometry_bounds(&geometry);
        let theta_avg =
            if scalar.bc.is_neumann() { grid.inner(&scalar.w, &geometry.j) / grid.integrate(&geometry.j) } else { 0.0 };
        Ok(Self { scalar, surface, geometry, bounds, running: bounds, flagged: !bounds.smallness.passes(), theta_avg })
    }

    pub fn t(&self) -> f64 {
        self.scalar.t
    }

    /// `½∫ w² J`.
    pub fn energy(&self) -> f64 {
        0.5 * self.scalar.grid.inner_weighted(&self.scalar.w, &self.scalar.w, &self.geometry.j)
    }

    /// `‖w√J‖`.
    pub fn weighted_norm(&self) -> f64 {
        (2.0 * self.energy()).max(0.0).sqrt()
    }

    /// `‖(w − θ_avg)√J‖`.
    pub fn centered_weighted_norm(&self) -> f64 {
        let c = self.scalar.w.mapv(|v| v - self.theta_avg);
        self.scalar.grid.inner_weighted(&c, &c, &self.geometry.j).max(0.0).sqrt()
    }
}

fn walls(grid: &SlabGrid, bc: &BoundaryCoefficients, g: &GeometryTensors) -> (WallCondition, WallCondition) {
    let top = match bc.beta_plus.finite() {
        Some(bp) => WallCondition::Robin(g.normal_norm().mapv(|n| bp * n)),
        None => WallCondition::Dirichlet,
    };
    let bottom = match bc.beta_minus.finite() {
        Some(bm) => WallCondition::Robin(g.k.index_axis(Axis(2), 0).mapv(|k| bm * k)),
        None => WallCondition::Dirichlet,
    };
    let _ = grid;
    (top, bottom)
}

/// `F_t^β` density on the top surface: `β₊(θ̄ − θ_eq(0))|𝒩|(1 − K|𝒩|)`.
fn surface_forcing(grid: &SlabGrid, bc: &BoundaryCoefficients, state: &ScalarState, g: &GeometryTensors) -> Option<Field2> {
    let bp = bc.beta_plus.finite()?;
    let gap = bc.theta_bar - state.equilibrium.top();
    if bp == 0.0 || gap == 0.0 {
        return None;
    }
    let top = grid.top();
    let n = g.normal_norm();
    Some(Zip::from(&n).and(g.k.index_axis(Axis(2), top)).map_collect(|&n, &k| bp * gap * n * (1.0 - k * n)))
}

/// `∂tη̄ d̃ − U3 + κJ𝒜_{jl}∂l𝒜_{j3}`, the bracket multiplying `∂3θ_eq`.
fn source_bracket(g: &GeometryTensors, u: &VelocitySample, kappa: f64, with_curvature: bool) -> (Field3, Field3) {
    let v = transport_velocity(g, u);
    let mut s = v.clone();
    if with_curvature {
        let adc = g.a_div_col3();
        Zip::from(&mut s).and(&g.j).and(&adc).for_each(|o, &j, &c| *o += kappa * j * c);
    }
    (v, s)
}

/// `∂tη̄ d̃ − U3`.
fn transport_velocity(g: &GeometryTensors, u: &VelocitySample) -> Field3 {
    let mut v = Field3::zeros(g.shape());
    Zip::indexed(&mut v).for_each(|idx, o| {
        let dte = g.dt_eta_bar.as_ref().map_or(0.0, |f| f[idx]);
        let u3 = u.u[2][idx] - g.a[idx] * u.u[0][idx] - g.b[idx] * u.u[1][idx];
        *o = dte * g.d_tilde[idx.2] - u3;
    });
    v
}

struct ExplicitInputs<'a> {
    spec: &'a Spectral2d,
    grid: &'a SlabGrid,
    g: &'a GeometryTensors,
    u: &'a VelocitySample,
    kappa: f64,
    slope: f64,
    forcing: Option<&'a Field2>,
}

fn moving_explicit(x: &ExplicitInputs, w: &Field3) -> Explicit {
    let ExplicitInputs { spec, grid, g, u, kappa, slope, forcing } = *x;
    let h = grid.h();
    let (v, src) = source_bracket(g, u, kappa, slope != 0.0);

    let f1 = Zip::from(&g.j).and(&u.u[0]).and(w).map_collect(|j, a, b| j * a * b);
    let f2 = Zip::from(&g.j).and(&u.u[1]).and(w).map_collect(|j, a, b| j * a * b);
    let mut out = spec.div_field(&f1, &f2);
    out.mapv_inplace(|q| -q);
    out += &d3_sbp_field(&(&v * w), h);

    let (w1, w2) = spec.grad_field(w);
    let w3 = d3_field(w, h);
    let c1 = Zip::from(&g.a).and(&w3).map_collect(|a, d| -a * d);
    let c2 = Zip::from(&g.b).and(&w3).map_collect(|b, d| -b * d);
    let xflux = Zip::from(&g.a).and(&w1).and(&g.b).and(&w2).map_collect(|a, p, b, q| -a * p - b * q);
    let cross = spec.div_field(&c1, &c2) + d3_sbp_field(&xflux, h);
    let r1 = w * &g.grad_j[0];
    let r2 = w * &g.grad_j[1];
    let rem = spec.div_field(&r1, &r2);
    Zip::from(&mut out).and(&cross).and(&rem).for_each(|o, &c, &r| *o += kappa * c - kappa * r);
    if slope != 0.0 {
        Zip::from(&mut out).and(&src).for_each(|o, &s| *o += slope * s);
    }

    let top = grid.top();
    let mut flux = xflux.index_axis(Axis(2), top).mapv(|x| -kappa * x);
    if let Some(f) = forcing {
        flux += f;
    }
    let _ = v;
    Explicit { bulk: out, top_flux: Some(flux) }
}

/// Moving-slab stepper.
pub struct MovingSolver {
    grid: SlabGrid,
    spec: Spectral2d,
}

impl MovingSolver {
    pub fn new(grid: &SlabGrid) -> Self {
        Self { grid: *grid, spec: grid.spectral() }
    }

    /// Surface first (Heun on the kinematic condition), then the scalar with
    /// the implicit coefficients taken from the midpoint geometry.
    pub fn step(&self, s: &MovingState, flow: &ManufacturedFlow, dt: f64) -> Result<MovingState> {
        if s.flagged {
            return Err(SlabError::Smallness("initial or previous geometry is outside the smallness regime".into()));
        }
        let grid = &self.grid;
        let bc = s.scalar.bc;
        let kappa = bc.kappa;
        let slope = s.scalar.equilibrium.b;
        let (t0, t1) = (s.t(), s.t() + dt);

        let g0 = &s.geometry;
        let (surface1, g1, gm) = if flow.is_zero() {
            let mut surf = s.surface.clone();
            surf.t = t1;
            let mut g1 = g0.clone();
            g1.t = t1;
            let gm = g1.clone();
            (surf, g1, gm)
        } else {
            let surface1 = evolve_surface_with(&s.surface, dt, |e, t| Ok(flow.kinematic_rate(e, t, grid, &self.spec)))?;
            let g1 = compute_geometry(&surface1, grid)?;
            let gm = self.midpoint_geometry(&s.surface, &surface1, flow)?;
            (surface1, g1, gm)
        };
        let bounds = geometry_bounds(&g1);
        if !bounds.smallness.passes() {
            return Err(SlabError::Smallness(format!("at t = {t1}: {:?}", bounds.smallness)));
        }

        let u0 = flow.sample(t0, grid, g0)?;
        let u1 = flow.sample(t1, grid, &g1)?;
        check_cfl(grid, dt, &[&u0, &u1])?;

        // Insulated walls: step the centred field so the constant state is exact.
        let shift = if bc.is_neumann() { s.theta_avg } else { 0.0 };
        let mut q = if shift == 0.0 { &s.scalar.w * &g0.j } else { s.scalar.w.mapv(|v| v - shift) * &g0.j };
        self.spec.heat_field(&mut q, 0.5 * kappa * dt);
        let wa = &q / &g0.j;

        let g33 = gm.g33();
        let (top, bottom) = walls(grid, &bc, &gm);
        let coeffs = StageCoefficients {
            kappa,
            j_start: Some(&g0.j),
            j_end: Some(&g1.j),
            g33: Some(&g33),
            top: &top,
            bottom: &bottom,
        };
        let f0 = surface_forcing(grid, &bc, &s.scalar, g0);
        let f1 = surface_forcing(grid, &bc, &s.scalar, &g1);
        let x0 = ExplicitInputs { spec: &self.spec, grid, g: g0, u: &u0, kappa, slope, forcing: f0.as_ref() };
        let x1 = ExplicitInputs { spec: &self.spec, grid, g: &g1, u: &u1, kappa, slope, forcing: f1.as_ref() };
        let wb = cn_heun_stage(grid, &coeffs, &wa, dt, |v, end| Ok(moving_explicit(if end { &x1 } else { &x0 }, v)))?;

        let mut q = &wb * &g1.j;
        self.spec.heat_field(&mut q, 0.5 * kappa * dt);
        let mut w = &q / &g1.j;
        if shift != 0.0 {
            w.mapv_inplace(|v| v + shift);
        }

        Ok(MovingState {
            scalar: ScalarState { w, t: t1, ..s.scalar.clone() },
            surface: surface1,
            geometry: g1,
            bounds,
            running: s.running.merge(&bounds),
            flagged: false,
            theta_avg: s.theta_avg,
        })
    }

    /// Geometry of `(η⁰ + η¹)/2` with its kinematic rate.
    pub fn midpoint_geometry(&self, a: &SurfaceFunction, b: &SurfaceFunction, flow: &ManufacturedFlow) -> Result<GeometryTensors> {
        let tm = 0.5 * (a.t + b.t);
        let eta = (&a.eta + &b.eta) * 0.5;
        let dt_eta = flow.kinematic_rate(&eta, tm, &self.grid, &self.spec);
        compute_geometry(&SurfaceFunction { eta, dt_eta: Some(dt_eta), t: tm }, &self.grid)
    }
}

/// Single moving step; see [`MovingSolver::step`].
pub fn step_moving(state: &MovingState, flow: &ManufacturedFlow, dt: f64) -> Result<MovingState> {
    MovingSolver::new(&state.scalar.grid).step(state, flow, dt)
}

/// One row of the moving energy ledger.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MovingEnergyReport {
    pub t: f64,
    /// `‖w√J‖` of the later state.
    pub norm: f64,
    /// `½∫w²J` of the later state.
    pub energy: f64,
    /// `ℳ_β^t` at the midpoint.
    pub dissipation: f64,
    /// `∂3θ_eq ∫ w (∂tη̄ d̃ − U3 + κJ𝒜_{jl}∂l𝒜_{j3})`.
    pub rhs1: f64,
    /// `F_t^β(w)`.
    pub rhs2: f64,
    pub residual: f64,
    pub c0: f64,
    pub c1: f64,
    pub eta_sup: f64,
}

/// Discrete energy identity between consecutive moving states, evaluated
/// with the midpoint geometry and the average of the two deviations.
pub fn energy_ledger_moving(
    before: &MovingState,
    after: &MovingState,
    flow: &ManufacturedFlow,
    dt: f64,
) -> Result<MovingEnergyReport> {
    check_consecutive(before.t(), after.t(), dt)?;
    let grid = &before.scalar.grid;
    let bc = &before.scalar.bc;
    let solver = MovingSolver::new(grid);
    let gm = if flow.is_zero() { before.geometry.clone() } else { solver.midpoint_geometry(&before.surface, &after.surface, flow)? };
    let mid = (&before.scalar.w + &after.scalar.w) * 0.5;
    let (e0, e1) = (before.energy(), after.energy());
    let m = dissipation_moving(&mid, bc, &gm, grid)?.value;
    let u = flow.sample(0.5 * (before.t() + after.t()), grid, &gm)?;
    let slope = before.scalar.equilibrium.b;
    let rhs1 = if slope == 0.0 {
        0.0
    } else {
        let (_, src) = source_bracket(&gm, &u, bc.kappa, true);
        slope * grid.inner(&mid, &src)
    };
    let rhs2 = match surface_forcing(grid, bc, &before.scalar, &gm) {
        Some(f) => {
            let top = mid.index_axis(Axis(2), grid.top());
            f.iter().zip(top.iter()).map(|(a, b)| a * b).sum::<f64>() * grid.cell_area()
        }
        None => 0.0,
    };
    let residual = (e1 - e0) / dt + m - rhs1 - rhs2;
    Ok(MovingEnergyReport {
        t: after.t(),
        norm: after.weighted_norm(),
        energy: e1,
        dissipation: m,
        rhs1,
        rhs2,
        residual,
        c0: after.running.c0,
        c1: after.running.c1,
        eta_sup: after.surface.sup_norm(),
    })
}

/// `∫(θ − θ_eq − θ_avg)J`, identically zero along insulated trajectories.
pub fn weighted_mean(state: &MovingState) -> Result<f64> {
    let s = &state.scalar;
    if !s.bc.is_neumann() {
        return Err(SlabError::Regime("the weighted mean is only conserved for two insulated walls".into()));
    }
    if s.grid.domain.is_proxy() {
        return Err(SlabError::Regime("weighted-mean conservation needs a periodic cross-section".into()));
    }
    let g = &state.geometry;
    Ok(s.grid.inner(&s.w, &g.j) - state.theta_avg * s.grid.integrate(&g.j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::Beta;
    use crate::geometry::SlabDomain;

    fn grid() -> SlabGrid {
        SlabGrid::new(SlabDomain::periodic(1.0, 1.0, 1.0).unwrap(), 8, 4, 17).unwrap()
    }

    #[test]
    fn zero_amplitude_gives_zero_velocity() {
        let g = grid();
        let f = manufacture_flow(FlowParams::default(), &g).unwrap();
        let s = f.sample(0.0, &g, &GeometryTensors::flat(&g)).unwrap();
        assert!(s.is_zero && s.divergence_residual == 0.0);
    }

    #[test]
    fn bottom_trace_vanishes_exactly() {
        let g = grid();
        let p = FlowParams { amplitude: 0.3, decay_rate: 1.0, mode: 1, c: 0.4 };
        let f = manufacture_flow(p, &g).unwrap();
        let s = f.sample(0.2, &g, &GeometryTensors::flat(&g)).unwrap();
        assert_eq!(s.wall_residual, 0.0);
    }

    #[test]
    fn constant_rate_is_integrated_exactly() {
        let g = grid();
        let eta = SurfaceFunction::new(g.surface_from_fn(|x1, _| 0.01 * x1), 0.0);
        let out = evolve_surface_with(&eta, 0.1, |e, _| Ok(e.mapv(|_| 0.25))).unwrap();
        for (a, b) in out.eta.iter().zip(eta.eta.iter()) {
            assert!((a - (b + 0.025)).abs() < 1e-16);
        }
    }

    #[test]
    fn negative_parameters_are_rejected() {
        let g = grid();
        assert!(manufacture_flow(FlowParams { amplitude: -1.0, ..FlowParams::default() }, &g).is_err());
        assert!(manufacture_flow(FlowParams { c: -2.0, ..FlowParams::default() }, &g).is_err());
    }

    #[test]
    fn weighted_mean_starts_at_zero() {
        let g = grid();
        let bc = BoundaryCoefficients::new(Beta::Finite(0.0), Beta::Finite(0.0), 1.0, 1.0, 0.0).unwrap();
        let w = g.field_from_fn(|x1, _, x3| 1.0 + x3 + (6.0 * x1).sin());
        let sc = ScalarState::from_deviation(g, bc, 0.0, w, 0.0).unwrap();
        let eta = crate::geometry::single_mode_surface(&g, 0.02, (1, 0));
        let flow = manufacture_flow(FlowParams::default(), &g).unwrap();
        let st = MovingState::new(sc, eta, &flow).unwrap();
        assert!(weighted_mean(&st).unwrap().abs() < 1e-14);
    }
}
