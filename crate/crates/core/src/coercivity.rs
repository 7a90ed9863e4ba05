//! Dissipation functionals, the Neumann spectral gap and coercivity audits.
//!
//! All functionals use the quadrature of the solvers: spectral horizontally,
//! trapezoidal vertically, with the vertical gradient energy summed over
//! cells so that `Σ (Δφ)²/h` is exactly the form dissipated by the implicit
//! stage.

use std::f64::consts::PI;

use ndarray::{Array3, Axis};
use serde::Serialize;

use crate::eigen1d::principal_eigenvalue;
use crate::equilibrium::BoundaryCoefficients;
use crate::geometry::{geometry_bounds, GeometryTensors, HorizontalKind, SlabDomain, SlabGrid};
use crate::stepper::vertical_gradient_energy;
use crate::vertical::{d3_field, Tridiagonal};
use crate::{Field3, Result, SlabError};

/// Which `L²` weight the ratio uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Plain,
    Jacobian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DissipationReport {
    pub value: f64,
    pub volume: f64,
    pub top: f64,
    pub bottom: f64,
    pub weighting: Weighting,
    /// `‖φ‖²` in the weighting above.
    pub weight_norm_sq: f64,
    /// `value / weight_norm_sq`; `None` for `φ = 0`.
    pub ratio: Option<f64>,
}

impl DissipationReport {
    fn new(volume: f64, top: f64, bottom: f64, weighting: Weighting, weight_norm_sq: f64) -> Self {
        let value = volume + top + bottom;
        let ratio = (weight_norm_sq > 0.0).then(|| value / weight_norm_sq);
        Self { value, volume, top, bottom, weighting, weight_norm_sq, ratio }
    }
}

fn sup(f: &Field3) -> f64 {
    f.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Rejects fields whose trace on a Dirichlet wall is not zero.
pub fn check_admissible(phi: &Field3, bc: &BoundaryCoefficients, grid: &SlabGrid) -> Result<()> {
    grid.check_field(phi, "phi")?;
    let tol = 1e-12 * sup(phi).max(1e-300);
    for (inf, k, name) in [(bc.beta_plus.is_infinite(), grid.top(), "top"), (bc.beta_minus.is_infinite(), 0, "bottom")] {
        if inf {
            let worst = phi.index_axis(Axis(2), k).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if worst > tol {
                return Err(SlabError::Regime(format!("nonzero {name} trace {worst:.3e} on a Dirichlet wall")));
            }
        }
    }
    Ok(())
}

fn wall_sum(grid: &SlabGrid, phi: &Field3, k: usize, weight: Option<&ndarray::Array2<f64>>) -> f64 {
    let plane = phi.index_axis(Axis(2), k);
    let s: f64 = match weight {
        Some(w) => plane.iter().zip(w.iter()).map(|(p, q)| p * p * q).sum(),
        None => plane.iter().map(|p| p * p).sum(),
    };
    s * grid.cell_area()
}

fn horizontal_energy(grid: &SlabGrid, phi: &Field3) -> f64 {
    let (p1, p2) = grid.spectral().grad_field(phi);
    grid.inner(&p1, &p1) + grid.inner(&p2, &p2)
}

fn boundary_terms(grid: &SlabGrid, bc: &BoundaryCoefficients, phi: &Field3) -> (f64, f64) {
    let top = bc.beta_plus.finite().map_or(0.0, |b| b * wall_sum(grid, phi, grid.top(), None));
    let bottom = bc.beta_minus.finite().map_or(0.0, |b| b * wall_sum(grid, phi, 0, None));
    (top, bottom)
}

/// `𝒟_β[φ] = κ∫|∇φ|² + β₊∫_{Σ₊}φ² + β₋∫_{Σ₋}φ²`.
pub fn dissipation_rigid(phi: &Field3, bc: &BoundaryCoefficients, grid: &SlabGrid) -> Result<DissipationReport> {
    check_admissible(phi, bc, grid)?;
    let volume = bc.kappa * (horizontal_energy(grid, phi) + vertical_gradient_energy(grid, phi, None));
    let (top, bottom) = boundary_terms(grid, bc, phi);
    Ok(DissipationReport::new(volume, top, bottom, Weighting::Plain, grid.inner(phi, phi)))
}

/// `𝒱_β[φ]`: as [`dissipation_rigid`] with only the vertical derivative.
pub fn dissipation_vertical(phi: &Field3, bc: &BoundaryCoefficients, grid: &SlabGrid) -> Result<DissipationReport> {
    check_admissible(phi, bc, grid)?;
    let volume = bc.kappa * vertical_gradient_energy(grid, phi, None);
    let (top, bottom) = boundary_terms(grid, bc, phi);
    Ok(DissipationReport::new(volume, top, bottom, Weighting::Plain, grid.inner(phi, phi)))
}

/// `ℳ_β^t[φ] = κ∫J|∇_𝒜φ|² + β₊∫_{Σ₊}φ²|𝒩| + β₋∫_{Σ₋}φ²K`.
///
/// With `G = J𝒜ᵀ𝒜` the volume term is `κ∫∇φᵀG∇φ`; the `G33` part is summed
/// over cells with face-averaged coefficients, the rest at the nodes.
pub fn dissipation_moving(
    phi: &Field3,
    bc: &BoundaryCoefficients,
    g: &GeometryTensors,
    grid: &SlabGrid,
) -> Result<DissipationReport> {
    check_admissible(phi, bc, grid)?;
    if g.shape() != grid.shape() {
        return Err(SlabError::GridMismatch("geometry tensors do not match the grid".into()));
    }
    let (p1, p2) = grid.spectral().grad_field(phi);
    let p3 = d3_field(phi, grid.h());
    let weights = grid.weights();
    let mut nodal = 0.0;
    for ((i, j, k), &jac) in g.j.indexed_iter() {
        let idx = [i, j, k];
        let (a, b) = (g.a[idx], g.b[idx]);
        let (x, y, z) = (p1[idx], p2[idx], p3[idx]);
        nodal += weights[k] * (jac * (x * x + y * y) - 2.0 * a * x * z - 2.0 * b * y * z);
    }
    let volume = bc.kappa * (nodal * grid.cell_area() + vertical_gradient_energy(grid, phi, Some(&g.g33())));
    let top = bc.beta_plus.finite().map_or(0.0, |bp| bp * wall_sum(grid, phi, grid.top(), Some(&g.normal_norm())));
    let k_bottom = g.k.index_axis(Axis(2), 0).to_owned();
    let bottom = bc.beta_minus.finite().map_or(0.0, |bm| bm * wall_sum(grid, phi, 0, Some(&k_bottom)));
    let norm = grid.inner_weighted(phi, phi, &g.j);
    Ok(DissipationReport::new(volume, top, bottom, Weighting::Jacobian, norm))
}

/// Closed-form Neumann gap of the box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NeumannGap {
    /// `κπ² min{1/d², 4/L1², 4/L2²}`.
    pub value: f64,
    /// Set when the box only stands in for the whole plane, where the gap closes.
    pub proxy_warning: bool,
}

pub fn neumann_gap(domain: &SlabDomain, kappa: f64) -> NeumannGap {
    let d = domain.depth;
    let m = (1.0 / (d * d)).min(4.0 / (domain.l1 * domain.l1)).min(4.0 / (domain.l2 * domain.l2));
    NeumannGap { value: kappa * PI * PI * m, proxy_warning: domain.kind == HorizontalKind::TruncatedInfinite }
}

/// Second-smallest eigenvalue of the discrete insulated operator by shifted
/// inverse iteration with the constant mode deflated in the trapezoidal
/// inner product. The Rayleigh quotient is measured with [`dissipation_rigid`].
pub fn neumann_gap_discrete(grid: &SlabGrid, kappa: f64) -> Result<f64> {
    use crate::equilibrium::Beta;
    let bc = BoundaryCoefficients::new(Beta::Finite(0.0), Beta::Finite(0.0), kappa, grid.depth(), 0.0)?;
    let spec = grid.spectral();
    let (n1, n2, nz) = grid.shape();
    let h = grid.h();
    let w = grid.weights();
    let shift = kappa / (grid.depth() * grid.depth());
    let kmag = spec.kmag().clone();

    let deflate = |x: &mut Field3| {
        let m = grid.integrate(x) / (grid.domain.area() * grid.depth());
        x.mapv_inplace(|v| v - m);
    };
    let mut x = Array3::from_shape_fn(grid.shape(), |(i, j, k)| {
        let s = ((i * 7919 + j * 104729 + k * 1299709) as f64 * 0.618_033_988_749_895).fract();
        s - 0.5
    });
    deflate(&mut x);

    let mut lambda = f64::NAN;
    for _ in 0..500 {
        // Solve (A + σ) y = x mode by mode.
        let mut modes: Vec<_> = (0..nz).map(|k| spec.forward(x.index_axis(Axis(2), k))).collect();
        let mut re = vec![0.0; nz];
        let mut im = vec![0.0; nz];
        let mut sol_re = vec![0.0; nz];
        let mut sol_im = vec![0.0; nz];
        for i in 0..n1 {
            for j in 0..n2 {
                let q = kmag[[i, j]];
                let mut t = Tridiagonal::zeros(nz);
                for k in 0..nz {
                    t.diag[k] = w[k] * (shift + kappa * q * q);
                    re[k] = w[k] * modes[k][[i, j]].re;
                    im[k] = w[k] * modes[k][[i, j]].im;
                }
                for k in 0..nz - 1 {
                    let c = kappa / h;
                    t.diag[k] += c;
                    t.diag[k + 1] += c;
                    t.upper[k] -= c;
                    t.lower[k + 1] -= c;
                }
                t.solve(&re, &mut sol_re);
                t.solve(&im, &mut sol_im);
                for k in 0..nz {
                    modes[k][[i, j]] = rustfft::num_complex::Complex64::new(sol_re[k], sol_im[k]);
                }
            }
        }
        let mut y = Array3::zeros(grid.shape());
        for (k, m) in modes.drain(..).enumerate() {
            y.index_axis_mut(Axis(2), k).assign(&spec.inverse(m));
        }
        deflate(&mut y);
        let norm = grid.l2_norm(&y);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(SlabError::NonFinite("neumann inverse iteration".into()));
        }
        y.mapv_inplace(|v| v / norm);
        let next = dissipation_rigid(&y, &bc, grid)?.value;
        x = y;
        if (next - lambda).abs() <= 1e-13 * next {
            return Ok(next);
        }
        lambda = next;
    }
    Ok(lambda)
}

/// Which proposition an audit exercises.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditCase {
    Rigid,
    RigidNeumann,
    Moving,
    MovingNeumann,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub case: AuditCase,
    pub ratio: f64,
    pub floor: f64,
    /// Relative allowance `(πh/d)²/6` for the second-order discretization.
    pub slack: f64,
    pub passes: bool,
    /// The floor is attained on a finite box but not on the whole plane.
    pub proxy_warning: bool,
}

/// Relative slack granted to discrete Rayleigh quotients.
pub fn discrete_slack(grid: &SlabGrid) -> f64 {
    (PI * grid.h() / grid.depth()).powi(2) / 6.0
}

/// Rayleigh ratio of `φ` against the coercivity floor of its regime.
pub fn coercivity_audit(
    phi: &Field3,
    bc: &BoundaryCoefficients,
    g: Option<&GeometryTensors>,
    grid: &SlabGrid,
) -> Result<AuditReport> {
    let neumann = bc.is_neumann();
    let gap = neumann_gap(&grid.domain, bc.kappa);
    let (case, report, floor) = match g {
        None => {
            if neumann {
                let mean = grid.integrate(phi);
                let scale = grid.l2_norm(phi) * (grid.domain.area() * grid.depth()).sqrt();
                if mean.abs() > 1e-10 * scale.max(1e-300) {
                    return Err(SlabError::Precondition(format!("insulated audit needs a mean-zero field, mean = {mean:.3e}")));
                }
                (AuditCase::RigidNeumann, dissipation_rigid(phi, bc, grid)?, gap.value)
            } else {
                let mu = principal_eigenvalue(bc)?.mu;
                (AuditCase::Rigid, dissipation_rigid(phi, bc, grid)?, mu)
            }
        }
        Some(g) => {
            let bounds = geometry_bounds(g);
            if neumann {
                let mean = grid.inner(phi, &g.j);
                let scale = grid.inner_weighted(phi, phi, &g.j).sqrt() * grid.integrate(&g.j).sqrt();
                if mean.abs() > 1e-10 * scale.max(1e-300) {
                    return Err(SlabError::Precondition(format!(
                        "insulated audit needs a J-weighted mean-zero field, mean = {mean:.3e}"
                    )));
                }
                let floor = gap.value / (bounds.c0 * bounds.c1);
                (AuditCase::MovingNeumann, dissipation_moving(phi, bc, g, grid)?, floor)
            } else {
                let mu = principal_eigenvalue(bc)?.mu;
                (AuditCase::Moving, dissipation_moving(phi, bc, g, grid)?, mu / (bounds.c0 * bounds.c0))
            }
        }
    };
    let ratio = report.ratio.ok_or_else(|| SlabError::Precondition("audit needs a nonzero field".into()))?;
    let slack = discrete_slack(grid);
    Ok(AuditReport {
        case,
        ratio,
        floor,
        slack,
        passes: ratio >= floor * (1.0 - slack),
        proxy_warning: neumann && gap.proxy_warning,
    })
}
