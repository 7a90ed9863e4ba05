//! Principal eigenpair of `−κζ'' = μζ` on `(−d, 0)` with
//! `κζ'(0) + β₊ζ(0) = 0` and `−κζ'(−d) + β₋ζ(−d) = 0`.
//!
//! With `x = d√(μ/κ)` and `s = x/d`, the top condition applied to the
//! bottom-adapted solution `cos(s(x3 + d) + φ)` gives the pole-free
//! characteristic function
//!
//! `F(x) = (κ²s² − β₊β₋) sin x − κs(β₊ + β₋) cos x`,
//!
//! divided through by the infinite coefficient(s) when a wall is Dirichlet.
//! The principal root is the first sign change of `F` on `(0, π]`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::equilibrium::{Beta, BoundaryCoefficients, WallKind, BETA_INFINITY_THRESHOLD};
use crate::vertical::Tridiagonal;
use crate::{Result, SlabError};

const SCAN_POINTS: usize = 10_000;
const SCAN_START: f64 = 1e-8;
const ROOT_RTOL: f64 = 1e-14;

/// Wall classification used by the eigenvalue solver: coefficients above
/// [`BETA_INFINITY_THRESHOLD`] count as Dirichlet.
pub fn effective_wall(b: Beta) -> WallKind {
    match b {
        Beta::Finite(v) if v > BETA_INFINITY_THRESHOLD => WallKind::Dirichlet,
        other => other.wall(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EigenResult {
    pub mu: f64,
    /// `(top, bottom)` wall kinds that selected the characteristic equation.
    pub case: (WallKind, WallKind),
    /// Bracket in `x = d√(μ/κ)` handed to bisection; `None` for closed forms.
    pub bracket: Option<(f64, f64)>,
    /// `s = √(μ/κ)`.
    pub wavenumber: f64,
    pub phase: f64,
    /// Factor making `ζ` unit in `L²(−d, 0)`.
    pub scale: f64,
    pub depth: f64,
}

impl EigenResult {
    /// `ζ(x3) = scale · cos(s(x3 + d) + φ)`.
    pub fn zeta(&self, x3: f64) -> f64 {
        self.scale * (self.wavenumber * (x3 + self.depth) + self.phase).cos()
    }

    /// `ζ` on `nz` uniform nodes from `−d` to `0`; Dirichlet walls are exactly zero.
    pub fn sample(&self, nz: usize) -> Vec<f64> {
        let d = self.depth;
        let mut v: Vec<f64> = (0..nz)
            .map(|k| self.zeta(-(d * (nz - 1 - k) as f64 / (nz - 1) as f64) + 0.0))
            .collect();
        if self.case.0 == WallKind::Dirichlet {
            v[nz - 1] = 0.0;
        }
        if self.case.1 == WallKind::Dirichlet {
            v[0] = 0.0;
        }
        v
    }

    /// Exact `‖ζ‖²` of the analytic profile (1 up to rounding).
    pub fn norm_squared(&self) -> f64 {
        self.scale * self.scale * cos2_integral(self.wavenumber, self.phase, self.depth)
    }
}

fn cos2_integral(s: f64, phi: f64, d: f64) -> f64 {
    if s == 0.0 {
        return d * phi.cos().powi(2);
    }
    0.5 * d + ((2.0 * (s * d + phi)).sin() - (2.0 * phi).sin()) / (4.0 * s)
}

fn characteristic(top: WallKind, bottom: WallKind, bp: f64, bm: f64, kappa: f64, d: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| {
        let ks = kappa * x / d;
        match (top, bottom) {
            (WallKind::Dirichlet, _) => -bm * x.sin() - ks * x.cos(),
            (_, WallKind::Dirichlet) => -bp * x.sin() - ks * x.cos(),
            _ => (ks * ks - bp * bm) * x.sin() - ks * (bp + bm) * x.cos(),
        }
    }
}

fn scan_grid() -> Vec<f64> {
    let mut xs: Vec<f64> = (0..40).map(|i| 1e-16 * 10f64.powf(8.0 * i as f64 / 40.0)).collect();
    xs.extend((0..=SCAN_POINTS).map(|i| SCAN_START + (PI - SCAN_START) * i as f64 / SCAN_POINTS as f64));
    xs
}

/// Principal eigenvalue and its analytic eigenfunction.
pub fn principal_eigenvalue(bc: &BoundaryCoefficients) -> Result<EigenResult> {
    let (kappa, d) = (bc.kappa, bc.depth);
    let top = effective_wall(bc.beta_plus);
    let bottom = effective_wall(bc.beta_minus);
    let bp = bc.beta_plus.finite().unwrap_or(f64::INFINITY);
    let bm = bc.beta_minus.finite().unwrap_or(f64::INFINITY);
    use WallKind::*;
    let closed = |x: f64, phase: f64| {
        let s = x / d;
        let scale = 1.0 / cos2_integral(s, phase, d).sqrt();
        EigenResult { mu: kappa * s * s, case: (top, bottom), bracket: None, wavenumber: s, phase, scale, depth: d }
    };
    match (top, bottom) {
        (Neumann, Neumann) => return Ok(closed(0.0, 0.0)),
        (Dirichlet, Dirichlet) => return Ok(closed(PI, -0.5 * PI)),
        (Dirichlet, Neumann) => return Ok(closed(0.5 * PI, 0.0)),
        (Neumann, Dirichlet) => return Ok(closed(0.5 * PI, -0.5 * PI)),
        _ => {}
    }

    let f = characteristic(top, bottom, bp, bm, kappa, d);
    let xs = scan_grid();
    let mut prev = (xs[0], f(xs[0]));
    let mut bracket = None;
    for &x in &xs[1..] {
        let v = f(x);
        if prev.1 == 0.0 {
            bracket = Some((prev.0, prev.0));
            break;
        }
        if prev.1.signum() != v.signum() {
            bracket = Some((prev.0, x));
            break;
        }
        prev = (x, v);
    }
    let (lo0, hi0) = bracket.ok_or_else(|| {
        SlabError::Bracket(format!(
            "no sign change of the characteristic function on (0, pi] for beta = ({bp}, {bm}), kappa = {kappa}, d = {d}"
        ))
    })?;
    let (mut lo, mut hi) = (lo0, hi0);
    let flo = f(lo);
    for _ in 0..200 {
        if hi - lo <= ROOT_RTOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    let s = x / d;
    let phase = if bottom == Dirichlet { -0.5 * PI } else { (-bm).atan2(kappa * s) };
    let mut r = closed(x, phase);
    r.bracket = Some((lo0, hi0));
    Ok(r)
}

/// Lower bound table for the principal eigenvalue; exact when both
/// coefficients lie in `{0, ∞}`.
pub fn eigenvalue_lower_bound(bc: &BoundaryCoefficients) -> f64 {
    let (k, d) = (bc.kappa, bc.depth);
    let quarter = k * PI * PI / (4.0 * d * d);
    match (bc.beta_plus, bc.beta_minus) {
        (Beta::Infinite, Beta::Infinite) => 4.0 * quarter,
        (Beta::Infinite, _) | (_, Beta::Infinite) => quarter,
        (Beta::Finite(bp), Beta::Finite(bm)) => match (bp == 0.0, bm == 0.0) {
            (true, true) => 0.0,
            (true, false) => 1.0 / (1.0 / quarter + d / bm),
            (false, true) => 1.0 / (1.0 / quarter + d / bp),
            (false, false) => quarter.min(bp * bm / k),
        },
    }
}

fn check_admissible(zeta: &[f64], bc: &BoundaryCoefficients) -> Result<()> {
    let n = zeta.len();
    if n < 3 {
        return Err(SlabError::InvalidParameter("profile needs at least 3 nodes".into()));
    }
    let scale = zeta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(SlabError::Precondition("zero function has no Rayleigh quotient".into()));
    }
    let tol = 1e-12 * scale;
    if bc.beta_plus.is_infinite() && zeta[n - 1].abs() > tol {
        return Err(SlabError::Regime("nonzero top trace with an infinite top coefficient".into()));
    }
    if bc.beta_minus.is_infinite() && zeta[0].abs() > tol {
        return Err(SlabError::Regime("nonzero bottom trace with an infinite bottom coefficient".into()));
    }
    Ok(())
}

/// Discrete `𝔇_β[ζ] / ‖ζ‖²` on uniform nodes: the gradient energy of the
/// piecewise-linear interpolant, wall terms for finite coefficients, and the
/// trapezoidal mass.
pub fn rayleigh_quotient_1d(zeta: &[f64], bc: &BoundaryCoefficients) -> Result<f64> {
    check_admissible(zeta, bc)?;
    let n = zeta.len();
    let h = bc.depth / (n - 1) as f64;
    let grad: f64 = zeta.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / h;
    let mut num = bc.kappa * grad;
    if let Some(bp) = bc.beta_plus.finite() {
        num += bp * zeta[n - 1].powi(2);
    }
    if let Some(bm) = bc.beta_minus.finite() {
        num += bm * zeta[0].powi(2);
    }
    let mass: f64 = zeta.iter().enumerate().map(|(i, v)| {
        let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
        w * v * v
    }).sum();
    Ok(num / mass)
}

/// Smallest value of [`rayleigh_quotient_1d`] over all admissible grid
/// functions on `nz` nodes, by Sturm-sequence bisection on the symmetrized
/// tridiagonal pencil.
pub fn dense_rayleigh_minimum(bc: &BoundaryCoefficients, nz: usize) -> Result<f64> {
    if nz < 3 {
        return Err(SlabError::InvalidParameter("nz must be at least 3".into()));
    }
    let h = bc.depth / (nz - 1) as f64;
    let c = bc.kappa / h;
    let lo_idx = usize::from(bc.beta_minus.is_infinite());
    let hi_idx = nz - 1 - usize::from(bc.beta_plus.is_infinite());
    let m = hi_idx + 1 - lo_idx;
    let mut t = Tridiagonal::zeros(m);
    let weight = |i: usize| if i == 0 || i == nz - 1 { 0.5 * h } else { h };
    for (r, i) in (lo_idx..=hi_idx).enumerate() {
        let mut diag = 0.0;
        if i > 0 {
            diag += c;
        }
        if i + 1 < nz {
            diag += c;
        }
        if i == 0 {
            diag += bc.beta_minus.finite().unwrap_or(0.0);
        }
        if i == nz - 1 {
            diag += bc.beta_plus.finite().unwrap_or(0.0);
        }
        t.diag[r] = diag / weight(i);
        if r + 1 < m {
            let off = -c / (weight(i) * weight(i + 1)).sqrt();
            t.upper[r] = off;
            t.lower[r + 1] = off;
        }
    }
    let count_below = |lam: f64| -> usize {
        let mut count = 0;
        let mut q = t.diag[0] - lam;
        if q < 0.0 {
            count += 1;
        }
        for r in 1..m {
            let prev = if q == 0.0 { f64::MIN_POSITIVE } else { q };
            q = t.diag[r] - lam - t.lower[r] * t.upper[r - 1] / prev;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    let mut hi = (0..m)
        .map(|r| t.diag[r] + t.lower[r].abs() + t.upper[r].abs())
        .fold(0.0f64, f64::max);
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Beta::{Finite as F, Infinite as I};

    fn bc(bp: Beta, bm: Beta) -> BoundaryCoefficients {
        BoundaryCoefficients::new(bp, bm, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn closed_forms() {
        assert_eq!(principal_eigenvalue(&bc(I, I)).unwrap().mu, PI * PI);
        assert_eq!(principal_eigenvalue(&bc(F(0.0), F(0.0))).unwrap().mu, 0.0);
        assert_eq!(principal_eigenvalue(&bc(I, F(0.0))).unwrap().mu, PI * PI / 4.0);
        assert_eq!(principal_eigenvalue(&bc(F(0.0), I)).unwrap().mu, PI * PI / 4.0);
    }

    #[test]
    fn lower_bound_table_rows() {
        assert_eq!(eigenvalue_lower_bound(&bc(F(2.0), F(3.0))), (PI * PI / 4.0).min(6.0));
        let expect = 1.0 / (4.0 / (PI * PI) + 1.0);
        assert!((eigenvalue_lower_bound(&bc(F(0.0), F(1.0))) - expect).abs() < 1e-15);
        assert_eq!(eigenvalue_lower_bound(&bc(F(0.0), F(0.0))), 0.0);
    }

    #[test]
    fn eigenfunctions_are_normalized() {
        for (bp, bm) in [(F(1.0), F(1.0)), (I, F(2.0)), (F(0.0), F(0.3)), (F(5.0), I), (I, I), (F(0.0), F(0.0))] {
            let r = principal_eigenvalue(&bc(bp, bm)).unwrap();
            assert!((r.norm_squared() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_has_zero_quotient_for_insulated_walls() {
        let z = vec![0.7; 21];
        assert_eq!(rayleigh_quotient_1d(&z, &bc(F(0.0), F(0.0))).unwrap(), 0.0);
        assert!(rayleigh_quotient_1d(&[0.0; 5], &bc(F(0.0), F(0.0))).is_err());
    }

    #[test]
    fn dirichlet_trace_is_enforced() {
        assert!(rayleigh_quotient_1d(&[0.0, 1.0, 1.0], &bc(I, F(1.0))).is_err());
    }

    #[test]
    fn dense_minimum_of_dirichlet_problem() {
        let nz = 65;
        let h = 1.0 / 64.0;
        let exact = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        let got = dense_rayleigh_minimum(&bc(I, I), nz).unwrap();
        assert!((got - exact).abs() < 1e-10 * exact);
    }
}
