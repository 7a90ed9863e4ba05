//! Column-implicit stage shared by the rigid and moving solvers.
//!
//! One stage advances the conserved density `q = J w` over `[t, t + dt]`:
//!
//! `J⁺ w⁺ − J w = (dt/2) 𝒱(w⁺ + w) + dt·ℰ`,
//!
//! where `𝒱 = κ ∂3(G ∂3 ·)` is assembled in finite-volume form on each column
//! with the wall fluxes `−c₊ w(0)` and `−c₋ w(−d)` (Robin) or a Dirichlet row
//! (infinite coefficient), and `ℰ` is the explicit remainder treated by Heun's
//! method. Multiplying each row by the trapezoidal weight keeps the implicit
//! matrix symmetric, so the stage dissipates exactly the discrete energy
//! `Σ G (Δw)²/h + wall terms`.

use ndarray::{Array2, Array3, Axis, Zip};

use crate::geometry::SlabGrid;
use crate::vertical::Tridiagonal;
use crate::{Field2, Field3, Result, SlabError};

/// Wall treatment for one stage.
#[derive(Clone, Debug)]
pub enum WallCondition {
    /// Deviation pinned to zero.
    Dirichlet,
    /// Outward flux `−c·w` with a per-column coefficient `c ≥ 0`.
    Robin(Field2),
}

impl WallCondition {
    pub fn uniform(grid: &SlabGrid, beta: Option<f64>) -> Self {
        match beta {
            Some(b) => WallCondition::Robin(Array2::from_elem((grid.n1, grid.n2), b)),
            None => WallCondition::Dirichlet,
        }
    }

    pub fn is_dirichlet(&self) -> bool {
        matches!(self, WallCondition::Dirichlet)
    }
}

/// Explicit part of the right-hand side: a bulk rate per unit volume and an
/// extra flux entering through the top wall per unit area.
pub struct Explicit {
    pub bulk: Field3,
    pub top_flux: Option<Field2>,
}

/// Implicit coefficients of a stage; `None` fields mean identically one.
pub struct StageCoefficients<'a> {
    pub kappa: f64,
    pub j_start: Option<&'a Field3>,
    pub j_end: Option<&'a Field3>,
    /// Nodal vertical conductivity `G`, averaged onto cell faces.
    pub g33: Option<&'a Field3>,
    pub top: &'a WallCondition,
    pub bottom: &'a WallCondition,
}

fn at(f: Option<&Field3>, i: usize, j: usize, k: usize) -> f64 {
    f.map_or(1.0, |f| f[[i, j, k]])
}

/// Applies `(dt/2)·𝒱` in weighted form to column `(i, j)` of `w`, adding into `out`.
fn apply_vertical(
    c: &StageCoefficients,
    grid: &SlabGrid,
    i: usize,
    j: usize,
    w: &[f64],
    half_dt: f64,
    out: &mut [f64],
) {
    let nz = grid.nz;
    let s = c.kappa / grid.h();
    for k in 0..nz - 1 {
        let g = 0.5 * (at(c.g33, i, j, k) + at(c.g33, i, j, k + 1));
        let flux = half_dt * s * g * (w[k + 1] - w[k]);
        out[k] += flux;
        out[k + 1] -= flux;
    }
    if let WallCondition::Robin(cb) = c.bottom {
        out[0] -= half_dt * cb[[i, j]] * w[0];
    }
    if let WallCondition::Robin(ct) = c.top {
        out[nz - 1] -= half_dt * ct[[i, j]] * w[nz - 1];
    }
}

fn assemble(c: &StageCoefficients, grid: &SlabGrid, i: usize, j: usize, weights: &[f64], half_dt: f64) -> Tridiagonal {
    let nz = grid.nz;
    let mut t = Tridiagonal::zeros(nz);
    let s = c.kappa / grid.h();
    for k in 0..nz {
        t.diag[k] = weights[k] * at(c.j_end, i, j, k);
    }
    for k in 0..nz - 1 {
        let g = half_dt * s * 0.5 * (at(c.g33, i, j, k) + at(c.g33, i, j, k + 1));
        t.diag[k] += g;
        t.diag[k + 1] += g;
        t.upper[k] -= g;
        t.lower[k + 1] -= g;
    }
    match c.bottom {
        WallCondition::Robin(cb) => t.diag[0] += half_dt * cb[[i, j]],
        WallCondition::Dirichlet => {
            t.diag[0] = 1.0;
            t.upper[0] = 0.0;
            t.lower[1] = 0.0;
        }
    }
    match c.top {
        WallCondition::Robin(ct) => t.diag[nz - 1] += half_dt * ct[[i, j]],
        WallCondition::Dirichlet => {
            t.diag[nz - 1] = 1.0;
            t.lower[nz - 1] = 0.0;
            t.upper[nz - 2] = 0.0;
        }
    }
    t
}

/// Heun-corrected Crank–Nicolson stage. `explicit(w, end)` evaluates `ℰ` at
/// the start (`end = false`) or end (`end = true`) of the stage.
pub fn cn_heun_stage<F>(
    grid: &SlabGrid,
    coeffs: &StageCoefficients,
    w: &Field3,
    dt: f64,
    mut explicit: F,
) -> Result<Field3>
where
    F: FnMut(&Field3, bool) -> Result<Explicit>,
{
    let (n1, n2, nz) = grid.shape();
    let weights = grid.weights();
    let half_dt = 0.5 * dt;

    // Weighted right-hand side without the explicit part.
    let mut base = Array3::zeros(grid.shape());
    let mut systems = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            let col: Vec<f64> = w.slice(ndarray::s![i, j, ..]).to_vec();
            let mut r: Vec<f64> = (0..nz).map(|k| weights[k] * at(coeffs.j_start, i, j, k) * col[k]).collect();
            apply_vertical(coeffs, grid, i, j, &col, half_dt, &mut r);
            base.slice_mut(ndarray::s![i, j, ..]).assign(&ndarray::ArrayView1::from(&r));
            systems.push(assemble(coeffs, grid, i, j, &weights, half_dt));
        }
    }

    let solve = |e: &Explicit, scale: f64| -> Field3 {
        let mut out = Array3::zeros(grid.shape());
        let mut rhs = vec![0.0; nz];
        let mut x = vec![0.0; nz];
        for i in 0..n1 {
            for j in 0..n2 {
                for k in 0..nz {
                    rhs[k] = base[[i, j, k]] + scale * dt * weights[k] * e.bulk[[i, j, k]];
                }
                if let Some(f) = &e.top_flux {
                    rhs[nz - 1] += scale * dt * f[[i, j]];
                }
                if coeffs.bottom.is_dirichlet() {
                    rhs[0] = 0.0;
                }
                if coeffs.top.is_dirichlet() {
                    rhs[nz - 1] = 0.0;
                }
                systems[i * n2 + j].solve(&rhs, &mut x);
                out.slice_mut(ndarray::s![i, j, ..]).assign(&ndarray::ArrayView1::from(&x));
            }
        }
        out
    };

    let e0 = explicit(w, false)?;
    let predictor = solve(&e0, 1.0);
    check_finite(&predictor, "predictor stage")?;
    let e1 = explicit(&predictor, true)?;
    let avg = Explicit {
        bulk: Zip::from(&e0.bulk).and(&e1.bulk).map_collect(|a, b| 0.5 * (a + b)),
        top_flux: match (&e0.top_flux, &e1.top_flux) {
            (Some(a), Some(b)) => Some(Zip::from(a).and(b).map_collect(|x, y| 0.5 * (x + y))),
            (Some(a), None) => Some(a.mapv(|x| 0.5 * x)),
            (None, Some(b)) => Some(b.mapv(|x| 0.5 * x)),
            (None, None) => None,
        },
    };
    let out = solve(&avg, 1.0);
    check_finite(&out, "corrector stage")?;
    Ok(out)
}

pub fn check_finite(f: &Field3, what: &str) -> Result<()> {
    if f.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SlabError::NonFinite(what.into()))
    }
}

/// `Σ_k (w_{k+1} − w_k)² G_{k+1/2} / h` summed over columns and scaled by the cell area.
pub fn vertical_gradient_energy(grid: &SlabGrid, w: &Field3, g33: Option<&Field3>) -> f64 {
    let h = grid.h();
    let mut s = 0.0;
    for ((i, j), col) in w.lanes(Axis(2)).into_iter().enumerate().map(|(n, c)| ((n / grid.n2, n % grid.n2), c)) {
        for k in 0..grid.nz - 1 {
            let g = 0.5 * (at(g33, i, j, k) + at(g33, i, j, k + 1));
            s += g * (col[k + 1] - col[k]).powi(2);
        }
    }
    s / h * grid.cell_area()
}
