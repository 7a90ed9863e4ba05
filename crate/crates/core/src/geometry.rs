//! Slab grids, the harmonic extension of the surface and the flattening tensors.
//!
//! The moving domain `{-d < y3 < η(y', t)}` is carried onto the fixed slab
//! `Γ × (-d, 0)` by `Φ(x) = (x1, x2, x3 + η̄(x)(1 + x3/d))`, where `η̄` is the
//! decaying harmonic extension of `η`. Everything the flattened equations need
//! is derived here from the Fourier modes of `η`, with `x3` derivatives taken
//! analytically.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen};
use ndarray::{Array2, Array3, Axis, Zip};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::spectral::Spectral2d;
use crate::vertical::{d3_field, trapezoid_weights};
use crate::{Field2, Field3, Result, SlabError};

/// How the horizontal cross-section is interpreted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizontalKind {
    Periodic,
    /// Periodic box standing in for the whole plane; results are box-growth
    /// studies and are labelled as such.
    TruncatedInfinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlabDomain {
    pub l1: f64,
    pub l2: f64,
    pub depth: f64,
    pub kind: HorizontalKind,
}

impl SlabDomain {
    pub fn new(l1: f64, l2: f64, depth: f64, kind: HorizontalKind) -> Result<Self> {
        for (name, v) in [("l1", l1), ("l2", l2), ("depth", depth)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SlabError::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { l1, l2, depth, kind })
    }

    pub fn periodic(l1: f64, l2: f64, depth: f64) -> Result<Self> {
        Self::new(l1, l2, depth, HorizontalKind::Periodic)
    }

    pub fn is_proxy(&self) -> bool {
        self.kind == HorizontalKind::TruncatedInfinite
    }

    pub fn area(&self) -> f64 {
        self.l1 * self.l2
    }
}

/// Tensor grid: `n1 × n2` Fourier collocation points and `nz` uniform vertical nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlabGrid {
    pub domain: SlabDomain,
    pub n1: usize,
    pub n2: usize,
    pub nz: usize,
}

impl SlabGrid {
    pub fn new(domain: SlabDomain, n1: usize, n2: usize, nz: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 || n1 % 2 != 0 || n2 % 2 != 0 {
            return Err(SlabError::InvalidParameter(format!(
                "horizontal mode counts must be even and positive, got ({n1}, {n2})"
            )));
        }
        if nz < 3 {
            return Err(SlabError::InvalidParameter(format!("nz must be at least 3, got {nz}")));
        }
        Ok(Self { domain, n1, n2, nz })
    }

    pub fn depth(&self) -> f64 {
        self.domain.depth
    }

    /// Vertical spacing.
    pub fn h(&self) -> f64 {
        self.domain.depth / (self.nz - 1) as f64
    }

    pub fn dx1(&self) -> f64 {
        self.domain.l1 / self.n1 as f64
    }

    pub fn dx2(&self) -> f64 {
        self.domain.l2 / self.n2 as f64
    }

    pub fn h_min(&self) -> f64 {
        self.h().min(self.dx1()).min(self.dx2())
    }

    pub fn x1(&self, i: usize) -> f64 {
        self.domain.l1 * i as f64 / self.n1 as f64
    }

    pub fn x2(&self, j: usize) -> f64 {
        self.domain.l2 * j as f64 / self.n2 as f64
    }

    /// Node height; exactly `-d` at `k = 0` and exactly `0` at the top.
    pub fn x3(&self, k: usize) -> f64 {
        let m = (self.nz - 1 - k) as f64;
        -(self.domain.depth * m / (self.nz - 1) as f64) + 0.0
    }

    /// `d̃ = 1 + x3/d`, exactly 0 on the bottom and 1 on the top.
    pub fn d_tilde(&self, k: usize) -> f64 {
        1.0 + self.x3(k) / self.domain.depth
    }

    pub fn weights(&self) -> Vec<f64> {
        trapezoid_weights(self.nz, self.h())
    }

    /// Horizontal quadrature weight of one collocation point.
    pub fn cell_area(&self) -> f64 {
        self.domain.area() / (self.n1 * self.n2) as f64
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.nz)
    }

    pub fn top(&self) -> usize {
        self.nz - 1
    }

    pub fn zeros(&self) -> Field3 {
        Array3::zeros(self.shape())
    }

    pub fn surface_zeros(&self) -> Field2 {
        Array2::zeros((self.n1, self.n2))
    }

    pub fn spectral(&self) -> Spectral2d {
        Spectral2d::new(self.n1, self.n2, self.domain.l1, self.domain.l2)
    }

    pub fn field_from_fn(&self, f: impl Fn(f64, f64, f64) -> f64) -> Field3 {
        Array3::from_shape_fn(self.shape(), |(i, j, k)| f(self.x1(i), self.x2(j), self.x3(k)))
    }

    pub fn surface_from_fn(&self, f: impl Fn(f64, f64) -> f64) -> Field2 {
        Array2::from_shape_fn((self.n1, self.n2), |(i, j)| f(self.x1(i), self.x2(j)))
    }

    /// Same box with the horizontal counts doubled and the vertical spacing halved.
    pub fn refined(&self) -> Self {
        Self { domain: self.domain, n1: 2 * self.n1, n2: 2 * self.n2, nz: 2 * (self.nz - 1) + 1 }
    }

    /// `∫_Ω f`: mean rule horizontally, trapezoid vertically.
    pub fn integrate(&self, f: &Field3) -> f64 {
        let w = self.weights();
        let mut s = 0.0;
        for col in f.lanes(Axis(2)) {
            s += col.iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
        s * self.cell_area()
    }

    /// `∫_Ω f g`.
    pub fn inner(&self, f: &Field3, g: &Field3) -> f64 {
        let w = self.weights();
        let mut s = 0.0;
        Zip::from(f.lanes(Axis(2))).and(g.lanes(Axis(2))).for_each(|a, b| {
            for k in 0..w.len() {
                s += w[k] * a[k] * b[k];
            }
        });
        s * self.cell_area()
    }

    /// `∫_Ω f g q`.
    pub fn inner_weighted(&self, f: &Field3, g: &Field3, q: &Field3) -> f64 {
        let w = self.weights();
        let mut s = 0.0;
        Zip::from(f.lanes(Axis(2))).and(g.lanes(Axis(2))).and(q.lanes(Axis(2))).for_each(|a, b, c| {
            for k in 0..w.len() {
                s += w[k] * a[k] * b[k] * c[k];
            }
        });
        s * self.cell_area()
    }

    pub fn l2_norm(&self, f: &Field3) -> f64 {
        self.inner(f, f).max(0.0).sqrt()
    }

    /// `∫_Γ f`.
    pub fn integrate_surface(&self, f: &Field2) -> f64 {
        f.sum() * self.cell_area()
    }

    /// Plane `k` of a volume field.
    pub fn plane(&self, f: &Field3, k: usize) -> Field2 {
        f.index_axis(Axis(2), k).to_owned()
    }

    pub fn check_field(&self, f: &Field3, what: &str) -> Result<()> {
        if f.dim() != self.shape() {
            return Err(SlabError::GridMismatch(format!(
                "{what} has shape {:?}, grid expects {:?}",
                f.dim(),
                self.shape()
            )));
        }
        Ok(())
    }

    pub fn check_surface(&self, f: &Field2, what: &str) -> Result<()> {
        if f.dim() != (self.n1, self.n2) {
            return Err(SlabError::GridMismatch(format!(
                "{what} has shape {:?}, grid expects {:?}",
                f.dim(),
                (self.n1, self.n2)
            )));
        }
        Ok(())
    }
}

/// Surface height `η` (and optionally `∂t η`) sampled on the horizontal grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceFunction {
    pub eta: Field2,
    pub dt_eta: Option<Field2>,
    pub t: f64,
}

impl SurfaceFunction {
    pub fn flat(grid: &SlabGrid) -> Self {
        Self { eta: grid.surface_zeros(), dt_eta: None, t: 0.0 }
    }

    pub fn new(eta: Field2, t: f64) -> Self {
        Self { eta, dt_eta: None, t }
    }

    pub fn sup_norm(&self) -> f64 {
        self.eta.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Multipliers applied to the Fourier modes of a surface function when it is
/// extended into the slab: `m(k1, k2, |k|)` times `exp(|k| x3)`.
struct Extension<'a> {
    spec: &'a Spectral2d,
    modes: Array2<Complex64>,
}

impl<'a> Extension<'a> {
    fn new(spec: &'a Spectral2d, f: &Field2) -> Self {
        Self { spec, modes: spec.forward(f.view()) }
    }

    fn field(&self, grid: &SlabGrid, m: impl Fn(f64, f64, f64) -> Complex64) -> Field3 {
        let mut out = grid.zeros();
        let (k1, k2, kmag) = (self.spec.k1(), self.spec.k2(), self.spec.kmag());
        for k in 0..grid.nz {
            let x3 = grid.x3(k);
            let mut level = self.modes.clone();
            for ((i, j), c) in level.indexed_iter_mut() {
                let q = kmag[[i, j]];
                *c *= m(k1[i], k2[j], q) * (q * x3).exp();
            }
            out.index_axis_mut(Axis(2), k).assign(&self.spec.inverse(level));
        }
        out
    }
}

fn re(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn im(v: f64) -> Complex64 {
    Complex64::new(0.0, v)
}

/// Harmonic extension `Σ f̂(n) e^{2π|n| x3} e^{2πi n·x'}` sampled on the grid.
pub fn poisson_extend(f: &Field2, grid: &SlabGrid) -> Result<Field3> {
    grid.check_surface(f, "surface function")?;
    let spec = grid.spectral();
    Ok(Extension::new(&spec, f).field(grid, |_, _, _| re(1.0)))
}

/// Flattening tensors at one instant.
///
/// `A = ∂1η̄ d̃`, `B = ∂2η̄ d̃`, `J = 1 + η̄/d + ∂3η̄ d̃`, `K = 1/J`; the matrix
/// `𝒜` has rows `(1, 0, -AK)`, `(0, 1, -BK)`, `(0, 0, K)` and the non-unit
/// surface normal is `𝒩 = (-∂1η, -∂2η, 1)`.
#[derive(Clone, Debug)]
pub struct GeometryTensors {
    pub t: f64,
    pub eta_bar: Field3,
    pub a: Field3,
    pub b: Field3,
    pub j: Field3,
    pub k: Field3,
    pub d_tilde: Vec<f64>,
    /// `(-∂1η, -∂2η)`; the third component of `𝒩` is identically 1.
    pub normal: [Field2; 2],
    /// Analytic gradients `(∂1, ∂2, ∂3)` of `J`, `A` and `B`.
    pub grad_j: [Field3; 3],
    pub grad_a: [Field3; 3],
    pub grad_b: [Field3; 3],
    /// `∂t η̄` and the analytic `∂t J`, present when `∂t η` was supplied.
    pub dt_eta_bar: Option<Field3>,
    pub dt_j: Option<Field3>,
    pub depth: f64,
}

impl GeometryTensors {
    /// Flat geometry: `A = B = 0`, `J = K = 1`.
    pub fn flat(grid: &SlabGrid) -> Self {
        let z = grid.zeros();
        let one = Array3::from_elem(grid.shape(), 1.0);
        Self {
            t: 0.0,
            eta_bar: z.clone(),
            a: z.clone(),
            b: z.clone(),
            j: one.clone(),
            k: one,
            d_tilde: (0..grid.nz).map(|k| grid.d_tilde(k)).collect(),
            normal: [grid.surface_zeros(), grid.surface_zeros()],
            grad_j: [z.clone(), z.clone(), z.clone()],
            grad_a: [z.clone(), z.clone(), z.clone()],
            grad_b: [z.clone(), z.clone(), z.clone()],
            dt_eta_bar: Some(z.clone()),
            dt_j: Some(z),
            depth: grid.depth(),
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.j.dim()
    }

    /// `𝒜` at a node.
    pub fn a_matrix(&self, i: usize, j: usize, k: usize) -> Matrix3<f64> {
        let (a, b, kk) = (self.a[[i, j, k]], self.b[[i, j, k]], self.k[[i, j, k]]);
        Matrix3::new(1.0, 0.0, -a * kk, 0.0, 1.0, -b * kk, 0.0, 0.0, kk)
    }

    /// `J 𝒜ᵀ𝒜 = [[J, 0, -A], [0, J, -B], [-A, -B, K(1 + A² + B²)]]`.
    pub fn g_matrix(&self, i: usize, j: usize, k: usize) -> Matrix3<f64> {
        let (a, b, jj, kk) = (self.a[[i, j, k]], self.b[[i, j, k]], self.j[[i, j, k]], self.k[[i, j, k]]);
        Matrix3::new(jj, 0.0, -a, 0.0, jj, -b, -a, -b, kk * (1.0 + a * a + b * b))
    }

    /// `𝒩` at a surface node.
    pub fn normal_at(&self, i: usize, j: usize) -> [f64; 3] {
        [self.normal[0][[i, j]], self.normal[1][[i, j]], 1.0]
    }

    /// `|𝒩|` on the surface grid.
    pub fn normal_norm(&self) -> Field2 {
        Zip::from(&self.normal[0]).and(&self.normal[1]).map_collect(|a, b| (1.0 + a * a + b * b).sqrt())
    }

    /// `K(1 + A² + B²)`, the vertical-vertical entry of `J𝒜ᵀ𝒜`.
    pub fn g33(&self) -> Field3 {
        Zip::from(&self.k).and(&self.a).and(&self.b).map_collect(|k, a, b| k * (1.0 + a * a + b * b))
    }

    /// `Σ_{j,l} 𝒜_{jl} ∂_l 𝒜_{j3}` from the analytic gradients.
    pub fn a_div_col3(&self) -> Field3 {
        let mut out = Array3::zeros(self.shape());
        Zip::indexed(&mut out).for_each(|(i, j, k), o| {
            let idx = [i, j, k];
            let (a, b, kk) = (self.a[idx], self.b[idx], self.k[idx]);
            let gk = |l: usize| -kk * kk * self.grad_j[l][idx];
            // ∂_l(-A K), ∂_l(-B K), ∂_l K
            let c1 = |l: usize| -(self.grad_a[l][idx] * kk + a * gk(l));
            let c2 = |l: usize| -(self.grad_b[l][idx] * kk + b * gk(l));
            let row1 = c1(0) - a * kk * c1(2);
            let row2 = c2(1) - b * kk * c2(2);
            let row3 = kk * gk(2);
            *o = row1 + row2 + row3;
        });
        out
    }

    pub fn is_flat(&self) -> bool {
        self.eta_bar.iter().all(|v| *v == 0.0)
    }
}

/// Builds every flattening tensor from `η` (and `∂t η` if present).
pub fn compute_geometry(eta: &SurfaceFunction, grid: &SlabGrid) -> Result<GeometryTensors> {
    grid.check_surface(&eta.eta, "eta")?;
    let spec = grid.spectral();
    let d = grid.depth();
    let ext = Extension::new(&spec, &eta.eta);
    let eb = ext.field(grid, |_, _, _| re(1.0));
    let e1 = ext.field(grid, |k1, _, _| im(k1));
    let e2 = ext.field(grid, |_, k2, _| im(k2));
    let e3 = ext.field(grid, |_, _, q| re(q));
    let e11 = ext.field(grid, |k1, _, _| re(-k1 * k1));
    let e12 = ext.field(grid, |k1, k2, _| re(-k1 * k2));
    let e22 = ext.field(grid, |_, k2, _| re(-k2 * k2));
    let e13 = ext.field(grid, |k1, _, q| im(k1 * q));
    let e23 = ext.field(grid, |_, k2, q| im(k2 * q));
    let e33 = ext.field(grid, |_, _, q| re(q * q));

    let dt: Vec<f64> = (0..grid.nz).map(|k| grid.d_tilde(k)).collect();
    let shape = grid.shape();
    let by = |f: &dyn Fn(usize, usize, usize) -> f64| Array3::from_shape_fn(shape, |(i, j, k)| f(i, j, k));

    let a = by(&|i, j, k| e1[[i, j, k]] * dt[k]);
    let b = by(&|i, j, k| e2[[i, j, k]] * dt[k]);
    let jac = by(&|i, j, k| 1.0 + eb[[i, j, k]] / d + e3[[i, j, k]] * dt[k]);
    if let Some(((i, j, k), v)) = jac.indexed_iter().find(|(_, v)| !(**v > 0.0)) {
        return Err(SlabError::Geometry { value: *v, node: (i, j, k) });
    }
    let kinv = jac.mapv(|v| 1.0 / v);

    let grad_j = [
        by(&|i, j, k| e1[[i, j, k]] / d + e13[[i, j, k]] * dt[k]),
        by(&|i, j, k| e2[[i, j, k]] / d + e23[[i, j, k]] * dt[k]),
        by(&|i, j, k| e3[[i, j, k]] / d + e33[[i, j, k]] * dt[k] + e3[[i, j, k]] / d),
    ];
    let grad_a = [
        by(&|i, j, k| e11[[i, j, k]] * dt[k]),
        by(&|i, j, k| e12[[i, j, k]] * dt[k]),
        by(&|i, j, k| e13[[i, j, k]] * dt[k] + e1[[i, j, k]] / d),
    ];
    let grad_b = [
        by(&|i, j, k| e12[[i, j, k]] * dt[k]),
        by(&|i, j, k| e22[[i, j, k]] * dt[k]),
        by(&|i, j, k| e23[[i, j, k]] * dt[k] + e2[[i, j, k]] / d),
    ];

    let top = grid.top();
    let normal = [
        e1.index_axis(Axis(2), top).mapv(|v| -v),
        e2.index_axis(Axis(2), top).mapv(|v| -v),
    ];

    let (dt_eta_bar, dt_j) = match &eta.dt_eta {
        Some(deta) => {
            grid.check_surface(deta, "dt_eta")?;
            let x = Extension::new(&spec, deta);
            let v = x.field(grid, |_, _, _| re(1.0));
            let v3 = x.field(grid, |_, _, q| re(q));
            let dj = by(&|i, j, k| v[[i, j, k]] / d + v3[[i, j, k]] * dt[k]);
            (Some(v), Some(dj))
        }
        None => (None, None),
    };

    Ok(GeometryTensors {
        t: eta.t,
        eta_bar: eb,
        a,
        b,
        j: jac,
        k: kinv,
        d_tilde: dt,
        normal,
        grad_j,
        grad_a,
        grad_b,
        dt_eta_bar,
        dt_j,
        depth: d,
    })
}

/// Max-norm residuals of the four geometric identities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityResiduals {
    /// `∂_k(J𝒜_{ik}) = 0` with the discrete derivatives.
    pub id1: f64,
    /// `∂t J = ∂3(∂t η̄ d̃)`; absent without `∂t η`.
    pub id2: Option<f64>,
    /// `J𝒜_{j3} = 𝒩_j` on the top surface.
    pub id3: f64,
    /// `J𝒜_{j3} = e3` on the bottom.
    pub id4: f64,
}

fn sup(f: &Field3) -> f64 {
    f.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn verify_geometric_identities(g: &GeometryTensors, grid: &SlabGrid) -> IdentityResiduals {
    let spec = grid.spectral();
    let h = grid.h();
    let dj1 = spec.deriv_field(&g.j, 0);
    let dj2 = spec.deriv_field(&g.j, 1);
    let da3 = d3_field(&g.a, h);
    let db3 = d3_field(&g.b, h);
    let r1 = &dj1 - &da3;
    let r2 = &dj2 - &db3;
    let id1 = sup(&r1).max(sup(&r2));

    let id2 = match (&g.dt_eta_bar, &g.dt_j) {
        (Some(v), Some(dj)) => {
            let flux = Array3::from_shape_fn(grid.shape(), |(i, j, k)| v[[i, j, k]] * g.d_tilde[k]);
            Some(sup(&(dj - &d3_field(&flux, h))))
        }
        _ => None,
    };

    let col3 = |i: usize, j: usize, k: usize| {
        let m = g.a_matrix(i, j, k) * g.j[[i, j, k]];
        [m[(0, 2)], m[(1, 2)], m[(2, 2)]]
    };
    let (top, mut id3, mut id4) = (grid.top(), 0.0f64, 0.0f64);
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let c = col3(i, j, top);
            let n = g.normal_at(i, j);
            for q in 0..3 {
                id3 = id3.max((c[q] - n[q]).abs());
            }
            let c = col3(i, j, 0);
            let e = [0.0, 0.0, 1.0];
            for q in 0..3 {
                id4 = id4.max((c[q] - e[q]).abs());
            }
        }
    }
    IdentityResiduals { id1, id2, id3, id4 }
}

/// The sup-norms entering the smallness conditions on the flattening map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmallnessReport {
    pub j_minus_one: f64,
    pub a_sup: f64,
    pub b_sup: f64,
    /// `sup_Γ |𝒩 − e3|`.
    pub normal_minus_e3: f64,
    /// `sup_Γ |K − 1|`.
    pub k_minus_one: f64,
}

impl SmallnessReport {
    /// `‖J−1‖ + ‖A‖ + ‖B‖ ≤ 1/2` over the slab.
    pub fn volume_ok(&self) -> bool {
        self.j_minus_one + self.a_sup + self.b_sup <= 0.5
    }

    /// `‖𝒩−e3‖ + ‖K−1‖ ≤ 1/2` on the surface.
    pub fn surface_ok(&self) -> bool {
        self.normal_minus_e3 + self.k_minus_one <= 0.5
    }

    pub fn passes(&self) -> bool {
        self.volume_ok() && self.surface_ok()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GeometryBounds {
    /// `sup max(J, 1/J)`.
    pub c0: f64,
    /// `sup max(λ_max, 1/λ_min)` of `J𝒜ᵀ𝒜`.
    pub c1: f64,
    pub smallness: SmallnessReport,
}

impl GeometryBounds {
    /// Componentwise running supremum.
    pub fn merge(&self, other: &Self) -> Self {
        let (a, b) = (self.smallness, other.smallness);
        Self {
            c0: self.c0.max(other.c0),
            c1: self.c1.max(other.c1),
            smallness: SmallnessReport {
                j_minus_one: a.j_minus_one.max(b.j_minus_one),
                a_sup: a.a_sup.max(b.a_sup),
                b_sup: a.b_sup.max(b.b_sup),
                normal_minus_e3: a.normal_minus_e3.max(b.normal_minus_e3),
                k_minus_one: a.k_minus_one.max(b.k_minus_one),
            },
        }
    }
}

pub fn geometry_bounds(g: &GeometryTensors) -> GeometryBounds {
    let c0 = g.j.iter().fold(1.0f64, |m, &v| m.max(v).max(1.0 / v));
    let (n1, n2, nz) = g.shape();
    let mut c1 = 1.0f64;
    for i in 0..n1 {
        for j in 0..n2 {
            for k in 0..nz {
                let ev = SymmetricEigen::new(g.g_matrix(i, j, k)).eigenvalues;
                let (lo, hi) = (ev.min(), ev.max());
                c1 = c1.max(hi).max(1.0 / lo);
            }
        }
    }
    let top = nz - 1;
    let normal_minus_e3 = Zip::from(&g.normal[0])
        .and(&g.normal[1])
        .fold(0.0f64, |m, a, b| m.max(a.hypot(*b)));
    let k_minus_one = g.k.index_axis(Axis(2), top).iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
    GeometryBounds {
        c0,
        c1,
        smallness: SmallnessReport {
            j_minus_one: g.j.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs())),
            a_sup: sup(&g.a),
            b_sup: sup(&g.b),
            normal_minus_e3,
            k_minus_one,
        },
    }
}

/// `ε sin(2π m x1 / L1)` on the surface grid.
pub fn single_mode_surface(grid: &SlabGrid, amplitude: f64, mode: (i64, i64)) -> Field2 {
    let (l1, l2) = (grid.domain.l1, grid.domain.l2);
    grid.surface_from_fn(|x1, x2| {
        amplitude * (2.0 * PI * (mode.0 as f64 * x1 / l1 + mode.1 as f64 * x2 / l2)).sin()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n1: usize, n2: usize, nz: usize) -> SlabGrid {
        SlabGrid::new(SlabDomain::periodic(1.0, 1.0, 1.0).unwrap(), n1, n2, nz).unwrap()
    }

    #[test]
    fn node_coordinates_hit_the_walls_exactly() {
        let g = grid(4, 4, 7);
        assert_eq!(g.x3(0), -1.0);
        assert_eq!(g.x3(6), 0.0);
        assert!(g.x3(6).is_sign_positive());
        assert_eq!(g.d_tilde(0), 0.0);
        assert_eq!(g.d_tilde(6), 1.0);
    }

    #[test]
    fn rejects_odd_mode_counts() {
        let d = SlabDomain::periodic(1.0, 1.0, 1.0).unwrap();
        assert!(SlabGrid::new(d, 3, 4, 5).is_err());
        assert!(SlabGrid::new(d, 4, 4, 2).is_err());
    }

    #[test]
    fn extension_of_constant_is_constant() {
        let g = grid(8, 4, 9);
        let f = Array2::from_elem((8, 4), 2.5);
        let e = poisson_extend(&f, &g).unwrap();
        assert!(e.iter().all(|v| (v - 2.5).abs() < 1e-14));
    }

    #[test]
    fn extension_of_single_mode_decays_exponentially() {
        let l1 = 2.0;
        let d = SlabDomain::periodic(l1, 1.0, 1.0).unwrap();
        let g = SlabGrid::new(d, 16, 4, 11).unwrap();
        let f = g.surface_from_fn(|x1, _| (2.0 * PI * x1 / l1).sin());
        let e = poisson_extend(&f, &g).unwrap();
        for ((i, _, k), v) in e.indexed_iter() {
            let exact = (2.0 * PI * g.x3(k) / l1).exp() * (2.0 * PI * g.x1(i) / l1).sin();
            assert!((v - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn flat_surface_gives_identity_tensors() {
        let g = grid(8, 8, 9);
        let geo = compute_geometry(&SurfaceFunction::flat(&g), &g).unwrap();
        assert!(geo.a.iter().all(|v| *v == 0.0));
        assert!(geo.j.iter().all(|v| *v == 1.0));
        assert!(geo.k.iter().all(|v| *v == 1.0));
        let r = verify_geometric_identities(&geo, &g);
        assert_eq!((r.id1, r.id3, r.id4), (0.0, 0.0, 0.0));
        let b = geometry_bounds(&geo);
        assert_eq!((b.c0, b.c1), (1.0, 1.0));
        assert!(b.smallness.passes());
    }

    #[test]
    fn constant_surface_shifts_jacobian() {
        let g = grid(8, 4, 9);
        let c = 0.2;
        let eta = SurfaceFunction::new(Array2::from_elem((8, 4), c), 0.0);
        let geo = compute_geometry(&eta, &g).unwrap();
        for v in geo.j.iter() {
            assert!((v - 1.2).abs() < 1e-14);
        }
        for v in geo.k.iter() {
            assert!((v - 1.0 / 1.2).abs() < 1e-14);
        }
        assert!((geometry_bounds(&geo).c0 - 1.2).abs() < 1e-14);
    }

    #[test]
    fn single_mode_jacobian_matches_closed_form() {
        let g = grid(16, 4, 17);
        let eps = 0.05;
        let eta = SurfaceFunction::new(single_mode_surface(&g, eps, (1, 0)), 0.0);
        let geo = compute_geometry(&eta, &g).unwrap();
        let (i, k) = (3, 5);
        let (x1, x3) = (g.x1(i), g.x3(k));
        let q = 2.0 * PI;
        let eb = eps * (q * x3).exp() * (q * x1).sin();
        let exact = 1.0 + eb + q * eb * (1.0 + x3);
        assert!((geo.j[[i, 0, k]] - exact).abs() < 1e-14);
    }

    #[test]
    fn large_surface_is_flagged() {
        let g = grid(16, 4, 17);
        let eta = SurfaceFunction::new(single_mode_surface(&g, 0.12, (1, 0)), 0.0);
        let geo = compute_geometry(&eta, &g).unwrap();
        assert!(!geometry_bounds(&geo).smallness.passes());
    }

    #[test]
    fn folded_map_is_rejected() {
        let g = grid(16, 4, 17);
        let eta = SurfaceFunction::new(single_mode_surface(&g, 0.5, (1, 0)), 0.0);
        assert!(matches!(compute_geometry(&eta, &g), Err(SlabError::Geometry { .. })));
    }
}
