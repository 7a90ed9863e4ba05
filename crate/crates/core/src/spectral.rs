//! Horizontal Fourier machinery on the periodic rectangle.
//!
//! Planes are `(n1, n2)` real arrays; transforms are unnormalized forward and
//! `1/(n1 n2)`-normalized inverse. Odd derivatives drop the Nyquist mode.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Array3, ArrayView2, Axis, Zip};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Cached FFT plans and wavenumbers for one horizontal grid.
#[derive(Clone)]
pub struct Spectral2d {
    n1: usize,
    n2: usize,
    fwd1: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
    /// Angular wavenumbers along x1 with the Nyquist entry zeroed.
    k1: Vec<f64>,
    k2: Vec<f64>,
    /// `|k|` per mode, Nyquist entries kept (used by even operators).
    kmag: Array2<f64>,
}

impl std::fmt::Debug for Spectral2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral2d").field("n1", &self.n1).field("n2", &self.n2).finish()
    }
}

fn signed_index(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl Spectral2d {
    pub fn new(n1: usize, n2: usize, l1: f64, l2: f64) -> Self {
        let mut planner = FftPlanner::new();
        let odd = |n: usize, l: f64| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    if n % 2 == 0 && i == n / 2 {
                        0.0
                    } else {
                        2.0 * PI * signed_index(i, n) as f64 / l
                    }
                })
                .collect()
        };
        let even = |n: usize, l: f64| -> Vec<f64> {
            (0..n).map(|i| 2.0 * PI * signed_index(i, n) as f64 / l).collect()
        };
        let (e1, e2) = (even(n1, l1), even(n2, l2));
        let kmag = Array2::from_shape_fn((n1, n2), |(i, j)| e1[i].hypot(e2[j]));
        Self {
            n1,
            n2,
            fwd1: planner.plan_fft_forward(n1),
            inv1: planner.plan_fft_inverse(n1),
            fwd2: planner.plan_fft_forward(n2),
            inv2: planner.plan_fft_inverse(n2),
            k1: odd(n1, l1),
            k2: odd(n2, l2),
            kmag,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    /// Angular wavenumber magnitude `2π|n|` of mode `(i, j)`.
    pub fn kmag(&self) -> &Array2<f64> {
        &self.kmag
    }

    pub fn k1(&self) -> &[f64] {
        &self.k1
    }

    pub fn k2(&self) -> &[f64] {
        &self.k2
    }

    fn transform(&self, data: &mut Array2<Complex64>, forward: bool) {
        let (f1, f2) = if forward { (&self.fwd1, &self.fwd2) } else { (&self.inv1, &self.inv2) };
        for mut row in data.axis_iter_mut(Axis(0)) {
            f2.process(row.as_slice_mut().expect("standard layout"));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n1];
        for mut col in data.axis_iter_mut(Axis(1)) {
            for (b, v) in buf.iter_mut().zip(col.iter()) {
                *b = *v;
            }
            f1.process(&mut buf);
            for (v, b) in col.iter_mut().zip(buf.iter()) {
                *v = *b;
            }
        }
    }

    pub fn forward(&self, plane: ArrayView2<f64>) -> Array2<Complex64> {
        let mut data = plane.mapv(|v| Complex64::new(v, 0.0));
        if !data.is_standard_layout() {
            data = data.as_standard_layout().to_owned();
        }
        self.transform(&mut data, true);
        data
    }

    pub fn inverse(&self, mut modes: Array2<Complex64>) -> Array2<f64> {
        self.transform(&mut modes, false);
        let scale = 1.0 / (self.n1 * self.n2) as f64;
        modes.mapv(|c| c.re * scale)
    }

    /// Applies `m(i, j)` multiplicatively in mode space.
    pub fn filter<F>(&self, plane: ArrayView2<f64>, m: F) -> Array2<f64>
    where
        F: Fn(usize, usize) -> Complex64,
    {
        let mut modes = self.forward(plane);
        for ((i, j), c) in modes.indexed_iter_mut() {
            *c *= m(i, j);
        }
        self.inverse(modes)
    }

    /// Spectral derivative along `axis` (0 for x1, 1 for x2).
    pub fn deriv(&self, plane: ArrayView2<f64>, axis: usize) -> Array2<f64> {
        let k = if axis == 0 { &self.k1 } else { &self.k2 };
        self.filter(plane, |i, j| Complex64::new(0.0, if axis == 0 { k[i] } else { k[j] }))
    }

    /// Both horizontal derivatives of one plane from a single forward transform.
    pub fn grad(&self, plane: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
        let modes = self.forward(plane);
        let mut d1 = modes.clone();
        let mut d2 = modes;
        for ((i, j), c) in d1.indexed_iter_mut() {
            *c *= Complex64::new(0.0, self.k1[i]);
            let _ = j;
        }
        for ((_, j), c) in d2.indexed_iter_mut() {
            *c *= Complex64::new(0.0, self.k2[j]);
        }
        (self.inverse(d1), self.inverse(d2))
    }

    /// Plane-wise derivative of a volume field along horizontal `axis`.
    pub fn deriv_field(&self, f: &Array3<f64>, axis: usize) -> Array3<f64> {
        let mut out = Array3::zeros(f.raw_dim());
        for k in 0..f.len_of(Axis(2)) {
            let d = self.deriv(f.index_axis(Axis(2), k), axis);
            out.index_axis_mut(Axis(2), k).assign(&d);
        }
        out
    }

    /// Plane-wise horizontal gradient of a volume field.
    pub fn grad_field(&self, f: &Array3<f64>) -> (Array3<f64>, Array3<f64>) {
        let mut g1 = Array3::zeros(f.raw_dim());
        let mut g2 = Array3::zeros(f.raw_dim());
        for k in 0..f.len_of(Axis(2)) {
            let (a, b) = self.grad(f.index_axis(Axis(2), k));
            g1.index_axis_mut(Axis(2), k).assign(&a);
            g2.index_axis_mut(Axis(2), k).assign(&b);
        }
        (g1, g2)
    }

    /// Horizontal divergence `∂1 f1 + ∂2 f2` of a volume vector field.
    pub fn div_field(&self, f1: &Array3<f64>, f2: &Array3<f64>) -> Array3<f64> {
        let mut out = Array3::zeros(f1.raw_dim());
        for k in 0..f1.len_of(Axis(2)) {
            let mut m1 = self.forward(f1.index_axis(Axis(2), k));
            let m2 = self.forward(f2.index_axis(Axis(2), k));
            Zip::indexed(&mut m1).and(&m2).for_each(|(i, j), a, b| {
                *a = *a * Complex64::new(0.0, self.k1[i]) + *b * Complex64::new(0.0, self.k2[j]);
            });
            out.index_axis_mut(Axis(2), k).assign(&self.inverse(m1));
        }
        out
    }

    /// Exact horizontal heat flow: multiplies mode `n` by `exp(-kappa_tau |k|^2)`.
    pub fn heat_field(&self, f: &mut Array3<f64>, kappa_tau: f64) {
        let factor = self.kmag.mapv(|k| (-kappa_tau * k * k).exp());
        for k in 0..f.len_of(Axis(2)) {
            let mut modes = self.forward(f.index_axis(Axis(2), k));
            Zip::from(&mut modes).and(&factor).for_each(|c, &g| *c *= g);
            let back = self.inverse(modes);
            f.index_axis_mut(Axis(2), k).assign(&back);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(n1: usize, n2: usize, l1: f64, l2: f64, f: impl Fn(f64, f64) -> f64) -> Array2<f64> {
        Array2::from_shape_fn((n1, n2), |(i, j)| f(i as f64 * l1 / n1 as f64, j as f64 * l2 / n2 as f64))
    }

    #[test]
    fn round_trip_is_identity() {
        let s = Spectral2d::new(8, 6, 1.0, 2.0);
        let p = plane(8, 6, 1.0, 2.0, |x, y| (2.0 * PI * x).sin() + (PI * y).cos() * 0.3 + 1.0);
        let back = s.inverse(s.forward(p.view()));
        for (a, b) in p.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_of_single_mode_is_exact() {
        let (l1, l2) = (1.5, 0.7);
        let s = Spectral2d::new(16, 8, l1, l2);
        let k1 = 2.0 * PI * 2.0 / l1;
        let k2 = 2.0 * PI / l2;
        let p = plane(16, 8, l1, l2, |x, y| (k1 * x).sin() * (k2 * y).cos());
        let (d1, d2) = s.grad(p.view());
        let e1 = plane(16, 8, l1, l2, |x, y| k1 * (k1 * x).cos() * (k2 * y).cos());
        let e2 = plane(16, 8, l1, l2, |x, y| -k2 * (k1 * x).sin() * (k2 * y).sin());
        for i in 0..16 {
            for j in 0..8 {
                assert!((d1[[i, j]] - e1[[i, j]]).abs() < 1e-12);
                assert!((d2[[i, j]] - e2[[i, j]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn heat_factor_matches_exponential() {
        let s = Spectral2d::new(8, 4, 1.0, 1.0);
        let mut f = Array3::from_shape_fn((8, 4, 3), |(i, _, _)| (2.0 * PI * i as f64 / 8.0).cos());
        s.heat_field(&mut f, 0.01);
        let g = (-0.01 * 4.0 * PI * PI).exp();
        for ((i, _, _), v) in f.indexed_iter() {
            assert!((v - g * (2.0 * PI * i as f64 / 8.0).cos()).abs() < 1e-14);
        }
    }
}
