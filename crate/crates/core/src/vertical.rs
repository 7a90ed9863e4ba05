//! Vertical finite differences, trapezoidal quadrature and tridiagonal solves.
//!
//! Columns are sampled on `nz` uniform nodes from the bottom wall (`k = 0`)
//! to the top wall (`k = nz - 1`).

use ndarray::{Array3, Axis, Zip};

/// Trapezoidal weights `h·(1/2, 1, …, 1, 1/2)`.
pub fn trapezoid_weights(nz: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; nz];
    w[0] = 0.5 * h;
    w[nz - 1] = 0.5 * h;
    w
}

/// Second-order derivative: centered inside, one-sided three-point at the walls.
pub fn d3_centered(col: &[f64], h: f64, out: &mut [f64]) {
    let n = col.len();
    let inv = 1.0 / (2.0 * h);
    out[0] = (-3.0 * col[0] + 4.0 * col[1] - col[2]) * inv;
    for i in 1..n - 1 {
        out[i] = (col[i + 1] - col[i - 1]) * inv;
    }
    out[n - 1] = (3.0 * col[n - 1] - 4.0 * col[n - 2] + col[n - 3]) * inv;
}

/// Summation-by-parts derivative matched to [`trapezoid_weights`]:
/// `Σ w_k (D f)_k = f_top − f_bottom` holds exactly.
pub fn d3_sbp(col: &[f64], h: f64, out: &mut [f64]) {
    let n = col.len();
    out[0] = (col[1] - col[0]) / h;
    for i in 1..n - 1 {
        out[i] = (col[i + 1] - col[i - 1]) / (2.0 * h);
    }
    out[n - 1] = (col[n - 1] - col[n - 2]) / h;
}

fn map_columns(f: &Array3<f64>, h: f64, op: fn(&[f64], f64, &mut [f64])) -> Array3<f64> {
    let mut out = Array3::zeros(f.raw_dim());
    let nz = f.len_of(Axis(2));
    let mut buf = vec![0.0; nz];
    let mut res = vec![0.0; nz];
    Zip::from(out.lanes_mut(Axis(2))).and(f.lanes(Axis(2))).for_each(|mut o, c| {
        for (b, v) in buf.iter_mut().zip(c.iter()) {
            *b = *v;
        }
        op(&buf, h, &mut res);
        for (o, r) in o.iter_mut().zip(res.iter()) {
            *o = *r;
        }
    });
    out
}

/// [`d3_centered`] applied to every column of a volume field.
pub fn d3_field(f: &Array3<f64>, h: f64) -> Array3<f64> {
    map_columns(f, h, d3_centered)
}

/// [`d3_sbp`] applied to every column of a volume field.
pub fn d3_sbp_field(f: &Array3<f64>, h: f64) -> Array3<f64> {
    map_columns(f, h, d3_sbp)
}

/// Symmetric-pattern tridiagonal system `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
#[derive(Clone, Debug)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self { lower: vec![0.0; n], diag: vec![0.0; n], upper: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `y = T x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * x[i + 1];
            }
            y[i] = s;
        }
    }

    /// Thomas algorithm without pivoting; callers supply diagonally dominant systems.
    pub fn solve(&self, rhs: &[f64], x: &mut [f64]) {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut beta = self.diag[0];
        c[0] = self.upper[0] / beta;
        d[0] = rhs[0] / beta;
        for i in 1..n {
            beta = self.diag[i] - self.lower[i] * c[i - 1];
            c[i] = if i + 1 < n { self.upper[i] / beta } else { 0.0 };
            d[i] = (rhs[i] - self.lower[i] * d[i - 1]) / beta;
        }
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_derivative_is_exact_on_quadratics() {
        let h = 0.1;
        let col: Vec<f64> = (0..7).map(|i| {
            let x = -0.6 + i as f64 * h;
            2.0 * x * x - x + 3.0
        }).collect();
        let mut out = vec![0.0; 7];
        d3_centered(&col, h, &mut out);
        for (i, v) in out.iter().enumerate() {
            let x = -0.6 + i as f64 * h;
            assert!((v - (4.0 * x - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn sbp_sum_telescopes() {
        let col = [0.3, -1.0, 2.5, 0.7, 4.0, -2.0];
        let h = 0.2;
        let w = trapezoid_weights(col.len(), h);
        let mut out = [0.0; 6];
        d3_sbp(&col, h, &mut out);
        let s: f64 = w.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
        assert!((s - (col[5] - col[0])).abs() < 1e-14);
    }

    #[test]
    fn thomas_solves_random_dominant_system() {
        let n = 9;
        let mut t = Tridiagonal::zeros(n);
        for i in 0..n {
            t.diag[i] = 4.0 + i as f64 * 0.1;
            t.lower[i] = -1.0 + 0.05 * i as f64;
            t.upper[i] = -0.7;
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b = vec![0.0; n];
        t.apply(&x, &mut b);
        let mut y = vec![0.0; n];
        t.solve(&b, &mut y);
        for (a, b) in x.iter().zip(y.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
