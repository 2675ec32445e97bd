//! The interior system `A = D - C` of an assembled operator and the solvers built on it.
//!
//! With exterior data folded into a right-hand side `g`, the discrete operator on the
//! interior reads `L u = g - A u`. `A` is symmetric, has nonnegative off-diagonal
//! couplings `C` for nonlocal kinds, and is strictly diagonally dominant.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Clone)]
pub(crate) enum Coupling {
    /// `c_ij = t[|i - j|]`, `t[0] = 0`.
    Toeplitz(Vec<f64>),
    /// `c_ij = w[|dx| + width |dy|]` for interior axis coordinates.
    Table2D {
        w: Arc<Vec<f64>>,
        width: usize,
        coords: Vec<[usize; 2]>,
    },
    Sparse(Vec<Vec<(usize, f64)>>),
}

#[derive(Clone)]
struct CirculantToeplitz {
    n: usize,
    spectrum: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl CirculantToeplitz {
    fn new(t: &[f64]) -> Self {
        let n = t.len();
        let m = 2 * n;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let mut c = vec![Complex::new(0.0, 0.0); m];
        for k in 0..n {
            c[k].re = t[k];
        }
        for k in 1..n {
            c[m - k].re = t[k];
        }
        forward.process(&mut c);
        let spectrum = c.iter().map(|z| z.re / m as f64).collect();
        Self {
            n,
            spectrum,
            forward,
            inverse,
        }
    }

    /// `out = T u`.
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let m = 2 * self.n;
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        for (b, &v) in buf.iter_mut().zip(u) {
            b.re = v;
        }
        self.forward.process(&mut buf);
        for (b, &s) in buf.iter_mut().zip(&self.spectrum) {
            *b *= s;
        }
        self.inverse.process(&mut buf);
        for (o, b) in out.iter_mut().zip(&buf) {
            *o = b.re;
        }
    }
}

const FFT_THRESHOLD: usize = 96;

/// Symmetric interior matrix `A = D - C`, applied without forming it.
#[derive(Clone)]
pub struct InteriorOperator {
    diag: Vec<f64>,
    coupling: Coupling,
    fft: Option<CirculantToeplitz>,
}

impl std::fmt::Debug for InteriorOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InteriorOperator")
            .field("len", &self.len())
            .finish()
    }
}

impl InteriorOperator {
    pub(crate) fn new(diag: Vec<f64>, coupling: Coupling) -> Self {
        let fft = match &coupling {
            Coupling::Toeplitz(t) if t.len() >= FFT_THRESHOLD => Some(CirculantToeplitz::new(t)),
            _ => None,
        };
        Self {
            diag,
            coupling,
            fft,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Whether the couplings are short-range (row work independent of the size).
    pub fn is_sparse(&self) -> bool {
        matches!(self.coupling, Coupling::Sparse(_))
    }

    /// `Σ_{j != i} c_ij u_j`.
    pub fn coupling_dot(&self, i: usize, u: &[f64]) -> f64 {
        match &self.coupling {
            Coupling::Toeplitz(t) => {
                let mut acc = 0.0;
                for (j, &uj) in u.iter().enumerate() {
                    acc += t[j.abs_diff(i)] * uj;
                }
                acc
            }
            Coupling::Table2D { w, width, coords } => {
                let [ix, iy] = coords[i];
                let mut acc = 0.0;
                for (j, c) in coords.iter().enumerate() {
                    if j != i {
                        acc += w[c[0].abs_diff(ix) + width * c[1].abs_diff(iy)] * u[j];
                    }
                }
                acc
            }
            Coupling::Sparse(rows) => rows[i].iter().map(|&(j, c)| c * u[j]).sum(),
        }
    }

    /// `(A u)_i`.
    pub fn row_apply(&self, i: usize, u: &[f64]) -> f64 {
        self.diag[i] * u[i] - self.coupling_dot(i, u)
    }

    /// `out = A u`.
    pub fn matvec_into(&self, u: &[f64], out: &mut [f64]) {
        if let Some(fft) = &self.fft {
            fft.apply(u, out);
            for ((o, &d), &v) in out.iter_mut().zip(&self.diag).zip(u) {
                *o = d * v - *o;
            }
            return;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row_apply(i, u);
        }
    }

    pub fn matvec(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.matvec_into(u, &mut out);
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            for i in 0..n {
                m[(i, j)] = if i == j {
                    self.diag[i]
                } else {
                    -self.coupling_dot(i, &e)
                };
            }
            e[j] = 0.0;
        }
        m
    }

    /// `max_i (d_i + Σ_j |c_ij|)`, an upper bound on the spectrum.
    pub fn gershgorin_bound(&self) -> f64 {
        let n = self.len();
        let ones = vec![1.0; n];
        let abs_sum = |i: usize| match &self.coupling {
            Coupling::Sparse(rows) => rows[i].iter().map(|(_, c)| c.abs()).sum(),
            _ => self.coupling_dot(i, &ones),
        };
        (0..n)
            .map(|i| self.diag[i] + abs_sum(i))
            .fold(0.0, f64::max)
    }

    /// Largest eigenvalue estimate from `iters` power-iteration steps.
    pub fn max_eigenvalue(&self, iters: usize) -> f64 {
        power_iteration(self.len(), iters, |u, out| self.matvec_into(u, out))
    }
}

/// Power iteration from a fixed, non-symmetric start vector (deterministic).
pub fn power_iteration<F: Fn(&[f64], &mut [f64])>(n: usize, iters: usize, apply: F) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64)
        .collect();
    normalize(&mut v);
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..iters.max(1) {
        apply(&v, &mut w);
        lambda = dot(&v, &w);
        std::mem::swap(&mut v, &mut w);
        if normalize(&mut v) == 0.0 {
            return 0.0;
        }
    }
    lambda
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Outcome of a Krylov solve.
#[derive(Clone, Copy, Debug)]
pub struct CgStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for an SPD `apply`; stops at `‖r‖∞ <= tol`.
pub fn conjugate_gradient<F: Fn(&[f64], &mut [f64])>(
    apply: F,
    precond: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> CgStats {
    let n = b.len();
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(precond).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = max_abs(&r);
    let mut it = 0;
    while res > tol && it < max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        // refresh the residual now and then against drift
        if it % 200 == 199 {
            apply(x, &mut ax);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] / precond[i];
        }
        let rz_new = dot(&r, &z);
        if !(rz_new > 0.0 && rz_new.is_finite()) {
            res = max_abs(&r);
            it += 1;
            break;
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = max_abs(&r);
        it += 1;
    }
    CgStats {
        iterations: it,
        residual: res,
    }
}

/// Smallest residual worth asking of an iterative solve of `A x = b` in max norm.
pub fn residual_floor(op: &InteriorOperator, x_scale: f64, b: &[f64]) -> f64 {
    let dmax = op.diag().iter().fold(0.0f64, |m, &d| m.max(d));
    32.0 * f64::EPSILON * (2.0 * dmax * x_scale + max_abs(b))
}

/// Dense Cholesky solve of an SPD system.
pub fn cholesky_solve(m: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Internal("reduced system is not positive definite".into()))?;
    let x = chol.solve(&DVector::from_column_slice(b));
    Ok(x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toeplitz(n: usize) -> InteriorOperator {
        let t: Vec<f64> = (0..n)
            .map(|m| {
                if m == 0 {
                    0.0
                } else {
                    1.0 / (m as f64).powf(1.6)
                }
            })
            .collect();
        let diag = (0..n)
            .map(|i| 3.0 + t[1..].iter().sum::<f64>() + 0.01 * i as f64)
            .collect();
        InteriorOperator::new(diag, Coupling::Toeplitz(t))
    }

    #[test]
    fn fft_matvec_matches_direct() {
        let op = toeplitz(200);
        assert!(op.fft.is_some());
        let u: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
        let fast = op.matvec(&u);
        for (i, f) in fast.iter().enumerate() {
            assert!((f - op.row_apply(i, &u)).abs() < 1e-11);
        }
    }

    #[test]
    fn cg_and_cholesky_agree() {
        let op = toeplitz(40);
        let b: Vec<f64> = (0..40).map(|i| 1.0 + (i as f64).cos()).collect();
        let mut x = vec![0.0; 40];
        let stats = conjugate_gradient(
            |u, o| op.matvec_into(u, o),
            op.diag(),
            &b,
            &mut x,
            1e-13,
            500,
        );
        assert!(stats.residual <= 1e-13);
        let y = cholesky_solve(op.to_dense(), &b).unwrap();
        for (a, c) in x.iter().zip(&y) {
            assert!((a - c).abs() < 1e-11);
        }
    }

    #[test]
    fn power_iteration_bounds_spectrum() {
        let op = toeplitz(30);
        let lam = op.max_eigenvalue(200);
        let eig = op.to_dense().symmetric_eigenvalues();
        let top = eig.iter().cloned().fold(f64::MIN, f64::max);
        assert!(lam <= top * (1.0 + 1e-12) && lam > 0.95 * top);
        assert!(op.gershgorin_bound() >= top);
    }
}
