//! Translation-invariant kernels `K(y)` of order `2s`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Radial modulation `m(t) = mean + amplitude * cos(frequency * ln t + phase)`.
///
/// The logarithmic phase keeps `|m'(t)| t` bounded, so the perturbed kernel
/// `c m(|y|) |y|^{-n-2s}` satisfies the gradient growth bound, and a dilation
/// `y -> r y` only shifts the phase.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogModulation {
    pub mean: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl LogModulation {
    pub fn eval(&self, t: f64) -> f64 {
        self.mean + self.amplitude * (self.frequency * t.ln() + self.phase).cos()
    }

    fn min(&self) -> f64 {
        self.mean - self.amplitude.abs()
    }

    fn max(&self) -> f64 {
        self.mean + self.amplitude.abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum KernelKind {
    /// `K(y) = c |y|^{-(n+2s)}`.
    FractionalPower { c: f64 },
    /// `K(y) = c m(|y|) |y|^{-(n+2s)}`.
    PerturbedPower { c: f64, modulation: LogModulation },
    /// Order one, `L u = div(A grad u)` with symmetric positive-definite `A` (row major).
    LocalMatrix { a: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    order: f64,
    lambda: f64,
    big_lambda: f64,
    kind: KernelKind,
}

/// `C_{n,s}` of the classical fractional Laplacian normalization.
pub fn classical_constant(dim: usize, s: f64) -> f64 {
    let n = dim as f64;
    4f64.powf(s) * gamma(n / 2.0 + s) / (PI.powf(n / 2.0) * gamma(-s).abs())
}

impl KernelSpec {
    /// Validates and builds a kernel with explicit ellipticity bounds.
    pub fn new(order: f64, lambda: f64, big_lambda: f64, kind: KernelKind) -> Result<Self> {
        if !(order > 0.0 && order <= 1.0) {
            return Err(Error::InvalidKernel(format!(
                "order {order} outside (0, 1]"
            )));
        }
        if !(lambda > 0.0 && big_lambda >= lambda) {
            return Err(Error::InvalidKernel(format!(
                "ellipticity bounds must satisfy 0 < lambda <= Lambda, got {lambda}, {big_lambda}"
            )));
        }
        let local = matches!(kind, KernelKind::LocalMatrix { .. });
        if local != (order == 1.0) {
            return Err(Error::InvalidKernel(
                "order 1 is reserved for, and required by, the local matrix kind".into(),
            ));
        }
        match &kind {
            KernelKind::FractionalPower { c } if !(*c > 0.0) => {
                return Err(Error::InvalidKernel(format!(
                    "normalization {c} must be positive"
                )))
            }
            KernelKind::PerturbedPower { c, modulation } => {
                if !(*c > 0.0) || !(modulation.min() > 0.0) {
                    return Err(Error::InvalidKernel(
                        "perturbed kernel must stay positive".into(),
                    ));
                }
            }
            KernelKind::LocalMatrix { a } => {
                let (lo, _) = matrix_bounds(a)?;
                if !(lo > 0.0) {
                    return Err(Error::InvalidKernel(
                        "matrix is not positive definite".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(Self {
            order,
            lambda,
            big_lambda,
            kind,
        })
    }

    /// Fractional power kernel with unit normalization `c = 1`.
    pub fn fractional(s: f64) -> Result<Self> {
        Self::fractional_scaled(s, 1.0)
    }

    /// Fractional power kernel `c |y|^{-(n+2s)}`.
    ///
    /// `Lambda` also has to dominate the gradient growth constant `c (n+2s)`;
    /// we use the 2D value so the same spec is valid in both dimensions.
    pub fn fractional_scaled(s: f64, c: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidKernel(format!(
                "fractional order {s} outside (0, 1)"
            )));
        }
        Self::new(s, c, c * (2.0 + 2.0 * s), KernelKind::FractionalPower { c })
    }

    /// Fractional power kernel with the classical `(-Δ)^s` normalization in dimension `dim`.
    pub fn fractional_classical(s: f64, dim: usize) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidKernel(format!(
                "fractional order {s} outside (0, 1)"
            )));
        }
        Self::fractional_scaled(s, classical_constant(dim, s))
    }

    pub fn perturbed(s: f64, c: f64, modulation: LogModulation) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidKernel(format!(
                "fractional order {s} outside (0, 1)"
            )));
        }
        let grad = c
            * ((2.0 + 2.0 * s) * modulation.max()
                + (modulation.amplitude * modulation.frequency).abs());
        let lo = c * modulation.min();
        let hi = (c * modulation.max()).max(grad);
        Self::new(s, lo, hi, KernelKind::PerturbedPower { c, modulation })
    }

    /// Local kernel `div(A grad u)`; `a` is a row-major `n x n` symmetric matrix.
    pub fn local(a: Vec<f64>) -> Result<Self> {
        let (lo, hi) = matrix_bounds(&a)?;
        Self::new(1.0, lo, hi, KernelKind::LocalMatrix { a })
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn big_lambda(&self) -> f64 {
        self.big_lambda
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn is_local(&self) -> bool {
        matches!(self.kind, KernelKind::LocalMatrix { .. })
    }

    /// Nonlocal kernels this close to order one are accepted but poorly conditioned.
    pub fn is_ill_conditioned(&self) -> bool {
        !self.is_local() && self.order > 0.95
    }

    /// Radial profile `k(t)` with `K(y) = k(|y|)` in dimension `dim`; `None` for the local kind.
    pub fn radial(&self, t: f64, dim: usize) -> Option<f64> {
        let p = -(dim as f64) - 2.0 * self.order;
        match &self.kind {
            KernelKind::FractionalPower { c } => Some(c * t.powf(p)),
            KernelKind::PerturbedPower { c, modulation } => {
                Some(c * modulation.eval(t) * t.powf(p))
            }
            KernelKind::LocalMatrix { .. } => None,
        }
    }

    /// Evaluates `K(y)` for `y != 0`.
    pub fn eval(&self, y: &[f64]) -> Option<f64> {
        let t = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.radial(t, y.len())
    }

    /// `∫_a^b t^{beta-1} c m(t) dt` in closed form; `b = ∞` needs `beta < 0`, `a = 0` needs `beta > 0`.
    pub(crate) fn radial_moment(&self, beta: f64, a: f64, b: f64) -> f64 {
        let power = |t: f64| {
            if t.is_infinite() {
                0.0
            } else {
                t.powf(beta)
            }
        };
        match &self.kind {
            KernelKind::FractionalPower { c } => c * (power(b) - power(a)) / beta,
            KernelKind::PerturbedPower { c, modulation } => {
                let w = modulation.frequency;
                let prim = |t: f64| {
                    if t.is_infinite() || t == 0.0 {
                        return 0.0;
                    }
                    let th = w * t.ln() + modulation.phase;
                    t.powf(beta) * (beta * th.cos() + w * th.sin()) / (beta * beta + w * w)
                };
                c * (modulation.mean * (power(b) - power(a)) / beta
                    + modulation.amplitude * (prim(b) - prim(a)))
            }
            KernelKind::LocalMatrix { .. } => 0.0,
        }
    }

    /// The rescaled kernel `r^{n+2s} K(r y)`.
    pub fn rescale(&self, r: f64) -> Result<Self> {
        if !(r > 0.0) {
            return Err(Error::InvalidKernel(format!(
                "rescaling factor {r} must be positive"
            )));
        }
        let kind = match &self.kind {
            KernelKind::PerturbedPower { c, modulation } => KernelKind::PerturbedPower {
                c: *c,
                modulation: LogModulation {
                    phase: modulation.phase + modulation.frequency * r.ln(),
                    ..*modulation
                },
            },
            other => other.clone(),
        };
        Ok(Self {
            kind,
            ..self.clone()
        })
    }

    /// Samples the ellipticity, symmetry and gradient growth conditions in dimension `dim`.
    pub fn check_invariants(&self, dim: usize) -> Result<()> {
        if self.is_local() {
            if let KernelKind::LocalMatrix { a } = &self.kind {
                if a.len() != dim * dim {
                    return Err(Error::InvalidKernel(format!(
                        "matrix has {} entries, expected {}",
                        a.len(),
                        dim * dim
                    )));
                }
            }
            return Ok(());
        }
        let n = dim as f64;
        let e = n + 2.0 * self.order;
        let slack = 1e-10 * self.big_lambda;
        let angles = if dim == 1 { 1 } else { 16 };
        for k in 0..=80 {
            let t = 10f64.powf(-4.0 + 8.0 * k as f64 / 80.0);
            for j in 0..angles {
                let th = j as f64 * PI / angles as f64 + 0.1;
                let y: Vec<f64> = if dim == 1 {
                    vec![t]
                } else {
                    vec![t * th.cos(), t * th.sin()]
                };
                let neg: Vec<f64> = y.iter().map(|v| -v).collect();
                let kv = self.eval(&y).unwrap();
                let scaled = kv * t.powf(e);
                if scaled < self.lambda - slack || scaled > self.big_lambda + slack {
                    return Err(Error::InvalidKernel(format!(
                        "K(y)|y|^(n+2s) = {scaled} outside [{}, {}] at |y| = {t}",
                        self.lambda, self.big_lambda
                    )));
                }
                if self.eval(&neg).unwrap() != kv {
                    return Err(Error::InvalidKernel(format!("K is not even at |y| = {t}")));
                }
                let step = 1e-6 * t;
                let mut grad2 = 0.0;
                for d in 0..dim {
                    let mut p = y.clone();
                    let mut m = y.clone();
                    p[d] += step;
                    m[d] -= step;
                    let g = (self.eval(&p).unwrap() - self.eval(&m).unwrap()) / (2.0 * step);
                    grad2 += g * g;
                }
                let bound = grad2.sqrt() * t.powf(e + 1.0);
                if bound > self.big_lambda * (1.0 + 1e-5) {
                    return Err(Error::InvalidKernel(format!(
                        "|grad K||y|^(n+1+2s) = {bound} exceeds {} at |y| = {t}",
                        self.big_lambda
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Extreme eigenvalues of a symmetric 1x1 or 2x2 matrix.
fn matrix_bounds(a: &[f64]) -> Result<(f64, f64)> {
    match a.len() {
        1 => Ok((a[0], a[0])),
        4 => {
            if a[1] != a[2] {
                return Err(Error::InvalidKernel("matrix must be symmetric".into()));
            }
            let tr = a[0] + a[3];
            let det = a[0] * a[3] - a[1] * a[2];
            let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
            Ok((0.5 * tr - disc, 0.5 * tr + disc))
        }
        k => Err(Error::InvalidKernel(format!(
            "matrix with {k} entries is not 1x1 or 2x2"
        ))),
    }
}
