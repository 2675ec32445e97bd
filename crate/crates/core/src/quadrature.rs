//! Gauss–Legendre rules and a few closed-form moments used by the assembly.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integrates `f` over `[a, b]` with an `n`-point Gauss–Legendre rule.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| wi * f(mid + half * xi))
        .sum::<f64>()
        * half
}

/// Composite Gauss–Legendre over `pieces` equal subintervals.
pub fn integrate_composite<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    n: usize,
    pieces: usize,
) -> f64 {
    let (x, w) = gauss_legendre(n);
    let step = (b - a) / pieces as f64;
    let mut total = 0.0;
    for p in 0..pieces {
        let lo = a + p as f64 * step;
        let half = 0.5 * step;
        let mid = lo + half;
        total += x
            .iter()
            .zip(&w)
            .map(|(&xi, &wi)| wi * f(mid + half * xi))
            .sum::<f64>()
            * half;
    }
    total
}

/// Normalized bump `exp(-1/(1-z^2))` on `(-1, 1)` with unit mass.
#[derive(Clone, Debug)]
pub struct Bump {
    scale: f64,
}

impl Default for Bump {
    fn default() -> Self {
        let mass = integrate_composite(Self::raw, -1.0, 1.0, 20, 16);
        Self { scale: 1.0 / mass }
    }
}

impl Bump {
    fn raw(z: f64) -> f64 {
        if z.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - z * z)).exp()
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.scale * Self::raw(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_on_polynomials() {
        let (x, w) = gauss_legendre(5);
        // degree 9 is the highest exact degree for 5 points
        let approx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(8)).sum();
        assert!((approx - 2.0 / 9.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn bump_has_unit_mass() {
        let b = Bump::default();
        let m = integrate_composite(|z| b.eval(z), -1.0, 1.0, 24, 32);
        assert!((m - 1.0).abs() < 1e-12);
        assert_eq!(b.eval(1.0), 0.0);
    }
}
