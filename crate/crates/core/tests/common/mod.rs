//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use membranes::energy::ProblemSpec;
use membranes::grid_kernel::{
    DiscreteNonlocalOperator, Grid, GridFunction, KernelSpec, TailModel, DEFAULT_EXTERIOR_RADIUS,
};

pub fn grid1(nodes: usize) -> Arc<Grid> {
    Arc::new(Grid::with_interior_nodes(1, nodes, DEFAULT_EXTERIOR_RADIUS).unwrap())
}

pub fn field(grid: &Arc<Grid>, f: impl Fn(f64) -> f64) -> GridFunction {
    GridFunction::from_fn(grid.clone(), TailModel::ZERO, |p| f(p[0])).unwrap()
}

pub fn field_with_tail(grid: &Arc<Grid>, tail: TailModel, f: impl Fn(f64) -> f64) -> GridFunction {
    GridFunction::from_fn(grid.clone(), tail, |p| f(p[0])).unwrap()
}

fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson on `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(&f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Nodes and weights of the `m`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    (0..m)
        .map(|k| {
            let mut x = (PI * (k as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=m {
                    let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// `PV ∫ (w(x + t) - w(x)) c |t|^{-1-2s} dt` for `w` equal to `far` when `|x ± t| > reach`.
///
/// Folded to `t > 0`; 16-point Gauss-Legendre on panels graded geometrically towards
/// `t = 0` and towards the kinks `|x ± t| ∈ {1, reach}`; analytic far field. On
/// `[0, EPS]` the second difference is replaced by its Taylor term `w''(x) t^2`.
pub fn pv_fractional_1d(
    w: impl Fn(f64) -> f64,
    x: f64,
    s: f64,
    c: f64,
    far: f64,
    reach: f64,
) -> f64 {
    let big_t = reach + x.abs() + 1.0;
    let integrand = |t: f64| (w(x + t) + w(x - t) - 2.0 * w(x)) * c * t.powf(-1.0 - 2.0 * s);
    let mut special = vec![0.0];
    for k in [1.0, -1.0, reach, -reach] {
        let t = (k - x).abs();
        if t > 0.0 && t < big_t {
            special.push(t);
        }
    }
    const EPS: f64 = 1e-3;
    let mut breaks = vec![EPS, big_t];
    for &p in &special {
        breaks.push(p.max(EPS));
        for j in 0..60 {
            let d = 0.5f64.powi(j);
            for q in [p - d, p + d] {
                if q > EPS && q < big_t {
                    breaks.push(q);
                }
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-300);
    let rule = gauss_legendre(16);
    let mut total = 0.0;
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        total += half * rule.iter().map(|&(xi, wi)| wi * integrand(mid + half * xi)).sum::<f64>();
    }
    let delta = 1e-4;
    let w2 = (w(x + delta) + w(x - delta) - 2.0 * w(x)) / (delta * delta);
    let near = c * w2 * EPS.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    near + total + 2.0 * c * (far - w(x)) * big_t.powf(-2.0 * s) / (2.0 * s)
}

/// `∫_{B_1} dx / (1 + |x|^{1+2s})` in 1D by adaptive Simpson.
pub fn weighted_ball_mass_1d(s: f64) -> f64 {
    2.0 * adaptive_simpson(|x| 1.0 / (1.0 + x.powf(1.0 + 2.0 * s)), 0.0, 1.0, 1e-14)
}

/// Explicit double sum `h Σ_{i≠j, one interior} ½ W_ij (u_i - u_j)(v_i - v_j) + h Σ_i τ_i u_i v_i`
/// for zero-tail functions.
pub fn naive_inner_product(
    op: &DiscreteNonlocalOperator,
    u: &GridFunction,
    v: &GridFunction,
) -> f64 {
    let g = op.grid();
    let n = g.len();
    let (uv, vv) = (u.values(), v.values());
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j || (!g.is_interior(i) && !g.is_interior(j)) {
                continue;
            }
            let w = if g.is_interior(i) {
                op.weight(i, j)
            } else {
                op.weight(j, i)
            };
            total += 0.5 * w * (uv[i] - uv[j]) * (vv[i] - vv[j]);
        }
    }
    for (slot, &i) in g.interior().iter().enumerate() {
        total += op.tail_coefficients()[slot] * uv[i] * vv[i];
    }
    total * g.cell_volume()
}

/// `Re((x + i|y|)^σ)`, homogeneous of degree `σ` and even in `y`.
pub fn homogeneous(sigma: f64, x: f64, y: f64) -> f64 {
    let r = x.hypot(y.abs());
    if r == 0.0 {
        return 0.0;
    }
    let theta = y.abs().atan2(x);
    r.powf(sigma) * (sigma * theta).cos()
}

/// `F(r)` of [`homogeneous`] at `a = 0`: `2 ∫_0^π r^{2σ} cos²(σθ) dθ`.
pub fn homogeneous_boundary_energy(sigma: f64, r: f64) -> f64 {
    let integral = 0.5 * PI + (2.0 * sigma * PI).sin() / (4.0 * sigma);
    2.0 * r.powf(2.0 * sigma) * integral
}

/// Two-membranes problem with constant exterior data.
pub fn constant_data_problem(
    grid: &Arc<Grid>,
    s1: f64,
    s2: f64,
    f1: impl Fn(f64) -> f64,
    f2: impl Fn(f64) -> f64,
    e1: f64,
    e2: f64,
) -> ProblemSpec {
    ProblemSpec::new(
        KernelSpec::fractional(s1).unwrap(),
        KernelSpec::fractional(s2).unwrap(),
        field(grid, f1),
        field(grid, f2),
        GridFunction::constant(grid.clone(), e1),
        GridFunction::constant(grid.clone(), e2),
    )
    .unwrap()
}

/// `spec` with both exterior data raised by `lift` and both forcings lowered by `push`.
pub fn raised(spec: &ProblemSpec, lift: f64, push: f64) -> ProblemSpec {
    let shift = |g: &GridFunction, c: f64| {
        let tail = g.tail();
        let tail = if tail.coeff == 0.0 && c == 0.0 {
            tail
        } else {
            TailModel::constant(tail.eval(1.0) + c)
        };
        GridFunction::new(
            g.grid().clone(),
            g.values().iter().map(|v| v + c).collect(),
            tail,
        )
        .unwrap()
    };
    ProblemSpec::new(
        spec.kernel1.clone(),
        spec.kernel2.clone(),
        shift(&spec.f1, -push),
        shift(&spec.f2, -push),
        shift(&spec.exterior1, lift),
        shift(&spec.exterior2, lift),
    )
    .unwrap()
}
