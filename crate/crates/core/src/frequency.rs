//! Weighted extension of a trace to the half-plane, the mollified obstacle extension,
//! and the frequency `Φ(r)` around a contact point.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid_kernel::GridFunction;
use crate::quadrature::gauss_legendre;

/// Default height of the extension strip.
pub const DEFAULT_HEIGHT: f64 = 1.0;
/// Default lateral half-width of the extension strip.
pub const DEFAULT_HALF_WIDTH: f64 = 2.0;

/// Field on `[-W, W] x [0, Y]`, extended evenly to `y < 0`.
#[derive(Clone, Debug, Serialize)]
pub struct ExtensionField {
    a: f64,
    hx: f64,
    hy: f64,
    half_width: f64,
    height: f64,
    nx: usize,
    ny: usize,
    /// Row-major, `values[j * nx + i]` at `(-W + i hx, j hy)`.
    values: Vec<f64>,
}

fn divisions(length: f64, step: f64, what: &str) -> Result<usize> {
    if !(step > 0.0 && step.is_finite() && length > 0.0) {
        return Err(Error::InvalidGrid(format!(
            "degenerate {what} spacing {step}"
        )));
    }
    let m = (length / step).round();
    if m < 2.0 || ((m * step - length) / length).abs() > 1e-9 {
        return Err(Error::InvalidGrid(format!(
            "{what} spacing {step} does not divide {length}"
        )));
    }
    Ok(m as usize)
}

fn check_weight(a: f64) -> Result<()> {
    if a > -1.0 && a < 1.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "weight exponent a = {a} outside (-1, 1)"
        )))
    }
}

impl ExtensionField {
    /// Samples a closed-form field on the layout.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(
        a: f64,
        spacing: (f64, f64),
        half_width: f64,
        height: f64,
        f: F,
    ) -> Result<Self> {
        check_weight(a)?;
        let px = divisions(2.0 * half_width, spacing.0, "horizontal")?;
        let py = divisions(height, spacing.1, "vertical")?;
        let (nx, ny) = (px + 1, py + 1);
        let mut values = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                values.push(f(-half_width + i as f64 * spacing.0, j as f64 * spacing.1));
            }
        }
        Ok(Self {
            a,
            hx: spacing.0,
            hy: spacing.1,
            half_width,
            height,
            nx,
            ny,
            values,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.hx, self.hy)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.hx
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    fn same_layout(&self, other: &Self) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.hx == other.hx
            && self.hy == other.hy
            && self.half_width == other.half_width
    }

    /// Bilinear interpolation; `y` is reflected evenly. `None` outside the strip.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let y = y.abs();
        let fx = (x + self.half_width) / self.hx;
        let fy = y / self.hy;
        if fx < 0.0 || fy < 0.0 || fx > (self.nx - 1) as f64 || fy > (self.ny - 1) as f64 {
            return None;
        }
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let (tx, ty) = (fx - i as f64, fy - j as f64);
        let v = |di: usize, dj: usize| self.at(i + di, j + dj);
        Some(
            (1.0 - ty) * ((1.0 - tx) * v(0, 0) + tx * v(1, 0))
                + ty * ((1.0 - tx) * v(0, 1) + tx * v(1, 1)),
        )
    }

    /// `self - other` on a shared layout.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if !self.same_layout(other) {
            return Err(Error::GridMismatch("extension fields on different layouts"));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(p, q)| p - q)
            .collect();
        Ok(Self {
            values,
            ..self.clone()
        })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| c * v).collect(),
            ..self.clone()
        }
    }
}

/// Value of a 1D grid function at `x`, by linear interpolation, using the tail beyond `R`.
fn sample_line(f: &GridFunction, x: f64) -> f64 {
    let grid = f.grid();
    let r = grid.exterior_radius();
    if x.abs() >= r {
        return f.tail().eval(x.abs());
    }
    let h = grid.h();
    let t = (x + r) / h;
    let i = (t.floor() as usize).min(grid.per_axis() - 2);
    let w = t - i as f64;
    (1.0 - w) * f.values()[i] + w * f.values()[i + 1]
}

/// In-place DST-I: `X_k = Σ_{i=1}^{m} x_i sin(π i k / (m + 1))`.
fn dst1(planner: &mut FftPlanner<f64>, x: &mut [f64]) {
    let m = x.len();
    let p = m + 1;
    let fft = planner.plan_fft_forward(2 * p);
    let mut buf = vec![Complex::new(0.0, 0.0); 2 * p];
    for i in 0..m {
        buf[i + 1].re = x[i];
        buf[2 * p - 1 - i].re = -x[i];
    }
    fft.process(&mut buf);
    for k in 0..m {
        x[k] = -0.5 * buf[k + 1].im;
    }
}

fn power_integral(e: f64, lo: f64, hi: f64) -> f64 {
    (hi.powf(e + 1.0) - lo.powf(e + 1.0)) / (e + 1.0)
}

/// Boundary values on the top and the sides of the strip.
pub type BoundaryData<'a> = &'a dyn Fn(f64, f64) -> f64;

/// Value at `(x, y)` of the `|y|^a`-harmonic extension of `trace` to the whole upper
/// half-plane, `C_s ∫ u(x + y tan τ) cos^{2s-1} τ dτ`.
///
/// Each half of `τ` is mapped by `π/2 - τ = (π/2) w^{1/(2s)}`, which absorbs the weight.
pub fn poisson_extension(trace: &GridFunction, s: f64, x: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return sample_line(trace, x);
    }
    let (gx, gw) = gauss_legendre(8);
    let panels = 96;
    let q = 1.0 / (2.0 * s);
    let mut total = 0.0;
    for p in 0..panels {
        let lo = p as f64 / panels as f64;
        let half = 0.5 / panels as f64;
        for (z, w) in gx.iter().zip(&gw) {
            let v = lo + half * (z + 1.0);
            let sigma = 0.5 * PI * v.powf(q);
            let dsigma = 0.5 * PI * q * v.powf(q - 1.0);
            let weight = sigma.sin().powf(2.0 * s - 1.0) * dsigma * w * half;
            let reach = y / sigma.tan();
            total += weight * (sample_line(trace, x + reach) + sample_line(trace, x - reach));
        }
    }
    let norm =
        statrs::function::gamma::gamma(0.5 + s) / (PI.sqrt() * statrs::function::gamma::gamma(s));
    norm * total
}

/// Solves `div(|y|^a ∇U) = 0` on `[-2, 2] x [0, Y]` with `U(x, 0) = trace(x)` and the
/// half-plane extension of the trace on the remaining sides.
pub fn extend_solution(
    trace: &GridFunction,
    s: f64,
    height: f64,
    spacing: (f64, f64),
) -> Result<ExtensionField> {
    if trace.tail().coeff != 0.0 && !(trace.tail().exponent < 2.0 * s) {
        return Err(Error::DivergentTail {
            exponent: trace.tail().exponent,
            limit: 2.0 * s,
        });
    }
    let boundary = |x: f64, y: f64| poisson_extension(trace, s, x, y);
    extend_on_strip(trace, s, height, DEFAULT_HALF_WIDTH, spacing, &boundary)
}

/// Finite volumes in `y`, with fluxes exact for `y`-profiles, and second differences in
/// `x`. The `x` direction is diagonalized by a sine transform and each mode solved by a
/// tridiagonal sweep.
pub fn extend_on_strip(
    trace: &GridFunction,
    s: f64,
    height: f64,
    half_width: f64,
    spacing: (f64, f64),
    boundary: BoundaryData,
) -> Result<ExtensionField> {
    if trace.grid().dim() != 1 {
        return Err(Error::Precondition(
            "the extension is implemented for one-dimensional traces".into(),
        ));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Precondition(format!("order {s} outside (0, 1)")));
    }
    let a = 1.0 - 2.0 * s;
    let mut field = ExtensionField::from_fn(a, spacing, half_width, height, |_, _| 0.0)?;
    let (nx, ny) = (field.nx, field.ny);
    let (hx, hy) = (field.hx, field.hy);
    let p = nx - 1;
    let m = ny - 1;
    for i in 0..nx {
        field.values[i] = sample_line(trace, field.x(i));
        field.values[m * nx + i] = boundary(field.x(i), height);
    }
    for j in 1..m {
        field.values[j * nx] = boundary(-half_width, field.y(j));
        field.values[j * nx + p] = boundary(half_width, field.y(j));
    }

    let ys: Vec<f64> = (0..ny).map(|j| j as f64 * hy).collect();
    let mass: Vec<f64> = (0..ny)
        .map(|j| power_integral(a, (ys[j] - 0.5 * hy).max(0.0), ys[j] + 0.5 * hy))
        .collect();
    let flux: Vec<f64> = (0..m)
        .map(|j| 1.0 / power_integral(-a, ys[j], ys[j + 1]))
        .collect();

    let mut planner = FftPlanner::new();
    let row_modes = |planner: &mut FftPlanner<f64>, j: usize, values: &[f64]| {
        let mut r = values[j * nx + 1..j * nx + p].to_vec();
        dst1(planner, &mut r);
        r
    };
    let bottom = row_modes(&mut planner, 0, &field.values);
    let top = row_modes(&mut planner, m, &field.values);
    // lateral values enter the first and last columns of the x second difference
    let side: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let mut r = vec![0.0; p - 1];
            if j > 0 {
                r[0] += field.values[j * nx];
                r[p - 2] += field.values[j * nx + p];
                dst1(&mut planner, &mut r);
            }
            r
        })
        .collect();

    // modes[k][jj] for rows j = jj + 1 in 1..m
    let rows = m - 1;
    let mut modes = vec![vec![0.0; rows]; p - 1];
    let mut cp = vec![0.0; rows];
    let mut dp = vec![0.0; rows];
    for k in 0..p - 1 {
        let lam = 4.0 / (hx * hx) * (PI * (k + 1) as f64 / (2.0 * p as f64)).sin().powi(2);
        for jj in 0..rows {
            let j = jj + 1;
            let (lower, upper) = (flux[j - 1], flux[j]);
            let diag = mass[j] * lam + lower + upper;
            let mut rhs = mass[j] * side[j][k] / (hx * hx);
            if j == 1 {
                rhs += lower * bottom[k];
            }
            if j == m - 1 {
                rhs += upper * top[k];
            }
            let sub = if j == 1 { 0.0 } else { -lower };
            let sup = if j == m - 1 { 0.0 } else { -upper };
            let (cprev, dprev) = if jj > 0 {
                (cp[jj - 1], dp[jj - 1])
            } else {
                (0.0, 0.0)
            };
            let denom = diag - sub * cprev;
            cp[jj] = sup / denom;
            dp[jj] = (rhs - sub * dprev) / denom;
        }
        let col = &mut modes[k];
        col[rows - 1] = dp[rows - 1];
        for jj in (0..rows - 1).rev() {
            col[jj] = dp[jj] - cp[jj] * col[jj + 1];
        }
    }
    let scale = 2.0 / p as f64;
    let mut row = vec![0.0; p - 1];
    for jj in 0..rows {
        for k in 0..p - 1 {
            row[k] = modes[k][jj];
        }
        dst1(&mut planner, &mut row);
        let j = jj + 1;
        for i in 1..p {
            field.values[j * nx + i] = scale * row[i - 1];
        }
    }
    Ok(field)
}

/// Kernel `η(z) = ∫ ρ(z, t) dt` of the bump `ρ(X) ∝ exp(-1/(1-|X|²))` and its second
/// derivative, tabulated on the quadrature nodes of `[-1, 1]`.
struct Mollifier {
    nodes: Vec<f64>,
    eta: Vec<f64>,
    eta_zz: Vec<f64>,
}

fn mollifier() -> &'static Mollifier {
    static CELL: OnceLock<Mollifier> = OnceLock::new();
    CELL.get_or_init(|| {
        let (gz, wz) = gauss_legendre(8);
        let (gt, wt) = gauss_legendre(48);
        let panels = 8;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for p in 0..panels {
            let lo = -1.0 + 2.0 * p as f64 / panels as f64;
            let half = 1.0 / panels as f64;
            for (x, w) in gz.iter().zip(&wz) {
                nodes.push(lo + half * (x + 1.0));
                weights.push(w * half);
            }
        }
        let mut eta = Vec::with_capacity(nodes.len());
        let mut eta_zz = Vec::with_capacity(nodes.len());
        for &z in &nodes {
            let reach = (1.0 - z * z).max(0.0).sqrt();
            let (mut e, mut ezz) = (0.0, 0.0);
            for (t, w) in gt.iter().zip(&wt) {
                let t = reach * t;
                let g = 1.0 - z * z - t * t;
                if g <= 1e-3 {
                    continue;
                }
                let rho = (-1.0 / g).exp();
                // ρ = exp(q(z)), q = -1/g: ρ'' = ρ (q'^2 + q'')
                let q1 = -2.0 * z / (g * g);
                let q2 = -2.0 / (g * g) - 8.0 * z * z / (g * g * g);
                e += w * reach * rho;
                ezz += w * reach * rho * (q1 * q1 + q2);
            }
            eta.push(e);
            eta_zz.push(ezz);
        }
        let mass: f64 = eta.iter().zip(&weights).map(|(e, w)| e * w).sum();
        let eta: Vec<f64> = eta
            .iter()
            .zip(&weights)
            .map(|(e, w)| e * w / mass)
            .collect();
        let eta_zz: Vec<f64> = eta_zz.iter().zip(&weights).map(|(e, w)| e * w).collect();
        // corrected so that constants are annihilated and ∫ z² η'' = 2 exactly
        let zeroth: f64 = eta_zz.iter().sum();
        let eta_zz: Vec<f64> = eta_zz
            .iter()
            .zip(&eta)
            .map(|(e, h)| e - zeroth * h)
            .collect();
        let moment: f64 = nodes.iter().zip(&eta_zz).map(|(z, e)| z * z * e).sum();
        let eta_zz = eta_zz.iter().map(|e| 2.0 * e / moment).collect();
        Mollifier { nodes, eta, eta_zz }
    })
}

/// One height of the sampled curvature bound `sup_x |∂²_x φ̃(x, y)|`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CurvatureSample {
    pub y: f64,
    pub max_second_derivative: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MollifiedObstacle {
    pub field: ExtensionField,
    /// Sampled on `|x| <= 1/2` for heights `y >= 4 hx`.
    pub curvature: Vec<CurvatureSample>,
    /// Log-log slope of the curvature samples against `y`.
    pub curvature_exponent: f64,
}

/// `φ̃(x, y) = (φ * ρ_|y|)(x)` on the layout of `like`, with `φ̃(x, 0) = φ(x)`.
pub fn mollified_obstacle_extension(
    phi: &GridFunction,
    like: &ExtensionField,
) -> Result<MollifiedObstacle> {
    if phi.grid().dim() != 1 {
        return Err(Error::Precondition(
            "the extension is implemented for one-dimensional obstacles".into(),
        ));
    }
    let moll = mollifier();
    let mut field = like.clone();
    let (nx, hx, hy, x0) = (field.nx, field.hx, field.hy, -field.half_width);
    let convolve = |weights: &[f64], x: f64, y: f64| -> f64 {
        moll.nodes
            .iter()
            .zip(weights)
            .map(|(z, w)| w * sample_line(phi, x - y * z))
            .sum()
    };
    field
        .values
        .par_chunks_mut(nx)
        .enumerate()
        .for_each(|(j, row)| {
            let y = j as f64 * hy;
            for (i, v) in row.iter_mut().enumerate() {
                let x = x0 + i as f64 * hx;
                *v = if j == 0 {
                    sample_line(phi, x)
                } else {
                    convolve(&moll.eta, x, y)
                };
            }
        });
    let curvature: Vec<CurvatureSample> = (1..field.ny)
        .into_par_iter()
        .map(|j| j as f64 * hy)
        .filter(|&y| y >= 4.0 * hx)
        .map(|y| {
            let sup = (0..nx)
                .map(|i| x0 + i as f64 * hx)
                .filter(|x| x.abs() <= 0.5)
                .fold(0.0f64, |m, x| {
                    m.max((convolve(&moll.eta_zz, x, y) / (y * y)).abs())
                });
            CurvatureSample {
                y,
                max_second_derivative: sup,
            }
        })
        .collect();
    let curvature_exponent = log_slope(
        &curvature.iter().map(|c| c.y).collect::<Vec<_>>(),
        &curvature
            .iter()
            .map(|c| c.max_second_derivative)
            .collect::<Vec<_>>(),
    );
    Ok(MollifiedObstacle {
        field,
        curvature,
        curvature_exponent,
    })
}

fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Parameters of `Φ(r) = ½ (r + C0 r^{1+ε}) d/dr log max{F(r), r^{2(1+α)}}`.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct FrequencyParams {
    pub alpha: f64,
    pub epsilon: f64,
    pub c0: f64,
    /// Largest admissible radius.
    pub r0: f64,
    /// Horizontal position of the contact point.
    pub center: f64,
}

impl FrequencyParams {
    /// `α = s + δ/2`, `ε = min(δ/4, 0.1)`, `C0 = 10`, `r0 = 1/4`, centered at the origin.
    pub fn defaults(s: f64, delta: f64) -> Self {
        Self {
            alpha: s + 0.5 * delta,
            epsilon: (0.25 * delta).min(0.1),
            c0: 10.0,
            r0: 0.25,
            center: 0.0,
        }
    }

    pub fn at(self, center: f64) -> Self {
        Self { center, ..self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Classification {
    Regular,
    Singular,
    Undetermined,
}

#[derive(Clone, Debug, Serialize)]
pub struct FrequencyReport {
    pub params: FrequencyParams,
    pub a: f64,
    pub radii: Vec<f64>,
    pub f_values: Vec<f64>,
    /// `r d/dr log max{F, r^{2(1+α)}} / 2`, the frequency without the `C0` correction.
    pub reduced: Vec<f64>,
    pub phi: Vec<f64>,
    /// Radii where the truncation `r^{2(1+α)}` won.
    pub truncated: Vec<bool>,
    /// `max(0, Φ(r_k) - Φ(r_{k+1}))`.
    pub monotonicity_defects: Vec<f64>,
    pub max_defect: f64,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
}

/// `n` radii in geometric progression from `lo` to `hi`.
pub fn geometric_radii(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// `F(r) = 2 ∫_0^π ũ(c + r cos θ, r sin θ)² sin^a θ dθ` by the trapezoid rule after
/// `θ = (π/2) v^{2/(1+a)}` on each half, which removes the endpoint weight.
fn boundary_energy(field: &ExtensionField, center: f64, r: f64) -> Option<f64> {
    let a = field.a;
    let p = 2.0 / (1.0 + a);
    let m = 512;
    let mut total = 0.0;
    for k in 0..=m {
        let v = k as f64 / m as f64;
        let w = if k == 0 || k == m { 0.5 } else { 1.0 } / m as f64;
        let theta = 0.5 * PI * v.powf(p);
        let jac = 0.5 * PI * p * v.powf(p - 1.0);
        let weight = if v == 0.0 {
            0.0
        } else {
            theta.sin().powf(a) * jac
        };
        for th in [theta, PI - theta] {
            let u = field.sample(center + r * th.cos(), r * th.sin())?;
            total += w * weight * u * u;
        }
    }
    Some(2.0 * total)
}

/// Frequency of `ũ = field - obstacle` around `(center, 0)`.
pub fn compute_frequency(
    field: &ExtensionField,
    obstacle: &ExtensionField,
    params: &FrequencyParams,
    radii: &[f64],
) -> Result<FrequencyReport> {
    let u = field.difference(obstacle)?;
    if radii.len() < 3 {
        return Err(Error::Insufficient(format!(
            "{} radii given, need at least 3",
            radii.len()
        )));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition(
            "radii must be strictly increasing".into(),
        ));
    }
    let rmax = params
        .r0
        .min(u.height)
        .min(u.half_width - params.center.abs());
    let rmin = 4.0 * u.hx;
    for &r in radii {
        if r < rmin * (1.0 - 1e-12) || r > rmax * (1.0 + 1e-12) {
            return Err(Error::RadiusOutOfRange {
                radius: r,
                min: rmin,
                max: rmax,
            });
        }
    }
    let at_center = u.sample(params.center, 0.0).unwrap_or(f64::NAN);
    let scale = u.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let floor = 4.0 * u.hx.powf(1.0 + 0.5 * (1.0 - u.a)) * scale;
    if !(at_center.abs() <= floor) {
        return Err(Error::Precondition(format!(
            "center {} is not a contact point: ũ = {at_center:e}",
            params.center
        )));
    }
    let mut warnings = Vec::new();
    let mut f_values = Vec::with_capacity(radii.len());
    let mut g = Vec::with_capacity(radii.len());
    let mut truncated = Vec::with_capacity(radii.len());
    for &r in radii {
        let f = boundary_energy(&u, params.center, r).ok_or(Error::RadiusOutOfRange {
            radius: r,
            min: rmin,
            max: rmax,
        })?;
        let cut = r.powf(2.0 * (1.0 + params.alpha));
        if !(f > 0.0) || f < f64::MIN_POSITIVE {
            warnings.push(format!("F underflow at r = {r}"));
        }
        truncated.push(!(f >= cut));
        f_values.push(f);
        g.push(f.max(cut).ln());
    }
    let lr: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let k = radii.len();
    let reduced: Vec<f64> = (0..k)
        .map(|i| {
            let (lo, hi) = if i == 0 {
                (0, 1)
            } else if i == k - 1 {
                (k - 2, k - 1)
            } else {
                (i - 1, i + 1)
            };
            0.5 * (g[hi] - g[lo]) / (lr[hi] - lr[lo])
        })
        .collect();
    let phi: Vec<f64> = reduced
        .iter()
        .zip(radii)
        .map(|(n, r)| n * (1.0 + params.c0 * r.powf(params.epsilon)))
        .collect();
    let monotonicity_defects: Vec<f64> = phi.windows(2).map(|w| (w[0] - w[1]).max(0.0)).collect();
    let max_defect = monotonicity_defects.iter().fold(0.0f64, |m, &d| m.max(d));
    Ok(FrequencyReport {
        params: *params,
        a: u.a,
        radii: radii.to_vec(),
        f_values,
        reduced,
        phi,
        truncated,
        monotonicity_defects,
        max_defect,
        warnings,
        classification: None,
    })
}

/// Limit of the frequency at the contact point and its verdict.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PointVerdict {
    pub classification: Classification,
    /// Extrapolated `Φ(0+)`.
    pub limit: f64,
    /// Growth exponent `σ` of `F ~ r^{2σ}` at the smallest radii.
    pub growth: f64,
}

/// Regular when `Φ(0+)` is within `0.1` of `1 + s`, singular when it reaches `1 + α - 0.05`.
///
/// `Φ(0+)` is extrapolated linearly in `r` from the reduced frequency at the three
/// smallest radii, or read off directly where the truncation is active. The growth of
/// `F` must agree with the verdict: no faster than `r^{1+s}` at regular points, faster
/// at singular ones.
pub fn classify_point(report: &FrequencyReport, s: f64, alpha: f64) -> Result<PointVerdict> {
    let k = report.radii.len();
    if k < 6 {
        return Err(Error::Insufficient(format!(
            "{k} radii in the report, need at least 6"
        )));
    }
    let r = &report.radii[..3];
    let n = &report.reduced[..3];
    let mr = r.iter().sum::<f64>() / 3.0;
    let mn = n.iter().sum::<f64>() / 3.0;
    let sxy: f64 = r.iter().zip(n).map(|(a, b)| (a - mr) * (b - mn)).sum();
    let sxx: f64 = r.iter().map(|a| (a - mr).powi(2)).sum();
    // the truncation persists below the smallest radius once it holds at the two smallest
    let limit = if report.truncated[0] && report.truncated[1] {
        report.reduced[0]
    } else {
        mn - sxy / sxx * mr
    };
    let growth = 0.5 * log_slope(&report.radii[..3], &report.f_values[..3]);
    let classification = if (limit - (1.0 + s)).abs() <= 0.1 && (growth - (1.0 + s)).abs() <= 0.15 {
        Classification::Regular
    } else if limit >= 1.0 + alpha - 0.05 && growth > 1.0 + s + 0.05 {
        Classification::Singular
    } else {
        Classification::Undetermined
    };
    Ok(PointVerdict {
        classification,
        limit,
        growth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_kernel::{Grid, TailModel, DEFAULT_EXTERIOR_RADIUS};
    use std::sync::Arc;

    fn line(n: usize, f: impl Fn(f64) -> f64) -> GridFunction {
        let g = Arc::new(Grid::with_interior_nodes(1, n, DEFAULT_EXTERIOR_RADIUS).unwrap());
        GridFunction::from_fn(g, TailModel::ZERO, |p| f(p[0])).unwrap()
    }

    #[test]
    fn dst_is_own_inverse_up_to_scale() {
        let mut planner = FftPlanner::new();
        let x: Vec<f64> = (0..31)
            .map(|i| (i as f64 * 0.7).sin() + 0.1 * i as f64)
            .collect();
        let mut y = x.clone();
        dst1(&mut planner, &mut y);
        let direct: f64 = (1..=31)
            .map(|i| x[i - 1] * (PI * i as f64 * 3.0 / 32.0).sin())
            .sum();
        assert!((y[2] - direct).abs() < 1e-12);
        dst1(&mut planner, &mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b * 2.0 / 32.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constants_and_linear_traces_are_exact() {
        let h = 1.0 / 64.0;
        for s in [0.3, 0.5, 0.8] {
            let one = extend_solution(
                &line(127, |_| 1.0).with_tail(TailModel::constant(1.0)),
                s,
                1.0,
                (h, h),
            )
            .unwrap();
            assert!(one.values().iter().all(|v| (v - 1.0).abs() < 1e-8));
        }
        let lin = extend_on_strip(&line(127, |x| x), 0.5, 1.0, 2.0, (h, h), &|x, _| x).unwrap();
        for j in 0..lin.shape().1 {
            for i in 0..lin.shape().0 {
                assert!((lin.at(i, j) - lin.x(i)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn poisson_extension_reproduces_constants() {
        let one = line(63, |_| 1.0).with_tail(TailModel::constant(1.0));
        for s in [0.2, 0.5, 0.9] {
            for (x, y) in [(0.0, 0.01), (1.9, 0.5), (-2.0, 1.0)] {
                assert!(
                    (poisson_extension(&one, s, x, y) - 1.0).abs() < 1e-8,
                    "{s} {x} {y}"
                );
            }
        }
    }

    #[test]
    fn rejects_bad_weight_and_spacing() {
        assert!(ExtensionField::from_fn(1.0, (0.1, 0.1), 2.0, 1.0, |_, _| 0.0).is_err());
        assert!(ExtensionField::from_fn(0.0, (0.3, 0.1), 2.0, 1.0, |_, _| 0.0).is_err());
    }

    #[test]
    fn mollifier_has_unit_mass_and_zero_first_moment() {
        let m = mollifier();
        let mass: f64 = m.eta.iter().sum();
        let first: f64 = m.nodes.iter().zip(&m.eta).map(|(z, w)| z * w).sum();
        let second_of_zz: f64 = m.nodes.iter().zip(&m.eta_zz).map(|(z, w)| z * z * w).sum();
        assert!((mass - 1.0).abs() < 1e-14 && first.abs() < 1e-14);
        // ∫ z² η'' = 2 ∫ η
        let zeroth_of_zz: f64 = m.eta_zz.iter().sum();
        assert!(
            (second_of_zz - 2.0).abs() < 1e-12 && zeroth_of_zz.abs() < 1e-12,
            "{second_of_zz} {zeroth_of_zz}"
        );
    }
}
