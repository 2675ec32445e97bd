//! Quadrature assembly of `L u(x) = PV ∫ (u(y) - u(x)) K(y - x) dy` on a [`Grid`].
//!
//! Each grid node owns the cell of side `h` around it, and the weight of node `j`
//! in the row of `x_i` is the exact integral of `K(· - x_i)` over that cell. The
//! cell containing `x_i` itself is replaced by the second-order Taylor term of the
//! increment, which becomes an extra weight on the axis neighbours. Beyond the
//! box `[-R - h/2, R + h/2]^n` the function follows its [`TailModel`] and the
//! integral is done by one-dimensional quadrature (or exactly for constant tails).

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::function::{GridFunction, TailModel};
use super::grid::Grid;
use super::kernel::{KernelKind, KernelSpec};
use crate::error::{Error, Result};
use crate::linalg::{Coupling, InteriorOperator};
use crate::quadrature::gauss_legendre;

#[derive(Clone, Debug, Serialize, Deserialize)]
enum Stencil {
    /// Weight by offset `|i - j|`; index 0 unused.
    Radial1D(Vec<f64>),
    /// Weight by `|dx| + width * |dy|`.
    Radial2D { w: Vec<f64>, width: usize },
    /// Short explicit stencil (local kind).
    Sparse(Vec<([i64; 2], f64)>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscreteNonlocalOperator {
    grid: Arc<Grid>,
    kernel: KernelSpec,
    stencil: Stencil,
    singular: f64,
    tau: Vec<f64>,
    diag: Vec<f64>,
}

/// Assembles the operator for `kernel` on `grid`.
pub fn build_operator(grid: &Arc<Grid>, kernel: &KernelSpec) -> Result<DiscreteNonlocalOperator> {
    DiscreteNonlocalOperator::new(grid.clone(), kernel.clone())
}

/// Applies the operator; exterior nodes of the result hold `NaN` ("not evaluated").
pub fn apply_operator(op: &DiscreteNonlocalOperator, f: &GridFunction) -> Result<GridFunction> {
    op.apply(f)
}

impl DiscreteNonlocalOperator {
    pub fn new(grid: Arc<Grid>, kernel: KernelSpec) -> Result<Self> {
        let s = kernel.order();
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::InvalidKernel(format!("order {s} outside (0, 1]")));
        }
        if grid.exterior_radius() < 2.0 {
            return Err(Error::InvalidGrid("exterior radius below 2".into()));
        }
        let dim = grid.dim();
        let h = grid.h();
        let (stencil, singular) = match kernel.kind() {
            KernelKind::LocalMatrix { a } => {
                if a.len() != dim * dim {
                    return Err(Error::InvalidKernel(format!(
                        "{}-entry matrix on a {dim}-dimensional grid",
                        a.len()
                    )));
                }
                (Stencil::Sparse(local_stencil(a, dim, h)), 0.0)
            }
            _ if dim == 1 => {
                let reach = grid.per_axis() - 1;
                let mut w = vec![0.0; reach + 1];
                for (m, wm) in w.iter_mut().enumerate().skip(1) {
                    let m = m as f64;
                    *wm = kernel.radial_moment(-2.0 * s, (m - 0.5) * h, (m + 0.5) * h);
                }
                let singular = kernel.radial_moment(2.0 - 2.0 * s, 0.0, 0.5 * h) / (h * h);
                w[1] += singular;
                (Stencil::Radial1D(w), singular)
            }
            _ => {
                let width = grid.per_axis();
                let w = cell_table_2d(&kernel, h, width);
                let (x, wq) = gauss_legendre(24);
                let quarter = PI / 4.0;
                let mut moment = 0.0;
                for (xi, wi) in x.iter().zip(&wq) {
                    let th = quarter * 0.5 * (xi + 1.0);
                    moment += wi * kernel.radial_moment(2.0 - 2.0 * s, 0.0, 0.5 * h / th.cos());
                }
                moment *= 0.5 * quarter;
                let singular = 2.0 * moment / (h * h);
                let mut w = w;
                w[1] += singular;
                w[width] += singular;
                (Stencil::Radial2D { w, width }, singular)
            }
        };
        let mut op = Self {
            grid,
            kernel,
            stencil,
            singular,
            tau: Vec::new(),
            diag: Vec::new(),
        };
        op.tau = match op.stencil {
            Stencil::Sparse(_) => vec![0.0; op.grid.interior_count()],
            _ => op
                .grid
                .interior()
                .par_iter()
                .map(|&i| op.tail_mass(op.grid.point(i)))
                .collect(),
        };
        op.diag = (0..op.grid.interior_count())
            .into_par_iter()
            .map(|slot| {
                let mut d = op.tau[slot];
                op.visit_row(slot, |_, w| d += w);
                d
            })
            .collect();
        Ok(op)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// Extra weight on each axis neighbour replacing the singular cell.
    pub fn singular_coefficient(&self) -> f64 {
        self.singular
    }

    /// `∫ K(y - x_i) dy` over the region beyond the truncated box, per interior slot.
    pub fn tail_coefficients(&self) -> &[f64] {
        &self.tau
    }

    /// Total row mass `Σ_j W_ij + tail`, per interior slot.
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Weight coupling grid nodes `i` and `j`, `i != j`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (ax, ay) = self.grid.axis_indices(i);
        let (bx, by) = self.grid.axis_indices(j);
        self.offset_weight(bx as i64 - ax as i64, by as i64 - ay as i64)
    }

    fn offset_weight(&self, dx: i64, dy: i64) -> f64 {
        match &self.stencil {
            Stencil::Radial1D(w) => w.get(dx.unsigned_abs() as usize).copied().unwrap_or(0.0),
            Stencil::Radial2D { w, width } => {
                let (ux, uy) = (dx.unsigned_abs() as usize, dy.unsigned_abs() as usize);
                if ux >= *width || uy >= *width {
                    0.0
                } else {
                    w[ux + width * uy]
                }
            }
            Stencil::Sparse(list) => list
                .iter()
                .find(|(d, _)| d[0] == dx && d[1] == dy)
                .map_or(0.0, |(_, w)| *w),
        }
    }

    /// Calls `f(j, W_ij)` for every grid node `j != i` with a nonzero weight, `i` the node of `slot`.
    pub(crate) fn visit_row<F: FnMut(usize, f64)>(&self, slot: usize, mut f: F) {
        let g = &*self.grid;
        let i = g.interior()[slot];
        let (ix, iy) = g.axis_indices(i);
        let n = g.per_axis() as i64;
        match &self.stencil {
            Stencil::Radial1D(w) => {
                for j in 0..g.per_axis() {
                    if j != ix {
                        f(j, w[j.abs_diff(ix)]);
                    }
                }
            }
            Stencil::Radial2D { w, width } => {
                for jy in 0..g.per_axis() {
                    let row = width * jy.abs_diff(iy);
                    for jx in 0..g.per_axis() {
                        if jx != ix || jy != iy {
                            f(g.node_index(jx, jy), w[row + jx.abs_diff(ix)]);
                        }
                    }
                }
            }
            Stencil::Sparse(list) => {
                for (d, wv) in list {
                    let jx = ix as i64 + d[0];
                    let jy = iy as i64 + d[1];
                    if (0..n).contains(&jx) && (0..n).contains(&jy) {
                        f(g.node_index(jx as usize, jy as usize), *wv);
                    }
                }
            }
        }
    }

    /// Explicit row of interior slot `slot` as `(grid index, weight)` pairs.
    pub fn row_weights(&self, slot: usize) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.visit_row(slot, |j, w| {
            if w != 0.0 {
                out.push((j, w))
            }
        });
        out
    }

    /// `∫ tail(y) K(y - x_i) dy` beyond the box, per interior slot.
    pub fn tail_forcing(&self, tail: &TailModel) -> Result<Vec<f64>> {
        let m = self.grid.interior_count();
        if matches!(self.stencil, Stencil::Sparse(_)) || tail.coeff == 0.0 {
            return Ok(vec![0.0; m]);
        }
        tail.check_integrable(2.0 * self.kernel.order())?;
        if tail.exponent == 0.0 {
            return Ok(self.tau.iter().map(|t| tail.coeff * t).collect());
        }
        let rule = TailRule::new(2.0 * self.kernel.order() - tail.exponent);
        Ok(self
            .grid
            .interior()
            .par_iter()
            .map(|&i| self.tail_moment(self.grid.point(i), tail, &rule))
            .collect())
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if !(Arc::ptr_eq(f.grid(), &self.grid) || **f.grid() == *self.grid) {
            return Err(Error::GridMismatch(
                "operator and function live on different grids",
            ));
        }
        let b = self.tail_forcing(&f.tail())?;
        let u = f.values();
        let rows: Vec<f64> = (0..self.grid.interior_count())
            .into_par_iter()
            .map(|slot| {
                let ui = u[self.grid.interior()[slot]];
                let mut acc = 0.0;
                self.visit_row(slot, |j, w| acc += w * (u[j] - ui));
                acc + (b[slot] - self.tau[slot] * ui)
            })
            .collect();
        let mut out = vec![f64::NAN; self.grid.len()];
        for (&i, v) in self.grid.interior().iter().zip(rows) {
            out[i] = v;
        }
        Ok(GridFunction::from_raw(
            self.grid.clone(),
            out,
            TailModel::ZERO,
        ))
    }

    /// The interior matrix `A` with `L u = g - A u` on interior nodes.
    pub fn interior_operator(&self) -> InteriorOperator {
        let g = &*self.grid;
        let n = g.interior_count();
        let coupling = match &self.stencil {
            Stencil::Radial1D(w) => Coupling::Toeplitz(w[..n.min(w.len())].to_vec()),
            Stencil::Radial2D { w, width } => Coupling::Table2D {
                w: Arc::new(w.clone()),
                width: *width,
                coords: g
                    .interior()
                    .iter()
                    .map(|&i| {
                        let (x, y) = g.axis_indices(i);
                        [x, y]
                    })
                    .collect(),
            },
            Stencil::Sparse(_) => Coupling::Sparse(
                (0..n)
                    .map(|slot| {
                        let mut row = Vec::new();
                        self.visit_row(slot, |j, w| {
                            if let Some(k) = g.interior_slot(j) {
                                row.push((k, w));
                            }
                        });
                        row
                    })
                    .collect(),
            ),
        };
        InteriorOperator::new(self.diag.clone(), coupling)
    }

    /// `g_i = Σ_{j exterior} W_ij u_j + tail forcing`, the exterior contribution per interior slot.
    pub fn exterior_forcing(&self, data: &GridFunction) -> Result<Vec<f64>> {
        let mut outside = data.clone();
        for &i in self.grid.interior() {
            outside.values_mut()[i] = 0.0;
        }
        Ok(self.apply(&outside)?.interior_values())
    }

    /// Stable key for the binary operator cache.
    pub fn cache_key(grid: &Grid, kernel: &KernelSpec) -> String {
        let mut hasher = Sha256::new();
        hasher.update(grid.content_hash().as_bytes());
        hasher.update(serde_json::to_vec(kernel).unwrap_or_default());
        hasher.update(b"operator-v1");
        hex::encode(hasher.finalize())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        bincode::serialize(self).map_err(|e| Error::Cache(e.to_string()))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        bincode::deserialize(bytes).map_err(|e| Error::Cache(e.to_string()))
    }

    fn boxed_radius(&self) -> f64 {
        self.grid.exterior_radius() + 0.5 * self.grid.h()
    }

    fn tail_mass(&self, x: [f64; 2]) -> f64 {
        let s = self.kernel.order();
        let rr = self.boxed_radius();
        if self.grid.dim() == 1 {
            self.kernel
                .radial_moment(-2.0 * s, rr - x[0], f64::INFINITY)
                + self
                    .kernel
                    .radial_moment(-2.0 * s, rr + x[0], f64::INFINITY)
        } else {
            let (th, wt) = arc_rule(x, rr);
            th.iter()
                .zip(&wt)
                .map(|(&t, &w)| {
                    w * self
                        .kernel
                        .radial_moment(-2.0 * s, box_exit(x, rr, t), f64::INFINITY)
                })
                .sum()
        }
    }

    fn tail_moment(&self, x: [f64; 2], tail: &TailModel, rule: &TailRule) -> f64 {
        let rr = self.boxed_radius();
        let dim = self.grid.dim();
        let k = |t: f64| self.kernel.radial(t, dim).unwrap_or(0.0);
        if dim == 1 {
            let mut acc = 0.0;
            for (&v, &w) in rule.v.iter().zip(&rule.w) {
                let y = rr * v.powf(-rule.gamma);
                let jac = rule.gamma * rr * v.powf(-rule.gamma - 1.0);
                acc += w * jac * tail.eval(y) * (k(y - x[0]) + k(y + x[0]));
            }
            acc
        } else {
            let (th, wt) = arc_rule(x, rr);
            let mut acc = 0.0;
            for (&t, &wa) in th.iter().zip(&wt) {
                let rho = box_exit(x, rr, t);
                let (c, sn) = (t.cos(), t.sin());
                let mut inner = 0.0;
                for (&v, &w) in rule.v.iter().zip(&rule.w) {
                    let r = rho * v.powf(-rule.gamma);
                    let jac = rule.gamma * rho * v.powf(-rule.gamma - 1.0);
                    let (px, py) = (x[0] + r * c, x[1] + r * sn);
                    inner += w * jac * tail.eval((px * px + py * py).sqrt()) * k(r) * r;
                }
                acc += wa * inner;
            }
            acc
        }
    }
}

/// Gauss–Legendre on geometrically graded pieces of `(0, 1]` for the substitution
/// `t = rho v^{-gamma}`, `gamma = 1/(2s - p)`, which makes tail integrands bounded.
struct TailRule {
    gamma: f64,
    v: Vec<f64>,
    w: Vec<f64>,
}

impl TailRule {
    fn new(decay: f64) -> Self {
        let (x, wq) = gauss_legendre(8);
        let mut v = Vec::new();
        let mut w = Vec::new();
        for k in 0..40 {
            let hi = 0.5f64.powi(k);
            let lo = 0.5 * hi;
            let half = 0.5 * (hi - lo);
            for (xi, wi) in x.iter().zip(&wq) {
                v.push(lo + half * (xi + 1.0));
                w.push(wi * half);
            }
        }
        Self {
            gamma: 1.0 / decay,
            v,
            w,
        }
    }
}

/// Angular Gauss–Legendre rule on `[0, 2π)` about `x`, split at the corners of `[-rr, rr]^2`.
pub(crate) fn arc_rule(x: [f64; 2], rr: f64) -> (Vec<f64>, Vec<f64>) {
    let mut corners: Vec<f64> = [(rr, rr), (-rr, rr), (-rr, -rr), (rr, -rr)]
        .iter()
        .map(|&(cx, cy)| (cy - x[1]).atan2(cx - x[0]).rem_euclid(2.0 * PI))
        .collect();
    corners.sort_by(|a, b| a.total_cmp(b));
    let (gx, gw) = gauss_legendre(24);
    let mut th = Vec::with_capacity(96);
    let mut wt = Vec::with_capacity(96);
    for k in 0..4 {
        let a = corners[k];
        let b = if k == 3 {
            corners[0] + 2.0 * PI
        } else {
            corners[k + 1]
        };
        let half = 0.5 * (b - a);
        for (xi, wi) in gx.iter().zip(&gw) {
            th.push(a + half * (xi + 1.0));
            wt.push(wi * half);
        }
    }
    (th, wt)
}

/// Distance from `x` along direction `theta` to the boundary of `[-rr, rr]^2`.
pub(crate) fn box_exit(x: [f64; 2], rr: f64, theta: f64) -> f64 {
    let d = [theta.cos(), theta.sin()];
    let mut t = f64::INFINITY;
    for k in 0..2 {
        if d[k] > 1e-300 {
            t = t.min((rr - x[k]) / d[k]);
        } else if d[k] < -1e-300 {
            t = t.min((-rr - x[k]) / d[k]);
        }
    }
    t
}

fn local_stencil(a: &[f64], dim: usize, h: f64) -> Vec<([i64; 2], f64)> {
    let h2 = h * h;
    if dim == 1 {
        return vec![([-1, 0], a[0] / h2), ([1, 0], a[0] / h2)];
    }
    let mut out = vec![
        ([-1, 0], a[0] / h2),
        ([1, 0], a[0] / h2),
        ([0, -1], a[3] / h2),
        ([0, 1], a[3] / h2),
    ];
    if a[1] != 0.0 {
        let m = a[1] / (2.0 * h2);
        out.extend([([1, 1], m), ([-1, -1], m), ([1, -1], -m), ([-1, 1], -m)]);
    }
    out
}

/// Cell integrals `∫_cell K` for offsets `0 <= dx, dy < width`, filled from one octant.
fn cell_table_2d(kernel: &KernelSpec, h: f64, width: usize) -> Vec<f64> {
    let kernel_at = |zx: f64, zy: f64| {
        kernel
            .radial(h * (zx * zx + zy * zy).sqrt(), 2)
            .unwrap_or(0.0)
    };
    let rules: Vec<(Vec<f64>, Vec<f64>)> = [4usize, 6].iter().map(|&n| gauss_legendre(n)).collect();
    let cells: Vec<(usize, usize)> = (0..width)
        .flat_map(|dx| (0..=dx).map(move |dy| (dx, dy)))
        .filter(|&c| c != (0, 0))
        .collect();
    let values: Vec<f64> = cells
        .par_iter()
        .map(|&(dx, dy)| {
            let m = dx.max(dy);
            let (rule, subs) = if m <= 3 {
                (&rules[1], 8)
            } else if m <= 10 {
                (&rules[1], 2)
            } else {
                (&rules[0], 1)
            };
            let (gx, gw) = rule;
            let step = 1.0 / subs as f64;
            let mut acc = 0.0;
            for sx in 0..subs {
                for sy in 0..subs {
                    let x0 = dx as f64 - 0.5 + sx as f64 * step;
                    let y0 = dy as f64 - 0.5 + sy as f64 * step;
                    for (xa, wa) in gx.iter().zip(gw) {
                        for (xb, wb) in gx.iter().zip(gw) {
                            let zx = x0 + 0.5 * step * (xa + 1.0);
                            let zy = y0 + 0.5 * step * (xb + 1.0);
                            acc += wa * wb * kernel_at(zx, zy);
                        }
                    }
                }
            }
            acc * 0.25 * step * step * h * h
        })
        .collect();
    let mut w = vec![0.0; width * width];
    for (&(dx, dy), v) in cells.iter().zip(values) {
        w[dx + width * dy] = v;
        w[dy + width * dx] = v;
    }
    w
}
