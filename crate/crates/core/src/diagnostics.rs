//! Free-boundary extraction, pointwise exponent fits and comparison checks.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::energy::ProblemSpec;
use crate::error::{Error, Result};
use crate::grid_kernel::{Grid, GridFunction, Point};
use crate::solver::{solve, SolverConfig};

/// Points between mask and non-mask interior nodes (midpoints of axis edges).
///
/// In 1D the list is sorted by `x`; in 2D it is an unordered edge list.
pub fn free_boundary(mask: &[bool], grid: &Grid) -> Vec<Point> {
    let interior = grid.interior();
    assert_eq!(
        mask.len(),
        interior.len(),
        "mask must cover the interior nodes"
    );
    let mut out = Vec::new();
    for (slot, &i) in interior.iter().enumerate() {
        for j in grid.axis_neighbors(i) {
            // each edge once
            if j <= i {
                continue;
            }
            if let Some(other) = grid.interior_slot(j) {
                if mask[slot] != mask[other] {
                    let (a, b) = (grid.point(i), grid.point(j));
                    out.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
                }
            }
        }
    }
    if grid.dim() == 1 {
        out.sort_by(|a, b| a[0].total_cmp(&b[0]));
    }
    out
}

/// Mask nodes with a non-mask interior axis neighbor: the grid points of the free
/// boundary, ordered by grid index. These are the anchors used for exponent fits.
pub fn free_boundary_nodes(mask: &[bool], grid: &Grid) -> Vec<usize> {
    grid.interior()
        .iter()
        .enumerate()
        .filter(|&(slot, &i)| {
            mask[slot]
                && grid
                    .axis_neighbors(i)
                    .iter()
                    .any(|&j| grid.interior_slot(j).is_some_and(|o| !mask[o]))
        })
        .map(|(_, &i)| i)
        .collect()
}

/// Polynomial subtracted before measuring oscillation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitDegree {
    Constant,
    Linear,
    Quadratic,
    Cubic,
    /// Fit constant and linear, keep the smaller log-log residual.
    Auto,
}

impl FitDegree {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "0" | "constant" => Some(FitDegree::Constant),
            "1" | "linear" => Some(FitDegree::Linear),
            "2" | "quadratic" => Some(FitDegree::Quadratic),
            "3" | "cubic" => Some(FitDegree::Cubic),
            "auto" => Some(FitDegree::Auto),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentFit {
    pub anchor: Point,
    /// Degree of the subtracted polynomial.
    pub degree: u8,
    pub radii: Vec<f64>,
    pub oscillations: Vec<f64>,
    /// Radii dropped because the oscillation sat below the noise floor.
    pub dropped: Vec<f64>,
    pub exponent: f64,
    /// Root-mean-square residual of the log-log regression.
    pub residual: f64,
    /// 95% band on the exponent.
    pub band: [f64; 2],
    /// The other degree's fit when the degree was chosen automatically.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alternative: Option<Box<ExponentFit>>,
}

impl ExponentFit {
    /// Rows `(r, osc, log_r, log_osc)`.
    pub fn table(&self) -> Vec<[f64; 4]> {
        self.radii
            .iter()
            .zip(&self.oscillations)
            .map(|(&r, &o)| [r, o, r.ln(), o.ln()])
            .collect()
    }
}

const MIN_RADII: usize = 5;

/// Dyadic radii `2^-k`, `k = 2..7`, keeping those `>= 4h`.
pub fn default_radii(h: f64) -> Vec<f64> {
    (2..=7)
        .map(|k| 0.5f64.powi(k))
        .filter(|&r| r >= 4.0 * h)
        .collect()
}

/// Log-log slope of the sup deviation of `u` from its best polynomial fit on `B_r(x0)`.
pub fn estimate_exponent(
    u: &GridFunction,
    x0: Point,
    degree: FitDegree,
    radii: &[f64],
) -> Result<ExponentFit> {
    let grid = u.grid();
    if x0[0].hypot(x0[1]) >= 1.0 {
        return Err(Error::Precondition(format!(
            "anchor {x0:?} is not inside the unit ball"
        )));
    }
    for &r in radii {
        if !(r >= 4.0 * grid.h() - 1e-12 && r < 1.0) {
            return Err(Error::RadiusOutOfRange {
                radius: r,
                min: 4.0 * grid.h(),
                max: 1.0,
            });
        }
    }
    match degree {
        FitDegree::Constant => fit_with(u, x0, 0, radii),
        FitDegree::Linear => fit_with(u, x0, 1, radii),
        FitDegree::Quadratic => fit_with(u, x0, 2, radii),
        FitDegree::Cubic => fit_with(u, x0, 3, radii),
        FitDegree::Auto => {
            let zero = fit_with(u, x0, 0, radii);
            let one = fit_with(u, x0, 1, radii);
            match (zero, one) {
                (Ok(a), Ok(b)) => {
                    let (mut keep, other) = if b.residual <= a.residual {
                        (b, a)
                    } else {
                        (a, b)
                    };
                    keep.alternative = Some(Box::new(other));
                    Ok(keep)
                }
                (Ok(a), Err(_)) => Ok(a),
                (Err(_), Ok(b)) => Ok(b),
                (Err(e), Err(_)) => Err(e),
            }
        }
    }
}

fn fit_with(u: &GridFunction, x0: Point, degree: u8, radii: &[f64]) -> Result<ExponentFit> {
    let grid = u.grid();
    let values = u.values();
    let mut kept = Vec::new();
    let mut osc = Vec::new();
    let mut dropped = Vec::new();
    for &r in radii {
        let mut pts = Vec::new();
        for idx in 0..grid.len() {
            let p = grid.point(idx);
            let d = [p[0] - x0[0], p[1] - x0[1]];
            if d[0].hypot(d[1]) <= r * (1.0 + 1e-12) {
                pts.push((d, values[idx]));
            }
        }
        let scale = pts.iter().fold(1.0f64, |m, &(_, v)| m.max(v.abs()));
        let dev = deviation(&pts, degree, grid.dim());
        if dev.is_nan() || dev <= 10.0 * f64::EPSILON * scale {
            dropped.push(r);
        } else {
            kept.push(r);
            osc.push(dev);
        }
    }
    if kept.len() < MIN_RADII {
        return Err(if kept.is_empty() {
            Error::BelowNoiseFloor
        } else {
            Error::Insufficient(format!(
                "{} radii above the noise floor, need {MIN_RADII}",
                kept.len()
            ))
        });
    }
    let xs: Vec<f64> = kept.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = osc.iter().map(|o| o.ln()).collect();
    let (slope, rms, se) = regress(&xs, &ys);
    let t = StudentsT::new(0.0, 1.0, (xs.len() - 2) as f64)
        .map_err(|e| Error::Internal(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(ExponentFit {
        anchor: x0,
        degree,
        radii: kept,
        oscillations: osc,
        dropped,
        exponent: slope,
        residual: rms,
        band: [slope - t * se, slope + t * se],
        alternative: None,
    })
}

/// Sup deviation from the least-squares polynomial of the given degree.
fn deviation(pts: &[([f64; 2], f64)], degree: u8, dim: usize) -> f64 {
    // monomials x^a y^b with a + b <= degree
    let basis = |d: [f64; 2]| -> Vec<f64> {
        let mut b = Vec::new();
        for total in 0..=degree as i32 {
            for ey in 0..=total {
                if dim == 1 && ey > 0 {
                    break;
                }
                b.push(d[0].powi(total - ey) * d[1].powi(ey));
            }
        }
        b
    };
    let nb = basis([0.0, 0.0]).len();
    if pts.len() < nb {
        return f64::NAN;
    }
    let mut m = DMatrix::<f64>::zeros(nb, nb);
    let mut rhs = DVector::<f64>::zeros(nb);
    for &(d, v) in pts {
        let b = basis(d);
        for i in 0..nb {
            rhs[i] += b[i] * v;
            for j in 0..nb {
                m[(i, j)] += b[i] * b[j];
            }
        }
    }
    let Some(c) = m.lu().solve(&rhs) else {
        return f64::NAN;
    };
    pts.iter()
        .map(|&(d, v)| {
            let b = basis(d);
            (v - (0..nb).map(|i| c[i] * b[i]).sum::<f64>()).abs()
        })
        .fold(0.0, f64::max)
}

/// Least-squares slope, residual RMS and slope standard error.
fn regress(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum();
    let rms = (sse / n).sqrt();
    let se = (sse / (n - 2.0) / sxx).sqrt();
    (slope, rms, se)
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonVerdict {
    /// `min (u1_B - u1_A)` over all nodes.
    pub gap_1: f64,
    pub gap_2: f64,
    pub worst_gap: f64,
    pub threshold: f64,
    pub ordered: bool,
}

/// Checks that B's data lie on the solution-raising side of A's: exterior data at
/// least as large (values and far field), forcing at most as large.
pub fn check_ordered(a: &ProblemSpec, b: &ProblemSpec) -> Result<()> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch("comparison problems must share a grid"));
    }
    let le = |lo: &GridFunction, hi: &GridFunction| {
        lo.values().iter().zip(hi.values()).all(|(x, y)| x <= y)
            && [5.0, 50.0, 500.0]
                .iter()
                .all(|&r| lo.tail().eval(r) <= hi.tail().eval(r))
    };
    let interior_le = |lo: &GridFunction, hi: &GridFunction| {
        a.grid
            .interior()
            .iter()
            .all(|&i| lo.values()[i] <= hi.values()[i])
    };
    let ordered = le(&a.exterior1, &b.exterior1)
        && le(&a.exterior2, &b.exterior2)
        && interior_le(&b.f1, &a.f1)
        && interior_le(&b.f2, &a.f2);
    if ordered {
        Ok(())
    } else {
        Err(Error::Precondition(
            "problem B is not ordered above problem A".into(),
        ))
    }
}

/// Solves both problems and reports the componentwise minimum of `sol(B) - sol(A)`.
///
/// The kernels must agree; the data of B must satisfy [`check_ordered`].
pub fn comparison_test(
    a: &ProblemSpec,
    b: &ProblemSpec,
    config: &SolverConfig,
) -> Result<ComparisonVerdict> {
    if a.kernel1 != b.kernel1 || a.kernel2 != b.kernel2 {
        return Err(Error::Precondition(
            "comparison problems must share kernels".into(),
        ));
    }
    check_ordered(a, b)?;
    let (pa, _) = solve(a, config)?;
    let (pb, _) = solve(b, config)?;
    let gap = |x: &GridFunction, y: &GridFunction| {
        x.values()
            .iter()
            .zip(y.values())
            .map(|(p, q)| q - p)
            .fold(f64::INFINITY, f64::min)
    };
    let gap_1 = gap(&pa.u1, &pb.u1);
    let gap_2 = gap(&pa.u2, &pb.u2);
    let worst_gap = gap_1.min(gap_2);
    let threshold = -10.0 * config.tol;
    Ok(ComparisonVerdict {
        gap_1,
        gap_2,
        worst_gap,
        threshold,
        ordered: worst_gap >= threshold,
    })
}
