//! The single-membrane obstacle problem and the alternating reduction of the
//! two-membranes problem to it.
//!
//! On interior vectors the obstacle problem is `min ½uᵀAu - cᵀu` over `u >= φ`, i.e.
//! `min(u - φ, A u - c) = 0` nodewise, where `A u - c = f - L u`. The obstacle from
//! above is handled by negation.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;

use crate::energy::{MembranePair, MembraneSystem, ProblemSpec, ResidualReport};
use crate::error::{Error, Result};
use crate::grid_kernel::{
    build_operator, DiscreteNonlocalOperator, Grid, GridFunction, KernelSpec,
};
use crate::linalg::{
    cholesky_solve, conjugate_gradient, dot, max_abs, residual_floor, InteriorOperator,
};
use crate::solver::{
    finish, initial_guess, kkt_defects, Method, Outcome, SolveReport, SolverConfig,
};

#[derive(Clone, Debug)]
pub struct ObstacleProblemSpec {
    pub kernel: KernelSpec,
    /// Forcing; interior values are used.
    pub f: GridFunction,
    /// Obstacle `φ`; interior values are used.
    pub obstacle: GridFunction,
    /// Data outside `B_1`.
    pub exterior: GridFunction,
}

impl ObstacleProblemSpec {
    pub fn new(
        kernel: KernelSpec,
        f: GridFunction,
        obstacle: GridFunction,
        exterior: GridFunction,
    ) -> Result<Self> {
        let spec = Self {
            kernel,
            f,
            obstacle,
            exterior,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.f.grid()
    }

    /// Rejects obstacles that exceed the exterior data across the boundary.
    pub fn validate(&self) -> Result<()> {
        if !(self.f.same_grid(&self.obstacle) && self.f.same_grid(&self.exterior)) {
            return Err(Error::GridMismatch(
                "obstacle problem data on different grids",
            ));
        }
        let g = self.grid();
        for i in g.first_interior_ring() {
            let phi = self.obstacle.values()[i];
            for j in g.axis_neighbors(i) {
                if !g.is_interior(j) && self.exterior.values()[j] < phi {
                    return Err(Error::InconsistentData(format!(
                        "obstacle {phi} at x = {:?} exceeds the exterior data {} next to it",
                        g.point(i),
                        self.exterior.values()[j]
                    )));
                }
            }
        }
        for &i in g.interior() {
            if !(self.f.values()[i].is_finite() && self.obstacle.values()[i].is_finite()) {
                return Err(Error::InconsistentData(format!(
                    "non-finite data at node {i}"
                )));
            }
        }
        self.exterior
            .tail()
            .check_integrable(2.0 * self.kernel.order())
    }

    /// Contact threshold `h^{1+s}`.
    pub fn contact_threshold(&self) -> f64 {
        self.grid().h().powf(1.0 + self.kernel.order())
    }
}

/// Stopping data of an interior obstacle solve.
#[derive(Clone, Copy, Debug)]
pub(crate) struct InnerStats {
    pub iterations: usize,
    pub stopped: bool,
}

/// `max |min(u - φ, A u - c)|` and `max |(u - φ)(A u - c)|`, the stopping measures
/// matching [`obstacle_residuals`].
pub(crate) fn obstacle_defect(u: &[f64], phi: &[f64], r: &[f64]) -> f64 {
    u.iter().zip(phi).zip(r).fold(0.0, |m, ((a, p), ri)| {
        m.max((a - p).min(*ri).abs()).max(((a - p) * ri).abs())
    })
}

fn residual(a: &InteriorOperator, c: &[f64], u: &[f64]) -> Vec<f64> {
    let mut r = a.matvec(u);
    r.iter_mut().zip(c).for_each(|(ri, ci)| *ri -= ci);
    r
}

/// Projected SOR; the relaxation is halved whenever the energy fails to decrease.
pub(crate) fn psor(
    a: &InteriorOperator,
    c: &[f64],
    phi: &[f64],
    u: &mut [f64],
    omega: f64,
    tol: f64,
    max_sweeps: usize,
) -> InnerStats {
    let n = c.len();
    for i in 0..n {
        u[i] = u[i].max(phi[i]);
    }
    let d = a.diag();
    let mut omega = omega;
    let mut last_energy = f64::INFINITY;
    let mut sweeps = 0;
    let check_every = 10;
    while sweeps < max_sweeps {
        sweeps += 1;
        for i in 0..n {
            let t = (c[i] + a.coupling_dot(i, u)) / d[i];
            u[i] = phi[i].max(u[i] + omega * (t - u[i]));
        }
        if sweeps % check_every == 0 || sweeps == max_sweeps {
            let r = residual(a, c, u);
            if obstacle_defect(u, phi, &r) <= tol {
                return InnerStats {
                    iterations: sweeps,
                    stopped: true,
                };
            }
            let energy = 0.5 * (dot(u, &r) - dot(c, u));
            if energy > last_energy {
                omega *= 0.5;
            }
            last_energy = energy;
        }
    }
    InnerStats {
        iterations: sweeps,
        stopped: false,
    }
}

const DENSE_LIMIT: usize = 400;

/// Primal–dual active set with exact inner solves (Cholesky when small, CG otherwise).
pub(crate) fn pdas(
    a: &InteriorOperator,
    c: &[f64],
    phi: &[f64],
    u: &mut [f64],
    tol: f64,
    max_outer: usize,
    dense: Option<&DMatrix<f64>>,
) -> Result<InnerStats> {
    let n = c.len();
    let mut active: Vec<bool> = (0..n).map(|i| u[i] <= phi[i]).collect();
    let mut history: Vec<Vec<bool>> = Vec::new();
    let mut outer = 0;
    let mut stopped = false;
    while outer < max_outer {
        outer += 1;
        for i in 0..n {
            if active[i] {
                u[i] = phi[i];
            }
        }
        let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
        if !free.is_empty() {
            solve_free(a, c, u, &free, tol, dense)?;
        }
        let r = residual(a, c, u);
        let next: Vec<bool> = (0..n)
            .map(|i| if active[i] { r[i] > 0.0 } else { u[i] < phi[i] })
            .collect();
        if next == active {
            stopped = obstacle_defect(u, phi, &r) <= tol;
            break;
        }
        if history.contains(&next) {
            break;
        }
        history.push(active);
        active = next;
    }
    Ok(InnerStats {
        iterations: outer,
        stopped,
    })
}

/// Solves `(A u)_i = c_i` for `i` in `free`, holding the other entries of `u`.
fn solve_free(
    a: &InteriorOperator,
    c: &[f64],
    u: &mut [f64],
    free: &[usize],
    tol: f64,
    dense: Option<&DMatrix<f64>>,
) -> Result<()> {
    let n = c.len();
    let m = free.len();
    let mut fixed = u.to_vec();
    for &i in free {
        fixed[i] = 0.0;
    }
    let af = a.matvec(&fixed);
    let rhs: Vec<f64> = free.iter().map(|&i| c[i] - af[i]).collect();
    if let Some(full) = dense {
        let sub = DMatrix::from_fn(m, m, |p, q| full[(free[p], free[q])]);
        let x = cholesky_solve(sub, &rhs)?;
        for (k, &i) in free.iter().enumerate() {
            u[i] = x[k];
        }
        return Ok(());
    }
    let precond: Vec<f64> = free.iter().map(|&i| a.diag()[i]).collect();
    let mut x: Vec<f64> = free.iter().map(|&i| u[i]).collect();
    let apply = |v: &[f64], out: &mut [f64]| {
        let mut full = vec![0.0; n];
        for (k, &i) in free.iter().enumerate() {
            full[i] = v[k];
        }
        let y = a.matvec(&full);
        for (k, &i) in free.iter().enumerate() {
            out[k] = y[i];
        }
    };
    let scale = u.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let target = (1e-3 * tol).max(residual_floor(a, scale, c));
    let stats = conjugate_gradient(apply, &precond, &rhs, &mut x, target, 20 * m + 1000);
    if stats.residual > tol.max(4.0 * target) {
        return Err(Error::Internal(format!(
            "inner CG stalled at residual {:e}",
            stats.residual
        )));
    }
    for (k, &i) in free.iter().enumerate() {
        u[i] = x[k];
    }
    Ok(())
}

/// Interior obstacle solve dispatching on the method: the active-set method uses
/// PDAS, every other method projected SOR.
pub(crate) fn solve_interior(
    a: &InteriorOperator,
    dense: Option<&DMatrix<f64>>,
    c: &[f64],
    phi: &[f64],
    u: &mut [f64],
    config: &SolverConfig,
    tol: f64,
) -> Result<InnerStats> {
    match config.method {
        Method::ActiveSetQP | Method::AlternatingObstacle => {
            pdas(a, c, phi, u, tol, config.max_iters.min(500), dense)
        }
        _ => Ok(psor(
            a,
            c,
            phi,
            u,
            config.relaxation.unwrap_or(1.5),
            0.5 * tol,
            config.max_iters,
        )),
    }
}

/// Solution of the obstacle problem with its report.
pub fn solve_obstacle(
    spec: &ObstacleProblemSpec,
    config: &SolverConfig,
) -> Result<(GridFunction, SolveReport)> {
    let op = build_operator(spec.grid(), &spec.kernel)?;
    solve_obstacle_with(spec, &op, config)
}

pub fn solve_obstacle_with(
    spec: &ObstacleProblemSpec,
    op: &DiscreteNonlocalOperator,
    config: &SolverConfig,
) -> Result<(GridFunction, SolveReport)> {
    config.validate()?;
    spec.validate()?;
    let start = Instant::now();
    let a = op.interior_operator();
    let g = op.exterior_forcing(&spec.exterior)?;
    let f = spec.f.interior_values();
    let c: Vec<f64> = g.iter().zip(&f).map(|(g, f)| g - f).collect();
    let phi = spec.obstacle.interior_values();
    let dense = (a.len() <= DENSE_LIMIT).then(|| a.to_dense());
    let mut u = phi.clone();
    let stats = solve_interior(&a, dense.as_ref(), &c, &phi, &mut u, config, config.tol)?;
    let sol = spec.exterior.with_interior(&u);
    let residuals = obstacle_residuals(op, spec, &sol)?;
    let eps = spec.contact_threshold();
    let zero = spec.exterior.with_interior(&vec![0.0; u.len()]);
    let au = a.matvec(&u);
    let hv = spec.grid().cell_volume();
    let offset = 0.5 * crate::energy::inner_product_with(op, &zero, &zero)?
        + hv * spec
            .grid()
            .interior()
            .iter()
            .map(|&i| zero.values()[i] * spec.f.values()[i])
            .sum::<f64>();
    let final_energy = hv * (0.5 * dot(&u, &au) - dot(&c, &u)) + offset;
    let report = SolveReport {
        method: match config.method {
            Method::ActiveSetQP | Method::AlternatingObstacle => "obstacle_active_set".into(),
            _ => "obstacle_psor".into(),
        },
        iterations: stats.iterations,
        final_energy,
        contact: u.iter().zip(&phi).map(|(a, p)| a - p <= eps).collect(),
        contact_threshold: eps,
        converged: stats.stopped && residuals.within(config.tol),
        residuals,
        wall_time_s: start.elapsed().as_secs_f64(),
        warnings: if spec.kernel.is_ill_conditioned() {
            vec!["order close to 1: ill-conditioned".into()]
        } else {
            vec![]
        },
        energy_trace: Vec::new(),
    };
    Ok((sol, report))
}

/// Obstacle residuals in the two-membranes fields: `(L u - f)^+`, `(φ - u)^+`,
/// the nodewise `|min(u - φ, f - L u)|` and `|(u - φ)(f - L u)|`.
pub fn obstacle_residuals(
    op: &DiscreteNonlocalOperator,
    spec: &ObstacleProblemSpec,
    u: &GridFunction,
) -> Result<ResidualReport> {
    let lu = op.apply(u)?;
    let mut r = ResidualReport::default();
    for &i in spec.grid().interior() {
        let slack = spec.f.values()[i] - lu.values()[i];
        let gap = u.values()[i] - spec.obstacle.values()[i];
        r.max_sub_violation_1 = r.max_sub_violation_1.max(-slack);
        r.max_super_violation_2 = r.max_super_violation_2.max(-gap);
        r.max_sum_defect = r.max_sum_defect.max(gap.min(slack).abs());
        r.max_complementarity_defect = r.max_complementarity_defect.max((gap * slack).abs());
        r.complementarity.push(gap * slack);
    }
    Ok(r)
}

/// Interior mask `{u - φ <= ε}`.
pub fn contact_set(u: &GridFunction, phi: &GridFunction, eps: f64) -> Vec<bool> {
    u.grid()
        .interior()
        .iter()
        .map(|&i| u.values()[i] - phi.values()[i] <= eps)
        .collect()
}

/// 1D maximal runs of contact nodes as `[first, last]` node coordinates.
pub fn contact_intervals(mask: &[bool], grid: &Grid) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    if grid.dim() != 1 {
        return out;
    }
    let mut open: Option<f64> = None;
    let mut last = 0.0;
    for (slot, &i) in grid.interior().iter().enumerate() {
        let x = grid.point(i)[0];
        match (mask[slot], open) {
            (true, None) => open = Some(x),
            (false, Some(a)) => {
                out.push([a, last]);
                open = None;
            }
            _ => {}
        }
        last = x;
    }
    if let Some(a) = open {
        out.push([a, last]);
    }
    out
}

/// Two-membranes solve by alternating obstacle problems.
pub fn alternating_two_membranes(
    problem: &ProblemSpec,
    config: &SolverConfig,
) -> Result<(MembranePair, SolveReport)> {
    alternating_system(&MembraneSystem::new(problem)?, config)
}

/// Each outer step solves (a) for `u1` above the obstacle `u2`, (b) for `u2` below
/// `u1` (by negation), and (c) moves both membranes together with their gap frozen,
/// `(A1 + A2) u2 = c1 + c2 - A1 (u1 - u2)`. Each step minimizes the energy over a
/// set containing the current pair, and a fixed point of all three is a KKT point.
pub(crate) fn alternating_system(
    system: &MembraneSystem,
    config: &SolverConfig,
) -> Result<(MembranePair, SolveReport)> {
    config.validate()?;
    let start = Instant::now();
    let n = system.len();
    let inner = SolverConfig {
        method: Method::ActiveSetQP,
        ..config.clone()
    };
    let inner_tol = 0.1 * config.tol;
    let (d1, d2) = if n <= DENSE_LIMIT {
        (Some(system.a1.to_dense()), Some(system.a2.to_dense()))
    } else {
        (None, None)
    };
    let neg_c2: Vec<f64> = system.c2.iter().map(|c| -c).collect();
    let sum_diag: Vec<f64> = system
        .a1
        .diag()
        .iter()
        .zip(system.a2.diag())
        .map(|(a, b)| a + b)
        .collect();
    let (mut u1, mut u2) = initial_guess(system, config);
    let mut history: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut iterations = 0;
    let mut stopped = false;
    let mut warnings = Vec::new();
    let max_outer = config.max_iters.min(5000);
    while iterations < max_outer {
        iterations += 1;
        solve_interior(
            &system.a1,
            d1.as_ref(),
            &system.c1,
            &u2,
            &mut u1,
            &inner,
            inner_tol,
        )?;
        let phi: Vec<f64> = u1.iter().map(|v| -v).collect();
        let mut v: Vec<f64> = u2.iter().map(|x| -x).collect();
        solve_interior(
            &system.a2,
            d2.as_ref(),
            &neg_c2,
            &phi,
            &mut v,
            &inner,
            inner_tol,
        )?;
        u2 = v.iter().map(|x| -x).collect();
        for i in 0..n {
            // the obstacle solves keep u2 <= u1 up to the last bit
            if u2[i] > u1[i] {
                u2[i] = u1[i];
            }
        }
        let gap: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a - b).collect();
        let a1d = system.a1.matvec(&gap);
        let rhs: Vec<f64> = (0..n)
            .map(|i| system.c1[i] + system.c2[i] - a1d[i])
            .collect();
        let apply = |x: &[f64], out: &mut [f64]| {
            system.a1.matvec_into(x, out);
            let y = system.a2.matvec(x);
            out.iter_mut().zip(y).for_each(|(o, yi)| *o += yi);
        };
        let mut w = u2.clone();
        let scale = w.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let target = inner_tol.max(
            0.25 * (residual_floor(&system.a1, scale, &rhs)
                + residual_floor(&system.a2, scale, &rhs)),
        );
        conjugate_gradient(apply, &sum_diag, &rhs, &mut w, target, 20 * n + 1000);
        u1 = w.iter().zip(&gap).map(|(a, d)| a + d).collect();
        u2 = w;
        let (r1, r2) = system.scaled_gradient(&u1, &u2);
        if kkt_defects(&u1, &u2, &r1, &r2) <= 0.5 * config.tol {
            stopped = true;
            break;
        }
        if let Some((p1, p2)) = history.len().checked_sub(2).map(|k| &history[k]) {
            let back2 = diff(&u1, p1).max(diff(&u2, p2));
            let (q1, q2) = history.last().unwrap();
            let back1 = diff(&u1, q1).max(diff(&u2, q2));
            if back2 < config.tol && back1 > config.tol {
                warnings.push(format!("period-2 oscillation with gap {back1:e}"));
                break;
            }
            if back1 == 0.0 {
                break;
            }
        }
        history.push((u1.clone(), u2.clone()));
        if history.len() > 2 {
            history.remove(0);
        }
    }
    let (pair, mut report) = finish(
        system,
        config,
        Method::AlternatingObstacle,
        Outcome {
            u1,
            u2,
            iterations,
            stopped,
            trace: Vec::new(),
        },
        start,
    )?;
    report.warnings.extend(warnings);
    Ok((pair, report))
}

fn diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    max_abs(&d)
}
