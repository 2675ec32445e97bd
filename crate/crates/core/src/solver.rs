//! Minimizers of the discrete two-membranes energy over `{u2 <= u1}`.
//!
//! All methods work on interior vectors of a [`MembraneSystem`], where the problem is
//! the convex QP `min ½u1ᵀA1u1 - c1ᵀu1 + ½u2ᵀA2u2 - c2ᵀu2` subject to `u2 <= u1`.
//! Its KKT conditions are exactly the discrete Euler–Lagrange system, and the
//! gradients `A_k u_k - c_k = f_k - L_k u_k` are the residuals reported at the end.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{MembranePair, MembraneSystem, ProblemSpec, ResidualReport};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, dot, max_abs, power_iteration};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    ProjectedGradient,
    AcceleratedPG,
    ActiveSetQP,
    ViscositySweep,
    AlternatingObstacle,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::ProjectedGradient => "projected_gradient",
            Method::AcceleratedPG => "accelerated_pg",
            Method::ActiveSetQP => "active_set",
            Method::ViscositySweep => "viscosity_sweep",
            Method::AlternatingObstacle => "alternating_obstacle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "projected_gradient" | "pg" => Method::ProjectedGradient,
            "accelerated_pg" | "fista" => Method::AcceleratedPG,
            "active_set" | "active_set_qp" => Method::ActiveSetQP,
            "viscosity_sweep" | "sweep" => Method::ViscositySweep,
            "alternating_obstacle" | "alternating" => Method::AlternatingObstacle,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StepRule {
    /// `1/L` with `L` from 50 power-iteration steps.
    Fixed,
    /// Armijo backtracking from `2/L`.
    Backtracking,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InitialGuess {
    Zero,
    /// Uniform noise of the given amplitude drawn from `seed`, then projected.
    Random {
        amplitude: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub max_iters: usize,
    /// Bound on every residual field, in operator units.
    pub tol: f64,
    pub step: StepRule,
    pub seed: u64,
    pub initial: InitialGuess,
    /// Relaxation for the sweeps (PSOR default 1.5, two-membranes sweep 1).
    pub relaxation: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::ActiveSetQP,
            max_iters: 200_000,
            tol: 1e-8,
            step: StepRule::Fixed,
            seed: 0,
            initial: InitialGuess::Zero,
            relaxation: None,
        }
    }
}

impl SolverConfig {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Precondition(format!(
                "tolerance {} must be positive",
                self.tol
            )));
        }
        if self.max_iters < 1 {
            return Err(Error::Precondition("max_iters must be at least 1".into()));
        }
        if let Some(w) = self.relaxation {
            if !(w > 0.0 && w < 2.0) {
                return Err(Error::Precondition(format!(
                    "relaxation {w} outside (0, 2)"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: String,
    pub iterations: usize,
    pub final_energy: f64,
    pub residuals: ResidualReport,
    /// Interior contact mask `{u1 - u2 <= ε_contact}` (or `{u - φ <= ε}`).
    pub contact: Vec<bool>,
    pub contact_threshold: f64,
    pub converged: bool,
    /// Not serialized, so written reports are reproducible; the manifest carries timings.
    #[serde(skip)]
    pub wall_time_s: f64,
    pub warnings: Vec<String>,
    /// Energy after each iteration, when the method records it.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub energy_trace: Vec<f64>,
}

impl SolveReport {
    pub fn contact_count(&self) -> usize {
        self.contact.iter().filter(|&&c| c).count()
    }
}

/// Solves with the method named in `config`.
pub fn solve(problem: &ProblemSpec, config: &SolverConfig) -> Result<(MembranePair, SolveReport)> {
    let system = MembraneSystem::new(problem)?;
    solve_system(&system, config)
}

pub fn solve_system(
    system: &MembraneSystem,
    config: &SolverConfig,
) -> Result<(MembranePair, SolveReport)> {
    match config.method {
        Method::ProjectedGradient | Method::AcceleratedPG => projected_gradient(system, config),
        Method::ActiveSetQP => active_set(system, config),
        Method::ViscositySweep => viscosity_sweep(system, config),
        Method::AlternatingObstacle => crate::obstacle::alternating_system(system, config),
    }
}

pub fn solve_projected_gradient(
    problem: &ProblemSpec,
    config: &SolverConfig,
) -> Result<(MembranePair, SolveReport)> {
    let mut cfg = config.clone();
    if cfg.method != Method::AcceleratedPG {
        cfg.method = Method::ProjectedGradient;
    }
    projected_gradient(&MembraneSystem::new(problem)?, &cfg)
}

pub fn solve_active_set(
    problem: &ProblemSpec,
    config: &SolverConfig,
) -> Result<(MembranePair, SolveReport)> {
    active_set(&MembraneSystem::new(problem)?, config)
}

pub fn solve_viscosity_sweep(
    problem: &ProblemSpec,
    config: &SolverConfig,
) -> Result<(MembranePair, SolveReport)> {
    viscosity_sweep(&MembraneSystem::new(problem)?, config)
}

/// Nearest admissible pair: nodes with `u2 > u1` move both values to their midpoint.
pub fn project_admissible(pair: &MembranePair) -> MembranePair {
    let mut out = pair.clone();
    let g = pair.u1.grid().clone();
    for &i in g.interior() {
        let (a, b) = (out.u1.values()[i], out.u2.values()[i]);
        if b > a {
            let m = 0.5 * (a + b);
            out.u1.values_mut()[i] = m;
            out.u2.values_mut()[i] = m;
        }
    }
    out
}

pub(crate) fn project(u1: &mut [f64], u2: &mut [f64]) {
    for (a, b) in u1.iter_mut().zip(u2.iter_mut()) {
        if *b > *a {
            let m = 0.5 * (*a + *b);
            *a = m;
            *b = m;
        }
    }
}

/// KKT defects from interior gradients `r_k = A_k u_k - c_k = f_k - L_k u_k`.
pub(crate) fn kkt_defects(u1: &[f64], u2: &[f64], r1: &[f64], r2: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..u1.len() {
        worst = worst
            .max(-r1[i])
            .max(r2[i])
            .max((r1[i] + r2[i]).abs())
            .max(((u1[i] - u2[i]) * r1[i]).abs());
    }
    worst
}

pub(crate) fn initial_guess(
    system: &MembraneSystem,
    config: &SolverConfig,
) -> (Vec<f64>, Vec<f64>) {
    let n = system.len();
    match config.initial {
        InitialGuess::Zero => (vec![0.0; n], vec![0.0; n]),
        InitialGuess::Random { amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut u1: Vec<f64> = (0..n)
                .map(|_| amplitude * rng.gen_range(-1.0..1.0))
                .collect();
            let mut u2: Vec<f64> = (0..n)
                .map(|_| amplitude * rng.gen_range(-1.0..1.0))
                .collect();
            project(&mut u1, &mut u2);
            (u1, u2)
        }
    }
}

pub(crate) struct Outcome {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub iterations: usize,
    pub stopped: bool,
    pub trace: Vec<f64>,
}

/// Builds the pair and the report; `converged` requires every residual field within `tol`.
pub(crate) fn finish(
    system: &MembraneSystem,
    config: &SolverConfig,
    method: Method,
    out: Outcome,
    start: Instant,
) -> Result<(MembranePair, SolveReport)> {
    let pair = system.pair(&out.u1, &out.u2);
    let residuals = system.el_residuals(&pair)?;
    let final_energy = system.total_energy(&pair)?;
    let eps = system.problem.contact_threshold();
    let contact = out
        .u1
        .iter()
        .zip(&out.u2)
        .map(|(a, b)| a - b <= eps)
        .collect();
    let mut warnings = Vec::new();
    if system.problem.kernel1.order() > system.problem.kernel2.order() {
        warnings.push("s1 > s2: outside the regime where u2 is the more regular membrane".into());
    }
    for (k, kernel) in [&system.problem.kernel1, &system.problem.kernel2]
        .iter()
        .enumerate()
    {
        if kernel.is_ill_conditioned() {
            warnings.push(format!(
                "kernel{} has order {} close to 1: ill-conditioned",
                k + 1,
                kernel.order()
            ));
        }
    }
    let converged = out.stopped && residuals.within(config.tol);
    let report = SolveReport {
        method: method.name().into(),
        iterations: out.iterations,
        final_energy,
        residuals,
        contact,
        contact_threshold: eps,
        converged,
        wall_time_s: start.elapsed().as_secs_f64(),
        warnings,
        energy_trace: out.trace,
    };
    Ok((pair, report))
}

fn gradients(system: &MembraneSystem, u1: &[f64], u2: &[f64]) -> (Vec<f64>, Vec<f64>) {
    system.scaled_gradient(u1, u2)
}

fn lipschitz(system: &MembraneSystem) -> f64 {
    let a1 = power_iteration(system.len(), 50, |u, o| system.a1.matvec_into(u, o));
    let a2 = power_iteration(system.len(), 50, |u, o| system.a2.matvec_into(u, o));
    a1.max(a2)
}

fn projected_gradient(
    system: &MembraneSystem,
    config: &SolverConfig,
) -> Result<(MembranePair, SolveReport)> {
    config.validate()?;
    let start = Instant::now();
    let accelerated = config.method == Method::AcceleratedPG;
    let stop_tol = 0.5 * config.tol;
    let lip = lipschitz(system);
    let offset = system.quadratic_energy(&vec![0.0; system.len()], &vec![0.0; system.len()]);
    let energy = |u1: &[f64], u2: &[f64], r1: &[f64], r2: &[f64]| {
        let q =
            0.5 * (dot(u1, r1) - dot(&system.c1, u1)) + 0.5 * (dot(u2, r2) - dot(&system.c2, u2));
        system.cell_volume() * q + offset
    };
    let (mut u1, mut u2) = initial_guess(system, config);
    let (mut r1, mut r2) = gradients(system, &u1, &u2);
    let mut e = energy(&u1, &u2, &r1, &r2);
    let mut trace = vec![e];
    let mut rising = 0;
    let mut stopped = kkt_defects(&u1, &u2, &r1, &r2) <= stop_tol;
    let mut iterations = 0;
    // momentum state
    let (mut y1, mut y2) = (u1.clone(), u2.clone());
    let mut t: f64 = 1.0;
    let mut step = 1.0 / lip;
    let mut restarted = false;
    while !stopped && iterations < config.max_iters {
        iterations += 1;
        let (g1, g2) = if accelerated {
            gradients(system, &y1, &y2)
        } else {
            (r1.clone(), r2.clone())
        };
        let (base1, base2) = if accelerated { (&y1, &y2) } else { (&u1, &u2) };
        let (mut n1, mut n2, mut nr1, mut nr2, mut ne);
        loop {
            n1 = base1
                .iter()
                .zip(&g1)
                .map(|(x, g)| x - step * g)
                .collect::<Vec<_>>();
            n2 = base2
                .iter()
                .zip(&g2)
                .map(|(x, g)| x - step * g)
                .collect::<Vec<_>>();
            project(&mut n1, &mut n2);
            (nr1, nr2) = gradients(system, &n1, &n2);
            ne = energy(&n1, &n2, &nr1, &nr2);
            if config.step != StepRule::Backtracking {
                break;
            }
            // sufficient decrease relative to the linearization at the base point
            let (b1, b2) = (base1.clone(), base2.clone());
            let (br1, br2) = if accelerated {
                (g1.clone(), g2.clone())
            } else {
                (r1.clone(), r2.clone())
            };
            let eb = energy(&b1, &b2, &br1, &br2);
            let mut lin = 0.0;
            let mut sq = 0.0;
            for i in 0..n1.len() {
                let (d1, d2) = (n1[i] - b1[i], n2[i] - b2[i]);
                lin += g1[i] * d1 + g2[i] * d2;
                sq += d1 * d1 + d2 * d2;
            }
            let bound = eb + system.cell_volume() * (lin + 0.5 * sq / step);
            if ne <= bound + 1e-14 * eb.abs().max(1.0) || step < 1e-6 / lip {
                break;
            }
            step *= 0.5;
        }
        if accelerated && ne > e && !restarted {
            // adaptive restart: drop momentum and take a plain step from the current iterate
            t = 1.0;
            y1 = u1.clone();
            y2 = u2.clone();
            restarted = true;
            continue;
        }
        restarted = false;
        if ne > e + 1e-14 * e.abs().max(1.0) {
            rising += 1;
            if rising >= 10 {
                return Err(Error::Divergence(format!(
                    "energy increased for {rising} consecutive steps"
                )));
            }
        } else {
            rising = 0;
        }
        if accelerated {
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_new;
            y1 = n1
                .iter()
                .zip(&u1)
                .map(|(a, b)| a + beta * (a - b))
                .collect();
            y2 = n2
                .iter()
                .zip(&u2)
                .map(|(a, b)| a + beta * (a - b))
                .collect();
            t = t_new;
        }
        u1 = n1;
        u2 = n2;
        r1 = nr1;
        r2 = nr2;
        e = ne;
        trace.push(e);
        if config.step == StepRule::Backtracking {
            step = (2.0 * step).min(2.0 / lip);
        }
        stopped = kkt_defects(&u1, &u2, &r1, &r2) <= stop_tol;
    }
    let method = config.method;
    finish(
        system,
        config,
        method,
        Outcome {
            u1,
            u2,
            iterations,
            stopped,
            trace,
        },
        start,
    )
}

/// Dense size cap for the active-set oracle (total interior unknowns of both membranes).
pub const ACTIVE_SET_CAP: usize = 4096;

fn active_set(
    system: &MembraneSystem,
    config: &SolverConfig,
) -> Result<(MembranePair, SolveReport)> {
    config.validate()?;
    let start = Instant::now();
    let n = system.len();
    if 2 * n > ACTIVE_SET_CAP {
        return Err(Error::SizeCap {
            unknowns: 2 * n,
            cap: ACTIVE_SET_CAP,
        });
    }
    let d1 = system.a1.to_dense();
    let d2 = system.a2.to_dense();
    let mut active = vec![false; n];
    let mut seen: Vec<Vec<bool>> = Vec::new();
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    let mut iterations = 0;
    let mut stopped = false;
    while iterations < config.max_iters.min(10 * n + 10) {
        iterations += 1;
        // u1 always owns column i; u2 owns its own column only where inactive
        let mut col2 = vec![0usize; n];
        let mut m = n;
        for i in 0..n {
            col2[i] = if active[i] {
                i
            } else {
                m += 1;
                m - 1
            };
        }
        let mut mat = nalgebra::DMatrix::<f64>::zeros(m, m);
        let mut rhs = vec![0.0; m];
        for i in 0..n {
            rhs[i] += system.c1[i];
            rhs[col2[i]] += system.c2[i];
            for j in 0..n {
                mat[(i, j)] += d1[(i, j)];
                mat[(col2[i], col2[j])] += d2[(i, j)];
            }
        }
        let z = cholesky_solve(mat, &rhs)?;
        for i in 0..n {
            u1[i] = z[i];
            u2[i] = z[col2[i]];
        }
        let (r1, _) = gradients(system, &u1, &u2);
        let next: Vec<bool> = (0..n)
            .map(|i| {
                if active[i] {
                    r1[i] > 0.0
                } else {
                    u2[i] > u1[i]
                }
            })
            .collect();
        if next == active {
            stopped = true;
            break;
        }
        if seen.contains(&next) {
            break;
        }
        seen.push(active.clone());
        active = next;
    }
    finish(
        system,
        config,
        Method::ActiveSetQP,
        Outcome {
            u1,
            u2,
            iterations,
            stopped,
            trace: Vec::new(),
        },
        start,
    )
}

fn viscosity_sweep(
    system: &MembraneSystem,
    config: &SolverConfig,
) -> Result<(MembranePair, SolveReport)> {
    config.validate()?;
    let start = Instant::now();
    let n = system.len();
    let omega = config.relaxation.unwrap_or(1.0);
    let (mut u1, mut u2) = initial_guess(system, config);
    let (da, db) = (system.a1.diag(), system.a2.diag());
    let mut iterations = 0;
    let mut stopped = false;
    let node = |i: usize, u1: &mut [f64], u2: &mut [f64]| -> f64 {
        let t1 = (system.c1[i] + system.a1.coupling_dot(i, u1)) / da[i];
        let t2 = (system.c2[i] + system.a2.coupling_dot(i, u2)) / db[i];
        let mut a = u1[i] + omega * (t1 - u1[i]);
        let mut b = u2[i] + omega * (t2 - u2[i]);
        if a <= b {
            // contact: the summed equation with u1 = u2, i.e. the D-weighted mean
            let m = (da[i] * a + db[i] * b) / (da[i] + db[i]);
            a = m;
            b = m;
        }
        let change = (a - u1[i]).abs().max((b - u2[i]).abs());
        u1[i] = a;
        u2[i] = b;
        change
    };
    while iterations < config.max_iters {
        iterations += 1;
        let mut change: f64 = 0.0;
        for i in 0..n {
            change = change.max(node(i, &mut u1, &mut u2));
        }
        for i in (0..n).rev() {
            change = change.max(node(i, &mut u1, &mut u2));
        }
        if change == 0.0 || iterations % 10 == 0 {
            let (r1, r2) = gradients(system, &u1, &u2);
            if kkt_defects(&u1, &u2, &r1, &r2) <= 0.5 * config.tol {
                stopped = true;
                break;
            }
        }
    }
    finish(
        system,
        config,
        Method::ViscositySweep,
        Outcome {
            u1,
            u2,
            iterations,
            stopped,
            trace: Vec::new(),
        },
        start,
    )
}

/// Stationarity `L ‖x - P(x - ∇/L)‖∞` of a pair, in operator units.
pub fn stationarity(system: &MembraneSystem, pair: &MembranePair) -> f64 {
    let (u1, u2) = pair.interior();
    let (r1, r2) = gradients(system, &u1, &u2);
    let lip = lipschitz(system);
    let mut p1: Vec<f64> = u1.iter().zip(&r1).map(|(x, g)| x - g / lip).collect();
    let mut p2: Vec<f64> = u2.iter().zip(&r2).map(|(x, g)| x - g / lip).collect();
    project(&mut p1, &mut p2);
    let d1: Vec<f64> = u1.iter().zip(&p1).map(|(a, b)| a - b).collect();
    let d2: Vec<f64> = u2.iter().zip(&p2).map(|(a, b)| a - b).collect();
    lip * max_abs(&d1).max(max_abs(&d2))
}
