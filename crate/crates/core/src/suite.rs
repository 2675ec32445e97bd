//! Reference problem families used by the cross-checks, the examples and the CLI.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::energy::ProblemSpec;
use crate::error::Result;
use crate::grid_kernel::{Grid, GridFunction, KernelSpec, TailModel, DEFAULT_EXTERIOR_RADIUS};
use crate::obstacle::ObstacleProblemSpec;

/// Order pairs `(s1, s2)` of the cross-validation suite.
pub const SUITE_ORDERS: [(f64, f64); 5] =
    [(0.3, 0.5), (0.3, 0.7), (0.3, 0.9), (0.5, 0.7), (0.5, 0.9)];
/// Interior node counts of the cross-validation suite.
pub const SUITE_SIZES: [usize; 4] = [17, 33, 65, 129];

/// Data families of the two-membranes suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// `f1 = 1`, `f2 = -1`, parallel tilted exterior data `±0.15`.
    Parallel,
    /// `f1 = 2 + x`, `f2 = -1 + 0.5 sin(πx)`, exterior data `±1/4`.
    Pressed,
    /// One-sided forcing and tilted, unequal exterior data.
    Asymmetric,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Parallel, Family::Pressed, Family::Asymmetric];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Parallel => "parallel",
            Family::Pressed => "pressed",
            Family::Asymmetric => "asymmetric",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteInstance {
    pub name: String,
    pub s1: f64,
    pub s2: f64,
    pub nodes: usize,
    pub family: Family,
    pub problem: ProblemSpec,
}

/// Odd tilt: `x` on `[-1, 1]`, back to zero at `|x| = 2`, flat `0` beyond.
fn tilt(x: f64) -> f64 {
    let a = x.abs();
    let v = if a <= 1.0 { a } else { (2.0 - a).max(0.0) };
    v.copysign(x)
}

/// Two-membranes problem of a family with fractional kernels `|y|^{-1-2s}`.
///
/// Exterior data are constant for `|x| >= 2`, so their tails are constants.
pub fn family_problem(nodes: usize, s1: f64, s2: f64, family: Family) -> Result<ProblemSpec> {
    let grid = Arc::new(Grid::with_interior_nodes(
        1,
        nodes,
        DEFAULT_EXTERIOR_RADIUS,
    )?);
    let k1 = KernelSpec::fractional(s1)?;
    let k2 = KernelSpec::fractional(s2)?;
    type F = fn(f64) -> f64;
    let (f1, f2, e1, e2): (F, F, F, F) = match family {
        Family::Parallel => (
            |_| 1.0,
            |_| -1.0,
            |x| 0.15 + 0.1 * tilt(x),
            |x| -0.15 + 0.1 * tilt(x),
        ),
        Family::Pressed => (
            |x| 2.0 + x,
            |x| -1.0 + 0.5 * (PI * x).sin(),
            |_| 0.25,
            |_| -0.25,
        ),
        Family::Asymmetric => (
            |x| if x > 0.0 { 2.0 } else { 0.5 },
            |x| -0.5 - 0.5 * x,
            |x| 0.3 + 0.1 * tilt(x),
            |x| -0.05 + 0.2 * tilt(x),
        ),
    };
    let field = |g: F, tail: TailModel| GridFunction::from_fn(grid.clone(), tail, |p| g(p[0]));
    ProblemSpec::new(
        k1,
        k2,
        field(f1, TailModel::ZERO)?,
        field(f2, TailModel::ZERO)?,
        field(e1, TailModel::constant(e1(4.0)))?,
        field(e2, TailModel::constant(e2(4.0)))?,
    )
}

/// Instance `k` of the 12-instance suite.
pub fn suite_instance(k: usize) -> Result<SuiteInstance> {
    let (s1, s2) = SUITE_ORDERS[k % SUITE_ORDERS.len()];
    let nodes = SUITE_SIZES[k % SUITE_SIZES.len()];
    let family = Family::ALL[k % 3];
    let problem = family_problem(nodes, s1, s2, family)?;
    Ok(SuiteInstance {
        name: format!("k{k:02}-{}-s{s1}-{s2}-n{nodes}", family.name()),
        s1,
        s2,
        nodes,
        family,
        problem,
    })
}

pub fn cross_validation_suite() -> Result<Vec<SuiteInstance>> {
    (0..12).map(suite_instance).collect()
}

/// `s = 1`, `f = 2`, `φ = 0`, data `κ` outside: for `κ = 1/4` the solution is `(|x| - 1/2)_+^2`.
pub fn classical_obstacle(nodes: usize, kappa: f64) -> Result<ObstacleProblemSpec> {
    let grid = Arc::new(Grid::with_interior_nodes(
        1,
        nodes,
        DEFAULT_EXTERIOR_RADIUS,
    )?);
    ObstacleProblemSpec::new(
        KernelSpec::local(vec![1.0])?,
        GridFunction::constant(grid.clone(), 2.0),
        GridFunction::zeros(grid.clone()),
        GridFunction::constant(grid, kappa),
    )
}

/// Exact solution of [`classical_obstacle`] for `κ = 1/4` and `κ = 1`.
pub fn classical_obstacle_exact(x: f64, kappa: f64) -> Option<f64> {
    if kappa == 0.25 {
        Some((x.abs() - 0.5).max(0.0).powi(2))
    } else if kappa == 1.0 {
        Some(x * x)
    } else {
        None
    }
}
