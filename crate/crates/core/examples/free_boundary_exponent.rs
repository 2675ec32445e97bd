// Growth exponent of `u - φ` at the free boundary of a half-Laplacian obstacle problem.

use std::sync::Arc;

use membranes::diagnostics::{default_radii, estimate_exponent, free_boundary, free_boundary_nodes, FitDegree};
use membranes::grid_kernel::{Grid, GridFunction, KernelSpec, TailModel, DEFAULT_EXTERIOR_RADIUS};
use membranes::obstacle::{solve_obstacle, ObstacleProblemSpec};
use membranes::solver::SolverConfig;

/// Returns the fitted exponent at the right free-boundary node.
pub fn run_example() -> membranes::Result<f64> {
    let grid = Arc::new(Grid::with_interior_nodes(1, 1023, DEFAULT_EXTERIOR_RADIUS)?);
    let spec = ObstacleProblemSpec::new(
        KernelSpec::fractional(0.5)?,
        GridFunction::zeros(grid.clone()),
        GridFunction::from_fn(grid.clone(), TailModel::constant(0.0), |p| 1.0 - 2.0 * p[0] * p[0])?,
        GridFunction::zeros(grid.clone()),
    )?;
    let (u, report) = solve_obstacle(&spec, &SolverConfig::default())?;
    let gap = u.linear_combination(1.0, &spec.obstacle, -1.0)?;
    println!("free boundary at {:?}", free_boundary(&report.contact, &grid));
    let anchor = *free_boundary_nodes(&report.contact, &grid).last().expect("a contact set");
    let fit = estimate_exponent(&gap, grid.point(anchor), FitDegree::Auto, &default_radii(grid.h()))?;
    println!("exponent {:.4} band [{:.4}, {:.4}] degree {}", fit.exponent, fit.band[0], fit.band[1], fit.degree);
    for row in fit.table() {
        println!("  {row:?}");
    }
    Ok(fit.exponent)
}

fn main() -> membranes::Result<()> {
    run_example().map(|_| ())
}
