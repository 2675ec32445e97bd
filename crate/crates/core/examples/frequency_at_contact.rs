// Extension of an obstacle solution, the frequency `Φ(r)` at a contact point and its verdict.

use std::sync::Arc;

use membranes::diagnostics::free_boundary_nodes;
use membranes::frequency::{
    classify_point, compute_frequency, extend_solution, geometric_radii, mollified_obstacle_extension,
    Classification, FrequencyParams, DEFAULT_HEIGHT,
};
use membranes::grid_kernel::{Grid, GridFunction, KernelSpec, TailModel, DEFAULT_EXTERIOR_RADIUS};
use membranes::obstacle::{solve_obstacle, ObstacleProblemSpec};
use membranes::solver::SolverConfig;

/// Returns the classification of the right free-boundary point.
pub fn run_example() -> membranes::Result<Classification> {
    let s = 0.5;
    let grid = Arc::new(Grid::with_interior_nodes(1, 1023, DEFAULT_EXTERIOR_RADIUS)?);
    let spec = ObstacleProblemSpec::new(
        KernelSpec::fractional(s)?,
        GridFunction::zeros(grid.clone()),
        GridFunction::from_fn(grid.clone(), TailModel::constant(0.0), |p| 1.0 - 2.0 * p[0] * p[0])?,
        GridFunction::zeros(grid.clone()),
    )?;
    let (u, report) = solve_obstacle(&spec, &SolverConfig::default())?;
    let center = grid.point(*free_boundary_nodes(&report.contact, &grid).last().expect("contact"))[0];

    let h = grid.h();
    let field = extend_solution(&u, s, DEFAULT_HEIGHT, (h, h))?;
    let obstacle = mollified_obstacle_extension(&spec.obstacle, &field)?;
    let params = FrequencyParams::defaults(s, 0.5).at(center);
    let radii = geometric_radii(1.0 / 32.0, 0.25, 7);
    let freq = compute_frequency(&field, &obstacle.field, &params, &radii)?;
    println!("contact point x = {center:.4}, alpha = {:.3}", params.alpha);
    for k in 0..radii.len() {
        println!("  r = {:.4}  F = {:.4e}  Phi = {:.4}", radii[k], freq.f_values[k], freq.phi[k]);
    }
    let verdict = classify_point(&freq, s, params.alpha)?;
    println!(
        "max monotonicity defect {:.2e}; Phi(0+) = {:.3}, growth {:.3}: {:?}",
        freq.max_defect, verdict.limit, verdict.growth, verdict.classification
    );
    Ok(verdict.classification)
}

fn main() -> membranes::Result<()> {
    run_example().map(|_| ())
}
