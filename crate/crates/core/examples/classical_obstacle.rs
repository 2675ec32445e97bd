// Classical obstacle problem with a known solution: contact set and pointwise error.

use membranes::obstacle::{contact_intervals, solve_obstacle};
use membranes::solver::SolverConfig;
use membranes::suite::{classical_obstacle, classical_obstacle_exact};

/// Returns `(contact intervals, max error against the exact solution)`.
pub fn run_example() -> membranes::Result<(Vec<[f64; 2]>, f64)> {
    let kappa = 0.25;
    let spec = classical_obstacle(255, kappa)?;
    let (u, report) = solve_obstacle(&spec, &SolverConfig::default())?;
    let grid = spec.grid();
    let error = grid
        .interior()
        .iter()
        .filter_map(|&i| classical_obstacle_exact(grid.point(i)[0], kappa).map(|e| (u.values()[i] - e).abs()))
        .fold(0.0, f64::max);
    let runs = contact_intervals(&report.contact, grid);
    println!("{} in {} iterations, contact {runs:?}, max error {error:.2e}", report.method, report.iterations);
    Ok((runs, error))
}

fn main() -> membranes::Result<()> {
    run_example().map(|_| ())
}
