// Energy, gradient and Euler-Lagrange residuals of a solved two-membranes problem.

use membranes::energy::{el_residuals, energy_gradient, total_energy};
use membranes::solver::{solve_active_set, SolverConfig};
use membranes::suite::{family_problem, Family};

/// Returns `(energy, max residual)` of the active-set solution.
pub fn run_example() -> membranes::Result<(f64, f64)> {
    let problem = family_problem(65, 0.3, 0.7, Family::Pressed)?;
    let (pair, report) = solve_active_set(&problem, &SolverConfig::default())?;
    let energy = total_energy(&pair, &problem)?;
    let (g1, g2) = energy_gradient(&pair, &problem)?;
    let residuals = el_residuals(&pair, &problem)?;
    println!(
        "energy {energy:.10}, {} contact nodes, |grad| = ({:.2e}, {:.2e})",
        report.contact_count(),
        g1.max_abs(),
        g2.max_abs()
    );
    println!("max EL residual {:.2e}", residuals.max());
    Ok((energy, residuals.max()))
}

fn main() -> membranes::Result<()> {
    run_example().map(|_| ())
}
