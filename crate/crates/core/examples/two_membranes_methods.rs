// Every two-membranes solver on the same instance, compared against the active set.

use membranes::solver::{solve, Method, SolverConfig};
use membranes::suite::{family_problem, Family};

/// Returns the largest sup-distance of any method from the active-set solution.
pub fn run_example() -> membranes::Result<f64> {
    let problem = family_problem(33, 0.3, 0.7, Family::Pressed)?;
    let (reference, _) = solve(&problem, &SolverConfig::with_method(Method::ActiveSetQP))?;
    let (r1, r2) = reference.interior();
    let mut worst: f64 = 0.0;
    for m in [
        Method::ProjectedGradient,
        Method::AcceleratedPG,
        Method::ActiveSetQP,
        Method::ViscositySweep,
        Method::AlternatingObstacle,
    ] {
        let (pair, report) = solve(&problem, &SolverConfig::with_method(m))?;
        let (u1, u2) = pair.interior();
        let d = u1.iter().zip(&r1).chain(u2.iter().zip(&r2)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(d);
        println!(
            "{:<22} iters {:>6} energy {:.12} converged {} |u - u_AS| {d:.1e}",
            m.name(),
            report.iterations,
            report.final_energy,
            report.converged
        );
    }
    Ok(worst)
}

fn main() -> membranes::Result<()> {
    run_example().map(|_| ())
}
