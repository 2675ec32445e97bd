// Comparison principle: raising the exterior data raises both membranes.

use membranes::diagnostics::{comparison_test, ComparisonVerdict};
use membranes::energy::ProblemSpec;
use membranes::grid_kernel::{GridFunction, TailModel};
use membranes::solver::SolverConfig;
use membranes::suite::{family_problem, Family};

/// Exterior data are constant far out, so the lifted tail stays constant.
fn lifted(g: &GridFunction, by: f64) -> membranes::Result<GridFunction> {
    let values = g.values().iter().map(|v| v + by).collect();
    GridFunction::new(g.grid().clone(), values, TailModel::constant(g.tail().eval(1.0) + by))
}

pub fn run_example() -> membranes::Result<ComparisonVerdict> {
    let a = family_problem(65, 0.3, 0.7, Family::Pressed)?;
    let b = ProblemSpec::new(
        a.kernel1.clone(),
        a.kernel2.clone(),
        a.f1.clone(),
        a.f2.clone(),
        lifted(&a.exterior1, 0.1)?,
        lifted(&a.exterior2, 0.1)?,
    )?;
    let verdict = comparison_test(&a, &b, &SolverConfig::default())?;
    println!(
        "min(u1_B - u1_A) = {:.4}, min(u2_B - u2_A) = {:.4}, ordered: {}",
        verdict.gap_1, verdict.gap_2, verdict.ordered
    );
    Ok(verdict)
}

fn main() -> membranes::Result<()> {
    run_example().map(|_| ())
}
