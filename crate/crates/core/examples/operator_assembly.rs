// Assemble a fractional operator on a 1D grid and apply it to a smooth bump.

use std::sync::Arc;

use membranes::grid_kernel::{
    apply_operator, build_operator, Grid, GridFunction, KernelSpec, TailModel, DEFAULT_EXTERIOR_RADIUS,
};

/// Returns `(L 1, L bump)` at the middle node.
pub fn run_example() -> membranes::Result<(f64, f64)> {
    let grid = Arc::new(Grid::with_interior_nodes(1, 127, DEFAULT_EXTERIOR_RADIUS)?);
    let op = build_operator(&grid, &KernelSpec::fractional(0.5)?)?;
    let bump = GridFunction::from_fn(grid.clone(), TailModel::constant(0.0), |p| {
        (1.0 - p[0] * p[0]).max(0.0).powi(2)
    })?;
    let lu = apply_operator(&op, &bump)?;
    let mid = grid.interior()[grid.interior_count() / 2];
    let ones = GridFunction::constant(grid.clone(), 1.0);
    let annihilated = apply_operator(&op, &ones)?.values()[mid];
    println!("h = {:.4e}, diagonal at the origin {:.4}", grid.h(), op.diagonal()[grid.interior_count() / 2]);
    println!("L 1 = {annihilated:.2e}, L bump(0) = {:.6}", lu.values()[mid]);
    Ok((annihilated, lu.values()[mid]))
}

fn main() -> membranes::Result<()> {
    run_example().map(|_| ())
}
