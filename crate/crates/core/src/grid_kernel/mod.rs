//! Grids, kernels, the discrete operator and weighted norms.

pub mod function;
pub mod grid;
pub mod kernel;
pub mod norm;
pub mod operator;

pub use function::{GridFunction, TailModel};
pub use grid::{Grid, Point, DEFAULT_EXTERIOR_RADIUS};
pub use kernel::{classical_constant, KernelKind, KernelSpec, LogModulation};
pub use norm::{weighted_l1_norm, weighted_l1_positive, weighted_l2_norm};
pub use operator::{apply_operator, build_operator, DiscreteNonlocalOperator};

/// The kernel `r^{n+2s} K(r y)`; fractional power kernels are fixed points.
pub fn rescale_kernel(kernel: &KernelSpec, r: f64) -> crate::Result<KernelSpec> {
    if !(r > 0.0) {
        return Err(crate::Error::InvalidKernel(format!(
            "rescaling factor {r} must be positive"
        )));
    }
    kernel.rescale(r)
}
