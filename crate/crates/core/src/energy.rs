//! The two-membranes energy, the discrete bilinear form and Euler–Lagrange residuals.
//!
//! With `E_h` the discrete form (half the double integral of products of increments)
//! and `f_k` the forcing, the energy is
//! `F(u1, u2) = ½E_1(u1, u1) + ½E_2(u2, u2) + ∫_{B_1} (u1 f1 + u2 f2)`,
//! whose first variation gives `L_1 u1 <= f1`, `L_2 u2 >= f2` and
//! `L_1 u1 + L_2 u2 = f1 + f2`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_kernel::{
    build_operator, DiscreteNonlocalOperator, Grid, GridFunction, KernelSpec, TailModel,
};
use crate::linalg::{dot, InteriorOperator};

/// Data of a two-membranes problem on a shared grid.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub grid: Arc<Grid>,
    pub kernel1: KernelSpec,
    pub kernel2: KernelSpec,
    /// Forcing; only interior values are used.
    pub f1: GridFunction,
    pub f2: GridFunction,
    /// Exterior data `u1⁰`, `u2⁰`; only exterior values (and tails) are used.
    pub exterior1: GridFunction,
    pub exterior2: GridFunction,
}

impl ProblemSpec {
    pub fn new(
        kernel1: KernelSpec,
        kernel2: KernelSpec,
        f1: GridFunction,
        f2: GridFunction,
        exterior1: GridFunction,
        exterior2: GridFunction,
    ) -> Result<Self> {
        let grid = f1.grid().clone();
        for g in [&f2, &exterior1, &exterior2] {
            if !g.same_grid(&f1) {
                return Err(Error::GridMismatch("problem data on different grids"));
            }
        }
        let spec = Self {
            grid,
            kernel1,
            kernel2,
            f1,
            f2,
            exterior1,
            exterior2,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        for &i in g.interior() {
            if !(self.f1.values()[i].is_finite() && self.f2.values()[i].is_finite()) {
                return Err(Error::InconsistentData(format!(
                    "non-finite forcing at node {i}"
                )));
            }
        }
        for i in g.first_exterior_ring() {
            let (a, b) = (self.exterior1.values()[i], self.exterior2.values()[i]);
            if b > a {
                return Err(Error::InconsistentData(format!(
                    "exterior data cross next to the boundary: u2 - u1 = {:e} at x = {:?}",
                    b - a,
                    g.point(i)
                )));
            }
        }
        self.exterior1
            .tail()
            .check_integrable(2.0 * self.kernel1.order())?;
        self.exterior2
            .tail()
            .check_integrable(2.0 * self.kernel2.order())?;
        Ok(())
    }

    /// Contact threshold `h^{1 + min(s1, s2)}`.
    pub fn contact_threshold(&self) -> f64 {
        self.grid
            .h()
            .powf(1.0 + self.kernel1.order().min(self.kernel2.order()))
    }

    /// Admissibility slack `h^2`.
    pub fn slack(&self) -> f64 {
        self.grid.h() * self.grid.h()
    }
}

/// The coupled unknowns; exterior values always equal the problem's data.
#[derive(Clone, Debug, PartialEq)]
pub struct MembranePair {
    pub u1: GridFunction,
    pub u2: GridFunction,
}

impl MembranePair {
    /// Fills the interior from `u1`, `u2` (interior order) and the exterior from the data.
    pub fn from_interior(problem: &ProblemSpec, u1: &[f64], u2: &[f64]) -> Self {
        Self {
            u1: problem.exterior1.with_interior(u1),
            u2: problem.exterior2.with_interior(u2),
        }
    }

    /// The pair equal to the data outside and zero inside.
    pub fn zero_interior(problem: &ProblemSpec) -> Self {
        let n = problem.grid.interior_count();
        Self::from_interior(problem, &vec![0.0; n], &vec![0.0; n])
    }

    pub fn interior(&self) -> (Vec<f64>, Vec<f64>) {
        (self.u1.interior_values(), self.u2.interior_values())
    }

    /// Largest `u2 - u1` over interior nodes with its grid index.
    pub fn worst_violation(&self) -> (usize, f64) {
        let g = self.u1.grid();
        let mut worst = (usize::MAX, f64::NEG_INFINITY);
        for &i in g.interior() {
            let d = self.u2.values()[i] - self.u1.values()[i];
            if d > worst.1 {
                worst = (i, d);
            }
        }
        worst
    }

    pub fn check_admissible(&self, slack: f64) -> Result<()> {
        let (node, v) = self.worst_violation();
        if node != usize::MAX && v > slack {
            return Err(Error::Inadmissible {
                node,
                x: self.u1.grid().point(node),
                violation: v,
            });
        }
        Ok(())
    }
}

/// Nodewise Euler–Lagrange defects, all nonnegative.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `max (L1 u1 - f1)^+`.
    pub max_sub_violation_1: f64,
    /// `max (f2 - L2 u2)^+`.
    pub max_super_violation_2: f64,
    /// `max |L1 u1 + L2 u2 - f1 - f2|`.
    pub max_sum_defect: f64,
    /// `max |(u1 - u2)(f1 - L1 u1)|`.
    pub max_complementarity_defect: f64,
    /// Per interior node `(u1 - u2)(f1 - L1 u1)`.
    #[serde(skip)]
    pub complementarity: Vec<f64>,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.max_sub_violation_1
            .max(self.max_super_violation_2)
            .max(self.max_sum_defect)
            .max(self.max_complementarity_defect)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// `E_h(u, v)` for a prebuilt operator.
pub fn inner_product_with(
    op: &DiscreteNonlocalOperator,
    u: &GridFunction,
    v: &GridFunction,
) -> Result<f64> {
    let g = op.grid();
    if !(u.same_grid(v) && **u.grid() == **g) {
        return Err(Error::GridMismatch(
            "inner product of functions on different grids",
        ));
    }
    let bu = op.tail_forcing(&u.tail())?;
    let bv = op.tail_forcing(&v.tail())?;
    let (tu, tv) = (u.tail(), v.tail());
    let product = if tu.coeff == 0.0 || tv.coeff == 0.0 {
        TailModel::ZERO
    } else {
        TailModel {
            coeff: tu.coeff * tv.coeff,
            exponent: tu.exponent + tv.exponent,
        }
    };
    let buv = op.tail_forcing(&product)?;
    let (uv, vv) = (u.values(), v.values());
    let tau = op.tail_coefficients();
    let mut total = 0.0;
    for (slot, &i) in g.interior().iter().enumerate() {
        let (ui, vi) = (uv[i], vv[i]);
        let mut row = 0.0;
        op.visit_row(slot, |j, w| {
            let half = if g.is_interior(j) { 0.5 } else { 1.0 };
            row += half * w * ((ui - uv[j]) * (vi - vv[j]));
        });
        let tail = ui * vi * tau[slot] - (ui * bv[slot] + vi * bu[slot]) + buv[slot];
        total += row + tail;
    }
    Ok(total * g.cell_volume())
}

/// `E_h(u, v)`: half the double sum of kernel-weighted increment products over all
/// pairs with at least one interior point, plus the tail contribution.
pub fn inner_product(
    u: &GridFunction,
    v: &GridFunction,
    kernel: &KernelSpec,
    grid: &Arc<Grid>,
) -> Result<f64> {
    let op = build_operator(grid, kernel)?;
    inner_product_with(&op, u, v)
}

/// Assembled operators and interior right-hand sides of a [`ProblemSpec`].
pub struct MembraneSystem {
    pub problem: ProblemSpec,
    pub op1: DiscreteNonlocalOperator,
    pub op2: DiscreteNonlocalOperator,
    pub a1: InteriorOperator,
    pub a2: InteriorOperator,
    /// `c_k = g_k - f_k`, so that `F = h^n (½ u1ᵀA1u1 - c1ᵀu1 + ½ u2ᵀA2u2 - c2ᵀu2) + const`.
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    energy_offset: f64,
}

impl MembraneSystem {
    pub fn new(problem: &ProblemSpec) -> Result<Self> {
        let op1 = build_operator(&problem.grid, &problem.kernel1)?;
        let op2 = build_operator(&problem.grid, &problem.kernel2)?;
        Self::with_operators(problem, op1, op2)
    }

    pub fn with_operators(
        problem: &ProblemSpec,
        op1: DiscreteNonlocalOperator,
        op2: DiscreteNonlocalOperator,
    ) -> Result<Self> {
        problem.validate()?;
        if **op1.grid() != *problem.grid || **op2.grid() != *problem.grid {
            return Err(Error::GridMismatch("operators assembled on another grid"));
        }
        let g1 = op1.exterior_forcing(&problem.exterior1)?;
        let g2 = op2.exterior_forcing(&problem.exterior2)?;
        let f1 = problem.f1.interior_values();
        let f2 = problem.f2.interior_values();
        let c1 = g1.iter().zip(&f1).map(|(g, f)| g - f).collect();
        let c2 = g2.iter().zip(&f2).map(|(g, f)| g - f).collect();
        let mut sys = Self {
            problem: problem.clone(),
            a1: op1.interior_operator(),
            a2: op2.interior_operator(),
            op1,
            op2,
            c1,
            c2,
            f1,
            f2,
            energy_offset: 0.0,
        };
        let zero = MembranePair::zero_interior(problem);
        sys.energy_offset = sys.total_energy(&zero)?;
        Ok(sys)
    }

    pub fn len(&self) -> usize {
        self.c1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c1.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.problem.grid.cell_volume()
    }

    pub fn pair(&self, u1: &[f64], u2: &[f64]) -> MembranePair {
        MembranePair::from_interior(&self.problem, u1, u2)
    }

    /// Energy from interior vectors through the quadratic form; equals
    /// [`MembraneSystem::total_energy`] up to rounding.
    pub fn quadratic_energy(&self, u1: &[f64], u2: &[f64]) -> f64 {
        let a1u = self.a1.matvec(u1);
        let a2u = self.a2.matvec(u2);
        let q = 0.5 * dot(u1, &a1u) - dot(&self.c1, u1) + 0.5 * dot(u2, &a2u) - dot(&self.c2, u2);
        self.cell_volume() * q + self.energy_offset
    }

    /// Interior gradients `A_k u_k - c_k` in operator units (the energy gradient divided by `h^n`).
    pub fn scaled_gradient(&self, u1: &[f64], u2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut g1 = self.a1.matvec(u1);
        let mut g2 = self.a2.matvec(u2);
        g1.iter_mut().zip(&self.c1).for_each(|(g, c)| *g -= c);
        g2.iter_mut().zip(&self.c2).for_each(|(g, c)| *g -= c);
        (g1, g2)
    }

    /// Full discrete energy of an admissible pair.
    pub fn total_energy(&self, pair: &MembranePair) -> Result<f64> {
        pair.check_admissible(self.problem.slack())?;
        let e1 = inner_product_with(&self.op1, &pair.u1, &pair.u1)?;
        let e2 = inner_product_with(&self.op2, &pair.u2, &pair.u2)?;
        let g = &self.problem.grid;
        let work: f64 = g
            .interior()
            .iter()
            .map(|&i| {
                pair.u1.values()[i] * self.problem.f1.values()[i]
                    + pair.u2.values()[i] * self.problem.f2.values()[i]
            })
            .sum();
        Ok(0.5 * e1 + 0.5 * e2 + g.cell_volume() * work)
    }

    /// Exact gradient of [`MembraneSystem::total_energy`]: `h^n (f_k - L_k u_k)` inside, zero outside.
    pub fn energy_gradient(&self, pair: &MembranePair) -> Result<(GridFunction, GridFunction)> {
        pair.check_admissible(self.problem.slack())?;
        let g = &self.problem.grid;
        let hv = g.cell_volume();
        let mut out = Vec::with_capacity(2);
        for (op, u, f) in [
            (&self.op1, &pair.u1, &self.problem.f1),
            (&self.op2, &pair.u2, &self.problem.f2),
        ] {
            let lu = op.apply(u)?;
            let mut grad = GridFunction::zeros(g.clone());
            for &i in g.interior() {
                grad.values_mut()[i] = hv * (f.values()[i] - lu.values()[i]);
            }
            out.push(grad);
        }
        let g2 = out.pop().unwrap();
        let g1 = out.pop().unwrap();
        Ok((g1, g2))
    }

    pub fn el_residuals(&self, pair: &MembranePair) -> Result<ResidualReport> {
        let l1 = self.op1.apply(&pair.u1)?;
        let l2 = self.op2.apply(&pair.u2)?;
        let g = &self.problem.grid;
        let mut r = ResidualReport::default();
        for &i in g.interior() {
            let (a, b) = (l1.values()[i], l2.values()[i]);
            let (f1, f2) = (self.problem.f1.values()[i], self.problem.f2.values()[i]);
            r.max_sub_violation_1 = r.max_sub_violation_1.max(a - f1);
            r.max_super_violation_2 = r.max_super_violation_2.max(f2 - b);
            r.max_sum_defect = r.max_sum_defect.max((a + b - f1 - f2).abs());
            let c = (pair.u1.values()[i] - pair.u2.values()[i]) * (f1 - a);
            r.max_complementarity_defect = r.max_complementarity_defect.max(c.abs());
            r.complementarity.push(c);
        }
        Ok(r)
    }
}

/// `F(u1, u2)`; assembles both operators on each call.
pub fn total_energy(pair: &MembranePair, problem: &ProblemSpec) -> Result<f64> {
    pair.check_admissible(problem.slack())?;
    MembraneSystem::new(problem)?.total_energy(pair)
}

pub fn energy_gradient(
    pair: &MembranePair,
    problem: &ProblemSpec,
) -> Result<(GridFunction, GridFunction)> {
    MembraneSystem::new(problem)?.energy_gradient(pair)
}

pub fn el_residuals(pair: &MembranePair, problem: &ProblemSpec) -> Result<ResidualReport> {
    MembraneSystem::new(problem)?.el_residuals(pair)
}
