use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::{Grid, Point};
use crate::error::{Error, Result};

/// Far-field model `u(x) = coeff * |x|^exponent` outside the truncated box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailModel {
    pub coeff: f64,
    pub exponent: f64,
}

impl TailModel {
    pub const ZERO: TailModel = TailModel {
        coeff: 0.0,
        exponent: 0.0,
    };

    pub fn constant(c: f64) -> Self {
        Self {
            coeff: c,
            exponent: 0.0,
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        if self.coeff == 0.0 {
            0.0
        } else if self.exponent == 0.0 {
            self.coeff
        } else {
            self.coeff * r.powf(self.exponent)
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            coeff: a * self.coeff,
            exponent: self.exponent,
        }
    }

    /// Checks `exponent < limit`, the integrability condition against the kernel tails.
    pub fn check_integrable(&self, limit: f64) -> Result<()> {
        if self.coeff != 0.0 && self.exponent >= limit {
            return Err(Error::DivergentTail {
                exponent: self.exponent,
                limit,
            });
        }
        Ok(())
    }
}

/// Nodal values on a [`Grid`] together with a far-field [`TailModel`].
#[derive(Clone, Debug)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
    tail: TailModel,
}

impl PartialEq for GridFunction {
    fn eq(&self, other: &Self) -> bool {
        *self.grid == *other.grid && self.values == other.values && self.tail == other.tail
    }
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, tail: TailModel) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(
                "value count differs from the node count",
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Precondition(format!("non-finite value at node {i}")));
        }
        if !(tail.coeff.is_finite() && tail.exponent.is_finite()) {
            return Err(Error::Precondition("non-finite tail model".into()));
        }
        Ok(Self { grid, values, tail })
    }

    /// Builds values without the finiteness check (used for sentinel outputs).
    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>, tail: TailModel) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values, tail }
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
            tail: TailModel::ZERO,
        }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![c; n],
            tail: TailModel::constant(c),
        }
    }

    /// Samples `f` at every node.
    pub fn from_fn<F: Fn(Point) -> f64>(grid: Arc<Grid>, tail: TailModel, f: F) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self::new(grid, values, tail)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn tail(&self) -> TailModel {
        self.tail
    }

    pub fn with_tail(mut self, tail: TailModel) -> Self {
        self.tail = tail;
        self
    }

    /// Values at interior nodes, in [`Grid::interior`] order.
    pub fn interior_values(&self) -> Vec<f64> {
        self.grid
            .interior()
            .iter()
            .map(|&i| self.values[i])
            .collect()
    }

    /// Copy with the interior replaced by `u` (same order as [`Grid::interior`]).
    pub fn with_interior(&self, u: &[f64]) -> Self {
        let mut out = self.clone();
        for (&idx, &v) in self.grid.interior().iter().zip(u) {
            out.values[idx] = v;
        }
        out
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// `a * self + b * other`; tails must share the exponent unless one coefficient vanishes.
    pub fn linear_combination(&self, a: f64, other: &GridFunction, b: f64) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch(
                "linear combination of functions on different grids",
            ));
        }
        let tail = combine_tails(self.tail.scaled(a), other.tail.scaled(b))?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self {
            grid: self.grid.clone(),
            values,
            tail,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .filter(|v| v.is_finite())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn combine_tails(a: TailModel, b: TailModel) -> Result<TailModel> {
    if a.coeff == 0.0 {
        Ok(b)
    } else if b.coeff == 0.0 {
        Ok(a)
    } else if a.exponent == b.exponent {
        Ok(TailModel {
            coeff: a.coeff + b.coeff,
            exponent: a.exponent,
        })
    } else {
        Err(Error::Precondition(
            "cannot add tails with different exponents".into(),
        ))
    }
}
