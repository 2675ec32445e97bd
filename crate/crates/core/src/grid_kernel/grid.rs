use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Uniform grid tiling `[-R, R]^n`; the interior mask is the unit ball `|x| < 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    h: f64,
    exterior_radius: f64,
    half_steps: usize,
    per_axis: usize,
    interior: Vec<usize>,
    interior_slot: Vec<Option<usize>>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.h.to_bits() == other.h.to_bits()
            && self.exterior_radius.to_bits() == other.exterior_radius.to_bits()
    }
}

/// Points are stored as `[x, y]`; in one dimension `y = 0`.
pub type Point = [f64; 2];

pub const DEFAULT_EXTERIOR_RADIUS: f64 = 4.0;

impl Grid {
    pub fn new(dim: usize, h: f64, exterior_radius: f64) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidGrid(format!("dimension {dim} is not 1 or 2")));
        }
        if !(h > 0.0 && h < 1.0) {
            return Err(Error::InvalidGrid(format!(
                "spacing {h} must lie in (0, 1)"
            )));
        }
        if !(exterior_radius >= 2.0) {
            return Err(Error::InvalidGrid(format!(
                "exterior radius {exterior_radius} must be at least 2"
            )));
        }
        let ratio = exterior_radius / h;
        let half_steps = ratio.round();
        if (ratio - half_steps).abs() > 1e-9 * ratio {
            return Err(Error::InvalidGrid(format!(
                "spacing {h} does not divide the exterior radius {exterior_radius}"
            )));
        }
        let half_steps = half_steps as usize;
        let per_axis = 2 * half_steps + 1;
        let total = per_axis.pow(dim as u32);
        let mut grid = Self {
            dim,
            h,
            exterior_radius,
            half_steps,
            per_axis,
            interior: Vec::new(),
            interior_slot: vec![None; total],
        };
        for idx in 0..total {
            let p = grid.point(idx);
            if p[0] * p[0] + p[1] * p[1] < 1.0 - 1e-12 {
                grid.interior_slot[idx] = Some(grid.interior.len());
                grid.interior.push(idx);
            }
        }
        Ok(grid)
    }

    /// Grid with `n` interior nodes per axis, i.e. `h = 2/(n+1)`.
    pub fn with_interior_nodes(dim: usize, n: usize, exterior_radius: f64) -> Result<Self> {
        if n % 2 == 0 || n < 3 {
            return Err(Error::InvalidGrid(format!(
                "interior node count {n} must be odd and >= 3"
            )));
        }
        let steps = (n + 1) / 2;
        Self::new(dim, 1.0 / steps as f64, exterior_radius)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn exterior_radius(&self) -> f64 {
        self.exterior_radius
    }

    /// Number of grid steps from the origin to `R` along an axis.
    pub fn half_steps(&self) -> usize {
        self.half_steps
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn len(&self) -> usize {
        self.interior_slot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior_slot.is_empty()
    }

    /// Cell volume `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn axis_coord(&self, i: usize) -> f64 {
        (i as f64 - self.half_steps as f64) * self.h
    }

    /// Axis indices of node `idx` as `(ix, iy)`; `iy = 0` in 1D.
    pub fn axis_indices(&self, idx: usize) -> (usize, usize) {
        if self.dim == 1 {
            (idx, 0)
        } else {
            (idx % self.per_axis, idx / self.per_axis)
        }
    }

    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        if self.dim == 1 {
            ix
        } else {
            iy * self.per_axis + ix
        }
    }

    pub fn point(&self, idx: usize) -> Point {
        let (ix, iy) = self.axis_indices(idx);
        if self.dim == 1 {
            [self.axis_coord(ix), 0.0]
        } else {
            [self.axis_coord(ix), self.axis_coord(iy)]
        }
    }

    pub fn is_interior(&self, idx: usize) -> bool {
        self.interior_slot[idx].is_some()
    }

    /// Grid indices of interior nodes, in increasing order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Position of `idx` in [`Grid::interior`].
    pub fn interior_slot(&self, idx: usize) -> Option<usize> {
        self.interior_slot[idx]
    }

    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }

    /// Axis neighbors of a node (the stencil used for rings and free-boundary edges).
    pub fn axis_neighbors(&self, idx: usize) -> Vec<usize> {
        let (ix, iy) = self.axis_indices(idx);
        let mut out = Vec::with_capacity(4);
        if ix > 0 {
            out.push(self.node_index(ix - 1, iy));
        }
        if ix + 1 < self.per_axis {
            out.push(self.node_index(ix + 1, iy));
        }
        if self.dim == 2 {
            if iy > 0 {
                out.push(self.node_index(ix, iy - 1));
            }
            if iy + 1 < self.per_axis {
                out.push(self.node_index(ix, iy + 1));
            }
        }
        out
    }

    /// Exterior nodes adjacent to the interior.
    pub fn first_exterior_ring(&self) -> Vec<usize> {
        let mut ring: Vec<usize> = self
            .interior
            .iter()
            .flat_map(|&i| self.axis_neighbors(i))
            .filter(|&j| !self.is_interior(j))
            .collect();
        ring.sort_unstable();
        ring.dedup();
        ring
    }

    /// Interior nodes adjacent to the exterior.
    pub fn first_interior_ring(&self) -> Vec<usize> {
        self.interior
            .iter()
            .copied()
            .filter(|&i| self.axis_neighbors(i).iter().any(|&j| !self.is_interior(j)))
            .collect()
    }

    /// Stable content hash of the grid parameters.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"grid-v1");
        hasher.update((self.dim as u64).to_le_bytes());
        hasher.update(self.h.to_bits().to_le_bytes());
        hasher.update(self.exterior_radius.to_bits().to_le_bytes());
        hex::encode(hasher.finalize())
    }
}
