//! The global uniform grid over `3Q0` and cell-index boxes.
//!
//! `Q0 = [0,1)^n` and the grid covers `3Q0 = [-1,2)^n` with `3·2^L` cells
//! per side, cell width `h = 2^-L`. Dimensions 1 and 2 share one code path:
//! a 1D grid is stored as a single row (`extent[1] = 1`).

use crate::error::{Error, Result};

/// Uniform grid descriptor.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct Grid {
    dim: usize,
    level: u32,
}

impl Grid {
    pub fn new(dim: usize, level: u32) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::BadDimension(dim));
        }
        if level == 0 || level > 14 {
            return Err(Error::Invalid(format!("grid level {level} out of range")));
        }
        Ok(Grid { dim, level })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Cells per side of `Q0`.
    pub fn cells_per_unit(&self) -> usize {
        1usize << self.level
    }

    /// Cells per side of the full `3Q0` grid.
    pub fn side(&self) -> usize {
        3usize << self.level
    }

    /// Cell width in physical units.
    pub fn h(&self) -> f64 {
        1.0 / (1u64 << self.level) as f64
    }

    /// `h^n`, the measure of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Extent of the index space per axis (`[side, 1]` in 1D).
    pub fn extent(&self) -> [usize; 2] {
        if self.dim == 1 {
            [self.side(), 1]
        } else {
            [self.side(), self.side()]
        }
    }

    pub fn num_cells(&self) -> usize {
        let e = self.extent();
        e[0] * e[1]
    }

    #[inline]
    pub fn index(&self, c: [usize; 2]) -> usize {
        debug_assert!(c[0] < self.extent()[0] && c[1] < self.extent()[1]);
        c[1] * self.extent()[0] + c[0]
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 2] {
        let w = self.extent()[0];
        [idx % w, idx / w]
    }

    #[inline]
    pub fn in_grid(&self, c: [i64; 2]) -> bool {
        let e = self.extent();
        c[0] >= 0 && (c[0] as usize) < e[0] && c[1] >= 0 && (c[1] as usize) < e[1]
    }

    /// Physical coordinates of a cell center; the grid origin is at `-1`.
    pub fn cell_center(&self, c: [usize; 2]) -> [f64; 2] {
        let h = self.h();
        let x = -1.0 + (c[0] as f64 + 0.5) * h;
        let y = if self.dim == 2 {
            -1.0 + (c[1] as f64 + 0.5) * h
        } else {
            0.0
        };
        [x, y]
    }

    /// The box of all grid cells.
    pub fn full_box(&self) -> CellBox {
        let e = self.extent();
        CellBox {
            lo: [0, 0],
            hi: [e[0] as i64, e[1] as i64],
        }
    }

    /// Cells of `Q0` (the middle third).
    pub fn unit_box(&self) -> CellBox {
        let m = self.cells_per_unit() as i64;
        if self.dim == 1 {
            CellBox {
                lo: [m, 0],
                hi: [2 * m, 1],
            }
        } else {
            CellBox {
                lo: [m, m],
                hi: [2 * m, 2 * m],
            }
        }
    }
}

/// Half-open box of cell indices, possibly extending outside the grid.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct CellBox {
    pub lo: [i64; 2],
    pub hi: [i64; 2],
}

impl CellBox {
    pub fn new(lo: [i64; 2], hi: [i64; 2]) -> Self {
        CellBox { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        self.hi[0] <= self.lo[0] || self.hi[1] <= self.lo[1]
    }

    pub fn cell_count(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            ((self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])) as usize
        }
    }

    pub fn contains(&self, c: [i64; 2]) -> bool {
        c[0] >= self.lo[0] && c[0] < self.hi[0] && c[1] >= self.lo[1] && c[1] < self.hi[1]
    }

    pub fn contains_box(&self, other: &CellBox) -> bool {
        other.is_empty()
            || (other.lo[0] >= self.lo[0]
                && other.lo[1] >= self.lo[1]
                && other.hi[0] <= self.hi[0]
                && other.hi[1] <= self.hi[1])
    }

    pub fn intersect(&self, other: &CellBox) -> CellBox {
        CellBox {
            lo: [self.lo[0].max(other.lo[0]), self.lo[1].max(other.lo[1])],
            hi: [self.hi[0].min(other.hi[0]), self.hi[1].min(other.hi[1])],
        }
    }

    /// Concentric dilation by an odd integer factor (3 gives the triple).
    pub fn dilate(&self, factor: i64) -> CellBox {
        debug_assert!(factor >= 1 && factor % 2 == 1);
        let k = (factor - 1) / 2;
        let sx = self.hi[0] - self.lo[0];
        let sy = self.hi[1] - self.lo[1];
        CellBox {
            lo: [self.lo[0] - k * sx, self.lo[1] - k * sy],
            hi: [self.hi[0] + k * sx, self.hi[1] + k * sy],
        }
    }

    pub fn clip(&self, grid: &Grid) -> CellBox {
        self.intersect(&grid.full_box())
    }

    /// Iterate the cells of the box that lie inside the grid.
    pub fn cells<'a>(&self, grid: &'a Grid) -> impl Iterator<Item = usize> + 'a {
        let b = self.clip(grid);
        let grid = *grid;
        (b.lo[1]..b.hi[1]).flat_map(move |y| {
            (b.lo[0]..b.hi[0]).map(move |x| grid.index([x as usize, y as usize]))
        })
    }

    /// Split into 2^n congruent dyadic half-boxes. Extents must be even
    /// (1 is allowed on the padded axis of a 1D grid).
    pub fn dyadic_children(&self, dim: usize) -> Vec<CellBox> {
        let sx = self.hi[0] - self.lo[0];
        let sy = self.hi[1] - self.lo[1];
        debug_assert!(sx % 2 == 0 && (dim == 1 || sy % 2 == 0));
        let hx = sx / 2;
        let mut out = Vec::with_capacity(1 << dim);
        if dim == 1 {
            for ix in 0..2 {
                out.push(CellBox {
                    lo: [self.lo[0] + ix * hx, self.lo[1]],
                    hi: [self.lo[0] + (ix + 1) * hx, self.hi[1]],
                });
            }
        } else {
            let hy = sy / 2;
            for iy in 0..2 {
                for ix in 0..2 {
                    out.push(CellBox {
                        lo: [self.lo[0] + ix * hx, self.lo[1] + iy * hy],
                        hi: [self.lo[0] + (ix + 1) * hx, self.lo[1] + (iy + 1) * hy],
                    });
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_basics() {
        let g = Grid::new(2, 3).unwrap();
        assert_eq!(g.side(), 24);
        assert_eq!(g.num_cells(), 576);
        assert_eq!(g.h(), 0.125);
        let c = g.coords(g.index([5, 7]));
        assert_eq!(c, [5, 7]);
        // center of the first cell of Q0
        let m = g.cells_per_unit();
        let ctr = g.cell_center([m, m]);
        assert!((ctr[0] - 0.0625).abs() < 1e-15 && (ctr[1] - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn box_dilate_and_clip() {
        let g = Grid::new(2, 3).unwrap();
        // Q0 occupies [8,16)^2 in cell indices; its triple is the full grid.
        let q0 = g.unit_box();
        assert_eq!(q0.dilate(3), g.full_box());
        let b = CellBox::new([-4, -4], [4, 4]);
        assert_eq!(b.clip(&g).cell_count(), 16);
    }

    #[test]
    fn one_dimensional_layout() {
        let g = Grid::new(1, 4).unwrap();
        assert_eq!(g.extent(), [48, 1]);
        assert_eq!(g.unit_box().cell_count(), 16);
        let kids = g.unit_box().dyadic_children(1);
        assert_eq!(kids.len(), 2);
        assert_eq!(kids[0].cell_count() + kids[1].cell_count(), 16);
    }
}
