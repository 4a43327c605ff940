//! Dyadic cubes of `Q0`, lattice navigation, and sparse families.
//!
//! A `Cube` is identified by its depth and dyadic position inside
//! `Q0 = [0,1)^n`; a depth-`d` cube has side `2^-d`. On a level-`L` grid a
//! depth-`d` cube covers `2^(L-d)` cells per side and its concentric triple
//! `3Q` is cell-aligned, so region membership is exact integer arithmetic.
//! The smoothed-neighborhood surrogate used everywhere is `3Q` clipped to
//! the full grid: corners are invisible to a piecewise-constant solver and
//! every verified inequality integrates over that set only.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{CellBox, Grid};

/// A dyadic subcube of `Q0`, grid-independent.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct Cube {
    depth: u32,
    pos: [u32; 2],
}

impl Cube {
    /// The root cube `Q0`.
    pub fn root() -> Cube {
        Cube {
            depth: 0,
            pos: [0, 0],
        }
    }

    pub fn new(depth: u32, pos: [u32; 2]) -> Cube {
        debug_assert!(pos[0] < (1 << depth) && pos[1] < (1 << depth));
        Cube { depth, pos }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn pos(&self) -> [u32; 2] {
        self.pos
    }

    /// Physical side length, `2^-depth`.
    pub fn side(&self) -> f64 {
        1.0 / (1u64 << self.depth) as f64
    }

    /// Physical volume `side^n`.
    pub fn volume(&self, dim: usize) -> f64 {
        self.side().powi(dim as i32)
    }

    /// Physical corner inside `Q0` (coordinates in `[0,1)`).
    pub fn corner(&self) -> [f64; 2] {
        let s = self.side();
        [self.pos[0] as f64 * s, self.pos[1] as f64 * s]
    }

    /// Side length in grid cells.
    pub fn side_cells(&self, grid: &Grid) -> usize {
        debug_assert!(self.depth <= grid.level());
        1usize << (grid.level() - self.depth)
    }

    /// Cells covered by the cube.
    pub fn cell_box(&self, grid: &Grid) -> CellBox {
        let m = grid.cells_per_unit() as i64;
        let s = self.side_cells(grid) as i64;
        let lox = m + self.pos[0] as i64 * s;
        if grid.dim() == 1 {
            CellBox::new([lox, 0], [lox + s, 1])
        } else {
            let loy = m + self.pos[1] as i64 * s;
            CellBox::new([lox, loy], [lox + s, loy + s])
        }
    }

    /// Cell count `|Q|` on the grid.
    pub fn cell_count(&self, grid: &Grid) -> usize {
        self.cell_box(grid).cell_count()
    }

    /// The concentric triple `3Q`, clipped to the grid. For cubes in
    /// `D(Q0)` the triple always fits inside `3Q0`, so the clip is a no-op.
    pub fn triple_box(&self, grid: &Grid) -> CellBox {
        self.cell_box(grid).dilate(3).clip(grid)
    }

    /// The concentric double `2Q` as a cell box (clipped to the grid).
    /// `2Q` extends the cube by half its side on each face, cell-aligned
    /// for depth < L; a single cell is its own double (half-cells do not
    /// exist on the grid).
    pub fn double_box(&self, grid: &Grid) -> CellBox {
        let b = self.cell_box(grid);
        let sx = (b.hi[0] - b.lo[0]) / 2;
        let sy = (b.hi[1] - b.lo[1]) / 2;
        CellBox::new([b.lo[0] - sx, b.lo[1] - sy], [b.hi[0] + sx, b.hi[1] + sy]).clip(grid)
    }

    /// The `2^n` dyadic children.
    pub fn children(&self, grid: &Grid) -> Result<Vec<Cube>> {
        if self.depth >= grid.level() {
            return Err(Error::DepthExhausted(self.to_string()));
        }
        let d = self.depth + 1;
        let bx = self.pos[0] * 2;
        let by = self.pos[1] * 2;
        let mut out = Vec::with_capacity(1 << grid.dim());
        if grid.dim() == 1 {
            for ix in 0..2 {
                out.push(Cube::new(d, [bx + ix, 0]));
            }
        } else {
            for iy in 0..2 {
                for ix in 0..2 {
                    out.push(Cube::new(d, [bx + ix, by + iy]));
                }
            }
        }
        Ok(out)
    }

    pub fn parent(&self) -> Option<Cube> {
        if self.depth == 0 {
            None
        } else {
            Some(Cube::new(self.depth - 1, [self.pos[0] / 2, self.pos[1] / 2]))
        }
    }

    /// Is `other` contained in `self` (as dyadic cubes)?
    pub fn contains(&self, other: &Cube) -> bool {
        if other.depth < self.depth {
            return false;
        }
        let shift = other.depth - self.depth;
        (other.pos[0] >> shift) == self.pos[0] && (other.pos[1] >> shift) == self.pos[1]
    }

    /// Child-index path from the root, one entry per level.
    pub fn address(&self) -> Vec<u8> {
        let mut addr = vec![0u8; self.depth as usize];
        for k in 0..self.depth {
            let shift = self.depth - 1 - k;
            let bx = (self.pos[0] >> shift) & 1;
            let by = (self.pos[1] >> shift) & 1;
            addr[k as usize] = (bx | (by << 1)) as u8;
        }
        addr
    }

    /// All dyadic subcubes of `self` down to `max_depth`, including `self`,
    /// ordered by depth.
    pub fn descendants(&self, grid: &Grid, max_depth: u32) -> Vec<Cube> {
        let max_depth = max_depth.min(grid.level());
        let mut out = vec![*self];
        let mut level_start = 0usize;
        let mut depth = self.depth;
        while depth < max_depth {
            let level_end = out.len();
            for k in level_start..level_end {
                let q = out[k];
                out.extend(q.children(grid).expect("depth checked"));
            }
            level_start = level_end;
            depth += 1;
        }
        out
    }
}

impl fmt::Display for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}:({},{})", self.depth, self.pos[0], self.pos[1])
    }
}

/// A collection of cubes with disjoint witness sets `E_P ⊆ P`.
///
/// `theta` is the sparsity parameter: the family is theta-sparse when every
/// witness holds at least `theta·|P|` cells and the witnesses are pairwise
/// disjoint. `generations` partitions the cubes into the levels produced by
/// the stopping-time recursion; `residuals` records the leftover mass
/// `Σ L(P)` per generation.
#[derive(Clone, Debug)]
pub struct SparseFamily {
    pub cubes: Vec<Cube>,
    /// Witness cells per cube, as grid cell indices.
    pub witnesses: HashMap<Cube, Vec<u32>>,
    pub theta: f64,
    /// Indices into `cubes`, one vector per generation.
    pub generations: Vec<Vec<usize>>,
    /// Per-generation leftover term `Σ_{P ∈ S_j} L(P)`.
    pub residuals: Vec<f64>,
}

impl SparseFamily {
    /// Single-cube family with full witness.
    pub fn singleton(grid: &Grid, cube: Cube, theta: f64) -> SparseFamily {
        let cells: Vec<u32> = cube.cell_box(grid).cells(grid).map(|c| c as u32).collect();
        let mut witnesses = HashMap::new();
        witnesses.insert(cube, cells);
        SparseFamily {
            cubes: vec![cube],
            witnesses,
            theta,
            generations: vec![vec![0]],
            residuals: Vec::new(),
        }
    }
}

/// Outcome of the exact sparsity verification.
#[derive(Clone, Copy, Debug)]
pub struct SparsityReport {
    pub is_sparse: bool,
    /// min over cubes of `|E_P| / |P|`, exact cell counting.
    pub min_ratio: f64,
    /// Number of cells covered by two or more witness sets.
    pub overlap_violations: usize,
}

/// Verify the sparsity of a family by exact cell counting.
///
/// The verdict is reproducible bit for bit: witness cardinalities and
/// overlaps are integers, and the single division per cube is exact enough
/// to compare against `theta` after cross-multiplication.
pub fn verify_sparsity(grid: &Grid, fam: &SparseFamily) -> Result<SparsityReport> {
    let mut occupancy = vec![0u16; grid.num_cells()];
    let mut min_ratio = f64::INFINITY;
    let mut ratio_ok = true;
    for cube in &fam.cubes {
        let witness = fam
            .witnesses
            .get(cube)
            .ok_or_else(|| Error::MissingWitness(cube.to_string()))?;
        let cube_cells = cube.cell_count(grid);
        // integer comparison |E_P| * 1 >= theta * |P| via exact f64 products
        // (cell counts are far below 2^53)
        if (witness.len() as f64) < fam.theta * cube_cells as f64 {
            ratio_ok = false;
        }
        min_ratio = min_ratio.min(witness.len() as f64 / cube_cells as f64);
        for &c in witness {
            occupancy[c as usize] += 1;
        }
    }
    let overlap_violations = occupancy.iter().filter(|&&k| k >= 2).count();
    Ok(SparsityReport {
        is_sparse: ratio_ok && overlap_violations == 0,
        min_ratio: if min_ratio.is_finite() { min_ratio } else { 1.0 },
        overlap_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2() -> Grid {
        Grid::new(2, 5).unwrap()
    }

    #[test]
    fn children_partition_quarters() {
        let g = grid2();
        let q0 = Cube::root();
        let kids = q0.children(&g).unwrap();
        assert_eq!(kids.len(), 4);
        for k in &kids {
            assert_eq!(k.depth(), 1);
            assert!((k.side() - 0.5).abs() < 1e-16);
        }
        let total: usize = kids.iter().map(|k| k.cell_count(&g)).sum();
        assert_eq!(total, q0.cell_count(&g));
    }

    #[test]
    fn children_partition_1d() {
        let g = Grid::new(1, 5).unwrap();
        let kids = Cube::root().children(&g).unwrap();
        assert_eq!(kids.len(), 2);
        assert_eq!(kids[0].cell_box(&g).hi[0], kids[1].cell_box(&g).lo[0]);
    }

    #[test]
    fn children_partition_exact_cells() {
        // union of children's cells equals the parent's cells, exhaustively
        // over the depth-5 lattice of a 3*2^5 grid
        let g = grid2();
        for q in Cube::root().descendants(&g, 4) {
            let kids = q.children(&g).unwrap();
            let mut covered = vec![false; g.num_cells()];
            for k in &kids {
                for c in k.cell_box(&g).cells(&g) {
                    assert!(!covered[c], "children overlap");
                    covered[c] = true;
                }
            }
            for c in q.cell_box(&g).cells(&g) {
                assert!(covered[c], "children miss a parent cell");
            }
        }
    }

    #[test]
    fn depth_exhausted_error() {
        let g = Grid::new(2, 2).unwrap();
        let cell = Cube::new(2, [1, 2]);
        assert!(matches!(
            cell.children(&g),
            Err(Error::DepthExhausted(_))
        ));
    }

    #[test]
    fn triple_of_root_is_full_grid() {
        let g = grid2();
        assert_eq!(Cube::root().triple_box(&g), g.full_box());
    }

    #[test]
    fn triple_of_first_quadrant() {
        // [0,1/2)^2 inside Q0: triple is [-1/2, 1)^2
        let g = grid2();
        let q = Cube::new(1, [0, 0]);
        let t = q.triple_box(&g);
        let m = g.cells_per_unit() as i64;
        assert_eq!(t.lo, [m / 2, m / 2]);
        assert_eq!(t.hi, [2 * m, 2 * m]);
    }

    #[test]
    fn triples_nested_exhaustively() {
        // for all P in D(Q0) up to depth 5: 3P inside 3Q0
        let g = grid2();
        let root3 = Cube::root().triple_box(&g);
        for q in Cube::root().descendants(&g, 5) {
            assert!(root3.contains_box(&q.triple_box(&g)));
            if let Some(p) = q.parent() {
                assert!(p.triple_box(&g).contains_box(&q.triple_box(&g)));
            }
        }
    }

    #[test]
    fn address_roundtrip() {
        let q = Cube::new(3, [5, 2]);
        let addr = q.address();
        assert_eq!(addr.len(), 3);
        let mut r = Cube::root();
        let g = grid2();
        for &a in &addr {
            let kids = r.children(&g).unwrap();
            r = kids[a as usize];
        }
        assert_eq!(r, q);
    }

    #[test]
    fn sparsity_singleton() {
        let g = grid2();
        let fam = SparseFamily::singleton(&g, Cube::root(), 0.5);
        let rep = verify_sparsity(&g, &fam).unwrap();
        assert!(rep.is_sparse);
        assert_eq!(rep.min_ratio, 1.0);
        assert_eq!(rep.overlap_violations, 0);
    }

    #[test]
    fn sparsity_duplicate_cube_fails() {
        let g = grid2();
        let mut fam = SparseFamily::singleton(&g, Cube::root(), 0.5);
        // duplicate the root: identical witnesses overlap on every cell
        fam.cubes.push(Cube::root());
        let rep = verify_sparsity(&g, &fam).unwrap();
        assert!(!rep.is_sparse);
        assert!(rep.overlap_violations >= 1);
    }

    #[test]
    fn sparsity_missing_witness() {
        let g = grid2();
        let mut fam = SparseFamily::singleton(&g, Cube::root(), 0.5);
        fam.cubes.push(Cube::new(1, [0, 0]));
        assert!(matches!(
            verify_sparsity(&g, &fam),
            Err(Error::MissingWitness(_))
        ));
    }
}
