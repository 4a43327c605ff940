//! Domains `Ω ⊆ Q0` as boolean cell masks.

use std::collections::VecDeque;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::Region;
use crate::grid::{CellBox, Grid};

/// Built-in domain shapes plus custom masks.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DomainKind {
    /// All of `Q0`.
    FullCube,
    /// Concentric square of half-width `3/8`.
    Square,
    /// Disk of radius `3/8` centered in `Q0`.
    Disk,
    /// `Q0` minus its upper-right quadrant.
    LShape,
    Custom,
}

/// Boundary regularity tag carried for reporting.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Regularity {
    Lipschitz,
    C2,
}

/// A connected cell mask over the grid, marking `Ω`.
#[derive(Clone, Debug)]
pub struct Domain {
    pub kind: DomainKind,
    pub regularity: Regularity,
    mask: Vec<bool>,
    grid: Grid,
    count: usize,
}

impl Domain {
    pub fn builtin(grid: &Grid, kind: DomainKind) -> Result<Domain> {
        let mut mask = vec![false; grid.num_cells()];
        let inside = |x: f64, y: f64| -> bool {
            match kind {
                DomainKind::FullCube => (0.0..1.0).contains(&x) && (grid.dim() == 1 || (0.0..1.0).contains(&y)),
                DomainKind::Square => (x - 0.5).abs() < 0.375 && (grid.dim() == 1 || (y - 0.5).abs() < 0.375),
                DomainKind::Disk => {
                    if grid.dim() == 1 {
                        (x - 0.5).abs() < 0.375
                    } else {
                        (x - 0.5).powi(2) + (y - 0.5).powi(2) < 0.375 * 0.375
                    }
                }
                DomainKind::LShape => {
                    if grid.dim() == 1 {
                        (0.0..1.0).contains(&x)
                    } else {
                        (0.0..1.0).contains(&x) && (0.0..1.0).contains(&y) && !(x >= 0.5 && y >= 0.5)
                    }
                }
                DomainKind::Custom => false,
            }
        };
        for idx in 0..grid.num_cells() {
            let c = grid.coords(idx);
            let ctr = grid.cell_center([c[0], c[1]]);
            mask[idx] = inside(ctr[0], ctr[1]);
        }
        let regularity = match kind {
            DomainKind::Disk => Regularity::C2,
            _ => Regularity::Lipschitz,
        };
        Domain::from_mask(grid, mask, kind, regularity)
    }

    pub fn by_name(grid: &Grid, name: &str) -> Result<Domain> {
        let kind = match name {
            "full-cube" | "full_cube" | "cube" => DomainKind::FullCube,
            "square" => DomainKind::Square,
            "disk" => DomainKind::Disk,
            "l-shape" | "l_shape" | "lshape" => DomainKind::LShape,
            other => {
                return Err(Error::Parse(format!("unknown domain kind `{other}`")));
            }
        };
        Domain::builtin(grid, kind)
    }

    pub fn from_mask(
        grid: &Grid,
        mask: Vec<bool>,
        kind: DomainKind,
        regularity: Regularity,
    ) -> Result<Domain> {
        if mask.len() != grid.num_cells() {
            return Err(Error::Invalid("mask size does not match grid".into()));
        }
        let count = mask.iter().filter(|&&b| b).count();
        let dom = Domain {
            kind,
            regularity,
            mask,
            grid: *grid,
            count,
        };
        if count == 0 || !dom.is_connected() {
            return Err(Error::BadDomain);
        }
        Ok(dom)
    }

    /// Load a mask from a plain-text grid file: one row of `0`/`1`
    /// characters per grid row, whitespace ignored.
    pub fn load(grid: &Grid, path: &Path) -> Result<Domain> {
        let text = std::fs::read_to_string(path)?;
        let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let e = grid.extent();
        if rows.len() != e[1] {
            return Err(Error::Parse(format!(
                "domain file has {} rows, grid expects {}",
                rows.len(),
                e[1]
            )));
        }
        let mut mask = vec![false; grid.num_cells()];
        for (y, row) in rows.iter().enumerate() {
            let chars: Vec<char> = row.chars().filter(|c| !c.is_whitespace()).collect();
            if chars.len() != e[0] {
                return Err(Error::Parse(format!(
                    "domain row {y} has {} cells, grid expects {}",
                    chars.len(),
                    e[0]
                )));
            }
            for (x, ch) in chars.iter().enumerate() {
                mask[grid.index([x, y])] = match ch {
                    '0' => false,
                    '1' => true,
                    other => {
                        return Err(Error::Parse(format!("bad mask character `{other}`")));
                    }
                };
            }
        }
        Domain::from_mask(grid, mask, DomainKind::Custom, Regularity::Lipschitz)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn contains(&self, cell: usize) -> bool {
        self.mask[cell]
    }

    pub fn cell_count(&self) -> usize {
        self.count
    }

    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    /// Region of cells of `bx ∩ Ω`.
    pub fn region_in(&self, bx: &CellBox) -> Region {
        Region::from_cells(&self.grid, bx.cells(&self.grid).filter(|&c| self.mask[c]))
    }

    /// The whole domain as a region.
    pub fn region(&self) -> Region {
        Region::from_cells(&self.grid, self.cells())
    }

    /// 4-neighbor (2 in 1D) connectivity of the mask.
    fn is_connected(&self) -> bool {
        let start = match self.mask.iter().position(|&b| b) {
            Some(s) => s,
            None => return false,
        };
        let e = self.grid.extent();
        let mut seen = vec![false; self.mask.len()];
        let mut queue = VecDeque::new();
        seen[start] = true;
        queue.push_back(start);
        let mut reached = 1usize;
        while let Some(idx) = queue.pop_front() {
            let c = self.grid.coords(idx);
            let mut push = |x: i64, y: i64| {
                if x >= 0 && (x as usize) < e[0] && y >= 0 && (y as usize) < e[1] {
                    let j = self.grid.index([x as usize, y as usize]);
                    if self.mask[j] && !seen[j] {
                        seen[j] = true;
                        reached += 1;
                        queue.push_back(j);
                    }
                }
            };
            push(c[0] as i64 - 1, c[1] as i64);
            push(c[0] as i64 + 1, c[1] as i64);
            if self.grid.dim() == 2 {
                push(c[0] as i64, c[1] as i64 - 1);
                push(c[0] as i64, c[1] as i64 + 1);
            }
        }
        reached == self.count
    }
}
