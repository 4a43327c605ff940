//! Brute-force oracles shared by the integration suites. These implement
//! the defining formulas by direct enumeration and summation, independent
//! of the prefix-sum tree sweeps they are checked against.
#![allow(dead_code)] // each test target uses its own subset

use sparsegrad_core::{Cube, Grid, GridField};

/// The lattice cube of the given depth containing a cell.
pub fn cube_at(grid: &Grid, depth: u32, cell: usize) -> Cube {
    let xy = grid.coords(cell);
    let m = grid.cells_per_unit();
    let shift = grid.level() - depth;
    let px = ((xy[0] - m) >> shift) as u32;
    let py = if grid.dim() == 2 {
        ((xy[1] - m) >> shift) as u32
    } else {
        0
    };
    Cube::new(depth, [px, py])
}

fn direct_triple_mean(h: &GridField, grid: &Grid, q: &Cube) -> f64 {
    let t = q.triple_box(grid);
    let mut acc = 0.0;
    let mut n = 0usize;
    for c in t.cells(grid) {
        acc += h.magnitude(c);
        n += 1;
    }
    acc / n as f64
}

/// Per-cell enumeration of `sup_P 1_P ⟨|h|⟩_{3P}` with the cell-value
/// candidate at the finest level.
pub fn brute_dyadic_maximal(h: &GridField, root: Cube) -> GridField {
    let grid = *h.grid();
    let mut out = GridField::scalar(&grid);
    for cell in root.cell_box(&grid).cells(&grid) {
        let mut best = h.magnitude(cell);
        for depth in root.depth()..=grid.level() {
            let q = cube_at(&grid, depth, cell);
            best = best.max(direct_triple_mean(h, &grid, &q));
        }
        out.set(cell, best);
    }
    out
}

/// Per-cell enumeration of the fractional variant with `(3ℓ(P))^s`
/// factors, including the damped cell candidate.
pub fn brute_fractional_maximal(h: &GridField, s: f64, root: Cube) -> GridField {
    let grid = *h.grid();
    let mut out = GridField::scalar(&grid);
    for cell in root.cell_box(&grid).cells(&grid) {
        let mut best = (3.0 * grid.h()).powf(s) * h.magnitude(cell);
        for depth in root.depth()..=grid.level() {
            let q = cube_at(&grid, depth, cell);
            best = best.max((3.0 * q.side()).powf(s) * direct_triple_mean(h, &grid, &q));
        }
        out.set(cell, best);
    }
    out
}

/// Per-cell enumeration of the weighted maximal function with plain
/// averages.
pub fn brute_weighted_maximal(h: &GridField, sigma: &GridField, root: Cube) -> GridField {
    let grid = *h.grid();
    let mut out = GridField::scalar(&grid);
    for cell in root.cell_box(&grid).cells(&grid) {
        let mut best = f64::NEG_INFINITY;
        for depth in root.depth()..=grid.level() {
            let q = cube_at(&grid, depth, cell);
            let mut num = 0.0;
            let mut den = 0.0;
            for c in q.cell_box(&grid).cells(&grid) {
                num += h.value(c) * sigma.value(c);
                den += sigma.value(c);
            }
            best = best.max(num / den);
        }
        out.set(cell, best);
    }
    out
}

/// All strict descendants of `root` (the candidate set of the stopping
/// rules), ordered by depth.
pub fn strict_descendants(grid: &Grid, root: Cube) -> Vec<Cube> {
    root.descendants(grid, grid.level())
        .into_iter()
        .filter(|q| q.depth() > root.depth())
        .collect()
}

/// Exhaustive threshold stopping: maximal `P` with `⟨v⟩_{3P} > t`, cells
/// also stopping on their own value.
pub fn brute_threshold_stoppers(
    values: &GridField,
    grid: &Grid,
    root: Cube,
    thresh: f64,
) -> Vec<Cube> {
    let stopped = |q: &Cube| -> bool {
        if direct_triple_mean(values, grid, q) > thresh {
            return true;
        }
        q.depth() == grid.level() && {
            let c = q.cell_box(grid).cells(grid).next().unwrap();
            values.magnitude(c) > thresh
        }
    };
    let mut out = Vec::new();
    for q in strict_descendants(grid, root) {
        if !stopped(&q) {
            continue;
        }
        // maximal: no stopped strict ancestor below the root
        let mut anc = q.parent();
        let mut maximal = true;
        while let Some(a) = anc {
            if a.depth() <= root.depth() {
                break;
            }
            if stopped(&a) {
                maximal = false;
                break;
            }
            anc = a.parent();
        }
        if maximal {
            out.push(q);
        }
    }
    out.sort();
    out
}

/// Exhaustive density stopping: maximal `P` with
/// `|P ∩ Ξ| · 2^{n+1} > |P|` (exact integer comparison).
pub fn brute_density_stoppers(
    xi: &[bool],
    grid: &Grid,
    root: Cube,
) -> Vec<Cube> {
    let dens_num = 1usize << (grid.dim() + 1);
    let dense = |q: &Cube| -> bool {
        let b = q.cell_box(grid);
        let inter = b.cells(grid).filter(|&c| xi[c]).count();
        inter * dens_num > b.cell_count()
    };
    let mut out = Vec::new();
    for q in strict_descendants(grid, root) {
        if !dense(&q) {
            continue;
        }
        let mut anc = q.parent();
        let mut maximal = true;
        while let Some(a) = anc {
            if a.depth() <= root.depth() {
                break;
            }
            if dense(&a) {
                maximal = false;
                break;
            }
            anc = a.parent();
        }
        if maximal {
            out.push(q);
        }
    }
    out.sort();
    out
}
