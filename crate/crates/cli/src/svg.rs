//! Minimal SVG heatmaps: one rect per cell, a perceptual colormap, and
//! optional cube outlines for sparse families.

use std::io::Write;
use std::path::Path;

use sparsegrad_core::{Cube, GridField, Result, SparseFamily};

const STOPS: [(f64, [u8; 3]); 5] = [
    (0.00, [68, 1, 84]),
    (0.25, [59, 82, 139]),
    (0.50, [33, 145, 140]),
    (0.75, [94, 201, 98]),
    (1.00, [253, 231, 37]),
];

fn color(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    for w in STOPS.windows(2) {
        let (t0, c0) = w[0];
        let (t1, c1) = w[1];
        if t <= t1 {
            let s = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
            return [
                (c0[0] as f64 + s * (c1[0] as f64 - c0[0] as f64)) as u8,
                (c0[1] as f64 + s * (c1[1] as f64 - c0[1] as f64)) as u8,
                (c0[2] as f64 + s * (c1[2] as f64 - c0[2] as f64)) as u8,
            ];
        }
    }
    STOPS[4].1
}

/// Write a cell heatmap of `|field|`; vector fields are drawn by
/// magnitude. `family` overlays cube outlines.
pub fn heatmap(
    path: &Path,
    field: &GridField,
    family: Option<&SparseFamily>,
    title: &str,
) -> Result<()> {
    let grid = *field.grid();
    let e = grid.extent();
    let cell_px = (768 / e[0].max(e[1])).max(2);
    let (w, h) = (e[0] * cell_px, e[1] * cell_px + 18);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">"
    )?;
    let vmax = (0..grid.num_cells())
        .map(|c| field.magnitude(c))
        .fold(0.0f64, f64::max)
        .max(1e-300);
    for y in 0..e[1] {
        for x in 0..e[0] {
            let v = field.magnitude(grid.index([x, y])) / vmax;
            let [r, g, b] = color(v);
            // flip y so the origin sits bottom-left
            let py = (e[1] - 1 - y) * cell_px + 18;
            writeln!(
                out,
                "<rect x=\"{}\" y=\"{py}\" width=\"{cell_px}\" height=\"{cell_px}\" \
                 fill=\"rgb({r},{g},{b})\"/>",
                x * cell_px
            )?;
        }
    }
    if let Some(fam) = family {
        for cube in &fam.cubes {
            let b = cube.cell_box(&grid);
            let px = b.lo[0] as usize * cell_px;
            let py = (e[1] - b.hi[1] as usize) * cell_px + 18;
            let side = (b.hi[0] - b.lo[0]) as usize * cell_px;
            writeln!(
                out,
                "<rect x=\"{px}\" y=\"{py}\" width=\"{side}\" height=\"{side}\" \
                 fill=\"none\" stroke=\"white\" stroke-width=\"1\"/>"
            )?;
        }
    }
    // outline of Q0 for orientation
    let q0 = Cube::root().cell_box(&grid);
    writeln!(
        out,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" \
         stroke=\"red\" stroke-width=\"1\" stroke-dasharray=\"4 3\"/>",
        q0.lo[0] as usize * cell_px,
        (e[1] - q0.hi[1] as usize) * cell_px + 18,
        (q0.hi[0] - q0.lo[0]) as usize * cell_px,
        (q0.hi[1] - q0.lo[1]) as usize * cell_px,
    )?;
    writeln!(
        out,
        "<text x=\"4\" y=\"13\" font-family=\"monospace\" font-size=\"12\">{title} \
         (max {vmax:.4e})</text>"
    )?;
    writeln!(out, "</svg>")?;
    Ok(())
}
