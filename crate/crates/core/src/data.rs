//! Seeded random data: band-limited Fourier fields that stay meaningful
//! under grid refinement (the modes are fixed in physical units, so a
//! refined grid samples the same function).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::GridField;
use crate::grid::Grid;

/// Deterministic field generator; every draw is keyed by `(seed, salt)`.
#[derive(Clone, Copy, Debug)]
pub struct FieldGen {
    seed: u64,
}

struct Mode {
    k: [f64; 2],
    amp: f64,
    phase: f64,
}

impl FieldGen {
    pub fn new(seed: u64) -> FieldGen {
        FieldGen { seed }
    }

    /// Half the grid Nyquist band on the `3Q0` box, in whole cycles.
    pub fn default_band(grid: &Grid) -> usize {
        (3 * grid.cells_per_unit() / 4).max(2)
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9e3779b97f4a7c15) ^ salt)
    }

    fn draw_modes(&self, grid: &Grid, modes: usize, band: usize, rng: &mut ChaCha8Rng) -> Vec<Mode> {
        let band = band.max(1) as i64;
        let mut out = Vec::with_capacity(modes);
        while out.len() < modes {
            let kx = rng.gen_range(-band..=band);
            let ky = if grid.dim() == 2 {
                rng.gen_range(-band..=band)
            } else {
                0
            };
            if kx == 0 && ky == 0 {
                continue;
            }
            out.push(Mode {
                k: [kx as f64, ky as f64],
                amp: rng.gen_range(-1.0..1.0),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            });
        }
        out
    }

    fn eval(modes: &[Mode], p: [f64; 2]) -> f64 {
        // wavenumbers are cycles over the 3-unit box [-1, 2)
        let t = [(p[0] + 1.0) / 3.0, (p[1] + 1.0) / 3.0];
        modes
            .iter()
            .map(|m| {
                m.amp
                    * (std::f64::consts::TAU * (m.k[0] * t[0] + m.k[1] * t[1]) + m.phase).cos()
            })
            .sum()
    }

    /// Band-limited random scalar field.
    pub fn fourier_scalar(&self, grid: &Grid, modes: usize, band: usize, salt: u64) -> GridField {
        let mut rng = self.rng(salt);
        let ms = self.draw_modes(grid, modes, band, &mut rng);
        GridField::scalar_from(grid, |p| Self::eval(&ms, p))
    }

    /// Band-limited random vector field with independent components.
    pub fn fourier_vector(&self, grid: &Grid, modes: usize, band: usize, salt: u64) -> GridField {
        let mut rng = self.rng(salt.wrapping_mul(2).wrapping_add(1));
        let msx = self.draw_modes(grid, modes, band, &mut rng);
        let msy = self.draw_modes(grid, modes, band, &mut rng);
        GridField::vector_from(grid, |p| [Self::eval(&msx, p), Self::eval(&msy, p)])
    }

    /// Nonnegative scalar field (offset magnitude of a Fourier draw).
    pub fn nonneg_scalar(&self, grid: &Grid, modes: usize, band: usize, salt: u64) -> GridField {
        let mut rng = self.rng(salt.wrapping_mul(3).wrapping_add(7));
        let ms = self.draw_modes(grid, modes, band, &mut rng);
        GridField::scalar_from(grid, |p| Self::eval(&ms, p).abs())
    }

    /// Vector field with modes spread over dyadic octaves up to `band`
    /// (`per_octave` modes each, flat amplitude across octaves). The
    /// multi-scale content keeps stopping-time recursions busy at every
    /// depth, unlike a single-band draw.
    pub fn multiscale_vector(
        &self,
        grid: &Grid,
        per_octave: usize,
        band: usize,
        salt: u64,
    ) -> GridField {
        use rand::Rng;
        let mut rng = self.rng(salt.wrapping_mul(7).wrapping_add(3));
        let mut msx = Vec::new();
        let mut msy = Vec::new();
        let mut lo = 1i64;
        while lo <= band as i64 {
            let hi = (2 * lo).min(band as i64 + 1);
            for ms in [&mut msx, &mut msy] {
                for _ in 0..per_octave {
                    let mag = rng.gen_range(lo..hi);
                    let kx = if rng.gen_bool(0.5) { mag } else { -mag };
                    let ky = if grid.dim() == 2 {
                        rng.gen_range(-mag..=mag)
                    } else {
                        0
                    };
                    ms.push(Mode {
                        k: [kx as f64, ky as f64],
                        amp: rng.gen_range(-1.0..1.0),
                        phase: rng.gen_range(0.0..std::f64::consts::TAU),
                    });
                }
            }
            lo *= 2;
        }
        GridField::vector_from(grid, |p| [Self::eval(&msx, p), Self::eval(&msy, p)])
    }

    /// Integrable power singularity `|x - c|^{-alpha}` times a radial
    /// direction, centered at a seeded point of the middle of `Q0`.
    /// Concentration persists at every dyadic scale around the center, so
    /// stopping-time recursions descend along it.
    pub fn singular_vector(&self, grid: &Grid, alpha: f64, salt: u64) -> GridField {
        use rand::Rng;
        let mut rng = self.rng(salt.wrapping_mul(9).wrapping_add(5));
        let c = [
            rng.gen_range(0.25..0.75),
            if grid.dim() == 2 {
                rng.gen_range(0.25..0.75)
            } else {
                0.0
            },
        ];
        let floor = 0.5 * grid.h();
        GridField::vector_from(grid, move |p| {
            let dx = p[0] - c[0];
            let dy = p[1] - c[1];
            let d = (dx * dx + dy * dy).sqrt().max(floor);
            let mag = d.powf(-alpha);
            [mag * dx / d, mag * dy / d]
        })
    }

    /// Concentrated vector source: `count` single-cell spikes of unit
    /// height at random cells of `Q0`, random directions. Concentration,
    /// not smoothness, is what drives the pointwise stopping rules.
    pub fn spiky_vector(&self, grid: &Grid, count: usize, salt: u64) -> GridField {
        use rand::Rng;
        let mut rng = self.rng(salt.wrapping_mul(5).wrapping_add(11));
        let mut out = GridField::vector(grid);
        let m = grid.cells_per_unit();
        for _ in 0..count {
            let x = m + rng.gen_range(0..m);
            let y = if grid.dim() == 2 {
                m + rng.gen_range(0..m)
            } else {
                0
            };
            let cell = grid.index([x, y]);
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            out.set_comp(cell, 0, angle.cos());
            if grid.dim() == 2 {
                out.set_comp(cell, 1, angle.sin());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_by_seed_and_salt() {
        let g = Grid::new(2, 4).unwrap();
        let gen = FieldGen::new(42);
        let a = gen.fourier_scalar(&g, 5, 6, 3);
        let b = gen.fourier_scalar(&g, 5, 6, 3);
        assert_eq!(a, b);
        let c = gen.fourier_scalar(&g, 5, 6, 4);
        assert_ne!(a, c);
    }

    #[test]
    fn refinement_samples_same_function() {
        let coarse = Grid::new(2, 3).unwrap();
        let fine = Grid::new(2, 4).unwrap();
        let gen = FieldGen::new(7);
        let a = gen.fourier_scalar(&coarse, 4, 5, 0);
        let b = gen.fourier_scalar(&fine, 4, 5, 0);
        // the fine field averaged over 2x2 blocks approximates the coarse
        // cell values (same analytic function, smooth at this band)
        let mut worst: f64 = 0.0;
        for idx in 0..coarse.num_cells() {
            let c = coarse.coords(idx);
            let mut s = 0.0;
            for dy in 0..2 {
                for dx in 0..2 {
                    s += b.value(fine.index([2 * c[0] + dx, 2 * c[1] + dy]));
                }
            }
            worst = worst.max((s / 4.0 - a.value(idx)).abs());
        }
        assert!(worst < 0.8, "refined field drifted: {worst}");
    }
}
