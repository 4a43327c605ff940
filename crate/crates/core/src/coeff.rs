//! Elliptic coefficients: constructors, ellipticity certification,
//! oscillation moduli, and the secant linearization of a nonlinear flux.
//!
//! A coefficient is a map `a(x, ξ)` that vanishes at `ξ = 0`, is
//! `Λ`-Lipschitz and `λ`-strongly monotone in `ξ`:
//!
//! ```text
//! |a(x,ξ) - a(x,η)| ≤ Λ|ξ-η|,    (a(x,ξ) - a(x,η))·(ξ-η) ≥ λ|ξ-η|²
//! ```
//!
//! Every built-in carries certified `(λ, Λ)` derived analytically from its
//! construction; `verify_ellipticity` re-checks the certificate by random
//! sampling.

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::field::GridField;
use crate::grid::{CellBox, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Matrix-valued cell field, entry-major planes (`n*n` planes of cells).
#[derive(Clone, Debug)]
pub struct MatrixField {
    grid: Grid,
    data: Vec<f64>,
}

impl MatrixField {
    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 2]) -> [[f64; 2]; 2]) -> MatrixField {
        let n = grid.num_cells();
        let d = grid.dim();
        let mut data = vec![0.0; d * d * n];
        for cell in 0..n {
            let m = f(grid.cell_center(grid.coords(cell)));
            for i in 0..d {
                for j in 0..d {
                    data[(i * d + j) * n + cell] = m[i][j];
                }
            }
        }
        MatrixField { grid: *grid, data }
    }

    pub fn identity(grid: &Grid) -> MatrixField {
        MatrixField::from_fn(grid, |_| [[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn entry(&self, cell: usize, i: usize, j: usize) -> f64 {
        let d = self.grid.dim();
        self.data[(i * d + j) * self.grid.num_cells() + cell]
    }

    #[inline]
    pub fn set_entry(&mut self, cell: usize, i: usize, j: usize, v: f64) {
        let d = self.grid.dim();
        let n = self.grid.num_cells();
        self.data[(i * d + j) * n + cell] = v;
    }

    /// `A(cell) ξ`.
    #[inline]
    pub fn apply(&self, cell: usize, xi: [f64; 2]) -> [f64; 2] {
        let d = self.grid.dim();
        let n = self.grid.num_cells();
        let mut out = [0.0; 2];
        for i in 0..d {
            let mut s = 0.0;
            for j in 0..d {
                s += self.data[(i * d + j) * n + cell] * xi[j];
            }
            out[i] = s;
        }
        out
    }

    /// Entry `(i,j)` as a scalar field (for CSV export and oscillation scans).
    pub fn entry_field(&self, i: usize, j: usize) -> GridField {
        let mut out = GridField::scalar(&self.grid);
        for cell in 0..self.grid.num_cells() {
            out.set(cell, self.entry(cell, i, j));
        }
        out
    }
}

/// The flux map of a coefficient.
#[derive(Clone, Debug)]
pub enum Flux {
    /// `a(x,ξ) = A(x) ξ`.
    Linear(MatrixField),
    /// `a(x,ξ) = A(x) ξ + ε φ(|ξ|) ξ` with `φ(t) = 1/(2(1+t²))`.
    Perturbed { base: MatrixField, eps: f64 },
}

#[inline]
fn phi(t2: f64) -> f64 {
    0.5 / (1.0 + t2)
}

/// A certified `(λ, Λ)`-elliptic coefficient.
#[derive(Clone, Debug)]
pub struct EllipticCoefficient {
    pub flux: Flux,
    /// Certified strong-monotonicity constant.
    pub lambda: f64,
    /// Certified Lipschitz constant.
    pub lambda_big: f64,
    pub name: String,
}

impl EllipticCoefficient {
    pub fn is_linear(&self) -> bool {
        matches!(self.flux, Flux::Linear(_))
    }

    pub fn matrix(&self) -> Option<&MatrixField> {
        match &self.flux {
            Flux::Linear(m) => Some(m),
            Flux::Perturbed { .. } => None,
        }
    }

    pub fn grid(&self) -> &Grid {
        match &self.flux {
            Flux::Linear(m) => m.grid(),
            Flux::Perturbed { base, .. } => base.grid(),
        }
    }

    /// Evaluate `a(x_cell, ξ)`.
    #[inline]
    pub fn eval(&self, cell: usize, xi: [f64; 2]) -> [f64; 2] {
        match &self.flux {
            Flux::Linear(m) => m.apply(cell, xi),
            Flux::Perturbed { base, eps } => {
                let mut out = base.apply(cell, xi);
                let t2 = xi[0] * xi[0] + xi[1] * xi[1];
                let p = eps * phi(t2);
                out[0] += p * xi[0];
                out[1] += p * xi[1];
                out
            }
        }
    }

    /// Closed-form Jacobian `∇_ξ a(x_cell, ξ)`.
    ///
    /// For the perturbed flux, `D(φ(|ξ|)ξ) = φ(t) I - ξξᵀ/(1+t²)²`.
    pub fn jacobian(&self, cell: usize, xi: [f64; 2]) -> Result<[[f64; 2]; 2]> {
        let d = self.grid().dim();
        let mut out = [[0.0; 2]; 2];
        let base = match &self.flux {
            Flux::Linear(m) => m,
            Flux::Perturbed { base, .. } => base,
        };
        for i in 0..d {
            for j in 0..d {
                out[i][j] = base.entry(cell, i, j);
            }
        }
        if let Flux::Perturbed { eps, .. } = &self.flux {
            let t2 = xi[0] * xi[0] + xi[1] * xi[1];
            let p = phi(t2);
            let q = 1.0 / ((1.0 + t2) * (1.0 + t2));
            for i in 0..d {
                out[i][i] += eps * p;
                for j in 0..d {
                    out[i][j] -= eps * q * xi[i] * xi[j];
                }
            }
        }
        Ok(out)
    }
}

/// Built-in coefficient constructions.
#[derive(Clone, Debug, PartialEq)]
pub enum CoeffSpec {
    Identity,
    /// `c · I`.
    ScalarConstant { c: f64 },
    /// Alternating `αI`/`βI` blocks of physical side `period`.
    Checkerboard { alpha: f64, beta: f64, period: f64 },
    /// `I + γ R(x)` with antisymmetric `R`, `R_12 = sin(2πx) sin(2πy)`.
    Rotation { gamma: f64 },
    /// Scalar `α + β sin(log max(1, log 1/d)) · I` with `d = |x - x0|`,
    /// mollified at half a grid cell. Vanishing mean oscillation but not
    /// summable: the scan modulus decays like `1/log(1/r)`.
    LogOscillation { alpha: f64, beta: f64, center: [f64; 2] },
    /// Scalar `1 + β / max(1, log 1/d) · I`; mean oscillation bounded by
    /// `c |log r|^-2`, hence summable against `dr/r`.
    Dini { beta: f64, center: [f64; 2] },
    /// `a(x,ξ) = A_base(x) ξ + ε φ(|ξ|) ξ`.
    Nonlinear { base: Box<CoeffSpec>, eps: f64 },
}

/// Construct a built-in coefficient with certified `(λ, Λ)`.
pub fn make_coefficient(grid: &Grid, spec: &CoeffSpec) -> Result<EllipticCoefficient> {
    let (flux, lambda, lambda_big, name) = match spec {
        CoeffSpec::Identity => (
            Flux::Linear(MatrixField::identity(grid)),
            1.0,
            1.0,
            "identity".to_string(),
        ),
        CoeffSpec::ScalarConstant { c } => {
            let c = *c;
            (
                Flux::Linear(MatrixField::from_fn(grid, |_| [[c, 0.0], [0.0, c]])),
                c,
                c,
                format!("scalar({c})"),
            )
        }
        CoeffSpec::Checkerboard {
            alpha,
            beta,
            period,
        } => {
            let (a, b, rho) = (*alpha, *beta, *period);
            if rho <= 0.0 {
                return Err(Error::Invalid("checkerboard period must be positive".into()));
            }
            let dim = grid.dim();
            let field = MatrixField::from_fn(grid, move |p| {
                let mut parity = 0i64;
                for x in p.iter().take(dim) {
                    parity += (x / rho).floor() as i64;
                }
                let v = if parity.rem_euclid(2) == 0 { a } else { b };
                [[v, 0.0], [0.0, v]]
            });
            (
                Flux::Linear(field),
                a.min(b),
                a.max(b),
                format!("checkerboard({a},{b})"),
            )
        }
        CoeffSpec::Rotation { gamma } => {
            if grid.dim() != 2 {
                return Err(Error::Invalid("rotation coefficient needs n = 2".into()));
            }
            let g = *gamma;
            let field = MatrixField::from_fn(grid, move |[x, y]| {
                let r = (std::f64::consts::TAU * x).sin() * (std::f64::consts::TAU * y).sin();
                [[1.0, g * r], [-g * r, 1.0]]
            });
            // the antisymmetric part does not touch monotonicity:
            // ξ·(I+γR)ξ = |ξ|²; singular values are sqrt(1+γ²r²)
            (
                Flux::Linear(field),
                1.0,
                (1.0 + g * g).sqrt(),
                format!("rotation({g})"),
            )
        }
        CoeffSpec::LogOscillation {
            alpha,
            beta,
            center,
        } => {
            let (a, b, x0) = (*alpha, *beta, *center);
            let floor = 0.5 * grid.h();
            let field = MatrixField::from_fn(grid, move |p| {
                let d = dist(p, x0).max(floor);
                let s = (1.0 / d).ln().max(1.0);
                let v = a + b * s.ln().sin();
                [[v, 0.0], [0.0, v]]
            });
            (
                Flux::Linear(field),
                a - b,
                a + b,
                format!("log-oscillation({a},{b})"),
            )
        }
        CoeffSpec::Dini { beta, center } => {
            let (b, x0) = (*beta, *center);
            let floor = 1e-12 * grid.h();
            let field = MatrixField::from_fn(grid, move |p| {
                let d = dist(p, x0).max(floor);
                let v = 1.0 + b / (1.0 / d).ln().max(1.0);
                [[v, 0.0], [0.0, v]]
            });
            (
                Flux::Linear(field),
                1.0,
                1.0 + b,
                format!("dini({b})"),
            )
        }
        CoeffSpec::Nonlinear { base, eps } => {
            let inner = make_coefficient(grid, base)?;
            let base_field = match inner.flux {
                Flux::Linear(m) => m,
                Flux::Perturbed { .. } => {
                    return Err(Error::Invalid("nonlinear base must be linear".into()));
                }
            };
            // the perturbation has |φ| ≤ 1/2 and |t φ'(t)| ≤ 1/4; the
            // certificate uses the conservative loss ε/2 on monotonicity
            // and gain ε on the Lipschitz constant
            let lam = inner.lambda - eps / 2.0;
            let big = inner.lambda_big + eps;
            (
                Flux::Perturbed {
                    base: base_field,
                    eps: *eps,
                },
                lam,
                big,
                format!("nonlinear({}, eps={eps})", inner.name),
            )
        }
    };
    if lambda <= 0.0 {
        return Err(Error::NotElliptic { name, lambda });
    }
    Ok(EllipticCoefficient {
        flux,
        lambda,
        lambda_big,
        name,
    })
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Wrap a plain matrix field as a linear coefficient with declared
/// `(λ, Λ)` (used for secant linearizations, whose certificate is
/// inherited from the flux they came from).
pub fn matrix_coefficient(
    matrix: MatrixField,
    lambda: f64,
    lambda_big: f64,
    name: &str,
) -> EllipticCoefficient {
    EllipticCoefficient {
        flux: Flux::Linear(matrix),
        lambda,
        lambda_big,
        name: name.to_string(),
    }
}

/// Re-check the declared `(λ, Λ)` on random `(x, ξ, η)` triples.
///
/// Returns the sampled extremal quotients and a pass flag:
/// `λ̂ ≥ λ(1 - 1e-9)` and `Λ̂ ≤ Λ(1 + 1e-9)`.
pub fn verify_ellipticity(
    coeff: &EllipticCoefficient,
    samples: usize,
    seed: u64,
) -> (f64, f64, bool) {
    let grid = *coeff.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lam_hat = f64::INFINITY;
    let mut big_hat: f64 = 0.0;
    let dim = grid.dim();
    let draw = |rng: &mut ChaCha8Rng| {
        // mixed magnitudes exercise the flux far from and near the origin
        let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
        let mut v = [0.0; 2];
        for x in v.iter_mut().take(dim) {
            *x = scale * rng.gen_range(-1.0..1.0);
        }
        v
    };
    for _ in 0..samples {
        let cell = rng.gen_range(0..grid.num_cells());
        let xi = draw(&mut rng);
        let eta = draw(&mut rng);
        let diff = [xi[0] - eta[0], xi[1] - eta[1]];
        let d2 = diff[0] * diff[0] + diff[1] * diff[1];
        if d2 == 0.0 {
            continue;
        }
        let axi = coeff.eval(cell, xi);
        let aeta = coeff.eval(cell, eta);
        let da = [axi[0] - aeta[0], axi[1] - aeta[1]];
        let mono = (da[0] * diff[0] + da[1] * diff[1]) / d2;
        let lip = (da[0] * da[0] + da[1] * da[1]).sqrt() / d2.sqrt();
        lam_hat = lam_hat.min(mono);
        big_hat = big_hat.max(lip);
    }
    let pass = lam_hat >= coeff.lambda * (1.0 - 1e-9) && big_hat <= coeff.lambda_big * (1.0 + 1e-9);
    (lam_hat, big_hat, pass)
}

/// Mean oscillation of a matrix field at scale `r`: the sup over sampled
/// centers `x ∈ Ω` of the entrywise mean deviation of `A` over `Q_r(x) ∩ Ω`.
///
/// Centers run over a sub-grid of stride `r/2`, which cannot miss
/// oscillation at scale `r` by more than the grid modulus.
pub fn oscillation_modulus(a: &MatrixField, r: f64, omega: &Domain) -> Result<f64> {
    let grid = *a.grid();
    let h = grid.h();
    if r < h {
        return Err(Error::RadiusTooSmall(r));
    }
    let r_cells = (r / h).round() as i64;
    let stride = (r_cells / 2).max(1) as usize;
    let d = grid.dim();
    let mut sup = 0.0f64;
    let mut values: Vec<f64> = Vec::new();
    for cell in omega.cells() {
        let c = grid.coords(cell);
        if !c[0].is_multiple_of(stride) || (d == 2 && !c[1].is_multiple_of(stride)) {
            continue;
        }
        let lo0 = c[0] as i64 - r_cells / 2;
        let lo1 = c[1] as i64 - if d == 2 { r_cells / 2 } else { 0 };
        let bx = CellBox::new(
            [lo0, lo1],
            [lo0 + r_cells, lo1 + if d == 2 { r_cells } else { 1 }],
        );
        for i in 0..d {
            for j in 0..d {
                values.clear();
                for cc in bx.cells(&grid) {
                    if omega.contains(cc) {
                        values.push(a.entry(cc, i, j));
                    }
                }
                if values.is_empty() {
                    continue;
                }
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                let osc = values.iter().map(|v| (v - mean).abs()).sum::<f64>()
                    / values.len() as f64;
                sup = sup.max(osc);
            }
        }
    }
    Ok(sup)
}

/// Oscillation data of a matrix field across scales.
#[derive(Clone, Debug)]
pub struct OscillationProfile {
    pub radii: Vec<f64>,
    /// Mean oscillation `ω_A(r)` per radius.
    pub omega: Vec<f64>,
    /// `V_s`: best-constant (median-centered) oscillation, sup over `r ≤ s`.
    pub vmo_modulus: Vec<f64>,
    /// Trapezoid estimate of `∫ ω(s)/s ds` over the measured radii.
    pub dini_integral: f64,
}

/// Scan dyadic radii and record the oscillation profile.
pub fn oscillation_profile(
    a: &MatrixField,
    omega_dom: &Domain,
    radii: &[f64],
) -> Result<OscillationProfile> {
    let mut radii = radii.to_vec();
    radii.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut omega = Vec::with_capacity(radii.len());
    let mut best = Vec::with_capacity(radii.len());
    for &r in &radii {
        omega.push(oscillation_modulus(a, r, omega_dom)?);
        best.push(median_oscillation(a, r, omega_dom)?);
    }
    let mut vmo_modulus = vec![0.0; radii.len()];
    let mut run = 0.0f64;
    for (k, &b) in best.iter().enumerate() {
        run = run.max(b);
        vmo_modulus[k] = run;
    }
    let mut dini_integral = 0.0;
    for k in 1..radii.len() {
        let dr = radii[k] - radii[k - 1];
        dini_integral += 0.5 * (omega[k] / radii[k] + omega[k - 1] / radii[k - 1]) * dr;
    }
    Ok(OscillationProfile {
        radii,
        omega,
        vmo_modulus,
        dini_integral,
    })
}

/// Like `oscillation_modulus` but centered at the median (the exact
/// minimizer of the L1 deviation), as used by the vanishing-oscillation
/// modulus.
fn median_oscillation(a: &MatrixField, r: f64, omega: &Domain) -> Result<f64> {
    let grid = *a.grid();
    let h = grid.h();
    if r < h {
        return Err(Error::RadiusTooSmall(r));
    }
    let r_cells = (r / h).round() as i64;
    let stride = (r_cells / 2).max(1) as usize;
    let d = grid.dim();
    let mut sup = 0.0f64;
    let mut values: Vec<f64> = Vec::new();
    for cell in omega.cells() {
        let c = grid.coords(cell);
        if !c[0].is_multiple_of(stride) || (d == 2 && !c[1].is_multiple_of(stride)) {
            continue;
        }
        let lo0 = c[0] as i64 - r_cells / 2;
        let lo1 = c[1] as i64 - if d == 2 { r_cells / 2 } else { 0 };
        let bx = CellBox::new(
            [lo0, lo1],
            [lo0 + r_cells, lo1 + if d == 2 { r_cells } else { 1 }],
        );
        for i in 0..d {
            for j in 0..d {
                values.clear();
                for cc in bx.cells(&grid) {
                    if omega.contains(cc) {
                        values.push(a.entry(cc, i, j));
                    }
                }
                if values.is_empty() {
                    continue;
                }
                values.sort_by(|x, y| x.partial_cmp(y).unwrap());
                let med = values[values.len() / 2];
                let osc =
                    values.iter().map(|v| (v - med).abs()).sum::<f64>() / values.len() as f64;
                sup = sup.max(osc);
            }
        }
    }
    Ok(sup)
}

const GAUSS8: [(f64, f64); 8] = [
    (-0.9602898564975363, 0.1012285362903763),
    (-0.7966664774136267, 0.2223810344533745),
    (-0.525_532_409_916_329, 0.3137066458778873),
    (-0.1834346424956498, 0.362_683_783_378_362),
    (0.1834346424956498, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.3137066458778873),
    (0.7966664774136267, 0.2223810344533745),
    (0.9602898564975363, 0.1012285362903763),
];

const GAUSS4: [(f64, f64); 4] = [
    (-0.8611363115940526, 0.3478548451374538),
    (-0.3399810435848563, 0.6521451548625461),
    (0.3399810435848563, 0.6521451548625461),
    (0.8611363115940526, 0.3478548451374538),
];

/// Secant linearization of a flux along the segment between two solutions:
///
/// ```text
/// A(x) = ∫_0^1 ∇_ξ a(x, t ∇u(x) + (1-t) ∇v(x)) dt
/// ```
///
/// computed cell-wise by Gauss–Legendre quadrature (`quad_points` ∈ {4, 8}).
/// For a linear coefficient the matrix is returned unchanged. The output
/// inherits the certified `(λ, Λ)` of `a`; `div A ∇(u - v) = 0` holds
/// weakly wherever `u` and `v` solve the same problem.
pub fn linearize_pair(
    coeff: &EllipticCoefficient,
    u: &GridField,
    v: &GridField,
    quad_points: usize,
) -> Result<MatrixField> {
    let grid = *coeff.grid();
    if let Flux::Linear(m) = &coeff.flux {
        return Ok(m.clone());
    }
    let nodes: &[(f64, f64)] = match quad_points {
        4 => &GAUSS4,
        8 => &GAUSS8,
        other => {
            return Err(Error::Invalid(format!(
                "unsupported quadrature order {other} (use 4 or 8)"
            )));
        }
    };
    let gu = u.gradient();
    let gv = v.gradient();
    let d = grid.dim();
    let n = grid.num_cells();
    let mut out = MatrixField::from_fn(&grid, |_| [[0.0; 2]; 2]);
    for cell in 0..n {
        let xu = [gu.comp(cell, 0), if d == 2 { gu.comp(cell, 1) } else { 0.0 }];
        let xv = [gv.comp(cell, 0), if d == 2 { gv.comp(cell, 1) } else { 0.0 }];
        let mut acc = [[0.0f64; 2]; 2];
        for &(node, weight) in nodes {
            let t = 0.5 * (node + 1.0);
            let w = 0.5 * weight;
            let xi = [
                t * xu[0] + (1.0 - t) * xv[0],
                t * xu[1] + (1.0 - t) * xv[1],
            ];
            let jac = coeff.jacobian(cell, xi)?;
            for i in 0..d {
                for j in 0..d {
                    acc[i][j] += w * jac[i][j];
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                out.set_entry(cell, i, j, acc[i][j]);
            }
        }
    }
    Ok(out)
}

/// Sampled ellipticity of a plain matrix field (used to certify the output
/// of `linearize_pair` against the `(λ, Λ)` of the flux it came from).
pub fn verify_matrix_ellipticity(
    a: &MatrixField,
    lambda: f64,
    lambda_big: f64,
    samples: usize,
    seed: u64,
) -> (f64, f64, bool) {
    let grid = *a.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let mut lam_hat = f64::INFINITY;
    let mut big_hat: f64 = 0.0;
    for _ in 0..samples {
        let cell = rng.gen_range(0..grid.num_cells());
        let mut z = [0.0; 2];
        for x in z.iter_mut().take(dim) {
            *x = rng.gen_range(-1.0..1.0);
        }
        let n2 = z[0] * z[0] + z[1] * z[1];
        if n2 == 0.0 {
            continue;
        }
        let az = a.apply(cell, z);
        lam_hat = lam_hat.min((az[0] * z[0] + az[1] * z[1]) / n2);
        big_hat = big_hat.max((az[0] * az[0] + az[1] * az[1]).sqrt() / n2.sqrt());
    }
    let pass = lam_hat >= lambda * (1.0 - 1e-9) && big_hat <= lambda_big * (1.0 + 1e-9);
    (lam_hat, big_hat, pass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainKind;
    use approx::assert_relative_eq;

    fn grid() -> Grid {
        Grid::new(2, 5).unwrap()
    }

    #[test]
    fn identity_certificate() {
        let c = make_coefficient(&grid(), &CoeffSpec::Identity).unwrap();
        assert_eq!(c.lambda, 1.0);
        assert_eq!(c.lambda_big, 1.0);
    }

    #[test]
    fn checkerboard_certificate() {
        let c = make_coefficient(
            &grid(),
            &CoeffSpec::Checkerboard {
                alpha: 1.0,
                beta: 4.0,
                period: 0.125,
            },
        )
        .unwrap();
        assert_eq!(c.lambda, 1.0);
        assert_eq!(c.lambda_big, 4.0);
        let (lam, big, pass) = verify_ellipticity(&c, 20_000, 7);
        assert!(pass, "measured ({lam}, {big})");
        assert_relative_eq!(lam, 1.0, max_relative = 1e-12);
        assert_relative_eq!(big, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn scalar_double_flux() {
        let g = grid();
        let c = make_coefficient(&g, &CoeffSpec::ScalarConstant { c: 2.0 }).unwrap();
        let (lam, big, pass) = verify_ellipticity(&c, 5_000, 3);
        assert!(pass);
        assert_relative_eq!(lam, 2.0, max_relative = 1e-12);
        assert_relative_eq!(big, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn nonlinear_certificate_and_sampling() {
        // ε = 1/2 on the identity: declared (3/4, 3/2); the true sampled
        // constants are strictly inside, so the certificate passes
        let c = make_coefficient(
            &grid(),
            &CoeffSpec::Nonlinear {
                base: Box::new(CoeffSpec::Identity),
                eps: 0.5,
            },
        )
        .unwrap();
        assert_relative_eq!(c.lambda, 0.75);
        assert_relative_eq!(c.lambda_big, 1.5);
        let (lam, big, pass) = verify_ellipticity(&c, 100_000, 11);
        assert!(pass);
        assert!(lam >= 0.75 && big <= 1.5, "({lam}, {big})");
    }

    #[test]
    fn nonlinear_too_strong_is_rejected() {
        let err = make_coefficient(
            &grid(),
            &CoeffSpec::Nonlinear {
                base: Box::new(CoeffSpec::Identity),
                eps: 2.5,
            },
        );
        assert!(matches!(err, Err(Error::NotElliptic { .. })));
    }

    #[test]
    fn declared_lambda_too_high_fails_verification() {
        let mut c = make_coefficient(&grid(), &CoeffSpec::Identity).unwrap();
        c.lambda = 1.5;
        let (_, _, pass) = verify_ellipticity(&c, 1_000, 5);
        assert!(!pass);
    }

    #[test]
    fn oscillation_of_constant_matrix_vanishes() {
        let g = grid();
        let dom = Domain::builtin(&g, DomainKind::FullCube).unwrap();
        let c = make_coefficient(&g, &CoeffSpec::ScalarConstant { c: 3.0 }).unwrap();
        for r in [g.h(), 0.1, 0.25, 0.5] {
            let w = oscillation_modulus(c.matrix().unwrap(), r, &dom).unwrap();
            assert_eq!(w, 0.0);
        }
    }

    #[test]
    fn oscillation_of_checkerboard_at_period() {
        // over one full period the mean is (α+β)/2 and the mean deviation
        // is |β-α|/2 = 3/2 for (1,4)
        let g = grid();
        let dom = Domain::builtin(&g, DomainKind::FullCube).unwrap();
        let c = make_coefficient(
            &g,
            &CoeffSpec::Checkerboard {
                alpha: 1.0,
                beta: 4.0,
                period: 0.125,
            },
        )
        .unwrap();
        let w = oscillation_modulus(c.matrix().unwrap(), 0.25, &dom).unwrap();
        assert!((w - 1.5).abs() < 0.3, "measured {w}");
    }

    #[test]
    fn dini_modulus_is_log_square_summable() {
        let g = Grid::new(2, 6).unwrap();
        let dom = Domain::builtin(&g, DomainKind::FullCube).unwrap();
        let c = make_coefficient(
            &g,
            &CoeffSpec::Dini {
                beta: 1.0,
                center: [0.5, 0.5],
            },
        )
        .unwrap();
        // ω(r) · log²(1/r) stays bounded across dyadic radii
        let mut scaled = Vec::new();
        for k in 2..=5 {
            let r = 0.5f64.powi(k);
            let w = oscillation_modulus(c.matrix().unwrap(), r, &dom).unwrap();
            scaled.push(w * (1.0 / r).ln().powi(2));
        }
        let cap = 2.0 * scaled[0].max(scaled[1]);
        for (k, s) in scaled.iter().enumerate() {
            assert!(*s <= cap, "radius index {k}: {s} > {cap}");
        }
    }

    #[test]
    fn linearize_linear_returns_matrix() {
        let g = grid();
        let c = make_coefficient(&g, &CoeffSpec::ScalarConstant { c: 2.0 }).unwrap();
        let u = GridField::scalar_from(&g, |[x, y]| x * y);
        let v = GridField::scalar_from(&g, |[x, y]| x - y);
        let m = linearize_pair(&c, &u, &v, 8).unwrap();
        for cell in [0, 17, 900] {
            assert_eq!(m.entry(cell, 0, 0), 2.0);
            assert_eq!(m.entry(cell, 0, 1), 0.0);
        }
    }

    #[test]
    fn linearize_degenerate_interval() {
        // u = v collapses the quadrature to ∇_ξ a(x, ∇u(x))
        let g = grid();
        let c = make_coefficient(
            &g,
            &CoeffSpec::Nonlinear {
                base: Box::new(CoeffSpec::Identity),
                eps: 0.5,
            },
        )
        .unwrap();
        let u = GridField::scalar_from(&g, |[x, y]| x + 0.5 * y);
        let m = linearize_pair(&c, &u, &u, 8).unwrap();
        let gu = u.gradient();
        for cell in [40, 321, 777] {
            let xi = [gu.comp(cell, 0), gu.comp(cell, 1)];
            let jac = c.jacobian(cell, xi).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert_relative_eq!(m.entry(cell, i, j), jac[i][j], max_relative = 1e-12);
                }
            }
        }
        let (lam, big, pass) = verify_matrix_ellipticity(&m, c.lambda, c.lambda_big, 50_000, 13);
        assert!(pass, "linearized field outside certificate: ({lam}, {big})");
    }
}
