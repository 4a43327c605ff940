//! Dyadic, fractional and weighted maximal operators, the exact weak-norm
//! functional, and the gradient-oscillation function used by the smooth
//! coefficient iteration.
//!
//! The tripled dyadic maximal function of a reference cube `Q` is
//!
//! ```text
//! M h(x) = sup_P 1_P(x) ⟨|h|⟩_{3P} ,    P over dyadic subcubes of Q,
//! ```
//!
//! enumerated down to single cells. At the finest level the sup also
//! carries the cell value itself: dyadic cubes below the cell scale see a
//! piecewise-constant field as locally constant, so their triple averages
//! converge to the cell value and `M h ≥ |h|` holds cell-wise, exactly as
//! the almost-everywhere statement it discretizes. The fractional variant
//! applies the factor `(3ℓ(P))^s` to every candidate, including the cell
//! limit at `(3h)^s`, which makes `s → 0` degenerate to the plain
//! operator. Weighted maximal functions use plain (untripled) averages, so
//! their cell-level candidate is already the cell value.

use crate::coeff::EllipticCoefficient;
use crate::domain::Domain;
use crate::dyadic::Cube;
use crate::error::{Error, Result};
use crate::field::{GridField, PrefixSums, Region};
use crate::grid::{CellBox, Grid};
use crate::solver::{solve_dirichlet, SolverConfig};

/// Which candidate realized the supremum at a cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Witness {
    /// Average over the triple of the recorded cube.
    TripleAverage(Cube),
    /// The sub-cell limit: the value of the cell itself.
    CellValue(Cube),
    /// Plain (weighted) average over the recorded cube.
    PlainAverage(Cube),
}

impl Witness {
    pub fn cube(&self) -> Cube {
        match *self {
            Witness::TripleAverage(c) | Witness::CellValue(c) | Witness::PlainAverage(c) => c,
        }
    }
}

/// Pointwise supremum field together with the per-cell witness.
#[derive(Clone, Debug)]
pub struct MaximalResult {
    pub field: GridField,
    /// One entry per grid cell; `None` outside the root cube.
    pub witness: Vec<Option<Witness>>,
}

enum CandKind {
    Triple,
    Plain,
}

/// Shared downward sweep carrying the running supremum.
fn sweep(
    grid: &Grid,
    root: Cube,
    cube_val: &mut dyn FnMut(&Cube) -> Result<f64>,
    cell_val: Option<&dyn Fn(usize) -> f64>,
    kind: CandKind,
) -> Result<MaximalResult> {
    let mut field = GridField::scalar(grid);
    let mut witness: Vec<Option<Witness>> = vec![None; grid.num_cells()];
    let mut stack: Vec<(Cube, f64, Cube)> = Vec::new();
    let v0 = cube_val(&root)?;
    stack.push((root, v0, root));
    while let Some((cube, best, best_cube)) = stack.pop() {
        if cube.depth() == grid.level() {
            let cell = cube.cell_box(grid).cells(grid).next().expect("single cell");
            let mut val = best;
            let mut wit = match kind {
                CandKind::Triple => Witness::TripleAverage(best_cube),
                CandKind::Plain => Witness::PlainAverage(best_cube),
            };
            if let Some(cv) = cell_val {
                let v = cv(cell);
                if v > val {
                    val = v;
                    wit = Witness::CellValue(cube);
                }
            }
            field.set(cell, val);
            witness[cell] = Some(wit);
            continue;
        }
        for child in cube.children(grid)? {
            let v = cube_val(&child)?;
            if v > best {
                stack.push((child, v, child));
            } else {
                stack.push((child, best, best_cube));
            }
        }
    }
    Ok(MaximalResult { field, witness })
}

/// `M h(x) = sup_P 1_P(x) ⟨|h|⟩_{3P}` over the dyadic lattice of `root`,
/// exact by full enumeration down to cell level (plus the cell limit).
pub fn dyadic_maximal(h: &GridField, root: Cube) -> Result<MaximalResult> {
    let grid = *h.grid();
    let ps = PrefixSums::build(&grid, |c| h.magnitude(c));
    let mut cube_val = |c: &Cube| -> Result<f64> {
        let t = c.triple_box(&grid);
        Ok(ps.box_mean(&t).unwrap_or(0.0))
    };
    let cell = |c: usize| h.magnitude(c);
    sweep(&grid, root, &mut cube_val, Some(&cell), CandKind::Triple)
}

/// `M_s h(x) = sup_P 1_P(x) (3ℓ(P))^s ⟨|h|⟩_{3P}`, same enumeration, with
/// the cell limit damped by `(3h)^s`.
pub fn fractional_maximal(h: &GridField, s: f64, root: Cube) -> Result<MaximalResult> {
    if s <= 0.0 {
        return Err(Error::Invalid(format!("fractional exponent {s} must be positive")));
    }
    let grid = *h.grid();
    let ps = PrefixSums::build(&grid, |c| h.magnitude(c));
    let mut cube_val = |c: &Cube| -> Result<f64> {
        let t = c.triple_box(&grid);
        Ok((3.0 * c.side()).powf(s) * ps.box_mean(&t).unwrap_or(0.0))
    };
    let hcell = grid.h();
    let cell = move |c: usize| (3.0 * hcell).powf(s) * h.magnitude(c);
    sweep(&grid, root, &mut cube_val, Some(&cell), CandKind::Triple)
}

/// `M^σ h(x) = sup_P 1_P(x) σ(P)^{-1} ∫_P h σ` with plain averages over
/// the dyadic lattice of `root`.
pub fn weighted_dyadic_maximal(
    h: &GridField,
    sigma: &GridField,
    root: Cube,
) -> Result<MaximalResult> {
    let grid = *h.grid();
    let ps_hs = PrefixSums::build(&grid, |c| h.value(c) * sigma.value(c));
    let ps_s = PrefixSums::build(&grid, |c| sigma.value(c));
    let mut cube_val = |c: &Cube| -> Result<f64> {
        let b = c.cell_box(&grid);
        let sw = ps_s.box_sum(&b);
        if sw <= 0.0 {
            return Err(Error::DegenerateWeight(c.to_string()));
        }
        Ok(ps_hs.box_sum(&b) / sw)
    };
    sweep(&grid, root, &mut cube_val, None, CandKind::Plain)
}

/// Exact weak `L^1` functional `sup_μ μ |{ |h| > μ } ∩ region|` over the
/// finitely many levels of `h`.
pub fn weak_norm(h: &GridField, region: &Region) -> f64 {
    let grid = *h.grid();
    let mut mags: Vec<f64> = region
        .cells()
        .iter()
        .map(|&c| h.magnitude(c as usize))
        .collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let vol = grid.cell_volume();
    let n = mags.len();
    let mut sup = 0.0f64;
    // as μ → v⁻ the superlevel set {|h| > μ} holds every cell with value
    // ≥ v; scanning ascending, cells at index k.. have value ≥ mags[k]
    for (k, &v) in mags.iter().enumerate() {
        sup = sup.max(v * ((n - k) as f64) * vol);
    }
    sup
}

/// Empirically measure how conservative the certified weak (1,1) bound
/// is: the max over seeded random fields of
/// `weak_norm(M h, Q0) / ‖h‖_{L¹(3Q0)}`.
pub fn measure_weak_norm_ratio(grid: &Grid, trials: usize, seed: u64) -> Result<f64> {
    let gen = crate::data::FieldGen::new(seed);
    let q0 = Region::from_box(grid, &Cube::root().cell_box(grid));
    let full = Region::from_box(grid, &grid.full_box());
    let mut max_ratio = 0.0f64;
    for t in 0..trials {
        let h = gen.fourier_scalar(grid, 6, crate::data::FieldGen::default_band(grid), t as u64);
        let l1 = h.integrate_abs(&full);
        if l1 == 0.0 {
            continue;
        }
        let m = dyadic_maximal(&h, Cube::root())?;
        max_ratio = max_ratio.max(weak_norm(&m.field, &q0) / l1);
    }
    Ok(max_ratio)
}

/// Diameter of a planar point set (monotone chain hull + rotating pairs).
pub(crate) fn gradient_diameter(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let mut pts: Vec<(f64, f64)> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    if pts.len() == 1 {
        return 0.0;
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev() {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    let mut d2: f64 = 0.0;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            let dx = hull[i].0 - hull[j].0;
            let dy = hull[i].1 - hull[j].1;
            d2 = d2.max(dx * dx + dy * dy);
        }
    }
    d2.sqrt()
}

/// Oscillation of the gradient of `w = u_ref - u_P` over the cells of a
/// box `P`: `sup_{y,y'∈P} |∇w(y) - ∇w(y')|`.
pub(crate) fn oscillation_over_box(grad_w: &GridField, grid: &Grid, pbox: &CellBox) -> f64 {
    if grid.dim() == 1 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in pbox.cells(grid) {
            let v = grad_w.comp(c, 0);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    } else {
        let pts: Vec<(f64, f64)> = pbox
            .cells(grid)
            .map(|c| (grad_w.comp(c, 0), grad_w.comp(c, 1)))
            .collect();
        gradient_diameter(&pts)
    }
}

/// Which lattice the oscillation function ranges over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SLattice {
    /// Dyadic subdivision of the tripled box `3Q` (the reference setup).
    Triple,
    /// Dyadic subcubes of `Q` itself (the lattice the stopping-time
    /// iteration subdivides).
    Cube,
}

/// The auxiliary oscillation function
///
/// ```text
/// S(x) = sup_P 1_P(x) sup_{y,y' ∈ P} |∇w_P(y) - ∇w_P(y')| ,
/// w_P = u_Q - u_P ,
/// ```
///
/// where `P` runs over the chosen dyadic lattice down to `depth_cap`
/// levels and `u_P` solves the same problem on `3P ∩ Ω` with zero exterior
/// values. Requires a linear coefficient. Solver failures carry the
/// offending box in the error message.
pub fn oscillation_function_s(
    coeff: &EllipticCoefficient,
    q: Cube,
    f_vec: &GridField,
    omega: Option<&Domain>,
    depth_cap: u32,
    lattice: SLattice,
    cfg: &SolverConfig,
) -> Result<GridField> {
    if !coeff.is_linear() {
        return Err(Error::Invalid(
            "oscillation function requires a linear coefficient".into(),
        ));
    }
    let grid = *coeff.grid();
    let zero_s = GridField::scalar(&grid);
    let u_region = region_in(&grid, &q.triple_box(&grid), omega);
    if u_region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let u_q = solve_dirichlet(coeff, &u_region, f_vec, &zero_s, cfg)?.u;
    let base = match lattice {
        SLattice::Triple => q.triple_box(&grid),
        SLattice::Cube => q.cell_box(&grid),
    };
    let boxes = dyadic_boxes(&grid, &base, depth_cap);
    let mut s_field = GridField::scalar(&grid);
    for pbox in &boxes {
        let osc = box_oscillation(coeff, &u_q, pbox, f_vec, omega, cfg).map_err(|e| {
            Error::Invalid(format!("oscillation solve failed on box {pbox:?}: {e}"))
        })?;
        for c in pbox.cells(&grid) {
            if osc > s_field.value(c) {
                s_field.set(c, osc);
            }
        }
    }
    Ok(s_field)
}

/// Solve `u_P` on `3P ∩ Ω` and measure `osc_P(∇(u_ref - u_P))`.
pub(crate) fn box_oscillation(
    coeff: &EllipticCoefficient,
    u_ref: &GridField,
    pbox: &CellBox,
    f_vec: &GridField,
    omega: Option<&Domain>,
    cfg: &SolverConfig,
) -> Result<f64> {
    let grid = *coeff.grid();
    let region = region_in(&grid, &pbox.dilate(3).clip(&grid), omega);
    if region.is_empty() {
        return Ok(0.0);
    }
    let zero_s = GridField::scalar(&grid);
    let u_p = solve_dirichlet(coeff, &region, f_vec, &zero_s, cfg)?.u;
    let mut w = u_ref.clone();
    for c in 0..grid.num_cells() {
        w.set(c, w.value(c) - u_p.value(c));
    }
    let grad = w.gradient();
    Ok(oscillation_over_box(&grad, &grid, pbox))
}

pub(crate) fn region_in(grid: &Grid, bx: &CellBox, omega: Option<&Domain>) -> Region {
    match omega {
        Some(dom) => dom.region_in(bx),
        None => Region::from_box(grid, bx),
    }
}

/// Dyadic subdivision of a box down to `depth_cap` levels (inclusive of
/// the box itself); stops early on odd extents.
pub(crate) fn dyadic_boxes(grid: &Grid, base: &CellBox, depth_cap: u32) -> Vec<CellBox> {
    let mut out = vec![*base];
    let mut level = vec![*base];
    for _ in 0..depth_cap {
        let mut next = Vec::with_capacity(level.len() * 4);
        for b in &level {
            let sx = b.hi[0] - b.lo[0];
            let sy = b.hi[1] - b.lo[1];
            if sx < 2 || sx % 2 != 0 || (grid.dim() == 2 && (sy < 2 || sy % 2 != 0)) {
                continue;
            }
            next.extend(b.dyadic_children(grid.dim()));
        }
        if next.is_empty() {
            break;
        }
        out.extend(next.iter().copied());
        level = next;
    }
    out
}
