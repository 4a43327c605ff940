//! The stopping-time machinery: single iteration steps, the recursive
//! sparse-family construction, sparse forms, and the end-to-end sparse
//! bound certificate.
//!
//! One general iteration step on a cube `Q` solves the local problem on
//! `3Q ∩ Ω`, forms the threshold
//!
//! ```text
//! D = A (K_M / (3^-n θ))^{1/q_l} (⟨|F|⟩_{3Q,q_l} + 3ℓ(Q) ⟨|f|⟩_{3Q,q_l*}) ,
//! ```
//!
//! selects the maximal dyadic subcubes `P` with `⟨|∇u|^{q_l}⟩_{3P} > D^{q_l}`
//! (cells also stop on their own value, the sub-cell limit of the maximal
//! function), and splits
//!
//! ```text
//! ∫_Q |∇u| g ≤ I + II + III ,
//! I  = ∫_{Q∖∪P} |∇u| g ,
//! II = Σ_P ∫_P |∇u - ∇u_P| g ,
//! III = Σ_P ∫_P |∇u_P| g .
//! ```
//!
//! The exceptional set satisfies `|Ξ| ≤ θ|Q|` exactly (cell counting), the
//! children cover `Ξ` exactly, and `I + II` is re-checked against the
//! closed-form step constant. Iterating produces a `(1-θ)`-sparse family
//! with witness sets `E_P = P ∖ ∪ children`.
//!
//! The smooth-coefficient variant thresholds the pointwise maximum of
//! `|∇u|`, the gradient-oscillation function `S`, and `M(1_{3Q} F)` at
//! `D = 12^{n+1} max(C_w, C_S, K_M) ⟨|F|⟩_{3Q,1} / θ` and stops on dyadic
//! density `|P ∩ Ξ|/|P| > 2^{-n-1}`.

use std::collections::HashMap;

use crate::coeff::EllipticCoefficient;
use crate::domain::Domain;
use crate::dyadic::{Cube, SparseFamily};
use crate::error::{Error, Result};
use crate::field::{GridField, PrefixSums};
use crate::grid::Grid;
use crate::maximal::{box_oscillation, dyadic_maximal, region_in};
use crate::solver::{solve_dirichlet, SolverConfig};

/// Exponents and constants driving the general iteration.
#[derive(Clone, Debug)]
pub struct SparseParams {
    /// Stopping parameter; the family comes out `(1-θ)`-sparse.
    pub theta: f64,
    /// Admissible lower exponent (source-to-gradient energy bound).
    pub q_l: f64,
    /// Admissible upper exponent (difference reverse Hölder).
    pub q_h: f64,
    /// Lower-exponent constant `A = N_l`.
    pub a_const: f64,
    /// Upper-exponent constant `B` (measured).
    pub b_const: f64,
    /// Certified weak (1,1) bound of the tripled maximal operator.
    pub k_m: f64,
    /// Provenance notes for the run report.
    pub a_source: String,
    pub b_source: String,
}

impl SparseParams {
    /// The certified lower-exponent constant `(1 + c_n) sqrt(2) / λ` at
    /// `q_l = 2`, with the measured discrete Sobolev constant.
    pub fn certified_a(lambda: f64, sobolev_constant: f64) -> f64 {
        (1.0 + sobolev_constant) * 2f64.sqrt() / lambda
    }
}

/// Constants of the smooth-coefficient iteration, measured by
/// `calibrate_dini_constants`.
#[derive(Clone, Copy, Debug)]
pub struct DiniConstants {
    /// Weak (1,1) constant of `∇v` against `∫|F|`.
    pub c_w: f64,
    /// Weak (1,1) constant of the oscillation function `S`.
    pub c_s: f64,
    /// Sup-bound constant of homogeneous gradients against half-means.
    pub c_inf: f64,
    /// Lattice depth of the oscillation function inside each step.
    pub depth_cap: u32,
}

/// Which iteration drives the construction.
#[derive(Clone, Debug)]
pub enum BuildMode {
    General,
    Dini(DiniConstants),
}

/// The closed-form constant of the local sparse bound,
/// `9^{n/q_l} (AΛ + 1) A B (K_M/θ)^{1/q_l}`.
pub fn theorem_constant(dim: usize, lambda_big: f64, p: &SparseParams) -> f64 {
    9f64.powf(dim as f64 / p.q_l)
        * (p.a_const * lambda_big + 1.0)
        * p.a_const
        * p.b_const
        * (p.k_m / p.theta).powf(1.0 / p.q_l)
}

/// Step constant of the smooth-coefficient iteration: with
/// `N = 4·3^n C_w`, a step yields `I + II ≤ (2N+2) D |Q| ⟨g⟩_{Q,1}` and
/// `D = 12^{n+1} max(C_w, C_S, K_M) ⟨|F|⟩_{3Q,1}/θ`.
pub fn dini_constant(dim: usize, theta: f64, c: &DiniConstants, k_m: f64) -> f64 {
    let n_w = 4.0 * 3f64.powi(dim as i32) * c.c_w;
    (2.0 * n_w + 2.0) * 12f64.powi(dim as i32 + 1) * c.c_w.max(c.c_s).max(k_m) / theta
}

/// Everything one iteration step produced.
#[derive(Clone, Debug)]
pub struct IterationReport {
    pub cube: Cube,
    pub threshold_d: f64,
    pub term_i: f64,
    pub term_ii: f64,
    pub term_iii: f64,
    /// `|Q| (⟨|F|⟩_{3Q,q_l} + 3ℓ⟨|f|⟩) ⟨g⟩_{Q,q_h'}` (first mean in the
    /// smooth mode).
    pub local_term: f64,
    pub l_q: f64,
    pub children: Vec<Cube>,
    /// `|Ξ|` in cells.
    pub xi_cells: usize,
    /// `|∪ children|` in cells (equals `xi_cells` in the general mode).
    pub union_cells: usize,
    pub cube_cells: usize,
    /// `I + II ≤ C · local_term` with the mode's step constant.
    pub audit_ok: bool,
    /// Witness points of the smooth mode, one per child.
    pub witness_points: Vec<(Cube, u32)>,
}

impl IterationReport {
    /// The measure `|Ξ| ≤ θ|Q|` margin actually achieved.
    pub fn xi_fraction(&self) -> f64 {
        self.xi_cells as f64 / self.cube_cells as f64
    }
}

fn sobolev_conjugate_lower(q: f64, dim: usize) -> f64 {
    q * dim as f64 / (dim as f64 + q)
}

fn holder_conjugate(q: f64) -> f64 {
    q / (q - 1.0)
}

struct StepData<'a> {
    coeff: &'a EllipticCoefficient,
    omega: Option<&'a Domain>,
    f_vec: &'a GridField,
    f_src: Option<&'a GridField>,
    cfg: &'a SolverConfig,
}

fn solve_on_cube(
    data: &StepData,
    grid: &Grid,
    q: Cube,
    reuse: Option<GridField>,
) -> Result<GridField> {
    if let Some(u) = reuse {
        return Ok(u);
    }
    let region = region_in(grid, &q.triple_box(grid), data.omega);
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let zero = GridField::scalar(grid);
    let f_src = data.f_src.unwrap_or(&zero);
    Ok(solve_dirichlet(data.coeff, &region, data.f_vec, f_src, data.cfg)?.u)
}

/// The threshold stopping rule: the maximal dyadic subcubes of `q` whose
/// tripled average of `values` exceeds `thresh`; single cells also stop
/// on their own value (the sub-cell limit of the maximal function), so
/// the selected cubes cover `{M values > thresh} ∩ q` exactly.
/// Returns an error if `q` itself stops.
pub fn threshold_stoppers(
    grid: &Grid,
    q: Cube,
    values: &GridField,
    thresh: f64,
) -> Result<Vec<Cube>> {
    let ps = PrefixSums::build(grid, |c| values.magnitude(c));
    let root_mean = ps.box_mean(&q.triple_box(grid)).unwrap_or(0.0);
    if root_mean > thresh {
        return Err(Error::MeasureBoundViolated {
            cube: q.to_string(),
            xi_cells: q.cell_count(grid),
            bound: 0.0,
        });
    }
    let mut out = Vec::new();
    let mut stack: Vec<Cube> = q.children(grid)?;
    while let Some(c) = stack.pop() {
        let mean = ps.box_mean(&c.triple_box(grid)).unwrap_or(0.0);
        if mean > thresh {
            out.push(c);
            continue;
        }
        if c.depth() == grid.level() {
            let cell = c.cell_box(grid).cells(grid).next().expect("cell");
            if values.magnitude(cell) > thresh {
                out.push(c);
            }
            continue;
        }
        stack.extend(c.children(grid)?);
    }
    Ok(out)
}

/// The density stopping rule: the maximal dyadic subcubes of `q` with
/// `|P ∩ Ξ| · 2^{n+1} > |P|`, compared in exact integer arithmetic.
/// Cells of `Ξ` have density 1, so the selected cubes always cover `Ξ`.
/// Returns an error if `q` itself is dense.
pub fn density_stoppers(grid: &Grid, q: Cube, xi_mask: &[bool]) -> Result<Vec<Cube>> {
    let ps_xi = PrefixSums::build(grid, |c| if xi_mask[c] { 1.0 } else { 0.0 });
    let dens_num = 1usize << (grid.dim() + 1);
    let dense = |p: &Cube| {
        let b = p.cell_box(grid);
        let inter = ps_xi.box_sum(&b).round() as usize;
        inter * dens_num > b.cell_count()
    };
    if dense(&q) {
        let b = q.cell_box(grid);
        let inter = ps_xi.box_sum(&b).round() as usize;
        return Err(Error::MeasureBoundViolated {
            cube: q.to_string(),
            xi_cells: inter,
            bound: q.cell_count(grid) as f64 / dens_num as f64,
        });
    }
    let any_xi = q.cell_box(grid).cells(grid).any(|c| xi_mask[c]);
    let mut children = Vec::new();
    if any_xi {
        let mut stack: Vec<Cube> = q.children(grid)?;
        while let Some(c) = stack.pop() {
            if dense(&c) {
                children.push(c);
                continue;
            }
            if c.depth() < grid.level() {
                stack.extend(c.children(grid)?);
            }
        }
    }
    Ok(children)
}

/// One general iteration step on `Q`. Returns the report and the child
/// solutions (reused by the recursion).
#[allow(clippy::too_many_arguments)]
pub fn iteration_step(
    coeff: &EllipticCoefficient,
    q: Cube,
    omega: Option<&Domain>,
    f_vec: &GridField,
    f_src: Option<&GridField>,
    g: &GridField,
    params: &SparseParams,
    cfg: &SolverConfig,
    u_q: Option<GridField>,
) -> Result<(IterationReport, Vec<(Cube, GridField)>)> {
    let grid = *coeff.grid();
    let dim = grid.dim();
    let data = StepData {
        coeff,
        omega,
        f_vec,
        f_src,
        cfg,
    };
    let u = solve_on_cube(&data, &grid, q, u_q)?;
    let grad = u.gradient();
    let triple = q.triple_box(&grid);
    let q_l = params.q_l;
    let q_lstar = sobolev_conjugate_lower(q_l, dim);
    let f_mean = f_vec.power_mean_box(&triple, q_l)?;
    let f_term = match f_src {
        None => 0.0,
        Some(fs) => {
            let nonzero = fs.data().iter().any(|&v| v != 0.0);
            if nonzero && q_lstar <= 1.0 {
                return Err(Error::Invalid(format!(
                    "zero-order data requires q_l* > 1 (q_l = {q_l}, n = {dim} gives q_l* = {q_lstar}); \
                     pass f = 0"
                )));
            }
            if nonzero {
                3.0 * q.side() * fs.power_mean_box(&triple, q_lstar)?
            } else {
                0.0
            }
        }
    };
    let rho = f_mean + f_term;
    let d = params.a_const
        * (params.k_m / (3f64.powi(-(dim as i32)) * params.theta)).powf(1.0 / q_l)
        * rho;

    // |∇u|^{q_l} plane feeding the stopping rule
    let mut pow = GridField::scalar(&grid);
    for c in 0..grid.num_cells() {
        pow.set(c, grad.magnitude(c).powf(q_l));
    }
    let children = if rho == 0.0 {
        Vec::new()
    } else {
        threshold_stoppers(&grid, q, &pow, d.powf(q_l))?
    };

    // Ξ is exactly the union of the stopped cubes; maximality caps every
    // stopped triple average at 2^n D^{q_l} (the parent just failed, and
    // a value-stopped cell has a passing triple of its own)
    let qbox = q.cell_box(&grid);
    let cube_cells = qbox.cell_count();
    let ps_pow = PrefixSums::build(&grid, |c| pow.value(c));
    let mut xi_mask = vec![false; grid.num_cells()];
    let mut xi_cells = 0usize;
    let maximality_cap = 2f64.powi(dim as i32) * d.powf(q_l) * (1.0 + 1e-12);
    for p in &children {
        if let Some(mean) = ps_pow.box_mean(&p.triple_box(&grid)) {
            if mean > maximality_cap {
                return Err(Error::Invalid(format!(
                    "maximality audit failed on child {p}: tripled mean {mean:.6e} \
                     above 2^n D^q = {maximality_cap:.6e}"
                )));
            }
        }
        for c in p.cell_box(&grid).cells(&grid) {
            debug_assert!(!xi_mask[c], "stopped cubes overlap");
            xi_mask[c] = true;
            xi_cells += 1;
        }
    }
    if (xi_cells as f64) > params.theta * cube_cells as f64 {
        return Err(Error::MeasureBoundViolated {
            cube: q.to_string(),
            xi_cells,
            bound: params.theta * cube_cells as f64,
        });
    }

    let vol = grid.cell_volume();
    let mut term_i = 0.0;
    let mut l_q = 0.0;
    for c in qbox.cells(&grid) {
        let v = grad.magnitude(c) * g.value(c) * vol;
        l_q += v;
        if !xi_mask[c] {
            term_i += v;
        }
    }

    let mut term_ii = 0.0;
    let mut term_iii = 0.0;
    let mut child_solutions = Vec::with_capacity(children.len());
    for &p in &children {
        let u_p = solve_on_cube(&data, &grid, p, None)?;
        let grad_p = u_p.gradient();
        for c in p.cell_box(&grid).cells(&grid) {
            let gv = g.value(c) * vol;
            let mut diff2 = 0.0;
            for k in 0..dim {
                let dd = grad.comp(c, k) - grad_p.comp(c, k);
                diff2 += dd * dd;
            }
            term_ii += diff2.sqrt() * gv;
            term_iii += grad_p.magnitude(c) * gv;
        }
        child_solutions.push((p, u_p));
    }

    let q_hp = holder_conjugate(params.q_h);
    let g_mean = g.power_mean_box(&qbox, q_hp)?;
    let local_term = q.volume(dim) * rho * g_mean;
    let step_c = theorem_constant(dim, coeff.lambda_big, params);
    let audit_ok = term_i + term_ii <= step_c * local_term * (1.0 + 1e-12);

    Ok((
        IterationReport {
            cube: q,
            threshold_d: d,
            term_i,
            term_ii,
            term_iii,
            local_term,
            l_q,
            children,
            xi_cells,
            union_cells: xi_cells,
            cube_cells,
            audit_ok,
            witness_points: Vec::new(),
        },
        child_solutions,
    ))
}

/// One smooth-coefficient iteration step on `Q` (linear coefficients).
#[allow(clippy::too_many_arguments)]
pub fn dini_iteration_step(
    coeff: &EllipticCoefficient,
    q: Cube,
    omega: Option<&Domain>,
    f_vec: &GridField,
    g: &GridField,
    theta: f64,
    consts: &DiniConstants,
    k_m: f64,
    cfg: &SolverConfig,
    u_q: Option<GridField>,
) -> Result<(IterationReport, Vec<(Cube, GridField)>)> {
    if !coeff.is_linear() {
        return Err(Error::Invalid(
            "the smooth-coefficient iteration requires a linear coefficient".into(),
        ));
    }
    let grid = *coeff.grid();
    let dim = grid.dim();
    let data = StepData {
        coeff,
        omega,
        f_vec,
        f_src: None,
        cfg,
    };
    let u = solve_on_cube(&data, &grid, q, u_q)?;
    let grad = u.gradient();
    let triple = q.triple_box(&grid);
    let f_mean = f_vec.power_mean_box(&triple, 1.0)?;
    let d = 12f64.powi(dim as i32 + 1) * consts.c_w.max(consts.c_s).max(k_m) * f_mean / theta;

    let qbox = q.cell_box(&grid);
    let cube_cells = qbox.cell_count();
    let vol = grid.cell_volume();

    let mut l_q = 0.0;
    for c in qbox.cells(&grid) {
        l_q += grad.magnitude(c) * g.value(c) * vol;
    }

    // empty-data guard: D = 0 makes every comparison vacuous and u = 0
    if f_mean == 0.0 {
        let g_mean = g.power_mean_box(&qbox, 1.0)?;
        return Ok((
            IterationReport {
                cube: q,
                threshold_d: 0.0,
                term_i: l_q,
                term_ii: 0.0,
                term_iii: 0.0,
                local_term: q.volume(dim) * f_mean * g_mean,
                l_q,
                children: Vec::new(),
                xi_cells: 0,
                union_cells: 0,
                cube_cells,
                audit_ok: l_q == 0.0,
                witness_points: Vec::new(),
            },
            Vec::new(),
        ));
    }

    // S over the dyadic subcubes of Q, depth-capped
    let mut s_field = GridField::scalar(&grid);
    let max_depth = (q.depth() + consts.depth_cap).min(grid.level());
    for p in q.descendants(&grid, max_depth) {
        let pbox = p.cell_box(&grid);
        let osc = box_oscillation(coeff, &u, &pbox, f_vec, omega, cfg)?;
        for c in pbox.cells(&grid) {
            if osc > s_field.value(c) {
                s_field.set(c, osc);
            }
        }
    }

    // M(1_{3Q} F) over the lattice of Q
    let mut masked = GridField::scalar(&grid);
    for c in triple.cells(&grid) {
        masked.set(c, f_vec.magnitude(c));
    }
    let mf = dyadic_maximal(&masked, q)?;

    let mut xi_mask = vec![false; grid.num_cells()];
    let mut xi_cells = 0usize;
    for c in qbox.cells(&grid) {
        let v = grad
            .magnitude(c)
            .max(s_field.value(c))
            .max(mf.field.value(c));
        if v > d {
            xi_mask[c] = true;
            xi_cells += 1;
        }
    }
    if (xi_cells as f64) > theta * cube_cells as f64 {
        return Err(Error::MeasureBoundViolated {
            cube: q.to_string(),
            xi_cells,
            bound: theta * cube_cells as f64,
        });
    }

    // density stopping: maximal P with |P ∩ Ξ| 2^{n+1} > |P|, integers
    let children = density_stoppers(&grid, q, &xi_mask)?;

    // exact cover and density audits
    let ps_xi = PrefixSums::build(&grid, |c| if xi_mask[c] { 1.0 } else { 0.0 });
    let mut union_cells = 0usize;
    let mut covered = vec![false; grid.num_cells()];
    for p in &children {
        let b = p.cell_box(&grid);
        let inter = ps_xi.box_sum(&b).round() as usize;
        // maximality of the stopping gives density at most 1/2
        if inter * 2 > b.cell_count() {
            return Err(Error::Invalid(format!(
                "density audit failed on child {p}: {inter}/{} > 1/2",
                b.cell_count()
            )));
        }
        for c in b.cells(&grid) {
            covered[c] = true;
            union_cells += 1;
        }
    }
    for c in qbox.cells(&grid) {
        if xi_mask[c] && !covered[c] {
            return Err(Error::Invalid(format!(
                "stopped cubes fail to cover the exceptional set at cell {c}"
            )));
        }
    }
    if union_cells > (1 << (dim + 1)) * xi_cells
        || (union_cells as f64) > theta * cube_cells as f64
    {
        return Err(Error::MeasureBoundViolated {
            cube: q.to_string(),
            xi_cells: union_cells,
            bound: theta * cube_cells as f64,
        });
    }

    // children: solve, find witness points, accumulate II and III
    let n_const = 4.0 * 3f64.powi(dim as i32) * consts.c_w;
    let mut term_ii = 0.0;
    let mut term_iii = 0.0;
    let mut witness_points = Vec::with_capacity(children.len());
    let mut child_solutions = Vec::with_capacity(children.len());
    for &p in &children {
        let u_p = solve_on_cube(&data, &grid, p, None)?;
        let grad_p = u_p.gradient();
        let mut witness = None;
        for c in p.cell_box(&grid).cells(&grid) {
            if !xi_mask[c]
                && grad_p.magnitude(c) <= n_const * d
                && grad.magnitude(c) <= n_const * d
            {
                witness = Some(c as u32);
                break;
            }
        }
        let w = witness.ok_or_else(|| Error::NoWitness(p.to_string()))?;
        witness_points.push((p, w));
        for c in p.cell_box(&grid).cells(&grid) {
            let gv = g.value(c) * vol;
            let mut diff2 = 0.0;
            for k in 0..dim {
                let dd = grad.comp(c, k) - grad_p.comp(c, k);
                diff2 += dd * dd;
            }
            term_ii += diff2.sqrt() * gv;
            term_iii += grad_p.magnitude(c) * gv;
        }
        child_solutions.push((p, u_p));
    }

    let mut term_i = 0.0;
    for c in qbox.cells(&grid) {
        if !covered[c] {
            term_i += grad.magnitude(c) * g.value(c) * vol;
        }
    }

    let g_mean = g.power_mean_box(&qbox, 1.0)?;
    let local_term = q.volume(dim) * f_mean * g_mean;
    let step_c = dini_constant(dim, theta, consts, k_m);
    let audit_ok = term_i + term_ii <= step_c * local_term * (1.0 + 1e-12);

    Ok((
        IterationReport {
            cube: q,
            threshold_d: d,
            term_i,
            term_ii,
            term_iii,
            local_term,
            l_q,
            children,
            xi_cells,
            union_cells,
            cube_cells,
            audit_ok,
            witness_points,
        },
        child_solutions,
    ))
}

/// End-to-end certificate of a sparse-family build.
#[derive(Clone, Debug)]
pub struct SparseBoundCertificate {
    /// `∫_{Q0} |∇u| g`.
    pub lhs: f64,
    /// The sparse form over the constructed family (no constant).
    pub rhs_sum: f64,
    /// The closed-form constant of the driving mode.
    pub closed_form_constant: f64,
    /// `lhs / rhs_sum` (0 when both vanish).
    pub empirical_ratio: f64,
    /// `Σ_{P ∈ S_j} L(P)` per generation.
    pub residual_decay: Vec<f64>,
    /// `|∪ S_j|` in cells per generation.
    pub generation_cells: Vec<usize>,
    pub root_cells: usize,
    pub theta: f64,
    /// `empirical_ratio ≤ closed_form_constant` (vacuous at zero data).
    pub bound_holds: bool,
    /// `|∪ S_j| ≤ θ^j |Q0|` exactly for every generation.
    pub generation_decay_ok: bool,
    /// Residuals non-increasing in `j`.
    pub residual_monotone: bool,
    /// Every step audit `I + II ≤ C·local` held.
    pub step_audits_ok: bool,
    /// Constants the run consumed, for the report.
    pub constants_note: String,
}

/// Build the sparse family by the stopping-time recursion: `S_0 = {Q0}`,
/// `S_{j+1}` the union of step children, `E_P = P ∖ ∪ children`. The
/// recursion stops at cell level or when a generation's residual drops
/// below `1e-12` of the left-hand side.
#[allow(clippy::too_many_arguments)]
pub fn build_sparse_family(
    coeff: &EllipticCoefficient,
    root: Cube,
    omega: Option<&Domain>,
    f_vec: &GridField,
    f_src: Option<&GridField>,
    g: &GridField,
    mode: &BuildMode,
    params: &SparseParams,
    cfg: &SolverConfig,
) -> Result<(SparseFamily, SparseBoundCertificate, Vec<IterationReport>)> {
    let grid = *coeff.grid();
    let dim = grid.dim();
    let theta = params.theta;
    let mut family = SparseFamily {
        cubes: Vec::new(),
        witnesses: HashMap::new(),
        theta: 1.0 - theta,
        generations: Vec::new(),
        residuals: Vec::new(),
    };
    let mut reports: Vec<IterationReport> = Vec::new();

    let data = StepData {
        coeff,
        omega,
        f_vec,
        f_src,
        cfg,
    };
    let u_root = solve_on_cube(&data, &grid, root, None)?;
    let vol = grid.cell_volume();
    let grad_root = u_root.gradient();
    let mut lhs = 0.0;
    for c in root.cell_box(&grid).cells(&grid) {
        lhs += grad_root.magnitude(c) * g.value(c) * vol;
    }

    let mut generation: Vec<(Cube, GridField)> = vec![(root, u_root)];
    let mut gen_index = 0usize;
    while !generation.is_empty() {
        // record the generation and its residual
        let mut gen_cube_indices = Vec::with_capacity(generation.len());
        let mut residual = 0.0;
        for (q, u) in &generation {
            let grad = u.gradient();
            let mut l = 0.0;
            for c in q.cell_box(&grid).cells(&grid) {
                l += grad.magnitude(c) * g.value(c) * vol;
            }
            residual += l;
            gen_cube_indices.push(family.cubes.len());
            family.cubes.push(*q);
        }
        family.generations.push(gen_cube_indices);
        family.residuals.push(residual);

        let stop_residual = gen_index > 0 && residual <= 1e-12 * lhs.max(1e-300);
        let mut next: Vec<(Cube, GridField)> = Vec::new();
        for (q_cube, u) in generation.into_iter() {
            let at_cell_level = q_cube.depth() >= grid.level();
            if stop_residual || at_cell_level {
                // leaf: keep the full witness
                let cells: Vec<u32> = q_cube
                    .cell_box(&grid)
                    .cells(&grid)
                    .map(|c| c as u32)
                    .collect();
                family.witnesses.insert(q_cube, cells);
                continue;
            }
            let (report, children) = match mode {
                BuildMode::General => iteration_step(
                    coeff,
                    q_cube,
                    omega,
                    f_vec,
                    f_src,
                    g,
                    params,
                    cfg,
                    Some(u),
                )?,
                BuildMode::Dini(consts) => dini_iteration_step(
                    coeff,
                    q_cube,
                    omega,
                    f_vec,
                    g,
                    theta,
                    consts,
                    params.k_m,
                    cfg,
                    Some(u),
                )?,
            };
            // witness: the cube minus its children
            let mut child_mask = vec![false; grid.num_cells()];
            for p in &report.children {
                for c in p.cell_box(&grid).cells(&grid) {
                    child_mask[c] = true;
                }
            }
            let cells: Vec<u32> = q_cube
                .cell_box(&grid)
                .cells(&grid)
                .filter(|&c| !child_mask[c])
                .map(|c| c as u32)
                .collect();
            family.witnesses.insert(q_cube, cells);
            reports.push(report);
            next.extend(children);
        }
        generation = next;
        gen_index += 1;
    }

    // sparse form over the family
    let rhs_sum = match mode {
        BuildMode::General => {
            let mut s = sparse_form(
                &grid,
                &family,
                f_vec,
                g,
                params.q_l,
                holder_conjugate(params.q_h),
                FormConvention::GOverP,
            )?;
            if let Some(fs) = f_src {
                if fs.data().iter().any(|&v| v != 0.0) {
                    s += sparse_form_first_order(
                        &grid,
                        &family,
                        fs,
                        g,
                        sobolev_conjugate_lower(params.q_l, dim),
                        holder_conjugate(params.q_h),
                    )?;
                }
            }
            s
        }
        BuildMode::Dini(_) => sparse_form(
            &grid,
            &family,
            f_vec,
            g,
            1.0,
            1.0,
            FormConvention::GOverP,
        )?,
    };

    let closed_form_constant = match mode {
        BuildMode::General => theorem_constant(dim, coeff.lambda_big, params),
        BuildMode::Dini(c) => dini_constant(dim, theta, c, params.k_m),
    };
    let empirical_ratio = if rhs_sum > 0.0 { lhs / rhs_sum } else { 0.0 };

    let root_cells = root.cell_count(&grid);
    let generation_cells: Vec<usize> = family
        .generations
        .iter()
        .map(|gen| {
            gen.iter()
                .map(|&i| family.cubes[i].cell_count(&grid))
                .sum()
        })
        .collect();
    let mut generation_decay_ok = true;
    for (j, &cells) in generation_cells.iter().enumerate() {
        if cells as f64 > theta.powi(j as i32) * root_cells as f64 {
            generation_decay_ok = false;
        }
    }
    let mut residual_monotone = true;
    for w in family.residuals.windows(2) {
        if w[1] > w[0] * (1.0 + 1e-12) + 1e-300 {
            residual_monotone = false;
        }
    }
    let step_audits_ok = reports.iter().all(|r| r.audit_ok);
    let bound_holds = empirical_ratio <= closed_form_constant;

    let constants_note = format!(
        "A = {:.6} ({}), B = {:.6} ({}), K_M = {}, theta = {}, q_l = {}, q_h = {}",
        params.a_const,
        params.a_source,
        params.b_const,
        params.b_source,
        params.k_m,
        theta,
        params.q_l,
        params.q_h
    );

    let cert = SparseBoundCertificate {
        lhs,
        rhs_sum,
        closed_form_constant,
        empirical_ratio,
        residual_decay: family.residuals.clone(),
        generation_cells,
        root_cells,
        theta,
        bound_holds,
        generation_decay_ok,
        residual_monotone,
        step_audits_ok,
        constants_note,
    };
    Ok((family, cert, reports))
}

/// Where the second average of the sparse form lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormConvention {
    /// `Σ |P| ⟨|F|⟩_{3P,s} ⟨g⟩_{P,r}`.
    GOverP,
    /// `Σ |P| ⟨|F|⟩_{3P,s} ⟨g⟩_{3P,r}`.
    GOverTriple,
}

/// Evaluate the sparse form `Σ_P |P| ⟨|F|⟩_{3P,s} ⟨g⟩_{·,r}` in exact cell
/// arithmetic.
pub fn sparse_form(
    grid: &Grid,
    fam: &SparseFamily,
    f_field: &GridField,
    g: &GridField,
    s: f64,
    r: f64,
    convention: FormConvention,
) -> Result<f64> {
    let mut acc = 0.0;
    for p in &fam.cubes {
        let triple = p.triple_box(grid);
        let gbox = match convention {
            FormConvention::GOverP => p.cell_box(grid),
            FormConvention::GOverTriple => triple,
        };
        acc += p.volume(grid.dim())
            * f_field.power_mean_box(&triple, s)?
            * g.power_mean_box(&gbox, r)?;
    }
    Ok(acc)
}

/// The first-order companion term
/// `Σ_P |P| · 3ℓ(P) · ⟨|f|⟩_{3P,s*} ⟨g⟩_{P,r}`.
pub fn sparse_form_first_order(
    grid: &Grid,
    fam: &SparseFamily,
    f_src: &GridField,
    g: &GridField,
    s_star: f64,
    r: f64,
) -> Result<f64> {
    let mut acc = 0.0;
    for p in &fam.cubes {
        acc += p.volume(grid.dim())
            * 3.0
            * p.side()
            * f_src.power_mean_box(&p.triple_box(grid), s_star)?
            * g.power_mean_box(&p.cell_box(grid), r)?;
    }
    Ok(acc)
}

/// Calibrate a user-supplied lower constant for the threshold iteration.
///
/// For seeded random cubes `Q` (all depths) and sources `F`, the probe
/// solves `u_Q` on `3Q ∩ Ω`, forms the stopped statistic
/// `M(|∇u_Q|^{q_l})^{1/q_l}` over the cells of `Q`, and records its
/// `(1 - θ/2)`-quantile relative to `⟨|F|⟩_{3Q,q_l}`. The returned `Φ` is
/// the sup over probes: a threshold `D = Φ ⟨|F|⟩_{3Q,q_l}` keeps the
/// exceptional measure at or below `θ|Q|/2` on the probe family while
/// staying inside the data range, so the recursion subdivides
/// nontrivially. Dividing out the `(K_M/(3^{-n}θ))^{1/q_l}` factor turns
/// `Φ` into the user-supplied `A` the iteration consumes; the certificate
/// records the provenance.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_stopping_threshold(
    grid: &Grid,
    spec: &crate::coeff::CoeffSpec,
    domain: Option<crate::domain::DomainKind>,
    q_l: f64,
    theta: f64,
    trials: usize,
    seed: u64,
    cfg: &SolverConfig,
    draw: impl Fn(u64) -> GridField,
) -> Result<f64> {
    use crate::maximal::dyadic_maximal;
    use rand::{Rng, SeedableRng};

    let coeff = crate::coeff::make_coefficient(grid, spec)?;
    let dom = domain
        .map(|k| crate::domain::Domain::builtin(grid, k))
        .transpose()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let zero_s = GridField::scalar(grid);
    let mut phi = 0.0f64;
    for t in 0..trials {
        let f_vec = draw(t as u64);
        let depth = rng.gen_range(0..grid.level());
        let side = 1u32 << depth;
        // alternate uniform cubes with cubes on the dyadic chain through
        // the data's hottest cell: concentrated sources lift the tripled
        // averages of every cell of a small cube at once, and those are
        // the binding cases for the measure bound
        let q = if t % 2 == 0 {
            Cube::new(
                depth,
                [
                    rng.gen_range(0..side),
                    if grid.dim() == 2 {
                        rng.gen_range(0..side)
                    } else {
                        0
                    },
                ],
            )
        } else {
            let unit = Cube::root().cell_box(grid);
            let hot = unit
                .cells(grid)
                .max_by(|&a, &b| {
                    f_vec
                        .magnitude(a)
                        .partial_cmp(&f_vec.magnitude(b))
                        .unwrap()
                })
                .expect("unit cube nonempty");
            let xy = grid.coords(hot);
            let m = grid.cells_per_unit();
            let shift = grid.level() - depth;
            Cube::new(
                depth,
                [
                    ((xy[0] - m) >> shift) as u32,
                    if grid.dim() == 2 {
                        ((xy[1] - m) >> shift) as u32
                    } else {
                        0
                    },
                ],
            )
        };
        let region = region_in(grid, &q.triple_box(grid), dom.as_ref());
        if region.is_empty() {
            continue;
        }
        let f_mean = f_vec.power_mean_box(&q.triple_box(grid), q_l)?;
        if f_mean <= 0.0 {
            continue;
        }
        let u = solve_dirichlet(&coeff, &region, &f_vec, &zero_s, cfg)?.u;
        let grad = u.gradient();
        let mut pow = GridField::scalar(grid);
        for c in 0..grid.num_cells() {
            pow.set(c, grad.magnitude(c).powf(q_l));
        }
        let m = dyadic_maximal(&pow, q)?;
        let mut vals: Vec<f64> = q.cell_box(grid).cells(grid).map(|c| m.field.value(c)).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let idx = (((1.0 - theta / 2.0) * vals.len() as f64).ceil() as usize)
            .min(vals.len())
            .max(1)
            - 1;
        phi = phi.max(vals[idx].powf(1.0 / q_l) / f_mean);
    }
    Ok(phi)
}

/// Seeded random sparse family: recursive subdivision that eats at most a
/// quarter of each cube, so every witness keeps at least 3/4 of its cube
/// and the family is comfortably `theta`-sparse for `theta ≤ 3/4`.
pub fn random_sparse_family(
    grid: &Grid,
    theta: f64,
    seed: u64,
    max_extra_depth: u32,
) -> SparseFamily {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let root = Cube::root();
    let mut family = SparseFamily {
        cubes: Vec::new(),
        witnesses: HashMap::new(),
        theta,
        generations: Vec::new(),
        residuals: Vec::new(),
    };
    let mut generation = vec![root];
    let mut extra = 0u32;
    while !generation.is_empty() {
        let mut indices = Vec::with_capacity(generation.len());
        let mut next = Vec::new();
        for q in &generation {
            indices.push(family.cubes.len());
            family.cubes.push(*q);
            let mut children: Vec<Cube> = Vec::new();
            if extra < max_extra_depth && q.depth() + 2 <= grid.level() && rng.gen_bool(0.7) {
                // up to 3 of the 16 grandchildren, pairwise distinct
                let kids = q.children(grid).expect("depth checked");
                let mut grandkids: Vec<Cube> = Vec::new();
                for k in &kids {
                    grandkids.extend(k.children(grid).expect("depth checked"));
                }
                let want = rng.gen_range(1..=3usize.min(grandkids.len()));
                while children.len() < want {
                    let pick = grandkids[rng.gen_range(0..grandkids.len())];
                    if !children.contains(&pick) {
                        children.push(pick);
                    }
                }
            }
            let mut mask = vec![false; grid.num_cells()];
            for p in &children {
                for c in p.cell_box(grid).cells(grid) {
                    mask[c] = true;
                }
            }
            let witness: Vec<u32> = q
                .cell_box(grid)
                .cells(grid)
                .filter(|&c| !mask[c])
                .map(|c| c as u32)
                .collect();
            family.witnesses.insert(*q, witness);
            next.extend(children);
        }
        family.generations.push(indices);
        generation = next;
        extra += 1;
    }
    family
}

/// Measured constants of the smooth-coefficient estimates, with stability
/// flags from one grid refinement.
#[derive(Clone, Copy, Debug)]
pub struct DiniCalibration {
    pub c_w: f64,
    pub c_s: f64,
    pub c_inf: f64,
    pub c_w_refined: f64,
    pub c_s_refined: f64,
    pub c_inf_refined: f64,
    pub c_w_stable: bool,
    pub c_s_stable: bool,
    pub c_inf_stable: bool,
}

impl DiniCalibration {
    pub fn all_stable(&self) -> bool {
        self.c_w_stable && self.c_s_stable && self.c_inf_stable
    }

    pub fn constants(&self, depth_cap: u32) -> DiniConstants {
        DiniConstants {
            c_w: self.c_w,
            c_s: self.c_s,
            c_inf: self.c_inf,
            depth_cap,
        }
    }
}

/// Measure the three smooth-coefficient constants as empirical suprema
/// over seeded random sources and cubes, then repeat on the refined grid
/// with the same physical data.
///
/// Stability is judged on the matched pairs: each draw is evaluated at
/// both levels and the flag holds when the median per-draw ratio stays
/// within 30% of one. Inside the summable-oscillation class the sup-type
/// constants converge from below with a residual per-refinement drift
/// well under that band at desk resolutions; outside the class they grow
/// geometrically with the corner exponent (observed factors 1.7+ per
/// refinement), so a single refinement separates the regimes.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_dini_constants(
    base_grid: &Grid,
    spec: &crate::coeff::CoeffSpec,
    domain: Option<crate::domain::DomainKind>,
    trials: usize,
    depth_cap: u32,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<DiniCalibration> {
    // pin the band to the base level: the refined scan must sample the
    // same physical sources for the pairs to match
    let band = crate::data::FieldGen::default_band(base_grid);
    let base = dini_scan(base_grid, spec, domain, trials, depth_cap, seed, band, cfg)?;
    let fine = Grid::new(base_grid.dim(), base_grid.level() + 1)?;
    let mut fine_cfg = cfg.clone();
    fine_cfg.sobolev_constant = crate::solver::sobolev_constant(&fine);
    let refined = dini_scan(&fine, spec, domain, trials, depth_cap, seed, band, &fine_cfg)?;
    let sup = |v: &[f64]| v.iter().copied().fold(0.0f64, f64::max);
    let stable = |a: &[f64], b: &[f64]| {
        let mut ratios: Vec<f64> = a
            .iter()
            .zip(b)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, y)| y / x)
            .collect();
        if ratios.is_empty() {
            return b.iter().all(|&y| y == 0.0);
        }
        ratios.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let med = ratios[ratios.len() / 2];
        (0.70..=1.30).contains(&med)
    };
    Ok(DiniCalibration {
        c_w: sup(&base.0),
        c_s: sup(&base.1),
        c_inf: sup(&base.2),
        c_w_refined: sup(&refined.0),
        c_s_refined: sup(&refined.1),
        c_inf_refined: sup(&refined.2),
        c_w_stable: stable(&base.0, &refined.0),
        c_s_stable: stable(&base.1, &refined.1),
        c_inf_stable: stable(&base.2, &refined.2),
    })
}

type ScanValues = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Per-trial weak-norm ratios (gradient, oscillation function) and
/// sup-bound ratios, matched across refinements by trial index.
#[allow(clippy::too_many_arguments)]
fn dini_scan(
    grid: &Grid,
    spec: &crate::coeff::CoeffSpec,
    domain: Option<crate::domain::DomainKind>,
    trials: usize,
    depth_cap: u32,
    seed: u64,
    band: usize,
    cfg: &SolverConfig,
) -> Result<ScanValues> {
    use crate::maximal::{oscillation_function_s, weak_norm, SLattice};
    use rand::{Rng, SeedableRng};

    let coeff = crate::coeff::make_coefficient(grid, spec)?;
    let dom = domain
        .map(|k| crate::domain::Domain::builtin(grid, k))
        .transpose()?;
    let gen = crate::data::FieldGen::new(seed ^ 0xd1a1);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let zero_s = GridField::scalar(grid);
    let mut c_w = Vec::with_capacity(trials);
    let mut c_s = Vec::with_capacity(trials);
    let mut c_inf = Vec::with_capacity(trials);
    for t in 0..trials {
        let depth = rng.gen_range(0..=2u32);
        let side = 1u32 << depth;
        let pos = [
            rng.gen_range(0..side),
            if grid.dim() == 2 {
                rng.gen_range(0..side)
            } else {
                0
            },
        ];
        let p_cube = Cube::new(depth, pos);
        let f_vec = gen.fourier_vector(grid, 6, band, t as u64);
        let region = region_in(grid, &p_cube.triple_box(grid), dom.as_ref());
        if region.is_empty() {
            continue;
        }
        let f_l1 = f_vec.integrate_abs(&region);
        if f_l1 <= 0.0 {
            continue;
        }
        // weak (1,1) of the gradient against the source mass
        let v = solve_dirichlet(&coeff, &region, &f_vec, &zero_s, cfg)?.u;
        let grad_mag = v.gradient().magnitude_field();
        c_w.push(weak_norm(&grad_mag, &region) / f_l1);

        // weak (1,1) of the oscillation function at the caller's depth
        let s_field = oscillation_function_s(
            &coeff,
            p_cube,
            &f_vec,
            dom.as_ref(),
            depth_cap,
            SLattice::Triple,
            cfg,
        )?;
        c_s.push(weak_norm(&s_field, &region) / f_l1);

        // sup bound for homogeneous differences: u nested minus local
        if depth > 0 {
            let parent = p_cube.parent().unwrap();
            let big = region_in(grid, &parent.triple_box(grid), dom.as_ref());
            if !big.is_empty() {
                let u_big = solve_dirichlet(&coeff, &big, &f_vec, &zero_s, cfg)?.u;
                let mut w = u_big.clone();
                for c in 0..grid.num_cells() {
                    w.set(c, w.value(c) - v.value(c));
                }
                let gw = w.gradient();
                let mut gmag = GridField::scalar(grid);
                for c in 0..grid.num_cells() {
                    let inside = dom.as_ref().is_none_or(|d| d.contains(c));
                    if inside {
                        gmag.set(c, gw.magnitude(c));
                    }
                }
                let pbox = p_cube.cell_box(grid);
                let sup = pbox
                    .cells(grid)
                    .map(|c| gmag.value(c))
                    .fold(0.0f64, f64::max);
                // the power mean at s = 1/2 is already the squared
                // half-mean appearing on the right-hand side
                let den = gmag.power_mean_box(&p_cube.double_box(grid), 0.5).unwrap_or(0.0);
                if den > 0.0 {
                    c_inf.push(sup / den);
                }
            }
        }
    }
    Ok((c_w, c_s, c_inf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::{make_coefficient, CoeffSpec};
    use crate::data::FieldGen;
    use approx::assert_relative_eq;

    #[test]
    fn threshold_formula_value() {
        // n = 2, A = 1, K_M = 81, θ = 1/2, ⟨|F|⟩ = 1, f = 0:
        // D = (81 · 18)^{1/2}
        let params = SparseParams {
            theta: 0.5,
            q_l: 2.0,
            q_h: 4.0,
            a_const: 1.0,
            b_const: 1.0,
            k_m: 81.0,
            a_source: String::new(),
            b_source: String::new(),
        };
        let d = params.a_const
            * (params.k_m / (3f64.powi(-2) * params.theta)).powf(1.0 / params.q_l);
        assert_relative_eq!(d, (81.0 * 18.0f64).sqrt(), max_relative = 1e-12);
        assert!((d - 38.18).abs() < 0.01);
    }

    #[test]
    fn zero_data_step_is_trivial() {
        let g = Grid::new(2, 4).unwrap();
        let coeff = make_coefficient(&g, &CoeffSpec::Identity).unwrap();
        let cfg = SolverConfig::for_grid(&g);
        let params = SparseParams {
            theta: 0.5,
            q_l: 2.0,
            q_h: 4.0,
            a_const: SparseParams::certified_a(1.0, cfg.sobolev_constant),
            b_const: 2.0,
            k_m: 81.0,
            a_source: "certified".into(),
            b_source: "fixed".into(),
        };
        let ones = GridField::constant(&g, 1.0);
        let (rep, kids) = iteration_step(
            &coeff,
            Cube::root(),
            None,
            &GridField::vector(&g),
            None,
            &ones,
            &params,
            &cfg,
            None,
        )
        .unwrap();
        assert!(kids.is_empty());
        assert_eq!(rep.xi_cells, 0);
        assert_eq!(rep.term_i + rep.term_ii + rep.term_iii, 0.0);
        assert!(rep.audit_ok);
    }

    #[test]
    fn dini_density_threshold_is_one_eighth() {
        // the density rule stops at |P ∩ Ξ|/|P| > 2^{-n-1} = 1/8 for n = 2
        assert_eq!(1usize << (2 + 1), 8);
    }

    #[test]
    fn build_trivial_family_on_zero_data() {
        let g = Grid::new(2, 4).unwrap();
        let coeff = make_coefficient(&g, &CoeffSpec::Identity).unwrap();
        let cfg = SolverConfig::for_grid(&g);
        let params = SparseParams {
            theta: 0.5,
            q_l: 2.0,
            q_h: 4.0,
            a_const: SparseParams::certified_a(1.0, cfg.sobolev_constant),
            b_const: 2.0,
            k_m: 81.0,
            a_source: "certified".into(),
            b_source: "fixed".into(),
        };
        let ones = GridField::constant(&g, 1.0);
        let (fam, cert, _) = build_sparse_family(
            &coeff,
            Cube::root(),
            None,
            &GridField::vector(&g),
            None,
            &ones,
            &BuildMode::General,
            &params,
            &cfg,
        )
        .unwrap();
        assert_eq!(fam.cubes.len(), 1);
        assert_eq!(cert.lhs, 0.0);
        assert_eq!(cert.empirical_ratio, 0.0);
        assert!(cert.bound_holds && cert.generation_decay_ok);
    }

    #[test]
    fn sparse_form_single_cube() {
        let g = Grid::new(2, 4).unwrap();
        let fam = SparseFamily::singleton(&g, Cube::root(), 0.5);
        let one_v = GridField::vector_from(&g, |_| [1.0, 0.0]);
        let one = GridField::constant(&g, 1.0);
        for (s, r) in [(1.0, 1.0), (2.0, 1.5), (0.5, 3.0)] {
            let v = sparse_form(&g, &fam, &one_v, &one, s, r, FormConvention::GOverP).unwrap();
            assert_relative_eq!(v, 1.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn sparse_form_two_children_hand_sum() {
        // two disjoint children of Q0 with constant data: each term is
        // |P| ⟨|F|⟩ ⟨g⟩ = 1/4 · 2 · 3
        let g = Grid::new(2, 4).unwrap();
        let kids = Cube::root().children(&g).unwrap();
        let mut fam = SparseFamily::singleton(&g, kids[0], 0.5);
        fam.cubes.push(kids[3]);
        fam.witnesses.insert(
            kids[3],
            kids[3].cell_box(&g).cells(&g).map(|c| c as u32).collect(),
        );
        let f = GridField::vector_from(&g, |_| [2.0, 0.0]);
        let gg = GridField::constant(&g, 3.0);
        let v = sparse_form(&g, &fam, &f, &gg, 2.0, 1.0, FormConvention::GOverP).unwrap();
        assert_relative_eq!(v, 2.0 * (0.25 * 2.0 * 3.0), max_relative = 1e-13);
    }

    #[test]
    fn sparse_form_monotone_in_r() {
        let g = Grid::new(2, 4).unwrap();
        let fam = SparseFamily::singleton(&g, Cube::root(), 0.5);
        let gen = FieldGen::new(3);
        let f = gen.fourier_vector(&g, 5, 4, 0);
        let gg = gen.nonneg_scalar(&g, 5, 4, 1);
        let v1 = sparse_form(&g, &fam, &f, &gg, 1.0, 1.0, FormConvention::GOverP).unwrap();
        let v2 = sparse_form(&g, &fam, &f, &gg, 1.0, 2.5, FormConvention::GOverP).unwrap();
        assert!(v1 <= v2 * (1.0 + 1e-12));
    }
}
