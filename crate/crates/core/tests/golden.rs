//! Frozen end-to-end numbers for one pinned construction: any drift in
//! the solver, the stopping rule, or the form evaluation shows up here
//! long before it would flip an inequality.

use sparsegrad_core::{
    build_sparse_family, make_coefficient, BuildMode, CoeffSpec, Cube, FieldGen, Grid,
    GridField, SolverConfig, SparseParams,
};

fn close(actual: f64, frozen: f64, what: &str) {
    assert!(
        (actual - frozen).abs() <= 1e-10 * frozen.abs().max(1e-300),
        "{what} drifted: {actual:.15e} vs frozen {frozen:.15e}"
    );
}

#[test]
fn pinned_construction_matches_frozen_values() {
    let grid = Grid::new(2, 4).unwrap();
    let cfg = SolverConfig::for_grid(&grid);
    let spec = CoeffSpec::Checkerboard {
        alpha: 1.0,
        beta: 4.0,
        period: 0.25,
    };
    let coeff = make_coefficient(&grid, &spec).unwrap();
    let params = SparseParams {
        theta: 0.5,
        q_l: 2.0,
        q_h: 4.0,
        a_const: 0.62,
        b_const: 2.0,
        k_m: 0.12,
        a_source: "pinned".into(),
        b_source: "pinned".into(),
    };
    let gen = FieldGen::new(2024);
    let f_vec = gen.multiscale_vector(&grid, 3, FieldGen::default_band(&grid), 0);
    let ones = GridField::constant(&grid, 1.0);
    let (fam, cert, reports) = build_sparse_family(
        &coeff,
        Cube::root(),
        None,
        &f_vec,
        None,
        &ones,
        &BuildMode::General,
        &params,
        &cfg,
    )
    .unwrap();

    assert_eq!(fam.cubes.len(), 9);
    assert_eq!(fam.generations.len(), 2);
    assert_eq!(reports[0].xi_cells, 8);
    close(cert.lhs, 6.289707203282646e-1, "lhs");
    close(cert.rhs_sum, 1.896774782733375e0, "rhs_sum");
    close(cert.empirical_ratio, 3.316001066936777e-1, "empirical_ratio");
    close(reports[0].threshold_d, 1.652833141655603e0, "root threshold");
    close(cfg.sobolev_constant, 8.822381750396722e-1, "sobolev constant");
}
