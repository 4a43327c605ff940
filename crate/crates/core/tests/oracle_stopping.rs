//! The stopping rules of both iterations against exhaustive enumeration.

mod common;

use common::{brute_density_stoppers, brute_threshold_stoppers};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsegrad_core::{
    density_stoppers, iteration_step, make_coefficient, measure_weak_norm_ratio,
    solve_dirichlet, threshold_stoppers, CoeffSpec, Cube, FieldGen, Grid, GridField, Region,
    SolverConfig, SparseParams,
};

#[test]
fn threshold_rule_matches_brute_force_on_synthetic_fields() {
    for dim in [1usize, 2] {
        for level in 1..=4u32 {
            let g = Grid::new(dim, level).unwrap();
            let gen = FieldGen::new(dim as u64 * 100 + level as u64);
            let values = gen.nonneg_scalar(&g, 6, 5, 0);
            // thresholds across the value range, including one that
            // selects plenty of cells and one that selects few
            let q0 = Region::from_box(&g, &Cube::root().cell_box(&g));
            let mean = values.integrate(&q0) / q0.measure();
            for (k, t) in [0.4 * mean, mean, 2.5 * mean].into_iter().enumerate() {
                let got = match threshold_stoppers(&g, Cube::root(), &values, t) {
                    Ok(mut v) => {
                        v.sort();
                        v
                    }
                    Err(_) => continue, // root itself stops: rule not applicable
                };
                let expected = brute_threshold_stoppers(&values, &g, Cube::root(), t);
                assert_eq!(got, expected, "dim {dim} level {level} threshold #{k}");
            }
        }
    }
}

#[test]
fn threshold_rule_matches_on_subcube_roots() {
    let g = Grid::new(2, 4).unwrap();
    let gen = FieldGen::new(7);
    let values = gen.nonneg_scalar(&g, 6, 5, 3);
    for root in [Cube::new(1, [1, 0]), Cube::new(2, [2, 3])] {
        let b = root.cell_box(&g);
        let mean: f64 =
            b.cells(&g).map(|c| values.value(c)).sum::<f64>() / b.cell_count() as f64;
        if let Ok(mut got) = threshold_stoppers(&g, root, &values, 1.2 * mean) {
            got.sort();
            let expected = brute_threshold_stoppers(&values, &g, root, 1.2 * mean);
            assert_eq!(got, expected, "root {root}");
        }
    }
}

#[test]
fn density_rule_matches_brute_force_on_random_masks() {
    for dim in [1usize, 2] {
        for level in 2..=4u32 {
            let g = Grid::new(dim, level).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(dim as u64 * 31 + level as u64);
            for trial in 0..6 {
                // sparse random mask, density safely below the root gate
                let mut xi = vec![false; g.num_cells()];
                let root_box = Cube::root().cell_box(&g);
                let density = match trial % 3 {
                    0 => 0.01,
                    1 => 0.05,
                    _ => 0.10,
                };
                for c in root_box.cells(&g) {
                    if rng.gen_bool(density) {
                        xi[c] = true;
                    }
                }
                let got = match density_stoppers(&g, Cube::root(), &xi) {
                    Ok(mut v) => {
                        v.sort();
                        v
                    }
                    Err(_) => continue,
                };
                let expected = brute_density_stoppers(&xi, &g, Cube::root());
                assert_eq!(got, expected, "dim {dim} level {level} trial {trial}");
                // the stopped cubes always cover the mask
                let mut covered = vec![false; g.num_cells()];
                for p in &got {
                    for c in p.cell_box(&g).cells(&g) {
                        covered[c] = true;
                    }
                }
                for c in root_box.cells(&g) {
                    assert!(!xi[c] || covered[c], "mask cell {c} escaped the cover");
                }
            }
        }
    }
}

#[test]
fn density_rule_clustered_mask() {
    // a concentrated blob produces a shallow cover; exact match again
    let g = Grid::new(2, 4).unwrap();
    let mut xi = vec![false; g.num_cells()];
    let blob = Cube::new(3, [2, 5]).cell_box(&g);
    for c in blob.cells(&g) {
        xi[c] = true;
    }
    let mut got = density_stoppers(&g, Cube::root(), &xi).unwrap();
    got.sort();
    let expected = brute_density_stoppers(&xi, &g, Cube::root());
    assert_eq!(got, expected);
    assert!(!got.is_empty());
}

#[test]
fn iteration_children_match_brute_force_end_to_end() {
    // measured (not certified) constants make the threshold land inside
    // the data range, so the stopping set is nontrivial
    let g = Grid::new(2, 4).unwrap();
    let spec = CoeffSpec::Checkerboard {
        alpha: 1.0,
        beta: 4.0,
        period: 0.25,
    };
    let coeff = make_coefficient(&g, &spec).unwrap();
    let cfg = SolverConfig::for_grid(&g);
    let k_meas = measure_weak_norm_ratio(&g, 20, 9).unwrap();
    let probe_gen = FieldGen::new(77);
    let band = FieldGen::default_band(&g);
    let phi = sparsegrad_core::calibrate_stopping_threshold(
        &g, &spec, None, 2.0, 0.5, 15, 5, &cfg,
        |t| probe_gen.fourier_vector(&g, 6, band, t),
    )
    .unwrap();
    let params = SparseParams {
        theta: 0.5,
        q_l: 2.0,
        q_h: 4.0,
        a_const: 1.1 * phi / (k_meas / (3f64.powi(-2) * 0.5)).sqrt(),
        b_const: 2.0,
        k_m: k_meas,
        a_source: "quantile-calibrated".into(),
        b_source: "fixed".into(),
    };
    let ones = GridField::constant(&g, 1.0);
    let mut fired = false;
    for seed in 0..4u64 {
        let gen = FieldGen::new(seed);
        let f_vec = gen.fourier_vector(&g, 6, FieldGen::default_band(&g), 0);
        let (report, _) = iteration_step(
            &coeff,
            Cube::root(),
            None,
            &f_vec,
            None,
            &ones,
            &params,
            &cfg,
            None,
        )
        .unwrap();
        // rebuild |∇u|² independently and enumerate
        let region = Region::from_box(&g, &Cube::root().triple_box(&g));
        let u = solve_dirichlet(&coeff, &region, &f_vec, &GridField::scalar(&g), &cfg)
            .unwrap()
            .u;
        let grad = u.gradient();
        let mut pow = GridField::scalar(&g);
        for c in 0..g.num_cells() {
            pow.set(c, grad.magnitude(c).powi(2));
        }
        let expected = brute_threshold_stoppers(
            &pow,
            &g,
            Cube::root(),
            report.threshold_d * report.threshold_d,
        );
        let mut got = report.children.clone();
        got.sort();
        assert_eq!(got, expected, "seed {seed}");
        fired |= !got.is_empty();
        // measure bound verified exactly by the step; re-assert here
        assert!(2 * report.xi_cells <= report.cube_cells);
    }
    assert!(fired, "no seed produced a nontrivial stopping set");
}
