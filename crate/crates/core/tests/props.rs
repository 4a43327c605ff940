//! Property tests for the field and lattice invariants.

use proptest::prelude::*;
use sparsegrad_core::{CellBox, Cube, Grid, GridField, Region};

fn arb_grid() -> impl Strategy<Value = Grid> {
    (1usize..=2, 1u32..=4).prop_map(|(d, l)| Grid::new(d, l).unwrap())
}

fn arb_field(grid: Grid) -> impl Strategy<Value = GridField> {
    proptest::collection::vec(-10.0f64..10.0, grid.num_cells()).prop_map(move |vals| {
        let mut f = GridField::scalar(&grid);
        f.data_mut().copy_from_slice(&vals);
        f
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_mean_monotone_in_exponent(
        (grid, s, t, shift) in arb_grid().prop_flat_map(|g| (
            Just(g),
            0.25f64..3.0,
            0.0f64..3.0,
            0usize..4,
        ))
    ) {
        let gen = sparsegrad_core::FieldGen::new(shift as u64 + 1);
        let h = gen.fourier_scalar(&grid, 5, 4, 7);
        let region = Region::from_box(&grid, &grid.unit_box());
        let lo = h.power_mean(&region, s).unwrap();
        let hi = h.power_mean(&region, s + t).unwrap();
        prop_assert!(lo <= hi * (1.0 + 1e-12), "{lo} > {hi} at s={s}, t={}", s + t);
    }

    #[test]
    fn power_mean_scales_homogeneously(
        (grid, c) in arb_grid().prop_flat_map(|g| (Just(g), -5.0f64..5.0))
    ) {
        let gen = sparsegrad_core::FieldGen::new(5);
        let h = gen.fourier_scalar(&grid, 4, 3, 1);
        let mut ch = h.clone();
        for v in ch.data_mut() {
            *v *= c;
        }
        let region = Region::from_box(&grid, &grid.unit_box());
        for s in [0.5, 1.0, 2.0] {
            let a = ch.power_mean(&region, s).unwrap();
            let b = c.abs() * h.power_mean(&region, s).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-12));
        }
    }

    #[test]
    fn integrate_additive_over_disjoint_boxes(
        (grid, field, split) in arb_grid().prop_flat_map(|g| (
            Just(g),
            arb_field(g),
            1i64..8,
        ))
    ) {
        let b = grid.unit_box();
        let cut = b.lo[0] + (split % (b.hi[0] - b.lo[0])).max(1);
        let left = CellBox::new(b.lo, [cut, b.hi[1]]);
        let right = CellBox::new([cut, b.lo[1]], b.hi);
        let rl = Region::from_box(&grid, &left);
        let rr = Region::from_box(&grid, &right);
        let rb = Region::from_box(&grid, &b);
        let total = field.integrate(&rb);
        let parts = field.integrate(&rl) + field.integrate(&rr);
        prop_assert!((total - parts).abs() <= 1e-12 * total.abs().max(1.0));
    }

    #[test]
    fn children_partition_and_triples_nest(
        (grid, depth, salt) in arb_grid().prop_flat_map(|g| (
            Just(g),
            0u32..3,
            0u32..100,
        ))
    ) {
        let depth = depth.min(grid.level() - 1);
        let side = 1u32 << depth;
        let pos = [salt % side, if grid.dim() == 2 { (salt / 7) % side } else { 0 }];
        let q = Cube::new(depth, pos);
        let kids = q.children(&grid).unwrap();
        let mut seen = vec![false; grid.num_cells()];
        for k in &kids {
            prop_assert!(q.triple_box(&grid).contains_box(&k.triple_box(&grid)));
            for c in k.cell_box(&grid).cells(&grid) {
                prop_assert!(!seen[c]);
                seen[c] = true;
            }
        }
        for c in q.cell_box(&grid).cells(&grid) {
            prop_assert!(seen[c]);
        }
    }

    #[test]
    fn csv_roundtrip_preserves_fields(
        (_grid, field) in arb_grid().prop_flat_map(|g| (Just(g), arb_field(g)))
    ) {
        let dir = std::env::temp_dir().join("sparsegrad-props");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("f{}.csv", std::process::id()));
        field.write_csv(&path).unwrap();
        let back = GridField::read_csv(&path).unwrap();
        prop_assert_eq!(field, back);
    }
}
