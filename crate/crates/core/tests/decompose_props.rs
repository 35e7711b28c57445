use proptest::prelude::*;
use qcarleson_core::decompose::{validate_forest, validate_row, validate_tree, DecomposeParams, Terminal};
use qcarleson_core::linefield::masses;
use qcarleson_core::{decompose, mass, LineField, MassConfig, Occupancy, RealInterval, Tile, Universe};
use std::collections::BTreeSet;

fn params(k: f64) -> DecomposeParams {
    DecomposeParams { mass: MassConfig::default(), k }
}

fn field(seed: u64, pieces: usize, span: f64) -> LineField {
    LineField::piecewise_random(64, pieces, RealInterval::new(-span, span), seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_tile_lands_exactly_once(seed in 0u64..1_000, pieces_log in 0u32..5, span in 2.0f64..12.0, k in prop::sample::select(vec![1.0, 16.0])) {
        let u = Universe::new(&[0, 1, 2], RealInterval::new(-8.0, 8.0));
        let r = decompose(&u, &field(seed, 1 << pieces_log, span), params(k));
        prop_assert_eq!(r.conservation.missing, 0);
        prop_assert_eq!(r.conservation.duplicates, 0);
        prop_assert_eq!(r.assignment.len(), u.len());
        let keys: BTreeSet<_> = r.assignment.iter().map(|(key, _)| *key).collect();
        let universe: BTreeSet<_> = u.tiles().iter().map(|p| p.key()).collect();
        prop_assert_eq!(keys, universe);
    }

    #[test]
    fn selected_structures_validate(seed in 0u64..1_000, pieces_log in 0u32..5) {
        let u = Universe::new(&[0, 1, 2], RealInterval::new(-8.0, 8.0));
        let f = field(seed, 1 << pieces_log, 6.0);
        let r = decompose(&u, &f, params(16.0));
        prop_assert!(r.validation.passed(), "{:?}", r.validation);
        let occ = Occupancy::build(&f, u.max_scale());
        let cfg = MassConfig::default();
        for st in &r.strata {
            let delta = 2f64.powi(-(st.n as i32));
            for b in &st.buckets {
                for t in &b.forest.trees {
                    prop_assert!(validate_tree(t, &u).is_empty());
                }
                prop_assert!(validate_forest(&b.forest, &|p: &Tile| mass(p, &occ, &cfg)).is_empty());
                for row in &b.rows.rows {
                    prop_assert!(validate_row(row, delta, 16.0).is_empty());
                }
            }
        }
    }

    #[test]
    fn zero_mass_tiles_are_set_aside(seed in 0u64..1_000) {
        let u = Universe::new(&[0, 1, 2], RealInterval::new(-8.0, 8.0));
        let f = field(seed, 4, 3.0);
        let occ = Occupancy::build(&f, u.max_scale());
        let m = masses(u.tiles(), &occ, &MassConfig::default());
        let r = decompose(&u, &f, params(16.0));
        let zero = m.iter().filter(|&&x| x == 0.0).count();
        prop_assert_eq!(r.zero_mass, zero);
        let tagged = r.assignment.iter().filter(|(_, t)| matches!(t, Terminal::ZeroMass)).count();
        prop_assert_eq!(tagged, zero);
    }

    #[test]
    fn reruns_are_identical(seed in 0u64..1_000) {
        let u = Universe::new(&[0, 2], RealInterval::new(-8.0, 8.0));
        let f = field(seed, 8, 6.0);
        prop_assert_eq!(decompose(&u, &f, params(16.0)).to_json(), decompose(&u, &f, params(16.0)).to_json());
    }
}

#[test]
fn empty_field_yields_no_strata() {
    let u = Universe::new(&[0, 1], RealInterval::new(-4.0, 4.0));
    let f = LineField::constant(64, qcarleson_core::Line::new(1e7, 0.0));
    let r = decompose(&u, &f, params(16.0));
    assert!(r.strata.is_empty());
    assert_eq!(r.zero_mass, u.len());
}
