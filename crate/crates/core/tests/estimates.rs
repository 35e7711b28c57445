//! Estimates that sit outside the twelve acceptance criteria.

use qcarleson_core::verify::{check_carleson_measure, check_cutoff, check_end_to_end, half_step_deltas};
use qcarleson_core::{LineField, MassConfig, RealInterval, Universe};

#[test]
fn carleson_measure_stays_bounded_across_delta() {
    let r = check_carleson_measure(&[1, 2, 3, 4], &(2..=6).collect::<Vec<_>>(), 1e-3, MassConfig::default());
    assert!(r.passed, "{}", r.summary());
}

#[test]
fn cutoff_decays_like_root_delta() {
    let r = check_cutoff(512, 2, &half_step_deltas(8));
    assert!(r.passed, "{}", r.summary());
    let slope = r.fit.unwrap().slope;
    assert!((0.4..=0.7).contains(&slope), "{slope}");
}

#[test]
fn end_to_end_is_bounded_in_k() {
    let window = RealInterval::new(-16.0, 16.0);
    let u = Universe::new(&[0, 2, 4], window);
    let field = LineField::piecewise_random(64, 16, window, 1);
    let r = check_end_to_end(&field, &u, &[16.0, 64.0, 256.0], MassConfig::default(), 256);
    assert!(r.passed, "{}", r.summary());
}
