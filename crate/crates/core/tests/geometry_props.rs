//! Property tests for the constraint-set geometry.

use invset::geometry::ConstraintSet;
use ndarray::Array2;
use proptest::prelude::*;

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn test_sets() -> Vec<ConstraintSet> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let q = Array2::from_shape_vec((2, 2), vec![r, -r, r, r]).unwrap();
    vec![
        ConstraintSet::cube(2, 1.0),
        ConstraintSet::unit_ball(2),
        ConstraintSet::box_set(vec![-0.5, 1.0, -2.0], vec![0.5, 3.0, 0.0]).unwrap(),
        ConstraintSet::ball(vec![1.0, -1.0], 0.3).unwrap(),
        ConstraintSet::transformed_box(q, vec![-1.0, -0.2], vec![1.0, 0.2]).unwrap(),
    ]
}

/// Deterministic cloud of probe points covering inside and far outside.
fn probes(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    // Scaled samples from a wide box around the origin.
    let wide = ConstraintSet::cube(n, 4.0);
    let pts = wide.sample_uniform(count, seed);
    pts.rows().into_iter().map(|r| r.to_vec()).collect()
}

#[test]
fn projection_is_idempotent() {
    for set in test_sets() {
        for x in probes(set.dim(), 500, 11) {
            let p = set.project(&x).unwrap();
            let pp = set.project(&p).unwrap();
            assert!(
                euclid(&p, &pp) <= 1e-12,
                "projection not idempotent for {set:?} at {x:?}"
            );
            assert!(set.contains(&p).unwrap() || set.saturated_distance(&p).unwrap() < 1e-12);
        }
    }
}

#[test]
fn projection_is_one_lipschitz_on_convex_sets() {
    // 10⁴ random pairs per set kind.
    for set in [ConstraintSet::cube(2, 1.0), ConstraintSet::unit_ball(2)] {
        let pts = probes(2, 20_000, 23);
        for pair in pts.chunks_exact(2) {
            let (x, y) = (&pair[0], &pair[1]);
            let px = set.project(x).unwrap();
            let py = set.project(y).unwrap();
            assert!(
                euclid(&px, &py) <= euclid(x, y) + 1e-12,
                "projection expanded distances for {set:?}"
            );
        }
    }
}

#[test]
fn saturated_distance_is_bounded_and_one_lipschitz() {
    for set in test_sets() {
        let pts = probes(set.dim(), 20_000, 31);
        for pair in pts.chunks_exact(2) {
            let (x, y) = (&pair[0], &pair[1]);
            let dx = set.saturated_distance(x).unwrap();
            let dy = set.saturated_distance(y).unwrap();
            assert!((0.0..=1.0).contains(&dx));
            assert!((dx - dy).abs() <= euclid(x, y) + 1e-12);
        }
    }
}

#[test]
fn distance_zero_iff_member() {
    for set in test_sets() {
        for x in probes(set.dim(), 2_000, 41) {
            let inside = set.contains(&x).unwrap();
            let d = set.saturated_distance(&x).unwrap();
            assert_eq!(inside, d == 0.0, "set {set:?}, x {x:?}, d {d}");
        }
    }
}

proptest! {
    #[test]
    fn box_projection_idempotent_prop(
        xs in prop::collection::vec(-10.0f64..10.0, 3),
        half in 0.1f64..5.0,
    ) {
        let set = ConstraintSet::cube(3, half);
        let p = set.project(&xs).unwrap();
        let pp = set.project(&p).unwrap();
        prop_assert!(euclid(&p, &pp) <= 1e-12);
        prop_assert!(set.contains(&p).unwrap());
    }

    #[test]
    fn ball_projection_within_radius_prop(
        xs in prop::collection::vec(-10.0f64..10.0, 2),
        r in 0.1f64..4.0,
    ) {
        let set = ConstraintSet::ball(vec![0.0, 0.0], r).unwrap();
        let p = set.project(&xs).unwrap();
        let norm = euclid(&p, &[0.0, 0.0]);
        prop_assert!(norm <= r * (1.0 + 1e-12));
    }
}
