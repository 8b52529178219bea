//! Randomized invariants over the group corpus and the lifting machinery:
//! orbit-stabilizer counting, invariant-metric identities, slice-ball
//! separation, lift uniqueness, and stability of validation under
//! restriction and renaming.

use orbifold::atlas::{
    atlases_equivalent, restrict_family, validate_defining_family, OrbifoldPresentation,
    ValidationOptions,
};
use orbifold::expr::{BallNorm, Region};
use orbifold::fixtures::{corpus, half_angle_default_profile, halfangle_map, teardrop};
use orbifold::group::FiniteMatrixGroup;
use orbifold::lifting::path_lift;
use orbifold::linalg::Vector;
use orbifold::quotient::LinearQuotient;
use orbifold::scalar::{Scalar, ScalarMode};
use proptest::prelude::*;

/// Dyadic rationals stay exact through `Scalar::exact_from_f64`, so the
/// same coordinates feed both arithmetic modes.
fn dyadic(k: i64) -> f64 {
    k as f64 / 64.0
}

fn point_for(group: &FiniteMatrixGroup, nums: &[i64; 3]) -> Vec<f64> {
    nums.iter().take(group.dim()).map(|&k| dyadic(k)).collect()
}

fn exact_vector(x: &[f64]) -> Vector {
    Vector::new(
        x.iter()
            .map(|&v| Scalar::exact_from_f64(v).expect("dyadic is exact"))
            .collect(),
    )
}

fn vector_in_mode(x: &[f64], mode: ScalarMode) -> Vector {
    match mode {
        ScalarMode::Exact => exact_vector(x),
        ScalarMode::Approx { .. } => Vector::from_f64(x),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// |orbit(x)| * |stabilizer(x)| equals the group order at every point,
    /// in both exact and approximate arithmetic.
    #[test]
    fn orbit_and_stabilizer_counts_multiply_to_the_group_order(
        which in any::<prop::sample::Index>(),
        nums in prop::array::uniform3(-128i64..=128),
    ) {
        let corpus = corpus();
        let (name, group) = &corpus[which.index(corpus.len())];
        let x = point_for(group, &nums);
        let u = vector_in_mode(&x, group.mode());
        let orbit = group.orbit(&u).len();
        let stab = group.stabilizer_indices(&u).len();
        prop_assert_eq!(
            orbit * stab,
            group.order(),
            "{}: orbit {} x stab {} != order {}",
            name, orbit, stab, group.order()
        );
    }

    /// The averaged bilinear form is invariant: |g x|_gram = |x|_gram for
    /// every group element, bit-exact in exact mode.
    #[test]
    fn group_elements_preserve_the_invariant_norm(
        which in any::<prop::sample::Index>(),
        nums in prop::array::uniform3(-128i64..=128),
    ) {
        let corpus = corpus();
        let (name, group) = &corpus[which.index(corpus.len())];
        let x = point_for(group, &nums);
        let u = vector_in_mode(&x, group.mode());
        let gram = group.invariant_gram();
        let norm_u = FiniteMatrixGroup::gamma_norm_sq(&gram, &u);
        for i in 0..group.order() {
            let gu = group.element(i).apply(&u);
            let norm_gu = FiniteMatrixGroup::gamma_norm_sq(&gram, &gu);
            match group.mode() {
                ScalarMode::Exact => prop_assert!(
                    norm_gu.raw_cmp(&norm_u) == std::cmp::Ordering::Equal,
                    "{name}: exact norm changed under element {i}"
                ),
                ScalarMode::Approx { .. } => {
                    let (a, b) = (norm_u.to_f64(), norm_gu.to_f64());
                    prop_assert!(
                        (a - b).abs() <= 1e-9 * (1.0 + a.abs()),
                        "{name}: norm drifted under element {i}: {a} vs {b}"
                    );
                }
            }
        }
    }

    /// Slice balls separate orbits: around any point with a proper
    /// stabilizer, points within the slice radius of x and of gamma x never
    /// meet for non-stabilizing gamma.
    #[test]
    fn slice_balls_of_distinct_orbit_points_stay_apart(
        which in any::<prop::sample::Index>(),
        nums in prop::array::uniform3(-128i64..=128),
        dir in prop::array::uniform3(-32i64..=32),
    ) {
        let corpus = corpus();
        let (name, group) = &corpus[which.index(corpus.len())];
        let quotient = LinearQuotient::new(group.clone());
        let x = point_for(group, &nums);
        let Some(eps) = quotient.slice_radius_f64(&x, 0.45) else {
            return Ok(()); // whole group stabilizes x: nothing to separate
        };
        prop_assert!(eps > 0.0, "{name}: slice radius must be positive");
        let tol = 1e-9;
        let stab = group.stabilizer_indices_f64(&x, tol);
        // A nearby probe point inside the gamma-norm ball of radius eps.
        let offset: Vec<f64> = dir.iter().take(group.dim()).map(|&k| dyadic(k)).collect();
        let onorm = quotient.gamma_dist_f64(&offset.iter().map(|_| 0.0).collect::<Vec<_>>(), &offset);
        let y: Vec<f64> = if onorm > 0.0 {
            x.iter()
                .zip(&offset)
                .map(|(a, o)| a + o * (0.9 * eps / onorm))
                .collect()
        } else {
            x.clone()
        };
        for i in 0..group.order() {
            if stab.contains(&i) {
                continue;
            }
            let gx = group.element(i).apply_f64(&x);
            let gap = quotient.gamma_dist_f64(&gx, &x);
            prop_assert!(
                2.0 * eps < gap,
                "{name}: ball diameter {} reaches the nearest translate {}",
                2.0 * eps, gap
            );
            let gy = group.element(i).apply_f64(&y);
            prop_assert!(
                quotient.gamma_dist_f64(&gy, &y) > 0.0,
                "{name}: translated probe met the ball"
            );
        }
    }

    /// The canonical orbit representative is constant along orbits.
    #[test]
    fn canonical_representative_is_orbit_invariant(
        which in any::<prop::sample::Index>(),
        nums in prop::array::uniform3(-128i64..=128),
    ) {
        let corpus = corpus();
        let (name, group) = &corpus[which.index(corpus.len())];
        let quotient = LinearQuotient::new(group.clone());
        let x = point_for(group, &nums);
        let u = vector_in_mode(&x, group.mode());
        let rep = quotient.canonical_rep(&u).unwrap().to_f64();
        for i in 0..group.order() {
            let gu = group.element(i).apply(&u);
            let rep_g = quotient.canonical_rep(&gu).unwrap().to_f64();
            let close = rep
                .iter()
                .zip(&rep_g)
                .all(|(a, b)| (a - b).abs() <= 1e-7 * (1.0 + a.abs()));
            prop_assert!(close, "{name}: representative moved: {rep:?} vs {rep_g:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// Lift uniqueness: starting a lift from the deck translate of the seed
    /// yields exactly the deck translate of the lift, pointwise.
    #[test]
    fn path_lifts_from_translated_seeds_stay_translated(
        radius in 0.6f64..0.95,
        sweep in 0.5f64..5.5,
        steps in 24usize..48,
    ) {
        let profile = half_angle_default_profile();
        let f = halfangle_map(&profile);
        let path: Vec<Vec<f64>> = (0..=steps)
            .map(|k| {
                let t = sweep * k as f64 / steps as f64;
                vec![radius * t.cos(), radius * t.sin()]
            })
            .collect();
        let seed = f.eval_rep(&path[0]).unwrap();
        let neg: Vec<f64> = seed.iter().map(|v| -v).collect();
        let lift_a = path_lift(&f, &path, &seed, 1e-9).unwrap();
        let lift_b = path_lift(&f, &path, &neg, 1e-9).unwrap();
        for (a, b) in lift_a.iter().zip(&lift_b) {
            for (p, q) in a.iter().zip(b) {
                prop_assert!((p + q).abs() <= 1e-7, "lifts are not deck translates");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    /// Restricting a valid presentation to a ball keeps it valid, whether
    /// or not the ball straddles the singular point.
    #[test]
    fn restriction_of_a_valid_atlas_stays_valid(
        p in 2usize..4,
        angle in 0.0f64..6.28,
        centered in any::<bool>(),
        radius in 0.35f64..0.55,
    ) {
        let t = teardrop(p).unwrap();
        let center = if centered {
            vec![0.0, 0.0]
        } else {
            vec![0.45 * angle.cos(), 0.45 * angle.sin()]
        };
        let selections = vec![(
            "cone".to_string(),
            Region::Ball {
                center,
                radius,
                norm: BallNorm::Euclid,
            },
        )];
        let opts = ValidationOptions {
            samples: 40,
            grid: 32,
            ..ValidationOptions::default()
        };
        let restricted = restrict_family(&t, &selections, &opts).unwrap();
        prop_assert!(!restricted.charts.is_empty());
        let report = validate_defining_family(&restricted, &opts);
        prop_assert!(report.ok(), "violations: {:?}", report.violations);
    }
}

fn renamed(p: &OrbifoldPresentation, suffix: &str) -> OrbifoldPresentation {
    let mut q = p.clone();
    for c in &mut q.charts {
        c.id = format!("{}{suffix}", c.id);
    }
    for t in &mut q.transitions {
        t.from = format!("{}{suffix}", t.from);
        t.to = format!("{}{suffix}", t.to);
    }
    for (a, b) in &mut q.containments {
        *a = format!("{a}{suffix}");
        *b = format!("{b}{suffix}");
    }
    q
}

#[test]
fn atlas_equivalence_is_reflexive_and_symmetric() {
    let p = teardrop(2).unwrap();
    let q = renamed(&p, "-b");
    let cross: Vec<(String, String)> = p
        .charts
        .iter()
        .map(|c| (c.id.clone(), format!("{}-b", c.id)))
        .collect();
    let opts = ValidationOptions {
        samples: 60,
        ..ValidationOptions::default()
    };
    assert!(atlases_equivalent(&p, &q, &cross, &opts).unwrap());
    let cross_rev: Vec<(String, String)> = cross.iter().map(|(a, b)| (b.clone(), a.clone())).collect();
    assert!(atlases_equivalent(&q, &p, &cross_rev, &opts).unwrap());
}
