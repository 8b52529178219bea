//! End-to-end lifting behavior of the named counterexample maps.

use orbifold::expr::MapExpr;
use orbifold::fixtures;
use orbifold::lifting::{
    monodromy, path_lift, radial_lift_extension, ExtensionOptions, LiftStatus, Obstruction,
};

fn circle(radius: f64, steps: usize) -> Vec<Vec<f64>> {
    (0..=steps)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / steps as f64;
            vec![radius * t.cos(), radius * t.sin()]
        })
        .collect()
}

fn zero_map(dim: usize) -> MapExpr {
    MapExpr::affine(&vec![vec![0.0; dim]; dim], &vec![0.0; dim])
}

fn minus_identity_index(group: &orbifold::group::FiniteMatrixGroup) -> usize {
    (0..group.order())
        .find(|&i| {
            let rows = group.element(i).to_f64_rows();
            rows.iter().enumerate().all(|(r, row)| {
                row.iter()
                    .enumerate()
                    .all(|(c, &v)| (v - if r == c { -1.0 } else { 0.0 }).abs() < 1e-12)
            })
        })
        .expect("-I present")
}

#[test]
fn half_angle_loop_has_minus_identity_monodromy() {
    let f = fixtures::halfangle_map(&fixtures::half_angle_default_profile());
    let path = circle(0.75, 96);
    let seed = f.eval_rep(&path[0]).unwrap();
    let m = monodromy(&f, &path, &seed, 1e-9).unwrap();
    let target = f.target.quotient.group();
    assert_eq!(m, minus_identity_index(target));

    // Two trips around the loop return to the original branch.
    let mut double = path.clone();
    double.extend(path.iter().skip(1).cloned());
    let m2 = monodromy(&f, &double, &seed, 1e-9).unwrap();
    assert_eq!(m2, 0);
}

#[test]
fn half_angle_lift_branches_differ_by_the_deck_element() {
    let f = fixtures::halfangle_map(&fixtures::half_angle_default_profile());
    let path: Vec<Vec<f64>> = (0..=64)
        .map(|k| {
            let t = std::f64::consts::PI * k as f64 / 64.0;
            vec![0.75 * t.cos(), 0.75 * t.sin()]
        })
        .collect();
    let seed = f.eval_rep(&path[0]).unwrap();
    let lift_plus = path_lift(&f, &path, &seed, 1e-9).unwrap();
    let minus: Vec<f64> = seed.iter().map(|v| -v).collect();
    let lift_minus = path_lift(&f, &path, &minus, 1e-9).unwrap();
    for (a, b) in lift_plus.iter().zip(&lift_minus) {
        for (x, y) in a.iter().zip(b) {
            assert!((x + y).abs() < 1e-7, "branches not antipodal");
        }
    }
}

#[test]
fn half_angle_radial_extension_hits_the_monodromy_wall() {
    let f = fixtures::halfangle_map(&fixtures::half_angle_default_profile());
    let report = radial_lift_extension(&f, 0.05, &zero_map(2), &ExtensionOptions::default())
        .unwrap();
    assert_eq!(report.status, LiftStatus::NonLiftable);
    match report.obstruction {
        Some(Obstruction::Monodromy { radius, element }) => {
            assert!((0.5..1.0).contains(&radius), "radius {radius}");
            assert_eq!(element, minus_identity_index(f.target.quotient.group()));
        }
        other => panic!("expected monodromy obstruction, got {other:?}"),
    }
}

fn trivial_hom(order: usize) -> Vec<usize> {
    vec![0; order]
}

fn identity_hom(order: usize) -> Vec<usize> {
    (0..order).collect()
}

#[test]
fn example2_conflicting_homomorphisms_on_balls_past_one_fifth() {
    for radius in [0.2, 0.25] {
        let f = fixtures::example2_quotient_map(radius);
        let opts = ExtensionOptions {
            growth: 1.02,
            ..ExtensionOptions::default()
        };
        let report = radial_lift_extension(&f, 0.05, &zero_map(2), &opts).unwrap();
        assert_eq!(
            report.status,
            LiftStatus::NonLiftable,
            "radius {radius}: {:?}",
            report.obstruction
        );
        match &report.obstruction {
            Some(Obstruction::ConflictingHomomorphisms { map_a, map_b, .. }) => {
                let order = f.source.quotient.group().order();
                let pair = [map_a.clone(), map_b.clone()];
                assert!(
                    pair.contains(&trivial_hom(order)) && pair.contains(&identity_hom(order)),
                    "radius {radius}: homs {pair:?}"
                );
            }
            other => panic!("radius {radius}: expected conflicting homomorphisms, got {other:?}"),
        }
    }
}

#[test]
fn example2_quarter_ball_names_annuli_four_and_five() {
    let f = fixtures::example2_quotient_map(0.25);
    let opts = ExtensionOptions {
        growth: 1.02,
        ..ExtensionOptions::default()
    };
    let report = radial_lift_extension(&f, 0.05, &zero_map(2), &opts).unwrap();
    match &report.obstruction {
        Some(Obstruction::ConflictingHomomorphisms {
            patch_a,
            patch_b,
            map_a,
            map_b,
        }) => {
            let order = f.source.quotient.group().order();
            assert_eq!((1.0 / patch_a.0).floor() as usize, 4);
            assert_eq!((1.0 / patch_b.0).floor() as usize, 5);
            assert_eq!(*map_a, trivial_hom(order));
            assert_eq!(*map_b, identity_hom(order));
        }
        other => panic!("expected conflicting homomorphisms, got {other:?}"),
    }
}

#[test]
fn example2_lifts_inside_the_flat_core() {
    let f = fixtures::example2_quotient_map(0.1);
    let report =
        radial_lift_extension(&f, 0.02, &zero_map(2), &ExtensionOptions::default()).unwrap();
    assert_eq!(report.status, LiftStatus::Lifted);
    assert!(report.obstruction.is_none());
}

#[test]
fn example1_sign_pairs_agree_in_quotient_but_admit_no_constant_sign() {
    let pairs: [(Vec<i8>, Vec<i8>); 5] = [
        (vec![1, 1, 1, 1, 1], vec![1, -1, 1, 1, 1]),
        (vec![1, -1, 1, -1, 1], vec![1, -1, -1, -1, 1]),
        (vec![-1, -1, -1, -1, -1], vec![-1, -1, -1, -1, 1]),
        (vec![1, 1, -1, 1, 1], vec![-1, 1, -1, 1, -1]),
        (vec![1, -1, 1, -1, 1], vec![-1, -1, 1, 1, 1]),
    ];
    for (sa, sb) in &pairs {
        let ea = fixtures::SignSequence::new(sa).unwrap();
        let eb = fixtures::SignSequence::new(sb).unwrap();
        let fa = fixtures::example1_map(&ea);
        let fb = fixtures::example1_map(&eb);
        let mut sigma: Vec<f64> = vec![1.0, -1.0];
        for n in 1..=5usize {
            let mid = 0.5 * (1.0 / (n as f64 + 1.0) + 1.0 / n as f64);
            let va = fa.eval(&[mid]).unwrap()[0];
            let vb = fb.eval(&[mid]).unwrap()[0];
            // Same orbit under {+1, -1}: absolute values agree.
            assert!((va.abs() - vb.abs()).abs() <= 1e-15 * va.abs().max(1.0));
            assert!(va != 0.0);
            sigma.retain(|s| (s * va - vb).abs() <= 1e-12 * va.abs());
        }
        assert!(
            sigma.is_empty(),
            "a single sign {sigma:?} relates {sa:?} and {sb:?}"
        );
    }
}
