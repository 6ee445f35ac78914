mod common;

use std::collections::BTreeSet;

use common::{a, cubic, quartic, sorted};
use geohydro_core::integrability::{build_raz, Factor::A, RazTerm};

fn check(n: usize, expected: Vec<Vec<RazTerm>>) {
    let sys = build_raz(n, &BTreeSet::new()).unwrap();
    assert_eq!(sys.equations.len(), expected.len());
    for (eq, exp) in sys.equations.iter().zip(expected) {
        assert_eq!(eq.canonical(), sorted(exp), "equation k={}", eq.k);
    }
}

#[test]
fn cubic_system_matches_reference_listing() {
    check(3, cubic());
}

#[test]
fn quartic_system_matches_reference_listing() {
    check(4, quartic());
}

#[test]
fn cubic_masks_reduce_reference_listing() {
    for m in [1usize, 2] {
        let sys = build_raz(3, &BTreeSet::from([m])).unwrap();
        let expected: Vec<Vec<RazTerm>> = cubic()
            .into_iter()
            .map(|eq| {
                eq.into_iter()
                    .filter(|t| t.factor != A(m) && t.derivative_of != a(m))
                    .collect::<Vec<_>>()
            })
            .filter(|eq| !eq.is_empty())
            .collect();
        assert_eq!(sys.equations.len(), expected.len());
        for (eq, exp) in sys.equations.iter().zip(expected) {
            assert_eq!(eq.canonical(), sorted(exp));
        }
    }
}

#[test]
fn quartic_triple_root_mask_leaves_two_equations() {
    let sys = build_raz(4, &BTreeSet::from([2, 3])).unwrap();
    assert_eq!(sys.equations.iter().map(|e| e.k).collect::<Vec<_>>(), vec![1, 2]);
}
