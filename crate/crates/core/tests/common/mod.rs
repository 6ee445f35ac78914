//! Hand-transcribed reference listings of the cubic and quartic systems.
#![allow(dead_code)]

use geohydro_core::fields::Axis::{self, X1, X2};
use geohydro_core::integrability::{Factor, RazTerm, Rational, Side, Unknown};

pub fn term(side: Side, s: i64, factor: Factor, d: Unknown, wrt: Axis) -> RazTerm {
    RazTerm {
        side,
        scalar: Rational::from_integer(s),
        factor,
        derivative_of: d,
        wrt,
    }
}

pub fn sorted(mut v: Vec<RazTerm>) -> Vec<RazTerm> {
    v.sort();
    v
}

use Factor::{One, A, G12};
use Side::{Lhs, Rhs};

pub fn a(k: usize) -> Unknown {
    Unknown::A(k)
}

const G: Unknown = Unknown::G12;

pub fn cubic() -> Vec<Vec<RazTerm>> {
    vec![
        vec![
            term(Lhs, 1, One, a(1), X1),
            term(Lhs, 1, G12, a(1), X2),
            term(Rhs, 1, A(1), G, X2),
        ],
        vec![
            term(Lhs, 1, G12, a(1), X1),
            term(Lhs, 1, One, a(2), X1),
            term(Lhs, 1, One, a(1), X2),
            term(Lhs, 1, G12, a(2), X2),
            term(Rhs, 2, A(1), G, X1),
            term(Rhs, 2, A(2), G, X2),
        ],
        vec![
            term(Lhs, 1, G12, a(2), X1),
            term(Lhs, 1, One, a(2), X2),
            term(Rhs, 1, A(2), G, X1),
        ],
    ]
}

pub fn quartic() -> Vec<Vec<RazTerm>> {
    vec![
        vec![
            term(Lhs, 1, One, a(1), X1),
            term(Lhs, 1, G12, a(1), X2),
            term(Rhs, 1, A(1), G, X2),
        ],
        vec![
            term(Lhs, 1, One, a(1), X2),
            term(Lhs, 1, One, a(2), X1),
            term(Lhs, 1, G12, a(1), X1),
            term(Lhs, 1, G12, a(2), X2),
            term(Rhs, 2, A(2), G, X2),
            term(Rhs, 3, A(1), G, X1),
        ],
        vec![
            term(Lhs, 1, One, a(3), X1),
            term(Lhs, 1, One, a(2), X2),
            term(Lhs, 1, G12, a(3), X2),
            term(Lhs, 1, G12, a(2), X1),
            term(Rhs, 3, A(3), G, X2),
            term(Rhs, 2, A(2), G, X1),
        ],
        vec![
            term(Lhs, 1, One, a(3), X2),
            term(Lhs, 1, G12, a(3), X1),
            term(Rhs, 1, A(3), G, X1),
        ],
    ]
}

