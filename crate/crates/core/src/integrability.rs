//! Term-level form of the quasi-linear system satisfied by the coefficients
//! `a_1..a_{N−1}` of a normal-form integral and the metric function `g¹²`.
//!
//! Equation `k` (`k = 1..N`) is the coefficient of `p1^(N+1−k) p2^k` in
//! `{f, H}`:
//!
//! ```text
//! a_{k,x¹} + g¹² a_{k−1,x¹} + g¹² a_{k,x²} + a_{k−1,x²}
//!     = k a_k (g¹²)_{x²} + (N+1−k) a_{k−1} (g¹²)_{x¹}
//! ```
//!
//! with `a_0 = a_N = 0`. A zero mask removes every term that carries a masked
//! coefficient; equations left without terms are dropped.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{partial, Axis, ScalarField2D};
use crate::momenta::{poisson_bracket, Coeff, HamiltonianForm, MomentaPolynomial};
use crate::scalar::Scalar;

pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Lhs,
    Rhs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Factor {
    One,
    G12,
    A(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Unknown {
    A(usize),
    G12,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RazTerm {
    pub side: Side,
    pub scalar: Rational,
    pub factor: Factor,
    pub derivative_of: Unknown,
    pub wrt: Axis,
}

impl RazTerm {
    fn new(side: Side, scalar: i64, factor: Factor, derivative_of: Unknown, wrt: Axis) -> Self {
        Self {
            side,
            scalar: Rational::from_integer(scalar),
            factor,
            derivative_of,
            wrt,
        }
    }

    fn involves(&self, k: usize) -> bool {
        self.factor == Factor::A(k) || self.derivative_of == Unknown::A(k)
    }

    /// Image under `a_k ↔ a_{N−k}`, `x¹ ↔ x²`.
    pub fn mirrored(&self, n: usize) -> Self {
        let flip_a = |k: usize| n - k;
        Self {
            side: self.side,
            scalar: self.scalar,
            factor: match self.factor {
                Factor::A(k) => Factor::A(flip_a(k)),
                f => f,
            },
            derivative_of: match self.derivative_of {
                Unknown::A(k) => Unknown::A(flip_a(k)),
                u => u,
            },
            wrt: match self.wrt {
                Axis::X1 => Axis::X2,
                Axis::X2 => Axis::X1,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RazEquation {
    /// Index `k` of the momenta monomial `p1^(N+1−k) p2^k`.
    pub k: usize,
    pub terms: Vec<RazTerm>,
}

impl RazEquation {
    /// Terms in canonical order, for structural comparison.
    pub fn canonical(&self) -> Vec<RazTerm> {
        let mut t = self.terms.clone();
        t.sort();
        t
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RazSystem {
    pub n: usize,
    pub zero_mask: BTreeSet<usize>,
    pub equations: Vec<RazEquation>,
}

/// Generic equation `k` of the system, with `a_0 = a_N = 0` already applied.
fn generic_equation(n: usize, k: usize) -> Vec<RazTerm> {
    use Axis::{X1, X2};
    let has = |m: usize| m >= 1 && m < n;
    let mut t = Vec::new();
    if has(k) {
        t.push(RazTerm::new(Side::Lhs, 1, Factor::One, Unknown::A(k), X1));
    }
    if has(k - 1) {
        t.push(RazTerm::new(Side::Lhs, 1, Factor::G12, Unknown::A(k - 1), X1));
    }
    if has(k) {
        t.push(RazTerm::new(Side::Lhs, 1, Factor::G12, Unknown::A(k), X2));
    }
    if has(k - 1) {
        t.push(RazTerm::new(Side::Lhs, 1, Factor::One, Unknown::A(k - 1), X2));
    }
    if has(k) {
        t.push(RazTerm::new(Side::Rhs, k as i64, Factor::A(k), Unknown::G12, X2));
    }
    if has(k - 1) {
        t.push(RazTerm::new(
            Side::Rhs,
            (n + 1 - k) as i64,
            Factor::A(k - 1),
            Unknown::G12,
            X1,
        ));
    }
    t
}

pub fn build_raz(n: usize, zero_mask: &BTreeSet<usize>) -> Result<RazSystem> {
    if n < 2 {
        return Err(Error::InvalidMask(format!("degree N = {n} < 2")));
    }
    if let Some(&bad) = zero_mask.iter().find(|&&k| k == 0 || k >= n) {
        return Err(Error::InvalidMask(format!(
            "index {bad} outside 1..={}",
            n - 1
        )));
    }
    if zero_mask.len() == n - 1 {
        return Err(Error::EmptySystem);
    }
    let equations = (1..=n)
        .map(|k| RazEquation {
            k,
            terms: generic_equation(n, k)
                .into_iter()
                .filter(|t| !zero_mask.iter().any(|&m| t.involves(m)))
                .collect(),
        })
        .filter(|e| !e.terms.is_empty())
        .collect();
    Ok(RazSystem {
        n,
        zero_mask: zero_mask.clone(),
        equations,
    })
}

/// Parses a comma-separated list of coefficient indices, e.g. `"2,3"`.
pub fn parse_mask(text: &str) -> Result<BTreeSet<usize>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::InvalidMask(format!("not an index: {s:?}")))
        })
        .collect()
}

impl RazSystem {
    pub fn unknowns(&self) -> impl Iterator<Item = usize> + '_ {
        (1..self.n).filter(|k| !self.zero_mask.contains(k))
    }

    /// The system after `a_k ↔ a_{N−k}`, `x¹ ↔ x²`, with equations re-indexed
    /// `k ↦ N+1−k` and listed in ascending order.
    pub fn mirrored(&self) -> RazSystem {
        let n = self.n;
        let mut equations: Vec<RazEquation> = self
            .equations
            .iter()
            .map(|e| RazEquation {
                k: n + 1 - e.k,
                terms: e.terms.iter().map(|t| t.mirrored(n)).collect(),
            })
            .collect();
        equations.sort_by_key(|e| e.k);
        RazSystem {
            n,
            zero_mask: self.zero_mask.iter().map(|&k| n - k).collect(),
            equations,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let eqs: Vec<serde_json::Value> = self
            .equations
            .iter()
            .map(|e| {
                serde_json::json!({
                    "k": e.k,
                    "terms": e.terms.iter().map(TermJson::from).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({
            "degree": self.n,
            "zero_mask": self.zero_mask.iter().collect::<Vec<_>>(),
            "equations": eqs,
        })
    }
}

#[derive(Debug, Serialize)]
pub struct TermJson {
    pub side: &'static str,
    pub scalar: String,
    pub factor: String,
    pub derivative_of: String,
    pub wrt: &'static str,
}

impl From<&RazTerm> for TermJson {
    fn from(t: &RazTerm) -> Self {
        Self {
            side: match t.side {
                Side::Lhs => "LHS",
                Side::Rhs => "RHS",
            },
            scalar: t.scalar.to_string(),
            factor: match t.factor {
                Factor::One => "1".into(),
                Factor::G12 => "g12".into(),
                Factor::A(k) => format!("a_{k}"),
            },
            derivative_of: match t.derivative_of {
                Unknown::A(k) => format!("a_{k}"),
                Unknown::G12 => "g12".into(),
            },
            wrt: axis_name(t.wrt),
        }
    }
}

fn axis_name(a: Axis) -> &'static str {
    match a {
        Axis::X1 => "x1",
        Axis::X2 => "x2",
    }
}

impl fmt::Display for RazTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scalar != Rational::from_integer(1) {
            write!(f, "{} ", self.scalar)?;
        }
        let d = match self.derivative_of {
            Unknown::A(k) => format!("a_{k},{}", axis_name(self.wrt)),
            Unknown::G12 => format!("(g12)_{}", axis_name(self.wrt)),
        };
        match self.factor {
            Factor::One => write!(f, "{d}"),
            Factor::G12 => write!(f, "g12 {d}"),
            Factor::A(k) => write!(f, "a_{k} {d}"),
        }
    }
}

impl fmt::Display for RazEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |s: Side| {
            let parts: Vec<String> = self
                .terms
                .iter()
                .filter(|t| t.side == s)
                .map(|t| t.to_string())
                .collect();
            if parts.is_empty() {
                "0".to_string()
            } else {
                parts.join(" + ")
            }
        };
        write!(f, "{} = {}", side(Side::Lhs), side(Side::Rhs))
    }
}

impl fmt::Display for RazSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.equations {
            writeln!(f, "[k={}] {}", e.k, e)?;
        }
        Ok(())
    }
}

fn rational_value<T: Scalar>(r: Rational) -> T {
    T::lit(*r.numer() as f64) / T::lit(*r.denom() as f64)
}

/// Per-equation residual `LHS − RHS`, keyed by the equation index `k`.
///
/// `a` maps coefficient indices to their values; every unmasked index must be
/// present.
pub fn raz_residual<T: Scalar>(
    sys: &RazSystem,
    a: &BTreeMap<usize, Coeff<T>>,
    g12: &ScalarField2D<T>,
) -> Result<Vec<(usize, ScalarField2D<T>)>> {
    let grid = g12.grid;
    let mut fields: BTreeMap<usize, ScalarField2D<T>> = BTreeMap::new();
    for k in sys.unknowns() {
        let c = a.get(&k).ok_or(Error::MissingField(k))?;
        let f = match c {
            Coeff::Const(v) => ScalarField2D::constant(grid, *v)?,
            Coeff::Field(f) => {
                f.require_same_grid(g12)?;
                f.clone()
            }
        };
        fields.insert(k, f);
    }
    let mut derivs: BTreeMap<(Unknown, Axis), ScalarField2D<T>> = BTreeMap::new();
    for axis in [Axis::X1, Axis::X2] {
        derivs.insert((Unknown::G12, axis), partial(g12, axis));
        for (&k, f) in &fields {
            derivs.insert((Unknown::A(k), axis), partial(f, axis));
        }
    }

    sys.equations
        .iter()
        .map(|eq| {
            let mut acc = vec![T::zero(); grid.len()];
            for t in &eq.terms {
                let sign = match t.side {
                    Side::Lhs => T::one(),
                    Side::Rhs => -T::one(),
                };
                let s = sign * rational_value::<T>(t.scalar);
                let d = derivs[&(t.derivative_of, t.wrt)].values();
                let factor: Option<&[T]> = match t.factor {
                    Factor::One => None,
                    Factor::G12 => Some(g12.values()),
                    Factor::A(k) => Some(fields[&k].values()),
                };
                for (idx, out) in acc.iter_mut().enumerate() {
                    let fv = factor.map_or(T::one(), |f| f[idx]);
                    *out += s * fv * d[idx];
                }
            }
            Ok((eq.k, ScalarField2D::new(grid, acc)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equivalence<T> {
    pub absolute: T,
    /// `absolute / max(1, largest bracket coefficient)`.
    pub relative: T,
}

/// Compares the coefficients of `{f, H}` (computed through polynomial
/// arithmetic) with the term-level residuals of [`build_raz`].
pub fn bracket_equivalence<T: Scalar>(
    n: usize,
    zero_mask: &BTreeSet<usize>,
    a: &BTreeMap<usize, Coeff<T>>,
    g12: &ScalarField2D<T>,
) -> Result<Equivalence<T>> {
    let sys = build_raz(n, zero_mask)?;
    let residuals = raz_residual(&sys, a, g12)?;

    let inner: Vec<Coeff<T>> = (1..n)
        .map(|k| {
            if zero_mask.contains(&k) {
                Ok(Coeff::zero())
            } else {
                a.get(&k).cloned().ok_or(Error::MissingField(k))
            }
        })
        .collect::<Result<_>>()?;
    let f = MomentaPolynomial::normal_form(inner)?;
    let h = HamiltonianForm::new(1, 1, Coeff::Field(g12.clone()))?;
    let bracket = poisson_bracket(&f, &h)?;

    let by_k: BTreeMap<usize, &ScalarField2D<T>> =
        residuals.iter().map(|(k, r)| (*k, r)).collect();
    let mut worst = T::zero();
    let mut scale = T::one();
    for (k, c) in bracket.coeffs().iter().enumerate() {
        scale = scale.max(c.max_abs());
        for idx in 0..g12.grid.len() {
            let r = by_k.get(&k).map_or(T::zero(), |f| f.values()[idx]);
            worst = worst.max((c.value(idx) - r).abs());
        }
    }
    Ok(Equivalence {
        absolute: worst,
        relative: worst / scale,
    })
}
