//! Homogeneous polynomials in the momenta `(p1, p2)` with coefficients that are
//! constants or sampled fields, the normal-form Hamiltonian, Poisson brackets,
//! root multiplicities and the change of momenta to semi-geodesic coordinates.
//!
//! A polynomial of degree `N` is stored as `a_0..a_N` with
//! `f = Σ_m a_m p1^(N−m) p2^m`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{partial, Axis, Grid2D, ScalarField2D};
use crate::roots::companion_roots;
use crate::scalar::Scalar;

/// Default relative tolerance for merging roots into one multiple root.
pub const ROOT_MERGE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum Coeff<T> {
    Const(T),
    Field(ScalarField2D<T>),
}

impl<T: Scalar> From<T> for Coeff<T> {
    fn from(v: T) -> Self {
        Coeff::Const(v)
    }
}

impl<T: Scalar> From<ScalarField2D<T>> for Coeff<T> {
    fn from(f: ScalarField2D<T>) -> Self {
        Coeff::Field(f)
    }
}

impl<T: Scalar> Coeff<T> {
    pub fn zero() -> Self {
        Coeff::Const(T::zero())
    }

    pub fn grid(&self) -> Option<&Grid2D<T>> {
        match self {
            Coeff::Const(_) => None,
            Coeff::Field(f) => Some(&f.grid),
        }
    }

    /// Value at flat grid index `idx`; constants ignore the index.
    #[inline]
    pub fn value(&self, idx: usize) -> T {
        match self {
            Coeff::Const(c) => *c,
            Coeff::Field(f) => f.values()[idx],
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Coeff::Const(c) => c.is_zero(),
            Coeff::Field(f) => f.values().iter().all(|v| v.is_zero()),
        }
    }

    pub fn derivative(&self, axis: Axis) -> Self {
        match self {
            Coeff::Const(_) => Coeff::Const(T::zero()),
            Coeff::Field(f) => Coeff::Field(partial(f, axis)),
        }
    }

    pub fn scale(&self, s: T) -> Result<Self> {
        Ok(match self {
            Coeff::Const(c) => Coeff::Const(*c * s),
            Coeff::Field(f) => Coeff::Field(f.map(|v| v * s)?),
        })
    }

    fn combine(&self, other: &Self, op: impl Fn(T, T) -> T) -> Result<Self> {
        Ok(match (self, other) {
            (Coeff::Const(a), Coeff::Const(b)) => Coeff::Const(op(*a, *b)),
            (Coeff::Const(a), Coeff::Field(g)) => Coeff::Field(g.map(|v| op(*a, v))?),
            (Coeff::Field(f), Coeff::Const(b)) => Coeff::Field(f.map(|v| op(v, *b))?),
            (Coeff::Field(f), Coeff::Field(g)) => Coeff::Field(f.zip_with(g, op)?),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.combine(other, |a, b| a * b)
    }

    pub fn max_abs(&self) -> T {
        match self {
            Coeff::Const(c) => c.abs(),
            Coeff::Field(f) => f.max_abs(),
        }
    }
}

/// The single grid shared by all field coefficients, if any.
pub fn common_grid<'a, T: Scalar>(
    coeffs: impl IntoIterator<Item = &'a Coeff<T>>,
) -> Result<Option<Grid2D<T>>> {
    let mut grid: Option<Grid2D<T>> = None;
    for c in coeffs {
        if let Some(g) = c.grid() {
            match &grid {
                None => grid = Some(*g),
                Some(h) if h.same_as(g) => {}
                Some(h) => {
                    return Err(Error::GridMismatch(format!(
                        "coefficient grid {}x{} differs from {}x{}",
                        g.nx, g.ny, h.nx, h.ny
                    )))
                }
            }
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentaPolynomial<T> {
    coeffs: Vec<Coeff<T>>,
}

impl<T: Scalar> MomentaPolynomial<T> {
    pub fn new(coeffs: Vec<Coeff<T>>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::Dimension(format!(
                "degree ≥ 1 needs at least two coefficients, got {}",
                coeffs.len()
            )));
        }
        common_grid(&coeffs)?;
        Ok(Self { coeffs })
    }

    /// All-constant polynomial.
    pub fn constant(values: &[T]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Coeff::Const(v)).collect())
    }

    /// Normal form `Σ_{m=1}^{N−1} a_m p1^(N−m) p2^m` (so `a_0 = a_N = 0`).
    pub fn normal_form(inner: Vec<Coeff<T>>) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(inner.len() + 2);
        coeffs.push(Coeff::zero());
        coeffs.extend(inner);
        coeffs.push(Coeff::zero());
        Self::new(coeffs)
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Coeff<T>] {
        &self.coeffs
    }

    pub fn grid(&self) -> Option<Grid2D<T>> {
        common_grid(&self.coeffs).ok().flatten()
    }

    pub fn coeff_values(&self, idx: usize) -> Vec<T> {
        self.coeffs.iter().map(|c| c.value(idx)).collect()
    }

    fn map_coeffs(&self, f: impl Fn(&Coeff<T>) -> Coeff<T>) -> Vec<Coeff<T>> {
        self.coeffs.iter().map(f).collect()
    }

    /// `∂f/∂x^i` (coefficientwise).
    pub fn d_position(&self, axis: Axis) -> Self {
        Self {
            coeffs: self.map_coeffs(|c| c.derivative(axis)),
        }
    }

    /// `∂f/∂p1`, a polynomial of degree `N − 1` (empty for degree 0).
    fn d_p1(&self) -> Result<Vec<Coeff<T>>> {
        let n = self.degree();
        (0..n)
            .map(|m| self.coeffs[m].scale(T::from_usize_lossy(n - m)))
            .collect()
    }

    /// `∂f/∂p2`, a polynomial of degree `N − 1`.
    fn d_p2(&self) -> Result<Vec<Coeff<T>>> {
        let n = self.degree();
        (0..n)
            .map(|m| self.coeffs[m + 1].scale(T::from_usize_lossy(m + 1)))
            .collect()
    }

    pub fn evaluate(&self, point: (usize, usize), p1: T, p2: T) -> Result<T> {
        let idx = match self.grid() {
            Some(g) => {
                if point.0 >= g.nx || point.1 >= g.ny {
                    return Err(Error::OutOfRange {
                        i: point.0,
                        j: point.1,
                    });
                }
                g.index(point.0, point.1)
            }
            None => 0,
        };
        Ok(eval_form(&self.coeff_values(idx), p1, p2))
    }

    pub fn max_abs_coeff(&self) -> T {
        self.coeffs
            .iter()
            .map(|c| c.max_abs())
            .fold(T::zero(), T::max)
    }
}

/// Evaluates the binary form with coefficients `c_0..c_N` at `(p1, p2)`.
pub fn eval_form<T: Scalar>(coeffs: &[T], p1: T, p2: T) -> T {
    let n = coeffs.len() - 1;
    let mut acc = T::zero();
    let mut p2pow = T::one();
    for (m, &c) in coeffs.iter().enumerate() {
        acc += c * p1.powi((n - m) as i32) * p2pow;
        p2pow = p2pow * p2;
    }
    acc
}

/// Product of two binary forms given by coefficient lists.
pub fn form_mul<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn coeff_form_mul<T: Scalar>(a: &[Coeff<T>], b: &[Coeff<T>]) -> Result<Vec<Coeff<T>>> {
    let mut out = vec![Coeff::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] = out[i + j].add(&x.mul(y)?)?;
        }
    }
    Ok(out)
}

fn coeff_form_axpy<T: Scalar>(acc: &mut [Coeff<T>], sign: T, x: &[Coeff<T>]) -> Result<()> {
    for (a, v) in acc.iter_mut().zip(x) {
        *a = a.add(&v.scale(sign)?)?;
    }
    Ok(())
}

/// Canonical Poisson bracket `{f, g}` of two momenta polynomials in two
/// degrees of freedom: `f_x¹ g_p1 − f_p1 g_x¹ + f_x² g_p2 − f_p2 g_x²`.
///
/// The result has degree `deg f + deg g − 1`. Coefficients are assembled by
/// multiplying the coefficient lists, with spatial derivatives taken by the
/// grid's finite-difference operator.
pub fn poisson<T: Scalar>(
    f: &MomentaPolynomial<T>,
    g: &MomentaPolynomial<T>,
) -> Result<MomentaPolynomial<T>> {
    common_grid(f.coeffs.iter().chain(&g.coeffs))?;
    let fx1 = f.d_position(Axis::X1);
    let fx2 = f.d_position(Axis::X2);
    let gx1 = g.d_position(Axis::X1);
    let gx2 = g.d_position(Axis::X2);
    let (fp1, fp2) = (f.d_p1()?, f.d_p2()?);
    let (gp1, gp2) = (g.d_p1()?, g.d_p2()?);

    let one = T::one();
    let mut acc = coeff_form_mul(&fx1.coeffs, &gp1)?;
    coeff_form_axpy(&mut acc, -one, &coeff_form_mul(&fp1, &gx1.coeffs)?)?;
    coeff_form_axpy(&mut acc, one, &coeff_form_mul(&fx2.coeffs, &gp2)?)?;
    coeff_form_axpy(&mut acc, -one, &coeff_form_mul(&fp2, &gx2.coeffs)?)?;
    MomentaPolynomial::new(acc)
}

/// Normal-form Hamiltonian `½ε₁p1² + g¹² p1 p2 + ½ε₂p2²`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianForm<T> {
    pub eps1: i8,
    pub eps2: i8,
    pub g12: Coeff<T>,
}

impl<T: Scalar> HamiltonianForm<T> {
    pub fn new(eps1: i8, eps2: i8, g12: impl Into<Coeff<T>>) -> Result<Self> {
        for e in [eps1, eps2] {
            if !(-1..=1).contains(&e) {
                return Err(Error::Domain(format!("epsilon {e} not in {{-1, 0, 1}}")));
            }
        }
        Ok(Self {
            eps1,
            eps2,
            g12: g12.into(),
        })
    }

    /// `½p1² + g¹² p1 p2 + ½p2²`, rejecting `|g¹²| ≥ 1` anywhere.
    pub fn riemannian(g12: impl Into<Coeff<T>>) -> Result<Self> {
        let h = Self::new(1, 1, g12)?;
        h.check_riemannian()?;
        Ok(h)
    }

    pub fn check_riemannian(&self) -> Result<()> {
        match &self.g12 {
            Coeff::Const(c) if c.abs() >= T::one() => Err(Error::DegenerateSignature {
                i: 0,
                j: 0,
                value: c.abs().as_f64(),
            }),
            Coeff::Const(_) => Ok(()),
            Coeff::Field(f) => {
                for j in 0..f.grid.ny {
                    for i in 0..f.grid.nx {
                        let v = f.at(i, j).abs();
                        if v >= T::one() {
                            return Err(Error::DegenerateSignature {
                                i,
                                j,
                                value: v.as_f64(),
                            });
                        }
                    }
                }
                Ok(())
            }
        }
    }

    pub fn as_polynomial(&self) -> MomentaPolynomial<T> {
        let half = T::lit(0.5);
        MomentaPolynomial {
            coeffs: vec![
                Coeff::Const(half * T::from_i8(self.eps1).unwrap()),
                self.g12.clone(),
                Coeff::Const(half * T::from_i8(self.eps2).unwrap()),
            ],
        }
    }
}

/// `{f, H}` for the normal-form Hamiltonian.
pub fn poisson_bracket<T: Scalar>(
    f: &MomentaPolynomial<T>,
    h: &HamiltonianForm<T>,
) -> Result<MomentaPolynomial<T>> {
    poisson(f, &h.as_polynomial())
}

/// Root of a binary form in the slope `s = p2/p1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RootValue<T> {
    Finite(T),
    Infinity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootStructure<T> {
    /// Distinct roots (ascending, infinity last) with multiplicities.
    pub roots: Vec<(RootValue<T>, usize)>,
}

impl<T: Scalar> RootStructure<T> {
    pub fn total_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.1).sum()
    }

    pub fn distinct(&self) -> usize {
        self.roots.len()
    }
}

/// Roots of the binary form with coefficient values `c_0..c_N`.
///
/// Exact leading zeros give the root `s = 0` and trailing zeros the root at
/// infinity; the rest come from the companion matrix of `Σ c_m s^m`. Roots
/// within `tol · max(1, |s|)` of each other are merged.
pub fn form_root_structure<T: Scalar>(coeffs: &[T], tol: T) -> Result<RootStructure<T>> {
    let n = coeffs.len() - 1;
    let Some(top) = coeffs.iter().rposition(|c| !c.is_zero()) else {
        return Err(Error::ZeroPolynomial);
    };
    let bottom = coeffs.iter().position(|c| !c.is_zero()).unwrap();
    let at_infinity = n - top;

    let tol = tol.as_f64();
    let mut finite: Vec<f64> = vec![0.0; bottom];
    for z in companion_roots(&coeffs[bottom..=top]) {
        let scale = 1f64.max(z.re.hypot(z.im));
        if z.im.abs() > tol * scale {
            return Err(Error::NonRealFactorization { re: z.re, im: z.im });
        }
        finite.push(z.re);
    }
    finite.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));

    let mut roots: Vec<(RootValue<T>, usize)> = Vec::new();
    let mut cluster: Vec<f64> = Vec::new();
    let flush = |cluster: &mut Vec<f64>, roots: &mut Vec<(RootValue<T>, usize)>| {
        if !cluster.is_empty() {
            let mean = cluster.iter().sum::<f64>() / cluster.len() as f64;
            roots.push((RootValue::Finite(T::lit(mean)), cluster.len()));
            cluster.clear();
        }
    };
    for r in finite {
        if let Some(&last) = cluster.last() {
            if (r - last).abs() > tol * 1f64.max(r.abs()).max(last.abs()) {
                flush(&mut cluster, &mut roots);
            }
        }
        cluster.push(r);
    }
    flush(&mut cluster, &mut roots);
    if at_infinity > 0 {
        roots.push((RootValue::Infinity, at_infinity));
    }
    Ok(RootStructure { roots })
}

pub fn root_structure<T: Scalar>(
    f: &MomentaPolynomial<T>,
    point: (usize, usize),
    tol: T,
) -> Result<RootStructure<T>> {
    let idx = match f.grid() {
        Some(g) if point.0 >= g.nx || point.1 >= g.ny => {
            return Err(Error::OutOfRange {
                i: point.0,
                j: point.1,
            })
        }
        Some(g) => g.index(point.0, point.1),
        None => 0,
    };
    form_root_structure(&f.coeff_values(idx), tol)
}

fn linear_power<T: Scalar>(lin: [T; 2], k: usize) -> Vec<T> {
    (0..k).fold(vec![T::one()], |acc, _| form_mul(&acc, &lin))
}

/// Substitutes `p1 = l1(q)`, `p2 = l2(q)` (linear forms in new momenta `q`)
/// into the binary form `coeffs`.
pub fn substitute_linear<T: Scalar>(coeffs: &[T], l1: [T; 2], l2: [T; 2]) -> Vec<T> {
    let n = coeffs.len() - 1;
    let mut out = vec![T::zero(); n + 1];
    for (m, &c) in coeffs.iter().enumerate() {
        if c.is_zero() {
            continue;
        }
        let term = form_mul(&linear_power(l1, n - m), &linear_power(l2, m));
        for (o, t) in out.iter_mut().zip(term) {
            *o += c * t;
        }
    }
    out
}

/// Coefficients `ã_1..ã_{N−1}` of the normal-form integral after the change
/// of momenta `p̃1 = p2 + g¹² p1`, `p̃2 = a_{N−1} p1`:
///
/// `f = p̃2 p̃1^(N−1) + Σ_k ã_k p̃2^(k+1) p̃1^(N−1−k)`.
///
/// `inner` holds `a_1..a_{N−1}`. Returns `None` when `a_{N−1}` vanishes.
pub fn semigeodesic_coefficients<T: Scalar>(inner: &[T], g12: T) -> Option<Vec<T>> {
    let n = inner.len() + 1;
    let lead = *inner.last()?;
    if lead.is_zero() || !lead.is_normal() {
        return None;
    }
    let mut full = vec![T::zero(); n + 1];
    full[1..n].copy_from_slice(inner);
    let inv = T::one() / lead;
    // p1 = p̃2 / a_{N−1},  p2 = p̃1 − g¹² p̃2 / a_{N−1}
    let c = substitute_linear(&full, [T::zero(), inv], [T::one(), -g12 * inv]);
    let out: Vec<T> = c[2..].to_vec();
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Inverse of [`semigeodesic_coefficients`]: expands
/// `p̃2 p̃1^(N−1) + Σ ã_k p̃2^(k+1) p̃1^(N−1−k)` back in `(p1, p2)` and returns
/// all `N + 1` coefficients `a_0..a_N`.
pub fn chebyshev_coefficients<T: Scalar>(tilde: &[T], g12: T, a_last: T) -> Vec<T> {
    let n = tilde.len() + 1;
    // coefficients in (p̃1, p̃2): c_0 = 0, c_1 = 1, c_{k+1} = ã_k
    let mut c = vec![T::zero(); n + 1];
    c[1] = T::one();
    c[2..].copy_from_slice(tilde);
    // p̃1 = g¹² p1 + p2, p̃2 = a_{N−1} p1
    substitute_linear(&c, [g12, T::one()], [a_last, T::zero()])
}

/// Fieldwise [`semigeodesic_coefficients`]; fails naming the first grid point
/// where `a_{N−1}` vanishes.
pub fn transform_to_semigeodesic<T: Scalar>(
    inner: &[Coeff<T>],
    g12: &Coeff<T>,
) -> Result<Vec<Coeff<T>>> {
    if inner.is_empty() {
        return Err(Error::Dimension("need at least a_1".into()));
    }
    let grid = common_grid(inner.iter().chain(std::iter::once(g12)))?;
    let count = grid.map_or(1, |g| g.len());
    let mut columns: Vec<Vec<T>> = vec![Vec::with_capacity(count); inner.len()];
    for idx in 0..count {
        let a: Vec<T> = inner.iter().map(|c| c.value(idx)).collect();
        let t = semigeodesic_coefficients(&a, g12.value(idx)).ok_or_else(|| {
            let (i, j) = grid.map_or((0, 0), |g| (idx % g.nx, idx / g.nx));
            Error::VanishingCoefficient { i, j }
        })?;
        for (col, v) in columns.iter_mut().zip(t) {
            col.push(v);
        }
    }
    match grid {
        None => Ok(columns.into_iter().map(|c| Coeff::Const(c[0])).collect()),
        Some(g) => columns
            .into_iter()
            .map(|c| ScalarField2D::new(g, c).map(Coeff::Field))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid1D;
    use proptest::prelude::*;

    fn grid(n: usize) -> Grid2D<f64> {
        Grid2D::new(
            Grid1D::closed(n, -1.0, 1.0).unwrap(),
            Grid1D::closed(n, -1.0, 1.0).unwrap(),
        )
    }

    #[test]
    fn constant_polynomial_commutes_with_flat_hamiltonian() {
        let f = MomentaPolynomial::constant(&[1.0, -2.0, 0.5, 3.0]).unwrap();
        let h = HamiltonianForm::riemannian(Coeff::Field(
            ScalarField2D::constant(grid(6), 0.0).unwrap(),
        ))
        .unwrap();
        let b = poisson_bracket(&f, &h).unwrap();
        assert_eq!(b.degree(), 4);
        assert!(b.max_abs_coeff() == 0.0);
    }

    #[test]
    fn linear_momentum_times_coordinate() {
        // f = x¹ p2, flat metric: {f, H} = f_x¹ H_p1 = p1 · p2
        let g = grid(8);
        let x1 = ScalarField2D::from_fn(g, |x, _| x).unwrap();
        let f = MomentaPolynomial::new(vec![Coeff::zero(), Coeff::Field(x1)]).unwrap();
        let h = HamiltonianForm::riemannian(0.0).unwrap();
        let b = poisson_bracket(&f, &h).unwrap();
        assert_eq!(b.degree(), 2);
        let expect = [0.0, 1.0, 0.0];
        for (c, e) in b.coeffs().iter().zip(expect) {
            match c {
                Coeff::Field(fc) => assert!(fc.values().iter().all(|v| (v - e).abs() < 1e-12)),
                Coeff::Const(v) => assert!((v - e).abs() < 1e-12),
            }
        }
    }

    #[test]
    fn hamiltonian_commutes_with_itself() {
        let g = grid(16);
        let g12 = ScalarField2D::from_fn(g, |x, y| 0.3 * (2.0 * x + y).sin()).unwrap();
        let h = HamiltonianForm::riemannian(g12).unwrap();
        let b = poisson_bracket(&h.as_polynomial(), &h).unwrap();
        assert!(b.max_abs_coeff() < 1e-14, "{}", b.max_abs_coeff());
    }

    /// f = 2(1 − g) p1 p2 (p1 + p2) with g = g(x¹ − x²): the linear integral
    /// p1 + p2 combined with H.
    fn killing_cubic(n: usize) -> (MomentaPolynomial<f64>, HamiltonianForm<f64>) {
        let g = grid(n);
        let gf = |x: f64, y: f64| 0.4 * (1.3 * (x - y)).sin();
        let g12 = ScalarField2D::from_fn(g, gf).unwrap();
        let a = ScalarField2D::from_fn(g, |x, y| 2.0 * (1.0 - gf(x, y))).unwrap();
        let f =
            MomentaPolynomial::normal_form(vec![Coeff::Field(a.clone()), Coeff::Field(a)]).unwrap();
        (f, HamiltonianForm::riemannian(g12).unwrap())
    }

    #[test]
    fn integrable_cubic_bracket_vanishes_to_discretization_accuracy() {
        let err = |n| {
            let (f, h) = killing_cubic(n);
            poisson_bracket(&f, &h).unwrap().max_abs_coeff()
        };
        let (e1, e2) = (err(33), err(65));
        assert!(e1 < 5e-2 && e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn bracket_rejects_grid_mismatch() {
        let f = MomentaPolynomial::new(vec![
            Coeff::Field(ScalarField2D::constant(grid(6), 1.0).unwrap()),
            Coeff::zero(),
        ])
        .unwrap();
        let h = HamiltonianForm::riemannian(Coeff::Field(
            ScalarField2D::constant(grid(7), 0.0).unwrap(),
        ))
        .unwrap();
        assert!(matches!(poisson_bracket(&f, &h), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn evaluation_examples() {
        let f = MomentaPolynomial::constant(&[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(f.evaluate((0, 0), 2.0, 3.0).unwrap(), 6.0);
        let f = MomentaPolynomial::constant(&[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(f.evaluate((0, 0), 1.0, 1.0).unwrap(), 2.0);
        let a1 = ScalarField2D::constant(grid(5), 0.5).unwrap();
        let f = MomentaPolynomial::new(vec![
            Coeff::zero(),
            Coeff::Field(a1),
            Coeff::zero(),
            Coeff::zero(),
        ])
        .unwrap();
        assert_eq!(f.evaluate((2, 3), 2.0, 1.0).unwrap(), 2.0);
        assert!(matches!(
            f.evaluate((5, 0), 1.0, 1.0),
            Err(Error::OutOfRange { .. })
        ));
    }

    fn finite(r: &RootValue<f64>) -> f64 {
        match r {
            RootValue::Finite(v) => *v,
            RootValue::Infinity => f64::INFINITY,
        }
    }

    #[test]
    fn root_structure_examples() {
        let tol = ROOT_MERGE_TOL;
        let s = form_root_structure(&[0.0, 1.0, 0.0], tol).unwrap();
        assert_eq!(s.roots, vec![(RootValue::Finite(0.0), 1), (RootValue::Infinity, 1)]);

        let s = form_root_structure(&[0.0, 1.0, 0.0, 0.0], tol).unwrap();
        assert_eq!(s.roots, vec![(RootValue::Finite(0.0), 1), (RootValue::Infinity, 2)]);

        // p1 p2 (p1 + p2): s (1 + s)
        let s = form_root_structure(&[0.0, 1.0, 1.0, 0.0], tol).unwrap();
        let vals: Vec<(f64, usize)> = s.roots.iter().map(|(r, m)| (finite(r), *m)).collect();
        assert_eq!(vals.len(), 3);
        assert!((vals[0].0 + 1.0).abs() < 1e-14 && vals[0].1 == 1);
        assert!(vals[1].0.abs() < 1e-14 && vals[1].1 == 1);
        assert!(vals[2].0.is_infinite() && vals[2].1 == 1);
    }

    #[test]
    fn complex_roots_and_zero_polynomial_are_reported() {
        // p1² + p2²
        assert!(matches!(
            form_root_structure(&[1.0, 0.0, 1.0], ROOT_MERGE_TOL),
            Err(Error::NonRealFactorization { .. })
        ));
        assert!(matches!(
            form_root_structure(&[0.0, 0.0, 0.0], ROOT_MERGE_TOL),
            Err(Error::ZeroPolynomial)
        ));
    }

    #[test]
    fn close_roots_merge_under_tolerance() {
        // (s − 1)(s − 1 − 1e−6)
        let d = 1e-6;
        let c = [1.0 + d, -(2.0 + d), 1.0];
        assert_eq!(form_root_structure(&c, 1e-9).unwrap().distinct(), 2);
        let merged = form_root_structure(&c, 1e-4).unwrap();
        assert_eq!(merged.roots.len(), 1);
        assert_eq!(merged.roots[0].1, 2);
    }

    #[test]
    fn transform_examples() {
        // N = 2: ã_1 = −g/a1
        let t = semigeodesic_coefficients::<f64>(&[2.0], 0.3).unwrap();
        assert!((t[0] + 0.15).abs() < 1e-15);
        // N = 3, g = 0, a1 = 0: f = a2 p1 p2² = p̃2 p̃1², so ã ≡ 0
        let t = semigeodesic_coefficients::<f64>(&[0.0, 1.7], 0.0).unwrap();
        assert!(t.iter().all(|v| v.abs() < 1e-15));
        assert!(semigeodesic_coefficients(&[1.0, 0.0], 0.2).is_none());
    }

    #[test]
    fn fieldwise_transform_names_vanishing_point() {
        let g = grid(5);
        let a2 = ScalarField2D::from_fn(g, |x, y| if x > 0.9 && y > 0.9 { 0.0 } else { 1.0 })
            .unwrap();
        let err = transform_to_semigeodesic(&[Coeff::Const(1.0), Coeff::Field(a2)], &Coeff::zero())
            .unwrap_err();
        assert!(matches!(err, Error::VanishingCoefficient { i: 4, j: 4 }));
    }

    proptest! {
        #[test]
        fn transform_preserves_values(
            n in 2usize..=6,
            raw in prop::collection::vec(-2.0f64..2.0, 6),
            g in -0.95f64..0.95,
            p1 in -2.0f64..2.0, p2 in -2.0f64..2.0,
        ) {
            let mut inner: Vec<f64> = raw[..n - 1].to_vec();
            let last = inner.last_mut().unwrap();
            if last.abs() < 0.1 { *last += 0.5; }
            let a_last = *inner.last().unwrap();
            let tilde = semigeodesic_coefficients(&inner, g).unwrap();
            let mut full = vec![0.0; n + 1];
            full[1..n].copy_from_slice(&inner);
            let f = eval_form(&full, p1, p2);
            let (q1, q2) = (p2 + g * p1, a_last * p1);
            let mut c = vec![0.0; n + 1];
            c[1] = 1.0;
            c[2..].copy_from_slice(&tilde);
            let ft = eval_form(&c, q1, q2);
            prop_assert!((f - ft).abs() <= 1e-10 * (1.0 + f.abs()));
            // and back
            let back = chebyshev_coefficients(&tilde, g, a_last);
            for (x, y) in back.iter().zip(&full) {
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn multiplicities_sum_to_degree_and_merge_monotonically(
            roots in prop::collection::vec(-3.0f64..3.0, 1..5),
            zeros in 0usize..2, infinities in 0usize..3,
            tol_exp in -10.0f64..-1.0,
        ) {
            // build Π(s − r) · s^zeros as a degree-N form with `infinities` trailing zeros
            let mut c = vec![1.0];
            for r in &roots { c = form_mul(&c, &[-r, 1.0]); }
            let mut coeffs = vec![0.0; zeros];
            coeffs.extend(c);
            coeffs.extend(std::iter::repeat(0.0).take(infinities));
            let n = coeffs.len() - 1;
            let tol = 10f64.powf(tol_exp);
            if let Ok(s) = form_root_structure(&coeffs, tol) {
                prop_assert_eq!(s.total_multiplicity(), n);
                let keys: Vec<f64> = s.roots.iter().map(|(r, _)| finite(r)).collect();
                prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));
                if let Ok(bigger) = form_root_structure(&coeffs, tol * 10.0) {
                    prop_assert!(bigger.distinct() <= s.distinct());
                }
            }
        }
    }
}
