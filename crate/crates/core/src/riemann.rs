//! Riemann surface of the evolutionary system: branch points, Riemann
//! invariants, characteristic velocities, moments and the semi-Hamiltonian
//! check.
//!
//! With `A = a^{-1/2}` the surface is
//! `λ̃(q) = A (1+q²)^{-N/2} Π_m (q − b_m)` and its branch points are the zeros
//! of `λ̃_q`, i.e. of the monic degree-`N` polynomial
//! `Q(q) = N q P(q) − (1+q²) P'(q)` with `P = Π_m (q − b_m)`.

use crate::error::{Error, Result};
use crate::fields::{derivative_nonuniform, partial1d, Grid1D, ScalarField1D};
use crate::roots::{companion_roots, horner, polish};
use crate::scalar::Scalar;

/// Roots closer than this are reported as a collision.
pub const COLLISION_TOL: f64 = 1e-10;

/// State `(a, b_1..b_{N−1})` of the evolutionary system on a 1-D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroSnapshot<T> {
    a: ScalarField1D<T>,
    b: Vec<ScalarField1D<T>>,
}

impl<T: Scalar> HydroSnapshot<T> {
    pub fn new(a: ScalarField1D<T>, b: Vec<ScalarField1D<T>>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::Dimension("at least one root field b_1 is required".into()));
        }
        for (m, f) in b.iter().enumerate() {
            if !f.grid.same_as(&a.grid) {
                return Err(Error::GridMismatch(format!("b_{} and a", m + 1)));
            }
        }
        if let Some((index, &value)) = a.values().iter().enumerate().find(|(_, v)| !(**v > T::zero())) {
            return Err(Error::Positivity {
                index,
                value: value.as_f64(),
            });
        }
        Ok(Self { a, b })
    }

    /// Degree `N` of the underlying integral (`b` holds `N − 1` fields).
    pub fn degree(&self) -> usize {
        self.b.len() + 1
    }

    pub fn grid(&self) -> Grid1D<T> {
        self.a.grid
    }

    pub fn a(&self) -> &ScalarField1D<T> {
        &self.a
    }

    pub fn b(&self) -> &[ScalarField1D<T>] {
        &self.b
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// `(a, b)` at grid index `i`.
    pub fn point(&self, i: usize) -> (T, Vec<T>) {
        (self.a.values()[i], self.b.iter().map(|f| f.values()[i]).collect())
    }

    pub fn into_parts(self) -> (ScalarField1D<T>, Vec<ScalarField1D<T>>) {
        (self.a, self.b)
    }
}

/// `λ̃(q) = a^{-1/2} (1+q²)^{-N/2} Π (q − b_m)` with `N = b.len() + 1`.
pub fn lambda_eval<T: Scalar>(q: T, a: T, b: &[T]) -> T {
    let n = T::from_usize_lossy(b.len() + 1);
    let p: T = b.iter().fold(T::one(), |acc, &bm| acc * (q - bm));
    a.sqrt().recip() * (T::one() + q * q).powf(-n / T::lit(2.0)) * p
}

/// Analytic `∂λ̃/∂q = −a^{-1/2} (1+q²)^{-N/2-1} Q(q)`.
pub fn lambda_q<T: Scalar>(q: T, a: T, b: &[T]) -> T {
    let n = T::from_usize_lossy(b.len() + 1);
    let (qv, _) = horner(&branch_polynomial(b), q);
    -a.sqrt().recip() * (T::one() + q * q).powf(-n / T::lit(2.0) - T::one()) * qv
}

/// Ascending coefficients of `Q(q) = N q P − (1+q²) P'`.
pub fn branch_polynomial<T: Scalar>(b: &[T]) -> Vec<T> {
    let n = b.len() + 1;
    let mut p = vec![T::one()];
    for &bm in b {
        let mut next = vec![T::zero(); p.len() + 1];
        for (k, &c) in p.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= bm * c;
        }
        p = next;
    }
    let dp: Vec<T> = p
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| T::from_usize_lossy(k) * c)
        .collect();
    let mut out = vec![T::zero(); n + 1];
    let nn = T::from_usize_lossy(n);
    for (k, &c) in p.iter().enumerate() {
        out[k + 1] += nn * c;
    }
    for (k, &c) in dp.iter().enumerate() {
        out[k] -= c;
        out[k + 2] -= c;
    }
    out
}

/// Ascending branch points `q_1 < … < q_N`. On failure returns the reason.
pub fn branch_points<T: Scalar>(b: &[T]) -> std::result::Result<Vec<T>, String> {
    if let Some(m) = b.iter().position(|v| !v.is_finite()) {
        return Err(format!("b_{} is not finite", m + 1));
    }
    let coeffs = branch_polynomial(b);
    let scale = 1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.as_f64().abs()));
    let mut roots = Vec::with_capacity(coeffs.len() - 1);
    for z in companion_roots(&coeffs) {
        if z.im.abs() > 1e-8 * scale {
            return Err(format!("complex branch point {} ± {}i", z.re, z.im.abs()));
        }
        roots.push(polish(&coeffs, T::lit(z.re)));
    }
    roots.sort_by(|x, y| x.partial_cmp(y).expect("finite roots"));
    for w in roots.windows(2) {
        if (w[1] - w[0]).as_f64() < COLLISION_TOL * scale {
            return Err(format!("branch points {} and {} collide", w[0], w[1]));
        }
    }
    Ok(roots)
}

/// Branch points, invariants `r_k = λ̃(q_k)` and velocities `μ_k = a^{-1/2} q_k`
/// at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct RiemannPoint<T> {
    pub q: Vec<T>,
    pub r: Vec<T>,
    pub mu: Vec<T>,
}

pub fn riemann_point<T: Scalar>(a: T, b: &[T]) -> std::result::Result<RiemannPoint<T>, String> {
    if !(a > T::zero()) {
        return Err(format!("a = {a} is not positive"));
    }
    let q = branch_points(b)?;
    let inv_sqrt_a = a.sqrt().recip();
    let r = q.iter().map(|&qk| lambda_eval(qk, a, b)).collect();
    let mu = q.iter().map(|&qk| inv_sqrt_a * qk).collect();
    Ok(RiemannPoint { q, r, mu })
}

/// Fieldwise Riemann data; each vector holds one field per family `k = 1..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiemannData<T> {
    pub q: Vec<ScalarField1D<T>>,
    pub r: Vec<ScalarField1D<T>>,
    pub mu: Vec<ScalarField1D<T>>,
}

pub fn invariants_and_velocities<T: Scalar>(snap: &HydroSnapshot<T>) -> Result<RiemannData<T>> {
    let n = snap.degree();
    let len = snap.len();
    let mut q = vec![Vec::with_capacity(len); n];
    let mut r = vec![Vec::with_capacity(len); n];
    let mut mu = vec![Vec::with_capacity(len); n];
    for i in 0..len {
        let (a, b) = snap.point(i);
        let pt = riemann_point(a, &b)
            .map_err(|detail| Error::DegenerateBranchPoints { index: i, detail })?;
        for k in 0..n {
            q[k].push(pt.q[k]);
            r[k].push(pt.r[k]);
            mu[k].push(pt.mu[k]);
        }
    }
    let grid = snap.grid();
    let wrap = |v: Vec<Vec<T>>| -> Result<Vec<ScalarField1D<T>>> {
        v.into_iter().map(|vals| ScalarField1D::new(grid, vals)).collect()
    };
    Ok(RiemannData {
        q: wrap(q)?,
        r: wrap(r)?,
        mu: wrap(mu)?,
    })
}

/// `B^k = (1/(k+1)) Σ_m b_m^{k+1}` for `k = 0..=kmax`, summed over the `N − 1`
/// roots.
pub fn moments<T: Scalar>(b: &[T], kmax: usize) -> Vec<T> {
    let mut powers: Vec<T> = b.to_vec();
    let mut out = Vec::with_capacity(kmax + 1);
    for k in 0..=kmax {
        let s: T = powers.iter().copied().sum();
        out.push(s / T::from_usize_lossy(k + 1));
        for (p, &bm) in powers.iter_mut().zip(b) {
            *p *= bm;
        }
    }
    out
}

/// `p̃ = q / √(1+q²)`.
pub fn generating_density<T: Scalar>(q: T) -> T {
    q / (T::one() + q * q).sqrt()
}

/// `q = p̃ / √(1−p̃²)` for `|p̃| < 1`.
///
/// The inverse amplifies a perturbation of `p̃` by `(1+q²)^{3/2}`, so a
/// roundtrip through an `f64` value of `p̃` is exact only up to about
/// `(1+q²)^{3/2}` half-ulps of `p̃`.
pub fn generating_density_inverse<T: Scalar>(p: T) -> Result<T> {
    if !(p.abs() < T::one()) {
        return Err(Error::Domain(format!("|p̃| = {} must be < 1", p.abs())));
    }
    Ok(p / ((T::one() - p) * (T::one() + p)).sqrt())
}

/// Residual of `λ̃_y − a^{-1/2} q λ̃_x − (1+q²) λ̃_q (a^{-1/2})_x` at fixed `q`
/// on every layer of a series sampled at strictly increasing `ys`.
pub fn liouville_residual<T: Scalar>(
    ys: &[T],
    snaps: &[HydroSnapshot<T>],
    q: T,
) -> Result<Vec<ScalarField1D<T>>> {
    check_series(ys, snaps)?;
    let grid = snaps[0].grid();
    let lam: Vec<Vec<T>> = snaps
        .iter()
        .map(|s| {
            (0..s.len())
                .map(|i| {
                    let (a, b) = s.point(i);
                    lambda_eval(q, a, &b)
                })
                .collect()
        })
        .collect();
    let one_q2 = T::one() + q * q;
    snaps
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let inv = s.a().map(|a| a.sqrt().recip())?;
            let inv_x = partial1d(&inv);
            let lam_x = partial1d(&ScalarField1D::new(grid, lam[j].clone())?);
            let vals = (0..s.len())
                .map(|i| {
                    let start = j.saturating_sub(1).min(ys.len() - 3);
                    let column = [lam[start][i], lam[start + 1][i], lam[start + 2][i]];
                    let lam_y = derivative_nonuniform(&ys[start..start + 3], &column, j - start);
                    let (a, b) = s.point(i);
                    lam_y
                        - inv.values()[i] * q * lam_x.values()[i]
                        - one_q2 * lambda_q(q, a, &b) * inv_x.values()[i]
                })
                .collect();
            ScalarField1D::new(grid, vals)
        })
        .collect()
}

/// Validates a snapshot series: at least three layers, strictly increasing
/// `ys`, one grid and one degree throughout.
pub fn check_series<T: Scalar>(ys: &[T], snaps: &[HydroSnapshot<T>]) -> Result<()> {
    if ys.len() != snaps.len() {
        return Err(Error::Dimension(format!(
            "{} y-values for {} snapshots",
            ys.len(),
            snaps.len()
        )));
    }
    if snaps.len() < 3 {
        return Err(Error::Dimension("a series needs at least three layers".into()));
    }
    if ys.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Dimension("y-values must be strictly increasing".into()));
    }
    let (g, n) = (snaps[0].grid(), snaps[0].degree());
    if snaps.iter().any(|s| !s.grid().same_as(&g) || s.degree() != n) {
        return Err(Error::GridMismatch("snapshots differ in grid or degree".into()));
    }
    Ok(())
}

/// Characteristic velocities as functions of the Riemann invariants.
pub trait VelocityClosure<T: Scalar> {
    fn degree(&self) -> usize;
    fn velocities(&self, r: &[T]) -> Result<Vec<T>>;
}

/// Explicit closure of the `N = 2` system: `μ_1 = −2 r²`, `μ_2 = −2 r¹`.
#[derive(Debug, Clone, Copy, Default)]
pub struct TwoComponent;

impl<T: Scalar> VelocityClosure<T> for TwoComponent {
    fn degree(&self) -> usize {
        2
    }

    fn velocities(&self, r: &[T]) -> Result<Vec<T>> {
        if r.len() != 2 {
            return Err(Error::Dimension(format!("expected 2 invariants, got {}", r.len())));
        }
        let m2 = T::lit(-2.0);
        Ok(vec![m2 * r[1], m2 * r[0]])
    }
}

/// General-`N` closure: inverts `r ↦ (a, b)` by Newton's method started from a
/// reference state, then returns `μ_k = a^{-1/2} q_k`.
#[derive(Debug, Clone)]
pub struct ImplicitClosure<T> {
    pub a: T,
    pub b: Vec<T>,
}

impl<T: Scalar> ImplicitClosure<T> {
    pub fn new(a: T, b: Vec<T>) -> Result<Self> {
        riemann_point(a, &b).map_err(|detail| Error::DegenerateBranchPoints { index: 0, detail })?;
        Ok(Self { a, b })
    }

    /// State `(a, b)` with the given invariants.
    ///
    /// Uses `∂r_k/∂A = r_k/A` and `∂r_k/∂b_m = −r_k/(q_k − b_m)` (`A = a^{-1/2}`),
    /// valid because `λ̃_q(q_k) = 0`.
    pub fn invert(&self, target: &[T]) -> Result<(T, Vec<T>)> {
        let n = self.b.len() + 1;
        if target.len() != n {
            return Err(Error::Dimension(format!("expected {n} invariants, got {}", target.len())));
        }
        let mut big_a = self.a.sqrt().recip().as_f64();
        let mut b: Vec<f64> = self.b.iter().map(|v| v.as_f64()).collect();
        let tgt: Vec<f64> = target.iter().map(|v| v.as_f64()).collect();
        let tscale = tgt.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let degenerate = |detail| Error::DegenerateBranchPoints { index: 0, detail };
        for _ in 0..60 {
            let a = 1.0 / (big_a * big_a);
            let pt = riemann_point(a, &b).map_err(degenerate)?;
            let f: Vec<f64> = pt.r.iter().zip(&tgt).map(|(r, t)| r - t).collect();
            let err = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if err <= 1e-14 * tscale {
                return Ok((T::lit(a), b.into_iter().map(T::lit).collect()));
            }
            let jac = nalgebra::DMatrix::from_fn(n, n, |k, c| {
                if c == 0 {
                    pt.r[k] / big_a
                } else {
                    -pt.r[k] / (pt.q[k] - b[c - 1])
                }
            });
            let rhs = nalgebra::DVector::from_vec(f);
            let step = jac
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Domain("singular Jacobian while inverting invariants".into()))?;
            // damp steps that would flip the sign of A
            let mut t = 1.0;
            while big_a - t * step[0] <= 0.0 {
                t *= 0.5;
            }
            big_a -= t * step[0];
            for m in 0..n - 1 {
                b[m] -= t * step[m + 1];
            }
        }
        Err(Error::Domain("Newton inversion of the invariants did not converge".into()))
    }
}

impl<T: Scalar> VelocityClosure<T> for ImplicitClosure<T> {
    fn degree(&self) -> usize {
        self.b.len() + 1
    }

    fn velocities(&self, r: &[T]) -> Result<Vec<T>> {
        let (a, b) = self.invert(r)?;
        riemann_point(a, &b)
            .map(|p| p.mu)
            .map_err(|detail| Error::DegenerateBranchPoints { index: 0, detail })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SemiHamiltonian<T> {
    /// `N = 2`: the condition involves three distinct indices and is empty.
    Vacuous,
    /// Largest defect of `∂_j(∂_i μ_k/(μ_i−μ_k)) = ∂_i(∂_j μ_k/(μ_j−μ_k))`.
    Defect(T),
}

/// Symmetry defect at `r0`, by nested central differences of step `h` in
/// `r`-space.
pub fn semi_hamiltonian_residual<T: Scalar, C: VelocityClosure<T> + ?Sized>(
    closure: &C,
    r0: &[T],
    h: T,
) -> Result<SemiHamiltonian<T>> {
    let n = closure.degree();
    if r0.len() != n {
        return Err(Error::Dimension(format!("expected {n} invariants, got {}", r0.len())));
    }
    if n < 3 {
        return Ok(SemiHamiltonian::Vacuous);
    }
    let shifted = |r: &[T], d: usize, s: T| -> Vec<T> {
        let mut v = r.to_vec();
        v[d] += s;
        v
    };
    // G_{ik}(r) = ∂_i μ_k / (μ_i − μ_k)
    let g = |r: &[T], i: usize, k: usize| -> Result<T> {
        let mu = closure.velocities(r)?;
        let gap = mu[i] - mu[k];
        let scale = mu[i].abs().max(mu[k].abs()).max(T::one());
        if gap.abs() <= T::lit(1e-12) * scale {
            return Err(Error::CoincidentVelocities(format!("μ_{} = μ_{}", i + 1, k + 1)));
        }
        let plus = closure.velocities(&shifted(r, i, h))?;
        let minus = closure.velocities(&shifted(r, i, -h))?;
        Ok((plus[k] - minus[k]) / (h + h) / gap)
    };
    let mut worst = T::zero();
    for k in 0..n {
        for i in 0..n {
            for j in (i + 1)..n {
                if i == k || j == k {
                    continue;
                }
                let dj_gik = (g(&shifted(r0, j, h), i, k)? - g(&shifted(r0, j, -h), i, k)?) / (h + h);
                let di_gjk = (g(&shifted(r0, i, h), j, k)? - g(&shifted(r0, i, -h), j, k)?) / (h + h);
                worst = worst.max((dj_gik - di_gjk).abs());
            }
        }
    }
    Ok(SemiHamiltonian::Defect(worst))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lambda_examples() {
        assert!((lambda_eval(1.0f64, 1.0, &[0.0]) - 0.5).abs() < 1e-15);
        assert!((lambda_eval(1.0f64, 4.0, &[0.0]) - 0.25).abs() < 1e-15);
        assert_eq!(lambda_eval(0.7f64, 2.0, &[0.3, 0.7]), 0.0);
    }

    #[test]
    fn branch_point_examples() {
        let q = branch_points(&[0.0f64]).unwrap();
        assert!((q[0] + 1.0).abs() < 1e-14 && (q[1] - 1.0).abs() < 1e-14);
        let q = branch_points(&[0.0f64, 0.0]).unwrap();
        let s2 = 2f64.sqrt();
        for (v, e) in q.iter().zip([-s2, 0.0, s2]) {
            assert!((v - e).abs() < 1e-13, "{q:?}");
        }
        let b = 1.7f64;
        let q = branch_points(&[b]).unwrap();
        let s = (b * b + 1.0).sqrt();
        assert!((q[0] - (b - s)).abs() < 1e-13 && (q[1] - (b + s)).abs() < 1e-13);
        assert!(branch_points(&[f64::NAN]).is_err());
    }

    #[test]
    fn n2_point_values() {
        let pt = riemann_point(1.0f64, &[0.0]).unwrap();
        // ascending q: family 1 is q = −1
        assert!((pt.r[0] + 0.5).abs() < 1e-15 && (pt.r[1] - 0.5).abs() < 1e-15);
        assert!((pt.mu[0] + 1.0).abs() < 1e-15 && (pt.mu[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn moments_examples() {
        assert_eq!(moments(&[0.0f64, 0.0], 3), vec![0.0; 4]);
        let m = moments(&[2.0f64], 2);
        assert!((m[0] - 2.0).abs() < 1e-15 && (m[1] - 2.0).abs() < 1e-15 && (m[2] - 8.0 / 3.0).abs() < 1e-15);
        assert_eq!(moments(&[1.0f64, -1.0], 2), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn density_examples() {
        assert_eq!(generating_density(0.0f64), 0.0);
        let p = generating_density(1.0f64);
        assert!((p - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((generating_density_inverse(p).unwrap() - 1.0).abs() < 1e-14);
        assert!(generating_density_inverse(1.0f64).is_err());
        assert!(generating_density_inverse(-1.5f64).is_err());
    }

    #[test]
    fn snapshot_validation() {
        let g = Grid1D::<f64>::periodic(8, 0.0, 1.0).unwrap();
        let one = ScalarField1D::constant(g, 1.0).unwrap();
        let neg = ScalarField1D::from_fn(g, |x| x - 0.5).unwrap();
        assert!(matches!(
            HydroSnapshot::new(neg, vec![one.clone()]),
            Err(Error::Positivity { index: 0, .. })
        ));
        assert!(HydroSnapshot::new(one.clone(), vec![]).is_err());
        let other = ScalarField1D::constant(Grid1D::periodic(9, 0.0, 1.0).unwrap(), 0.0).unwrap();
        assert!(HydroSnapshot::new(one, vec![other]).is_err());
    }

    #[test]
    fn two_component_closure_matches_invariants() {
        for &(a, b) in &[(1.0, 0.0), (0.3, 1.2), (5.0, -2.0)] {
            let pt = riemann_point(a, &[b]).unwrap();
            let mu = VelocityClosure::<f64>::velocities(&TwoComponent, &pt.r).unwrap();
            for k in 0..2 {
                assert!((mu[k] - pt.mu[k]).abs() < 1e-12);
            }
            let imp = ImplicitClosure::new(1.0f64, vec![0.0]).unwrap();
            let mu2 = imp.velocities(&pt.r).unwrap();
            for k in 0..2 {
                assert!((mu2[k] - pt.mu[k]).abs() < 1e-10, "{mu2:?} vs {:?}", pt.mu);
            }
        }
    }

    #[test]
    fn semi_hamiltonian_vacuous_for_n2() {
        assert_eq!(
            semi_hamiltonian_residual(&TwoComponent, &[0.5, -0.5], 1e-3).unwrap(),
            SemiHamiltonian::Vacuous
        );
    }

    struct Perturbed(ImplicitClosure<f64>);

    impl VelocityClosure<f64> for Perturbed {
        fn degree(&self) -> usize {
            3
        }
        fn velocities(&self, r: &[f64]) -> Result<Vec<f64>> {
            let mut mu = self.0.velocities(r)?;
            mu[0] += 0.3 * r[1] * r[2];
            Ok(mu)
        }
    }

    #[test]
    fn semi_hamiltonian_defect_converges_for_n3() {
        let (a, b) = (1.3, vec![0.4, -0.6]);
        let closure = ImplicitClosure::new(a, b.clone()).unwrap();
        let r0 = riemann_point(a, &b).unwrap().r;
        let d = |h: f64| match semi_hamiltonian_residual(&closure, &r0, h).unwrap() {
            SemiHamiltonian::Defect(d) => d,
            SemiHamiltonian::Vacuous => unreachable!(),
        };
        let (d1, d2) = (d(4e-3), d(2e-3));
        assert!(d2 < 1e-4, "{d1} {d2}");
        assert!(d1 / d2 > 3.0, "{d1} {d2}");
        let bad = Perturbed(closure);
        let dp = |h: f64| match semi_hamiltonian_residual(&bad, &r0, h).unwrap() {
            SemiHamiltonian::Defect(d) => d,
            SemiHamiltonian::Vacuous => unreachable!(),
        };
        assert!(dp(2e-3) > 1e-2 && dp(1e-3) > 1e-2);
    }

    #[test]
    fn liouville_stationary_is_zero() {
        let g = Grid1D::periodic(16, 0.0, 1.0).unwrap();
        let s = HydroSnapshot::new(
            ScalarField1D::constant(g, 2.0).unwrap(),
            vec![ScalarField1D::constant(g, 0.3).unwrap()],
        )
        .unwrap();
        let res = liouville_residual(&[0.0, 0.1, 0.3], &[s.clone(), s.clone(), s], 0.7).unwrap();
        assert!(res.iter().all(|r| r.max_abs() < 1e-13));
    }

    proptest! {
        #[test]
        fn n2_closed_forms(a in 0.1f64..10.0, b in -5.0f64..5.0) {
            let pt = riemann_point(a, &[b]).unwrap();
            let s = (b * b + 1.0).sqrt();
            let big_a = a.powf(-0.5);
            // ascending order: q_1 = b − s, q_2 = b + s
            let r_plus = 0.5 * big_a / (b + s);
            let r_minus = 0.5 * big_a / (b - s);
            prop_assert!((pt.r[1] - r_plus).abs() < 1e-12);
            prop_assert!((pt.r[0] - r_minus).abs() < 1e-12);
            prop_assert!((pt.mu[1] - big_a * (b + s)).abs() < 1e-12 * (1.0 + (b + s).abs()));
            prop_assert!((pt.mu[0] - big_a * (b - s)).abs() < 1e-12);
        }

        #[test]
        fn scaling_law(c in 0.2f64..5.0, a in 0.1f64..10.0, b1 in -3.0f64..3.0, b2 in -3.0f64..3.0, q in -4.0f64..4.0) {
            let b = [b1, b2];
            let l = lambda_eval(q, a, &b);
            prop_assert!((lambda_eval(q, c * c * a, &b) - l / c).abs() < 1e-12 * (1.0 + l.abs()));
            let p1 = riemann_point(a, &b).unwrap();
            let p2 = riemann_point(c * c * a, &b).unwrap();
            for k in 0..3 {
                prop_assert_eq!(p1.q[k], p2.q[k]);
                prop_assert!((p2.mu[k] - p1.mu[k] / c).abs() < 1e-12 * (1.0 + p1.mu[k].abs()));
            }
        }

        #[test]
        fn lambda_q_vanishes_at_branch_points(a in 0.1f64..10.0, b in proptest::collection::vec(-3.0f64..3.0, 1..6)) {
            let pt = riemann_point(a, &b).unwrap();
            for (k, &qk) in pt.q.iter().enumerate() {
                prop_assert!(lambda_q(qk, a, &b).abs() < 1e-9);
                prop_assert_eq!(pt.r[k], lambda_eval(qk, a, &b));
            }
            prop_assert!(pt.q.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn density_roundtrip(q in -10.0f64..10.0) {
            let back = generating_density_inverse(generating_density(q)).unwrap();
            let cond = (1.0 + q * q).powf(1.5);
            prop_assert!((back - q).abs() <= 2.0 * f64::EPSILON * cond);
            if q.abs() <= 3.0 {
                prop_assert!((back - q).abs() < 1e-14);
            }
        }
    }
}
