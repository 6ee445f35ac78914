//! Reciprocal transformations between the Chebyshev-type chart `(x¹, x²)`
//! and the semi-geodesic chart `(x, y)`:
//!
//! ```text
//! dy  = dx¹/a_{N−1} − g¹² dx²/a_{N−1},   dx = dx²
//! dx¹ = g¹² dx + a_{N−1} dy,             dx² = dx
//! ```
//!
//! Data in the `(x, y)` chart lives in [`LayeredField`]s: a uniform `x` grid
//! and strictly increasing, possibly non-uniform `y` layers.
//!
//! Orientation: with `h_k = b_k/√(1+b_k²)` and `a_{N−1} = a^{-1/2}/√(1+b_k²)`
//! a solution of the evolutionary system satisfies `∂_y h_k = −∂_x a_{N−1}`
//! in its evolution variable, while the chart requires `∂_y g¹² = +∂_x a_{N−1}`.
//! The chart coordinate is therefore `y = −y_evolution`; [`chart_series`]
//! performs the flip.

use crate::error::{Error, Result};
use crate::fields::{
    derivative_nonuniform, derivative_samples, partial, Axis, Grid1D, Grid2D, ScalarField1D, ScalarField2D,
};
use crate::riemann::{check_series, HydroSnapshot};
use crate::scalar::Scalar;

/// Samples on a uniform `x` grid at strictly increasing `y` layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredField<T> {
    pub grid: Grid1D<T>,
    ys: Vec<T>,
    rows: Vec<Vec<T>>,
}

impl<T: Scalar> LayeredField<T> {
    pub fn new(grid: Grid1D<T>, ys: Vec<T>, rows: Vec<Vec<T>>) -> Result<Self> {
        if ys.len() != rows.len() {
            return Err(Error::Dimension(format!("{} layers for {} y-values", rows.len(), ys.len())));
        }
        if ys.len() < 3 {
            return Err(Error::Dimension("a layered field needs at least three layers".into()));
        }
        if ys.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Dimension("y-values must be strictly increasing".into()));
        }
        for (j, r) in rows.iter().enumerate() {
            if r.len() != grid.nx {
                return Err(Error::Dimension(format!("layer {j} has {} values, expected {}", r.len(), grid.nx)));
            }
            if let Some(i) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index: j * grid.nx + i });
            }
        }
        Ok(Self { grid, ys, rows })
    }

    pub fn from_fn(grid: Grid1D<T>, ys: Vec<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        let rows = ys
            .iter()
            .map(|&y| (0..grid.nx).map(|i| f(grid.coord(i), y)).collect())
            .collect();
        Self::new(grid, ys, rows)
    }

    /// Uniform field with axis 1 as `x` and axis 2 as `y`.
    pub fn from_field2d(f: &ScalarField2D<T>) -> Result<Self> {
        let g = f.grid;
        let ys = (0..g.ny).map(|j| g.y0 + T::from_usize_lossy(j) * g.dy).collect();
        let rows = (0..g.ny).map(|j| f.row(j).to_vec()).collect();
        Self::new(g.axis(Axis::X1)?, ys, rows)
    }

    pub fn ys(&self) -> &[T] {
        &self.ys
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn layers(&self) -> usize {
        self.ys.len()
    }

    pub fn at(&self, j: usize, i: usize) -> T {
        self.rows[j][i]
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.grid.same_as(&other.grid) && self.ys == other.ys
    }

    fn require_same_layout(&self, other: &Self) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch("layered fields differ in x grid or y layers".into()))
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        let rows = self.rows.iter().map(|r| r.iter().map(|&v| f(v)).collect()).collect();
        Self::new(self.grid, self.ys.clone(), rows)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.require_same_layout(other)?;
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
            .collect();
        Self::new(self.grid, self.ys.clone(), rows)
    }

    pub fn max_abs(&self) -> T {
        crate::scalar::max_abs(self.rows.iter().flatten().copied())
    }

    pub fn min(&self) -> T {
        self.rows.iter().flatten().fold(T::infinity(), |m, &v| m.min(v))
    }

    pub fn max(&self) -> T {
        self.rows.iter().flatten().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    pub fn d_x(&self) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|r| derivative_samples(r, self.grid.dx, self.grid.periodic))
            .collect();
        Self {
            grid: self.grid,
            ys: self.ys.clone(),
            rows,
        }
    }

    pub fn d_y(&self) -> Self {
        let n = self.ys.len();
        let rows = (0..n)
            .map(|j| {
                let s = j.saturating_sub(1).min(n - 3);
                (0..self.grid.nx)
                    .map(|i| {
                        let v = [self.rows[s][i], self.rows[s + 1][i], self.rows[s + 2][i]];
                        derivative_nonuniform(&self.ys[s..s + 3], &v, j - s)
                    })
                    .collect()
            })
            .collect();
        Self {
            grid: self.grid,
            ys: self.ys.clone(),
            rows,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chart {
    Chebyshev,
    Semigeodesic,
}

/// Metric in one of the two charts.
#[derive(Debug, Clone, PartialEq)]
pub enum Metric2D<T> {
    /// `ds² = ((dx¹)² − 2g¹² dx¹dx² + (dx²)²)/(1 − (g¹²)²)`.
    Chebyshev { g12: ScalarField2D<T> },
    /// `ds² = dx² + G dy²`.
    Semigeodesic { big_g: LayeredField<T> },
}

impl<T: Scalar> Metric2D<T> {
    pub fn chart(&self) -> Chart {
        match self {
            Metric2D::Chebyshev { .. } => Chart::Chebyshev,
            Metric2D::Semigeodesic { .. } => Chart::Semigeodesic,
        }
    }
}

/// Lower components `(g_11, g_12, g_22)` of the Chebyshev-type metric.
pub fn chebyshev_lower<T: Scalar>(g: T) -> [T; 3] {
    let d = (T::one() - g * g).recip();
    [d, -g * d, d]
}

/// Inverse components `(g^11, g^12, g^22)`.
pub fn chebyshev_inverse<T: Scalar>(g: T) -> [T; 3] {
    [T::one(), g, T::one()]
}

fn check_signature<T: Scalar>(g12: &ScalarField2D<T>) -> Result<()> {
    let grid = g12.grid;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let v = g12.at(i, j);
            if !(v.abs() < T::one()) {
                return Err(Error::DegenerateSignature {
                    i,
                    j,
                    value: v.abs().as_f64(),
                });
            }
        }
    }
    Ok(())
}

pub fn metric_chebyshev<T: Scalar>(g12: &ScalarField2D<T>) -> Result<Metric2D<T>> {
    check_signature(g12)?;
    Ok(Metric2D::Chebyshev { g12: g12.clone() })
}

/// `G = a_{N−1}² / (1 − (g¹²)²)`.
pub fn metric_semigeodesic<T: Scalar>(a_last: &LayeredField<T>, g12: &LayeredField<T>) -> Result<Metric2D<T>> {
    a_last.require_same_layout(g12)?;
    for (j, (ra, rg)) in a_last.rows.iter().zip(&g12.rows).enumerate() {
        for (i, (&a, &g)) in ra.iter().zip(rg).enumerate() {
            if !(g.abs() < T::one()) {
                return Err(Error::DegenerateSignature {
                    i,
                    j,
                    value: g.abs().as_f64(),
                });
            }
            if a.is_zero() {
                return Err(Error::VanishingCoefficient { i, j });
            }
        }
    }
    let big_g = a_last.zip_with(g12, |a, g| a * a / (T::one() - g * g))?;
    Ok(Metric2D::Semigeodesic { big_g })
}

/// Potential `y(x¹, x²)` with `y = 0` at the first grid node.
#[derive(Debug, Clone)]
pub struct ReciprocalForward<T> {
    pub y: ScalarField2D<T>,
    /// `(1/a_{N−1})_{x²} + (g¹²/a_{N−1})_{x¹}`.
    pub closedness: ScalarField2D<T>,
    /// Largest difference between the two integration orders.
    pub path_defect: T,
}

/// Trapezoidal running integral of uniformly spaced samples.
fn cumulative<T: Scalar>(values: &[T], h: T) -> Vec<T> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = T::zero();
    out.push(acc);
    for w in values.windows(2) {
        acc += T::lit(0.5) * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

fn path_potential<T: Scalar>(d1: &ScalarField2D<T>, d2: &ScalarField2D<T>, first_axis: Axis) -> Vec<T> {
    let g = d1.grid;
    let mut out = vec![T::zero(); g.len()];
    match first_axis {
        Axis::X1 => {
            let base = cumulative(d1.row(0), g.dx);
            for i in 0..g.nx {
                let column: Vec<T> = (0..g.ny).map(|j| d2.at(i, j)).collect();
                for (j, v) in cumulative(&column, g.dy).into_iter().enumerate() {
                    out[g.index(i, j)] = base[i] + v;
                }
            }
        }
        Axis::X2 => {
            let column: Vec<T> = (0..g.ny).map(|j| d2.at(0, j)).collect();
            let base = cumulative(&column, g.dy);
            for j in 0..g.ny {
                for (i, v) in cumulative(d1.row(j), g.dx).into_iter().enumerate() {
                    out[g.index(i, j)] = base[j] + v;
                }
            }
        }
    }
    out
}

pub fn reciprocal_forward<T: Scalar>(g12: &ScalarField2D<T>, a_last: &ScalarField2D<T>) -> Result<ReciprocalForward<T>> {
    g12.require_same_grid(a_last)?;
    let grid = g12.grid;
    if let Some(idx) = a_last.values().iter().position(|v| v.is_zero()) {
        return Err(Error::VanishingCoefficient {
            i: idx % grid.nx,
            j: idx / grid.nx,
        });
    }
    let y1 = a_last.map(|a| a.recip())?;
    let y2 = g12.zip_with(a_last, |g, a| -g / a)?;
    let closedness = partial(&y1, Axis::X2).zip_with(&partial(&g12.zip_with(a_last, |g, a| g / a)?, Axis::X1), |u, v| u + v)?;
    let canonical = path_potential(&y1, &y2, Axis::X1);
    let other = path_potential(&y1, &y2, Axis::X2);
    let path_defect = crate::scalar::max_abs(canonical.iter().zip(&other).map(|(u, v)| *u - *v));
    Ok(ReciprocalForward {
        y: ScalarField2D::new(grid, canonical)?,
        closedness,
        path_defect,
    })
}

/// `(g¹², a_{N−1}) = (h_k, √((1 − h_k²)/a))` with `h_k = b_k/√(1+b_k²)`;
/// `k` is 1-based.
pub fn reconstruct_point<T: Scalar>(a: T, b: &[T], k: usize) -> Result<(T, T)> {
    if k == 0 || k > b.len() {
        return Err(Error::Dimension(format!("root index {k} outside 1..={}", b.len())));
    }
    if !(a > T::zero()) {
        return Err(Error::Positivity {
            index: 0,
            value: a.as_f64(),
        });
    }
    let bk = b[k - 1];
    let root = (T::one() + bk * bk).sqrt();
    // 1 − h_k² = 1/(1 + b_k²), formed directly to avoid cancellation
    Ok((bk / root, (a.sqrt() * root).recip()))
}

pub fn reconstruct_from_solution<T: Scalar>(
    snap: &HydroSnapshot<T>,
    k: usize,
) -> Result<(ScalarField1D<T>, ScalarField1D<T>)> {
    let (mut g, mut al) = (Vec::with_capacity(snap.len()), Vec::with_capacity(snap.len()));
    for i in 0..snap.len() {
        let (a, b) = snap.point(i);
        let (gv, av) = reconstruct_point(a, &b, k)?;
        g.push(gv);
        al.push(av);
    }
    let grid = snap.grid();
    Ok((ScalarField1D::new(grid, g)?, ScalarField1D::new(grid, al)?))
}

/// Chart ordering of an evolution series: `y = −y_evolution`, layers reversed
/// so that `y` increases.
pub fn chart_series<T: Scalar>(ys: &[T], snaps: &[HydroSnapshot<T>]) -> (Vec<T>, Vec<HydroSnapshot<T>>) {
    (ys.iter().rev().map(|&y| -y).collect(), snaps.iter().rev().cloned().collect())
}

/// Layered view of a chart series: `(a, [b_1..b_{N−1}])`.
pub fn layered_state<T: Scalar>(ys: &[T], snaps: &[HydroSnapshot<T>]) -> Result<(LayeredField<T>, Vec<LayeredField<T>>)> {
    check_series(ys, snaps)?;
    let grid = snaps[0].grid();
    let a = LayeredField::new(grid, ys.to_vec(), snaps.iter().map(|s| s.a().values().to_vec()).collect())?;
    let b = (0..snaps[0].degree() - 1)
        .map(|m| LayeredField::new(grid, ys.to_vec(), snaps.iter().map(|s| s.b()[m].values().to_vec()).collect()))
        .collect::<Result<_>>()?;
    Ok((a, b))
}

#[derive(Debug, Clone)]
pub struct Reconstruction<T> {
    pub k: usize,
    pub g12: LayeredField<T>,
    pub a_last: LayeredField<T>,
    /// `(g¹²)_y − (a_{N−1})_x` in the chart.
    pub closedness: LayeredField<T>,
    pub closedness_max: T,
}

/// Reconstruction along an evolution series (`ys` in the evolution variable).
/// The returned fields are on the chart layers of [`chart_series`].
pub fn reconstruct_series<T: Scalar>(ys: &[T], snaps: &[HydroSnapshot<T>], k: usize) -> Result<Reconstruction<T>> {
    check_series(ys, snaps)?;
    let (yc, chart) = chart_series(ys, snaps);
    let grid = chart[0].grid();
    let mut g_rows = Vec::with_capacity(chart.len());
    let mut a_rows = Vec::with_capacity(chart.len());
    for s in &chart {
        let (g, a) = reconstruct_from_solution(s, k)?;
        g_rows.push(g.into_values());
        a_rows.push(a.into_values());
    }
    let g12 = LayeredField::new(grid, yc.clone(), g_rows)?;
    let a_last = LayeredField::new(grid, yc, a_rows)?;
    let closedness = closedness_residual(&g12, &a_last)?;
    let closedness_max = closedness.max_abs();
    Ok(Reconstruction {
        k,
        g12,
        a_last,
        closedness,
        closedness_max,
    })
}

/// `(g¹²)_y − (a_{N−1})_x`.
pub fn closedness_residual<T: Scalar>(g12: &LayeredField<T>, a_last: &LayeredField<T>) -> Result<LayeredField<T>> {
    g12.d_y().zip_with(&a_last.d_x(), |u, v| u - v)
}

#[derive(Debug, Clone)]
pub struct X1Potential<T> {
    /// `x¹(x, y)` with `x¹ = 0` at the first node of the first layer.
    pub x1: LayeredField<T>,
    pub closedness_max: T,
    /// Set when the closedness residual exceeds the supplied tolerance.
    pub warning: Option<String>,
    /// Sign of `det ∂(x¹,x²)/∂(x,y) = −a_{N−1}`; `0` when it changes sign.
    pub jacobian_sign: i8,
    pub folded: bool,
}

/// Integrates `dx¹ = g¹² dx + a_{N−1} dy` along the first layer, then along `y`.
pub fn x1_potential<T: Scalar>(g12: &LayeredField<T>, a_last: &LayeredField<T>, tol: T) -> Result<X1Potential<T>> {
    g12.require_same_layout(a_last)?;
    let grid = g12.grid;
    let ys = g12.ys();
    let base = cumulative(&g12.rows[0], grid.dx);
    let mut rows = vec![base];
    for j in 1..ys.len() {
        let h = ys[j] - ys[j - 1];
        let prev = &rows[j - 1];
        let row = (0..grid.nx)
            .map(|i| prev[i] + T::lit(0.5) * h * (a_last.rows[j - 1][i] + a_last.rows[j][i]))
            .collect();
        rows.push(row);
    }
    let x1 = LayeredField::new(grid, ys.to_vec(), rows)?;
    let closedness_max = closedness_residual(g12, a_last)?.max_abs();
    let warning = (closedness_max > tol).then(|| {
        format!("closedness residual {closedness_max} exceeds {tol}; x¹ depends on the integration path")
    });
    let (lo, hi) = (a_last.min(), a_last.max());
    let folded = lo <= T::zero() && hi >= T::zero();
    let jacobian_sign = if folded {
        0
    } else if lo > T::zero() {
        -1
    } else {
        1
    };
    Ok(X1Potential {
        x1,
        closedness_max,
        warning,
        jacobian_sign,
        folded,
    })
}

/// Sign of the square root in the Hamilton–Jacobi flux; on a root family
/// `s = p2/p1` of the integral it is `sign(s + g¹²)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Positive,
    Negative,
}

impl Branch {
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Branch::Positive => T::one(),
            Branch::Negative => -T::one(),
        }
    }
}

fn hj_root<T: Scalar>(g: T, p: T, index: usize) -> Result<T> {
    let rad = (g * g - T::one()) * p * p + T::one();
    if !(rad > T::zero()) {
        return Err(Error::Domain(format!(
            "((g¹²)² − 1) p² + 1 = {rad} is not positive at index {index}"
        )));
    }
    Ok(rad.sqrt())
}

/// `p = (1 + 2 g¹² s + s²)^{-1/2}`.
pub fn generating_p<T: Scalar>(s: T, g: T) -> T {
    (T::one() + T::lit(2.0) * g * s + s * s).sqrt().recip()
}

/// `p̃ = ±√(((g¹²)² − 1) p² + 1)`, equal to `(s + g¹²) p` on the matching branch.
pub fn density_from_p<T: Scalar>(p: T, g: T, branch: Branch) -> Result<T> {
    Ok(branch.sign::<T>() * hj_root(g, p, 0)?)
}

/// `p_{x²} − (σ√(((g¹²)² − 1)p² + 1) − g¹² p)_{x¹}`, differentiating the flux
/// as a whole (through both `g¹²` and `p`).
pub fn hj_residual_chebyshev<T: Scalar>(p: &ScalarField2D<T>, g12: &ScalarField2D<T>, branch: Branch) -> Result<ScalarField2D<T>> {
    p.require_same_grid(g12)?;
    let sigma = branch.sign::<T>();
    let flux = (0..p.values().len())
        .map(|idx| {
            let (pv, gv) = (p.values()[idx], g12.values()[idx]);
            Ok(sigma * hj_root(gv, pv, idx)? - gv * pv)
        })
        .collect::<Result<Vec<T>>>()?;
    let flux = ScalarField2D::new(p.grid, flux)?;
    partial(p, Axis::X2).zip_with(&partial(&flux, Axis::X1), |u, v| u - v)
}

/// `p̃_y − (a_{N−1}/√(1−(g¹²)²) · √(1−p̃²))_x` on the semi-geodesic chart.
pub fn hj_residual_semigeodesic<T: Scalar>(
    pt: &LayeredField<T>,
    a_last: &LayeredField<T>,
    g12: &LayeredField<T>,
) -> Result<LayeredField<T>> {
    pt.require_same_layout(a_last)?;
    pt.require_same_layout(g12)?;
    if let Some(v) = pt.rows.iter().flatten().find(|v| !(v.abs() < T::one())) {
        return Err(Error::Domain(format!("|p̃| = {} must be < 1", v.abs())));
    }
    if let Some(v) = g12.rows.iter().flatten().find(|v| !(v.abs() < T::one())) {
        return Err(Error::Domain(format!("|g¹²| = {} must be < 1", v.abs())));
    }
    let coef = a_last.zip_with(g12, |a, g| a / (T::one() - g * g).sqrt())?;
    let flux = coef.zip_with(pt, |c, p| c * ((T::one() - p) * (T::one() + p)).sqrt())?;
    pt.d_y().zip_with(&flux.d_x(), |u, v| u - v)
}

/// Coefficients `a_0..a_N` of the integral in the Chebyshev chart at a state
/// `(a, b)` reconstructed with root index `k`:
/// `f = a_{N−1} p1 Π_{m≠k} (p2 + c_m p1)`, `c_m = (b_k − b_m)/√(1+b_k²)`.
pub fn chebyshev_coefficients_from_state<T: Scalar>(a: T, b: &[T], k: usize) -> Result<Vec<T>> {
    let (_, a_last) = reconstruct_point(a, b, k)?;
    let n = b.len() + 1;
    let bk = b[k - 1];
    let root = (T::one() + bk * bk).sqrt();
    // ascending powers of t = p2/p1, starting with t
    let mut poly = vec![T::zero(), T::one()];
    for (m, &bm) in b.iter().enumerate() {
        if m == k - 1 {
            continue;
        }
        let c = (bk - bm) / root;
        let mut next = vec![T::zero(); poly.len() + 1];
        for (j, &v) in poly.iter().enumerate() {
            next[j + 1] += v;
            next[j] += c * v;
        }
        poly = next;
    }
    let mut out: Vec<T> = poly.into_iter().map(|v| v * a_last).collect();
    out.push(T::zero());
    debug_assert_eq!(out.len(), n + 1);
    Ok(out)
}

/// Largest common `x¹` range over all columns of a potential.
pub fn common_x1_range<T: Scalar>(x1: &LayeredField<T>) -> Result<(T, T)> {
    let last = x1.layers() - 1;
    let mut lo = T::neg_infinity();
    let mut hi = T::infinity();
    for i in 0..x1.grid.nx {
        let (a, b) = (x1.rows[0][i], x1.rows[last][i]);
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    if !(hi > lo) {
        return Err(Error::Domain("columns of x¹ share no common range".into()));
    }
    Ok((lo, hi))
}

/// Samples `fields` (given on the `(x, y)` chart) on a uniform `(x¹, x²)` grid
/// with `n1` nodes across the common `x¹` range and `x² = x` at the source
/// nodes. Each column is interpolated with four-point Lagrange stencils in
/// `x¹`, which must be strictly monotone along `y`. Both output axes are
/// non-periodic.
pub fn resample_to_chebyshev<T: Scalar>(
    x1: &LayeredField<T>,
    fields: &[&LayeredField<T>],
    n1: usize,
) -> Result<(Grid2D<T>, Vec<ScalarField2D<T>>)> {
    for f in fields {
        x1.require_same_layout(f)?;
    }
    if x1.layers() < 4 {
        return Err(Error::Dimension("resampling needs at least four layers".into()));
    }
    let src = x1.grid;
    let (lo, hi) = common_x1_range(x1)?;
    let axis1 = Grid1D::closed(n1, lo, hi)?;
    let axis2 = Grid1D::new(src.nx, src.dx, src.x0, false)?;
    let grid = Grid2D::new(axis1, axis2);
    let layers = x1.layers();
    let mut out = vec![vec![T::zero(); grid.len()]; fields.len()];
    for i2 in 0..src.nx {
        let mut col: Vec<T> = (0..layers).map(|j| x1.rows[j][i2]).collect();
        let increasing = col[layers - 1] > col[0];
        if !increasing {
            col.iter_mut().for_each(|v| *v = -*v);
        }
        if col.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(format!("x¹ is not monotone in y along column {i2}")));
        }
        for i1 in 0..n1 {
            let mut t = axis1.coord(i1);
            if !increasing {
                t = -t;
            }
            let upper = col.partition_point(|&v| v < t).clamp(1, layers - 1);
            let start = (upper - 1).saturating_sub(1).min(layers - 4);
            let nodes = &col[start..start + 4];
            let weights: Vec<T> = (0..4)
                .map(|a| {
                    (0..4)
                        .filter(|&b| b != a)
                        .fold(T::one(), |w, b| w * (t - nodes[b]) / (nodes[a] - nodes[b]))
                })
                .collect();
            for (f, o) in fields.iter().zip(out.iter_mut()) {
                o[grid.index(i1, i2)] = (0..4).map(|a| weights[a] * f.rows[start + a][i2]).sum();
            }
        }
    }
    let fields = out.into_iter().map(|v| ScalarField2D::new(grid, v)).collect::<Result<_>>()?;
    Ok((grid, fields))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::momenta::chebyshev_coefficients;
    use crate::riemann::HydroSnapshot;
    use std::f64::consts::TAU;

    /// Metric with a Killing field along `x¹ + x²`: `g¹² = g(ξ)`, `ξ = x¹ − x²`,
    /// `g = 1 − 1/(1 + 2ε cos ξ)`; then `a_{N−1} = 2(1 − g)` and the
    /// semi-geodesic coordinate is `y = ξ/2 + ε sin ξ + x²/2`.
    const EPS: f64 = 0.1;

    fn g_of(xi: f64) -> f64 {
        1.0 - 1.0 / (1.0 + 2.0 * EPS * xi.cos())
    }

    fn xi_of(eta: f64) -> f64 {
        // solve ξ/2 + ε sin ξ = η
        let mut xi = 2.0 * eta;
        for _ in 0..50 {
            let step = (xi / 2.0 + EPS * xi.sin() - eta) / (0.5 + EPS * xi.cos());
            xi -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        xi
    }

    fn cheb_grid(n: usize) -> Grid2D<f64> {
        Grid2D::new(Grid1D::closed(n, 0.0, 2.0).unwrap(), Grid1D::closed(n, 0.0, 2.0).unwrap())
    }

    #[test]
    fn chebyshev_metric_examples() {
        let g = cheb_grid(8);
        let m = metric_chebyshev(&ScalarField2D::constant(g, 0.5).unwrap()).unwrap();
        assert_eq!(m.chart(), Chart::Chebyshev);
        let [g11, g12, g22] = chebyshev_lower(0.5f64);
        assert!((g11 - 4.0 / 3.0).abs() < 1e-15 && (g12 + 2.0 / 3.0).abs() < 1e-15 && g22 == g11);
        assert_eq!(chebyshev_lower(0.0f64), [1.0, 0.0, 1.0]);
        let bad = ScalarField2D::from_fn(g, |x, y| if x > 1.5 && y > 1.5 { 1.0 } else { 0.0 }).unwrap();
        assert!(matches!(metric_chebyshev(&bad), Err(Error::DegenerateSignature { i: 6, j: 6, .. })));
    }

    #[test]
    fn semigeodesic_metric_examples() {
        let grid = Grid1D::periodic(8, 0.0, 1.0).unwrap();
        let ys = vec![0.0, 0.1, 0.2];
        let one = LayeredField::from_fn(grid, ys.clone(), |_, _| 1.0).unwrap();
        let zero = LayeredField::from_fn(grid, ys.clone(), |_, _| 0.0).unwrap();
        let Metric2D::Semigeodesic { big_g } = metric_semigeodesic(&one, &zero).unwrap() else { panic!() };
        assert!(big_g.rows().iter().flatten().all(|v| *v == 1.0));
        // b ≡ 0, a ≡ 4: G = 1/a
        let s = HydroSnapshot::new(
            ScalarField1D::constant(grid, 4.0).unwrap(),
            vec![ScalarField1D::constant(grid, 0.0).unwrap()],
        )
        .unwrap();
        let r = reconstruct_series(&ys, &[s.clone(), s.clone(), s], 1).unwrap();
        assert!(r.g12.rows().iter().flatten().all(|v| *v == 0.0));
        assert!(r.a_last.rows().iter().flatten().all(|v| *v == 0.5));
        let Metric2D::Semigeodesic { big_g } = metric_semigeodesic(&r.a_last, &r.g12).unwrap() else { panic!() };
        assert!(big_g.rows().iter().flatten().all(|v| *v == 0.25));
        assert_eq!(r.closedness_max, 0.0);
    }

    #[test]
    fn inverse_pair_identity() {
        for g in [-0.9f64, -0.3, 0.0, 0.4, 0.95] {
            let [l11, l12, l22] = chebyshev_lower(g);
            let [u11, u12, u22] = chebyshev_inverse(g);
            assert!((l11 * u11 + l12 * u12 - 1.0).abs() < 1e-14);
            assert!((l11 * u12 + l12 * u22).abs() < 1e-14);
            assert!((l12 * u12 + l22 * u22 - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn reconstruction_examples() {
        assert_eq!(reconstruct_point(1.0, &[0.0], 1).unwrap(), (0.0, 1.0));
        assert_eq!(reconstruct_point(4.0, &[0.0], 1).unwrap(), (0.0, 0.5));
        assert!(reconstruct_point(1.0, &[0.0], 2).is_err());
        assert!(reconstruct_point(-1.0, &[0.0], 1).is_err());
        let (g, al) = reconstruct_point(2.0, &[3.0], 1).unwrap();
        let h: f64 = 3.0 / 10f64.sqrt();
        assert!((g - h).abs() < 1e-15 && (al - ((1.0 - h * h) / 2.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn linear_potentials() {
        let g = cheb_grid(9);
        let (c, d) = (0.3, 1.7);
        let rf = reciprocal_forward(&ScalarField2D::constant(g, c).unwrap(), &ScalarField2D::constant(g, d).unwrap()).unwrap();
        for j in 0..9 {
            for i in 0..9 {
                let (x1, x2) = g.point(i, j);
                assert!((rf.y.at(i, j) - (x1 / d - c * x2 / d)).abs() < 1e-14);
            }
        }
        assert!(rf.path_defect < 1e-14 && rf.closedness.max_abs() < 1e-14);

        let grid = Grid1D::closed(9, 0.0, 2.0).unwrap();
        let ys = vec![0.0, 0.3, 0.5, 1.0];
        let gf = LayeredField::from_fn(grid, ys.clone(), |_, _| c).unwrap();
        let af = LayeredField::from_fn(grid, ys.clone(), |_, _| d).unwrap();
        let pot = x1_potential(&gf, &af, 1e-8).unwrap();
        for (j, &y) in ys.iter().enumerate() {
            for i in 0..9 {
                assert!((pot.x1.at(j, i) - (c * grid.coord(i) + d * y)).abs() < 1e-14);
            }
        }
        assert!(pot.warning.is_none() && !pot.folded && pot.jacobian_sign == -1);
    }

    #[test]
    fn killing_example_closedness_and_path_independence() {
        let err = |n: usize| {
            let g = cheb_grid(n);
            let g12 = ScalarField2D::from_fn(g, |x1, x2| g_of(x1 - x2)).unwrap();
            let al = g12.map(|v| 2.0 * (1.0 - v)).unwrap();
            let rf = reciprocal_forward(&g12, &al).unwrap();
            let mut e: f64 = 0.0;
            for j in 0..n {
                for i in 0..n {
                    let (x1, x2) = g.point(i, j);
                    let xi = x1 - x2;
                    let exact = xi / 2.0 + EPS * xi.sin() + x2 / 2.0;
                    e = e.max((rf.y.at(i, j) - exact).abs());
                }
            }
            (e, rf.closedness.max_abs(), rf.path_defect)
        };
        let (e1, c1, _) = err(33);
        let (e2, c2, p2) = err(65);
        assert!(e1 / e2 > 3.5 && c1 / c2 > 3.5 && p2 < 1e-3, "{e1} {e2} {c1} {c2} {p2}");

        let g = cheb_grid(33);
        let g12 = ScalarField2D::from_fn(g, |x1, x2| 0.3 * (x1 * x2).sin()).unwrap();
        let al = ScalarField2D::from_fn(g, |x1, _| 1.0 + 0.5 * x1).unwrap();
        let rf = reciprocal_forward(&g12, &al).unwrap();
        assert!(rf.path_defect > 0.05, "{}", rf.path_defect);
    }

    fn killing_layers(nx: usize, ny: usize) -> (LayeredField<f64>, LayeredField<f64>, LayeredField<f64>) {
        let grid = Grid1D::closed(nx, 0.0, 2.0).unwrap();
        let ys: Vec<f64> = (0..ny).map(|j| 0.1 + 1.5 * j as f64 / (ny - 1) as f64).collect();
        let xi = |x: f64, y: f64| xi_of(y - x / 2.0);
        let g12 = LayeredField::from_fn(grid, ys.clone(), |x, y| g_of(xi(x, y))).unwrap();
        let al = g12.map(|g| 2.0 * (1.0 - g)).unwrap();
        let x1 = LayeredField::from_fn(grid, ys, |x, y| xi(x, y) + x).unwrap();
        (g12, al, x1)
    }

    #[test]
    fn x1_potential_recovers_chebyshev_chart() {
        let err = |n: usize| {
            let (g12, al, exact) = killing_layers(n, n);
            let pot = x1_potential(&g12, &al, 1.0).unwrap();
            let offset = exact.at(0, 0);
            let e = pot.x1.zip_with(&exact, |u, v| (u - (v - offset)).abs()).unwrap().max_abs();
            (e, pot.closedness_max)
        };
        let (e1, c1) = err(33);
        let (e2, c2) = err(65);
        assert!(e1 / e2 > 3.5 && c1 / c2 > 3.5, "{e1} {e2} {c1} {c2}");
        let (g12, al, _) = killing_layers(17, 17);
        let noisy = al.map(|v| v * 1.2).unwrap().zip_with(&g12, |a, g| a + 0.3 * g * g).unwrap();
        assert!(x1_potential(&g12, &noisy, 1e-2).unwrap().warning.is_some());
    }

    #[test]
    fn reciprocal_roundtrip_through_resampling() {
        let err = |n: usize| {
            let (g12, al, _) = killing_layers(n, 2 * n);
            let pot = x1_potential(&g12, &al, 1.0).unwrap();
            let yfield = LayeredField::from_fn(g12.grid, g12.ys().to_vec(), |_, y| y).unwrap();
            let (grid, out) = resample_to_chebyshev(&pot.x1, &[&g12, &al, &yfield], n).unwrap();
            let rf = reciprocal_forward(&out[0], &out[1]).unwrap();
            let shift = out[2].at(0, 0) - rf.y.at(0, 0);
            let mut e: f64 = 0.0;
            for idx in 0..grid.len() {
                e = e.max((rf.y.values()[idx] + shift - out[2].values()[idx]).abs());
            }
            e
        };
        let (e1, e2) = (err(33), err(65));
        assert!(e2 < 1e-3 && e1 / e2 > 3.0, "{e1} {e2}");
    }

    #[test]
    fn hj_chebyshev_on_root_family() {
        let run = |n: usize, noise: f64| {
            let g = cheb_grid(n);
            let g12 = ScalarField2D::from_fn(g, |x1, x2| g_of(x1 - x2)).unwrap();
            let p = ScalarField2D::from_fn(g, |x1, x2| {
                (2.0 - 2.0 * g_of(x1 - x2)).powf(-0.5) * (1.0 + noise * (7.0 * x1).sin() * (5.0 * x2).cos())
            })
            .unwrap();
            hj_residual_chebyshev(&p, &g12, Branch::Negative).unwrap().max_abs()
        };
        let (e1, e2) = (run(33, 0.0), run(65, 0.0));
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
        assert!(run(65, 0.05) > 0.1);
        // constant p and g: zero
        let g = cheb_grid(9);
        let s = 0.7;
        let gc = ScalarField2D::constant(g, 0.2).unwrap();
        let pc = ScalarField2D::constant(g, generating_p(s, 0.2)).unwrap();
        assert!(hj_residual_chebyshev(&pc, &gc, Branch::Positive).unwrap().max_abs() < 1e-14);
        // p̃ = (s + g) p on the matching branch
        let p = generating_p(s, 0.2);
        assert!((density_from_p(p, 0.2, Branch::Positive).unwrap() - (s + 0.2) * p).abs() < 1e-15);
        let big = ScalarField2D::constant(g, 5.0).unwrap();
        assert!(hj_residual_chebyshev(&big, &gc, Branch::Positive).is_err());
    }

    #[test]
    fn hj_semigeodesic_on_matched_chart() {
        let run = |n: usize| {
            let (g12, al, _) = killing_layers(n, n);
            // p̃ = (s + g) p with s = −1 and p = (2 − 2g)^{-1/2}
            let pt = g12.map(|g| density_from_p((2.0 - 2.0 * g).powf(-0.5), g, Branch::Negative).unwrap()).unwrap();
            let direct = g12.map(|g| -((1.0 - g) / 2.0).sqrt()).unwrap();
            assert!(pt.zip_with(&direct, |u, v| u - v).unwrap().max_abs() < 1e-15);
            hj_residual_semigeodesic(&pt, &al, &g12).unwrap().max_abs()
        };
        let (e1, e2) = (run(33), run(65));
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn closedness_on_evolved_solution_and_control() {
        use crate::hydro::{evolve_uno, EvolutionConfig, Scheme};
        let run = |nx: usize, corrupt: bool| {
            let grid = Grid1D::periodic(nx, 0.0, TAU).unwrap();
            let s = HydroSnapshot::new(
                ScalarField1D::from_fn(grid, |x| 1.0 + 0.1 * x.sin()).unwrap(),
                vec![ScalarField1D::from_fn(grid, |x| 0.2 + 0.1 * x.cos()).unwrap()],
            )
            .unwrap();
            let out = evolve_uno(&s, &EvolutionConfig::new(Scheme::LaxWendroff, 0.5)).unwrap();
            let mut snaps = out.snapshots.clone();
            if corrupt {
                let mid = snaps.len() / 2;
                let (a, b) = snaps[mid].clone().into_parts();
                let b = b.into_iter().map(|f| f.map(|v| v + 0.05).unwrap()).collect();
                snaps[mid] = HydroSnapshot::new(a, b).unwrap();
            }
            reconstruct_series(&out.ys, &snaps, 1).unwrap().closedness_max
        };
        let (e1, e2) = (run(64, false), run(128, false));
        assert!(e1 / e2 > 3.5, "{e1} {e2}");
        assert!(run(64, true) > 0.1);
    }

    #[test]
    fn snapshot_coefficients_match_semigeodesic_form() {
        let (a, b) = (1.7f64, vec![0.4f64, -0.3, 1.1]);
        for k in 1..=3 {
            let direct = chebyshev_coefficients_from_state(a, &b, k).unwrap();
            let (g, al) = reconstruct_point(a, &b, k).unwrap();
            // ã_j = (−1)^j e_j(b̃), b̃ = a^{1/2} b
            let bt: Vec<f64> = b.iter().map(|v| a.sqrt() * v).collect();
            let mut e = vec![1.0];
            for &r in &bt {
                let mut next = vec![0.0; e.len() + 1];
                for (j, &v) in e.iter().enumerate() {
                    next[j] += v;
                    next[j + 1] -= r * v;
                }
                e = next;
            }
            let via = chebyshev_coefficients(&e[1..], g, al);
            assert_eq!(direct[0], 0.0);
            assert_eq!(*direct.last().unwrap(), 0.0);
            for (u, v) in direct.iter().zip(&via) {
                assert!((u - v).abs() < 1e-13, "{direct:?} {via:?}");
            }
            assert!((direct[3] - al).abs() < 1e-15);
        }
        // equal roots remove a_1 for N = 3
        let c = chebyshev_coefficients_from_state(1.3, &[0.2, 0.2], 1).unwrap();
        assert_eq!(c[1], 0.0);
    }
}
