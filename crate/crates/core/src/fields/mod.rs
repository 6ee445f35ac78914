//! Uniform-grid sampled scalar fields and their second-order finite-difference
//! derivatives.
//!
//! Two-dimensional fields are stored row-major: the value at `(i, j)` lives at
//! `j * nx + i`, where `i` runs along axis 1 (`x¹` or `x`) and `j` along axis 2.

mod io;

pub use io::{read_field_csv, read_field_json, write_field_csv, write_field_json, FieldJson};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Minimum number of nodes per axis; the one-sided stencils need three and we
/// keep one to spare so that interior and boundary stencils never coincide.
pub const MIN_NODES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    X1,
    X2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D<T> {
    pub nx: usize,
    pub dx: T,
    pub x0: T,
    pub periodic: bool,
}

impl<T: Scalar> Grid1D<T> {
    pub fn new(nx: usize, dx: T, x0: T, periodic: bool) -> Result<Self> {
        if nx < MIN_NODES {
            return Err(Error::InvalidGrid(format!("nx = {nx} < {MIN_NODES}")));
        }
        if !(dx > T::zero()) || !dx.is_finite() || !x0.is_finite() {
            return Err(Error::InvalidGrid(format!("dx = {dx}, x0 = {x0}")));
        }
        Ok(Self { nx, dx, x0, periodic })
    }

    /// Periodic grid of `nx` cells covering `[x0, x0 + length)`.
    pub fn periodic(nx: usize, x0: T, length: T) -> Result<Self> {
        Self::new(nx, length / T::from_usize_lossy(nx), x0, true)
    }

    /// Closed grid with `nx` nodes covering `[x0, x1]`.
    pub fn closed(nx: usize, x0: T, x1: T) -> Result<Self> {
        if nx < 2 {
            return Err(Error::InvalidGrid(format!("nx = {nx}")));
        }
        Self::new(nx, (x1 - x0) / T::from_usize_lossy(nx - 1), x0, false)
    }

    #[inline]
    pub fn coord(&self, i: usize) -> T {
        self.x0 + self.dx * T::from_usize_lossy(i)
    }

    pub fn coords(&self) -> Vec<T> {
        (0..self.nx).map(|i| self.coord(i)).collect()
    }

    /// Extent of the domain: `nx·dx` when periodic, `(nx−1)·dx` otherwise.
    pub fn length(&self) -> T {
        if self.periodic {
            self.dx * T::from_usize_lossy(self.nx)
        } else {
            self.dx * T::from_usize_lossy(self.nx - 1)
        }
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.nx == other.nx
            && self.periodic == other.periodic
            && close(self.dx, other.dx)
            && close(self.x0, other.x0)
    }
}

fn close<T: Scalar>(a: T, b: T) -> bool {
    (a - b).abs() <= T::epsilon() * T::lit(64.0) * (T::one() + a.abs().max(b.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D<T> {
    pub nx: usize,
    pub ny: usize,
    pub dx: T,
    pub dy: T,
    pub x0: T,
    pub y0: T,
    pub periodic_x: bool,
    pub periodic_y: bool,
}

impl<T: Scalar> Grid2D<T> {
    pub fn new(x: Grid1D<T>, y: Grid1D<T>) -> Self {
        Self {
            nx: x.nx,
            ny: y.nx,
            dx: x.dx,
            dy: y.dx,
            x0: x.x0,
            y0: y.x0,
            periodic_x: x.periodic,
            periodic_y: y.periodic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.axis(Axis::X1)?;
        self.axis(Axis::X2)?;
        Ok(())
    }

    pub fn axis(&self, axis: Axis) -> Result<Grid1D<T>> {
        match axis {
            Axis::X1 => Grid1D::new(self.nx, self.dx, self.x0, self.periodic_x),
            Axis::X2 => Grid1D::new(self.ny, self.dy, self.y0, self.periodic_y),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> (T, T) {
        (
            self.x0 + self.dx * T::from_usize_lossy(i),
            self.y0 + self.dy * T::from_usize_lossy(j),
        )
    }

    pub fn same_as(&self, other: &Self) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.periodic_x == other.periodic_x
            && self.periodic_y == other.periodic_y
            && close(self.dx, other.dx)
            && close(self.dy, other.dy)
            && close(self.x0, other.x0)
            && close(self.y0, other.y0)
    }
}

fn check_finite<T: Scalar>(values: &[T]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField1D<T> {
    pub grid: Grid1D<T>,
    values: Vec<T>,
}

impl<T: Scalar> ScalarField1D<T> {
    pub fn new(grid: Grid1D<T>, values: Vec<T>) -> Result<Self> {
        Grid1D::new(grid.nx, grid.dx, grid.x0, grid.periodic)?;
        if values.len() != grid.nx {
            return Err(Error::Dimension(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.nx
            )));
        }
        check_finite(&values)?;
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid1D<T>, f: impl Fn(T) -> T) -> Result<Self> {
        let values = grid.coords().into_iter().map(f).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Grid1D<T>, c: T) -> Result<Self> {
        Self::new(grid, vec![c; grid.nx])
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise map; fails if the result is not finite.
    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch("1-D fields on different grids".into()));
        }
        Self::new(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn max_abs(&self) -> T {
        crate::scalar::max_abs(self.values.iter().copied())
    }

    /// Discrete integral: rectangle rule on periodic grids (spectrally accurate
    /// for smooth periodic data), trapezoidal rule otherwise.
    pub fn integral(&self) -> T {
        let dx = self.grid.dx;
        if self.grid.periodic {
            self.values.iter().copied().sum::<T>() * dx
        } else {
            let n = self.values.len();
            let inner: T = self.values[1..n - 1].iter().copied().sum();
            (inner + (self.values[0] + self.values[n - 1]) * T::lit(0.5)) * dx
        }
    }
}

/// Second-order first derivative of uniformly spaced samples.
///
/// Central differences in the interior; wrap-around on periodic data and
/// second-order one-sided stencils at the two ends otherwise.
pub fn derivative_samples<T: Scalar>(values: &[T], h: T, periodic: bool) -> Vec<T> {
    let n = values.len();
    let inv2h = T::one() / (h + h);
    let mut out = vec![T::zero(); n];
    for i in 1..n - 1 {
        out[i] = (values[i + 1] - values[i - 1]) * inv2h;
    }
    if periodic {
        out[0] = (values[1] - values[n - 1]) * inv2h;
        out[n - 1] = (values[0] - values[n - 2]) * inv2h;
    } else {
        let three = T::lit(3.0);
        let four = T::lit(4.0);
        out[0] = (-three * values[0] + four * values[1] - values[2]) * inv2h;
        out[n - 1] = (three * values[n - 1] - four * values[n - 2] + values[n - 3]) * inv2h;
    }
    out
}

pub fn partial1d<T: Scalar>(field: &ScalarField1D<T>) -> ScalarField1D<T> {
    let values = derivative_samples(&field.values, field.grid.dx, field.grid.periodic);
    ScalarField1D {
        grid: field.grid,
        values,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField2D<T> {
    pub grid: Grid2D<T>,
    values: Vec<T>,
}

impl<T: Scalar> ScalarField2D<T> {
    pub fn new(grid: Grid2D<T>, values: Vec<T>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nx,
                grid.ny
            )));
        }
        check_finite(&values)?;
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid2D<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.point(i, j);
                values.push(f(x, y));
            }
        }
        Self::new(grid, values)
    }

    pub fn constant(grid: Grid2D<T>, c: T) -> Result<Self> {
        Self::new(grid, vec![c; grid.len()])
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[self.grid.index(i, j)]
    }

    pub fn get(&self, i: usize, j: usize) -> Result<T> {
        if i >= self.grid.nx || j >= self.grid.ny {
            return Err(Error::OutOfRange { i, j });
        }
        Ok(self.at(i, j))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.require_same_grid(other)?;
        Self::new(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn require_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{}x{} (dx={}, dy={}) vs {}x{} (dx={}, dy={})",
                self.grid.nx,
                self.grid.ny,
                self.grid.dx,
                self.grid.dy,
                other.grid.nx,
                other.grid.ny,
                other.grid.dx,
                other.grid.dy
            )))
        }
    }

    pub fn max_abs(&self) -> T {
        crate::scalar::max_abs(self.values.iter().copied())
    }

    /// Row `j` (fixed axis-2 index) as a slice along axis 1.
    pub fn row(&self, j: usize) -> &[T] {
        let nx = self.grid.nx;
        &self.values[j * nx..(j + 1) * nx]
    }
}

/// Second-order derivative along `axis`.
pub fn partial<T: Scalar>(field: &ScalarField2D<T>, axis: Axis) -> ScalarField2D<T> {
    let g = field.grid;
    let mut out = vec![T::zero(); g.len()];
    match axis {
        Axis::X1 => {
            for j in 0..g.ny {
                let d = derivative_samples(field.row(j), g.dx, g.periodic_x);
                out[j * g.nx..(j + 1) * g.nx].copy_from_slice(&d);
            }
        }
        Axis::X2 => {
            let mut column = vec![T::zero(); g.ny];
            for i in 0..g.nx {
                for (j, c) in column.iter_mut().enumerate() {
                    *c = field.at(i, j);
                }
                let d = derivative_samples(&column, g.dy, g.periodic_y);
                for (j, v) in d.into_iter().enumerate() {
                    out[g.index(i, j)] = v;
                }
            }
        }
    }
    ScalarField2D { grid: g, values: out }
}

/// Second-order first derivative for samples at strictly increasing, possibly
/// non-uniform abscissae (three-point Lagrange stencils; one-sided at the ends).
pub fn derivative_nonuniform<T: Scalar>(xs: &[T], values: &[T], k: usize) -> T {
    let n = xs.len();
    debug_assert!(n >= 3 && values.len() == n);
    let (a, b, c) = if k == 0 {
        (0, 1, 2)
    } else if k == n - 1 {
        (n - 3, n - 2, n - 1)
    } else {
        (k - 1, k, k + 1)
    };
    let x = xs[k];
    let (xa, xb, xc) = (xs[a], xs[b], xs[c]);
    // derivative of the quadratic interpolant at x
    let la = ((x - xb) + (x - xc)) / ((xa - xb) * (xa - xc));
    let lb = ((x - xa) + (x - xc)) / ((xb - xa) * (xb - xc));
    let lc = ((x - xa) + (x - xb)) / ((xc - xa) * (xc - xb));
    la * values[a] + lb * values[b] + lc * values[c]
}
