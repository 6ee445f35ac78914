//! End-to-end chain from an evolved series to a metric in the Chebyshev-type
//! chart together with the coefficients of its polynomial integral.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::bridge::{chebyshev_coefficients_from_state, reconstruct_series, resample_to_chebyshev, x1_potential, LayeredField};
use crate::error::{Error, Result};
use crate::fields::{Grid2D, ScalarField2D};
use crate::geodesic::GeodesicModel;
use crate::integrability::{build_raz, raz_residual};
use crate::momenta::{Coeff, HamiltonianForm, MomentaPolynomial};
use crate::riemann::HydroSnapshot;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct ChebyshevMetric<T> {
    pub degree: usize,
    pub grid: Grid2D<T>,
    pub g12: ScalarField2D<T>,
    /// `a_0..a_N`.
    pub coeffs: Vec<ScalarField2D<T>>,
    pub closedness_max: T,
    pub max_abs_g12: T,
    pub warning: Option<String>,
    pub jacobian_sign: i8,
    pub folded: bool,
}

impl<T: Scalar> ChebyshevMetric<T> {
    pub fn hamiltonian(&self) -> Result<HamiltonianForm<T>> {
        HamiltonianForm::riemannian(self.g12.clone())
    }

    pub fn integral(&self) -> Result<MomentaPolynomial<T>> {
        MomentaPolynomial::new(self.coeffs.iter().cloned().map(Coeff::Field).collect())
    }

    pub fn geodesic_model(&self) -> Result<GeodesicModel<T>> {
        GeodesicModel::new(&self.hamiltonian()?, Some(&self.integral()?))
    }

    /// Largest `|a_k|` over the indices in `mask`.
    pub fn masked_max(&self, mask: &BTreeSet<usize>) -> T {
        mask.iter()
            .filter_map(|&k| self.coeffs.get(k))
            .fold(T::zero(), |m, f| m.max(f.max_abs()))
    }

    /// Residuals of the quasi-linear system (for `mask`) on the resampled
    /// grid, as `(k, max |residual|)`; boundary rows are excluded.
    pub fn raz_residuals(&self, mask: &BTreeSet<usize>) -> Result<Vec<(usize, T)>> {
        let sys = build_raz(self.degree, mask)?;
        let a: BTreeMap<usize, Coeff<T>> = (1..self.degree)
            .map(|k| (k, Coeff::Field(self.coeffs[k].clone())))
            .collect();
        let res = raz_residual(&sys, &a, &self.g12)?;
        let g = self.grid;
        Ok(res
            .into_iter()
            .map(|(k, f)| {
                let mut m = T::zero();
                for j in 2..g.ny.saturating_sub(2) {
                    for i in 2..g.nx.saturating_sub(2) {
                        m = m.max(f.at(i, j).abs());
                    }
                }
                (k, m)
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub closedness_max: f64,
    pub max_abs_g12: f64,
    pub jacobian_sign: i8,
    pub folded: bool,
}

impl<T: Scalar> From<&ChebyshevMetric<T>> for MetricSummary {
    fn from(m: &ChebyshevMetric<T>) -> Self {
        Self {
            closedness_max: m.closedness_max.as_f64(),
            max_abs_g12: m.max_abs_g12.as_f64(),
            jacobian_sign: m.jacobian_sign,
            folded: m.folded,
        }
    }
}

/// Reconstructs with root index `k` along an evolution series, integrates
/// the potential `x¹`, and resamples `g¹²` and `a_0..a_N` onto a uniform
/// `(x¹, x²)` grid with `n1` nodes across the common `x¹` range.
pub fn chebyshev_metric_from_series<T: Scalar>(
    ys: &[T],
    snaps: &[HydroSnapshot<T>],
    k: usize,
    n1: usize,
    closedness_tol: T,
) -> Result<ChebyshevMetric<T>> {
    let rec = reconstruct_series(ys, snaps, k)?;
    let max_abs_g12 = rec.g12.max_abs();
    if !(max_abs_g12 < T::one()) {
        return Err(Error::DegenerateSignature {
            i: 0,
            j: 0,
            value: max_abs_g12.as_f64(),
        });
    }
    let pot = x1_potential(&rec.g12, &rec.a_last, closedness_tol)?;
    if pot.folded {
        return Err(Error::Domain("x¹(x, y) folds: a_{N−1} changes sign".into()));
    }
    let degree = snaps[0].degree();
    let chart: Vec<&HydroSnapshot<T>> = snaps.iter().rev().collect();
    let grid = rec.g12.grid;
    let mut rows = vec![Vec::with_capacity(chart.len()); degree + 1];
    for s in &chart {
        let mut layer = vec![Vec::with_capacity(grid.nx); degree + 1];
        for i in 0..s.len() {
            let (a, b) = s.point(i);
            for (j, c) in chebyshev_coefficients_from_state(a, &b, k)?.into_iter().enumerate() {
                layer[j].push(c);
            }
        }
        for (r, l) in rows.iter_mut().zip(layer) {
            r.push(l);
        }
    }
    let coeff_layers = rows
        .into_iter()
        .map(|r| LayeredField::new(grid, rec.g12.ys().to_vec(), r))
        .collect::<Result<Vec<_>>>()?;
    let mut sources: Vec<&LayeredField<T>> = vec![&rec.g12];
    sources.extend(coeff_layers.iter());
    let (grid2, mut out) = resample_to_chebyshev(&pot.x1, &sources, n1)?;
    let coeffs = out.split_off(1);
    Ok(ChebyshevMetric {
        degree,
        grid: grid2,
        g12: out.pop().unwrap(),
        coeffs,
        closedness_max: pot.closedness_max,
        max_abs_g12,
        warning: pot.warning,
        jacobian_sign: pot.jacobian_sign,
        folded: pot.folded,
    })
}
