//! Method-of-lines evolution of the hydrodynamic-type system
//!
//! ```text
//! a_y   = 2 a^{1/2} (Σ b_m)_x + a^{-1/2} a_x Σ b_m
//! b_k,y = a^{-1/2} b_k b_k,x − (1 + b_k²)(a^{-1/2})_x
//! ```
//!
//! and of its diagonal form `r^k_y = μ_k r^k_x`, with conservation-law and
//! moment-chain monitoring. Both are written `u_y = M(u) u_x`, so information
//! travels towards decreasing `x` where `μ > 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{derivative_nonuniform, partial1d, Grid1D, ScalarField1D};
use crate::riemann::{check_series, moments, riemann_point, HydroSnapshot, VelocityClosure};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    LaxFriedrichs,
    /// Richtmyer two-step Lax–Wendroff in quasi-linear form.
    LaxWendroff,
    /// First-order upwinding of each characteristic family.
    UpwindDiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Scalar"))]
pub struct EvolutionConfig<T> {
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_cfl")]
    pub cfl: T,
    pub y_end: T,
    #[serde(default = "default_output_every")]
    pub output_every: usize,
    /// Fourth-difference dissipation added after each Lax–Wendroff step.
    #[serde(default)]
    pub dissipation: T,
    /// Halt once `max|∂_x b|` exceeds this multiple of its reference value.
    #[serde(default = "default_shock_factor")]
    pub shock_factor: T,
}

fn default_cfl<T: Scalar>() -> T {
    T::lit(0.4)
}

fn default_output_every() -> usize {
    1
}

fn default_shock_factor<T: Scalar>() -> T {
    T::lit(50.0)
}

impl<T: Scalar> EvolutionConfig<T> {
    pub fn new(scheme: Scheme, y_end: T) -> Self {
        Self {
            scheme,
            cfl: default_cfl(),
            y_end,
            output_every: 1,
            dissipation: T::zero(),
            shock_factor: default_shock_factor(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > T::zero() && self.cfl < T::one()) {
            return Err(Error::Config(format!("cfl = {} must lie in (0, 1)", self.cfl)));
        }
        if !(self.y_end > T::zero()) {
            return Err(Error::Config(format!("y_end = {} must be positive", self.y_end)));
        }
        if self.output_every == 0 {
            return Err(Error::Config("output_every must be at least 1".into()));
        }
        if !(self.dissipation >= T::zero()) {
            return Err(Error::Config("dissipation must be non-negative".into()));
        }
        if !(self.shock_factor > T::one()) {
            return Err(Error::Config("shock_factor must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum HaltReason {
    GradientCatastrophe { max_gradient: f64, threshold: f64 },
    NonFinite,
    Positivity { index: usize },
    Degenerate { detail: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus<T> {
    Completed,
    /// Stopped at `y`; the series ends with the last good state.
    Halted { y: T, cause: HaltReason },
}

impl<T> RunStatus<T> {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }
}

/// Derivatives `(a_y, b_y)` of the evolutionary system at one snapshot.
pub fn rhs_uno<T: Scalar>(s: &HydroSnapshot<T>) -> Result<(ScalarField1D<T>, Vec<ScalarField1D<T>>)> {
    let a = s.a();
    let inv = a.map(|v| v.sqrt().recip())?;
    let inv_x = partial1d(&inv);
    let a_x = partial1d(a);
    let sum = sum_fields(s.b())?;
    let sum_x = partial1d(&sum);
    let len = s.len();
    let grid = s.grid();
    let a_y = (0..len)
        .map(|i| {
            let av = a.values()[i];
            T::lit(2.0) * av.sqrt() * sum_x.values()[i] + inv.values()[i] * a_x.values()[i] * sum.values()[i]
        })
        .collect();
    let b_y = s
        .b()
        .iter()
        .map(|b| {
            let bx = partial1d(b);
            let vals = (0..len)
                .map(|i| {
                    let bv = b.values()[i];
                    inv.values()[i] * bv * bx.values()[i] - (T::one() + bv * bv) * inv_x.values()[i]
                })
                .collect();
            ScalarField1D::new(grid, vals)
        })
        .collect::<Result<_>>()?;
    Ok((ScalarField1D::new(grid, a_y)?, b_y))
}

fn sum_fields<T: Scalar>(fs: &[ScalarField1D<T>]) -> Result<ScalarField1D<T>> {
    let grid = fs[0].grid;
    let vals = (0..fs[0].len()).map(|i| fs.iter().map(|f| f.values()[i]).sum()).collect();
    ScalarField1D::new(grid, vals)
}

/// `M(u) v` for `u = (a, b_1..b_{N−1})`.
pub fn quasilinear_apply<T: Scalar>(u: &[T], v: &[T]) -> Vec<T> {
    let a = u[0];
    let sa = a.sqrt();
    let inv = sa.recip();
    let half_a32 = T::lit(0.5) / (a * sa);
    let sum: T = u[1..].iter().copied().sum();
    let vsum: T = v[1..].iter().copied().sum();
    let mut out = Vec::with_capacity(u.len());
    out.push(inv * sum * v[0] + T::lit(2.0) * sa * vsum);
    for k in 1..u.len() {
        out.push((T::one() + u[k] * u[k]) * half_a32 * v[0] + inv * u[k] * v[k]);
    }
    out
}

/// Left eigenvectors of `M(u)` (rows proportional to `∇r_k`) together with
/// the velocities `μ_k`.
fn characteristic_frame(u: &[T64]) -> std::result::Result<(nalgebra::DMatrix<T64>, Vec<T64>), String> {
    let n = u.len();
    let pt = riemann_point(u[0], &u[1..])?;
    let left = nalgebra::DMatrix::from_fn(n, n, |k, c| {
        if c == 0 {
            -0.5 / u[0]
        } else {
            -1.0 / (pt.q[k] - u[c])
        }
    });
    if left.iter().any(|v| !v.is_finite()) {
        return Err("a branch point coincides with a root b_m".into());
    }
    Ok((left, pt.mu))
}

type T64 = f64;

/// Component-major state: `u[c][i]`, component 0 is `a`.
type State<T> = Vec<Vec<T>>;

fn snapshot_state<T: Scalar>(s: &HydroSnapshot<T>) -> State<T> {
    std::iter::once(s.a().values().to_vec())
        .chain(s.b().iter().map(|f| f.values().to_vec()))
        .collect()
}

fn state_snapshot<T: Scalar>(grid: Grid1D<T>, u: &State<T>) -> Result<HydroSnapshot<T>> {
    let a = ScalarField1D::new(grid, u[0].clone())?;
    let b = u[1..]
        .iter()
        .map(|v| ScalarField1D::new(grid, v.clone()))
        .collect::<Result<_>>()?;
    HydroSnapshot::new(a, b)
}

fn neighbour(i: usize, off: isize, n: usize, periodic: bool) -> Option<usize> {
    let j = i as isize + off;
    if periodic {
        Some(j.rem_euclid(n as isize) as usize)
    } else if j >= 0 && (j as usize) < n {
        Some(j as usize)
    } else {
        None
    }
}

fn point<T: Scalar>(u: &State<T>, i: usize) -> Vec<T> {
    u.iter().map(|c| c[i]).collect()
}

fn max_gradient<T: Scalar>(grid: Grid1D<T>, comps: &[Vec<T>]) -> T {
    comps
        .iter()
        .map(|c| {
            let d = crate::fields::derivative_samples(c, grid.dx, grid.periodic);
            crate::scalar::max_abs(d)
        })
        .fold(T::zero(), |m, v| m.max(v))
}

fn max_speed<T: Scalar>(u: &State<T>) -> std::result::Result<T, String> {
    let mut m = T::zero();
    for i in 0..u[0].len() {
        let p = point(u, i);
        let pt = riemann_point(p[0], &p[1..])?;
        for mu in pt.mu {
            m = m.max(mu.abs());
        }
    }
    Ok(m)
}

fn step_lax_friedrichs<T: Scalar>(u: &State<T>, grid: Grid1D<T>, dy: T) -> State<T> {
    let n = grid.nx;
    let mut out = u.clone();
    let ratio = dy / (grid.dx + grid.dx);
    for i in 0..n {
        let (Some(l), Some(r)) = (
            neighbour(i, -1, n, grid.periodic),
            neighbour(i, 1, n, grid.periodic),
        ) else {
            continue;
        };
        let ui = point(u, i);
        let diff: Vec<T> = u.iter().map(|c| c[r] - c[l]).collect();
        let m = quasilinear_apply(&ui, &diff);
        for (c, comp) in out.iter_mut().enumerate() {
            comp[i] = T::lit(0.5) * (u[c][l] + u[c][r]) + ratio * m[c];
        }
    }
    out
}

fn step_lax_wendroff<T: Scalar>(u: &State<T>, grid: Grid1D<T>, dy: T, dissipation: T) -> State<T> {
    let n = grid.nx;
    let nc = u.len();
    let half = T::lit(0.5);
    // half[i] lives at i + 1/2, time level n + 1/2
    let half_state: Vec<Option<Vec<T>>> = (0..n)
        .map(|i| {
            let r = neighbour(i, 1, n, grid.periodic)?;
            let mid: Vec<T> = (0..nc).map(|c| half * (u[c][i] + u[c][r])).collect();
            let diff: Vec<T> = (0..nc).map(|c| u[c][r] - u[c][i]).collect();
            let m = quasilinear_apply(&mid, &diff);
            Some((0..nc).map(|c| mid[c] + half * dy / grid.dx * m[c]).collect())
        })
        .collect();
    let mut out = u.clone();
    for i in 0..n {
        let Some(l) = neighbour(i, -1, n, grid.periodic) else { continue };
        let (Some(hp), Some(hm)) = (&half_state[i], &half_state[l]) else { continue };
        let centre: Vec<T> = (0..nc).map(|c| half * (hp[c] + hm[c])).collect();
        let diff: Vec<T> = (0..nc).map(|c| hp[c] - hm[c]).collect();
        let m = quasilinear_apply(&centre, &diff);
        for c in 0..nc {
            out[c][i] = u[c][i] + dy / grid.dx * m[c];
        }
    }
    if dissipation > T::zero() {
        let base = out.clone();
        for i in 0..n {
            let idx: Option<Vec<usize>> = (-2..=2).map(|o| neighbour(i, o, n, grid.periodic)).collect();
            let Some(idx) = idx else { continue };
            for c in 0..nc {
                let v = &base[c];
                let d4 = v[idx[0]] - T::lit(4.0) * v[idx[1]] + T::lit(6.0) * v[idx[2]]
                    - T::lit(4.0) * v[idx[3]]
                    + v[idx[4]];
                out[c][i] -= dissipation * d4;
            }
        }
    }
    out
}

fn step_upwind_characteristic<T: Scalar>(
    u: &State<T>,
    grid: Grid1D<T>,
    dy: T,
) -> std::result::Result<State<T>, String> {
    let n = grid.nx;
    let nc = u.len();
    let dx = grid.dx.as_f64();
    let mut out = u.clone();
    for i in 0..n {
        let p: Vec<f64> = point(u, i).iter().map(|v| v.as_f64()).collect();
        let (left, mu) = characteristic_frame(&p)?;
        let right = left
            .clone()
            .try_inverse()
            .ok_or_else(|| "singular characteristic frame".to_string())?;
        let mut du = vec![0.0f64; nc];
        for k in 0..nc {
            let off = if mu[k] > 0.0 { 1 } else { -1 };
            let Some(j) = neighbour(i, off, n, grid.periodic) else { continue };
            let mut w = 0.0;
            for c in 0..nc {
                w += left[(k, c)] * (u[c][j] - u[c][i]).as_f64();
            }
            w *= off as f64 / dx;
            for c in 0..nc {
                du[c] += right[(c, k)] * mu[k] * w;
            }
        }
        for c in 0..nc {
            out[c][i] += dy * T::lit(du[c]);
        }
    }
    Ok(out)
}

/// Snapshot series with per-output conservation diagnostics.
#[derive(Debug, Clone)]
pub struct EvolutionOutcome<T> {
    pub ys: Vec<T>,
    pub snapshots: Vec<HydroSnapshot<T>>,
    pub report: ConservationReport<T>,
    pub status: RunStatus<T>,
    pub steps: usize,
}

impl<T: Scalar> EvolutionOutcome<T> {
    pub fn last(&self) -> &HydroSnapshot<T> {
        self.snapshots.last().expect("series holds the initial state")
    }
}

pub fn evolve_uno<T: Scalar>(initial: &HydroSnapshot<T>, cfg: &EvolutionConfig<T>) -> Result<EvolutionOutcome<T>> {
    cfg.validate()?;
    let grid = initial.grid();
    let mut u = snapshot_state(initial);
    let threshold = shock_threshold(cfg, grid, max_gradient(grid, &u[1..]));
    let mut ys = vec![T::zero()];
    let mut snaps = vec![initial.clone()];
    let mut y = T::zero();
    let mut steps = 0usize;
    let mut status = RunStatus::Completed;
    let eps = cfg.y_end * T::lit(1e-12);

    while cfg.y_end - y > eps {
        let halt = |cause| RunStatus::Halted { y, cause };
        let speed = match max_speed(&u) {
            Ok(s) => s,
            Err(detail) => {
                status = halt(HaltReason::Degenerate { detail });
                break;
            }
        };
        let dy = if speed > T::zero() {
            balanced_step(cfg.cfl * grid.dx / speed, cfg.y_end - y)
        } else {
            cfg.y_end - y
        };
        let next = match cfg.scheme {
            Scheme::LaxFriedrichs => step_lax_friedrichs(&u, grid, dy),
            Scheme::LaxWendroff => step_lax_wendroff(&u, grid, dy, cfg.dissipation),
            Scheme::UpwindDiagonal => match step_upwind_characteristic(&u, grid, dy) {
                Ok(v) => v,
                Err(detail) => {
                    status = halt(HaltReason::Degenerate { detail });
                    break;
                }
            },
        };
        if next.iter().flatten().any(|v| !v.is_finite()) {
            status = halt(HaltReason::NonFinite);
            break;
        }
        if let Some(index) = next[0].iter().position(|v| !(*v > T::zero())) {
            status = halt(HaltReason::Positivity { index });
            break;
        }
        let grad = max_gradient(grid, &next[1..]);
        if grad > threshold {
            status = halt(HaltReason::GradientCatastrophe {
                max_gradient: grad.as_f64(),
                threshold: threshold.as_f64(),
            });
            break;
        }
        u = next;
        y += dy;
        steps += 1;
        if steps % cfg.output_every == 0 || cfg.y_end - y <= eps {
            ys.push(y);
            snaps.push(state_snapshot(grid, &u)?);
        }
    }
    if !status.is_completed() && *ys.last().expect("non-empty") < y {
        ys.push(y);
        snaps.push(state_snapshot(grid, &u)?);
    }
    let report = ConservationReport::from_series(&ys, &snaps)?;
    Ok(EvolutionOutcome {
        ys,
        snapshots: snaps,
        report,
        status,
        steps,
    })
}

/// Largest step not above the CFL step that divides the remaining interval
/// evenly. Steps then stay nearly uniform up to `y_end`; a sliver of a final
/// step would let Lax–Friedrichs averaging (whose diffusion does not shrink
/// with the step) dominate the last layer.
fn balanced_step<T: Scalar>(cfl_step: T, remaining: T) -> T {
    let n = (remaining / cfl_step * (T::one() - T::epsilon() * T::lit(8.0))).ceil().max(T::one());
    remaining / n
}

/// `shock_factor × max(initial gradient, 1/L)`; the floor keeps nearly
/// constant data from halting on round-off growth.
fn shock_threshold<T: Scalar>(cfg: &EvolutionConfig<T>, grid: Grid1D<T>, initial: T) -> T {
    cfg.shock_factor * initial.max(grid.length().recip())
}

/// Series of Riemann invariants, one field per family.
#[derive(Debug, Clone)]
pub struct DiagonalOutcome<T> {
    pub ys: Vec<T>,
    pub series: Vec<Vec<ScalarField1D<T>>>,
    pub status: RunStatus<T>,
    pub steps: usize,
}

/// First-order upwind evolution of `r^k_y = μ_k(r) r^k_x`.
pub fn evolve_diagonal<T: Scalar, C: VelocityClosure<T> + ?Sized>(
    r_initial: &[ScalarField1D<T>],
    closure: &C,
    cfg: &EvolutionConfig<T>,
) -> Result<DiagonalOutcome<T>> {
    cfg.validate()?;
    let n = closure.degree();
    if r_initial.len() != n {
        return Err(Error::Dimension(format!(
            "closure expects {n} invariants, got {}",
            r_initial.len()
        )));
    }
    let grid = r_initial[0].grid;
    if r_initial.iter().any(|f| !f.grid.same_as(&grid)) {
        return Err(Error::GridMismatch("invariant fields differ in grid".into()));
    }
    let nx = grid.nx;
    let mut r: State<T> = r_initial.iter().map(|f| f.values().to_vec()).collect();
    let threshold = shock_threshold(cfg, grid, max_gradient(grid, &r));
    let to_fields = |r: &State<T>| -> Result<Vec<ScalarField1D<T>>> {
        r.iter().map(|v| ScalarField1D::new(grid, v.clone())).collect()
    };
    let mut ys = vec![T::zero()];
    let mut series = vec![r_initial.to_vec()];
    let mut y = T::zero();
    let mut steps = 0usize;
    let mut status = RunStatus::Completed;
    let eps = cfg.y_end * T::lit(1e-12);

    'run: while cfg.y_end - y > eps {
        let mut mu = Vec::with_capacity(nx);
        for i in 0..nx {
            match closure.velocities(&point(&r, i)) {
                Ok(m) if m.iter().all(|v| v.is_finite()) => mu.push(m),
                Ok(_) => {
                    status = RunStatus::Halted { y, cause: HaltReason::NonFinite };
                    break 'run;
                }
                Err(e) => {
                    status = RunStatus::Halted {
                        y,
                        cause: HaltReason::Degenerate { detail: e.to_string() },
                    };
                    break 'run;
                }
            }
        }
        let speed = mu.iter().flatten().fold(T::zero(), |m, v| m.max(v.abs()));
        let dy = if speed > T::zero() {
            balanced_step(cfg.cfl * grid.dx / speed, cfg.y_end - y)
        } else {
            cfg.y_end - y
        };
        let mut next = r.clone();
        for k in 0..n {
            for i in 0..nx {
                let m = mu[i][k];
                let off = if m > T::zero() { 1 } else { -1 };
                let Some(j) = neighbour(i, off, nx, grid.periodic) else { continue };
                let slope = (r[k][j] - r[k][i]) / grid.dx * T::lit(off as f64);
                next[k][i] = r[k][i] + dy * m * slope;
            }
        }
        if next.iter().flatten().any(|v| !v.is_finite()) {
            status = RunStatus::Halted { y, cause: HaltReason::NonFinite };
            break;
        }
        let grad = max_gradient(grid, &next);
        if grad > threshold {
            status = RunStatus::Halted {
                y,
                cause: HaltReason::GradientCatastrophe {
                    max_gradient: grad.as_f64(),
                    threshold: threshold.as_f64(),
                },
            };
            break;
        }
        r = next;
        y += dy;
        steps += 1;
        if steps % cfg.output_every == 0 || cfg.y_end - y <= eps {
            ys.push(y);
            series.push(to_fields(&r)?);
        }
    }
    if !status.is_completed() && *ys.last().expect("non-empty") < y {
        ys.push(y);
        series.push(to_fields(&r)?);
    }
    Ok(DiagonalOutcome {
        ys,
        series,
        status,
        steps,
    })
}

/// One output layer of the conservation diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationEntry<T> {
    pub y: T,
    /// `∫ a dx`.
    pub mass: T,
    /// `∫ B⁰ a^{3/2} dx`.
    pub second_density: T,
    /// `max |a_y − (2 a^{1/2} B⁰)_x|`.
    pub first_flux_residual: Option<T>,
    /// `max |(B⁰a^{3/2})_y − (a(3/2 (B⁰)² + B¹ + (N−1)/2))_x|`.
    pub second_flux_residual: Option<T>,
    /// Max-norm moment-chain residuals for `k = 0, 1, 2`.
    pub moment_chain: Option<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConservationReport<T> {
    pub entries: Vec<ConservationEntry<T>>,
}

pub const REPORT_MOMENTS: usize = 2;

impl<T: Scalar> ConservationReport<T> {
    /// Flux residuals need at least three layers; with fewer they are `None`.
    pub fn from_series(ys: &[T], snaps: &[HydroSnapshot<T>]) -> Result<Self> {
        let layered = snaps.len() >= 3;
        let chain = if layered {
            Some(moment_chain_layers(ys, snaps, REPORT_MOMENTS)?)
        } else {
            None
        };
        let (first, second) = if layered {
            flux_residuals(ys, snaps)?
        } else {
            (vec![], vec![])
        };
        let entries = snaps
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let (mass, second_density) = conserved_integrals(s)?;
                Ok(ConservationEntry {
                    y: ys[j],
                    mass,
                    second_density,
                    first_flux_residual: first.get(j).copied(),
                    second_flux_residual: second.get(j).copied(),
                    moment_chain: chain.as_ref().map(|c| c[j].clone()),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { entries })
    }

    /// Largest `|I(y) − I(0)|` for the two conserved integrals.
    pub fn drift(&self) -> (T, T) {
        let first = &self.entries[0];
        self.entries.iter().fold((T::zero(), T::zero()), |(m, s), e| {
            (
                m.max((e.mass - first.mass).abs()),
                s.max((e.second_density - first.second_density).abs()),
            )
        })
    }
}

/// `(∫ a dx, ∫ B⁰ a^{3/2} dx)`.
pub fn conserved_integrals<T: Scalar>(s: &HydroSnapshot<T>) -> Result<(T, T)> {
    let density = (0..s.len())
        .map(|i| {
            let (a, b) = s.point(i);
            let b0: T = b.iter().copied().sum();
            b0 * a * a.sqrt()
        })
        .collect();
    Ok((s.a().integral(), ScalarField1D::new(s.grid(), density)?.integral()))
}

/// `∂_y` of `layers[·][i]` at layer `j`, from the three-layer stencil around `j`.
fn y_derivative<T: Scalar>(ys: &[T], layers: &[Vec<T>], j: usize, i: usize) -> T {
    let start = j.saturating_sub(1).min(ys.len() - 3);
    let vals = [layers[start][i], layers[start + 1][i], layers[start + 2][i]];
    derivative_nonuniform(&ys[start..start + 3], &vals, j - start)
}

fn flux_residuals<T: Scalar>(ys: &[T], snaps: &[HydroSnapshot<T>]) -> Result<(Vec<T>, Vec<T>)> {
    check_series(ys, snaps)?;
    let grid = snaps[0].grid();
    let half_nm1 = T::from_usize_lossy(snaps[0].degree() - 1) * T::lit(0.5);
    let mut dens1 = Vec::new();
    let mut dens2 = Vec::new();
    let mut flux1 = Vec::new();
    let mut flux2 = Vec::new();
    for s in snaps {
        let (mut d1, mut d2, mut f1, mut f2) = (vec![], vec![], vec![], vec![]);
        for i in 0..s.len() {
            let (a, b) = s.point(i);
            let bm = moments(&b, 1);
            d1.push(a);
            f1.push(T::lit(2.0) * a.sqrt() * bm[0]);
            d2.push(bm[0] * a * a.sqrt());
            f2.push(a * (T::lit(1.5) * bm[0] * bm[0] + bm[1] + half_nm1));
        }
        let dx = |v: Vec<T>| -> Result<Vec<T>> { Ok(partial1d(&ScalarField1D::new(grid, v)?).into_values()) };
        flux1.push(dx(f1)?);
        flux2.push(dx(f2)?);
        dens1.push(d1);
        dens2.push(d2);
    }
    let residual = |dens: &[Vec<T>], flux_x: &[Vec<T>]| -> Vec<T> {
        (0..snaps.len())
            .map(|j| {
                (0..grid.nx)
                    .map(|i| (y_derivative(ys, dens, j, i) - flux_x[j][i]).abs())
                    .fold(T::zero(), |m, v| m.max(v))
            })
            .collect()
    };
    Ok((residual(&dens1, &flux1), residual(&dens2, &flux2)))
}

fn y_derivative_k<T: Scalar>(ys: &[T], moms: &[Vec<Vec<T>>], k: usize, j: usize, i: usize) -> T {
    let start = j.saturating_sub(1).min(ys.len() - 3);
    let vals = [moms[start][k][i], moms[start + 1][k][i], moms[start + 2][k][i]];
    derivative_nonuniform(&ys[start..start + 3], &vals, j - start)
}

/// Per-layer, per-`k` max-norm residuals of the moment chain
///
/// ```text
/// B⁰_y = A B¹_x − (N−1 + 2B¹) A_x
/// Bᵏ_y = A Bᵏ⁺¹_x − (k Bᵏ⁻¹ + (k+2) Bᵏ⁺¹) A_x,   k ≥ 1,
/// ```
///
/// with `A = a^{-1/2}`.
pub fn moment_chain_layers<T: Scalar>(ys: &[T], snaps: &[HydroSnapshot<T>], kmax: usize) -> Result<Vec<Vec<T>>> {
    check_series(ys, snaps)?;
    let grid = snaps[0].grid();
    let nm1 = T::from_usize_lossy(snaps[0].degree() - 1);
    // moms[j][k][i]
    let moms: Vec<Vec<Vec<T>>> = snaps
        .iter()
        .map(|s| {
            let per_point: Vec<Vec<T>> = (0..s.len()).map(|i| moments(&s.point(i).1, kmax + 1)).collect();
            (0..=kmax + 1).map(|k| per_point.iter().map(|m| m[k]).collect()).collect()
        })
        .collect();
    snaps
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let inv = s.a().map(|a| a.sqrt().recip())?;
            let inv_x = partial1d(&inv);
            let m = &moms[j];
            (0..=kmax)
                .map(|k| {
                    let next_x = partial1d(&ScalarField1D::new(grid, m[k + 1].clone())?);
                    let worst = (0..grid.nx)
                        .map(|i| {
                            let coef = if k == 0 {
                                nm1 + T::lit(2.0) * m[1][i]
                            } else {
                                T::from_usize_lossy(k) * m[k - 1][i] + T::from_usize_lossy(k + 2) * m[k + 1][i]
                            };
                            let by = y_derivative_k(ys, &moms, k, j, i);
                            (by - inv.values()[i] * next_x.values()[i] + coef * inv_x.values()[i]).abs()
                        })
                        .fold(T::zero(), |acc, v| acc.max(v));
                    Ok(worst)
                })
                .collect()
        })
        .collect()
}

/// Max over the series of the moment-chain residual, for `k = 0..=kmax`.
pub fn moment_chain_residual<T: Scalar>(ys: &[T], snaps: &[HydroSnapshot<T>], kmax: usize) -> Result<Vec<T>> {
    let layers = moment_chain_layers(ys, snaps, kmax)?;
    Ok((0..=kmax)
        .map(|k| layers.iter().map(|l| l[k]).fold(T::zero(), |m, v| m.max(v)))
        .collect())
}
