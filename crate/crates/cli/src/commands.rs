use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use geohydro_core::bridge::{common_x1_range, reconstruct_series, x1_potential, Reconstruction, X1Potential};
use geohydro_core::fields::{Grid2D, ScalarField2D};
use geohydro_core::geodesic::{integrate_geodesic, GeodesicModel, PhaseState, Trajectory};
use geohydro_core::hydro::{evolve_uno, moment_chain_residual, EvolutionOutcome, REPORT_MOMENTS};
use geohydro_core::integrability::{bracket_equivalence, build_raz, parse_mask, raz_residual};
use geohydro_core::momenta::{Coeff, HamiltonianForm, MomentaPolynomial};
use geohydro_core::pipeline::{chebyshev_metric_from_series, ChebyshevMetric, MetricSummary};
use geohydro_core::riemann::{invariants_and_velocities, liouville_residual, HydroSnapshot};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::{RunConfig, Thresholds};
use crate::output::{find_field, read_field, row, Output};
use crate::CliError;

pub fn derive(out: &Output, degree: usize, zero: Option<&str>) -> Result<(), CliError> {
    let mask = parse_mask(zero.unwrap_or(""))?;
    let sys = build_raz(degree, &mask)?;
    let doc = sys.to_json();
    out.say(&sys);
    out.say(serde_json::to_string_pretty(&doc).map_err(geohydro_core::Error::from)?);
    out.json("system.json", &doc)
}

pub fn verify(out: &Output, fields: &Path, degree: usize, zero: Option<&str>) -> Result<(), CliError> {
    let mask = parse_mask(zero.unwrap_or(""))?;
    let sys = build_raz(degree, &mask)?;
    let load = |name: &str| {
        find_field(fields, name)
            .ok_or_else(|| CliError::Input(format!("missing field {name}.csv in {}", fields.display())))
            .and_then(|p| read_field(&p))
    };
    let g12 = load("g12")?;
    let mut a = BTreeMap::new();
    for k in sys.unknowns() {
        a.insert(k, Coeff::Field(load(&format!("a_{k}"))?));
    }
    let residuals = raz_residual(&sys, &a, &g12)?;
    let eq = bracket_equivalence(degree, &mask, &a, &g12)?;
    let mut items = Vec::new();
    for (k, r) in &residuals {
        out.field(&format!("residual_{k}.csv"), r)?;
        items.push(json!({ "k": k, "max_abs": r.max_abs(), "interior_max_abs": interior_max(r) }));
        out.say(format_args!("equation k={k}: max |residual| = {:e}", r.max_abs()));
    }
    out.say(format_args!("bracket equivalence: relative discrepancy {:e}", eq.relative));
    out.json(
        "verify.json",
        &json!({
            "degree": degree,
            "zero_mask": mask,
            "grid": g12.grid,
            "residuals": items,
            "bracket_equivalence": { "absolute": eq.absolute, "relative": eq.relative },
        }),
    )
}

fn interior_max(f: &ScalarField2D<f64>) -> f64 {
    let g = f.grid;
    let (i0, i1) = if g.periodic_x { (0, g.nx) } else { (2, g.nx.saturating_sub(2)) };
    let (j0, j1) = if g.periodic_y { (0, g.ny) } else { (2, g.ny.saturating_sub(2)) };
    let mut m = 0f64;
    for j in j0..j1 {
        for i in i0..i1 {
            m = m.max(f.at(i, j).abs());
        }
    }
    m
}

#[derive(Serialize)]
struct EvolutionSummary {
    status: Value,
    steps: usize,
    layers: usize,
    y_final: f64,
    mass_drift: f64,
    second_drift: f64,
    first_flux_residual_max: f64,
    second_flux_residual_max: f64,
    moment_chain_max: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    thresholds: Option<Thresholds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    within_thresholds: Option<bool>,
}

fn summarize(run: &EvolutionOutcome<f64>, thresholds: Option<Thresholds>) -> Result<EvolutionSummary, CliError> {
    let (mass_drift, second_drift) = run.report.drift();
    let fold = |f: &dyn Fn(&geohydro_core::hydro::ConservationEntry<f64>) -> Option<f64>| {
        run.report.entries.iter().filter_map(f).fold(0f64, f64::max)
    };
    let moment_chain_max = if run.ys.len() >= 3 {
        moment_chain_residual(&run.ys, &run.snapshots, REPORT_MOMENTS)?
    } else {
        vec![0.0; REPORT_MOMENTS + 1]
    };
    Ok(EvolutionSummary {
        status: serde_json::to_value(&run.status).map_err(geohydro_core::Error::from)?,
        steps: run.steps,
        layers: run.ys.len(),
        y_final: *run.ys.last().unwrap_or(&0.0),
        mass_drift,
        second_drift,
        first_flux_residual_max: fold(&|e| e.first_flux_residual),
        second_flux_residual_max: fold(&|e| e.second_flux_residual),
        moment_chain_max,
        thresholds,
        within_thresholds: thresholds.map(|t| mass_drift <= t.mass_drift && second_drift <= t.second_drift),
    })
}

fn write_snapshots(out: &Output, ys: &[f64], snaps: &[HydroSnapshot<f64>]) -> Result<(), CliError> {
    let n = snaps.first().map_or(1, |s| s.degree());
    let mut header = vec!["layer".to_string(), "y".into(), "x".into(), "a".into()];
    header.extend((1..n).map(|m| format!("b_{m}")));
    let mut w = out.csv("snapshots.csv", &header)?;
    for (l, (y, s)) in ys.iter().zip(snaps).enumerate() {
        let grid = s.grid();
        for i in 0..s.len() {
            let (a, b) = s.point(i);
            let mut r = vec![l.to_string()];
            r.extend(row([*y, grid.coord(i), a]));
            r.extend(row(b));
            w.write_record(&r).map_err(geohydro_core::Error::from)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn halted(run: &EvolutionOutcome<f64>) -> Option<CliError> {
    (!run.status.is_completed()).then(|| {
        CliError::Numerical(format!(
            "evolution halted: {}",
            serde_json::to_string(&run.status).unwrap_or_default()
        ))
    })
}

pub fn evolve(out: &Output, cfg: &RunConfig, base: &Path) -> Result<(), CliError> {
    let initial = cfg.initial_state(base)?;
    let run = evolve_uno(&initial, &cfg.evolution()?)?;
    write_snapshots(out, &run.ys, &run.snapshots)?;
    let summary = summarize(&run, cfg.thresholds)?;
    out.json(
        "report.json",
        &json!({
            "degree": cfg.degree(),
            "evolution": summary,
            "conservation": run.report,
        }),
    )?;
    out.say(format_args!(
        "{} layers, y = {}, mass drift {:e}, second drift {:e}",
        summary.layers, summary.y_final, summary.mass_drift, summary.second_drift
    ));
    match halted(&run) {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct InvariantSummary {
    degree: usize,
    strictly_hyperbolic: bool,
    min_velocity_gap: f64,
    r_min: Vec<f64>,
    r_max: Vec<f64>,
}

fn invariant_summary(snap: &HydroSnapshot<f64>) -> Result<(InvariantSummary, geohydro_core::riemann::RiemannData<f64>), CliError> {
    let data = invariants_and_velocities(snap)?;
    let mut gap = f64::INFINITY;
    for i in 0..snap.len() {
        let mut mu: Vec<f64> = data.mu.iter().map(|m| m.values()[i]).collect();
        mu.sort_by(f64::total_cmp);
        for w in mu.windows(2) {
            gap = gap.min(w[1] - w[0]);
        }
    }
    let ext = |f: fn(f64, f64) -> f64, init: f64| -> Vec<f64> {
        data.r.iter().map(|r| r.values().iter().copied().fold(init, f)).collect()
    };
    Ok((
        InvariantSummary {
            degree: snap.degree(),
            strictly_hyperbolic: gap > 0.0,
            min_velocity_gap: gap,
            r_min: ext(f64::min, f64::INFINITY),
            r_max: ext(f64::max, f64::NEG_INFINITY),
        },
        data,
    ))
}

pub fn invariants(out: &Output, cfg: &RunConfig, base: &Path) -> Result<(), CliError> {
    let snap = cfg.initial_state(base)?;
    let (summary, data) = invariant_summary(&snap)?;
    let n = snap.degree();
    let mut header = vec!["x".to_string()];
    for name in ["q", "r", "mu"] {
        header.extend((1..=n).map(|k| format!("{name}_{k}")));
    }
    let mut w = out.csv("invariants.csv", &header)?;
    let grid = snap.grid();
    for i in 0..snap.len() {
        let mut vals = vec![grid.coord(i)];
        for set in [&data.q, &data.r, &data.mu] {
            vals.extend(set.iter().map(|f| f.values()[i]));
        }
        w.write_record(row(vals)).map_err(geohydro_core::Error::from)?;
    }
    w.flush()?;
    out.say(format_args!(
        "N = {n}: min velocity gap {:e}, strictly hyperbolic: {}",
        summary.min_velocity_gap, summary.strictly_hyperbolic
    ));
    out.json("invariants.json", &summary)
}

struct Chart {
    rec: Reconstruction<f64>,
    pot: X1Potential<f64>,
    metric: ChebyshevMetric<f64>,
}

fn build_chart(cfg: &RunConfig, run: &EvolutionOutcome<f64>) -> Result<Chart, CliError> {
    let spec = cfg.reconstruct.unwrap_or_default();
    let n = cfg.degree();
    if spec.root == 0 || spec.root >= n {
        return Err(CliError::Input(format!("reconstruct.root must lie in 1..={}", n - 1)));
    }
    let rec = reconstruct_series(&run.ys, &run.snapshots, spec.root)?;
    if rec.g12.max_abs() >= 1.0 {
        return Err(CliError::Numerical(format!("reconstructed |g12| = {} ≥ 1", rec.g12.max_abs())));
    }
    let pot = x1_potential(&rec.g12, &rec.a_last, spec.closedness_tol)?;
    if let Some(w) = &pot.warning {
        log::warn!("{w}");
    }
    let n1 = match spec.n1 {
        Some(n1) => n1,
        None => {
            let (lo, hi) = common_x1_range(&pot.x1)?;
            let dx = rec.g12.grid.dx;
            (((hi - lo) / dx).round() as usize + 1).clamp(8, 4 * rec.g12.grid.nx)
        }
    };
    let metric = chebyshev_metric_from_series(&run.ys, &run.snapshots, spec.root, n1, spec.closedness_tol)?;
    Ok(Chart { rec, pot, metric })
}

fn write_chart(out: &Output, chart: &Chart) -> Result<(), CliError> {
    let header: Vec<String> = ["layer", "y", "x", "g12", "a_last", "x1"].iter().map(|s| s.to_string()).collect();
    let mut w = out.csv("chart.csv", &header)?;
    let (g, a, x1) = (&chart.rec.g12, &chart.rec.a_last, &chart.pot.x1);
    for (l, &y) in g.ys().iter().enumerate() {
        for i in 0..g.grid.nx {
            let mut r = vec![l.to_string()];
            r.extend(row([y, g.grid.coord(i), g.at(l, i), a.at(l, i), x1.at(l, i)]));
            w.write_record(&r).map_err(geohydro_core::Error::from)?;
        }
    }
    w.flush()?;
    out.field("metric/g12.csv", &chart.metric.g12)?;
    for (k, f) in chart.metric.coeffs.iter().enumerate() {
        out.field(&format!("metric/a_{k}.csv"), f)?;
    }
    Ok(())
}

fn chart_report(cfg: &RunConfig, chart: &Chart, mask: &BTreeSet<usize>) -> Result<Value, CliError> {
    let m = &chart.metric;
    let raz = m.raz_residuals(mask)?;
    Ok(json!({
        "root": cfg.reconstruct.unwrap_or_default().root,
        "summary": MetricSummary::from(m),
        "warning": m.warning,
        "chebyshev_grid": m.grid,
        "masked_max": m.masked_max(mask),
        "raz_residuals": raz.iter().map(|(k, v)| json!({"k": k, "max_abs": v})).collect::<Vec<_>>(),
    }))
}

fn check_mask(cfg: &RunConfig) -> Result<BTreeSet<usize>, CliError> {
    let n = cfg.degree();
    let mask: BTreeSet<usize> = cfg.zero_mask.iter().copied().collect();
    build_raz(n, &mask)?;
    if mask.contains(&(n - 1)) {
        return Err(CliError::Input(format!("a_{} cannot vanish on a reconstructed metric", n - 1)));
    }
    Ok(mask)
}

pub fn reconstruct(out: &Output, cfg: &RunConfig, base: &Path) -> Result<(), CliError> {
    let mask = check_mask(cfg)?;
    let run = evolve_uno(&cfg.initial_state(base)?, &cfg.evolution()?)?;
    if let Some(e) = halted(&run) {
        return Err(e);
    }
    let chart = build_chart(cfg, &run)?;
    write_chart(out, &chart)?;
    let report = chart_report(cfg, &chart, &mask)?;
    out.say(format_args!(
        "closedness {:e}, max |g12| {}, metric written to {}",
        chart.metric.closedness_max,
        chart.metric.max_abs_g12,
        out.path("metric").display()
    ));
    out.json("reconstruct.json", &report)
}

#[derive(Serialize)]
struct TrajectorySummary {
    index: usize,
    steps: usize,
    exited: bool,
    h_drift: f64,
    f_drift: f64,
}

fn summarize_trajectory(index: usize, tr: &Trajectory<f64>) -> TrajectorySummary {
    TrajectorySummary {
        index,
        steps: tr.samples.len() - 1,
        exited: tr.exited,
        h_drift: tr.h_drift,
        f_drift: tr.f_drift,
    }
}

pub fn load_metric(dir: &Path) -> Result<(HamiltonianForm<f64>, Option<MomentaPolynomial<f64>>), CliError> {
    let g12 = find_field(dir, "g12")
        .ok_or_else(|| CliError::Input(format!("missing g12.csv in {}", dir.display())))
        .and_then(|p| read_field(&p))?;
    let mut coeffs = Vec::new();
    while let Some(p) = find_field(dir, &format!("a_{}", coeffs.len())) {
        let f = read_field(&p)?;
        if !f.grid.same_as(&g12.grid) {
            return Err(CliError::Input(format!("{} is not on the grid of g12", p.display())));
        }
        coeffs.push(Coeff::Field(f));
    }
    let h = HamiltonianForm::riemannian(g12)?;
    let f = match coeffs.len() {
        0 => None,
        1 | 2 => return Err(CliError::Input("an integral needs a_0..a_N with N ≥ 2".into())),
        _ => Some(MomentaPolynomial::new(coeffs)?),
    };
    Ok((h, f))
}

pub fn read_initial(path: &Path) -> Result<Vec<PhaseState<f64>>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| CliError::Input(e.to_string()))?.clone();
    let expected = ["x1", "x2", "p1", "p2"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(CliError::Input(format!("{}: header must be x1,x2,p1,p2", path.display())));
    }
    let mut states = Vec::new();
    for rec in rdr.deserialize::<[f64; 4]>() {
        let [x1, x2, p1, p2] = rec.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        states.push(PhaseState::new(x1, x2, p1, p2));
    }
    if states.is_empty() {
        return Err(CliError::Input(format!("{}: no initial conditions", path.display())));
    }
    Ok(states)
}

fn check_times(t_end: f64, dt: f64) -> Result<(), CliError> {
    if !(dt > 0.0 && t_end >= 0.0 && t_end.is_finite()) {
        return Err(CliError::Input(format!("need dt > 0 and t_end ≥ 0 (dt = {dt}, t_end = {t_end})")));
    }
    Ok(())
}

fn start_in_domain(model: &GeodesicModel<f64>, states: &[PhaseState<f64>]) -> Result<(), CliError> {
    match states.iter().position(|s| !model.in_domain(s)) {
        Some(i) => Err(CliError::Input(format!("initial condition {i} lies outside the metric's domain"))),
        None => Ok(()),
    }
}

pub fn geodesic(out: &Output, metric: &Path, initial: &Path, t_end: f64, dt: f64, every: usize) -> Result<(), CliError> {
    check_times(t_end, dt)?;
    let (h, f) = load_metric(metric)?;
    let model = GeodesicModel::new(&h, f.as_ref())?;
    let states = read_initial(initial)?;
    start_in_domain(&model, &states)?;
    let header: Vec<String> = ["t", "x1", "x2", "p1", "p2", "H", "f"].iter().map(|s| s.to_string()).collect();
    let mut summaries = Vec::new();
    for (i, s0) in states.into_iter().enumerate() {
        let tr = integrate_geodesic(&model, s0, t_end, dt)?;
        let mut w = out.csv(&format!("trajectory_{i}.csv"), &header)?;
        for s in tr.samples.iter().step_by(every.max(1)) {
            w.write_record(row([s.t, s.state.x1, s.state.x2, s.state.p1, s.state.p2, s.h, s.f]))
                .map_err(geohydro_core::Error::from)?;
        }
        w.flush()?;
        let sm = summarize_trajectory(i, &tr);
        out.say(format_args!(
            "trajectory {i}: {} steps, H drift {:e}, f drift {:e}{}",
            sm.steps,
            sm.h_drift,
            sm.f_drift,
            if sm.exited { " (left the domain)" } else { "" }
        ));
        summaries.push(sm);
    }
    out.json(
        "geodesic.json",
        &json!({ "t_end": t_end, "dt": dt, "has_integral": model.has_integral(), "trajectories": summaries }),
    )
}

/// `g12 + amplitude · Σ sin(2π(k·x¹/L₁ + l·x²/L₂) + φ)` with random `k, l, φ`.
fn perturbed(g12: &ScalarField2D<f64>, amplitude: f64, modes: usize, seed: u64) -> Result<ScalarField2D<f64>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g: Grid2D<f64> = g12.grid;
    let (l1, l2) = (g.dx * (g.nx - 1) as f64, g.dy * (g.ny - 1) as f64);
    let waves: Vec<(f64, f64, f64)> = (0..modes)
        .map(|_| {
            (
                rng.gen_range(1..=3) as f64,
                rng.gen_range(1..=3) as f64,
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let bump = ScalarField2D::from_fn(g, |x, y| {
        let (u, v) = ((x - g.x0) / l1, (y - g.y0) / l2);
        amplitude
            * waves
                .iter()
                .map(|(k, l, ph)| (std::f64::consts::TAU * (k * u + l * v) + ph).sin())
                .sum::<f64>()
    })?;
    Ok(g12.zip_with(&bump, |a, b| a + b)?)
}

/// Runs every stage, recording each into `report`; the first failure stops
/// the chain and is returned after the partial report has been stored.
pub fn pipeline(out: &Output, cfg: &RunConfig, base: &Path, seed: u64) -> Result<(), CliError> {
    let mut report = Map::new();
    report.insert("degree".into(), json!(cfg.degree()));
    report.insert("zero_mask".into(), json!(cfg.zero_mask));
    report.insert("seed".into(), json!(seed));
    let result = run_stages(out, cfg, base, seed, &mut report);
    let failure = result.as_ref().err().map(|e| e.to_string());
    report.insert("completed".into(), json!(failure.is_none()));
    report.insert("error".into(), json!(failure));
    out.json("report.json", &Value::Object(report))?;
    result
}

fn run_stages(out: &Output, cfg: &RunConfig, base: &Path, seed: u64, report: &mut Map<String, Value>) -> Result<(), CliError> {
    let mask = check_mask(cfg)?;
    let geo = cfg
        .geodesic
        .clone()
        .ok_or_else(|| CliError::Input("pipeline needs a `geodesic` section".into()))?;
    check_times(geo.t_end, geo.dt)?;
    let initial = cfg.initial_state(base)?;

    let run = evolve_uno(&initial, &cfg.evolution()?)?;
    write_snapshots(out, &run.ys, &run.snapshots)?;
    report.insert("evolution".into(), serde_json::to_value(summarize(&run, cfg.thresholds)?).unwrap());
    if let Some(e) = halted(&run) {
        return Err(e);
    }
    out.say(format_args!("evolution: {} layers", run.ys.len()));

    let (first, _) = invariant_summary(&initial)?;
    let (last, _) = invariant_summary(run.snapshots.last().unwrap())?;
    let liouville = [-1.0, 0.0, 1.0]
        .iter()
        .map(|&q| {
            liouville_residual(&run.ys, &run.snapshots, q)
                .map(|layers| layers.iter().map(|f| f.max_abs()).fold(0f64, f64::max))
        })
        .collect::<Result<Vec<_>, _>>()?;
    report.insert(
        "invariants".into(),
        json!({ "initial": first, "final": last, "liouville_max": liouville }),
    );

    let chart = build_chart(cfg, &run)?;
    write_chart(out, &chart)?;
    report.insert("reconstruction".into(), chart_report(cfg, &chart, &mask)?);
    let masked = chart.metric.masked_max(&mask);
    if masked > 1e-12 {
        return Err(CliError::Numerical(format!("zero mask not honoured: max |a_k| = {masked:e} on masked indices")));
    }
    out.say(format_args!("reconstruction: closedness {:e}", chart.metric.closedness_max));

    let model = chart.metric.geodesic_model()?;
    let states: Vec<PhaseState<f64>> = geo.initial.iter().map(|s| PhaseState::new(s[0], s[1], s[2], s[3])).collect();
    start_in_domain(&model, &states)?;
    let mut trajs = Vec::new();
    for (i, s0) in states.iter().enumerate() {
        trajs.push(summarize_trajectory(i, &integrate_geodesic(&model, *s0, geo.t_end, geo.dt)?));
    }
    let max_h = trajs.iter().map(|t| t.h_drift).fold(0f64, f64::max);
    let max_f = trajs.iter().map(|t| t.f_drift).fold(0f64, f64::max);
    out.say(format_args!("geodesics: max H drift {max_h:e}, max f drift {max_f:e}"));
    report.insert(
        "geodesic".into(),
        json!({ "t_end": geo.t_end, "dt": geo.dt, "max_h_drift": max_h, "max_f_drift": max_f, "trajectories": trajs }),
    );

    if let Some(c) = cfg.control {
        let g = perturbed(&chart.metric.g12, c.amplitude, c.modes, seed)?;
        let model = GeodesicModel::new(&HamiltonianForm::riemannian(g)?, Some(&chart.metric.integral()?))?;
        let drifts = states
            .iter()
            .map(|s0| integrate_geodesic(&model, *s0, geo.t_end, geo.dt).map(|t| t.f_drift))
            .collect::<Result<Vec<_>, _>>()?;
        report.insert("control".into(), json!({ "amplitude": c.amplitude, "modes": c.modes, "f_drift": drifts }));
    }
    Ok(())
}
