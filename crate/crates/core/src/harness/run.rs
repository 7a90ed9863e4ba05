//! Experiment runners and the summary bundle.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::{self, File};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::rng::{mix, CounterRng};
use super::scenario::{Experiment, InitialSpec, RegimeKind, Scenario};
use crate::coercivity::{coercivity_audit, dissipation_moving, dissipation_rigid, neumann_gap, AuditReport};
use crate::decay::{envelope_moving, envelope_report, envelope_rigid, DecaySeries, EnvelopeReport, MovingEnvelope, SeriesMeta, Window};
use crate::eigen1d::{dense_rayleigh_minimum, eigenvalue_lower_bound, principal_eigenvalue};
use crate::equilibrium::{equilibrium_gradient, Beta, BoundaryCoefficients};
use crate::geometry::{compute_geometry, single_mode_surface, GeometryTensors, SlabGrid, SurfaceFunction};
use crate::io::{write_grid_function, write_labelled_table, write_table};
use crate::moving_sim::{energy_ledger_moving, manufacture_flow, surface_norms, weighted_mean, MovingSolver, MovingState};
use crate::rigid_sim::{energy_ledger_rigid, RigidSolver, ScalarState, VelocityField};
use crate::{Field3, Result, SlabError};

/// Everything a run reports besides its CSV files.
#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub name: String,
    pub experiment: String,
    pub regime: RegimeKind,
    /// False iff a decay envelope, bound or audit gate failed.
    pub pass: bool,
    pub envelope: Option<EnvelopeReport>,
    pub metrics: BTreeMap<String, f64>,
    pub flags: BTreeMap<String, bool>,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
    pub runtime_seconds: f64,
    pub config: Scenario,
}

impl Summary {
    fn new(s: &Scenario) -> Self {
        Self {
            name: s.name.clone(),
            experiment: s.experiment.label().to_string(),
            regime: s.regime,
            pass: true,
            envelope: None,
            metrics: BTreeMap::new(),
            flags: BTreeMap::new(),
            warnings: Vec::new(),
            files: Vec::new(),
            runtime_seconds: 0.0,
            config: s.clone(),
        }
    }

    fn metric(&mut self, key: &str, v: f64) {
        self.metrics.insert(key.to_string(), v);
    }

    fn flag(&mut self, key: &str, v: bool) {
        self.flags.insert(key.to_string(), v);
    }
}

/// Process exit status: 0 pass, 1 gate failure, 2 configuration, 3 numerical failure.
pub fn exit_code(r: &Result<Summary>) -> i32 {
    match r {
        Ok(s) if s.pass => 0,
        Ok(_) => 1,
        Err(e) => error_code(e),
    }
}

pub fn error_code(e: &SlabError) -> i32 {
    match e {
        SlabError::NonFinite(_) | SlabError::Geometry { .. } | SlabError::Smallness(_) | SlabError::Stability { .. } | SlabError::Bracket(_) => 3,
        _ => 2,
    }
}

fn wall_factor(bc: &BoundaryCoefficients, x3: f64, d: f64) -> f64 {
    let mut f = 1.0;
    if bc.beta_plus.is_infinite() {
        f *= -x3 / d;
    }
    if bc.beta_minus.is_infinite() {
        f *= (x3 + d) / d;
    }
    f
}

/// Random field of low modes vanishing on Dirichlet walls, scaled to unit `L²` norm.
pub fn random_band_limited(grid: &SlabGrid, bc: &BoundaryCoefficients, seed: u64, horizontal: u32, vertical: u32) -> Field3 {
    let mut rng = CounterRng::new(seed);
    let (l1, l2, d) = (grid.domain.l1, grid.domain.l2, grid.depth());
    let m1_max = (horizontal as usize).min((grid.n1.max(2) - 1) / 2);
    let m2_max = (horizontal as usize).min((grid.n2.max(2) - 1) / 2);
    let mut terms = Vec::new();
    for m1 in 0..=m1_max {
        for m2 in 0..=m2_max {
            for p in 0..vertical {
                let a = rng.next_signed();
                let p1 = 2.0 * PI * rng.next_f64();
                let p2 = 2.0 * PI * rng.next_f64();
                terms.push((m1 as f64, m2 as f64, p as f64, a, p1, p2));
            }
        }
    }
    let f = grid.field_from_fn(|x1, x2, x3| {
        let s: f64 = terms
            .iter()
            .map(|&(m1, m2, p, a, p1, p2)| {
                a * (2.0 * PI * m1 * x1 / l1 + p1).cos() * (2.0 * PI * m2 * x2 / l2 + p2).cos() * (p * PI * (x3 + d) / d).cos()
            })
            .sum();
        s * wall_factor(bc, x3, d)
    });
    let n = grid.l2_norm(&f);
    if n > 0.0 {
        f / n
    } else {
        f
    }
}

/// Initial deviation `w₀` for the scenario's preset.
pub fn initial_deviation(s: &Scenario, grid: &SlabGrid, bc: &BoundaryCoefficients) -> Result<Field3> {
    let (l1, l2) = (grid.domain.l1, grid.domain.l2);
    match s.initial {
        InitialSpec::Equilibrium => Ok(grid.zeros()),
        InitialSpec::VerticalEigenmode { amplitude, horizontal_mode: (m1, m2) } => {
            let e = principal_eigenvalue(bc)?;
            Ok(grid.field_from_fn(|x1, x2, x3| {
                amplitude * e.zeta(x3) * (2.0 * PI * (m1 as f64 * x1 / l1 + m2 as f64 * x2 / l2)).cos()
            }))
        }
        InitialSpec::RandomBandLimited { horizontal_modes, vertical_modes, amplitude, .. } => {
            Ok(random_band_limited(grid, bc, s.initial_seed(), horizontal_modes, vertical_modes) * amplitude)
        }
        InitialSpec::Spreading { sigma, amplitude } => {
            let d = grid.depth();
            Ok(grid.field_from_fn(|x1, _, x3| {
                let y = x1 / l1 - 0.5;
                amplitude * (-y * y / (2.0 * sigma * sigma)).exp() * wall_factor(bc, x3, d)
            }))
        }
    }
}

/// Recorded samples of one trajectory.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    pub series: DecaySeries,
    /// Second forcing profile (`h`) for the squared moving envelope.
    pub forcing_h: Vec<f64>,
    pub max_residual: f64,
    pub mean_drift: Option<f64>,
    pub final_state: Field3,
    pub initial_norm: f64,
}

fn should_record(n: usize, steps: usize, stride: usize) -> bool {
    n % stride == 0 || n == steps
}

fn relative_drift(m0: f64, m1: f64, scale: f64) -> f64 {
    (m1 - m0).abs() / m0.abs().max(scale).max(1e-300)
}

pub fn rigid_trajectory(s: &Scenario, grid: &SlabGrid) -> Result<Trajectory> {
    let bc = s.boundary()?;
    let family = s.velocity.rigid_family();
    let manufactured = match family {
        None => Some(manufacture_flow(s.velocity.flow_params().expect("manufactured family"), grid)?),
        Some(_) => None,
    };
    let u: &dyn VelocityField = match (&family, &manufactured) {
        (Some(f), _) => f,
        (None, Some(m)) => m,
        _ => unreachable!(),
    };
    let w0 = initial_deviation(s, grid, &bc)?;
    let mut state = ScalarState::from_deviation(*grid, bc, s.physics.constant, w0, 0.0)?;
    let solver = RigidSolver::new(grid, &bc)?;
    let flat = GeometryTensors::flat(grid);
    let neumann = bc.is_neumann();
    let volume = grid.domain.area() * grid.depth();
    let decay_norm = |st: &ScalarState| {
        if neumann {
            let m = grid.integrate(&st.w) / volume;
            grid.l2_norm(&st.w.mapv(|v| v - m))
        } else {
            st.norm()
        }
    };
    let (steps, dt, stride) = (s.run.steps(), s.run.dt, s.run.stride);
    let mean0 = grid.integrate(&state.w);
    let scale = state.norm() * volume.sqrt();
    let initial_norm = decay_norm(&state);
    let (mut times, mut norms, mut forcing) = (Vec::new(), Vec::new(), Vec::new());
    let mut rows = Vec::new();
    let d0 = dissipation_rigid(&state.w, &bc, grid)?.value;
    let g0 = u.forcing_bound(0.0, grid, &flat)?;
    rows.push(vec![0.0, state.norm(), initial_norm, state.energy(), d0, 0.0, 0.0, mean0, g0]);
    times.push(0.0);
    norms.push(initial_norm);
    forcing.push(g0);
    let mut max_residual = 0.0f64;
    for n in 1..=steps {
        let next = solver.step(&state, u, dt)?;
        let rep = energy_ledger_rigid(&state, &next, u, dt)?;
        max_residual = max_residual.max(rep.residual.abs());
        state = next;
        if should_record(n, steps, stride) {
            let g = u.forcing_bound(state.t, grid, &flat)?;
            let dn = decay_norm(&state);
            rows.push(vec![state.t, rep.norm, dn, rep.energy, rep.dissipation, rep.rhs, rep.residual, rep.mean, g]);
            times.push(state.t);
            norms.push(dn);
            forcing.push(g);
        }
    }
    let mean_drift = neumann.then(|| relative_drift(mean0, grid.integrate(&state.w), scale));
    let mu_floor = if neumann { neumann_gap(&grid.domain, bc.kappa).value } else { principal_eigenvalue(&bc)?.mu };
    let meta = SeriesMeta { mu_floor, c0: 1.0, c1: 1.0 };
    Ok(Trajectory {
        headers: vec!["t", "norm", "decay_norm", "energy", "dissipation", "rhs", "residual", "mean", "forcing"],
        rows,
        series: DecaySeries::new(times, norms, forcing, meta)?,
        forcing_h: Vec::new(),
        max_residual,
        mean_drift,
        final_state: state.w,
        initial_norm,
    })
}

pub fn moving_trajectory(s: &Scenario, grid: &SlabGrid) -> Result<Trajectory> {
    let bc = s.boundary()?;
    let params = s.velocity.flow_params().ok_or_else(|| SlabError::Config("velocity: no kinematic surface law".into()))?;
    let flow = manufacture_flow(params, grid)?;
    let w0 = initial_deviation(s, grid, &bc)?;
    let scalar = ScalarState::from_deviation(*grid, bc, s.physics.constant, w0, 0.0)?;
    let eta = single_mode_surface(grid, s.surface.amplitude, s.surface.mode);
    let mut state = MovingState::new(scalar, eta, &flow)?;
    if state.flagged {
        return Err(SlabError::Smallness(format!("initial surface: {:?}", state.bounds.smallness)));
    }
    let solver = MovingSolver::new(grid);
    let spec = grid.spectral();
    let neumann = bc.is_neumann();
    let decay_norm = |st: &MovingState| if neumann { st.centered_weighted_norm() } else { st.weighted_norm() };
    let forcings = |st: &MovingState| -> Result<(f64, f64)> {
        let u = flow.sample(st.t(), grid, &st.geometry)?.l2_norm;
        let rate = st.surface.dt_eta.as_ref().map(|r| surface_norms(r, grid, &spec).l2).unwrap_or(0.0);
        let e = surface_norms(&st.surface.eta, grid, &spec);
        Ok((u + rate + e.grad_h12, u + rate + e.h32))
    };
    let (steps, dt, stride) = (s.run.steps(), s.run.dt, s.run.stride);
    let mean0 = if neumann { weighted_mean(&state).ok() } else { None };
    let scale = state.weighted_norm() * grid.integrate(&state.geometry.j).sqrt();
    let initial_norm = decay_norm(&state);
    let (mut times, mut norms, mut gs, mut hs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut rows = Vec::new();
    let (g0, h0) = forcings(&state)?;
    let m0 = dissipation_moving(&state.scalar.w, &bc, &state.geometry, grid)?.value;
    rows.push(vec![
        0.0,
        state.weighted_norm(),
        initial_norm,
        state.energy(),
        m0,
        0.0,
        0.0,
        0.0,
        mean0.unwrap_or(0.0),
        state.running.c0,
        state.running.c1,
        state.surface.sup_norm(),
        g0,
        h0,
    ]);
    times.push(0.0);
    norms.push(initial_norm);
    gs.push(g0);
    hs.push(h0);
    let mut max_residual = 0.0f64;
    for n in 1..=steps {
        let next = solver.step(&state, &flow, dt)?;
        let rep = energy_ledger_moving(&state, &next, &flow, dt)?;
        max_residual = max_residual.max(rep.residual.abs());
        state = next;
        if should_record(n, steps, stride) {
            let (g, h) = forcings(&state)?;
            let dn = decay_norm(&state);
            let m = if neumann { weighted_mean(&state)? } else { 0.0 };
            rows.push(vec![
                state.t(),
                rep.norm,
                dn,
                rep.energy,
                rep.dissipation,
                rep.rhs1,
                rep.rhs2,
                rep.residual,
                m,
                rep.c0,
                rep.c1,
                rep.eta_sup,
                g,
                h,
            ]);
            times.push(state.t());
            norms.push(dn);
            gs.push(g);
            hs.push(h);
        }
    }
    let mean_drift = match mean0 {
        Some(m0) => Some(relative_drift(m0, weighted_mean(&state)?, scale)),
        None => None,
    };
    let mu_floor = if neumann { neumann_gap(&grid.domain, bc.kappa).value } else { principal_eigenvalue(&bc)?.mu };
    let meta = SeriesMeta { mu_floor, c0: state.running.c0, c1: state.running.c1 };
    Ok(Trajectory {
        headers: vec![
            "t",
            "weighted_norm",
            "decay_norm",
            "energy",
            "dissipation",
            "rhs_bulk",
            "rhs_surface",
            "residual",
            "weighted_mean",
            "c0",
            "c1",
            "eta_sup",
            "forcing_g",
            "forcing_h",
        ],
        rows,
        series: DecaySeries::new(times, norms, gs, meta)?,
        forcing_h: hs,
        max_residual,
        mean_drift,
        final_state: state.scalar.w,
        initial_norm,
    })
}

pub fn trajectory(s: &Scenario, grid: &SlabGrid) -> Result<Trajectory> {
    match s.regime {
        RegimeKind::Rigid => rigid_trajectory(s, grid),
        RegimeKind::Moving => moving_trajectory(s, grid),
    }
}

/// Envelope gate matching the scenario's regime; `None` when no decay statement applies.
pub fn trajectory_envelope(s: &Scenario, grid: &SlabGrid, tr: &Trajectory) -> Result<Option<EnvelopeReport>> {
    let bc = s.boundary()?;
    let window = Window::LatterFraction(s.run.fit_fraction);
    let series = &tr.series;
    let times = &series.times;
    let proxy = grid.domain.is_proxy();
    let grad = equilibrium_gradient(&bc);
    let (case, env) = match (s.regime, bc.is_neumann()) {
        (_, true) if proxy => return Ok(None),
        (RegimeKind::Rigid, true) => {
            ("rigid_insulated", envelope_rigid(tr.initial_norm, series.meta.mu_floor, 0.0, &[], times)?)
        }
        (RegimeKind::Rigid, false) => ("rigid", envelope_rigid(tr.initial_norm, series.meta.mu_floor, grad, &series.forcing, times)?),
        (RegimeKind::Moving, true) => {
            let kind = MovingEnvelope::NeumannPeriodic {
                c0: series.meta.c0,
                c1: series.meta.c1,
                gap: series.meta.mu_floor,
                initial_norm: tr.initial_norm,
            };
            ("moving_insulated", envelope_moving(&kind, times)?)
        }
        (RegimeKind::Moving, false) if bc.beta_plus.is_infinite() => {
            let kind = MovingEnvelope::DirichletTop {
                c0: series.meta.c0,
                mu: series.meta.mu_floor,
                grad_eq: grad,
                g: &series.forcing,
                initial_norm: tr.initial_norm,
            };
            ("moving_conducting_top", envelope_moving(&kind, times)?)
        }
        (RegimeKind::Moving, false) => {
            let p = crate::equilibrium::equilibrium_profile(&bc, s.physics.constant);
            let kind = MovingEnvelope::General {
                c0: series.meta.c0,
                mu: series.meta.mu_floor,
                grad_eq: grad,
                beta_plus: bc.beta_plus.value(),
                contrast: (bc.theta_bar - p.top()).abs(),
                h: &tr.forcing_h,
                initial_norm_sq: tr.initial_norm * tr.initial_norm,
            };
            ("moving_robin_top", envelope_moving(&kind, times)?)
        }
    };
    Ok(Some(envelope_report(case, series, &env, window)?))
}

fn beta_label(b: Beta) -> String {
    match b {
        Beta::Finite(v) => v.to_string(),
        Beta::Infinite => "inf".to_string(),
    }
}

fn beta_order(b: Beta) -> f64 {
    b.finite().unwrap_or(f64::INFINITY)
}

struct Output<'a> {
    dir: Option<&'a Path>,
    config: String,
}

impl Output<'_> {
    fn table(&self, sum: &mut Summary, file: &str, headers: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        if let Some(dir) = self.dir {
            write_table(&dir.join(file), &self.config, headers, rows)?;
            sum.files.push(file.to_string());
        }
        Ok(())
    }

    fn labelled(&self, sum: &mut Summary, file: &str, headers: &[&str], rows: &[Vec<String>]) -> Result<()> {
        if let Some(dir) = self.dir {
            write_labelled_table(&dir.join(file), &self.config, headers, rows)?;
            sum.files.push(file.to_string());
        }
        Ok(())
    }
}

fn run_trajectory(s: &Scenario, out: &Output, sum: &mut Summary, gates_only: bool) -> Result<()> {
    let grid = s.slab_grid()?;
    let tr = trajectory(s, &grid)?;
    sum.metric("max_ledger_residual", tr.max_residual);
    sum.metric("initial_norm", tr.initial_norm);
    sum.metric("final_norm", *tr.series.norms.last().unwrap_or(&0.0));
    sum.metric("rate_floor_constant", tr.series.meta.mu_floor);
    if let Some(d) = tr.mean_drift {
        sum.metric("mean_drift", d);
    }
    if s.regime == RegimeKind::Moving {
        sum.metric("c0", tr.series.meta.c0);
        sum.metric("c1", tr.series.meta.c1);
    }
    if tr.initial_norm == 0.0 {
        sum.warnings.push("initial deviation is zero; no rate to fit".into());
    } else {
        match trajectory_envelope(s, &grid, &tr)? {
            Some(rep) => {
                sum.pass = rep.pass;
                sum.metric("fitted_rate", rep.fitted_rate);
                sum.metric("rate_floor", rep.rate_floor);
                sum.envelope = Some(rep);
            }
            None => {
                sum.warnings.push("insulated walls on a truncated box: no exponential decay statement, rate reported only".into());
                let fit = crate::decay::fit_decay_rate(&tr.series, Window::LatterFraction(s.run.fit_fraction))?;
                sum.metric("fitted_rate", fit.rate);
            }
        }
    }
    if grid.domain.is_proxy() {
        sum.warnings.push("truncated-infinite box: results describe a finite proxy".into());
    }
    if !gates_only {
        out.table(sum, "trajectory.csv", &tr.headers, &tr.rows)?;
        if let Some(dir) = out.dir {
            write_grid_function(File::create(dir.join("final_state.csv"))?, &grid, &tr.final_state)?;
            sum.files.push("final_state.csv".into());
        }
    }
    Ok(())
}

fn run_eigen_sweep(s: &Scenario, out: &Output, sum: &mut Summary, plus: &[Beta], minus: &[Beta], dense_nz: usize) -> Result<()> {
    let (kappa, depth, theta_bar) = (s.physics.kappa, s.domain.depth, s.physics.theta_bar);
    let points: Vec<(Beta, Beta)> = plus.iter().flat_map(|&p| minus.iter().map(move |&m| (p, m))).collect();
    let results: Vec<(Beta, Beta, f64, f64, f64)> = points
        .par_iter()
        .map(|&(p, m)| {
            let bc = BoundaryCoefficients::new(p, m, kappa, depth, theta_bar)?;
            let mu = principal_eigenvalue(&bc)?.mu;
            let bound = eigenvalue_lower_bound(&bc);
            let dense = if dense_nz > 0 && !(p.is_zero() && m.is_zero()) { dense_rayleigh_minimum(&bc, dense_nz)? } else { f64::NAN };
            Ok((p, m, mu, bound, dense))
        })
        .collect::<Result<_>>()?;
    let mut sorted = results.clone();
    sorted.sort_by(|a, b| beta_order(a.0).total_cmp(&beta_order(b.0)).then(beta_order(a.1).total_cmp(&beta_order(b.1))));
    let tol = 1e-12;
    let mut monotone = true;
    for a in &sorted {
        for b in &sorted {
            let dominated = beta_order(a.0) <= beta_order(b.0) && beta_order(a.1) <= beta_order(b.1);
            if dominated && a.2 > b.2 * (1.0 + tol) + tol {
                monotone = false;
            }
        }
    }
    let bounded = sorted.iter().all(|r| r.2 >= r.3 * (1.0 - tol) - tol);
    sum.flag("monotone", monotone);
    sum.flag("above_lower_bound", bounded);
    sum.pass = monotone && bounded;
    sum.metric("points", sorted.len() as f64);
    let rows: Vec<Vec<String>> = sorted
        .iter()
        .map(|r| vec![beta_label(r.0), beta_label(r.1), r.2.to_string(), r.3.to_string(), r.4.to_string()])
        .collect();
    out.labelled(sum, "sweep.csv", &["beta_plus", "beta_minus", "mu", "lower_bound", "dense_rayleigh"], &rows)
}

fn audit_field(s: &Scenario, grid: &SlabGrid, bc: &BoundaryCoefficients, g: Option<&GeometryTensors>, trial: usize) -> Field3 {
    let mut f = random_band_limited(grid, bc, mix(s.seed, trial as u64), 3, 4);
    if bc.is_neumann() {
        let m = match g {
            Some(g) => grid.inner(&f, &g.j) / grid.integrate(&g.j),
            None => grid.integrate(&f) / (grid.domain.area() * grid.depth()),
        };
        f.mapv_inplace(|v| v - m);
    }
    f
}

fn run_audit(s: &Scenario, out: &Output, sum: &mut Summary, trials: usize) -> Result<()> {
    let grid = s.slab_grid()?;
    let bc = s.boundary()?;
    let geometry = match s.regime {
        RegimeKind::Rigid => None,
        RegimeKind::Moving => {
            let eta = single_mode_surface(&grid, s.surface.amplitude, s.surface.mode);
            Some(compute_geometry(&SurfaceFunction::new(eta, 0.0), &grid)?)
        }
    };
    let reports: Vec<AuditReport> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let f = audit_field(s, &grid, &bc, geometry.as_ref(), t);
            coercivity_audit(&f, &bc, geometry.as_ref(), &grid)
        })
        .collect::<Result<_>>()?;
    let min_ratio = reports.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    sum.metric("min_ratio", min_ratio);
    sum.metric("floor", reports[0].floor);
    sum.metric("slack", reports[0].slack);
    sum.pass = reports.iter().all(|r| r.passes);
    if reports.iter().any(|r| r.proxy_warning) {
        sum.warnings.push("floor holds on the finite box only".into());
    }
    let rows: Vec<Vec<f64>> =
        reports.iter().enumerate().map(|(i, r)| vec![i as f64, r.ratio, r.floor, r.slack, f64::from(u8::from(r.passes))]).collect();
    out.table(sum, "audit.csv", &["trial", "ratio", "floor", "slack", "passes"], &rows)
}

fn run_refinement(s: &Scenario, out: &Output, sum: &mut Summary, levels: usize) -> Result<()> {
    let base = s.slab_grid()?;
    let mut grids = vec![base];
    for _ in 1..levels {
        let g = grids.last().expect("nonempty").refined();
        grids.push(g);
    }
    let residuals: Vec<f64> = grids
        .par_iter()
        .enumerate()
        .map(|(l, g)| {
            let mut sc = s.clone();
            sc.run.dt = s.run.dt / f64::powi(2.0, l as i32);
            sc.run.stride = usize::MAX;
            Ok(trajectory(&sc, g)?.max_residual)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut in_band = true;
    for (l, g) in grids.iter().enumerate() {
        let ratio = if l == 0 { f64::NAN } else { residuals[l - 1] / residuals[l] };
        if l > 0 && !(3.0..=5.0).contains(&ratio) {
            in_band = false;
        }
        rows.push(vec![l as f64, g.n1 as f64, g.n2 as f64, g.nz as f64, s.run.dt / f64::powi(2.0, l as i32), residuals[l], ratio]);
    }
    sum.flag("second_order", in_band);
    if let Some(r) = rows.last() {
        sum.metric("last_ratio", r[6]);
    }
    out.table(sum, "refinement.csv", &["level", "n1", "n2", "nz", "dt", "max_residual", "ratio"], &rows)
}

/// Runs the scenario's experiment; with `out` set, writes CSV tables,
/// `config.json` and `summary.json` into that directory.
pub fn run_experiment(s: &Scenario, out: Option<&Path>) -> Result<Summary> {
    run_with(s, out, false)
}

/// Gate-only run: no files, same pass flag.
pub fn check_experiment(s: &Scenario) -> Result<Summary> {
    run_with(s, None, true)
}

fn run_with(s: &Scenario, out: Option<&Path>, gates_only: bool) -> Result<Summary> {
    s.validate()?;
    let start = Instant::now();
    let config = s.resolved_json();
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
    }
    let output = Output { dir: out, config: config.clone() };
    let mut sum = Summary::new(s);
    match &s.experiment {
        Experiment::Trajectory | Experiment::EnvelopeCheck => {
            run_trajectory(s, &output, &mut sum, gates_only || s.experiment == Experiment::EnvelopeCheck)?
        }
        Experiment::EigenSweep { beta_plus, beta_minus, dense_nz } => {
            run_eigen_sweep(s, &output, &mut sum, beta_plus, beta_minus, *dense_nz)?
        }
        Experiment::CoercivityAudit { trials } => run_audit(s, &output, &mut sum, *trials)?,
        Experiment::RefinementStudy { levels } => run_refinement(s, &output, &mut sum, *levels)?,
    }
    sum.runtime_seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = out {
        fs::write(dir.join("config.json"), format!("{config}\n"))?;
        sum.files.push("config.json".into());
        sum.files.push("summary.json".into());
        let text = serde_json::to_string_pretty(&sum).map_err(|e| SlabError::Config(format!("summary: {e}")))?;
        fs::write(dir.join("summary.json"), text + "\n")?;
    }
    Ok(sum)
}
