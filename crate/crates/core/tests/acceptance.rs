//! Acceptance suite: every criterion prints one PASS/FAIL line with its
//! measured quantities, then the test fails if any criterion failed.

use std::f64::consts::PI;
use std::time::Instant;

use slabscalar::coercivity::{neumann_gap, neumann_gap_discrete};
use slabscalar::decay::{check_envelope, envelope_moving, envelope_report, envelope_rigid, fit_rate, DecaySeries, MovingEnvelope, SeriesMeta, Window};
use slabscalar::eigen1d::{dense_rayleigh_minimum, eigenvalue_lower_bound, principal_eigenvalue};
use slabscalar::equilibrium::{equilibrium_gradient, Beta, BoundaryCoefficients};
use slabscalar::geometry::{compute_geometry, single_mode_surface, verify_geometric_identities, GeometryTensors, SlabDomain, SlabGrid, SurfaceFunction};
use slabscalar::harness::rng::CounterRng;
use slabscalar::harness::run::random_band_limited;
use slabscalar::moving_sim::{energy_ledger_moving, manufacture_flow, weighted_mean, FlowParams, ManufacturedFlow, MovingSolver, MovingState};
use slabscalar::rigid_sim::{energy_ledger_rigid, RigidSolver, ScalarState, VelocityFamily, VelocityField};
use slabscalar::Field3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn grid(l1: f64, l2: f64, d: f64, n1: usize, n2: usize, nz: usize) -> SlabGrid {
    SlabGrid::new(SlabDomain::periodic(l1, l2, d).unwrap(), n1, n2, nz).unwrap()
}

fn bc(bp: Beta, bm: Beta, kappa: f64, d: f64, theta_bar: f64) -> BoundaryCoefficients {
    BoundaryCoefficients::new(bp, bm, kappa, d, theta_bar).unwrap()
}

const INF: Beta = Beta::Infinite;

fn fin(v: f64) -> Beta {
    Beta::Finite(v)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn eigenmode(g: &SlabGrid, b: &BoundaryCoefficients) -> Field3 {
    let e = principal_eigenvalue(b).unwrap();
    g.field_from_fn(|_, _, x3| e.zeta(x3))
}

/// Rigid run recording `(t, ‖w‖, ‖u‖)` every `stride` steps plus the max ledger residual.
struct RigidRun {
    times: Vec<f64>,
    norms: Vec<f64>,
    forcing: Vec<f64>,
    max_residual: f64,
    states: Vec<ScalarState>,
}

fn run_rigid(state: ScalarState, u: &dyn VelocityField, dt: f64, steps: usize, stride: usize, centered: bool) -> RigidRun {
    let g = state.grid;
    let solver = RigidSolver::new(&g, &state.bc).unwrap();
    let flat = GeometryTensors::flat(&g);
    let vol = g.domain.area() * g.depth();
    let norm = |s: &ScalarState| {
        if centered {
            let m = g.integrate(&s.w) / vol;
            g.l2_norm(&s.w.mapv(|v| v - m))
        } else {
            s.norm()
        }
    };
    let mut run = RigidRun { times: vec![0.0], norms: vec![norm(&state)], forcing: vec![u.forcing_bound(0.0, &g, &flat).unwrap()], max_residual: 0.0, states: vec![state.clone()] };
    let mut s = state;
    for n in 1..=steps {
        let next = solver.step(&s, u, dt).unwrap();
        let rep = energy_ledger_rigid(&s, &next, u, dt).unwrap();
        run.max_residual = run.max_residual.max(rep.residual.abs());
        s = next;
        if n % stride == 0 || n == steps {
            run.times.push(s.t);
            run.norms.push(norm(&s));
            run.forcing.push(u.forcing_bound(s.t, &g, &flat).unwrap());
        }
    }
    run.states.push(s);
    run
}

fn c1_eigenvalue_closed_forms() -> Outcome {
    let (kappa, d) = (0.7, 1.3);
    let cases = [
        ((INF, INF), kappa * PI * PI / (d * d)),
        ((INF, fin(0.0)), kappa * PI * PI / (4.0 * d * d)),
        ((fin(0.0), INF), kappa * PI * PI / (4.0 * d * d)),
        ((fin(0.0), fin(0.0)), 0.0),
    ];
    let mut worst = 0.0f64;
    let mut slowest = 0.0f64;
    for ((bp, bm), expect) in cases {
        let b = bc(bp, bm, kappa, d, 0.0);
        let reps = 200;
        let start = Instant::now();
        let mut mu = 0.0;
        for _ in 0..reps {
            mu = principal_eigenvalue(&b).unwrap().mu;
        }
        slowest = slowest.max(start.elapsed().as_secs_f64() / reps as f64);
        let err = if expect == 0.0 { mu.abs() } else { rel(mu, expect) };
        worst = worst.max(err);
    }
    Outcome { pass: worst <= 1e-12 && slowest < 1e-3, detail: format!("max rel err {worst:.2e}, {:.1} us/eval", slowest * 1e6) }
}

fn c2_transcendental_consistency() -> Outcome {
    let mut rng = CounterRng::new(2024);
    let mut worst = 0.0f64;
    let mut bound_ok = true;
    for _ in 0..50 {
        let bp = 10f64.powf(-2.0 + 4.0 * rng.next_f64());
        let bm = 10f64.powf(-2.0 + 4.0 * rng.next_f64());
        let b = bc(fin(bp), fin(bm), 1.0, 1.0, 0.0);
        let mu = principal_eigenvalue(&b).unwrap().mu;
        bound_ok &= mu >= eigenvalue_lower_bound(&b) * (1.0 - 1e-12);
        worst = worst.max(rel(mu, dense_rayleigh_minimum(&b, 2049).unwrap()));
    }
    Outcome { pass: bound_ok && worst <= 1e-6, detail: format!("bound holds: {bound_ok}, max rel diff vs dense {worst:.2e}") }
}

fn c3_neumann_gap() -> Outcome {
    let g = grid(1.0, 1.0, 1.0, 16, 16, 33);
    let exact = neumann_gap(&g.domain, 1.0).value;
    let coarse = neumann_gap_discrete(&g, 1.0).unwrap();
    let fine = neumann_gap_discrete(&g.refined(), 1.0).unwrap();
    let (e0, e1) = (rel(coarse, exact), rel(fine, exact));
    let ratio = e0 / e1;
    Outcome {
        pass: e0 <= 0.01 && (ratio - 4.0).abs() <= 0.5,
        detail: format!("closed form {exact:.6}, discrete {coarse:.6} (rel {e0:.2e}), refinement ratio {ratio:.3}"),
    }
}

fn c4_rigid_ledger() -> Outcome {
    let b = bc(fin(2.0), fin(0.5), 1.0, 1.0, 1.0);
    let u = VelocityFamily::Cellular { amplitude: 1.0, decay_rate: 0.5, mode: 1 };
    let residual = |g: SlabGrid, dt: f64, steps: usize| {
        let w0 = random_band_limited(&g, &b, 7, 1, 2);
        let s = ScalarState::from_deviation(g, b, 0.0, w0, 0.0).unwrap();
        run_rigid(s, &u, dt, steps, steps, false).max_residual
    };
    let g0 = grid(1.0, 1.0, 1.0, 16, 4, 17);
    let r0 = residual(g0, 2e-3, 50);
    let r1 = residual(g0.refined(), 1e-3, 100);
    let ratio = r0 / r1;
    Outcome { pass: (3.0..=5.0).contains(&ratio), detail: format!("max residual {r0:.3e} -> {r1:.3e}, ratio {ratio:.3}") }
}

fn moving_run(
    g: SlabGrid,
    b: BoundaryCoefficients,
    w0: Field3,
    eta_amp: f64,
    flow: &ManufacturedFlow,
    dt: f64,
    steps: usize,
) -> (MovingState, Vec<MovingState>, f64) {
    let scalar = ScalarState::from_deviation(g, b, 0.0, w0, 0.0).unwrap();
    let eta = single_mode_surface(&g, eta_amp, (1, 0));
    let mut s = MovingState::new(scalar, eta, flow).unwrap();
    let solver = MovingSolver::new(&g);
    let first = s.clone();
    let mut trail = Vec::with_capacity(steps);
    let mut worst = 0.0f64;
    for _ in 0..steps {
        let next = solver.step(&s, flow, dt).unwrap();
        worst = worst.max(energy_ledger_moving(&s, &next, flow, dt).unwrap().residual.abs());
        trail.push(next.clone());
        s = next;
    }
    (first, trail, worst)
}

fn c5_moving_ledger() -> Outcome {
    let b = bc(fin(1.5), INF, 1.0, 1.0, 1.0);
    let residual = |g: SlabGrid, dt: f64, steps: usize| {
        let flow = manufacture_flow(FlowParams { amplitude: 0.1, decay_rate: 0.5, mode: 1, c: 0.2 }, &g).unwrap();
        let w0 = random_band_limited(&g, &b, 11, 1, 2);
        moving_run(g, b, w0, 0.01, &flow, dt, steps).2
    };
    let g0 = grid(1.0, 1.0, 1.0, 16, 4, 17);
    let r0 = residual(g0, 2e-3, 50);
    let r1 = residual(g0.refined(), 1e-3, 100);
    let ratio = r0 / r1;
    Outcome { pass: (3.0..=5.0).contains(&ratio), detail: format!("max residual {r0:.3e} -> {r1:.3e}, ratio {ratio:.3}") }
}

fn c6_geometric_identities() -> Outcome {
    let mut g = grid(1.0, 1.0, 1.0, 16, 16, 17);
    let mut id1 = Vec::new();
    let mut id2 = Vec::new();
    let mut algebraic = 0.0f64;
    for _ in 0..3 {
        let eta = single_mode_surface(&g, 0.05, (1, 1));
        let rate = single_mode_surface(&g, 0.3, (1, 0));
        let surf = SurfaceFunction { eta, dt_eta: Some(rate), t: 0.0 };
        let geo = compute_geometry(&surf, &g).unwrap();
        let r = verify_geometric_identities(&geo, &g);
        algebraic = algebraic.max(r.id3).max(r.id4);
        id1.push(r.id1);
        id2.push(r.id2.unwrap());
        g = g.refined();
    }
    let ratios: Vec<f64> = (0..2).flat_map(|l| [id1[l] / id1[l + 1], id2[l] / id2[l + 1]]).collect();
    let second_order = ratios.iter().all(|r| (3.0..=5.0).contains(r));
    Outcome {
        pass: algebraic <= 1e-12 && second_order,
        detail: format!("id3/id4 max {algebraic:.1e}, id1/id2 refinement ratios {:?}", ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>()),
    }
}

fn c7_sharp_rigid_decay() -> Outcome {
    let g = grid(1.0, 1.0, 1.0, 4, 2, 257);
    let b = bc(INF, INF, 1.0, 1.0, 0.0);
    let mu = principal_eigenvalue(&b).unwrap().mu;
    let s = ScalarState::from_deviation(g, b, 0.0, eigenmode(&g, &b), 0.0).unwrap();
    let run = run_rigid(s, &VelocityFamily::Zero, 5e-4, 2000, 20, false);
    let fit = fit_rate(&run.times, &run.norms, Window::default()).unwrap();
    let env = envelope_rigid(run.norms[0], mu, 0.0, &[], &run.times).unwrap();
    let series = DecaySeries::new(run.times.clone(), run.norms.clone(), run.forcing.clone(), SeriesMeta::default()).unwrap();
    let check = check_envelope(&series, &env).unwrap();
    let err = rel(fit.rate, mu);
    Outcome {
        pass: err <= 5e-3 && check.pass,
        detail: format!("fitted {:.6} vs {mu:.6} (rel {err:.2e}), envelope margin {:.2e}", fit.rate, check.margin),
    }
}

fn c8_forced_rigid_decay() -> Outcome {
    let g = grid(1.0, 1.0, 1.0, 16, 2, 65);
    let b = bc(INF, INF, 1.0, 1.0, 1.0);
    let mu = principal_eigenvalue(&b).unwrap().mu;
    let grad = equilibrium_gradient(&b);
    let (dt, steps) = (1e-3, 3000);
    let mut lines = Vec::new();
    let mut pass = true;
    let families = [
        ("cellular a=2", VelocityFamily::Cellular { amplitude: 1.0, decay_rate: 2.0, mode: 1 }),
        ("cellular a=20", VelocityFamily::Cellular { amplitude: 1.0, decay_rate: 20.0, mode: 1 }),
        ("shear a=2", VelocityFamily::Shear { amplitude: 1.0, decay_rate: 2.0 }),
    ];
    for (label, u) in families {
        let s = ScalarState::from_deviation(g, b, 0.0, eigenmode(&g, &b), 0.0).unwrap();
        let run = run_rigid(s, &u, dt, steps, 20, false);
        let env = envelope_rigid(run.norms[0], mu, grad, &run.forcing, &run.times).unwrap();
        let series = DecaySeries::new(run.times, run.norms, run.forcing, SeriesMeta::default()).unwrap();
        let rep = envelope_report(label, &series, &env, Window::default()).unwrap();
        pass &= rep.pass;
        lines.push(format!("{label}: fitted {:.4} floor {:.4}", rep.fitted_rate, rep.rate_floor));
    }
    // Borderline a = μ: envelope carries the (1 + t) factor, the trajectory still decays at μ.
    let u = VelocityFamily::Cellular { amplitude: 1.0, decay_rate: mu, mode: 1 };
    let s = ScalarState::from_deviation(g, b, 0.0, eigenmode(&g, &b), 0.0).unwrap();
    let run = run_rigid(s, &u, dt, steps, 20, false);
    let env = envelope_rigid(run.norms[0], mu, grad, &run.forcing, &run.times).unwrap();
    let late = Window::LatterFraction(1.0 / 3.0);
    let fit = fit_rate(&run.times, &run.norms, late).unwrap();
    let env_fit = fit_rate(&run.times, &env.values(), late).unwrap();
    let series = DecaySeries::new(run.times, run.norms, run.forcing, SeriesMeta::default()).unwrap();
    let dominated = check_envelope(&series, &env).unwrap().pass;
    let borderline = rel(fit.rate, mu) <= 0.05 && env_fit.rate < mu && dominated;
    pass &= borderline;
    lines.push(format!("a=mu: late rate {:.4} (rel {:.2e}), envelope late rate {:.4}, dominated {dominated}", fit.rate, rel(fit.rate, mu), env_fit.rate));
    Outcome { pass, detail: lines.join("; ") }
}

fn c9_mean_conservation() -> Outcome {
    let steps = 1000;
    let g = grid(1.0, 1.0, 1.0, 16, 4, 17);
    let b = bc(fin(0.0), fin(0.0), 1.0, 1.0, 0.0);
    let w0 = random_band_limited(&g, &b, 3, 2, 3).mapv(|v| v + 0.5);
    let s = ScalarState::from_deviation(g, b, 0.0, w0, 0.0).unwrap();
    let m0 = g.integrate(&s.w);
    let u = VelocityFamily::Cellular { amplitude: 2.0, decay_rate: 0.0, mode: 1 };
    let run = run_rigid(s, &u, 1e-3, steps, steps, false);
    let rigid = (g.integrate(&run.states[1].w) - m0).abs() / m0.abs();

    let flow = manufacture_flow(FlowParams { amplitude: 0.03, decay_rate: 2.0, mode: 1, c: 0.2 }, &g).unwrap();
    let w0 = random_band_limited(&g, &b, 5, 2, 3).mapv(|v| v + 0.5);
    let (first, trail, _) = moving_run(g, b, w0, 0.01, &flow, 1e-3, steps);
    let j0 = g.inner(&first.scalar.w, &first.geometry.j);
    let moving = trail.iter().map(|s| weighted_mean(s).unwrap().abs()).fold(0.0, f64::max) / j0.abs();
    Outcome { pass: rigid < 1e-7 && moving < 1e-7, detail: format!("rigid drift {rigid:.2e}, moving weighted drift {moving:.2e}") }
}

fn c10_moving_floors() -> Outcome {
    let g = grid(1.0, 1.0, 1.0, 16, 2, 65);
    let (dt, steps, stride) = (1e-3, 1500, 10);
    let b = bc(INF, INF, 1.0, 1.0, 0.0);
    let mu = principal_eigenvalue(&b).unwrap().mu;
    let still = manufacture_flow(FlowParams { amplitude: 0.0, ..FlowParams::default() }, &g).unwrap();
    let (first, trail, _) = moving_run(g, b, eigenmode(&g, &b), 0.02, &still, dt, steps);
    let c0 = first.bounds.c0;
    let sample = |f: &dyn Fn(&MovingState) -> f64, first: &MovingState, trail: &[MovingState]| {
        let mut t = vec![0.0];
        let mut v = vec![f(first)];
        for (n, s) in trail.iter().enumerate() {
            if (n + 1) % stride == 0 {
                t.push(s.t());
                v.push(f(s));
            }
        }
        (t, v)
    };
    let (t, v) = sample(&|s| s.weighted_norm(), &first, &trail);
    let fit = fit_rate(&t, &v, Window::default()).unwrap();
    let floor = mu / (c0 * c0);
    let frozen = fit.rate >= floor * (1.0 - 5e-3);

    let b = bc(fin(0.0), fin(0.0), 1.0, 1.0, 0.0);
    let flow = manufacture_flow(FlowParams { amplitude: 0.03, decay_rate: 2.0, mode: 1, c: 0.2 }, &g).unwrap();
    let w0 = random_band_limited(&g, &b, 13, 2, 3);
    let (first, trail, _) = moving_run(g, b, w0, 0.02, &flow, dt, steps);
    let last = trail.last().unwrap();
    let (c0n, c1n) = (last.running.c0, last.running.c1);
    let (t, v) = sample(&|s| s.centered_weighted_norm(), &first, &trail);
    let gap = neumann_gap(&g.domain, 1.0).value;
    let env = envelope_moving(&MovingEnvelope::NeumannPeriodic { c0: c0n, c1: c1n, gap, initial_norm: v[0] }, &t).unwrap();
    let series = DecaySeries::new(t, v, vec![0.0; env.times.len()], SeriesMeta { mu_floor: gap, c0: c0n, c1: c1n }).unwrap();
    let rep = envelope_report("moving_insulated", &series, &env, Window::default()).unwrap();
    Outcome {
        pass: frozen && rep.pass && rep.pointwise_pass,
        detail: format!(
            "frozen: fitted {:.4} >= mu/c0^2 = {floor:.4} (c0 {c0:.4}); insulated: fitted {:.4} floor {:.4}, pointwise {}",
            fit.rate, rep.fitted_rate, rep.rate_floor, rep.pointwise_pass
        ),
    }
}

fn c11_non_coercivity() -> Outcome {
    let b = bc(fin(0.0), fin(0.0), 1.0, 1.0, 0.0);
    let mut rates = Vec::new();
    for l in [1.0, 2.0, 4.0, 8.0] {
        let g = SlabGrid::new(SlabDomain::new(l, 1.0, 1.0, slabscalar::geometry::HorizontalKind::TruncatedInfinite).unwrap(), 64, 2, 9).unwrap();
        let w0 = g.field_from_fn(|x1, _, _| {
            let y = x1 / l - 0.5;
            (-y * y / (2.0 * 0.01)).exp()
        });
        let s = ScalarState::from_deviation(g, b, 0.0, w0, 0.0).unwrap();
        let t_end = 0.25 * l * l;
        let run = run_rigid(s, &VelocityFamily::Zero, t_end / 400.0, 400, 4, true);
        rates.push(fit_rate(&run.times, &run.norms, Window::default()).unwrap().rate);
    }
    let monotone = rates.windows(2).all(|w| w[1] < w[0]);
    Outcome {
        pass: monotone && rates[3] < 0.1 * rates[0],
        detail: format!("rates {:?}", rates.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>()),
    }
}

fn c12_reduction_equivalence() -> Outcome {
    let g = grid(1.0, 1.0, 1.0, 16, 4, 17);
    let b = bc(fin(1.5), INF, 1.0, 1.0, 1.0);
    let flow = manufacture_flow(FlowParams { amplitude: 0.8, decay_rate: 0.3, mode: 1, c: 0.0 }, &g).unwrap();
    let w0 = random_band_limited(&g, &b, 17, 2, 3);
    let steps = 100;
    let dt = 2e-3;
    let rigid = run_rigid(ScalarState::from_deviation(g, b, 0.0, w0.clone(), 0.0).unwrap(), &flow, dt, steps, 1, false);
    let scalar = ScalarState::from_deviation(g, b, 0.0, w0, 0.0).unwrap();
    let mut m = MovingState::new(scalar, g.surface_zeros(), &flow).unwrap();
    let solver = MovingSolver::new(&g);
    let rs = RigidSolver::new(&g, &b).unwrap();
    let mut r = rigid.states[0].clone();
    let mut worst = 0.0f64;
    let mut eta_max = 0.0f64;
    for _ in 0..steps {
        m = solver.step(&m, &flow, dt).unwrap();
        r = rs.step(&r, &flow, dt).unwrap();
        worst = worst.max(g.l2_norm(&(&m.scalar.w - &r.w)));
        eta_max = eta_max.max(m.surface.sup_norm());
    }
    Outcome { pass: worst <= 1e-12, detail: format!("max deviation difference {worst:.2e}, surface stayed at {eta_max:.1e}") }
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome, f64); 12] = [
        ("1 eigenvalue closed forms", c1_eigenvalue_closed_forms, 1.0),
        ("2 transcendental consistency", c2_transcendental_consistency, 10.0),
        ("3 neumann gap", c3_neumann_gap, 5.0),
        ("4 rigid energy identity closure", c4_rigid_ledger, 60.0),
        ("5 moving energy identity closure", c5_moving_ledger, 120.0),
        ("6 geometric identities", c6_geometric_identities, 10.0),
        ("7 sharp rigid decay", c7_sharp_rigid_decay, 30.0),
        ("8 forced rigid decay", c8_forced_rigid_decay, 60.0),
        ("9 mean conservation", c9_mean_conservation, 60.0),
        ("10 moving decay floors", c10_moving_floors, 240.0),
        ("11 non-coercivity demonstration", c11_non_coercivity, 120.0),
        ("12 reduction equivalence", c12_reduction_equivalence, 10.0),
    ];
    let mut failed = Vec::new();
    for (name, f, budget) in criteria {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        let ok = out.pass && secs < budget;
        println!("[{}] {name}: {} ({secs:.2} s of {budget} s)", if ok { "PASS" } else { "FAIL" }, out.detail);
        if !ok {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
