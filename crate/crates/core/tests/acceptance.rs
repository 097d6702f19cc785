//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run with `cargo test -p edchrom --test acceptance`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use edchrom::diagnostics::{
    front_position, l1_distance, operating_line_check, operating_line_slope, self_convergence_order, total_mass,
    OSCILLATION_THRESHOLD,
};
use edchrom::implicit::{newton_jacobian, stage_residual, BlockTridiagonal};
use edchrom::integrate::{run, run_observed, RunConfig, SchemeKind, Stepper};
use edchrom::isotherm::{LangmuirParams, SECULAR_BRACKET_WIDTH};
use edchrom::scenario::{displacer, presets};
use edchrom::spatial::{periodic_harness, Discretization, Grid, Reconstruction};
use edchrom::{Field, StateField};
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn preset(name: &str) -> RunConfig {
    presets::get(name).unwrap().to_config().unwrap()
}

fn single(da: f64, m: usize, ratio: f64, t_final: f64, snapshots: Vec<f64>, scheme: SchemeKind) -> RunConfig {
    let mut cfg = preset("single_elution");
    cfg.physics = edchrom::PhysicalParams::new(1.0, da).unwrap();
    cfg.grid = Grid::new(m).unwrap();
    cfg.dt_over_dz = ratio;
    cfg.t_final = t_final;
    cfg.snapshots = snapshots;
    cfg.scheme = scheme;
    cfg
}

// Independent oracle: the positive root of b c² + (1 + η − b w) c − w = 0.
fn quadratic_root(w: f64, eta: f64, b: f64) -> f64 {
    let q = 1.0 + eta - b * w;
    let disc = (q * q + 4.0 * b * w).sqrt();
    if q >= 0.0 {
        2.0 * w / (q + disc)
    } else {
        (disc - q) / (2.0 * b)
    }
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for eta in [0.1, 1.0, 10.0] {
        for b in [0.5, 1.0, 2.0] {
            // ε = 0.5 makes η equal to a
            let iso = LangmuirParams::new(vec![eta], vec![b], 0.5).unwrap();
            let mut c = [0.0];
            for k in 0..10_000 {
                let w = 100.0 * k as f64 / 9_999.0;
                iso.concentrations_into(&[w], 1e-14, None, &mut c).unwrap();
                worst = worst.max((c[0] - quadratic_root(w, eta, b)).abs());
                count += 1;
            }
        }
    }
    Outcome::new(
        worst <= 1e-12,
        format!("{count} points, max |C(w) - c_exact| = {worst:.2e} (tol 1e-12)"),
    )
}

fn random_params(rng: &mut StdRng) -> LangmuirParams {
    let n = rng.random_range(1..=5);
    let mut a = Vec::with_capacity(n);
    let mut next = rng.random_range(0.1..2.0);
    for _ in 0..n {
        a.push(next);
        next += rng.random_range(0.05..3.0);
    }
    let b = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
    LangmuirParams::new(a, b, rng.random_range(0.2..0.8)).unwrap()
}

fn dense_jacobian(iso: &LangmuirParams, c: &[f64]) -> DMatrix<f64> {
    let n = c.len();
    let p = 1.0 + iso.b().iter().zip(c).map(|(b, c)| b * c).sum::<f64>();
    DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 + iso.eta()[i] / p } else { 0.0 };
        delta - iso.eta()[i] * iso.b()[j] * c[i] / (p * p)
    })
}

fn criterion_2() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let (mut round_trip, mut eig_err) = (0.0f64, 0.0f64);
    let mut interlace_failures = 0;
    for _ in 0..1000 {
        let iso = random_params(&mut rng);
        let n = iso.n_components();
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(1e-3..10.0)).collect();
        let mut w = vec![0.0; n];
        iso.conserved_into(&c, &mut w);
        let mut back = vec![0.0; n];
        iso.concentrations_into(&w, 1e-14, None, &mut back).unwrap();
        for (x, y) in back.iter().zip(&c) {
            round_trip = round_trip.max((x - y).abs());
        }

        let lambda = iso.eigenvalues(&c, SECULAR_BRACKET_WIDTH).unwrap();
        let poles = iso.secular_poles(&c);
        let mut lower = 1.0;
        for (l, d) in lambda.iter().zip(&poles) {
            if !(*l > lower && *l < *d) {
                interlace_failures += 1;
            }
            lower = *d;
        }
        let mut dense: Vec<f64> = dense_jacobian(&iso, &c)
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .collect();
        dense.sort_by(f64::total_cmp);
        for (x, y) in lambda.iter().zip(&dense) {
            eig_err = eig_err.max((x - y).abs() / y.abs().max(1.0));
        }
    }
    Outcome::new(
        round_trip <= 1e-10 && interlace_failures == 0 && eig_err <= 1e-8,
        format!(
            "1000 instances: C(W(c)) error {round_trip:.2e} (tol 1e-10), \
             interlacing violations {interlace_failures}, eigenvalue error {eig_err:.2e} (tol 1e-8)"
        ),
    )
}

/// Outlet concentration, relative to the injected one, at which solute
/// counts as leaving the column.
const BREAKTHROUGH: f64 = 1e-10;

struct MassRecord {
    masses: Vec<f64>,
    /// Largest relative mass change between the end of injection and
    /// breakthrough.
    drift: f64,
    breakthrough: Option<f64>,
}

fn elution_mass_run(scheme: SchemeKind, m: usize) -> MassRecord {
    let cfg = single(0.0, m, 0.9, 1.4, vec![0.5, 1.0, 1.4], scheme);
    let grid = cfg.grid;
    let mut reference: Option<f64> = None;
    let mut breakthrough = None;
    let mut drift = 0.0f64;
    let mut prev = 0.0;
    let out = run_observed(&cfg, |t, dt, rep| {
        if breakthrough.is_some() {
            return;
        }
        if rep.state.c().get(0, m - 1).abs() > BREAKTHROUGH {
            breakthrough = Some(t + dt);
            return;
        }
        let mass = total_mass(rep.state.w(), &grid)[0];
        if t >= 0.2 {
            let r = *reference.get_or_insert(prev);
            drift = drift.max((mass - r).abs() / r);
        }
        prev = mass;
    })
    .unwrap();
    MassRecord {
        masses: out.snapshots.iter().map(|s| s.diagnostics.total_mass[0]).collect(),
        drift,
        breakthrough,
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|p| p[1] < p[0])
}

fn within(v: &[f64], target: &[f64], tol: f64) -> bool {
    v.iter().zip(target).all(|(x, y)| (x - y).abs() <= tol)
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn criterion_3() -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    for (m, expected) in [(100, 0.207), (500, 0.202)] {
        let r = elution_mass_run(SchemeKind::ExplicitRk2, m);
        let ok = r.drift <= 1e-9 && within(&r.masses, &[expected; 3], 0.005);
        pass &= ok;
        let until = r.breakthrough.map_or("T=1.4".to_string(), |t| format!("breakthrough at t={t:.3}"));
        lines.push(format!("CS m={m} {} drift {:.1e} until {until}", fmt(&r.masses), r.drift));
    }
    let ncs1 = elution_mass_run(SchemeKind::Ncs1, 100).masses;
    let ok = within(&ncs1, &[0.184, 0.171, 0.166], 0.01) && strictly_decreasing(&ncs1);
    pass &= ok;
    lines.push(format!("NCS1 m=100 {}", fmt(&ncs1)));
    for (m, expected) in [(100, [0.203, 0.200, 0.197]), (500, [0.198, 0.194, 0.192])] {
        let ncs2 = elution_mass_run(SchemeKind::Ncs2, m).masses;
        let ok = within(&ncs2, &expected, 0.01) && strictly_decreasing(&ncs2);
        pass &= ok;
        lines.push(format!("NCS2 m={m} {}", fmt(&ncs2)));
    }
    Outcome::new(pass, lines.join("; "))
}

fn front_at_one(scheme: SchemeKind) -> f64 {
    let out = run(&single(0.0, 500, 0.9, 1.0, vec![], scheme)).unwrap();
    let snap = out.snapshots.last().unwrap();
    front_position(snap.state.c(), 0, &Grid::new(500).unwrap()).unwrap()
}

fn criterion_4() -> Outcome {
    let pairs = [
        (SchemeKind::UpwindFe, SchemeKind::Ncs1),
        (SchemeKind::ExplicitRk2, SchemeKind::Ncs2),
    ];
    let mut pass = true;
    let mut lines = Vec::new();
    for (cs, ncs) in pairs {
        let (zc, zn) = (front_at_one(cs), front_at_one(ncs));
        pass &= zc > zn;
        lines.push(format!("{cs} {zc:.3} vs {ncs} {zn:.3}"));
    }
    Outcome::new(pass, format!("m=500, T=1: {}", lines.join("; ")))
}

/// Oscillation index of an explicit RK2 run, or `None` if it broke down.
fn explicit_oscillation_index(m: usize, ratio: f64) -> Option<f64> {
    let cfg = single(0.0005, m, ratio, 0.5, vec![], SchemeKind::ExplicitRk2);
    run(&cfg)
        .ok()
        .map(|o| o.snapshots.last().unwrap().diagnostics.oscillation_index)
}

fn criterion_5() -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    for (m, stable, unstable) in [(100, 0.9, 0.95), (500, 0.7, 0.9), (1000, 0.5, 0.7), (2000, 0.4, 0.5)] {
        let s = explicit_oscillation_index(m, stable);
        let u = explicit_oscillation_index(m, unstable);
        pass &= s.is_some_and(|v| v < OSCILLATION_THRESHOLD);
        pass &= u.is_none_or(|v| v >= OSCILLATION_THRESHOLD);
        let show = |v: Option<f64>| v.map_or("breakdown".to_string(), |x| format!("{:.2}%", 100.0 * x));
        lines.push(format!("m={m}: {stable} -> {}, {unstable} -> {}", show(s), show(u)));
    }
    Outcome::new(pass, lines.join("; "))
}

fn criterion_6() -> Outcome {
    let out = run(&single(0.005, 2000, 0.9, 0.5, vec![], SchemeKind::ImexRk2)).unwrap();
    let osc = out.snapshots.last().unwrap().diagnostics.oscillation_index;
    let iters = out.stats.max_newton_iterations;
    Outcome::new(
        osc < 0.01 && iters <= 10,
        format!(
            "oscillation index {osc:.1e} (tol 1e-2), max Newton iterations {iters} (tol 10), \
             {} implicit stages",
            out.stats.implicit_stages
        ),
    )
}

/// Fronts of each component at the final snapshot.
fn displacement_fronts(m: usize) -> Vec<f64> {
    let mut cfg = preset("displacement_exp1");
    cfg.grid = Grid::new(m).unwrap();
    cfg.snapshots.clear();
    let out = run(&cfg).unwrap();
    let c = out.snapshots.last().unwrap().state.c().clone();
    (0..3).map(|i| front_position(&c, i, &cfg.grid).unwrap()).collect()
}

/// Largest relative deviation of each component's mass from its expected
/// value, over the steps between the end of the feed pulse and the moment
/// the component first shows up in the outlet cell. Non-displacer
/// components keep the mass fed in; the displacer gains `u c_d` per unit time.
fn displacement_mass_drift(cfg: &RunConfig) -> Vec<f64> {
    let grid = cfg.grid;
    let m = grid.cells();
    let n = cfg.n_components();
    let (d, c_d) = displacer(cfg).unwrap();
    let u = cfg.physics.u();
    let feed_end = 0.1;
    let fed = |i: usize, t: f64| {
        if i == d {
            u * c_d * (t - feed_end)
        } else {
            u * feed_end
        }
    };
    let mut drift = vec![0.0f64; n];
    let mut broken = vec![false; n];
    run_observed(cfg, |t, dt, rep| {
        let end = t + dt;
        if end < feed_end - 1e-12 {
            return;
        }
        let mass = total_mass(rep.state.w(), &grid);
        for i in 0..n {
            if broken[i] {
                continue;
            }
            if rep.state.c().get(i, m - 1) > BREAKTHROUGH {
                broken[i] = true;
                continue;
            }
            let expected = fed(i, end);
            if expected > 0.0 {
                drift[i] = drift[i].max((mass[i] - expected).abs() / expected);
            }
        }
    })
    .unwrap();
    drift
}

/// Height of a flat-topped zone in `profile`: `window` consecutive cells
/// within 2% of the profile maximum, with the profile dropping below half
/// that height on both sides inside the column. A shoulder below the peak
/// or a peak cut off by the outlet does not count.
fn flat_top(profile: &[f64], window: usize) -> Option<f64> {
    let peak = profile.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return None;
    }
    (0..profile.len().saturating_sub(window)).find_map(|s| {
        let w = &profile[s..s + window];
        let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = w.iter().sum::<f64>() / window as f64;
        let bounded = profile[..s].iter().any(|&v| v < 0.5 * mean)
            && profile[s + window..].iter().any(|&v| v < 0.5 * mean);
        (lo >= 0.98 * peak && bounded).then_some(mean)
    })
}

/// Flat-top heights of the non-displacer components at `t`, when the whole
/// train is still inside the column.
fn observed_plateaus(name: &str, t: f64) -> Vec<Option<f64>> {
    let mut cfg = preset(name);
    cfg.t_final = t;
    cfg.snapshots.clear();
    let out = run(&cfg).unwrap();
    let c = out.snapshots.last().unwrap().state.c().clone();
    let (d, _) = displacer(&cfg).unwrap();
    let window = cfg.grid.cells() / 50;
    (0..cfg.n_components())
        .filter(|&i| i != d)
        .map(|i| flat_top(&c.component(i), window))
        .collect()
}

fn criterion_7() -> Outcome {
    let mut pass = true;
    let mut lines = Vec::new();
    for m in [200, 1000] {
        let z = displacement_fronts(m);
        pass &= z[0] > z[1] && z[1] > z[2];
        lines.push(format!("exp1 m={m} fronts {}", fmt(&z)));
    }
    for (name, expected) in [("displacement_exp2", [false, true]), ("displacement_exp3", [false, false])] {
        let cfg = preset(name);
        let (d, c_d) = displacer(&cfg).unwrap();
        let flags = operating_line_check(&cfg.isotherm, d, c_d);
        let predicted = [flags[0], flags[1]];
        let observed = observed_plateaus(name, 12.0);
        let seen = [observed[0].is_some(), observed[1].is_some()];
        pass &= predicted == expected && seen == predicted;
        // a flagged plateau sits where the isotherm meets the operating line
        let s = operating_line_slope(&cfg.isotherm, d, c_d);
        for (i, height) in observed.iter().enumerate() {
            if let Some(h) = height {
                let predicted_height = (cfg.isotherm.a()[i] / s - 1.0) / cfg.isotherm.b()[i];
                pass &= (h - predicted_height).abs() <= 0.02 * predicted_height;
            }
        }
        let show: Vec<String> = observed
            .iter()
            .map(|p| p.map_or("none".to_string(), |h| format!("{h:.4}")))
            .collect();
        lines.push(format!(
            "{name} flags {predicted:?}, flat tops at T=12, m={} [{}]",
            cfg.grid.cells(),
            show.join(", ")
        ));
    }
    let mut worst = 0.0f64;
    for m in [200, 1000] {
        let mut cfg = preset("displacement_exp1");
        cfg.grid = Grid::new(m).unwrap();
        cfg.snapshots.clear();
        worst = displacement_mass_drift(&cfg).into_iter().fold(worst, f64::max);
    }
    pass &= worst <= 1e-8;
    lines.push(format!("mass drift before breakthrough {worst:.1e} (tol 1e-8)"));
    Outcome::new(pass, lines.join("; "))
}

fn weno_error(m: usize) -> f64 {
    let dz = 1.0 / m as f64;
    let avg = |k: usize| {
        let (a, b) = (k as f64 * dz, (k + 1) as f64 * dz);
        -((2.0 * PI * b).cos() - (2.0 * PI * a).cos()) / (2.0 * PI * dz)
    };
    let w: Vec<f64> = (0..m).map(avg).collect();
    let d = periodic_harness::linear_flux_divergence(&w, 1.0, 1.5, dz);
    // exact divergence of u·sin(2πz) averaged over each cell
    let exact: Vec<f64> = (0..m)
        .map(|k| -((2.0 * PI * (k + 1) as f64 * dz).sin() - (2.0 * PI * k as f64 * dz).sin()) / dz)
        .collect();
    l1_distance(&d, &exact, dz)
}

fn imex_self_convergence() -> f64 {
    let mut cfg = single(0.005, 200, 0.8, 0.32, vec![], SchemeKind::ImexRk2);
    cfg.injection = edchrom::InjectionProfile::none(1);
    let grid = cfg.grid;
    let stepper: Stepper = cfg.stepper();
    let c0 = Field::from_fn(1, 200, |_, k| {
        let z = grid.center(k);
        (-((z - 0.3) / 0.08f64).powi(2)).exp()
    });
    let solve = |ratio: f64| {
        let dt = ratio * grid.dz();
        let steps = (cfg.t_final / dt).round() as usize;
        let mut s = StateField::from_concentrations(c0.clone(), &cfg.isotherm);
        for n in 0..steps {
            s = stepper.step(&s, n as f64 * dt, dt).unwrap().state;
        }
        s.c().component(0)
    };
    let (a, b, c) = (solve(0.8), solve(0.4), solve(0.2));
    let d1 = l1_distance(&a, &b, grid.dz());
    let d2 = l1_distance(&b, &c, grid.dz());
    self_convergence_order(d1, d2).unwrap_or(f64::NAN)
}

fn criterion_8() -> Outcome {
    let sizes = [20, 40, 80, 160, 320];
    let orders: Vec<f64> = sizes
        .windows(2)
        .map(|p| (weno_error(p[0]) / weno_error(p[1])).log2())
        .collect();
    let temporal = imex_self_convergence();
    let pass = orders.iter().all(|o| (4.5..=5.5).contains(o)) && (1.7..=2.3).contains(&temporal);
    Outcome::new(
        pass,
        format!(
            "WENO5 orders m=20..320 {} (range [4.5, 5.5]); IMEX temporal order {temporal:.3} (range [1.7, 2.3])",
            fmt(&orders)
        ),
    )
}

fn random_block_system(rng: &mut StdRng, n: usize, m: usize) -> BlockTridiagonal {
    let mut a = BlockTridiagonal::zeros(n, m);
    for k in 0..m {
        for (r, v) in a.diag_block_mut(k).iter_mut().enumerate() {
            let on_diag = r / n == r % n;
            *v = rng.random_range(-1.0..1.0) + if on_diag { 3.0 * n as f64 } else { 0.0 };
        }
        if k + 1 < m {
            a.upper_block_mut(k).iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
            a.lower_block_mut(k).iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
    }
    a
}

fn criterion_9() -> Outcome {
    let mut rng = StdRng::seed_from_u64(9);
    let mut solve_err = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(5..=30);
        let a = random_block_system(&mut rng, n, m);
        let rhs = Field::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let x = a.solve(&rhs).unwrap();
        let size = n * m;
        let dense = DMatrix::from_row_slice(size, size, &a.to_dense());
        let oracle = dense
            .lu()
            .solve(&DVector::from_row_slice(rhs.as_slice()))
            .unwrap();
        for (u, v) in x.as_slice().iter().zip(oracle.iter()) {
            solve_err = solve_err.max((u - v).abs() / v.abs().max(1.0));
        }
    }

    let disc = Discretization::new(
        Grid::new(16).unwrap(),
        edchrom::PhysicalParams::new(1.0, 2e-3).unwrap(),
        LangmuirParams::new(vec![4.0, 5.0, 6.0], vec![4.0, 5.0, 1.0], 0.5).unwrap(),
        Reconstruction::Weno5,
    );
    let dt = 0.05;
    let c = Field::from_fn(3, 16, |i, k| 0.3 + 0.2 * ((i + 2 * k) as f64).sin());
    let e = Field::from_fn(3, 16, |i, k| ((3 * i + k) as f64).cos());
    let g = Field::zeros(3, 16);
    let exact = newton_jacobian(&c, &disc, dt).mul(&e);
    let fd_error = |h: f64| {
        let mut plus = c.clone();
        plus.axpy(h, &e);
        let mut minus = c.clone();
        minus.axpy(-h, &e);
        let mut fd = stage_residual(&plus, &g, &disc, dt);
        fd.axpy(-1.0, &stage_residual(&minus, &g, &disc, dt));
        fd.as_mut_slice().iter_mut().for_each(|v| *v /= 2.0 * h);
        fd.axpy(-1.0, &exact);
        fd.max_abs()
    };
    let ratio = fd_error(1e-3) / fd_error(5e-4);
    Outcome::new(
        solve_err <= 1e-10 && (3.5..=4.5).contains(&ratio),
        format!(
            "200 block systems, max error vs dense LU {solve_err:.1e} (tol 1e-10); \
             central-difference error ratio at h, h/2 = {ratio:.3} (expected 4)"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(u8, &str, fn() -> Outcome, u64); 9] = [
        (1, "inversion vs closed form", criterion_1, 1),
        (2, "round trip and eigenstructure", criterion_2, 10),
        (3, "elution mass conservation", criterion_3, 60),
        (4, "front speed defect", criterion_4, 60),
        (5, "explicit stability thresholds", criterion_5, 300),
        (6, "IMEX robustness", criterion_6, 120),
        (7, "displacement experiments", criterion_7, 600),
        (8, "convergence orders", criterion_8, 120),
        (9, "solver oracles", criterion_9, 10),
    ];
    let mut failures = 0;
    for (id, title, check, budget) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(budget);
        let pass = outcome.pass && in_time;
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {id} {}: {title}: {} [{:.2}s of {budget}s]",
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of 9 criteria passed", 9 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
