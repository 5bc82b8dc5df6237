//! Acceptance criteria. Runs as a plain binary and prints one line per
//! criterion; exits nonzero if any criterion fails.

mod common;

use std::panic;
use std::process::ExitCode;
use std::time::Instant;

use cocontact::dsl::parse;
use cocontact::dynamics::{cross_check_equivalence, integrate, prepare, IntegratorConfig, Trajectory};
use cocontact::skinner_rusk::{run_constraint_algorithm, AlgorithmOptions, LadderStatus, PontryaginPoint};
use cocontact::systems::{preset, SystemPreset};
use cocontact::verify::{
    check_dsl_native, check_jets_fd, order_ratios, project_below, VerifyOptions, ORDER_BAND, ROUNDOFF_FLOOR,
};
use common::{points, rk4};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const SEED: u64 = 20;

const DUFFING: (f64, f64, f64, f64, f64) = (1.0, 5.0, 8.0, 0.02, 0.5);
const DRAG: (f64, f64, f64, f64, f64) = (0.1, 30.0, 9.81, 2.0, 0.5);
const CHARGED: (f64, f64, f64) = (1.0, 2e-4, 0.3);
const COULOMB: f64 = 8.987_551_792_3e9 * -2e-4;

struct Outcome {
    pass: bool,
    summary: String,
}

fn outcome(pass: bool, summary: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        summary: summary.into(),
    }
}

fn lift(p: &SystemPreset, x: &cocontact::LagrangianPoint) -> PontryaginPoint {
    PontryaginPoint::from_lagrangian(&p.system, x).unwrap()
}

fn trajectory(p: &SystemPreset, cfg: &IntegratorConfig) -> Trajectory {
    let (ladder, w0) = prepare(&p.system, &p.initial, &AlgorithmOptions::default()).unwrap();
    integrate(&ladder, &w0, cfg).unwrap()
}

fn duffing_force(t: f64, x: f64, v: f64) -> f64 {
    let (alpha, beta, gamma, delta, omega) = DUFFING;
    -delta * v - alpha * x - beta * x.powi(3) + gamma * (omega * t).cos()
}

fn drag_acceleration(t: f64, v: f64) -> f64 {
    let (gamma, force, g, m0, r) = DRAG;
    let m = m0 * (1.0 + (-r * t).exp()) / 2.0;
    let mdot = -m0 * r * (-r * t).exp() / 2.0;
    force / m - gamma * v * v - mdot / m * v - g
}

fn coulomb_gradient(q: &[f64]) -> [f64; 3] {
    let r = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
    let r3 = r * r * r;
    [-COULOMB * q[0] / r3, -COULOMB * q[1] / r3, -COULOMB * q[2] / r3]
}

fn regular_closure() -> Outcome {
    let mut worst = 0.0f64;
    for (name, c_of) in [
        ("duffing", (|w: &PontryaginPoint| duffing_force(w.t, w.q[0], w.v[0])) as fn(&PontryaginPoint) -> f64),
        ("drag", |w: &PontryaginPoint| drag_acceleration(w.t, w.v[0])),
    ] {
        let p = preset(name).unwrap();
        for x in points(&p, 100, SEED) {
            let w = lift(&p, &x);
            let (ladder, z) = match run_constraint_algorithm(&p.system, &w, &AlgorithmOptions::default()) {
                Ok(r) => r,
                Err(e) => return outcome(false, format!("{name}: {e}")),
            };
            if ladder.status() != LadderStatus::Closed || ladder.depth() != 1 {
                return outcome(false, format!("{name}: {:?} at depth {}", ladder.status(), ladder.depth()));
            }
            let want = c_of(&w);
            worst = worst.max((z.c[0] - want).abs() / want.abs().max(1.0));
        }
    }
    outcome(worst <= 1e-10, format!("closed at depth 1; max C error {worst:.2e} (tol 1e-10)"))
}

fn singular_ladder() -> Outcome {
    let (m, k, gamma) = CHARGED;
    let p = preset("charged_particle").unwrap();
    let (ladder, _) = match run_constraint_algorithm(&p.system, &lift(&p, &p.initial), &AlgorithmOptions::default()) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let sizes: Vec<usize> = ladder.generations().iter().map(Vec::len).collect();
    if ladder.status() != LadderStatus::Closed || sizes[..4] != [4, 1, 1, 1] {
        return outcome(false, format!("status {:?}, generation sizes {sizes:?}", ladder.status()));
    }
    let gens = ladder.generations();
    let mut worst = 0.0f64;
    for x in points(&p, 100, SEED) {
        let w = lift(&p, &x);
        let w2 = project_below(&ladder, 2, &w).unwrap();
        worst = worst.max((gens[1][0].value(&w2).unwrap() - (w2.q[2] - w2.t)).abs());
        let w3 = project_below(&ladder, 3, &w).unwrap();
        worst = worst.max((gens[2][0].value(&w3).unwrap() - (w3.v[2] - 1.0)).abs());
        let w4 = project_below(&ladder, 4, &w).unwrap();
        let xi4 = w4.q[3] - k * coulomb_gradient(&w4.q)[2] - gamma * m;
        worst = worst.max((gens[3][0].value(&w4).unwrap() - xi4).abs() / xi4.abs().max(1.0));
    }
    outcome(
        worst <= 1e-10,
        format!("generations {sizes:?}; max value error {worst:.2e} (tol 1e-10)"),
    )
}

fn duffing_oracle() -> Outcome {
    let h = 1e-3;
    let p = preset("duffing").unwrap();
    let traj = trajectory(&p, &IntegratorConfig::rk4(h, 20.0));
    let x0 = &p.initial;
    let oracle = rk4(|t, x: &[f64]| vec![x[1], duffing_force(t, x[0], x[1])], 0.0, &[x0.q[0], x0.v[0]], h, 20_000);
    if oracle.len() != traj.len() {
        return outcome(false, format!("{} samples vs {}", traj.len(), oracle.len()));
    }
    let dev = traj
        .points()
        .iter()
        .zip(&oracle)
        .fold(0.0f64, |m, (w, (_, o))| m.max((w.q[0] - o[0]).abs()).max((w.v[0] - o[1]).abs()));
    outcome(dev <= 1e-6, format!("max deviation {dev:.2e} over T = 20 (tol 1e-6)"))
}

fn harmonic_limit() -> Outcome {
    let p = preset("harmonic").unwrap();
    let alpha = 1.0f64;
    let t_end = 2.0 * std::f64::consts::PI;
    let traj = trajectory(&p, &IntegratorConfig::rk4(1e-3, t_end));
    let x0 = p.initial.q[0];
    let dev = traj
        .points()
        .iter()
        .fold(0.0f64, |m, w| m.max((w.q[0] - x0 * (alpha.sqrt() * w.t).cos()).abs()));
    outcome(dev <= 1e-6, format!("max |x - x0 cos t| {dev:.2e} over T = 2π (tol 1e-6)"))
}

fn equivalence() -> Outcome {
    let cfg = IntegratorConfig::rk4(1e-3, 10.0);
    let mut parts = Vec::new();
    let mut worst = 0.0f64;
    for name in ["duffing", "drag"] {
        let p = preset(name).unwrap();
        match cross_check_equivalence(&p.system, &p.initial, &cfg) {
            Ok(r) => {
                worst = worst.max(r.max_deviation());
                parts.push(format!(
                    "{name} ρ1 {:.1e} ρ2 {:.1e} FL {:.1e}",
                    r.rho1_vs_x, r.rho2_vs_y, r.legendre_x_vs_y
                ));
            }
            Err(e) => return outcome(false, format!("{name}: {e}")),
        }
    }
    outcome(worst <= 1e-6, format!("{} (tol 1e-6)", parts.join("; ")))
}

fn residual_order() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["free_particle", "duffing", "harmonic", "drag", "charged_particle"] {
        let p = preset(name).unwrap();
        let ratios = match order_ratios(&p, 1.0) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("{name}: {e}")),
        };
        let mut shown = Vec::new();
        for (channel, coarse, _, ratio) in ratios {
            if coarse < ROUNDOFF_FLOOR {
                shown.push(format!("{channel} roundoff"));
                continue;
            }
            pass &= (ORDER_BAND.0..=ORDER_BAND.1).contains(&ratio);
            shown.push(format!("{channel} {ratio:.1}"));
        }
        parts.push(format!("{name}: {}", shown.join(" ")));
    }
    outcome(pass, format!("ratios in [12, 20]; {}", parts.join("; ")))
}

fn charged_scenario() -> Outcome {
    let (m, k, gamma) = CHARGED;
    let p = preset("charged_particle").unwrap();
    let cfg = IntegratorConfig {
        t_end: 10.0,
        ..p.integrator.clone()
    };
    let (ladder, w0) = prepare(&p.system, &p.initial, &AlgorithmOptions::default()).unwrap();
    let traj = match integrate(&ladder, &w0, &cfg) {
        Ok(t) => t,
        Err(e) => return outcome(false, e.to_string()),
    };
    let mut z_dev = 0.0f64;
    let mut planar = 0.0f64;
    for s in traj.samples() {
        let w = &s.point;
        z_dev = z_dev.max((w.q[2] - w.t).abs());
        let grad = coulomb_gradient(&w.q);
        for i in 0..2 {
            let want = -k * grad[i] / m - gamma * w.v[i];
            planar = planar.max((s.z.c[i] - want).abs() / want.abs().max(1.0));
        }
    }
    let steps = ((cfg.t_end - w0.t) / cfg.step).round() as usize;
    let oracle = rk4(
        |t, x: &[f64]| {
            let g = coulomb_gradient(&[x[0], x[1], t]);
            vec![x[2], x[3], -k * g[0] / m - gamma * x[2], -k * g[1] / m - gamma * x[3]]
        },
        w0.t,
        &[w0.q[0], w0.q[1], w0.v[0], w0.v[1]],
        cfg.step,
        steps,
    );
    let path = traj.points();
    let mut oracle_dev = 0.0f64;
    if oracle.len() == path.len() {
        for (w, (_, o)) in path.iter().zip(&oracle) {
            oracle_dev = oracle_dev.max((w.q[0] - o[0]).abs()).max((w.q[1] - o[1]).abs());
        }
    } else {
        oracle_dev = f64::INFINITY;
    }
    let radius = |w: &PontryaginPoint| w.q[0].hypot(w.q[1]);
    let (r0, r1) = (radius(&path[0]), radius(path.last().unwrap()));
    let bounded = path.iter().all(|w| w.q.iter().all(|x| x.is_finite()) && radius(w) <= 2.0 * r0);
    outcome(
        z_dev <= 1e-8 && planar <= 1e-6 && oracle_dev <= 1e-6 && bounded && r1 < r0,
        format!(
            "|z - t| {z_dev:.2e} (tol 1e-8); planar residual {planar:.2e}, oracle {oracle_dev:.2e} (tol 1e-6); radius {r0:.3} -> {r1:.3}"
        ),
    )
}

fn jets_fd() -> Outcome {
    let opts = VerifyOptions::default();
    let mut parts = Vec::new();
    let mut pass = true;
    for name in ["duffing", "drag", "charged_particle"] {
        let p = preset(name).unwrap();
        let r = check_jets_fd(&p.system, &points(&p, 100, SEED), &opts);
        pass &= r.passed();
        parts.push(format!("{name} {:.2e}/{:.0e}", r.value, r.tolerance));
    }
    outcome(pass, parts.join("; "))
}

fn dsl_fidelity() -> Outcome {
    let opts = VerifyOptions::default();
    let mut parts = Vec::new();
    let mut pass = true;
    for name in ["duffing", "drag", "charged_particle"] {
        let p = preset(name).unwrap();
        let r = check_dsl_native(&p, &points(&p, 100, SEED), &opts);
        pass &= r.passed();
        parts.push(format!("{name} {:.2e}", r.value));
    }
    let mut rng = StdRng::seed_from_u64(SEED);
    let alphabet: Vec<char> = "0123456789.eE+-*/^()qvpst, sincoexpl_abz".chars().collect();
    let previous = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let mut crashes = 0;
    for i in 0..10_000 {
        let len = rng.gen_range(0..=256);
        let text: String = if i % 2 == 0 {
            let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            String::from_utf8_lossy(&bytes).into_owned()
        } else {
            (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
        };
        if panic::catch_unwind(|| {
            let _ = parse(&text, 3, true);
        })
        .is_err()
        {
            crashes += 1;
        }
    }
    panic::set_hook(previous);
    pass &= crashes == 0;
    outcome(pass, format!("{} (tol 1e-12); fuzz 10000 inputs, {crashes} crashes", parts.join("; ")))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome, Option<f64>);
    let criteria: [Criterion; 9] = [
        ("regular one-step closure", regular_closure, Some(1.0)),
        ("singular ladder", singular_ladder, Some(5.0)),
        ("Duffing ODE oracle", duffing_oracle, None),
        ("harmonic limit", harmonic_limit, None),
        ("equivalence of pictures", equivalence, None),
        ("residual convergence order", residual_order, None),
        ("charged particle scenario", charged_scenario, None),
        ("AD vs finite differences", jets_fd, None),
        ("DSL fidelity and fuzz", dsl_fidelity, None),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(run).unwrap_or_else(|_| outcome(false, "panicked"));
        let secs = start.elapsed().as_secs_f64();
        let in_time = budget.map_or(true, |b| secs < b);
        let pass = result.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget = budget.map(|b| format!(" (budget {b} s)")).unwrap_or_default();
        println!(
            "criterion {} {} {name}: {} [{secs:.2} s{budget}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            result.summary
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
