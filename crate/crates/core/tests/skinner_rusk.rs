mod common;

use cocontact::dsl::{parse, ParamTable};
use cocontact::mechanics::{regularity, Verdict, DEFAULT_RANK_TOL};
use cocontact::skinner_rusk::{
    assemble_Z, coupling, hamiltonian, primary_constraints, project_onto_ladder, run_constraint_algorithm,
    tangency_solve, AlgorithmOptions, ConstraintLadder, LadderError, LadderStatus, Origin, PontryaginPoint,
    ProjectionOptions,
};
use cocontact::systems::{charged_particle, preset, PRESET_NAMES};
use cocontact::verify::{check_ladder, project_below, VerifyOptions};
use cocontact::{LagrangianPoint, LagrangianSystem};
use common::{assert_close, points};
use proptest::prelude::*;

const DUFFING: (f64, f64, f64, f64, f64) = (1.0, 5.0, 8.0, 0.02, 0.5);
const DRAG: (f64, f64, f64, f64, f64) = (0.1, 30.0, 9.81, 2.0, 0.5);
const CHARGED_K: f64 = 2e-4;
const CHARGED_GAMMA: f64 = 0.3;
const COULOMB: f64 = 8.987_551_792_3e9 * -2e-4;

fn drag_mass(t: f64) -> (f64, f64) {
    let (_, _, _, m0, r) = DRAG;
    (m0 * (1.0 + (-r * t).exp()) / 2.0, -m0 * r * (-r * t).exp() / 2.0)
}

fn lift(system: &LagrangianSystem, x: &LagrangianPoint) -> PontryaginPoint {
    PontryaginPoint::from_lagrangian(system, x).unwrap()
}

fn inline(n: usize, text: &str) -> LagrangianSystem {
    LagrangianSystem::from_expr(n, text, parse(text, n, false).unwrap(), ParamTable::new()).unwrap()
}

/// Gradient of `C/r` with `r = |q|`, and the Hessian column along `z`.
fn coulomb_derivatives(q: &[f64]) -> ([f64; 3], [f64; 3]) {
    let r = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
    let r3 = r * r * r;
    let r5 = r3 * r * r;
    let grad = [-COULOMB * q[0] / r3, -COULOMB * q[1] / r3, -COULOMB * q[2] / r3];
    let col_z = [
        3.0 * COULOMB * q[0] * q[2] / r5,
        3.0 * COULOMB * q[1] * q[2] / r5,
        COULOMB * (3.0 * q[2] * q[2] / r5 - 1.0 / r3),
    ];
    (grad, col_z)
}

#[test]
fn coupling_examples() {
    let w = PontryaginPoint::new(0.0, vec![0.0, 0.0], vec![3.0, 4.0], vec![1.0, 2.0], 0.0);
    assert_eq!(coupling(&w), 11.0);
    let w = PontryaginPoint::new(0.0, vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 2.0], 0.0);
    assert_eq!(coupling(&w), 0.0);
    let charged = preset("charged_particle").unwrap();
    for x in points(&charged, 10, 41) {
        let w = lift(&charged.system, &x);
        let v2: f64 = x.v[..3].iter().map(|v| v * v).sum();
        assert_close(coupling(&w), v2, 1e-12 * v2.max(1.0), "p.v");
    }
}

#[test]
fn hamiltonian_examples() {
    let (alpha, beta, gamma, delta, omega) = DUFFING;
    let duffing = preset("duffing").unwrap();
    for x in points(&duffing, 10, 42) {
        let w = PontryaginPoint::new(x.t, x.q.clone(), x.v.clone(), vec![x.v[0] + 0.3], x.s);
        let (t, q, v, p, s) = (w.t, w.q[0], w.v[0], w.p[0], w.s);
        let want = p * v - 0.5 * v * v + 0.5 * alpha * q * q + 0.25 * beta * q.powi(4) + delta * s
            - gamma * q * (omega * t).cos();
        assert_close(hamiltonian(&duffing.system, &w).unwrap(), want, 1e-12 * want.abs().max(1.0), "duffing H");
    }
    let (dg, force, g, _, _) = DRAG;
    let drag = preset("drag").unwrap();
    for x in points(&drag, 10, 43) {
        let w = PontryaginPoint::new(x.t, x.q.clone(), x.v.clone(), vec![0.7], x.s);
        let (m, _) = drag_mass(w.t);
        let (y, v, p, s) = (w.q[0], w.v[0], w.p[0], w.s);
        let want = p * v - 0.5 * m * v * v - m * g / (2.0 * dg) * ((-2.0 * dg * y).exp() - 1.0) + 2.0 * dg * v * s
            - force / (2.0 * dg);
        assert_close(hamiltonian(&drag.system, &w).unwrap(), want, 1e-12 * want.abs().max(1.0), "drag H");
    }
}

#[test]
fn primary_constraint_examples() {
    let duffing = preset("duffing").unwrap();
    let w = PontryaginPoint::new(0.4, vec![0.1], vec![2.0], vec![-1.0], 0.5);
    assert_eq!(primary_constraints(&duffing.system, &w).unwrap(), vec![-3.0]);
    let (dg, ..) = DRAG;
    let drag = preset("drag").unwrap();
    let (m, _) = drag_mass(0.4);
    let xi = primary_constraints(&drag.system, &w).unwrap();
    assert_close(xi[0], -1.0 - m * 2.0 + 2.0 * dg * 0.5, 1e-14, "drag xi");
    let charged = preset("charged_particle").unwrap();
    let w = PontryaginPoint::new(0.0, vec![2.0, 0.0, 0.0, 1.0], vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0], 0.0);
    assert_eq!(primary_constraints(&charged.system, &w).unwrap(), vec![4.0, 4.0, 4.0, 8.0]);
}

#[test]
fn duffing_tangency_fixes_acceleration() {
    let (alpha, beta, gamma, delta, omega) = DUFFING;
    let p = preset("duffing").unwrap();
    let prior = ConstraintLadder::primary(&p.system);
    assert_eq!(prior.status(), LadderStatus::Open);
    for x in points(&p, 20, 44) {
        let w = lift(&p.system, &x);
        let sol = tangency_solve(&p.system, &w, &prior, &AlgorithmOptions::default()).unwrap();
        let want = -alpha * x.q[0] - beta * x.q[0].powi(3) - delta * x.v[0] + gamma * (omega * x.t).cos();
        assert_close(sol.c[0], want, 1e-12 * want.abs().max(1.0), "C");
        assert!(sol.new_constraints.is_empty() && sol.extended.is_none() && sol.undetermined.is_empty());
    }
}

#[test]
fn drag_tangency_fixes_acceleration() {
    let (dg, force, g, _, _) = DRAG;
    let p = preset("drag").unwrap();
    let prior = ConstraintLadder::primary(&p.system);
    for x in points(&p, 20, 45) {
        let w = lift(&p.system, &x);
        let sol = tangency_solve(&p.system, &w, &prior, &AlgorithmOptions::default()).unwrap();
        let (m, mdot) = drag_mass(x.t);
        let v = x.v[0];
        let want = force / m - dg * v * v - mdot / m * v - g;
        assert_close(sol.c[0], want, 1e-12 * want.abs().max(1.0), "C");
        assert!(sol.new_constraints.is_empty());
    }
}

#[test]
fn charged_first_tangency() {
    let p = preset("charged_particle").unwrap();
    let prior = ConstraintLadder::primary(&p.system);
    for x in points(&p, 20, 46) {
        let w = lift(&p.system, &x);
        let sol = tangency_solve(&p.system, &w, &prior, &AlgorithmOptions::default()).unwrap();
        let (grad, _) = coulomb_derivatives(&x.q);
        let df = [0.0, 0.0, 1.0];
        for i in 0..3 {
            let want = x.q[3] * df[i] - CHARGED_K * grad[i] - CHARGED_GAMMA * w.p[i];
            assert_close(sol.c[i], want, 1e-10 * want.abs().max(1.0), "m C_i");
        }
        assert_eq!(sol.undetermined.len(), 1);
        assert_close(sol.undetermined[0][3].abs(), 1.0, 1e-15, "free C_lambda");
        assert_eq!(sol.new_constraints.len(), 1);
        let xi2 = &sol.new_constraints[0];
        assert_eq!(xi2.generation(), 2);
        assert_close(xi2.value(&w).unwrap(), x.q[2] - x.t, 1e-10, "xi2 = z - t");
    }
}

#[test]
fn tangency_needs_a_feasible_point() {
    let p = preset("duffing").unwrap();
    let w = PontryaginPoint::new(0.0, vec![1.0], vec![0.0], vec![0.5], 0.0);
    let err = tangency_solve(&p.system, &w, &ConstraintLadder::primary(&p.system), &AlgorithmOptions::default())
        .unwrap_err();
    assert!(matches!(err, LadderError::InfeasiblePoint { .. }), "{err}");
}

#[test]
fn regular_presets_close_in_one_step() {
    for name in ["free_particle", "duffing", "harmonic", "drag"] {
        let p = preset(name).unwrap();
        for x in points(&p, 20, 47) {
            let (ladder, _) = run_constraint_algorithm(&p.system, &lift(&p.system, &x), &AlgorithmOptions::default()).unwrap();
            assert_eq!((ladder.status(), ladder.depth(), ladder.len()), (LadderStatus::Closed, 1, 1), "{name}");
        }
    }
}

#[test]
fn charged_ladder_generations() {
    let p = preset("charged_particle").unwrap();
    let w = lift(&p.system, &p.initial);
    let (ladder, _) = run_constraint_algorithm(&p.system, &w, &AlgorithmOptions::default()).unwrap();
    assert_eq!(ladder.status(), LadderStatus::Closed);
    let sizes: Vec<usize> = ladder.generations().iter().map(Vec::len).collect();
    assert_eq!(sizes, vec![4, 1, 1, 1, 1]);
    let labels: Vec<String> = ladder.constraints().iter().map(|c| c.label().to_string()).collect();
    assert_eq!(labels, ["xi1_1", "xi1_2", "xi1_3", "xi1_4", "xi2_1", "xi3_1", "xi4_1", "xi5_1"]);
    for (k, c) in ladder.constraints().iter().enumerate().take(4) {
        assert_eq!(c.origin(), &Origin::Primary { index: k });
    }
    let last = ladder.reports().last().unwrap();
    assert_eq!((last.rows, last.rank, last.undetermined), (8, 4, 0));
    assert_eq!(last.pivot_rows, vec![0, 1, 2, 7]);

    let probe = ladder.probe().unwrap();
    assert!(ladder.max_violation(probe).unwrap() <= 1e-8);
    assert_close(probe.v[2], 1.0, 1e-12, "v_z projected");
    let (grad, col_z) = coulomb_derivatives(&probe.q);
    assert_close(probe.q[3], CHARGED_K * grad[2] + CHARGED_GAMMA, 1e-10, "lambda projected");
    let vl = CHARGED_K * (col_z[0] * probe.v[0] + col_z[1] * probe.v[1] + col_z[2]);
    assert_close(probe.v[3], vl, 1e-10, "v_lambda projected");
}

#[test]
fn charged_ladder_values_match_closed_forms() {
    let p = preset("charged_particle").unwrap();
    let w0 = lift(&p.system, &p.initial);
    let (ladder, _) = run_constraint_algorithm(&p.system, &w0, &AlgorithmOptions::default()).unwrap();
    let gens = ladder.generations();
    let mut worst = 0.0f64;
    for x in points(&p, 100, 48) {
        let w = lift(&p.system, &x);
        let at = |g: usize| project_below(&ladder, g, &w).unwrap();
        let w2 = at(2);
        worst = worst.max((gens[1][0].value(&w2).unwrap() - (w2.q[2] - w2.t)).abs());
        let w3 = at(3);
        worst = worst.max((gens[2][0].value(&w3).unwrap() - (w3.v[2] - 1.0)).abs());
        let w4 = at(4);
        let (grad, _) = coulomb_derivatives(&w4.q);
        let xi4 = w4.q[3] - CHARGED_K * grad[2] - CHARGED_GAMMA;
        worst = worst.max((gens[3][0].value(&w4).unwrap() - xi4).abs() / xi4.abs().max(1.0));
    }
    assert!(worst <= 1e-10, "{worst:e}");
}

#[test]
fn generic_constraint_gives_total_time_derivative() {
    let phi = parse("1/sqrt(q1^2 + q2^2 + q3^2)", 4, false).unwrap();
    let f = parse("q3 - 0.5*sin(t)*q1", 4, false).unwrap();
    let p = charged_particle(phi, f, 1.0, 0.5, 0.3, ParamTable::new()).unwrap();
    let w0 = lift(&p.system, &p.initial);
    let (ladder, _) = run_constraint_algorithm(&p.system, &w0, &AlgorithmOptions::default()).unwrap();
    assert_eq!(ladder.status(), LadderStatus::Closed);
    let gens = ladder.generations();
    assert!(gens.len() >= 3);
    for x in points(&p, 30, 49) {
        let w = project_below(&ladder, 3, &lift(&p.system, &x)).unwrap();
        let want = -0.5 * w.t.cos() * w.q[0] - 0.5 * w.t.sin() * w.v[0] + w.v[2];
        assert_close(gens[2][0].value(&w).unwrap(), want, 1e-10, "xi3");
        let f_here = w.q[2] - 0.5 * w.t.sin() * w.q[0];
        assert_close(gens[1][0].value(&w).unwrap(), f_here, 1e-10, "xi2");
    }
}

#[test]
fn verify_regression_passes_on_every_preset() {
    let opts = VerifyOptions::default();
    for name in PRESET_NAMES {
        let p = preset(name).unwrap();
        for r in check_ladder(&p, &points(&p, 100, 50), &opts) {
            assert!(r.passed(), "{name}: {r}");
        }
    }
}

#[test]
fn assembled_fields() {
    let (alpha, beta, gamma, delta, omega) = DUFFING;
    let duffing = preset("duffing").unwrap();
    let closed = ConstraintLadder::primary_closed(&duffing.system);
    for x in points(&duffing, 100, 51) {
        let w = lift(&duffing.system, &x);
        let z = assemble_Z(&duffing.system, &w, &closed, None).unwrap();
        let c = -alpha * x.q[0] - beta * x.q[0].powi(3) - delta * x.v[0] + gamma * (omega * x.t).cos();
        assert_close(z.c[0], c, 1e-12 * c.abs().max(1.0), "C");
        assert_close(z.d[0], z.c[0], 1e-12 * c.abs().max(1.0), "D = C on W1");
        assert_eq!(z.e, duffing.system.value(&x).unwrap());
    }

    let (dg, _, g, _, _) = DRAG;
    let drag = preset("drag").unwrap();
    let closed = ConstraintLadder::primary_closed(&drag.system);
    for x in points(&drag, 20, 52) {
        let w = lift(&drag.system, &x);
        let z = assemble_Z(&drag.system, &w, &closed, None).unwrap();
        let (m, _) = drag_mass(x.t);
        let d = -m * g * (-2.0 * dg * x.q[0]).exp() - 2.0 * dg * x.v[0] * w.p[0];
        assert_close(z.d[0], d, 1e-12 * d.abs().max(1.0), "D");
    }

    let free = preset("free_particle").unwrap();
    let w = PontryaginPoint::new(0.0, vec![0.3], vec![2.0], vec![2.0], 0.1);
    let z = assemble_Z(&free.system, &w, &ConstraintLadder::primary_closed(&free.system), None).unwrap();
    assert_eq!(z.to_vec(), vec![1.0, 2.0, 0.0, 0.0, 2.0]);
}

#[test]
fn assembly_needs_a_closed_ladder() {
    let p = preset("duffing").unwrap();
    let w = lift(&p.system, &p.initial);
    let err = assemble_Z(&p.system, &w, &ConstraintLadder::primary(&p.system), None).unwrap_err();
    assert_eq!(err, LadderError::LadderNotClosed(LadderStatus::Open));
}

#[test]
fn structural_identities_on_the_ladder() {
    for name in PRESET_NAMES {
        let p = preset(name).unwrap();
        let w0 = lift(&p.system, &p.initial);
        let (ladder, _) = run_constraint_algorithm(&p.system, &w0, &AlgorithmOptions::default()).unwrap();
        for x in points(&p, 40, 53) {
            let w = project_onto_ladder(&ladder, &lift(&p.system, &x), &ProjectionOptions::default()).unwrap();
            let z = assemble_Z(&p.system, &w, &ladder, None).unwrap();
            assert_eq!(z.a, 1.0);
            assert_eq!(z.b, w.v);
            let l = p.system.value(&w.lagrangian()).unwrap();
            assert_eq!(z.e, l);
            let pb: f64 = w.p.iter().zip(&z.b).map(|(p, b)| p * b).sum();
            let h = hamiltonian(&p.system, &w).unwrap();
            assert_close(pb - h, l, 1e-12 * l.abs().max(1.0), name);
            let zv = z.to_vec();
            for c in ladder.constraints() {
                let grad = c.jet(&w, 1).unwrap().grad().to_vec();
                let lie: f64 = grad.iter().zip(&zv).map(|(a, b)| a * b).sum();
                assert!(lie.abs() <= 1e-9, "{name} {}: {lie:e}", c.label());
            }
        }
    }
}

#[test]
fn incompatible_and_truncated_ladders() {
    let system = inline(1, "q1 - s");
    let w = lift(&system, &LagrangianPoint::new(0.0, vec![0.0], vec![0.0], 0.0));
    let (ladder, _) = run_constraint_algorithm(&system, &w, &AlgorithmOptions::default()).unwrap();
    assert_eq!(ladder.status(), LadderStatus::Incompatible);
    assert!(!ladder.incompatibilities().is_empty());

    let charged = preset("charged_particle").unwrap();
    let opts = AlgorithmOptions {
        max_generations: 2,
        ..AlgorithmOptions::default()
    };
    let (ladder, _) = run_constraint_algorithm(&charged.system, &lift(&charged.system, &charged.initial), &opts).unwrap();
    assert_eq!(ladder.status(), LadderStatus::MaxIterations);
}

#[test]
fn degenerate_inline_lagrangian_closes_with_a_free_direction() {
    let system = inline(1, "v1*s");
    let w = lift(&system, &LagrangianPoint::new(0.0, vec![0.5], vec![1.0], 2.0));
    let (ladder, z) = run_constraint_algorithm(&system, &w, &AlgorithmOptions::default()).unwrap();
    assert_eq!((ladder.status(), ladder.depth()), (LadderStatus::Closed, 1));
    assert_eq!(ladder.reports()[0].rank, 0);
    assert_eq!(z.undetermined.len(), 1);
    assert_eq!(z.c, vec![0.0]);
    let probe = ladder.probe().unwrap();
    let gauged = assemble_Z(&system, probe, &ladder, Some(&[0.7])).unwrap();
    assert_close(gauged.c[0].abs(), 0.7, 1e-15, "gauge");
}

fn family(a: f64, b: f64, c: f64, d: f64) -> String {
    format!("{a}*(1 + 0.5*sin(q1))*v1^2 + {b}*q1*v1*s + {c}*cos(q1 - t) - {d}*s + 0.1*v1^3")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn regular_lagrangians_close_at_depth_one(
        a in 0.5..3.0f64, b in -1.0..1.0f64, c in -2.0..2.0f64, d in -1.0..1.0f64,
        x in proptest::collection::vec(-1.0..1.0f64, 4),
    ) {
        let system = inline(1, &family(a, b, c, d));
        let point = LagrangianPoint::new(x[0], vec![x[1]], vec![x[2]], x[3]);
        let reg = regularity(&system, &point, DEFAULT_RANK_TOL).unwrap();
        prop_assume!(reg.verdict == Verdict::Regular);
        let (ladder, z) = run_constraint_algorithm(&system, &lift(&system, &point), &AlgorithmOptions::default()).unwrap();
        prop_assert_eq!(ladder.status(), LadderStatus::Closed);
        prop_assert_eq!(ladder.depth(), 1);
        prop_assert_eq!(z.a, 1.0);
        prop_assert_eq!(&z.b, &point.v);
    }
}
