//! Numerical identity checks for a preset: derivatives against finite
//! differences, DSL against native builders, the constraint ladder against
//! closed forms, the three dynamical pictures against each other, and the
//! convergence order of the residual channels.

use std::fmt;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::dynamics::{cross_check_equivalence, integrate, prepare, residual_report, IntegratorConfig};
use crate::jets::{eval_jet, ScalarField};
use crate::mechanics::{regularity, LagrangianPoint, LagrangianSystem, Verdict, DEFAULT_RANK_TOL};
use crate::skinner_rusk::{
    assemble_Z, project_onto_ladder, run_constraint_algorithm, AlgorithmOptions, ConstraintLadder, LadderStatus,
    PontryaginPoint, ProjectionOptions,
};
use crate::systems::SystemPreset;

/// Finite-difference steps and relative tolerances for first, second and
/// third partials.
pub const FD_STEPS: [f64; 3] = [1e-5, 1e-4, 1e-3];
pub const FD_TOLS: [f64; 3] = [1e-6, 1e-5, 1e-4];
pub const DSL_TOL: f64 = 1e-12;
pub const LADDER_TOL: f64 = 1e-10;
pub const EQUIVALENCE_TOL: f64 = 1e-6;
/// Accepted range of the residual ratio when the step is halved.
pub const ORDER_BAND: (f64, f64) = (12.0, 20.0);
/// Channels whose coarse-step maximum is below this are at roundoff and
/// exempt from the order check.
pub const ROUNDOFF_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub points: usize,
    /// Replaces every tolerance when set.
    pub tolerance: Option<f64>,
    /// Horizon of the equivalence run (defaults to the preset's).
    pub t_end: Option<f64>,
    /// Step of the equivalence run (defaults to the preset's).
    pub step: Option<f64>,
    /// Horizon of the convergence-order runs.
    pub order_horizon: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 42,
            points: 100,
            tolerance: None,
            t_end: None,
            step: None,
            order_horizon: 1.0,
        }
    }
}

impl VerifyOptions {
    fn tol(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    /// The measured quantity (an error, or a ratio for order checks).
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
    pub seconds: f64,
}

impl CheckResult {
    fn measured(name: &str, value: f64, tolerance: f64, detail: String) -> Self {
        CheckResult {
            name: name.into(),
            status: if value <= tolerance { CheckStatus::Pass } else { CheckStatus::Fail },
            value,
            tolerance,
            detail,
            seconds: 0.0,
        }
    }

    fn failed(name: &str, detail: String) -> Self {
        CheckResult {
            name: name.into(),
            status: CheckStatus::Fail,
            value: f64::NAN,
            tolerance: f64::NAN,
            detail,
            seconds: 0.0,
        }
    }

    fn skipped(name: &str, detail: &str) -> Self {
        CheckResult {
            name: name.into(),
            status: CheckStatus::Skip,
            value: f64::NAN,
            tolerance: f64::NAN,
            detail: detail.into(),
            seconds: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.status != CheckStatus::Fail
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match self.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skip => "SKIP",
        };
        write!(
            f,
            "{status} {:<28} value={:<12.4e} tol={:<10.3e} {}",
            self.name, self.value, self.tolerance, self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub system: String,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed()).collect()
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "system: {}", self.system)?;
        for c in &self.checks {
            writeln!(f, "  {c}")?;
        }
        Ok(())
    }
}

/// Runs every check on `preset`.
pub fn verify_preset(preset: &SystemPreset, opts: &VerifyOptions) -> VerifyReport {
    let mut rng = StdRng::seed_from_u64(opts.seed);
    let points = sample_points(preset, opts.points, &mut rng);
    let mut checks = Vec::new();
    let mut timed = |run: &mut dyn FnMut() -> Vec<CheckResult>| {
        let start = Instant::now();
        let mut out = run();
        let secs = start.elapsed().as_secs_f64() / out.len().max(1) as f64;
        for c in &mut out {
            c.seconds = secs;
        }
        checks.extend(out);
    };
    timed(&mut || vec![check_jets_fd(&preset.system, &points, opts)]);
    timed(&mut || vec![check_dsl_native(preset, &points, opts)]);
    timed(&mut || check_ladder(preset, &points, opts));
    timed(&mut || vec![check_equivalence(preset, opts)]);
    timed(&mut || vec![check_residual_order(preset, opts)]);
    VerifyReport {
        system: preset.name.clone(),
        checks,
    }
}

/// Random Lagrangian-space points around the preset's initial condition:
/// `t` uniform on the run interval, every other coordinate within ±1 of its
/// initial value.
pub fn sample_points(preset: &SystemPreset, count: usize, rng: &mut StdRng) -> Vec<LagrangianPoint> {
    let x0 = &preset.initial;
    let t_end = preset.integrator.t_end;
    (0..count)
        .map(|_| {
            let mut jitter = |x: f64| x + rng.gen_range(-1.0..1.0);
            let q = x0.q.iter().map(|&x| jitter(x)).collect();
            let v = x0.v.iter().map(|&x| jitter(x)).collect();
            let s = jitter(x0.s);
            let t = rng.gen_range(x0.t..t_end.max(x0.t + 1.0));
            LagrangianPoint::new(t, q, v, s)
        })
        .collect()
}

/// Central finite difference of mixed order `idx.len()` (1..=3) with step
/// `h` along each listed coordinate.
pub fn central_difference(f: &dyn ScalarField, x: &[f64], idx: &[usize], h: f64) -> Result<f64, crate::EvalError> {
    let m = idx.len();
    let mut total = 0.0;
    for signs in 0..(1u32 << m) {
        let mut y = x.to_vec();
        let mut sign = 1.0;
        for (b, &i) in idx.iter().enumerate() {
            if signs & (1 << b) != 0 {
                y[i] += h;
            } else {
                y[i] -= h;
                sign = -sign;
            }
        }
        total += sign * f.eval(&y)?;
    }
    Ok(total / (2.0 * h).powi(m as i32))
}

/// Largest relative error between exact partials of `L` and central
/// differences, over orders one to three. Each error is scaled by the
/// largest partial of its order at the point (at least one).
pub fn check_jets_fd(system: &LagrangianSystem, points: &[LagrangianPoint], opts: &VerifyOptions) -> CheckResult {
    const NAME: &str = "jets.ad_vs_fd";
    let field = system.field().as_ref();
    let dim = field.dim();
    let mut worst = [0.0f64; 3];
    let mut where_ = [String::new(), String::new(), String::new()];
    for x in points {
        let xv = x.to_vec();
        let jet = match eval_jet(field, &xv, 3) {
            Ok(j) => j,
            Err(e) => return CheckResult::failed(NAME, format!("evaluation failed: {e}")),
        };
        let mut scale = [1.0f64; 3];
        for i in 0..dim {
            scale[0] = scale[0].max(jet.d1(i).abs());
            for j in i..dim {
                scale[1] = scale[1].max(jet.d2(i, j).abs());
                for k in j..dim {
                    scale[2] = scale[2].max(jet.d3(i, j, k).abs());
                }
            }
        }
        let mut record = |order: usize, idx: &[usize], exact: f64| -> Result<(), crate::EvalError> {
            let fd = central_difference(field, &xv, idx, FD_STEPS[order - 1])?;
            let err = (exact - fd).abs() / fd.abs().max(scale[order - 1]);
            if err > worst[order - 1] {
                worst[order - 1] = err;
                where_[order - 1] = format!("{idx:?}");
            }
            Ok(())
        };
        let mut run = || -> Result<(), crate::EvalError> {
            for i in 0..dim {
                record(1, &[i], jet.d1(i))?;
                for j in i..dim {
                    record(2, &[i, j], jet.d2(i, j))?;
                    for k in j..dim {
                        record(3, &[i, j, k], jet.d3(i, j, k))?;
                    }
                }
            }
            Ok(())
        };
        if let Err(e) = run() {
            return CheckResult::failed(NAME, format!("evaluation failed: {e}"));
        }
    }
    let ratios: Vec<f64> = (0..3).map(|k| worst[k] / opts.tol(FD_TOLS[k])).collect();
    let k = (0..3).max_by(|&a, &b| ratios[a].total_cmp(&ratios[b])).unwrap();
    CheckResult::measured(
        NAME,
        worst[k],
        opts.tol(FD_TOLS[k]),
        format!(
            "worst relative errors by order {:.1e}/{:.1e}/{:.1e}; binding order {} at {}",
            worst[0],
            worst[1],
            worst[2],
            k + 1,
            where_[k]
        ),
    )
}

/// Order-3 jets of the DSL rendition against the native builder.
pub fn check_dsl_native(preset: &SystemPreset, points: &[LagrangianPoint], opts: &VerifyOptions) -> CheckResult {
    const NAME: &str = "dsl.native_agreement";
    if preset.expected.is_none() {
        return CheckResult::skipped(NAME, "system is defined by its DSL text");
    }
    let dsl = match preset.dsl_system() {
        Ok(s) => s,
        Err(e) => return CheckResult::failed(NAME, format!("DSL rendition failed: {e}")),
    };
    let mut worst = 0.0f64;
    for x in points {
        let (a, b) = match (preset.system.jet(x, 3), dsl.jet(x, 3)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return CheckResult::failed(NAME, format!("evaluation failed: {e}")),
        };
        let dim = a.dim();
        let mut cmp = |u: f64, w: f64| worst = worst.max((u - w).abs() / u.abs().max(1.0));
        cmp(a.value(), b.value());
        for i in 0..dim {
            cmp(a.d1(i), b.d1(i));
            for j in 0..dim {
                cmp(a.d2(i, j), b.d2(i, j));
                for k in 0..dim {
                    cmp(a.d3(i, j, k), b.d3(i, j, k));
                }
            }
        }
    }
    CheckResult::measured(NAME, worst, opts.tol(DSL_TOL), format!("{} points", points.len()))
}

/// Projects `w` onto the constraints of `ladder` whose generation is below
/// `generation`.
pub fn project_below(
    ladder: &ConstraintLadder,
    generation: usize,
    w: &PontryaginPoint,
) -> Result<PontryaginPoint, crate::skinner_rusk::LadderError> {
    let keep: Vec<_> = ladder
        .constraints()
        .iter()
        .filter(|c| c.generation() < generation)
        .map(|c| c.origin().clone())
        .collect();
    if keep.is_empty() {
        return Ok(w.clone());
    }
    let prefix = ConstraintLadder::from_origins(ladder.system(), keep, LadderStatus::Open);
    project_onto_ladder(&prefix, w, &ProjectionOptions::default())
}

fn scaled_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs() / y.abs().max(1.0)))
}

/// Ladder structure, constraint closed forms and assembled coefficients.
pub fn check_ladder(preset: &SystemPreset, points: &[LagrangianPoint], opts: &VerifyOptions) -> Vec<CheckResult> {
    let system = &preset.system;
    let Some(expected) = &preset.expected else {
        return vec![check_ladder_structure(system, points)];
    };
    let tol = opts.tol(LADDER_TOL);
    let mut structure: Option<String> = None;
    let mut constraint_err = 0.0f64;
    let mut c_err = 0.0f64;
    let mut d_err = 0.0f64;
    let mut failure: Option<String> = None;
    for x in points {
        let run = || -> Result<(f64, f64, f64, Option<String>), String> {
            let w = PontryaginPoint::from_lagrangian(system, x).map_err(|e| e.to_string())?;
            let (ladder, z) =
                run_constraint_algorithm(system, &w, &AlgorithmOptions::default()).map_err(|e| e.to_string())?;
            let mut mismatch = None;
            if ladder.status() != LadderStatus::Closed || ladder.depth() != expected.depth {
                mismatch = Some(format!(
                    "status {:?} depth {} (expected Closed, depth {})",
                    ladder.status(),
                    ladder.depth(),
                    expected.depth
                ));
                return Ok((0.0, 0.0, 0.0, mismatch));
            }
            let probe = ladder.probe().cloned().unwrap_or(w.clone());
            let assembled = assemble_Z(system, &probe, &ladder, None).map_err(|e| e.to_string())?;
            let c = match &expected.c {
                Some(f) => {
                    let want = f(&probe).map_err(|e| e.to_string())?;
                    scaled_diff(&z.c, &want).max(scaled_diff(&assembled.c, &want))
                }
                None => 0.0,
            };
            let want_d = (expected.d)(&probe).map_err(|e| e.to_string())?;
            let d = scaled_diff(&assembled.d, &want_d);
            let gens = ladder.generations();
            let mut xi = 0.0f64;
            for ec in &expected.ladder {
                let Some(cf) = gens.get(ec.generation - 1).and_then(|g| g.get(ec.position)) else {
                    mismatch = Some(format!("missing constraint {} in generation {}", ec.label, ec.generation));
                    break;
                };
                let wp = project_below(&ladder, ec.generation, &w).map_err(|e| e.to_string())?;
                let got = cf.value(&wp).map_err(|e| e.to_string())?;
                let want = (ec.formula)(&wp).map_err(|e| e.to_string())?;
                xi = xi.max((got - want).abs() / want.abs().max(1.0));
            }
            Ok((c, d, xi, mismatch))
        };
        match run() {
            Ok((c, d, xi, mismatch)) => {
                c_err = c_err.max(c);
                d_err = d_err.max(d);
                constraint_err = constraint_err.max(xi);
                if structure.is_none() {
                    structure = mismatch;
                }
            }
            Err(e) => {
                failure.get_or_insert(e);
            }
        }
    }
    if let Some(e) = failure {
        return vec![CheckResult::failed("ladder.regression", e)];
    }
    let mut out = vec![match structure {
        Some(m) => CheckResult::failed("ladder.structure", m),
        None => CheckResult::measured(
            "ladder.structure",
            0.0,
            0.0,
            format!("closed at depth {} at {} points", expected.depth, points.len()),
        ),
    }];
    if expected.ladder.is_empty() {
        out.push(CheckResult::skipped("ladder.constraints", "no closed forms beyond the primary constraints"));
    } else {
        out.push(CheckResult::measured(
            "ladder.constraints",
            constraint_err,
            tol,
            format!("{} closed forms", expected.ladder.len()),
        ));
    }
    if expected.c.is_some() {
        out.push(CheckResult::measured("ladder.coefficient_c", c_err, tol, String::new()));
    } else {
        out.push(CheckResult::skipped("ladder.coefficient_c", "no closed form"));
    }
    out.push(CheckResult::measured("ladder.coefficient_d", d_err, tol, String::new()));
    out
}

/// The ladder closes with the same depth and rank at every point.
fn check_ladder_structure(system: &LagrangianSystem, points: &[LagrangianPoint]) -> CheckResult {
    const NAME: &str = "ladder.structure";
    let mut first: Option<(usize, usize)> = None;
    for x in points {
        let run = || -> Result<(LadderStatus, usize, usize), String> {
            let w = PontryaginPoint::from_lagrangian(system, x).map_err(|e| e.to_string())?;
            let (ladder, _) =
                run_constraint_algorithm(system, &w, &AlgorithmOptions::default()).map_err(|e| e.to_string())?;
            let rank = ladder.reports().last().map_or(0, |r| r.rank);
            Ok((ladder.status(), ladder.depth(), rank))
        };
        match run() {
            Err(e) => return CheckResult::failed(NAME, e),
            Ok((status, _, _)) if status != LadderStatus::Closed => {
                return CheckResult::failed(NAME, format!("status {status:?} at t = {}", x.t))
            }
            Ok((_, depth, rank)) => match first {
                None => first = Some((depth, rank)),
                Some(f) if f != (depth, rank) => {
                    return CheckResult::failed(
                        NAME,
                        format!("depth/rank {depth}/{rank} differs from {}/{}", f.0, f.1),
                    )
                }
                _ => {}
            },
        }
    }
    let (depth, rank) = first.unwrap_or((0, 0));
    CheckResult::measured(
        NAME,
        0.0,
        0.0,
        format!("closed at depth {depth} (rank {rank}) at {} points", points.len()),
    )
}

/// Agreement of the unified, Lagrangian and Hamiltonian trajectories.
pub fn check_equivalence(preset: &SystemPreset, opts: &VerifyOptions) -> CheckResult {
    const NAME: &str = "dynamics.equivalence";
    match regularity(&preset.system, &preset.initial, DEFAULT_RANK_TOL) {
        Ok(r) if r.verdict == Verdict::Singular => {
            return CheckResult::skipped(NAME, "singular Lagrangian: no Lagrangian or Hamiltonian picture to compare")
        }
        Err(e) => return CheckResult::failed(NAME, e.to_string()),
        _ => {}
    }
    let cfg = IntegratorConfig {
        step: opts.step.unwrap_or(preset.integrator.step),
        t_end: opts.t_end.unwrap_or(preset.integrator.t_end),
        ..preset.integrator.clone()
    };
    match cross_check_equivalence(&preset.system, &preset.initial, &cfg) {
        Ok(r) => CheckResult::measured(
            NAME,
            r.max_deviation(),
            opts.tol(EQUIVALENCE_TOL),
            format!(
                "rho1 {:.2e}, rho2 {:.2e}, FL {:.2e} over {} samples",
                r.rho1_vs_x, r.rho2_vs_y, r.legendre_x_vs_y, r.samples
            ),
        ),
        Err(e) => CheckResult::failed(NAME, e.to_string()),
    }
}

/// Ratio of each residual channel's maximum between the two steps of
/// `order_steps`; channels at roundoff are exempt.
pub fn order_ratios(preset: &SystemPreset, horizon: f64) -> Result<Vec<(String, f64, f64, f64)>, String> {
    let (ladder, w0) =
        prepare(&preset.system, &preset.initial, &AlgorithmOptions::default()).map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for h in preset.order_steps {
        let cfg = IntegratorConfig {
            step: h,
            t_end: preset.initial.t + horizon,
            ..preset.integrator.clone()
        };
        let traj = integrate(&ladder, &w0, &cfg).map_err(|e| e.to_string())?;
        reports.push(residual_report(&traj));
    }
    Ok(crate::dynamics::Residuals::CHANNELS
        .iter()
        .map(|c| {
            let coarse = reports[0].channel(c).unwrap().max;
            let fine = reports[1].channel(c).unwrap().max;
            let ratio = preset.order_steps[0] / preset.order_steps[1];
            // Normalized to a halving of the step.
            let order_ratio = (coarse / fine).powf(2f64.ln() / ratio.ln());
            (c.to_string(), coarse, fine, order_ratio)
        })
        .collect())
}

pub fn check_residual_order(preset: &SystemPreset, opts: &VerifyOptions) -> CheckResult {
    const NAME: &str = "dynamics.residual_order";
    let ratios = match order_ratios(preset, opts.order_horizon) {
        Ok(r) => r,
        Err(e) => return CheckResult::failed(NAME, e),
    };
    let floor = opts.tolerance.unwrap_or(ROUNDOFF_FLOOR);
    let mut detail = Vec::new();
    let mut bad = Vec::new();
    let mut worst_dev = 0.0f64;
    let mut worst_ratio = f64::NAN;
    for (name, coarse, _, ratio) in &ratios {
        if *coarse < floor {
            detail.push(format!("{name} at roundoff ({coarse:.1e})"));
            continue;
        }
        detail.push(format!("{name} {ratio:.2}"));
        let dev = if *ratio < ORDER_BAND.0 {
            ORDER_BAND.0 / ratio
        } else {
            ratio / ORDER_BAND.1
        };
        if dev > worst_dev || worst_ratio.is_nan() {
            worst_dev = dev;
            worst_ratio = *ratio;
        }
        if !(*ratio >= ORDER_BAND.0 && *ratio <= ORDER_BAND.1) {
            bad.push(name.clone());
        }
    }
    CheckResult {
        name: NAME.into(),
        status: if bad.is_empty() { CheckStatus::Pass } else { CheckStatus::Fail },
        value: worst_ratio,
        tolerance: ORDER_BAND.0,
        detail: if bad.is_empty() {
            detail.join(", ")
        } else {
            format!("out of [{}, {}]: {}; {}", ORDER_BAND.0, ORDER_BAND.1, bad.join(", "), detail.join(", "))
        },
        seconds: 0.0,
    }
}
