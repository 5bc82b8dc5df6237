//! Trajectories of the assembled vector fields.
//!
//! [`integrate`] follows `Z` on the Pontryagin bundle; [`integrate_lagrangian`]
//! and [`integrate_hamiltonian`] follow the Herglotz field `X` and the
//! cocontact Hamiltonian field `Y` of a regular Lagrangian, with their samples
//! lifted to `W` so every trajectory has the same shape.
//!
//! Each sample carries four residual channels computed from the samples
//! alone (fourth-order finite differences in time):
//!
//! * `holonomy`: `max |q̇ − v|`
//! * `sdot`: `|ṡ − L|`
//! * `herglotz`: max-norm of the Herglotz–Euler–Lagrange residual with the
//!   accelerations taken from `v̇`
//! * `constraint_drift`: `max |ξ|` over the ladder
//!
//! All four measure integration error only, so they shrink at the order of
//! the integrator.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::jets::SpaceKind;
use crate::mechanics::{
    cocontact_hamiltonian_field, herglotz_field, herglotz_residual, legendre_map, regularity, HamiltonianPoint,
    LagrangianPoint, LagrangianSystem, LegendreHamiltonian, Verdict, DEFAULT_RANK_TOL,
};
use crate::skinner_rusk::{
    assemble_Z, project_onto_ladder, run_constraint_algorithm, AlgorithmOptions, ConstraintLadder, LadderError,
    LadderStatus, PontryaginPoint, ProjectionOptions, ZCoefficients, DEFAULT_FEAS_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Classical fixed-step Runge–Kutta.
    Rk4,
    /// Dormand–Prince 5(4) with step-size control.
    Rk45,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step, or the initial step of the adaptive method.
    pub step: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub t_end: f64,
    /// Project back onto the constraints after every step instead of only
    /// monitoring the drift.
    pub reproject: bool,
    /// Feasibility tolerance of the constraint monitor and the projection.
    pub feas_tol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk4,
            step: 1e-3,
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            t_end: 1.0,
            reproject: false,
            feas_tol: DEFAULT_FEAS_TOL,
            max_steps: 10_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn rk4(step: f64, t_end: f64) -> Self {
        IntegratorConfig {
            step,
            t_end,
            ..IntegratorConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |msg: &str| Err(DynamicsError::InvalidConfig(msg.to_string()));
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad("step must be positive and finite");
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.feas_tol > 0.0) {
            return bad("feasibility tolerance must be positive");
        }
        if !self.t_end.is_finite() {
            return bad("t_end must be finite");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Ladder(#[from] LadderError),
    #[error("step failure at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },
    #[error("lost the constraint submanifold at t = {t}: drift {drift:e}")]
    LadderLost { t: f64, drift: f64 },
    #[error("cannot eliminate the velocities at t = {t}: {reason}")]
    NonInvertibleLegendre { t: f64, reason: String },
    #[error("the constraint algorithm did not close: {0:?}")]
    NotClosed(LadderStatus),
}

/// Residual channels at one sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub holonomy: f64,
    pub sdot: f64,
    pub herglotz: f64,
    pub constraint_drift: f64,
}

impl Residuals {
    pub const CHANNELS: [&'static str; 4] = ["holonomy", "sdot", "herglotz", "constraint_drift"];

    pub fn channel(&self, name: &str) -> Option<f64> {
        match name {
            "holonomy" => Some(self.holonomy),
            "sdot" => Some(self.sdot),
            "herglotz" => Some(self.herglotz),
            "constraint_drift" => Some(self.constraint_drift),
            _ => None,
        }
    }

}

fn csv_channel_column(channel: &str) -> String {
    match channel {
        "constraint_drift" => "res_constraint".into(),
        c => format!("res_{c}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub point: PontryaginPoint,
    pub z: ZCoefficients,
    pub residuals: Residuals,
}

/// An integral curve sampled at strictly increasing times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub system: String,
    pub n: usize,
    /// The space the curve was integrated in.
    pub space: SpaceKind,
    samples: Vec<Sample>,
}

impl Trajectory {
    /// Builds a trajectory from points of `W`, computing the vector field
    /// and the residual channels with respect to `ladder`.
    pub fn from_points(
        ladder: &ConstraintLadder,
        space: SpaceKind,
        points: Vec<PontryaginPoint>,
    ) -> Result<Trajectory, DynamicsError> {
        let system = ladder.system();
        let mut zs = Vec::with_capacity(points.len());
        for w in &points {
            zs.push(match space {
                SpaceKind::Pontryagin => assemble_Z(system, w, ladder, None)?,
                _ => regular_z(system, w)?,
            });
        }
        Self::assemble(ladder, space, points, zs)
    }

    fn assemble(
        ladder: &ConstraintLadder,
        space: SpaceKind,
        points: Vec<PontryaginPoint>,
        zs: Vec<ZCoefficients>,
    ) -> Result<Trajectory, DynamicsError> {
        if points.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(DynamicsError::InvalidConfig("sample times must increase strictly".into()));
        }
        let residuals = residual_channels(ladder, &points)?;
        let samples = points
            .into_iter()
            .zip(zs)
            .zip(residuals)
            .map(|((point, z), residuals)| Sample { point, z, residuals })
            .collect();
        Ok(Trajectory {
            system: ladder.system().label().to_string(),
            n: ladder.system().n(),
            space,
            samples,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories are nonempty")
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.point.t).collect()
    }

    pub fn points(&self) -> Vec<PontryaginPoint> {
        self.samples.iter().map(|s| s.point.clone()).collect()
    }

    /// Header of the CSV export.
    pub fn csv_header(n: usize) -> String {
        Self::csv_columns(n, &Residuals::CHANNELS).join(",")
    }

    fn csv_columns(n: usize, channels: &[&str]) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        for prefix in ["q", "v", "p"] {
            cols.extend((1..=n).map(|i| format!("{prefix}{i}")));
        }
        cols.push("s".into());
        cols.extend(channels.iter().map(|c| csv_channel_column(c)));
        cols
    }

    /// One row per sample, every value with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        self.write_csv_channels(out, &Residuals::CHANNELS)
    }

    /// As [`Trajectory::write_csv`], keeping only the listed residual
    /// channels (names from [`Residuals::CHANNELS`]).
    pub fn write_csv_channels<W: Write>(&self, mut out: W, channels: &[&str]) -> io::Result<()> {
        if let Some(bad) = channels.iter().find(|c| !Residuals::CHANNELS.contains(c)) {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("unknown residual channel `{bad}`"),
            ));
        }
        writeln!(out, "{}", Self::csv_columns(self.n, channels).join(","))?;
        for s in &self.samples {
            let mut row: Vec<String> = s.point.to_vec().iter().map(|x| format!("{x:.16e}")).collect();
            row.extend(
                channels
                    .iter()
                    .map(|c| format!("{:.16e}", s.residuals.channel(c).unwrap())),
            );
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trajectories serialize")
    }
}

/// Reads back the numeric table written by [`Trajectory::write_csv`].
pub fn read_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or("empty file")?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row = line
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| format!("line {}: {e}", k + 2)))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != header.len() {
            return Err(format!("line {}: expected {} columns, got {}", k + 2, header.len(), row.len()));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// `X∘ρ₁ = Tρ₁∘Z`: the coefficients `(A, B, C, E)` in the Lagrangian layout.
pub fn project_to_lagrangian(z: &ZCoefficients) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * z.b.len() + 2);
    out.push(z.a);
    out.extend(&z.b);
    out.extend(&z.c);
    out.push(z.e);
    out
}

/// `(A, B, D, E)` at `ρ₂(w)` in the Hamiltonian layout. For a regular
/// Lagrangian the velocities are recovered from the momenta by inverting the
/// Legendre relation and `B`, `D`, `E` are recomputed there; for a singular
/// one `w` must lie on the closed ladder, which fixes `v`, and `z` is used
/// as is.
pub fn project_to_hamiltonian(
    system: &LagrangianSystem,
    z: &ZCoefficients,
    w: &PontryaginPoint,
) -> Result<(HamiltonianPoint, Vec<f64>), DynamicsError> {
    let y = w.hamiltonian();
    let n = system.n();
    let reg = regularity(system, &w.lagrangian(), DEFAULT_RANK_TOL)?;
    let (b, d, e) = if reg.verdict == Verdict::Regular {
        let v = LegendreHamiltonian::new(system.clone())
            .velocities(&y)
            .map_err(|e| DynamicsError::NonInvertibleLegendre {
                t: w.t,
                reason: e.to_string(),
            })?;
        let wv = PontryaginPoint::new(w.t, w.q.clone(), v.clone(), w.p.clone(), w.s);
        let fixed = regular_z(system, &wv)?;
        (v, fixed.d, fixed.e)
    } else {
        (z.b.clone(), z.d.clone(), z.e)
    };
    let mut out = Vec::with_capacity(2 * n + 2);
    out.push(z.a);
    out.extend(b);
    out.extend(d);
    out.push(e);
    Ok((y, out))
}

/// `Z` of a regular Lagrangian at `w`: `C` from the Herglotz field.
fn regular_z(system: &LagrangianSystem, w: &PontryaginPoint) -> Result<ZCoefficients, EvalError> {
    let n = system.n();
    let x = herglotz_field(system, &w.lagrangian())?;
    let jet = system.jet(&w.lagrangian(), 1)?;
    let sp = system.space();
    let dl_ds = jet.d1(sp.s());
    Ok(ZCoefficients {
        a: 1.0,
        b: w.v.clone(),
        c: x[1 + n..1 + 2 * n].to_vec(),
        d: (0..n).map(|i| jet.d1(sp.q(i)) + w.p[i] * dl_ds).collect(),
        e: jet.value(),
        undetermined: Vec::new(),
    })
}

/// Runs the constraint algorithm from the Legendre lift of `x0` and returns
/// the closed ladder with its projected starting point on `W_f`.
pub fn prepare(
    system: &LagrangianSystem,
    x0: &LagrangianPoint,
    opts: &AlgorithmOptions,
) -> Result<(ConstraintLadder, PontryaginPoint), DynamicsError> {
    let w = PontryaginPoint::from_lagrangian(system, x0)?;
    let (ladder, _) = run_constraint_algorithm(system, &w, opts)?;
    if ladder.status() != LadderStatus::Closed {
        return Err(DynamicsError::NotClosed(ladder.status()));
    }
    let start = ladder.probe().cloned().unwrap_or(w);
    Ok((ladder, start))
}

/// Integrates `ẋ = field(x)` for a state whose first component is time.
/// `after_step` may adjust or reject each new state. Returns every state,
/// the first being `x0`.
pub fn integrate_ode<F, G>(
    x0: &[f64],
    cfg: &IntegratorConfig,
    mut field: F,
    mut after_step: G,
) -> Result<Vec<Vec<f64>>, DynamicsError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, DynamicsError>,
    G: FnMut(&mut Vec<f64>) -> Result<(), DynamicsError>,
{
    cfg.validate()?;
    let t0 = x0[0];
    if !(cfg.t_end > t0) {
        return Err(DynamicsError::InvalidConfig(format!(
            "t_end = {} must exceed the initial time {t0}",
            cfg.t_end
        )));
    }
    match cfg.method {
        Method::Rk4 => rk4(x0, cfg, &mut field, &mut after_step),
        Method::Rk45 => dopri(x0, cfg, &mut field, &mut after_step),
    }
}

fn axpy(x: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = x.to_vec();
    for (c, k) in terms {
        for (o, ki) in out.iter_mut().zip(k.iter()) {
            *o += h * c * ki;
        }
    }
    out
}

fn check_finite(x: &[f64], t: f64) -> Result<(), DynamicsError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(DynamicsError::StepFailure {
            t,
            reason: "non-finite state".into(),
        })
    }
}

fn rk4<F, G>(x0: &[f64], cfg: &IntegratorConfig, field: &mut F, after: &mut G) -> Result<Vec<Vec<f64>>, DynamicsError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, DynamicsError>,
    G: FnMut(&mut Vec<f64>) -> Result<(), DynamicsError>,
{
    let t0 = x0[0];
    let h = cfg.step;
    let span = (cfg.t_end - t0) / h;
    let steps = (span - 1e-9).ceil().max(1.0);
    if steps > cfg.max_steps as f64 {
        return Err(DynamicsError::InvalidConfig(format!("{steps} steps exceed max_steps")));
    }
    let steps = steps as usize;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x0.to_vec());
    let mut x = x0.to_vec();
    for k in 0..steps {
        let t_next = if k + 1 == steps { cfg.t_end } else { t0 + (k + 1) as f64 * h };
        let hk = t_next - x[0];
        let k1 = field(&x)?;
        let k2 = field(&axpy(&x, hk, &[(0.5, &k1)]))?;
        let k3 = field(&axpy(&x, hk, &[(0.5, &k2)]))?;
        let k4 = field(&axpy(&x, hk, &[(1.0, &k3)]))?;
        let mut next = axpy(&x, hk, &[(1.0 / 6.0, &k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)]);
        next[0] = t_next;
        check_finite(&next, t_next)?;
        after(&mut next)?;
        out.push(next.clone());
        x = next;
    }
    Ok(out)
}

const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [&[f64]; 7] = [
    &[],
    &[0.2],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn dopri<F, G>(x0: &[f64], cfg: &IntegratorConfig, field: &mut F, after: &mut G) -> Result<Vec<Vec<f64>>, DynamicsError>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>, DynamicsError>,
    G: FnMut(&mut Vec<f64>) -> Result<(), DynamicsError>,
{
    let mut out = vec![x0.to_vec()];
    let mut x = x0.to_vec();
    let mut h = cfg.step.min(cfg.t_end - x0[0]);
    let mut attempts = 0usize;
    while x[0] < cfg.t_end {
        attempts += 1;
        if attempts > cfg.max_steps {
            return Err(DynamicsError::StepFailure {
                t: x[0],
                reason: "too many steps".into(),
            });
        }
        let last = x[0] + h >= cfg.t_end;
        if last {
            h = cfg.t_end - x[0];
        }
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        for stage in 0..7 {
            let terms: Vec<(f64, &[f64])> = DP_A[stage].iter().zip(&k).map(|(a, ki)| (*a, ki.as_slice())).collect();
            let mut xs = axpy(&x, h, &terms);
            xs[0] = x[0] + DP_C[stage] * h;
            k.push(field(&xs)?);
        }
        let b_terms: Vec<(f64, &[f64])> = DP_B.iter().zip(&k).map(|(b, ki)| (*b, ki.as_slice())).collect();
        let next = axpy(&x, h, &b_terms);
        let mut err = 0.0f64;
        for i in 0..x.len() {
            let e: f64 = (0..7).map(|s| DP_E[s] * k[s][i]).sum::<f64>() * h;
            let scale = cfg.abs_tol + cfg.rel_tol * x[i].abs().max(next[i].abs());
            err = err.max((e / scale).abs());
        }
        if !err.is_finite() {
            err = f64::INFINITY;
        }
        if err <= 1.0 {
            let mut next = next;
            next[0] = if last { cfg.t_end } else { x[0] + h };
            check_finite(&next, next[0])?;
            after(&mut next)?;
            out.push(next.clone());
            x = next;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h <= 1e-14 * x[0].abs().max(1.0) {
            return Err(DynamicsError::StepFailure {
                t: x[0],
                reason: format!("step size underflow ({h:e})"),
            });
        }
    }
    Ok(out)
}

/// Follows `Z` on `W` from `w0` (which should lie on the closed `ladder`).
pub fn integrate(
    ladder: &ConstraintLadder,
    w0: &PontryaginPoint,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, DynamicsError> {
    let system = ladder.system();
    if ladder.status() != LadderStatus::Closed {
        return Err(DynamicsError::NotClosed(ladder.status()));
    }
    let n = system.n();
    let drift0 = ladder.max_violation(w0)?;
    if drift0 > cfg.feas_tol {
        return Err(DynamicsError::LadderLost {
            t: w0.t,
            drift: drift0,
        });
    }
    let popts = ProjectionOptions {
        tol: cfg.feas_tol,
        ..ProjectionOptions::default()
    };
    let states = integrate_ode(
        &w0.to_vec(),
        cfg,
        |x| {
            let w = PontryaginPoint::from_slice(n, x);
            Ok(assemble_Z(system, &w, ladder, None)?.to_vec())
        },
        |x| {
            let w = PontryaginPoint::from_slice(n, x);
            if cfg.reproject {
                *x = project_onto_ladder(ladder, &w, &popts)?.to_vec();
            } else {
                let drift = ladder.max_violation(&w)?;
                if !(drift <= 10.0 * cfg.feas_tol) {
                    return Err(DynamicsError::LadderLost { t: w.t, drift });
                }
            }
            Ok(())
        },
    )?;
    let points = states.iter().map(|x| PontryaginPoint::from_slice(n, x)).collect();
    Trajectory::from_points(ladder, SpaceKind::Pontryagin, points)
}

/// Follows the Herglotz field `X` of a regular Lagrangian; samples are
/// lifted to `W` by the Legendre map.
pub fn integrate_lagrangian(
    system: &LagrangianSystem,
    x0: &LagrangianPoint,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, DynamicsError> {
    let n = system.n();
    let states = integrate_ode(
        &x0.to_vec(),
        cfg,
        |x| Ok(herglotz_field(system, &LagrangianPoint::from_slice(n, x))?),
        |_| Ok(()),
    )?;
    let ladder = ConstraintLadder::primary_closed(system);
    let points = states
        .iter()
        .map(|x| PontryaginPoint::from_lagrangian(system, &LagrangianPoint::from_slice(n, x)))
        .collect::<Result<Vec<_>, _>>()?;
    Trajectory::from_points(&ladder, SpaceKind::Lagrangian, points)
}

/// Follows the cocontact Hamiltonian field `Y` of `H = p·v − L` with `v`
/// recovered from the momenta; samples are lifted to `W`.
pub fn integrate_hamiltonian(
    system: &LagrangianSystem,
    y0: &HamiltonianPoint,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, DynamicsError> {
    let n = system.n();
    let h = LegendreHamiltonian::new(system.clone());
    let invert = |y: &HamiltonianPoint| {
        h.velocities(y).map_err(|e| DynamicsError::NonInvertibleLegendre {
            t: y.t,
            reason: e.to_string(),
        })
    };
    invert(y0)?;
    let states = integrate_ode(
        &y0.to_vec(),
        cfg,
        |y| {
            let y = HamiltonianPoint::from_slice(n, y);
            invert(&y)?;
            Ok(cocontact_hamiltonian_field(&h, &y)?)
        },
        |_| Ok(()),
    )?;
    let ladder = ConstraintLadder::primary_closed(system);
    let points = states
        .iter()
        .map(|y| {
            let y = HamiltonianPoint::from_slice(n, y);
            let v = invert(&y)?;
            Ok(PontryaginPoint::new(y.t, y.q, v, y.p, y.s))
        })
        .collect::<Result<Vec<_>, DynamicsError>>()?;
    Trajectory::from_points(&ladder, SpaceKind::Hamiltonian, points)
}

/// Finite-difference weights for the first derivative at `x0` from the
/// nodes `xs` (Fornberg's recursion).
fn fd_weights(x0: f64, xs: &[f64]) -> Vec<f64> {
    let m = xs.len();
    // c[j][k]: weight of node j for the k-th derivative, k ∈ {0, 1}.
    let mut c = vec![[0.0f64; 2]; m];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..m {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// Time derivatives of every coordinate at every sample, from the nearest
/// five samples (fewer if the trajectory is shorter).
fn time_derivatives(points: &[PontryaginPoint]) -> Vec<Vec<f64>> {
    let len = points.len();
    let width = len.min(5);
    let times: Vec<f64> = points.iter().map(|p| p.t).collect();
    let states: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
    (0..len)
        .map(|k| {
            let start = k.saturating_sub(width / 2).min(len - width);
            let w = fd_weights(times[k], &times[start..start + width]);
            (0..states[k].len())
                .map(|i| (0..width).map(|j| w[j] * states[start + j][i]).sum())
                .collect()
        })
        .collect()
}

/// The four residual channels at every sample.
pub fn residual_channels(
    ladder: &ConstraintLadder,
    points: &[PontryaginPoint],
) -> Result<Vec<Residuals>, DynamicsError> {
    let system = ladder.system();
    let n = system.n();
    let sp = crate::jets::CoordinateSpace::pontryagin(n);
    if points.len() < 2 {
        return points
            .iter()
            .map(|w| {
                Ok(Residuals {
                    constraint_drift: ladder.max_violation(w)?,
                    ..Residuals::default()
                })
            })
            .collect();
    }
    let derivs = time_derivatives(points);
    points
        .iter()
        .zip(&derivs)
        .map(|(w, dw)| {
            let x = w.lagrangian();
            let holonomy = (0..n).fold(0.0f64, |m, i| m.max((dw[sp.q(i)] - w.v[i]).abs()));
            let a: Vec<f64> = (0..n).map(|i| dw[sp.v(i).unwrap()]).collect();
            let sdot = dw[sp.s()];
            let res = herglotz_residual(system, &x, &a, sdot)?;
            Ok(Residuals {
                holonomy,
                sdot: res.sdot.abs(),
                herglotz: res.max_abs(),
                constraint_drift: ladder.max_violation(w)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub max: f64,
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub samples: usize,
    pub holonomy: ChannelStats,
    pub sdot: ChannelStats,
    pub herglotz: ChannelStats,
    pub constraint_drift: ChannelStats,
}

impl ResidualReport {
    pub fn channel(&self, name: &str) -> Option<ChannelStats> {
        match name {
            "holonomy" => Some(self.holonomy),
            "sdot" => Some(self.sdot),
            "herglotz" => Some(self.herglotz),
            "constraint_drift" => Some(self.constraint_drift),
            _ => None,
        }
    }

    /// Largest maximum over all channels.
    pub fn worst(&self) -> f64 {
        Residuals::CHANNELS
            .iter()
            .map(|c| self.channel(c).unwrap().max)
            .fold(0.0, f64::max)
    }
}

/// Maximum and RMS of each channel over the trajectory.
pub fn residual_report(traj: &Trajectory) -> ResidualReport {
    assert!(!traj.is_empty(), "empty trajectory");
    let stats = |f: &dyn Fn(&Residuals) -> f64| {
        let vals: Vec<f64> = traj.samples.iter().map(|s| f(&s.residuals)).collect();
        ChannelStats {
            max: vals.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            rms: (vals.iter().map(|v| v * v).sum::<f64>() / vals.len() as f64).sqrt(),
        }
    };
    ResidualReport {
        samples: traj.len(),
        holonomy: stats(&|r| r.holonomy),
        sdot: stats(&|r| r.sdot),
        herglotz: stats(&|r| r.herglotz),
        constraint_drift: stats(&|r| r.constraint_drift),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    /// `max |ρ₁(Z path) − X path|` over samples and coordinates.
    pub rho1_vs_x: f64,
    /// `max |ρ₂(Z path) − Y path|`.
    pub rho2_vs_y: f64,
    /// `max |FL(X path) − Y path|`.
    pub legendre_x_vs_y: f64,
    pub samples: usize,
    #[serde(skip)]
    pub unified: Trajectory,
    #[serde(skip)]
    pub lagrangian: Trajectory,
    #[serde(skip)]
    pub hamiltonian: Trajectory,
}

impl EquivalenceReport {
    pub fn max_deviation(&self) -> f64 {
        self.rho1_vs_x.max(self.rho2_vs_y).max(self.legendre_x_vs_y)
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Integrates `Z`, `X` and `Y` from matching initial data and compares the
/// three paths sample by sample. Requires the fixed-step method so that the
/// sample times coincide.
pub fn cross_check_equivalence(
    system: &LagrangianSystem,
    x0: &LagrangianPoint,
    cfg: &IntegratorConfig,
) -> Result<EquivalenceReport, DynamicsError> {
    if cfg.method != Method::Rk4 {
        return Err(DynamicsError::InvalidConfig(
            "the equivalence check compares samples at equal times and needs the fixed-step method".into(),
        ));
    }
    let (ladder, w0) = prepare(system, x0, &AlgorithmOptions::default())?;
    let unified = integrate(&ladder, &w0, cfg)?;
    let lagrangian = integrate_lagrangian(system, &w0.lagrangian(), cfg)?;
    let hamiltonian = integrate_hamiltonian(system, &w0.hamiltonian(), cfg)?;
    let mut rho1 = 0.0f64;
    let mut rho2 = 0.0f64;
    let mut leg = 0.0f64;
    for ((z, x), y) in unified.samples.iter().zip(&lagrangian.samples).zip(&hamiltonian.samples) {
        rho1 = rho1.max(max_diff(&z.point.lagrangian().to_vec(), &x.point.lagrangian().to_vec()));
        rho2 = rho2.max(max_diff(&z.point.hamiltonian().to_vec(), &y.point.hamiltonian().to_vec()));
        let fl = legendre_map(system, &x.point.lagrangian())?;
        leg = leg.max(max_diff(&fl.to_vec(), &y.point.hamiltonian().to_vec()));
    }
    Ok(EquivalenceReport {
        rho1_vs_x: rho1,
        rho2_vs_y: rho2,
        legendre_x_vs_y: leg,
        samples: unified.len(),
        unified,
        lagrangian,
        hamiltonian,
    })
}
