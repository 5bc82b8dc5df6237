//! Ready-made systems: the free particle, the Duffing oscillator, a body
//! with time-dependent mass and quadratic drag, and a charged particle with
//! friction under a time-dependent holonomic constraint.
//!
//! Each preset carries a native Lagrangian, an equivalent DSL rendition,
//! default initial data and closed-form expectations for the vector field.

use std::fmt;
use std::sync::Arc;

use crate::dsl::{self, Expr, ExprField, ParamTable};
use crate::dynamics::IntegratorConfig;
use crate::error::EvalError;
use crate::jets::{eval_jet, CoordinateSpace, FnField, Jet, ScalarField};
use crate::mechanics::{LagrangianPoint, LagrangianSystem};
use crate::skinner_rusk::PontryaginPoint;
use crate::taylor::Taylor;

/// Coulomb constant in SI units.
pub const COULOMB_K: f64 = 8.987_551_792_3e9;
/// Smallest distance to the fixed charge at which the potential is evaluated.
pub const R_MIN: f64 = 1e-6;

pub type VectorFn = Arc<dyn Fn(&PontryaginPoint) -> Result<Vec<f64>, EvalError> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&PontryaginPoint) -> Result<f64, EvalError> + Send + Sync>;

/// Closed form of one constraint, valid on the submanifold cut out by the
/// earlier generations.
#[derive(Clone)]
pub struct ExpectedConstraint {
    pub generation: usize,
    /// Position within its generation.
    pub position: usize,
    pub label: String,
    pub formula: ScalarFn,
}

/// Closed-form expectations for the assembled vector field.
#[derive(Clone)]
pub struct Expected {
    /// Accelerations `C` on the final constraint submanifold, when known in
    /// closed form.
    pub c: Option<VectorFn>,
    /// Momentum components `D`.
    pub d: VectorFn,
    /// Number of generations the constraint algorithm produces.
    pub depth: usize,
    pub ladder: Vec<ExpectedConstraint>,
}

#[derive(Clone)]
pub struct SystemPreset {
    pub name: String,
    pub system: LagrangianSystem,
    /// The same Lagrangian as DSL text over `params`.
    pub dsl: String,
    pub params: ParamTable,
    pub initial: LagrangianPoint,
    /// Integrator defaults suited to the preset.
    pub integrator: IntegratorConfig,
    /// Step pair for the residual convergence-order check.
    pub order_steps: [f64; 2],
    /// Closed forms, absent for user-defined systems.
    pub expected: Option<Expected>,
    pub notes: String,
}

impl fmt::Debug for SystemPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemPreset")
            .field("name", &self.name)
            .field("dsl", &self.dsl)
            .field("params", &self.params)
            .field("initial", &self.initial)
            .finish_non_exhaustive()
    }
}

impl SystemPreset {
    /// A system given by DSL text, without closed-form expectations.
    pub fn inline(
        name: &str,
        n: usize,
        lagrangian: &str,
        params: ParamTable,
        initial: LagrangianPoint,
        integrator: IntegratorConfig,
    ) -> Result<Self, PresetError> {
        let expr = dsl::parse(lagrangian, n, false)?;
        let system = LagrangianSystem::from_expr(n, name, expr, params.clone())?;
        let order_steps = [20.0 * integrator.step, 10.0 * integrator.step];
        Ok(SystemPreset {
            name: name.into(),
            system,
            dsl: lagrangian.into(),
            params,
            initial,
            integrator,
            order_steps,
            expected: None,
            notes: String::new(),
        })
    }

    /// The Lagrangian built from the DSL rendition.
    pub fn dsl_system(&self) -> Result<LagrangianSystem, PresetError> {
        let n = self.system.n();
        let expr = dsl::parse(&self.dsl, n, false)?;
        Ok(LagrangianSystem::from_expr(
            n,
            format!("{} (dsl)", self.name),
            expr,
            self.params.clone(),
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PresetError {
    #[error("unknown preset `{0}` (available: free_particle, duffing, harmonic, drag, charged_particle)")]
    Unknown(String),
    #[error(transparent)]
    Parse(#[from] dsl::ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Param(#[from] dsl::ParamError),
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 5] = ["free_particle", "duffing", "harmonic", "drag", "charged_particle"];

/// Looks up a preset with its default parameters.
pub fn preset(name: &str) -> Result<SystemPreset, PresetError> {
    match name {
        "free_particle" | "free" => free_particle(),
        "duffing" => duffing(1.0, 5.0, 8.0, 0.02, 0.5),
        "harmonic" => duffing(1.0, 0.0, 0.0, 0.0, 1.0),
        "drag" | "variable_mass_drag" => variable_mass_drag_default(),
        "charged_particle" | "charged" => charged_particle_default(),
        other => Err(PresetError::Unknown(other.to_string())),
    }
}

fn lag_native<F>(n: usize, f: F) -> Arc<dyn ScalarField>
where
    F: Fn(&[Taylor]) -> Result<Taylor, EvalError> + Send + Sync + 'static,
{
    Arc::new(FnField::new(CoordinateSpace::lagrangian(n).dim(), f))
}

/// `L = ½v²` on a line.
pub fn free_particle() -> Result<SystemPreset, PresetError> {
    let system = LagrangianSystem::new(
        1,
        "free particle",
        ParamTable::new(),
        lag_native(1, |x| Ok(x[2].mul(&x[2]).scale(0.5))),
    )?;
    let zero: VectorFn = Arc::new(|_| Ok(vec![0.0]));
    Ok(SystemPreset {
        name: "free_particle".into(),
        system,
        dsl: "0.5*v1^2".into(),
        params: ParamTable::new(),
        initial: LagrangianPoint::new(0.0, vec![0.0], vec![1.0], 0.0),
        integrator: IntegratorConfig::rk4(1e-3, 1.0),
        order_steps: [0.02, 0.01],
        expected: Some(Expected {
            c: Some(zero.clone()),
            d: zero,
            depth: 1,
            ladder: Vec::new(),
        }),
        notes: "regular; uniform motion".into(),
    })
}

/// `L = ½v² − ½αx² − ¼βx⁴ − δs + γx cos ωt`, whose trajectories solve
/// `ẍ + δẋ + αx + βx³ = γ cos ωt`.
pub fn duffing(alpha: f64, beta: f64, gamma: f64, delta: f64, omega: f64) -> Result<SystemPreset, PresetError> {
    let params = ParamTable::new()
        .with("alpha", alpha)?
        .with("beta", beta)?
        .with("gamma", gamma)?
        .with("delta", delta)?
        .with("omega", omega)?;
    let field = lag_native(1, move |x| {
        let (t, q, v, s) = (&x[0], &x[1], &x[2], &x[3]);
        let q2 = q.mul(q);
        let kinetic = v.mul(v).scale(0.5);
        let forcing = q.mul(&t.scale(omega).cos()?).scale(gamma);
        Ok(kinetic
            .sub(&q2.scale(0.5 * alpha))
            .sub(&q2.mul(&q2).scale(0.25 * beta))
            .sub(&s.scale(delta))
            .add(&forcing))
    });
    let system = LagrangianSystem::new(1, "duffing", params.clone(), field)?;
    let force = move |t: f64, x: f64| -alpha * x - beta * x.powi(3) + gamma * (omega * t).cos();
    let c: VectorFn = Arc::new(move |w| Ok(vec![force(w.t, w.q[0]) - delta * w.v[0]]));
    let d: VectorFn = Arc::new(move |w| Ok(vec![force(w.t, w.q[0]) - delta * w.p[0]]));
    let name = if beta == 0.0 && gamma == 0.0 && delta == 0.0 {
        "harmonic"
    } else {
        "duffing"
    };
    Ok(SystemPreset {
        name: name.into(),
        system,
        dsl: "0.5*v1^2 - 0.5*alpha*q1^2 - 0.25*beta*q1^4 - delta*s + gamma*q1*cos(omega*t)".into(),
        params,
        initial: LagrangianPoint::new(0.0, vec![1.0], vec![0.0], 0.0),
        integrator: IntegratorConfig::rk4(1e-3, 10.0),
        order_steps: [0.02, 0.01],
        expected: Some(Expected {
            c: Some(c),
            d,
            depth: 1,
            ladder: Vec::new(),
        }),
        notes: "regular; the algorithm closes after one generation".into(),
    })
}

fn variable_mass_drag_default() -> Result<SystemPreset, PresetError> {
    let m = dsl::parse("m0*(1 + exp(-r*t))/2", 1, false)?;
    let extra = ParamTable::new().with("m0", 2.0)?.with("r", 0.5)?;
    variable_mass_drag(m, 0.1, 30.0, 9.81, extra)
}

/// `L = ½m(t)v² + m(t)g/(2γ)·(e^{−2γy} − 1) − 2γvs + F/(2γ)`: a body of
/// decreasing mass `m(t)` pushed up by a constant force `F` against gravity
/// and quadratic drag. `m_expr` is an expression in `t` whose parameters
/// come from `extra`.
pub fn variable_mass_drag(
    m_expr: Expr,
    gamma: f64,
    force: f64,
    g: f64,
    extra: ParamTable,
) -> Result<SystemPreset, PresetError> {
    if m_expr.variables().iter().any(|v| *v != dsl::Var::T) {
        return Err(EvalError::Model("the mass law may only depend on t".into()).into());
    }
    if gamma == 0.0 {
        return Err(EvalError::Model("the drag coefficient must be nonzero".into()).into());
    }
    let mut params = extra.clone();
    params.insert("gamma", gamma)?;
    params.insert("F", force)?;
    params.insert("g", g)?;
    let mass = Arc::new(ExprField::new(m_expr.clone(), &CoordinateSpace::lagrangian(1), extra)?);
    let m_field = mass.clone();
    let field = lag_native(1, move |x| {
        let m = m_field.eval_taylor(x)?;
        if !(m.value() > 0.0) {
            return Err(EvalError::Model(format!("nonpositive mass {} at t = {}", m.value(), x[0].value())));
        }
        let (y, v, s) = (&x[1], &x[2], &x[3]);
        let kinetic = m.mul(&v.mul(v)).scale(0.5);
        let fall = m
            .mul(&y.scale(-2.0 * gamma).exp()?.add_scalar(-1.0))
            .scale(g / (2.0 * gamma));
        Ok(kinetic
            .add(&fall)
            .sub(&v.mul(s).scale(2.0 * gamma))
            .add_scalar(force / (2.0 * gamma)))
    });
    let system = LagrangianSystem::new(1, "variable-mass drag", params.clone(), field)?;
    let m_of = {
        let mass = mass.clone();
        move |t: f64| -> Result<(f64, f64), EvalError> {
            let jet = eval_jet(mass.as_ref(), &[t, 0.0, 0.0, 0.0], 1)?;
            Ok((jet.value(), jet.d1(0)))
        }
    };
    let m_c = m_of.clone();
    let c: VectorFn = Arc::new(move |w| {
        let (m, mdot) = m_c(w.t)?;
        let v = w.v[0];
        Ok(vec![force / m - gamma * v * v - mdot / m * v - g])
    });
    let d: VectorFn = Arc::new(move |w| {
        let (m, _) = m_of(w.t)?;
        Ok(vec![-m * g * (-2.0 * gamma * w.q[0]).exp() - 2.0 * gamma * w.v[0] * w.p[0]])
    });
    let dsl = format!(
        "0.5*({m})*v1^2 + ({m})*g/(2*gamma)*(exp(-2*gamma*q1) - 1) - 2*gamma*v1*s + F/(2*gamma)",
        m = m_expr
    );
    Ok(SystemPreset {
        name: "drag".into(),
        system,
        dsl,
        params,
        initial: LagrangianPoint::new(0.0, vec![0.0], vec![0.0], 0.0),
        integrator: IntegratorConfig::rk4(1e-3, 5.0),
        order_steps: [0.02, 0.01],
        expected: Some(Expected {
            c: Some(c),
            d,
            depth: 1,
            ladder: Vec::new(),
        }),
        notes: "regular while m(t) > 0; d/dt(m v) = F − m g − γ m v²".into(),
    })
}

/// Coordinates of the charged particle: `q = (x, y, z, λ)`.
const LAMBDA: usize = 3;

/// A charged particle of mass `m` and charge `k` with friction `γ` in the
/// field of the potential `φ(x, y, z)`, constrained by `f(t, x, y, z) = 0`
/// through the multiplier `λ = q4`:
/// `L = ½m|v|² − kφ(q) + λ f(t, q) − γ s`.
/// `phi` may use `q1..q3`; `f` may use `t, q1..q3`.
pub fn charged_particle(
    phi: Expr,
    f: Expr,
    m: f64,
    k: f64,
    gamma: f64,
    extra: ParamTable,
) -> Result<SystemPreset, PresetError> {
    use dsl::Var;
    let allowed = |v: &Var, t_ok: bool| matches!(v, Var::Q(i) if *i < 3) || (t_ok && *v == Var::T);
    if !phi.variables().iter().all(|v| allowed(v, false)) {
        return Err(EvalError::Model("the potential may only depend on q1, q2, q3".into()).into());
    }
    if !f.variables().iter().all(|v| allowed(v, true)) {
        return Err(EvalError::Model("the constraint may only depend on t, q1, q2, q3".into()).into());
    }
    let space = CoordinateSpace::lagrangian(4);
    let phi_field: Arc<dyn ScalarField> = Arc::new(ExprField::new(phi.clone(), &space, extra.clone())?);
    let f_field: Arc<dyn ScalarField> = Arc::new(ExprField::new(f.clone(), &space, extra.clone())?);
    let dsl = format!(
        "0.5*m*(v1^2 + v2^2 + v3^2) - k*({phi}) + q4*({f}) - gamma*s"
    );
    let f_is_z_minus_t = dsl::parse("q3 - t", 4, false).ok() == Some(f.clone());
    build_charged(
        "charged_particle",
        Lifted::Lagrangian(phi_field),
        Lifted::Lagrangian(f_field),
        f_is_z_minus_t,
        m,
        k,
        gamma,
        extra,
        dsl,
    )
}

/// Scalar functions either over the whole Lagrangian layout or over
/// `(x, y, z)` / `(t, x, y, z)` directly.
#[derive(Clone)]
enum Lifted {
    Lagrangian(Arc<dyn ScalarField>),
    Spatial(Arc<dyn ScalarField>),
}

impl Lifted {
    fn eval(&self, x: &[Taylor], with_t: bool) -> Result<Taylor, EvalError> {
        match self {
            Lifted::Lagrangian(f) => f.eval_taylor(x),
            Lifted::Spatial(f) => {
                let mut args = Vec::with_capacity(4);
                if with_t {
                    args.push(x[0].clone());
                }
                args.extend(x[1..4].iter().cloned());
                f.eval_taylor(&args)
            }
        }
    }

    /// Jet over `(x, y, z)` at a position (time fixed at `t`).
    fn spatial_jet(&self, t: f64, q: &[f64], with_t: bool, order: u8) -> Result<Jet, EvalError> {
        let field = FnField::new(3, |y: &[Taylor]| {
            let mut x = vec![Taylor::constant(0.0); 10];
            x[0] = Taylor::constant(t);
            x[1..4].clone_from_slice(y);
            self.eval(&x, with_t)
        });
        eval_jet(&field, &q[..3], order)
    }
}

/// Coulomb potential `c / r` of a point charge at the origin.
pub fn coulomb_potential(c: f64) -> Arc<dyn ScalarField> {
    Arc::new(FnField::new(3, move |x: &[Taylor]| {
        let r2 = x[0].mul(&x[0]).add(&x[1].mul(&x[1])).add(&x[2].mul(&x[2]));
        if r2.value() < R_MIN * R_MIN {
            return Err(EvalError::Model(format!(
                "distance to the fixed charge below {R_MIN:e}"
            )));
        }
        Ok(r2.powf(-0.5)?.scale(c))
    }))
}

/// The scenario with a fixed charge `−2·10⁻⁴` at the origin (SI units),
/// `k = 2·10⁻⁴`, `m = 1`, `γ = 0.3`, constraint `z = t`, starting at
/// `q = (2, 0, 0)` with velocity `(0, 10, 0)`.
///
/// On the final constraint set the multiplier velocity is
/// `v_λ = k(φ_xz v_x + φ_yz v_y + φ_zz)`, as produced by the ladder itself;
/// no `φ_yy` term appears.
pub fn charged_particle_default() -> Result<SystemPreset, PresetError> {
    let fixed = -2e-4;
    let extra = ParamTable::new().with("ke", COULOMB_K)?.with("Q", fixed)?;
    let phi = coulomb_potential(COULOMB_K * fixed);
    let f: Arc<dyn ScalarField> = Arc::new(FnField::new(4, |x: &[Taylor]| Ok(x[3].sub(&x[0]))));
    let dsl = "0.5*m*(v1^2 + v2^2 + v3^2) - k*(ke*Q/sqrt(q1^2 + q2^2 + q3^2)) + q4*(q3 - t) - gamma*s"
        .to_string();
    let mut preset = build_charged(
        "charged_particle",
        Lifted::Spatial(phi),
        Lifted::Spatial(f),
        true,
        1.0,
        2e-4,
        0.3,
        extra,
        dsl,
    )?;
    preset.initial = LagrangianPoint::new(
        0.0,
        vec![2.0, 0.0, 0.0, 0.0],
        vec![0.0, 10.0, 0.0, 0.0],
        0.0,
    );
    Ok(preset)
}

#[allow(clippy::too_many_arguments)]
fn build_charged(
    name: &str,
    phi: Lifted,
    f: Lifted,
    f_is_z_minus_t: bool,
    m: f64,
    k: f64,
    gamma: f64,
    extra: ParamTable,
    dsl: String,
) -> Result<SystemPreset, PresetError> {
    let mut params = extra;
    params.insert("m", m)?;
    params.insert("k", k)?;
    params.insert("gamma", gamma)?;
    let (phi_l, f_l) = (phi.clone(), f.clone());
    let field = lag_native(4, move |x| {
        let v2 = x[5].mul(&x[5]).add(&x[6].mul(&x[6])).add(&x[7].mul(&x[7]));
        let phi = phi_l.eval(x, false)?;
        let f = f_l.eval(x, true)?;
        Ok(v2
            .scale(0.5 * m)
            .sub(&phi.scale(k))
            .add(&x[1 + LAMBDA].mul(&f))
            .sub(&x[9].scale(gamma)))
    });
    let system = LagrangianSystem::new(4, "charged particle", params.clone(), field)?;
    let expected = charged_expectations(phi, f, f_is_z_minus_t, m, k, gamma);
    Ok(SystemPreset {
        name: name.into(),
        system,
        dsl,
        params,
        initial: LagrangianPoint::new(0.0, vec![2.0, 0.0, 0.0, 0.0], vec![0.0, 10.0, 0.0, 0.0], 0.0),
        integrator: IntegratorConfig {
            reproject: true,
            ..IntegratorConfig::rk4(1e-3, 10.0)
        },
        order_steps: [0.002, 0.001],
        expected: Some(expected),
        notes: "singular (rank 3); the multiplier λ is fixed by the constraint ladder".into(),
    })
}

fn charged_expectations(phi: Lifted, f: Lifted, z_minus_t: bool, m: f64, k: f64, gamma: f64) -> Expected {
    let mut ladder = Vec::new();
    let push = |ladder: &mut Vec<ExpectedConstraint>, generation, position, label: &str, formula: ScalarFn| {
        ladder.push(ExpectedConstraint {
            generation,
            position,
            label: label.into(),
            formula,
        })
    };
    for (i, label) in ["p_x - m v_x", "p_y - m v_y", "p_z - m v_z"].iter().enumerate() {
        push(&mut ladder, 1, i, label, Arc::new(move |w: &PontryaginPoint| Ok(w.p[i] - m * w.v[i])));
    }
    push(&mut ladder, 1, 3, "p_lambda", Arc::new(|w: &PontryaginPoint| Ok(w.p[LAMBDA])));
    let f2 = f.clone();
    push(
        &mut ladder,
        2,
        0,
        "f(t, q)",
        Arc::new(move |w: &PontryaginPoint| Ok(f2.spatial_jet(w.t, &w.q, true, 1)?.value())),
    );
    let f3 = f.clone();
    push(
        &mut ladder,
        3,
        0,
        "df/dt + v . grad f",
        Arc::new(move |w: &PontryaginPoint| {
            let field = FnField::new(4, |y: &[Taylor]| {
                let mut x = vec![Taylor::constant(0.0); 10];
                x[0] = y[0].clone();
                x[1..4].clone_from_slice(&y[1..4]);
                f3.eval(&x, true)
            });
            let jet = eval_jet(&field, &[w.t, w.q[0], w.q[1], w.q[2]], 1)?;
            Ok(jet.d1(0) + (0..3).map(|i| w.v[i] * jet.d1(i + 1)).sum::<f64>())
        }),
    );
    let depth = 5;
    let phi_c = phi.clone();
    let c: VectorFn = Arc::new(move |w: &PontryaginPoint| {
        let j = phi_c.spatial_jet(w.t, &w.q, false, 3)?;
        let ax = (-k * j.d1(0)) / m - gamma * w.v[0];
        let ay = (-k * j.d1(1)) / m - gamma * w.v[1];
        let acc = [ax, ay, 0.0];
        let mut c_lambda = 0.0;
        for i in 0..3 {
            let mut inner = 0.0;
            for jj in 0..3 {
                inner += j.d3(i, 2, jj) * w.v[jj];
            }
            c_lambda += inner * w.v[i] + j.d2(i, 2) * acc[i];
        }
        Ok(vec![ax, ay, 0.0, k * c_lambda])
    });
    let (phi_d, f_d) = (phi.clone(), f.clone());
    let d: VectorFn = Arc::new(move |w: &PontryaginPoint| {
        let jp = phi_d.spatial_jet(w.t, &w.q, false, 1)?;
        let jf = f_d.spatial_jet(w.t, &w.q, true, 1)?;
        let lam = w.q[LAMBDA];
        let mut out: Vec<f64> = (0..3)
            .map(|i| lam * jf.d1(i) - k * jp.d1(i) - gamma * w.p[i])
            .collect();
        out.push(jf.value() - gamma * w.p[LAMBDA]);
        Ok(out)
    });
    if z_minus_t {
        let phi4 = phi.clone();
        push(
            &mut ladder,
            4,
            0,
            "(lambda - k dphi/dz - gamma m)/m",
            Arc::new(move |w: &PontryaginPoint| {
                let j = phi4.spatial_jet(w.t, &w.q, false, 1)?;
                Ok((w.q[LAMBDA] - k * j.d1(2) - gamma * m) / m)
            }),
        );
        let phi5 = phi.clone();
        push(
            &mut ladder,
            5,
            0,
            "(v_lambda - k (phi_xz v_x + phi_yz v_y + phi_zz))/m",
            Arc::new(move |w: &PontryaginPoint| {
                let j = phi5.spatial_jet(w.t, &w.q, false, 2)?;
                Ok((w.v[LAMBDA] - k * (j.d2(0, 2) * w.v[0] + j.d2(1, 2) * w.v[1] + j.d2(2, 2))) / m)
            }),
        );
    }
    Expected {
        c: z_minus_t.then_some(c),
        d,
        depth,
        ladder,
    }
}
