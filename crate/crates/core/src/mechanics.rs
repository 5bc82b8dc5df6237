//! The classical side: Lagrangian systems on ℝ×TQ×ℝ, the Legendre map,
//! energy, regularity, the Herglotz–Euler–Lagrange equations and the
//! cocontact Hamiltonian vector field on ℝ×T*Q×ℝ.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dsl::{self, ExprField, ParamTable};
use crate::error::EvalError;
use crate::jets::{eval_jet, CoordinateSpace, Jet, ScalarField};
use crate::linalg;
use crate::taylor::Taylor;

/// Default relative singular-value threshold for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// A Lagrangian `L(t, q, v, s)` over an `n`-dimensional configuration space.
/// The field is laid out as [`CoordinateSpace::lagrangian`].
#[derive(Clone)]
pub struct LagrangianSystem {
    n: usize,
    label: String,
    params: ParamTable,
    field: Arc<dyn ScalarField>,
}

impl fmt::Debug for LagrangianSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LagrangianSystem")
            .field("n", &self.n)
            .field("label", &self.label)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl LagrangianSystem {
    pub fn new(
        n: usize,
        label: impl Into<String>,
        params: ParamTable,
        field: Arc<dyn ScalarField>,
    ) -> Result<Self, EvalError> {
        let expected = CoordinateSpace::lagrangian(n).dim();
        if field.dim() != expected {
            return Err(EvalError::Dimension {
                expected,
                got: field.dim(),
            });
        }
        Ok(LagrangianSystem {
            n,
            label: label.into(),
            params,
            field,
        })
    }

    /// Builds a system from an expression in `t, q1..qn, v1..vn, s`.
    pub fn from_expr(
        n: usize,
        label: impl Into<String>,
        expr: dsl::Expr,
        params: ParamTable,
    ) -> Result<Self, EvalError> {
        let field = ExprField::new(expr, &CoordinateSpace::lagrangian(n), params.clone())?;
        Self::new(n, label, params, Arc::new(field))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn params(&self) -> &ParamTable {
        &self.params
    }

    pub fn field(&self) -> &Arc<dyn ScalarField> {
        &self.field
    }

    pub fn space(&self) -> CoordinateSpace {
        CoordinateSpace::lagrangian(self.n)
    }

    pub fn jet(&self, x: &LagrangianPoint, order: u8) -> Result<Jet, EvalError> {
        self.check(x)?;
        eval_jet(self.field.as_ref(), &x.to_vec(), order)
    }

    pub fn value(&self, x: &LagrangianPoint) -> Result<f64, EvalError> {
        self.check(x)?;
        self.field.eval(&x.to_vec())
    }

    pub fn eval_taylor(&self, x: &[Taylor]) -> Result<Taylor, EvalError> {
        self.field.eval_taylor(x)
    }

    fn check(&self, x: &LagrangianPoint) -> Result<(), EvalError> {
        if x.n() != self.n {
            return Err(EvalError::Dimension {
                expected: self.n,
                got: x.n(),
            });
        }
        Ok(())
    }
}

/// A point `(t, q, v, s)` of ℝ×TQ×ℝ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagrangianPoint {
    pub t: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub s: f64,
}

impl LagrangianPoint {
    pub fn new(t: f64, q: Vec<f64>, v: Vec<f64>, s: f64) -> Self {
        assert_eq!(q.len(), v.len(), "q and v must have the same length");
        LagrangianPoint { t, q, v, s }
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    /// Coordinates in `(t, q, v, s)` order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.n() + 2);
        out.push(self.t);
        out.extend(&self.q);
        out.extend(&self.v);
        out.push(self.s);
        out
    }

    pub fn from_slice(n: usize, x: &[f64]) -> Self {
        assert_eq!(x.len(), 2 * n + 2);
        LagrangianPoint {
            t: x[0],
            q: x[1..1 + n].to_vec(),
            v: x[1 + n..1 + 2 * n].to_vec(),
            s: x[1 + 2 * n],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|x| x.is_finite())
    }
}

/// A point `(t, q, p, s)` of ℝ×T*Q×ℝ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianPoint {
    pub t: f64,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub s: f64,
}

impl HamiltonianPoint {
    pub fn new(t: f64, q: Vec<f64>, p: Vec<f64>, s: f64) -> Self {
        assert_eq!(q.len(), p.len(), "q and p must have the same length");
        HamiltonianPoint { t, q, p, s }
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    /// Coordinates in `(t, q, p, s)` order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.n() + 2);
        out.push(self.t);
        out.extend(&self.q);
        out.extend(&self.p);
        out.push(self.s);
        out
    }

    pub fn from_slice(n: usize, x: &[f64]) -> Self {
        assert_eq!(x.len(), 2 * n + 2);
        HamiltonianPoint {
            t: x[0],
            q: x[1..1 + n].to_vec(),
            p: x[1 + n..1 + 2 * n].to_vec(),
            s: x[1 + 2 * n],
        }
    }
}

/// `E_L = v^i ∂L/∂v^i − L`.
pub fn lagrangian_energy(system: &LagrangianSystem, x: &LagrangianPoint) -> Result<f64, EvalError> {
    let jet = system.jet(x, 1)?;
    let space = system.space();
    let dl_dv: f64 = (0..system.n())
        .map(|i| x.v[i] * jet.d1(space.v(i).unwrap()))
        .sum();
    Ok(dl_dv - jet.value())
}

/// Fibre derivative `(t, q, v, s) ↦ (t, q, ∂L/∂v, s)`.
pub fn legendre_map(system: &LagrangianSystem, x: &LagrangianPoint) -> Result<HamiltonianPoint, EvalError> {
    let jet = system.jet(x, 1)?;
    let space = system.space();
    let p = (0..system.n()).map(|i| jet.d1(space.v(i).unwrap())).collect();
    Ok(HamiltonianPoint::new(x.t, x.q.clone(), p, x.s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Regular,
    Singular,
}

/// Rank data of the velocity Hessian at a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub verdict: Verdict,
    pub rank: usize,
    /// Orthonormal basis of the kernel of `W_ij`.
    pub nullspace: Vec<Vec<f64>>,
    /// Relative tolerance used (singular values at or below
    /// `tolerance · σ_max` count as zero).
    pub tolerance: f64,
    pub singular_values: Vec<f64>,
}

/// Classifies `L` at `x` by the numerical rank of its velocity Hessian.
pub fn regularity(
    system: &LagrangianSystem,
    x: &LagrangianPoint,
    tol: f64,
) -> Result<RegularityReport, EvalError> {
    assert!(tol > 0.0, "tolerance must be positive");
    let w = crate::jets::hessian_vv(system, x)?;
    let m = linalg::to_matrix(&w, system.n());
    let sv = linalg::singular_values(&m);
    let thr = tol * sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > thr).count();
    Ok(RegularityReport {
        verdict: if rank == system.n() {
            Verdict::Regular
        } else {
            Verdict::Singular
        },
        rank,
        nullspace: linalg::nullspace(&m, thr),
        tolerance: tol,
        singular_values: sv,
    })
}

/// Coefficients `(ṫ, q̇, ṗ, ṡ)` of the cocontact Hamiltonian vector field of
/// `h` (laid out as [`CoordinateSpace::hamiltonian`]) at `y`.
pub fn cocontact_hamiltonian_field(
    h: &dyn ScalarField,
    y: &HamiltonianPoint,
) -> Result<Vec<f64>, EvalError> {
    let n = y.n();
    let space = CoordinateSpace::hamiltonian(n);
    let jet = eval_jet(h, &y.to_vec(), 1)?;
    let dh_ds = jet.d1(space.s());
    let mut out = vec![0.0; space.dim()];
    out[space.t()] = 1.0;
    let mut p_dh_dp = 0.0;
    for i in 0..n {
        let dh_dp = jet.d1(space.p(i).unwrap());
        out[space.q(i)] = dh_dp;
        out[space.p(i).unwrap()] = -(jet.d1(space.q(i)) + y.p[i] * dh_ds);
        p_dh_dp += y.p[i] * dh_dp;
    }
    out[space.s()] = p_dh_dp - jet.value();
    Ok(out)
}

/// Residual of the Herglotz–Euler–Lagrange equations along a curve sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HerglotzResidual {
    /// `d/dt(∂L/∂v^i) − ∂L/∂q^i − ∂L/∂s ∂L/∂v^i`, with the total derivative
    /// expanded by the chain rule.
    pub components: Vec<f64>,
    /// `ṡ − L`.
    pub sdot: f64,
}

impl HerglotzResidual {
    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

pub fn herglotz_residual(
    system: &LagrangianSystem,
    x: &LagrangianPoint,
    a: &[f64],
    sdot: f64,
) -> Result<HerglotzResidual, EvalError> {
    let n = system.n();
    if a.len() != n {
        return Err(EvalError::Dimension {
            expected: n,
            got: a.len(),
        });
    }
    let jet = system.jet(x, 2)?;
    let sp = system.space();
    let dl_ds = jet.d1(sp.s());
    let components = (0..n)
        .map(|i| {
            let vi = sp.v(i).unwrap();
            let mut total = jet.d2(sp.t(), vi) + sdot * jet.d2(sp.s(), vi);
            for j in 0..n {
                total += x.v[j] * jet.d2(sp.q(j), vi) + a[j] * jet.d2(sp.v(j).unwrap(), vi);
            }
            total - jet.d1(sp.q(i)) - dl_ds * jet.d1(vi)
        })
        .collect();
    Ok(HerglotzResidual {
        components,
        sdot: sdot - jet.value(),
    })
}

/// The Herglotz vector field `X` of a regular Lagrangian: coefficients
/// `(1, v, a, L)` in the Lagrangian layout, where `a` solves the
/// Herglotz–Euler–Lagrange equations.
pub fn herglotz_field(system: &LagrangianSystem, x: &LagrangianPoint) -> Result<Vec<f64>, EvalError> {
    let n = system.n();
    let jet = system.jet(x, 2)?;
    let sp = system.space();
    let l = jet.value();
    let dl_ds = jet.d1(sp.s());
    let w = DMatrix::from_fn(n, n, |i, j| jet.d2(sp.v(i).unwrap(), sp.v(j).unwrap()));
    let rhs = DVector::from_fn(n, |j, _| {
        let vj = sp.v(j).unwrap();
        let mut r = jet.d1(sp.q(j)) + dl_ds * jet.d1(vj) - jet.d2(sp.t(), vj) - l * jet.d2(sp.s(), vj);
        for i in 0..n {
            r -= x.v[i] * jet.d2(sp.q(i), vj);
        }
        r
    });
    let acc = solve_regular(&w, &rhs)?;
    let mut out = vec![0.0; sp.dim()];
    out[sp.t()] = 1.0;
    for i in 0..n {
        out[sp.q(i)] = x.v[i];
        out[sp.v(i).unwrap()] = acc[i];
    }
    out[sp.s()] = l;
    Ok(out)
}

fn solve_regular(w: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>, EvalError> {
    let thr = linalg::threshold(w, DEFAULT_RANK_TOL);
    if linalg::rank_above(w, thr) < w.nrows() {
        return Err(EvalError::Model("the velocity Hessian is singular".into()));
    }
    w.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| EvalError::Model("the velocity Hessian is singular".into()))
}

/// The Hamiltonian `H(t, q, p, s) = p·v − L(t, q, v, s)` of a regular
/// Lagrangian, where `v` inverts the Legendre relation `p = ∂L/∂v` by
/// Newton iteration. Supports Taylor inputs of order at most one.
pub struct LegendreHamiltonian {
    system: LagrangianSystem,
}

impl LegendreHamiltonian {
    pub fn new(system: LagrangianSystem) -> Self {
        LegendreHamiltonian { system }
    }

    /// Velocities `v` with `∂L/∂v(t, q, v, s) = p`.
    pub fn velocities(&self, y: &HamiltonianPoint) -> Result<Vec<f64>, EvalError> {
        let n = self.system.n();
        let sp = self.system.space();
        let mut x = LagrangianPoint::new(y.t, y.q.clone(), vec![0.0; n], y.s);
        for _ in 0..60 {
            let jet = self.system.jet(&x, 2)?;
            let w = DMatrix::from_fn(n, n, |i, j| jet.d2(sp.v(i).unwrap(), sp.v(j).unwrap()));
            let res = DVector::from_fn(n, |i, _| y.p[i] - jet.d1(sp.v(i).unwrap()));
            let step = solve_regular(&w, &res)?;
            for i in 0..n {
                x.v[i] += step[i];
            }
            let scale = 1.0 + x.v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if step.amax() <= 1e-15 * scale {
                return Ok(x.v);
            }
        }
        Err(EvalError::Model("Legendre inversion did not converge".into()))
    }
}

impl ScalarField for LegendreHamiltonian {
    fn dim(&self) -> usize {
        CoordinateSpace::hamiltonian(self.system.n()).dim()
    }

    fn eval_taylor(&self, y: &[Taylor]) -> Result<Taylor, EvalError> {
        let n = self.system.n();
        if y.len() != self.dim() {
            return Err(EvalError::Dimension {
                expected: self.dim(),
                got: y.len(),
            });
        }
        let order = y.iter().map(|c| c.order()).min().unwrap_or(0);
        if order > 1 && order != crate::taylor::EXACT {
            return Err(EvalError::Order(order));
        }
        let values: Vec<f64> = y.iter().map(|c| c.value()).collect();
        let hp = HamiltonianPoint::from_slice(n, &values);
        let v0 = self.velocities(&hp)?;
        let x0 = LagrangianPoint::new(hp.t, hp.q.clone(), v0.clone(), hp.s);
        let jet = self.system.jet(&x0, 2)?;
        let sp = self.system.space();
        let hs = CoordinateSpace::hamiltonian(n);
        let w = DMatrix::from_fn(n, n, |i, j| jet.d2(sp.v(i).unwrap(), sp.v(j).unwrap()));
        let w_inv = w
            .clone()
            .try_inverse()
            .ok_or_else(|| EvalError::Model("the velocity Hessian is singular".into()))?;
        // Increments of the inputs around their values.
        let dy: Vec<Taylor> = y.iter().map(|c| c.add_scalar(-c.value())).collect();
        // First-order inverse: W δv = δp − L_{v,t} δt − L_{v,q} δq − L_{v,s} δs.
        let mut rhs: Vec<Taylor> = Vec::with_capacity(n);
        for i in 0..n {
            let vi = sp.v(i).unwrap();
            let mut r = dy[hs.p(i).unwrap()].clone();
            r = r.sub(&dy[hs.t()].scale(jet.d2(vi, sp.t())));
            r = r.sub(&dy[hs.s()].scale(jet.d2(vi, sp.s())));
            for j in 0..n {
                r = r.sub(&dy[hs.q(j)].scale(jet.d2(vi, sp.q(j))));
            }
            rhs.push(r);
        }
        let mut lag_inputs = Vec::with_capacity(sp.dim());
        lag_inputs.push(y[hs.t()].clone());
        for j in 0..n {
            lag_inputs.push(y[hs.q(j)].clone());
        }
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            let mut vi = Taylor::constant(v0[i]);
            for k in 0..n {
                vi = vi.add(&rhs[k].scale(w_inv[(i, k)]));
            }
            v.push(vi.truncate(order));
        }
        lag_inputs.extend(v.iter().cloned());
        lag_inputs.push(y[hs.s()].clone());
        let l = self.system.eval_taylor(&lag_inputs)?;
        let mut h = l.neg();
        for i in 0..n {
            h = h.add(&y[hs.p(i).unwrap()].mul(&v[i]));
        }
        Ok(h.truncate(order))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_particle() -> LagrangianSystem {
        let e = dsl::parse("0.5*v1^2", 1, false).unwrap();
        LagrangianSystem::from_expr(1, "free", e, ParamTable::new()).unwrap()
    }

    #[test]
    fn free_particle_energy() {
        let x = LagrangianPoint::new(0.0, vec![0.0], vec![3.0], 0.0);
        assert_eq!(lagrangian_energy(&free_particle(), &x).unwrap(), 4.5);
    }

    #[test]
    fn free_hamiltonian_field() {
        let h = crate::jets::FnField::new(4, |y: &[Taylor]| Ok(y[2].mul(&y[2]).scale(0.5)));
        let y = HamiltonianPoint::new(0.0, vec![1.0], vec![2.0], 0.0);
        let f = cocontact_hamiltonian_field(&h, &y).unwrap();
        assert_eq!(f, vec![1.0, 2.0, 0.0, 2.0]);
    }

    #[test]
    fn degree_one_hamiltonian_has_zero_sdot() {
        let h = crate::jets::FnField::new(4, |y: &[Taylor]| Ok(y[2].clone()));
        let y = HamiltonianPoint::new(0.0, vec![1.0], vec![2.0], 0.0);
        let f = cocontact_hamiltonian_field(&h, &y).unwrap();
        assert_eq!(f[3], 0.0);
    }

    #[test]
    fn legendre_hamiltonian_of_free_particle() {
        let h = LegendreHamiltonian::new(free_particle());
        let y = [0.0, 0.3, 2.0, 0.1];
        let jet = eval_jet(&h, &y, 1).unwrap();
        assert!((jet.value() - 2.0).abs() < 1e-15);
        assert!((jet.d1(2) - 2.0).abs() < 1e-15);
        assert_eq!(jet.d1(1), 0.0);
    }
}
