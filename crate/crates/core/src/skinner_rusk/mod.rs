//! The unified Lagrangian–Hamiltonian problem on the Pontryagin bundle
//! `W = ℝ×TQ×T*Q×ℝ` with coordinates `(t, q, v, p, s)`: coupling function,
//! Hamiltonian, the constraint algorithm and the dynamical vector field `Z`.
//!
//! Along any solution `Z = ∂t + v·∂q + C·∂v + D·∂p + L ∂s` with
//! `D_i = ∂L/∂q^i + p_i ∂L/∂s`; only the accelerations `C` are unknown.
//! Tangency of `Z` to a constraint `ξ` reads `ℒ_Z ξ = a_ξ + ∂ξ/∂v · C = 0`,
//! which is linear in `C`. The constraint algorithm stacks these rows,
//! solves for what it can, and turns every inconsistent combination of rows
//! into a constraint of the next generation.

mod engine;
mod ladder;
mod project;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::jets::CoordinateSpace;
use crate::mechanics::{HamiltonianPoint, LagrangianPoint, LagrangianSystem};

pub use engine::Origin;
pub use ladder::{
    assemble_Z, run_constraint_algorithm, tangency_solve, AlgorithmOptions, ConstraintFn,
    ConstraintLadder, GenerationReport, LadderError, LadderReport, LadderStatus,
    TangencySolution, DEFAULT_COND_CAP, DEFAULT_FEAS_TOL,
};
pub use project::{project_onto_ladder, ProjectionOptions};

/// A point `(t, q, v, p, s)` of the Pontryagin bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PontryaginPoint {
    pub t: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub s: f64,
}

impl PontryaginPoint {
    pub fn new(t: f64, q: Vec<f64>, v: Vec<f64>, p: Vec<f64>, s: f64) -> Self {
        assert!(
            q.len() == v.len() && v.len() == p.len(),
            "q, v and p must have the same length"
        );
        PontryaginPoint { t, q, v, p, s }
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn space(&self) -> CoordinateSpace {
        CoordinateSpace::pontryagin(self.n())
    }

    /// Coordinates in `(t, q, v, p, s)` order.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.n() + 2);
        out.push(self.t);
        out.extend(&self.q);
        out.extend(&self.v);
        out.extend(&self.p);
        out.push(self.s);
        out
    }

    pub fn from_slice(n: usize, x: &[f64]) -> Self {
        assert_eq!(x.len(), 3 * n + 2, "Pontryagin point has 3n+2 coordinates");
        PontryaginPoint {
            t: x[0],
            q: x[1..1 + n].to_vec(),
            v: x[1 + n..1 + 2 * n].to_vec(),
            p: x[1 + 2 * n..1 + 3 * n].to_vec(),
            s: x[1 + 3 * n],
        }
    }

    /// `ρ₁(w) = (t, q, v, s)`.
    pub fn lagrangian(&self) -> LagrangianPoint {
        LagrangianPoint::new(self.t, self.q.clone(), self.v.clone(), self.s)
    }

    /// `ρ₂(w) = (t, q, p, s)`.
    pub fn hamiltonian(&self) -> HamiltonianPoint {
        HamiltonianPoint::new(self.t, self.q.clone(), self.p.clone(), self.s)
    }

    /// The point with `p` given by the Legendre map at `x`.
    pub fn from_lagrangian(system: &LagrangianSystem, x: &LagrangianPoint) -> Result<Self, EvalError> {
        let y = crate::mechanics::legendre_map(system, x)?;
        Ok(PontryaginPoint::new(x.t, x.q.clone(), x.v.clone(), y.p, x.s))
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|x| x.is_finite())
    }
}

/// Coefficients of `Z = A ∂t + B·∂q + C·∂v + D·∂p + E ∂s` at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZCoefficients {
    pub a: f64,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub e: f64,
    /// Orthonormal basis of the directions in `C` left free by the
    /// tangency conditions.
    pub undetermined: Vec<Vec<f64>>,
}

impl ZCoefficients {
    /// Components in the Pontryagin layout `(t, q, v, p, s)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.b.len() + 2);
        out.push(self.a);
        out.extend(&self.b);
        out.extend(&self.c);
        out.extend(&self.d);
        out.push(self.e);
        out
    }
}

/// `C(w) = p·v`.
pub fn coupling(w: &PontryaginPoint) -> f64 {
    w.p.iter().zip(&w.v).map(|(p, v)| p * v).sum()
}

/// `H(w) = p·v − L(t, q, v, s)`.
pub fn hamiltonian(system: &LagrangianSystem, w: &PontryaginPoint) -> Result<f64, EvalError> {
    Ok(coupling(w) - system.value(&w.lagrangian())?)
}

/// `ξ¹_j(w) = p_j − ∂L/∂v^j`.
pub fn primary_constraints(system: &LagrangianSystem, w: &PontryaginPoint) -> Result<Vec<f64>, EvalError> {
    let y = crate::mechanics::legendre_map(system, &w.lagrangian())?;
    Ok(w.p.iter().zip(&y.p).map(|(p, dl)| p - dl).collect())
}

/// The coefficients of `Z` fixed without solving anything:
/// `A = 1`, `B = v`, `D_i = ∂L/∂q^i + p_i ∂L/∂s`, `E = L`.
pub(crate) fn fixed_coefficients(
    system: &LagrangianSystem,
    w: &PontryaginPoint,
) -> Result<(Vec<f64>, f64), EvalError> {
    let jet = system.jet(&w.lagrangian(), 1)?;
    let sp = system.space();
    let dl_ds = jet.d1(sp.s());
    let d = (0..system.n())
        .map(|i| jet.d1(sp.q(i)) + w.p[i] * dl_ds)
        .collect();
    Ok((d, jet.value()))
}
