//! Derivative data of scalar fields: the [`Jet`] view (value, gradient,
//! Hessian, third derivatives) over the exact [`Taylor`] engine, coordinate
//! layouts for the three phase spaces, and the two derivative queries the
//! unified formalism leans on most: the velocity Hessian and Lie derivatives.

use serde::Serialize;

use crate::error::EvalError;
use crate::mechanics::{LagrangianPoint, LagrangianSystem};
use crate::skinner_rusk::PontryaginPoint;
use crate::taylor::Taylor;

/// A scalar field that can be evaluated on truncated Taylor inputs.
pub trait ScalarField: Send + Sync {
    /// Number of input coordinates.
    fn dim(&self) -> usize;
    fn eval_taylor(&self, x: &[Taylor]) -> Result<Taylor, EvalError>;

    fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        let seeds: Vec<Taylor> = x.iter().map(|&v| Taylor::constant(v)).collect();
        self.eval_taylor(&seeds).map(|t| t.value())
    }
}

/// Adapts a closure over Taylor inputs into a [`ScalarField`].
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[Taylor]) -> Result<Taylor, EvalError> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

impl<F> ScalarField for FnField<F>
where
    F: Fn(&[Taylor]) -> Result<Taylor, EvalError> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_taylor(&self, x: &[Taylor]) -> Result<Taylor, EvalError> {
        (self.f)(x)
    }
}

/// Truncated Taylor data of a scalar field at a point, up to third order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Jet {
    order: u8,
    value: f64,
    grad: Vec<f64>,
    /// Row-major `dim × dim`, present iff `order >= 2`.
    hess: Option<Vec<f64>>,
    /// Row-major `dim × dim × dim`, present iff `order == 3`.
    third: Option<Vec<f64>>,
}

impl Jet {
    /// Extracts a jet of the given order from a Taylor expansion over `dim` variables.
    pub fn from_taylor(t: &Taylor, dim: usize, order: u8) -> Result<Jet, EvalError> {
        if !(1..=3).contains(&order) {
            return Err(EvalError::Order(order));
        }
        assert!(
            t.order() >= order,
            "expansion of order {} cannot supply a jet of order {order}",
            t.order()
        );
        let mut grad = vec![0.0; dim];
        let mut hess = (order >= 2).then(|| vec![0.0; dim * dim]);
        let mut third = (order >= 3).then(|| vec![0.0; dim * dim * dim]);
        for (exps, c) in t.terms(dim) {
            let deg: u32 = exps.iter().sum();
            if deg == 0 || deg > order as u32 {
                continue;
            }
            // Expand the monomial into its list of variable indices.
            let mut idx = Vec::with_capacity(deg as usize);
            let mut scale = 1.0;
            for (i, &e) in exps.iter().enumerate() {
                for k in 0..e {
                    idx.push(i);
                    scale *= (k + 1) as f64;
                }
            }
            let d = c * scale;
            match idx.len() {
                1 => grad[idx[0]] = d,
                2 => {
                    let h = hess.as_mut().unwrap();
                    h[idx[0] * dim + idx[1]] = d;
                    h[idx[1] * dim + idx[0]] = d;
                }
                3 => {
                    let tt = third.as_mut().unwrap();
                    let (a, b, cc) = (idx[0], idx[1], idx[2]);
                    for (i, j, k) in [
                        (a, b, cc),
                        (a, cc, b),
                        (b, a, cc),
                        (b, cc, a),
                        (cc, a, b),
                        (cc, b, a),
                    ] {
                        tt[(i * dim + j) * dim + k] = d;
                    }
                }
                _ => unreachable!(),
            }
        }
        Ok(Jet {
            order,
            value: t.value(),
            grad,
            hess,
            third,
        })
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn d1(&self, i: usize) -> f64 {
        self.grad[i]
    }

    /// Second partial ∂²f/∂x_i∂x_j. Panics if the jet has order 1.
    pub fn d2(&self, i: usize, j: usize) -> f64 {
        let n = self.dim();
        self.hess.as_ref().expect("jet has no second-order data")[i * n + j]
    }

    /// Third partial ∂³f/∂x_i∂x_j∂x_k. Panics unless the jet has order 3.
    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.dim();
        self.third.as_ref().expect("jet has no third-order data")[(i * n + j) * n + k]
    }

    pub fn hessian(&self) -> Option<Vec<Vec<f64>>> {
        let n = self.dim();
        self.hess
            .as_ref()
            .map(|h| h.chunks(n).map(|row| row.to_vec()).collect())
    }

    pub fn has_hessian(&self) -> bool {
        self.hess.is_some()
    }

    pub fn has_third(&self) -> bool {
        self.third.is_some()
    }
}

/// Evaluates exact derivative data of `f` at `x` up to `order` (1..=3).
pub fn eval_jet(f: &dyn ScalarField, x: &[f64], order: u8) -> Result<Jet, EvalError> {
    if !(1..=3).contains(&order) {
        return Err(EvalError::Order(order));
    }
    if x.len() != f.dim() {
        return Err(EvalError::Dimension {
            expected: f.dim(),
            got: x.len(),
        });
    }
    let seeds = Taylor::seed(x, order);
    let t = f.eval_taylor(&seeds)?;
    Jet::from_taylor(&t, x.len(), order)
}

/// Which phase space a coordinate vector lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum SpaceKind {
    /// `(t, q, v, s)` on ℝ×TQ×ℝ.
    Lagrangian,
    /// `(t, q, v, p, s)` on the Pontryagin bundle.
    Pontryagin,
    /// `(t, q, p, s)` on ℝ×T*Q×ℝ.
    Hamiltonian,
}

/// Index layout of a phase space over an `n`-dimensional configuration space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CoordinateSpace {
    pub n: usize,
    pub kind: SpaceKind,
}

impl CoordinateSpace {
    pub fn lagrangian(n: usize) -> Self {
        CoordinateSpace {
            n,
            kind: SpaceKind::Lagrangian,
        }
    }

    pub fn pontryagin(n: usize) -> Self {
        CoordinateSpace {
            n,
            kind: SpaceKind::Pontryagin,
        }
    }

    pub fn hamiltonian(n: usize) -> Self {
        CoordinateSpace {
            n,
            kind: SpaceKind::Hamiltonian,
        }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            SpaceKind::Pontryagin => 3 * self.n + 2,
            _ => 2 * self.n + 2,
        }
    }

    pub fn t(&self) -> usize {
        0
    }

    pub fn q(&self, i: usize) -> usize {
        assert!(i < self.n);
        1 + i
    }

    pub fn v(&self, i: usize) -> Option<usize> {
        assert!(i < self.n);
        match self.kind {
            SpaceKind::Hamiltonian => None,
            _ => Some(1 + self.n + i),
        }
    }

    pub fn p(&self, i: usize) -> Option<usize> {
        assert!(i < self.n);
        match self.kind {
            SpaceKind::Lagrangian => None,
            SpaceKind::Pontryagin => Some(1 + 2 * self.n + i),
            SpaceKind::Hamiltonian => Some(1 + self.n + i),
        }
    }

    pub fn s(&self) -> usize {
        self.dim() - 1
    }

    /// Coordinate names in index order, e.g. `t, q1, v1, p1, s`.
    pub fn names(&self) -> Vec<String> {
        let n = self.n;
        let mut out = vec!["t".to_string()];
        out.extend((1..=n).map(|i| format!("q{i}")));
        if self.kind != SpaceKind::Hamiltonian {
            out.extend((1..=n).map(|i| format!("v{i}")));
        }
        if self.kind != SpaceKind::Lagrangian {
            out.extend((1..=n).map(|i| format!("p{i}")));
        }
        out.push("s".to_string());
        out
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names().iter().position(|x| x == name)
    }
}

/// The velocity Hessian `W_ij = ∂²L/∂v^i∂v^j` at a Lagrangian-space point.
pub fn hessian_vv(
    system: &LagrangianSystem,
    x: &LagrangianPoint,
) -> Result<Vec<Vec<f64>>, EvalError> {
    let jet = system.jet(x, 2)?;
    let space = CoordinateSpace::lagrangian(system.n());
    let n = system.n();
    Ok((0..n)
        .map(|i| {
            (0..n)
                .map(|j| jet.d2(space.v(i).unwrap(), space.v(j).unwrap()))
                .collect()
        })
        .collect())
}

/// `ℒ_Z ξ (w) = ∇ξ(w) · Z(w)` for a scalar field on the Pontryagin bundle.
pub fn lie_derivative(
    xi: &dyn ScalarField,
    z: &[f64],
    w: &PontryaginPoint,
) -> Result<f64, EvalError> {
    let x = w.to_vec();
    if z.len() != x.len() {
        return Err(EvalError::Dimension {
            expected: x.len(),
            got: z.len(),
        });
    }
    let jet = eval_jet(xi, &x, 1)?;
    Ok(jet.grad().iter().zip(z).map(|(g, c)| g * c).sum())
}
