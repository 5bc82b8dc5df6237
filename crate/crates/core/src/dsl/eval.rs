use crate::error::EvalError;
use crate::jets::{CoordinateSpace, Jet};
use crate::taylor::Taylor;

use super::ast::{BinaryOp, Expr, Func, ParamTable, Var};

/// Where each coordinate variable lives in an input vector. Missing
/// velocity or momentum slots make the corresponding variables unavailable.
#[derive(Debug, Clone, PartialEq)]
pub struct Bindings {
    pub t: usize,
    pub q: Vec<usize>,
    pub v: Option<Vec<usize>>,
    pub p: Option<Vec<usize>>,
    pub s: usize,
}

impl Bindings {
    pub fn for_space(space: &CoordinateSpace) -> Self {
        let n = space.n;
        let v = (0..n).map(|i| space.v(i)).collect::<Option<Vec<_>>>();
        let p = (0..n).map(|i| space.p(i)).collect::<Option<Vec<_>>>();
        Bindings {
            t: space.t(),
            q: (0..n).map(|i| space.q(i)).collect(),
            v: if n == 0 { None } else { v },
            p: if n == 0 { None } else { p },
            s: space.s(),
        }
    }

    fn slot(&self, var: Var) -> Result<usize, EvalError> {
        let missing = || EvalError::UnavailableVariable(var.to_string());
        match var {
            Var::T => Ok(self.t),
            Var::S => Ok(self.s),
            Var::Q(i) => self.q.get(i).copied().ok_or_else(missing),
            Var::V(i) => self
                .v
                .as_ref()
                .and_then(|v| v.get(i).copied())
                .ok_or_else(missing),
            Var::P(i) => self
                .p
                .as_ref()
                .and_then(|p| p.get(i).copied())
                .ok_or_else(missing),
        }
    }
}

/// Evaluates `e` on Taylor inputs laid out according to `bindings`.
pub fn eval_taylor(
    e: &Expr,
    bindings: &Bindings,
    params: &ParamTable,
    x: &[Taylor],
) -> Result<Taylor, EvalError> {
    let out = match e {
        Expr::Const(c) => Taylor::constant(*c),
        Expr::Var(v) => {
            let slot = bindings.slot(*v)?;
            x.get(slot)
                .cloned()
                .ok_or(EvalError::Dimension {
                    expected: slot + 1,
                    got: x.len(),
                })?
        }
        Expr::Param(name) => Taylor::constant(
            params
                .get(name)
                .ok_or_else(|| EvalError::UnknownParameter(name.clone()))?,
        ),
        Expr::Neg(inner) => eval_taylor(inner, bindings, params, x)?.neg(),
        Expr::Binary(op, lhs, rhs) => {
            let a = eval_taylor(lhs, bindings, params, x)?;
            if *op == BinaryOp::Pow {
                if let Some(k) = integer_exponent(rhs, params) {
                    return a.powi(k);
                }
            }
            let b = eval_taylor(rhs, bindings, params, x)?;
            match op {
                BinaryOp::Add => a.add(&b),
                BinaryOp::Sub => a.sub(&b),
                BinaryOp::Mul => a.mul(&b),
                BinaryOp::Div => a.div(&b)?,
                BinaryOp::Pow => real_power(&a, &b)?,
            }
        }
        Expr::Call(func, args) => {
            let a = eval_taylor(&args[0], bindings, params, x)?;
            match func {
                Func::Sin => a.sin()?,
                Func::Cos => a.cos()?,
                Func::Exp => a.exp()?,
                Func::Ln => a.ln()?,
                Func::Sqrt => a.sqrt()?,
                Func::Pow => {
                    if let Some(k) = integer_exponent(&args[1], params) {
                        return a.powi(k);
                    }
                    let b = eval_taylor(&args[1], bindings, params, x)?;
                    real_power(&a, &b)?
                }
            }
        }
    };
    if out.is_finite() {
        Ok(out)
    } else {
        Err(EvalError::NonFinite)
    }
}

/// Exponents that are integer-valued constants (possibly via a parameter or
/// a negation) take the repeated-multiplication path.
fn integer_exponent(e: &Expr, params: &ParamTable) -> Option<i32> {
    let value = match e {
        Expr::Const(c) => *c,
        Expr::Param(p) => params.get(p)?,
        Expr::Neg(inner) => -match inner.as_ref() {
            Expr::Const(c) => *c,
            Expr::Param(p) => params.get(p)?,
            _ => return None,
        },
        _ => return None,
    };
    (value.fract() == 0.0 && value.abs() <= 64.0).then_some(value as i32)
}

/// `x^y = exp(y ln x)`, defined for `x > 0`.
fn real_power(x: &Taylor, y: &Taylor) -> Result<Taylor, EvalError> {
    if x.value() <= 0.0 {
        return Err(EvalError::PowDomain {
            base: x.value(),
            exponent: y.value(),
        });
    }
    if y.is_constant() {
        return x.powf(y.value());
    }
    y.mul(&x.ln()?).exp()
}

/// Jet of `e` at `point`, which is laid out according to `space`.
pub fn evaluate(
    e: &Expr,
    space: &CoordinateSpace,
    point: &[f64],
    params: &ParamTable,
    order: u8,
) -> Result<Jet, EvalError> {
    if !(1..=3).contains(&order) {
        return Err(EvalError::Order(order));
    }
    if point.len() != space.dim() {
        return Err(EvalError::Dimension {
            expected: space.dim(),
            got: point.len(),
        });
    }
    let bindings = Bindings::for_space(space);
    let seeds = Taylor::seed(point, order);
    let t = eval_taylor(e, &bindings, params, &seeds)?;
    Jet::from_taylor(&t, point.len(), order)
}
