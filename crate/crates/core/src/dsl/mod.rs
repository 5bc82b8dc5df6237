//! A small arithmetic language for Lagrangians and auxiliary functions.
//!
//! Variables are fixed-named: `t`, `q1..qn`, `v1..vn`, `p1..pn` (only where
//! momenta are allowed) and `s`. Any other identifier refers to a parameter.
//! See the crate README for the grammar.

mod ast;
mod eval;
mod parser;
mod print;

use crate::error::EvalError;
use crate::jets::{CoordinateSpace, ScalarField};
use crate::taylor::Taylor;

pub use ast::{BinaryOp, Expr, Func, ParamError, ParamTable, Var};
pub use eval::{eval_taylor, evaluate, Bindings};
pub use parser::{parse, ParseError, ParseErrorKind};

/// An expression bound to a coordinate layout and parameter values.
#[derive(Debug, Clone)]
pub struct ExprField {
    expr: Expr,
    bindings: Bindings,
    params: ParamTable,
    dim: usize,
}

impl ExprField {
    /// Binds `expr` to `space`, failing if it references a missing parameter
    /// or a variable the space does not have.
    pub fn new(expr: Expr, space: &CoordinateSpace, params: ParamTable) -> Result<Self, EvalError> {
        Self::with_bindings(expr, Bindings::for_space(space), space.dim(), params)
    }

    pub fn with_bindings(
        expr: Expr,
        bindings: Bindings,
        dim: usize,
        params: ParamTable,
    ) -> Result<Self, EvalError> {
        expr.check_params(&params)?;
        let probe: Vec<Taylor> = vec![Taylor::constant(1.0); dim];
        for var in expr.variables() {
            // Surface unbound variables at construction time.
            let field = Expr::Var(var);
            eval_taylor(&field, &bindings, &params, &probe)?;
        }
        Ok(ExprField {
            expr,
            bindings,
            params,
            dim,
        })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn params(&self) -> &ParamTable {
        &self.params
    }
}

impl ScalarField for ExprField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval_taylor(&self, x: &[Taylor]) -> Result<Taylor, EvalError> {
        if x.len() != self.dim {
            return Err(EvalError::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        eval_taylor(&self.expr, &self.bindings, &self.params, x)
    }
}
