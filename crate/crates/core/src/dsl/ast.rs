use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;

/// A coordinate variable. Indices are zero-based internally and printed
/// one-based (`q1` is `Q(0)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    T,
    Q(usize),
    V(usize),
    P(usize),
    S,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => write!(f, "t"),
            Var::Q(i) => write!(f, "q{}", i + 1),
            Var::V(i) => write!(f, "v{}", i + 1),
            Var::P(i) => write!(f, "p{}", i + 1),
            Var::S => write!(f, "s"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinaryOp::Add | BinaryOp::Sub => 1,
            BinaryOp::Mul | BinaryOp::Div => 2,
            BinaryOp::Pow => 4,
        }
    }
}

/// The fixed elementary function set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Pow,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Param(String),
    Neg(Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    /// Visits every node depth-first.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Expr)) {
        visit(self);
        match self {
            Expr::Neg(e) => e.walk(visit),
            Expr::Binary(_, a, b) => {
                a.walk(visit);
                b.walk(visit);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.walk(visit)),
            Expr::Const(_) | Expr::Var(_) | Expr::Param(_) => {}
        }
    }

    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Var(v) = e {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
        });
        out.sort();
        out
    }

    pub fn parameters(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Param(p) = e {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
        });
        out.sort();
        out
    }

    pub fn uses_momenta(&self) -> bool {
        self.variables().iter().any(|v| matches!(v, Var::P(_)))
    }

    pub fn uses_velocities(&self) -> bool {
        self.variables().iter().any(|v| matches!(v, Var::V(_)))
    }

    /// Fails with the first parameter name missing from `params`.
    pub fn check_params(&self, params: &ParamTable) -> Result<(), EvalError> {
        match self.parameters().into_iter().find(|p| params.get(p).is_none()) {
            Some(missing) => Err(EvalError::UnknownParameter(missing)),
            None => Ok(()),
        }
    }
}

/// Named real constants referenced by expressions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct ParamTable {
    values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParamError {
    #[error("parameter `{0}` is defined twice")]
    Duplicate(String),
    #[error("parameter `{name}` has non-finite value {value}")]
    NonFinite { name: String, value: f64 },
    #[error("`{0}` is not a valid parameter name")]
    InvalidName(String),
}

impl ParamTable {
    pub fn new() -> Self {
        ParamTable::default()
    }

    /// Adds a parameter; names must be unique, valid identifiers that do not
    /// collide with coordinate or function names, and values finite.
    pub fn insert(&mut self, name: &str, value: f64) -> Result<(), ParamError> {
        if !is_parameter_name(name) {
            return Err(ParamError::InvalidName(name.to_string()));
        }
        if !value.is_finite() {
            return Err(ParamError::NonFinite {
                name: name.to_string(),
                value,
            });
        }
        if self.values.contains_key(name) {
            return Err(ParamError::Duplicate(name.to_string()));
        }
        self.values.insert(name.to_string(), value);
        Ok(())
    }

    pub fn with(mut self, name: &str, value: f64) -> Result<Self, ParamError> {
        self.insert(name, value)?;
        Ok(self)
    }

    /// Replaces (or adds) a value.
    pub fn set(&mut self, name: &str, value: f64) -> Result<(), ParamError> {
        self.values.remove(name);
        self.insert(name, value)
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl TryFrom<BTreeMap<String, f64>> for ParamTable {
    type Error = ParamError;

    fn try_from(map: BTreeMap<String, f64>) -> Result<Self, Self::Error> {
        let mut table = ParamTable::new();
        for (k, v) in map {
            table.insert(&k, v)?;
        }
        Ok(table)
    }
}

impl From<ParamTable> for BTreeMap<String, f64> {
    fn from(table: ParamTable) -> Self {
        table.values
    }
}

/// Coordinate names (`t`, `s`, `q7`, ...) and function names are reserved.
pub(crate) fn is_parameter_name(name: &str) -> bool {
    let mut chars = name.chars();
    let first_ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_');
    first_ok
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !is_coordinate_name(name)
        && Func::from_name(name).is_none()
}

pub(crate) fn is_coordinate_name(name: &str) -> bool {
    if name == "t" || name == "s" {
        return true;
    }
    let mut chars = name.chars();
    matches!(chars.next(), Some('q' | 'v' | 'p'))
        && name.len() > 1
        && chars.all(|c| c.is_ascii_digit())
}
