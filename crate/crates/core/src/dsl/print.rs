use std::fmt;

use super::ast::{BinaryOp, Expr};

const PREC_NEG: u8 = 3;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, _, _) => op.precedence(),
        Expr::Neg(_) => PREC_NEG,
        Expr::Const(c) if *c < 0.0 || c.is_sign_negative() => PREC_NEG,
        _ => PREC_ATOM,
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, paren: bool) -> fmt::Result {
    if paren {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

/// Prints with the minimal parentheses needed to reparse to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Param(p) => write!(f, "{p}"),
            Expr::Neg(inner) => {
                write!(f, "-")?;
                write_child(f, inner, precedence(inner) < PREC_NEG)
            }
            Expr::Binary(op, lhs, rhs) => {
                let p = op.precedence();
                match op {
                    BinaryOp::Pow => {
                        write_child(f, lhs, precedence(lhs) < PREC_ATOM)?;
                        write!(f, "^")?;
                        // The exponent parses as a unary expression.
                        write_child(f, rhs, precedence(rhs) < PREC_NEG)
                    }
                    _ => {
                        write_child(f, lhs, precedence(lhs) < p)?;
                        write!(f, " {} ", op.symbol())?;
                        write_child(f, rhs, precedence(rhs) <= p)
                    }
                }
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}
