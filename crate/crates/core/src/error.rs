use thiserror::Error;

/// Failures while evaluating a scalar field at a point.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("logarithm of non-positive argument {0}")]
    LogDomain(f64),
    #[error("square root of negative argument {0}")]
    SqrtDomain(f64),
    #[error("power {base}^{exponent} is outside the real domain")]
    PowDomain { base: f64, exponent: f64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite value produced")]
    NonFinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("expression uses `{0}`, which is not available in this coordinate space")]
    UnavailableVariable(String),
    #[error("invalid jet order {0} (supported: 1..=3)")]
    Order(u8),
    #[error("{0}")]
    Model(String),
}
