//! Sparse multivariate truncated Taylor polynomials.
//!
//! A [`Taylor`] value holds the Taylor coefficients of a scalar field around
//! an expansion point, for every monomial up to a truncation degree (its
//! `order`). Arithmetic and the elementary functions propagate these
//! coefficients exactly, so any partial derivative up to `order` can be read
//! back without finite differencing. Differentiating with [`Taylor::partial`]
//! lowers the order by one, which is how nested derivatives (Lie derivatives
//! of constraints built from derivatives of the Lagrangian) stay exact.
//!
//! Monomials are packed into a `u128` with four bits per variable, which caps
//! the number of variables at [`MAX_VARS`] and the order at [`MAX_ORDER`].

use std::cmp::Ordering;
use std::fmt;

use crate::error::EvalError;

/// Maximum number of independent variables a polynomial can carry.
pub const MAX_VARS: usize = 32;
/// Maximum truncation degree.
pub const MAX_ORDER: u8 = 15;
/// Order tag for polynomials that are exact (constants).
pub const EXACT: u8 = u8::MAX;

const NIBBLE: u32 = 4;
const NIBBLE_MASK: u128 = 0xF;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    mono: u128,
    deg: u8,
    coeff: f64,
}

/// Truncated Taylor expansion of a scalar quantity.
#[derive(Clone, PartialEq)]
pub struct Taylor {
    order: u8,
    terms: Vec<Term>,
}

fn mono_var(index: usize) -> u128 {
    assert!(index < MAX_VARS, "variable index {index} exceeds {MAX_VARS}");
    1u128 << (NIBBLE * index as u32)
}

fn mono_exponent(mono: u128, index: usize) -> u32 {
    ((mono >> (NIBBLE * index as u32)) & NIBBLE_MASK) as u32
}

fn factorial(k: u32) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

impl Taylor {
    /// An exact constant.
    pub fn constant(value: f64) -> Self {
        let terms = if value == 0.0 {
            Vec::new()
        } else {
            vec![Term {
                mono: 0,
                deg: 0,
                coeff: value,
            }]
        };
        Taylor {
            order: EXACT,
            terms,
        }
    }

    pub fn zero() -> Self {
        Taylor::constant(0.0)
    }

    /// The coordinate function `x_index` expanded at `value`, truncated at `order`.
    pub fn variable(value: f64, index: usize, order: u8) -> Self {
        assert!(order <= MAX_ORDER, "order {order} exceeds {MAX_ORDER}");
        let mut terms = Vec::with_capacity(2);
        if value != 0.0 {
            terms.push(Term {
                mono: 0,
                deg: 0,
                coeff: value,
            });
        }
        if order >= 1 {
            terms.push(Term {
                mono: mono_var(index),
                deg: 1,
                coeff: 1.0,
            });
        }
        Taylor { order, terms }
    }

    /// Seeds one variable per entry of `point`, all at the same order.
    pub fn seed(point: &[f64], order: u8) -> Vec<Taylor> {
        point
            .iter()
            .enumerate()
            .map(|(i, &x)| Taylor::variable(x, i, order))
            .collect()
    }

    /// Truncation degree, or [`EXACT`] for constants.
    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn is_exact(&self) -> bool {
        self.order == EXACT
    }

    /// Constant term.
    pub fn value(&self) -> f64 {
        match self.terms.first() {
            Some(t) if t.mono == 0 => t.coeff,
            _ => 0.0,
        }
    }

    /// True when the polynomial has no non-constant terms.
    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.mono == 0)
    }

    /// Number of stored (nonzero) coefficients.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Taylor coefficient of the monomial with the given exponents
    /// (`exponents[i]` is the power of variable `i`).
    pub fn coefficient(&self, exponents: &[u32]) -> f64 {
        let mut mono = 0u128;
        for (i, &e) in exponents.iter().enumerate() {
            assert!(e <= NIBBLE_MASK as u32);
            mono |= (e as u128) << (NIBBLE * i as u32);
        }
        self.coefficient_of(mono)
    }

    fn coefficient_of(&self, mono: u128) -> f64 {
        match self.terms.binary_search_by(|t| t.mono.cmp(&mono)) {
            Ok(k) => self.terms[k].coeff,
            Err(_) => 0.0,
        }
    }

    /// Mixed partial derivative with respect to the listed variables
    /// (repetition allowed), e.g. `&[2, 2, 5]` is ∂³/∂x₂²∂x₅.
    pub fn derivative(&self, indices: &[usize]) -> f64 {
        assert!(
            indices.len() <= self.order as usize,
            "derivative of degree {} requested from an order-{} expansion",
            indices.len(),
            self.order
        );
        let mut mono = 0u128;
        for &i in indices {
            mono += mono_var(i);
        }
        let c = self.coefficient_of(mono);
        if c == 0.0 {
            return 0.0;
        }
        let mut scale = 1.0;
        let mut seen = [false; MAX_VARS];
        for &i in indices {
            if !seen[i] {
                seen[i] = true;
                scale *= factorial(mono_exponent(mono, i));
            }
        }
        c * scale
    }

    /// Iterates over `(exponents, coefficient)` for the first `nvars` variables.
    pub fn terms(&self, nvars: usize) -> impl Iterator<Item = (Vec<u32>, f64)> + '_ {
        self.terms.iter().map(move |t| {
            let e = (0..nvars).map(|i| mono_exponent(t.mono, i)).collect();
            (e, t.coeff)
        })
    }

    /// Exact partial derivative ∂/∂x_index; the result has order `order - 1`.
    pub fn partial(&self, index: usize) -> Taylor {
        if self.order == EXACT {
            // Constants only.
            return Taylor::zero();
        }
        assert!(
            self.order >= 1,
            "cannot differentiate an order-0 expansion"
        );
        let unit = mono_var(index);
        let mut terms: Vec<Term> = self
            .terms
            .iter()
            .filter_map(|t| {
                let e = mono_exponent(t.mono, index);
                (e > 0).then(|| Term {
                    mono: t.mono - unit,
                    deg: t.deg - 1,
                    coeff: t.coeff * e as f64,
                })
            })
            .collect();
        terms.sort_unstable_by(|a, b| a.mono.cmp(&b.mono));
        Taylor {
            order: self.order - 1,
            terms,
        }
    }

    /// Same polynomial with the truncation degree lowered to `order`.
    pub fn truncate(&self, order: u8) -> Taylor {
        if order >= self.order {
            return self.clone();
        }
        Taylor {
            order,
            terms: self
                .terms
                .iter()
                .copied()
                .filter(|t| t.deg <= order)
                .collect(),
        }
    }

    fn from_unsorted(order: u8, mut terms: Vec<Term>) -> Taylor {
        terms.sort_unstable_by(|a, b| a.mono.cmp(&b.mono));
        let mut out: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match out.last_mut() {
                Some(last) if last.mono == t.mono => last.coeff += t.coeff,
                _ => out.push(t),
            }
        }
        out.retain(|t| t.coeff != 0.0);
        Taylor { order, terms: out }
    }

    fn merge(&self, other: &Taylor, sign: f64) -> Taylor {
        let order = self.order.min(other.order);
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.terms, &other.terms);
        while i < a.len() || j < b.len() {
            let next = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) => match x.mono.cmp(&y.mono) {
                    Ordering::Less => {
                        i += 1;
                        *x
                    }
                    Ordering::Greater => {
                        j += 1;
                        Term {
                            coeff: sign * y.coeff,
                            ..*y
                        }
                    }
                    Ordering::Equal => {
                        i += 1;
                        j += 1;
                        Term {
                            coeff: x.coeff + sign * y.coeff,
                            ..*x
                        }
                    }
                },
                (Some(x), None) => {
                    i += 1;
                    *x
                }
                (None, Some(y)) => {
                    j += 1;
                    Term {
                        coeff: sign * y.coeff,
                        ..*y
                    }
                }
                (None, None) => unreachable!(),
            };
            if next.deg <= order && next.coeff != 0.0 {
                out.push(next);
            }
        }
        Taylor { order, terms: out }
    }

    pub fn add(&self, other: &Taylor) -> Taylor {
        self.merge(other, 1.0)
    }

    pub fn sub(&self, other: &Taylor) -> Taylor {
        self.merge(other, -1.0)
    }

    pub fn neg(&self) -> Taylor {
        self.scale(-1.0)
    }

    pub fn scale(&self, factor: f64) -> Taylor {
        if factor == 0.0 {
            return Taylor {
                order: self.order,
                terms: Vec::new(),
            };
        }
        Taylor {
            order: self.order,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff * factor,
                    ..*t
                })
                .collect(),
        }
    }

    pub fn add_scalar(&self, c: f64) -> Taylor {
        self.add(&Taylor::constant(c))
    }

    pub fn mul(&self, other: &Taylor) -> Taylor {
        let order = self.order.min(other.order);
        if other.is_constant() {
            return self.scale(other.value()).truncate(order);
        }
        if self.is_constant() {
            return other.scale(self.value()).truncate(order);
        }
        let mut out = Vec::with_capacity(self.terms.len() * other.terms.len().min(8));
        for x in &self.terms {
            if x.deg > order {
                continue;
            }
            let room = order - x.deg;
            for y in &other.terms {
                if y.deg <= room {
                    out.push(Term {
                        mono: x.mono + y.mono,
                        deg: x.deg + y.deg,
                        coeff: x.coeff * y.coeff,
                    });
                }
            }
        }
        Taylor::from_unsorted(order, out)
    }

    /// `Σ_k coeffs[k] · (self − self.value())^k`, i.e. composition with a
    /// univariate function whose Taylor coefficients at `self.value()` are given.
    fn compose(&self, coeffs: &[f64]) -> Taylor {
        let h = self.sub(&Taylor::constant(self.value()));
        if h.is_empty() {
            return Taylor {
                order: self.order,
                terms: Taylor::constant(coeffs[0]).terms,
            };
        }
        let top = (self.order as usize).min(coeffs.len() - 1);
        let mut acc = Taylor::constant(coeffs[top]);
        for k in (0..top).rev() {
            acc = acc.mul(&h).add_scalar(coeffs[k]);
        }
        acc.truncate(self.order)
    }

    fn series_len(&self) -> usize {
        if self.is_constant() {
            1
        } else {
            self.order.min(MAX_ORDER) as usize + 1
        }
    }

    pub fn exp(&self) -> Result<Taylor, EvalError> {
        let e0 = self.value().exp();
        let coeffs: Vec<f64> = (0..self.series_len())
            .map(|k| e0 / factorial(k as u32))
            .collect();
        finite(self.compose(&coeffs))
    }

    pub fn ln(&self) -> Result<Taylor, EvalError> {
        let x0 = self.value();
        if !(x0 > 0.0) {
            return Err(EvalError::LogDomain(x0));
        }
        let coeffs: Vec<f64> = (0..self.series_len())
            .map(|k| {
                if k == 0 {
                    x0.ln()
                } else {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign / (k as f64 * x0.powi(k as i32))
                }
            })
            .collect();
        finite(self.compose(&coeffs))
    }

    pub fn sin(&self) -> Result<Taylor, EvalError> {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let coeffs: Vec<f64> = (0..self.series_len())
            .map(|k| cycle[k % 4] / factorial(k as u32))
            .collect();
        finite(self.compose(&coeffs))
    }

    pub fn cos(&self) -> Result<Taylor, EvalError> {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let coeffs: Vec<f64> = (0..self.series_len())
            .map(|k| cycle[k % 4] / factorial(k as u32))
            .collect();
        finite(self.compose(&coeffs))
    }

    /// `self^a` for real `a`, via the binomial series at the base value.
    pub fn powf(&self, a: f64) -> Result<Taylor, EvalError> {
        let x0 = self.value();
        if self.is_constant() {
            let v = x0.powf(a);
            return if v.is_finite() {
                Ok(Taylor {
                    order: self.order,
                    terms: Taylor::constant(v).terms,
                })
            } else {
                Err(EvalError::PowDomain { base: x0, exponent: a })
            };
        }
        let integral = a.fract() == 0.0;
        if x0 < 0.0 && !integral || x0 == 0.0 {
            return Err(EvalError::PowDomain { base: x0, exponent: a });
        }
        let mut coeffs = Vec::with_capacity(self.series_len());
        let mut binom = 1.0;
        for k in 0..self.series_len() {
            if k > 0 {
                binom *= (a - (k as f64 - 1.0)) / k as f64;
            }
            coeffs.push(binom * x0.powf(a - k as f64));
        }
        finite(self.compose(&coeffs))
    }

    pub fn sqrt(&self) -> Result<Taylor, EvalError> {
        let x0 = self.value();
        if x0 < 0.0 || (x0 == 0.0 && !self.is_constant()) {
            return Err(EvalError::SqrtDomain(x0));
        }
        self.powf(0.5)
    }

    pub fn recip(&self) -> Result<Taylor, EvalError> {
        let x0 = self.value();
        if x0 == 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        let coeffs: Vec<f64> = (0..self.series_len())
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign / x0.powi(k as i32 + 1)
            })
            .collect();
        finite(self.compose(&coeffs))
    }

    pub fn div(&self, other: &Taylor) -> Result<Taylor, EvalError> {
        if other.is_constant() {
            let d = other.value();
            if d == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            return finite(self.scale(1.0 / d).truncate(other.order));
        }
        Ok(self.mul(&other.recip()?))
    }

    /// Integer power by repeated squaring; negative exponents go through [`Taylor::recip`].
    pub fn powi(&self, n: i32) -> Result<Taylor, EvalError> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut result = Taylor::constant(1.0).truncate(self.order);
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        Ok(result)
    }

    /// True if every coefficient is finite.
    pub fn is_finite(&self) -> bool {
        self.terms.iter().all(|t| t.coeff.is_finite())
    }

    /// Substitutes `inputs[i]` for variable `i`. `self` must be an expansion
    /// around the point `inputs[i].value()`; the result is truncated at the
    /// smaller of the two orders.
    pub fn compose_multi(&self, inputs: &[Taylor]) -> Taylor {
        let in_order = inputs.iter().map(|x| x.order).min().unwrap_or(EXACT);
        let order = self.order.min(in_order);
        let deltas: Vec<Taylor> = inputs
            .iter()
            .map(|x| x.sub(&Taylor::constant(x.value())).truncate(order))
            .collect();
        // powers[i][e] = deltas[i]^e, filled on demand
        let mut powers: Vec<Vec<Taylor>> = deltas
            .iter()
            .map(|_| vec![Taylor::constant(1.0).truncate(order)])
            .collect();
        let mut acc = Taylor::constant(0.0).truncate(order);
        for t in &self.terms {
            if t.deg > order {
                continue;
            }
            let mut prod = Taylor::constant(t.coeff).truncate(order);
            for (i, d) in deltas.iter().enumerate() {
                let e = mono_exponent(t.mono, i) as usize;
                if e == 0 {
                    continue;
                }
                while powers[i].len() <= e {
                    let next = powers[i].last().unwrap().mul(d);
                    powers[i].push(next);
                }
                prod = prod.mul(&powers[i][e]);
            }
            acc = acc.add(&prod);
        }
        acc
    }
}

fn finite(t: Taylor) -> Result<Taylor, EvalError> {
    if t.is_finite() {
        Ok(t)
    } else {
        Err(EvalError::NonFinite)
    }
}

impl fmt::Debug for Taylor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Taylor(order=")?;
        if self.order == EXACT {
            write!(f, "exact")?;
        } else {
            write!(f, "{}", self.order)?;
        }
        write!(f, ", [")?;
        for (k, t) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", t.coeff)?;
            for i in 0..MAX_VARS {
                let e = mono_exponent(t.mono, i);
                if e == 1 {
                    write!(f, "·x{i}")?;
                } else if e > 1 {
                    write!(f, "·x{i}^{e}")?;
                }
            }
        }
        write!(f, "])")
    }
}

impl From<f64> for Taylor {
    fn from(value: f64) -> Self {
        Taylor::constant(value)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $inner:ident) => {
        impl std::ops::$trait<&Taylor> for &Taylor {
            type Output = Taylor;
            fn $method(self, rhs: &Taylor) -> Taylor {
                Taylor::$inner(self, rhs)
            }
        }
        impl std::ops::$trait<Taylor> for Taylor {
            type Output = Taylor;
            fn $method(self, rhs: Taylor) -> Taylor {
                Taylor::$inner(&self, &rhs)
            }
        }
        impl std::ops::$trait<&Taylor> for Taylor {
            type Output = Taylor;
            fn $method(self, rhs: &Taylor) -> Taylor {
                Taylor::$inner(&self, rhs)
            }
        }
        impl std::ops::$trait<Taylor> for &Taylor {
            type Output = Taylor;
            fn $method(self, rhs: Taylor) -> Taylor {
                Taylor::$inner(self, &rhs)
            }
        }
        impl std::ops::$trait<f64> for &Taylor {
            type Output = Taylor;
            fn $method(self, rhs: f64) -> Taylor {
                Taylor::$inner(self, &Taylor::constant(rhs))
            }
        }
        impl std::ops::$trait<f64> for Taylor {
            type Output = Taylor;
            fn $method(self, rhs: f64) -> Taylor {
                Taylor::$inner(&self, &Taylor::constant(rhs))
            }
        }
        impl std::ops::$trait<&Taylor> for f64 {
            type Output = Taylor;
            fn $method(self, rhs: &Taylor) -> Taylor {
                Taylor::$inner(&Taylor::constant(self), rhs)
            }
        }
        impl std::ops::$trait<Taylor> for f64 {
            type Output = Taylor;
            fn $method(self, rhs: Taylor) -> Taylor {
                Taylor::$inner(&Taylor::constant(self), &rhs)
            }
        }
    };
}

forward_binop!(Add, add, add);
forward_binop!(Sub, sub, sub);
forward_binop!(Mul, mul, mul);

impl std::ops::Neg for Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        self.scale(-1.0)
    }
}

impl std::ops::Neg for &Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        self.scale(-1.0)
    }
}
