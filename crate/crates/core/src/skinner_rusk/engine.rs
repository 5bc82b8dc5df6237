//! Exact evaluation of a constraint ladder at a point.
//!
//! Every constraint is a smooth function on `W` described by its origin:
//! either a primary constraint `ξ¹_j`, or the consistency condition of a
//! tangency row `r` against a set of pivot rows `P` solved for the
//! accelerations in columns `J`,
//!
//! ```text
//! ψ_r = a_r − g_r[J] · A⁻¹ · a_P,    A = g_P[J],
//! ```
//!
//! where row `k` of the tangency system is `a_k + g_k · C = 0`. Fixing
//! `(r, P, J)` at the probe point and recomputing everything else from the
//! Lagrangian gives the same function at every nearby point, so gradients
//! and Lie derivatives of derived constraints are exact.

use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::jets::CoordinateSpace;
use crate::mechanics::LagrangianSystem;
use crate::taylor::Taylor;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    /// `ξ¹_j = p_j − ∂L/∂v^j`.
    Primary { index: usize },
    /// Consistency condition of tangency row `source` against `pivot_rows`.
    Derived {
        source: usize,
        pivot_rows: Vec<usize>,
        pivot_cols: Vec<usize>,
    },
}

/// Tangency row `a + g · C` of one constraint.
#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub a: Taylor,
    pub g: Vec<Taylor>,
}

/// Taylor data of a ladder at one point.
pub(crate) struct Expansion {
    pub constraints: Vec<Taylor>,
    rows: Vec<Option<Row>>,
}

impl Expansion {
    pub fn row(&self, k: usize) -> &Row {
        self.rows[k].as_ref().expect("row was computed")
    }
}

/// Expands the first `origins.len()` constraints at `point` with inputs
/// seeded at `order`, and their tangency rows for indices `< rows_upto`.
/// A constraint of generation `g` comes out with order `order − g`.
pub(crate) fn expand(
    system: &LagrangianSystem,
    origins: &[Origin],
    point: &[f64],
    order: u8,
    rows_upto: usize,
) -> Result<Expansion, EvalError> {
    let n = system.n();
    let sp = CoordinateSpace::pontryagin(n);
    if point.len() != sp.dim() {
        return Err(EvalError::Dimension {
            expected: sp.dim(),
            got: point.len(),
        });
    }
    let x = Taylor::seed(point, order);
    let mut lag_in = Vec::with_capacity(2 * n + 2);
    lag_in.push(x[sp.t()].clone());
    for i in 0..n {
        lag_in.push(x[sp.q(i)].clone());
    }
    for i in 0..n {
        lag_in.push(x[sp.v(i).unwrap()].clone());
    }
    lag_in.push(x[sp.s()].clone());
    let l = system.eval_taylor(&lag_in)?;
    if l.order() == 0 {
        return Err(EvalError::Order(order));
    }
    let dl_ds = l.partial(sp.s());
    let d: Vec<Taylor> = (0..n)
        .map(|i| l.partial(sp.q(i)).add(&x[sp.p(i).unwrap()].mul(&dl_ds)))
        .collect();
    let ctx = Context { sp, x: &x, l: &l, d: &d };

    let mut constraints: Vec<Taylor> = Vec::with_capacity(origins.len());
    let mut rows: Vec<Option<Row>> = vec![None; origins.len()];
    for origin in origins {
        let xi = match origin {
            Origin::Primary { index } => x[sp.p(*index).unwrap()].sub(&l.partial(sp.v(*index).unwrap())),
            Origin::Derived {
                source,
                pivot_rows,
                pivot_cols,
            } => {
                for &r in pivot_rows.iter().chain(std::iter::once(source)) {
                    if rows[r].is_none() {
                        rows[r] = Some(ctx.row(&constraints[r])?);
                    }
                }
                schur(&rows, *source, pivot_rows, pivot_cols)?
            }
        };
        constraints.push(xi);
    }
    for k in 0..rows_upto.min(origins.len()) {
        if rows[k].is_none() {
            rows[k] = Some(ctx.row(&constraints[k])?);
        }
    }
    Ok(Expansion { constraints, rows })
}

struct Context<'a> {
    sp: CoordinateSpace,
    x: &'a [Taylor],
    l: &'a Taylor,
    d: &'a [Taylor],
}

impl Context<'_> {
    /// `a = ∂_t ξ + v·∂_q ξ + D·∂_p ξ + L ∂_s ξ`, `g = ∂_v ξ`.
    fn row(&self, xi: &Taylor) -> Result<Row, EvalError> {
        if !xi.is_exact() && xi.order() == 0 {
            return Err(EvalError::Order(0));
        }
        let sp = self.sp;
        let n = sp.n;
        let mut a = xi.partial(sp.t()).add(&self.l.mul(&xi.partial(sp.s())));
        let mut g = Vec::with_capacity(n);
        for i in 0..n {
            a = a.add(&self.x[sp.v(i).unwrap()].mul(&xi.partial(sp.q(i))));
            a = a.add(&self.d[i].mul(&xi.partial(sp.p(i).unwrap())));
            g.push(xi.partial(sp.v(i).unwrap()));
        }
        Ok(Row { a, g })
    }
}

/// `a_r − g_r[J] · A⁻¹ · a_P` by Gaussian elimination with partial pivoting
/// on the constant terms.
fn schur(
    rows: &[Option<Row>],
    source: usize,
    pivot_rows: &[usize],
    pivot_cols: &[usize],
) -> Result<Taylor, EvalError> {
    let m = pivot_rows.len();
    assert_eq!(m, pivot_cols.len(), "pivot rows and columns must pair up");
    let get = |k: usize| rows[k].as_ref().expect("row computed");
    let mut mat: Vec<Vec<Taylor>> = pivot_rows
        .iter()
        .map(|&r| pivot_cols.iter().map(|&j| get(r).g[j].clone()).collect())
        .collect();
    let mut rhs: Vec<Taylor> = pivot_rows.iter().map(|&r| get(r).a.clone()).collect();
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| mat[i][col].value().abs().total_cmp(&mat[j][col].value().abs()))
            .unwrap();
        if mat[piv][col].value() == 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        mat.swap(col, piv);
        rhs.swap(col, piv);
        let inv = mat[col][col].recip()?;
        for i in col + 1..m {
            let factor = mat[i][col].mul(&inv);
            if factor.is_empty() {
                continue;
            }
            for j in col..m {
                let update = factor.mul(&mat[col][j]);
                mat[i][j] = mat[i][j].sub(&update);
            }
            let update = factor.mul(&rhs[col]);
            rhs[i] = rhs[i].sub(&update);
        }
    }
    let mut y: Vec<Taylor> = vec![Taylor::zero(); m];
    for i in (0..m).rev() {
        let mut acc = rhs[i].clone();
        for j in i + 1..m {
            acc = acc.sub(&mat[i][j].mul(&y[j]));
        }
        y[i] = acc.div(&mat[i][i])?;
    }
    let src = get(source);
    let mut out = src.a.clone();
    for (l, &j) in pivot_cols.iter().enumerate() {
        out = out.sub(&src.g[j].mul(&y[l]));
    }
    Ok(out)
}

/// Generation of each constraint: primaries are 1, a derived constraint is
/// one more than the newest constraint it depends on.
pub(crate) fn generations(origins: &[Origin]) -> Vec<usize> {
    let mut gen = Vec::with_capacity(origins.len());
    for o in origins {
        let g = match o {
            Origin::Primary { .. } => 1,
            Origin::Derived {
                source, pivot_rows, ..
            } => {
                1 + pivot_rows
                    .iter()
                    .chain(std::iter::once(source))
                    .map(|&k| gen[k])
                    .max()
                    .unwrap_or(0)
            }
        };
        gen.push(g);
    }
    gen
}
