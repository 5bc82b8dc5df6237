//! Moving a point of `W` onto the zero set of a ladder.
//!
//! Each constraint, in ladder order, claims one dependent coordinate; the
//! remaining coordinates stay fixed and Newton's method solves the square
//! system. Preference among coordinates: momenta first, then velocities,
//! then positions, then `s` (never `t`). Within velocities and positions,
//! the directions in the kernel of the velocity Hessian (multiplier-like
//! coordinates) come first, so physical initial data is left untouched
//! whenever the constraints allow it.

use nalgebra::{DMatrix, DVector};

use super::ladder::{ConstraintLadder, LadderError, DEFAULT_FEAS_TOL};
use super::PontryaginPoint;
use crate::mechanics::{regularity, DEFAULT_RANK_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOptions {
    /// Accept the result when every constraint is below this in magnitude.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            tol: DEFAULT_FEAS_TOL,
            max_iter: 50,
        }
    }
}

/// Preference classes of the coordinates of `W`, lower is preferred.
fn coordinate_classes(ladder: &ConstraintLadder, w: &PontryaginPoint) -> Result<Vec<Option<u8>>, LadderError> {
    let n = w.n();
    let sp = w.space();
    let reg = regularity(ladder.system(), &w.lagrangian(), DEFAULT_RANK_TOL)?;
    let null_weight = |i: usize| reg.nullspace.iter().map(|u| u[i] * u[i]).sum::<f64>();
    let mut classes = vec![None; sp.dim()];
    for i in 0..n {
        let null = null_weight(i) > 0.5;
        classes[sp.p(i).unwrap()] = Some(0);
        classes[sp.v(i).unwrap()] = Some(if null { 1 } else { 2 });
        classes[sp.q(i)] = Some(if null { 3 } else { 4 });
    }
    classes[sp.s()] = Some(5);
    Ok(classes)
}

/// Projects `w` onto the constraints of `ladder` (all generations).
///
/// Generations are solved in order: stage `g` runs Newton on every
/// constraint of generation at most `g`, so that later constraints are
/// linearized where the earlier ones already hold.
pub fn project_onto_ladder(
    ladder: &ConstraintLadder,
    w: &PontryaginPoint,
    opts: &ProjectionOptions,
) -> Result<PontryaginPoint, LadderError> {
    let (values, grads) = ladder.gradients(w)?;
    let target = (opts.tol * 1e-4).max(1e-15);
    if residual(&values, None) <= target {
        return Ok(w.clone());
    }
    let classes = coordinate_classes(ladder, w)?;
    let generations: Vec<usize> = ladder.constraints().iter().map(|c| c.generation()).collect();
    let mut state = Newton {
        x: w.to_vec(),
        vals: values,
        grads,
        used: Vec::new(),
        active: Vec::new(),
    };
    for stage in 1..=ladder.depth() {
        for k in (0..generations.len()).filter(|&k| generations[k] == stage) {
            match claim(&state.grads[k], &classes, &state.used) {
                Some(i) => {
                    state.used.push(i);
                    state.active.push(k);
                }
                None if state.vals[k].abs() <= opts.tol => {}
                None => {
                    return Err(LadderError::ProjectionFailed(format!(
                        "no free coordinate can satisfy constraint {} (value {:e})",
                        ladder.constraints()[k].label(),
                        state.vals[k]
                    )))
                }
            }
        }
        let upto: Vec<usize> = (0..generations.len()).filter(|&k| generations[k] <= stage).collect();
        state.solve(ladder, &upto, target, opts.max_iter)?;
    }
    let res = residual(&state.vals, None);
    if !(res <= opts.tol) {
        return Err(LadderError::ProjectionFailed(format!(
            "Newton iteration stalled at residual {res:e}"
        )));
    }
    Ok(PontryaginPoint::from_slice(w.n(), &state.x))
}

/// Most preferred free coordinate with a non-negligible gradient entry.
fn claim(grad: &[f64], classes: &[Option<u8>], used: &[usize]) -> Option<usize> {
    let norm = grad.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if norm == 0.0 {
        return None;
    }
    let floor = 1e-6 * norm;
    let mut best: Option<(u8, f64, usize)> = None;
    for (i, &g) in grad.iter().enumerate() {
        let Some(class) = classes[i] else { continue };
        if used.contains(&i) || g.abs() <= floor {
            continue;
        }
        let better = match best {
            None => true,
            Some((bc, bg, _)) => class < bc || (class == bc && g.abs() > bg),
        };
        if better {
            best = Some((class, g.abs(), i));
        }
    }
    best.map(|(_, _, i)| i)
}

fn residual(vals: &[f64], subset: Option<&[usize]>) -> f64 {
    match subset {
        Some(ks) => ks.iter().fold(0.0f64, |m, &k| m.max(vals[k].abs())),
        None => vals.iter().fold(0.0f64, |m, v| m.max(v.abs())),
    }
}

struct Newton {
    x: Vec<f64>,
    vals: Vec<f64>,
    grads: Vec<Vec<f64>>,
    /// Claimed coordinates, paired with `active` constraints.
    used: Vec<usize>,
    active: Vec<usize>,
}

impl Newton {
    /// Damped Newton on the active constraints, measured on `upto`.
    fn solve(&mut self, ladder: &ConstraintLadder, upto: &[usize], target: f64, max_iter: usize) -> Result<(), LadderError> {
        let n = (self.x.len() - 2) / 3;
        let m = self.active.len();
        let mut res = residual(&self.vals, Some(upto));
        for _ in 0..max_iter {
            if res <= target || m == 0 {
                break;
            }
            let jac = DMatrix::from_fn(m, m, |r, c| self.grads[self.active[r]][self.used[c]]);
            let f = DVector::from_fn(m, |r, _| self.vals[self.active[r]]);
            let Some(step) = jac.lu().solve(&f) else {
                return Err(LadderError::ProjectionFailed(
                    "singular Jacobian in the dependent coordinates".into(),
                ));
            };
            let mut alpha = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let mut trial = self.x.clone();
                for (c, &i) in self.used.iter().enumerate() {
                    trial[i] -= alpha * step[c];
                }
                let tw = PontryaginPoint::from_slice(n, &trial);
                if let Ok((tv, tg)) = ladder.gradients(&tw) {
                    let tr = residual(&tv, Some(upto));
                    if tr < res || tr <= target {
                        self.x = trial;
                        self.vals = tv;
                        self.grads = tg;
                        res = tr;
                        improved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !improved {
                break;
            }
        }
        Ok(())
    }
}
