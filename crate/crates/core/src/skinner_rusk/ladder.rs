use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::engine::{self, Origin};
use super::project::{project_onto_ladder, ProjectionOptions};
use super::{fixed_coefficients, PontryaginPoint, ZCoefficients};
use crate::error::EvalError;
use crate::jets::{CoordinateSpace, Jet, ScalarField};
use crate::linalg::{self, FullSvd};
use crate::mechanics::{LagrangianSystem, DEFAULT_RANK_TOL};
use crate::taylor::{Taylor, EXACT};

/// Default feasibility tolerance for constraint values.
pub const DEFAULT_FEAS_TOL: f64 = 1e-8;
/// Default cap on the condition number of the pivot block.
pub const DEFAULT_COND_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LadderError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("constraint {label} is violated at the point (value {value:e})")]
    InfeasiblePoint { label: String, value: f64 },
    #[error("tangency system is ill-conditioned (condition number {condition:e})")]
    NumericalBreakdown { condition: f64 },
    #[error("the constraint ladder is not closed (status {0:?})")]
    LadderNotClosed(LadderStatus),
    #[error("could not project onto the constraints: {0}")]
    ProjectionFailed(String),
    #[error("rank of the tangency system changed from {expected} to {got}")]
    RankChanged { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LadderStatus {
    /// Generations added so far, algorithm not run to completion.
    Open,
    /// No new independent constraint arises.
    Closed,
    /// A consequence of the equations cannot hold at the point.
    Incompatible,
    /// Stopped at the generation limit with new constraints still arising.
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmOptions {
    pub max_generations: usize,
    /// Relative singular-value threshold for rank decisions.
    pub rank_tol: f64,
    /// Absolute tolerance on constraint values.
    pub feas_tol: f64,
    pub cond_cap: f64,
    /// Coefficients along the undetermined directions added to the
    /// minimum-norm accelerations.
    pub gauge: Option<Vec<f64>>,
    /// Project the probe onto each generation before solving.
    pub project: bool,
}

impl Default for AlgorithmOptions {
    fn default() -> Self {
        AlgorithmOptions {
            max_generations: 8,
            rank_tol: DEFAULT_RANK_TOL,
            feas_tol: DEFAULT_FEAS_TOL,
            cond_cap: DEFAULT_COND_CAP,
            gauge: None,
            project: true,
        }
    }
}

pub(crate) struct LadderCore {
    pub system: LagrangianSystem,
    pub origins: Vec<Origin>,
    pub generations: Vec<usize>,
    pub labels: Vec<String>,
}

impl LadderCore {
    fn new(system: LagrangianSystem, origins: Vec<Origin>) -> Self {
        let generations = engine::generations(&origins);
        let mut labels = Vec::with_capacity(origins.len());
        let mut count = std::collections::HashMap::new();
        for &g in &generations {
            let k = count.entry(g).or_insert(0usize);
            *k += 1;
            labels.push(format!("xi{g}_{k}"));
        }
        LadderCore {
            system,
            origins,
            generations,
            labels,
        }
    }

    fn depth(&self) -> usize {
        self.generations.iter().copied().max().unwrap_or(0)
    }

    fn expand(&self, w: &[f64], order: u8, rows_upto: usize) -> Result<engine::Expansion, EvalError> {
        engine::expand(&self.system, &self.origins, w, order, rows_upto)
    }

    /// Expansion of constraints `0..=index` only.
    fn expand_prefix(&self, index: usize, w: &[f64], order: u8) -> Result<engine::Expansion, EvalError> {
        engine::expand(&self.system, &self.origins[..=index], w, order, 0)
    }
}

/// One constraint function of a ladder, evaluable anywhere on `W`.
#[derive(Clone)]
pub struct ConstraintFn {
    core: Arc<LadderCore>,
    index: usize,
}

impl fmt::Debug for ConstraintFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstraintFn")
            .field("label", &self.label())
            .field("generation", &self.generation())
            .field("origin", self.origin())
            .finish()
    }
}

impl ConstraintFn {
    pub fn generation(&self) -> usize {
        self.core.generations[self.index]
    }

    pub fn label(&self) -> &str {
        &self.core.labels[self.index]
    }

    pub fn origin(&self) -> &Origin {
        &self.core.origins[self.index]
    }

    /// Position in the flattened ladder.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn value(&self, w: &PontryaginPoint) -> Result<f64, EvalError> {
        let g = self.generation() as u8;
        let e = self.core.expand_prefix(self.index, &w.to_vec(), g)?;
        Ok(e.constraints[self.index].value())
    }

    /// Derivatives up to `order` (1..=3) in the Pontryagin layout.
    pub fn jet(&self, w: &PontryaginPoint, order: u8) -> Result<Jet, EvalError> {
        crate::jets::eval_jet(self, &w.to_vec(), order)
    }
}

impl ScalarField for ConstraintFn {
    fn dim(&self) -> usize {
        CoordinateSpace::pontryagin(self.core.system.n()).dim()
    }

    fn eval_taylor(&self, x: &[Taylor]) -> Result<Taylor, EvalError> {
        if x.len() != self.dim() {
            return Err(EvalError::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let want = x.iter().map(|c| c.order()).min().unwrap_or(EXACT);
        let want = if want == EXACT { 0 } else { want };
        let point: Vec<f64> = x.iter().map(|c| c.value()).collect();
        let order = want
            .checked_add(self.generation() as u8)
            .filter(|&o| o <= crate::taylor::MAX_ORDER)
            .ok_or(EvalError::Order(want))?;
        let e = self.core.expand_prefix(self.index, &point, order)?;
        Ok(e.constraints[self.index].compose_multi(x))
    }
}

/// Rank data of one tangency solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationReport {
    /// Number of generations whose tangency rows were stacked.
    pub generation: usize,
    pub rows: usize,
    pub rank: usize,
    pub pivot_rows: Vec<usize>,
    pub pivot_cols: Vec<usize>,
    pub undetermined: usize,
    pub condition: f64,
    pub singular_values: Vec<f64>,
}

/// Result of stacking the tangency conditions of a ladder at a point.
#[derive(Debug, Clone)]
pub struct TangencySolution {
    /// Minimum-norm accelerations (plus gauge, if any).
    pub c: Vec<f64>,
    pub undetermined: Vec<Vec<f64>>,
    /// The prior ladder extended by the independent new constraints.
    pub extended: Option<ConstraintLadder>,
    /// Independent new constraints (empty when nothing new arises).
    pub new_constraints: Vec<ConstraintFn>,
    /// Dependent consequences that fail at the point: `(description, value)`.
    pub incompatible: Vec<(String, f64)>,
    pub report: GenerationReport,
}

/// Generations of constraint functions `ξ¹, ξ², …` found by the algorithm.
#[derive(Clone)]
pub struct ConstraintLadder {
    core: Arc<LadderCore>,
    status: LadderStatus,
    reports: Vec<GenerationReport>,
    probe: Option<PontryaginPoint>,
    incompatible: Vec<(String, f64)>,
}

impl fmt::Debug for ConstraintLadder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstraintLadder")
            .field("status", &self.status)
            .field("labels", &self.core.labels)
            .field("origins", &self.core.origins)
            .finish()
    }
}

impl ConstraintLadder {
    /// The first generation `ξ¹_j = p_j − ∂L/∂v^j`, status [`LadderStatus::Open`].
    pub fn primary(system: &LagrangianSystem) -> Self {
        let origins = (0..system.n()).map(|index| Origin::Primary { index }).collect();
        ConstraintLadder {
            core: Arc::new(LadderCore::new(system.clone(), origins)),
            status: LadderStatus::Open,
            reports: Vec::new(),
            probe: None,
            incompatible: Vec::new(),
        }
    }

    /// The primary constraints of a regular Lagrangian, which close at once.
    pub fn primary_closed(system: &LagrangianSystem) -> Self {
        let mut ladder = Self::primary(system);
        ladder.status = LadderStatus::Closed;
        ladder
    }

    /// Rebuilds a ladder from recorded origins, e.g. to reuse a ladder
    /// structure found at one point along a trajectory.
    pub fn from_origins(system: &LagrangianSystem, origins: Vec<Origin>, status: LadderStatus) -> Self {
        ConstraintLadder {
            core: Arc::new(LadderCore::new(system.clone(), origins)),
            status,
            reports: Vec::new(),
            probe: None,
            incompatible: Vec::new(),
        }
    }

    pub fn system(&self) -> &LagrangianSystem {
        &self.core.system
    }

    pub fn status(&self) -> LadderStatus {
        self.status
    }

    /// Number of generations.
    pub fn depth(&self) -> usize {
        self.core.depth()
    }

    pub fn len(&self) -> usize {
        self.core.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.core.origins.is_empty()
    }

    pub fn origins(&self) -> &[Origin] {
        &self.core.origins
    }

    pub fn constraints(&self) -> Vec<ConstraintFn> {
        (0..self.len())
            .map(|index| ConstraintFn {
                core: self.core.clone(),
                index,
            })
            .collect()
    }

    /// Constraints grouped by generation (`generations()[0]` is `ξ¹`).
    pub fn generations(&self) -> Vec<Vec<ConstraintFn>> {
        let mut out: Vec<Vec<ConstraintFn>> = vec![Vec::new(); self.depth()];
        for c in self.constraints() {
            out[c.generation() - 1].push(c);
        }
        out
    }

    pub fn reports(&self) -> &[GenerationReport] {
        &self.reports
    }

    /// The (projected) point the algorithm finished at.
    pub fn probe(&self) -> Option<&PontryaginPoint> {
        self.probe.as_ref()
    }

    pub fn incompatibilities(&self) -> &[(String, f64)] {
        &self.incompatible
    }

    /// Values of every constraint at `w`.
    pub fn values(&self, w: &PontryaginPoint) -> Result<Vec<f64>, EvalError> {
        let e = self.core.expand(&w.to_vec(), self.depth() as u8, 0)?;
        Ok(e.constraints.iter().map(|c| c.value()).collect())
    }

    /// Values and gradients of every constraint at `w`.
    pub fn gradients(&self, w: &PontryaginPoint) -> Result<(Vec<f64>, Vec<Vec<f64>>), EvalError> {
        let dim = w.space().dim();
        let e = self.core.expand(&w.to_vec(), self.depth() as u8 + 1, 0)?;
        let mut values = Vec::with_capacity(self.len());
        let mut grads = Vec::with_capacity(self.len());
        for c in &e.constraints {
            values.push(c.value());
            grads.push((0..dim).map(|i| c.partial(i).value()).collect());
        }
        Ok((values, grads))
    }

    /// Largest constraint violation at `w`.
    pub fn max_violation(&self, w: &PontryaginPoint) -> Result<f64, EvalError> {
        Ok(self
            .values(w)?
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs())))
    }

    /// Tangency rows `(g, a)` with `a_k + g_k · C = 0`, evaluated at `w`.
    pub fn rows(&self, w: &PontryaginPoint) -> Result<(Vec<Vec<f64>>, Vec<f64>), EvalError> {
        let e = self.core.expand(&w.to_vec(), self.depth() as u8 + 1, self.len())?;
        let mut g = Vec::with_capacity(self.len());
        let mut a = Vec::with_capacity(self.len());
        for k in 0..self.len() {
            let row = e.row(k);
            g.push(row.g.iter().map(|x| x.value()).collect());
            a.push(row.a.value());
        }
        Ok((g, a))
    }

    /// Serializable summary at the input point `w0`.
    pub fn report(&self, w0: &PontryaginPoint) -> Result<LadderReport, EvalError> {
        let at_input = self.values(w0)?;
        let at_probe = match &self.probe {
            Some(p) => self.values(p)?,
            None => at_input.clone(),
        };
        let mut generations: Vec<LadderGeneration> = (1..=self.depth())
            .map(|g| LadderGeneration {
                generation: g,
                constraints: Vec::new(),
            })
            .collect();
        for c in self.constraints() {
            generations[c.generation() - 1].constraints.push(ConstraintEntry {
                label: c.label().to_string(),
                origin: c.origin().clone(),
                value_at_input: at_input[c.index()],
                value_at_probe: at_probe[c.index()],
            });
        }
        Ok(LadderReport {
            system: self.system().label().to_string(),
            n: self.system().n(),
            status: self.status,
            depth: self.depth(),
            generations,
            tangency: self.reports.clone(),
            input: w0.clone(),
            probe: self.probe.clone().unwrap_or_else(|| w0.clone()),
            incompatible: self
                .incompatible
                .iter()
                .map(|(label, value)| Incompatibility {
                    condition: label.clone(),
                    value: *value,
                })
                .collect(),
        })
    }

    fn extended(&self, new: Vec<Origin>) -> ConstraintLadder {
        let mut origins = self.core.origins.clone();
        origins.extend(new);
        ConstraintLadder {
            core: Arc::new(LadderCore::new(self.system().clone(), origins)),
            status: LadderStatus::Open,
            reports: self.reports.clone(),
            probe: self.probe.clone(),
            incompatible: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintEntry {
    pub label: String,
    pub origin: Origin,
    pub value_at_input: f64,
    pub value_at_probe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderGeneration {
    pub generation: usize,
    pub constraints: Vec<ConstraintEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Incompatibility {
    pub condition: String,
    pub value: f64,
}

/// JSON-friendly description of a ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderReport {
    pub system: String,
    pub n: usize,
    pub status: LadderStatus,
    pub depth: usize,
    pub generations: Vec<LadderGeneration>,
    pub tangency: Vec<GenerationReport>,
    pub input: PontryaginPoint,
    pub probe: PontryaginPoint,
    pub incompatible: Vec<Incompatibility>,
}

fn normalized(row: &[f64]) -> Vec<f64> {
    let m = row.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if m == 0.0 {
        row.to_vec()
    } else {
        row.iter().map(|x| x / m).collect()
    }
}

fn inf_norm(row: &[f64]) -> f64 {
    row.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Stacks `ℒ_Z ξ = 0` for every constraint of `prior` at `w`, solves for
/// the accelerations and derives the next generation of constraints.
pub fn tangency_solve(
    system: &LagrangianSystem,
    w: &PontryaginPoint,
    prior: &ConstraintLadder,
    opts: &AlgorithmOptions,
) -> Result<TangencySolution, LadderError> {
    let n = system.n();
    if w.n() != n {
        return Err(EvalError::Dimension {
            expected: n,
            got: w.n(),
        }
        .into());
    }
    let depth = prior.depth();
    let values = prior.values(w)?;
    for (k, v) in values.iter().enumerate() {
        if !(v.abs() <= opts.feas_tol) {
            return Err(LadderError::InfeasiblePoint {
                label: prior.core.labels[k].clone(),
                value: *v,
            });
        }
    }
    let (g, a) = prior.rows(w)?;
    let m = linalg::to_matrix(&g, n);
    let svd = FullSvd::new(&m);
    let thr = opts.rank_tol * svd.max_singular_value();
    let rank = svd.rank_above(thr);
    let rhs: Vec<f64> = a.iter().map(|x| -x).collect();
    let mut c = svd.solve(&rhs, rank);
    let undetermined = svd.kernel(rank);
    apply_gauge(&mut c, &undetermined, opts.gauge.as_deref());

    // Pivot structure, scale-free in each row.
    let scaled: Vec<Vec<f64>> = g.iter().map(|r| normalized(r)).collect();
    let scaled_m = linalg::to_matrix(&scaled, n);
    let scaled_thr = linalg::threshold(&scaled_m, opts.rank_tol);
    let pivot_rows = linalg::independent_rows(&scaled, n, scaled_thr);
    let pivot_block: Vec<Vec<f64>> = pivot_rows.iter().map(|&r| g[r].clone()).collect();
    let pivot_cols = linalg::pivot_columns(&pivot_block, n);
    let square: Vec<Vec<f64>> = pivot_block
        .iter()
        .map(|row| pivot_cols.iter().map(|&j| row[j]).collect())
        .collect();
    let condition = linalg::condition_number(&linalg::to_matrix(&square, pivot_cols.len()));
    let report = GenerationReport {
        generation: depth,
        rows: g.len(),
        rank,
        pivot_rows: pivot_rows.clone(),
        pivot_cols: pivot_cols.clone(),
        undetermined: undetermined.len(),
        condition,
        singular_values: svd.singular_values.clone(),
    };
    if condition > opts.cond_cap {
        return Err(LadderError::NumericalBreakdown { condition });
    }

    // Consistency conditions of the newest rows that are not pivots.
    let candidates: Vec<Origin> = (0..prior.len())
        .filter(|&k| prior.core.generations[k] == depth && !pivot_rows.contains(&k))
        .map(|source| Origin::Derived {
            source,
            pivot_rows: pivot_rows.clone(),
            pivot_cols: pivot_cols.clone(),
        })
        .collect();
    let mut solution = TangencySolution {
        c,
        undetermined,
        extended: None,
        new_constraints: Vec::new(),
        incompatible: Vec::new(),
        report,
    };
    if candidates.is_empty() {
        return Ok(solution);
    }
    let trial = prior.extended(candidates.clone());
    let (cand_values, grads) = trial.gradients(w)?;
    let existing = prior.len();
    let scale = grads[..existing]
        .iter()
        .map(|r| inf_norm(r))
        .fold(1.0f64, f64::max);
    let mut accepted_rows: Vec<Vec<f64>> = grads[..existing].iter().map(|r| normalized(r)).collect();
    let dim = w.space().dim();
    let mut rank_now = linalg::rank_above(
        &linalg::to_matrix(&accepted_rows, dim),
        linalg::threshold(&linalg::to_matrix(&accepted_rows, dim), opts.rank_tol),
    );
    let mut accepted = Vec::new();
    for (k, origin) in candidates.into_iter().enumerate() {
        let idx = existing + k;
        let value = cand_values[idx];
        let grad = &grads[idx];
        let mut independent = false;
        if inf_norm(grad) > 1e-10 * scale {
            let mut trial_rows = accepted_rows.clone();
            trial_rows.push(normalized(grad));
            let mt = linalg::to_matrix(&trial_rows, dim);
            let r = linalg::rank_above(&mt, linalg::threshold(&mt, opts.rank_tol));
            if r > rank_now {
                independent = true;
                rank_now = r;
                accepted_rows = trial_rows;
            }
        }
        if independent {
            accepted.push(origin);
        } else if !(value.abs() <= opts.feas_tol) {
            let source = match &origin {
                Origin::Derived { source, .. } => *source,
                Origin::Primary { index } => *index,
            };
            solution.incompatible.push((
                format!("tangency of {}", prior.core.labels[source]),
                value,
            ));
        }
    }
    if !accepted.is_empty() {
        let ext = prior.extended(accepted);
        solution.new_constraints = ext.constraints()[existing..].to_vec();
        solution.extended = Some(ext);
    }
    Ok(solution)
}

fn apply_gauge(c: &mut [f64], kernel: &[Vec<f64>], gauge: Option<&[f64]>) {
    if let Some(gauge) = gauge {
        for (u, &coef) in kernel.iter().zip(gauge) {
            for (ci, ui) in c.iter_mut().zip(u) {
                *ci += coef * ui;
            }
        }
    }
}

/// Runs the constraint algorithm from `w`: repeatedly projects the probe
/// onto the current constraints, imposes tangency, and appends the
/// generation of new constraints, until nothing new arises.
///
/// The returned coefficients come from the last tangency solve; for a
/// ladder that did not close they are the least-squares accelerations.
pub fn run_constraint_algorithm(
    system: &LagrangianSystem,
    w: &PontryaginPoint,
    opts: &AlgorithmOptions,
) -> Result<(ConstraintLadder, ZCoefficients), LadderError> {
    assert!(opts.max_generations >= 1, "max_generations must be at least 1");
    let mut ladder = ConstraintLadder::primary(system);
    let mut probe = w.clone();
    loop {
        if opts.project {
            let popts = ProjectionOptions {
                tol: opts.feas_tol,
                ..ProjectionOptions::default()
            };
            match project_onto_ladder(&ladder, &probe, &popts) {
                Ok(p) => probe = p,
                Err(LadderError::ProjectionFailed(msg)) => {
                    ladder.status = LadderStatus::Incompatible;
                    ladder.incompatible.push((msg, ladder.max_violation(&probe)?));
                    ladder.probe = Some(probe.clone());
                    let z = fallback_z(system, &probe)?;
                    return Ok((ladder, z));
                }
                Err(e) => return Err(e),
            }
        }
        let sol = tangency_solve(system, &probe, &ladder, opts)?;
        ladder.reports.push(sol.report.clone());
        let (d, e) = fixed_coefficients(system, &probe)?;
        let z = ZCoefficients {
            a: 1.0,
            b: probe.v.clone(),
            c: sol.c.clone(),
            d,
            e,
            undetermined: sol.undetermined.clone(),
        };
        ladder.probe = Some(probe.clone());
        if !sol.incompatible.is_empty() {
            ladder.status = LadderStatus::Incompatible;
            ladder.incompatible = sol.incompatible;
            return Ok((ladder, z));
        }
        let Some(mut ext) = sol.extended else {
            ladder.status = LadderStatus::Closed;
            return Ok((ladder, z));
        };
        if ladder.depth() >= opts.max_generations {
            ladder.status = LadderStatus::MaxIterations;
            return Ok((ladder, z));
        }
        ext.reports = ladder.reports.clone();
        ladder = ext;
    }
}

fn fallback_z(system: &LagrangianSystem, w: &PontryaginPoint) -> Result<ZCoefficients, EvalError> {
    let (d, e) = fixed_coefficients(system, w)?;
    Ok(ZCoefficients {
        a: 1.0,
        b: w.v.clone(),
        c: vec![0.0; w.n()],
        d,
        e,
        undetermined: Vec::new(),
    })
}

/// The vector field `Z` of a closed ladder at `w`: `A = 1`, `B = v`,
/// `D_i = ∂L/∂q^i + p_i ∂L/∂s`, `E = L`, and `C` the minimum-norm solution
/// of the tangency conditions (plus `gauge` along undetermined
/// directions). On the ladder the independent pivot rows found at the probe
/// carry every condition, so only they are solved.
#[allow(non_snake_case)]
pub fn assemble_Z(
    system: &LagrangianSystem,
    w: &PontryaginPoint,
    ladder: &ConstraintLadder,
    gauge: Option<&[f64]>,
) -> Result<ZCoefficients, LadderError> {
    if ladder.status() != LadderStatus::Closed {
        return Err(LadderError::LadderNotClosed(ladder.status()));
    }
    let (g, a) = ladder.rows(w)?;
    let m = linalg::to_matrix(&g, system.n());
    let svd = FullSvd::new(&m);
    let rank = match ladder.reports.last() {
        Some(r) => {
            let thr = DEFAULT_RANK_TOL * svd.max_singular_value();
            let got = svd.rank_above(thr);
            if got != r.rank {
                return Err(LadderError::RankChanged {
                    expected: r.rank,
                    got,
                });
            }
            r.rank
        }
        None => svd.rank_above(DEFAULT_RANK_TOL * svd.max_singular_value()),
    };
    let (svd, rhs) = match ladder.reports.last() {
        Some(r) if r.pivot_rows.len() == rank && rank < g.len() => {
            let block: Vec<Vec<f64>> = r.pivot_rows.iter().map(|&k| g[k].clone()).collect();
            let rhs = r.pivot_rows.iter().map(|&k| -a[k]).collect();
            (FullSvd::new(&linalg::to_matrix(&block, system.n())), rhs)
        }
        _ => (svd, a.iter().map(|x| -x).collect::<Vec<f64>>()),
    };
    let mut c = svd.solve(&rhs, rank);
    let undetermined = svd.kernel(rank);
    apply_gauge(&mut c, &undetermined, gauge);
    let (d, e) = fixed_coefficients(system, w)?;
    Ok(ZCoefficients {
        a: 1.0,
        b: w.v.clone(),
        c,
        d,
        e,
        undetermined,
    })
}
