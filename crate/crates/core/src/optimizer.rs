//! Constrained search for the plan `(n, ξ₁..ξ_{m−1}, π₁..π_m, τ₀)`.
//!
//! Each restart runs an augmented-Lagrangian loop around Nelder–Mead on the
//! full decision vector, then restores feasibility by solving the risk
//! constraint for `n` (the information matrix is linear in `n`, so this is a
//! one-dimensional root), and finally polishes the remaining "shape"
//! variables with `n` eliminated through that root. The best feasible point
//! evaluated anywhere is returned.
//!
//! Ordering and simplex constraints are built into the parameterization:
//! stresses are cumulative sums of positive increments normalized to end at
//! 1, and `π₁..π_m` are a softmax scaled to `1 − π₀`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::acceptance::{
    acceptability_constant, risk_constraint_residual, w_moments, w_moments_unchecked, RiskSpec, WMoments,
};
use crate::error::{Error, Result};
use crate::fisher::{design_information, invert_information, CovarianceBlocks, DesignPoint};
use crate::link::LinkModel;
use crate::numeric::{minimize, NelderMeadOptions};
use crate::objectives::{quantile_variance, total_cost, CostSpec, PlanDecision};
use crate::par::{map_indexed, stream_rng, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Cost,
    Variance,
}

impl FromStr for Objective {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cost" => Ok(Objective::Cost),
            "variance" => Ok(Objective::Variance),
            _ => Err(Error::Config(format!("objective must be 'cost' or 'variance', got '{s}'"))),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Cost => "cost",
            Objective::Variance => "variance",
        })
    }
}

/// Quantities held fixed during the search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixedQuantities {
    /// Proportion of units tested at use conditions.
    pub pi0: f64,
    pub lot_size: u32,
    /// Number of accelerated stress levels.
    pub m: usize,
}

impl Default for FixedQuantities {
    fn default() -> Self {
        Self { pi0: 0.20, lot_size: 1000, m: 4 }
    }
}

impl FixedQuantities {
    /// Largest admissible sample size, 20% of the lot.
    pub fn n_max(&self) -> f64 {
        0.2 * self.lot_size as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pi0 > 0.0 && self.pi0 < 1.0) {
            return Err(Error::Config(format!("pi0 must lie in (0, 1), got {}", self.pi0)));
        }
        if self.m < 2 {
            return Err(Error::Config(format!("at least two accelerated levels are needed, got m = {}", self.m)));
        }
        if self.lot_size == 0 {
            return Err(Error::Config("lot_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    pub max_outer_iters: usize,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    pub equality_tol: f64,
    /// Relative simplex-size tolerance of the inner minimizer.
    pub inner_tol: f64,
    /// Evaluation budget of each inner minimization.
    pub inner_max_evals: usize,
    pub restarts: usize,
    /// Random shapes screened per restart before the final polish.
    pub screen_points: usize,
    pub seed: u64,
    pub infeasible_sentinel: f64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_outer_iters: 6,
            penalty_init: 10.0,
            penalty_growth: 5.0,
            equality_tol: 1e-4,
            inner_tol: 1e-8,
            inner_max_evals: 1500,
            restarts: 4,
            screen_points: 200,
            seed: 0,
            infeasible_sentinel: 1e12,
            execution: Execution::default(),
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.equality_tol > 0.0 && self.inner_tol > 0.0 && self.penalty_init > 0.0) {
            return Err(Error::Config("tolerances and the initial penalty must be positive".into()));
        }
        if !(self.penalty_growth > 1.0) {
            return Err(Error::Config("penalty_growth must exceed 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("at least one restart is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub evaluations: usize,
    pub feasible_candidates: usize,
    /// Best feasible objective of each restart, if any.
    pub restart_objectives: Vec<Option<f64>>,
    pub best_restart: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub objective_kind: Objective,
    pub plan: PlanDecision,
    /// `C_min` or `V_min`.
    pub objective: f64,
    pub allocation: Vec<u64>,
    pub constraint_residual: f64,
    pub ln_tau0: f64,
    pub k: f64,
    pub w: WMoments,
    pub diagnostics: Diagnostics,
}

impl PlanResult {
    /// `(param, value)` rows for tabular output.
    pub fn rows(&self) -> Vec<(String, f64)> {
        let mut rows = vec![("n".to_string(), self.plan.n)];
        for (i, x) in self.plan.stresses.iter().enumerate() {
            rows.push((format!("xi{i}"), *x));
        }
        for (i, x) in self.plan.proportions.iter().enumerate() {
            rows.push((format!("pi{i}"), *x));
        }
        for (i, x) in self.allocation.iter().enumerate() {
            rows.push((format!("n{i}"), *x as f64));
        }
        rows.push(("ln_tau0".into(), self.ln_tau0));
        rows.push(("tau0".into(), self.plan.censor_time));
        let name = match self.objective_kind {
            Objective::Cost => "C_min",
            Objective::Variance => "V_min",
        };
        rows.push((name.into(), self.objective));
        rows.push(("k".into(), self.k));
        rows.push(("constraint_residual".into(), self.constraint_residual));
        rows
    }
}

/// `n_i = ⌊nπ_i⌋` for `i ≥ 1` and `n₀ = round(n) − Σ_{i≥1} n_i`.
pub fn allocate_samples(n: f64, proportions: &[f64]) -> Result<Vec<u64>> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Allocation(format!("sample size must be positive, got {n}")));
    }
    if proportions.is_empty() || (proportions.iter().sum::<f64>() - 1.0).abs() > 1e-8 {
        return Err(Error::Allocation("proportions must sum to 1".into()));
    }
    if proportions.iter().any(|&p| p < 0.0) {
        return Err(Error::Allocation("proportions must be nonnegative".into()));
    }
    let rest: Vec<u64> = proportions[1..].iter().map(|&p| (n * p).floor() as u64).collect();
    let n0 = n.round() as i64 - rest.iter().sum::<u64>() as i64;
    if n0 < 0 {
        return Err(Error::Allocation(format!("rounding left {n0} units for the use level")));
    }
    let mut out = vec![n0 as u64];
    out.extend(rest);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub eq_residual: f64,
    pub ordering_ok: bool,
    pub simplex_residual: f64,
    pub w_variance: f64,
}

/// Every constraint residual of `plan`, without rejecting invalid plans.
pub fn feasibility_report(plan: &PlanDecision, model: &LinkModel, risks: &RiskSpec, k: f64) -> FeasibilityReport {
    let ordering_ok = plan.stresses.len() >= 2
        && plan.stresses[0] == 0.0
        && *plan.stresses.last().unwrap() == 1.0
        && plan.stresses_ordered();
    let simplex_residual = plan.simplex_residual();
    let w = design_information(plan, model)
        .and_then(|f| invert_information(&(f * plan.n), &model.param_names()))
        .and_then(|(inv, _)| w_moments_unchecked(model, &CovarianceBlocks::from_full(&inv, model.mu_len()), k));
    let (w_variance, eq_residual) = match w {
        Ok(w) if w.variance > 0.0 => {
            let sigma0 = model.eval(0.0).map(|e| e.scale()).unwrap_or(f64::NAN);
            (w.variance, risk_constraint_residual(&w, sigma0, risks).unwrap_or(f64::NAN))
        }
        Ok(w) => (w.variance, f64::NAN),
        Err(_) => (f64::NAN, f64::NAN),
    };
    FeasibilityReport { eq_residual, ordering_ok, simplex_residual, w_variance }
}

/// Stresses, proportions and log censoring time: everything but `n`.
#[derive(Debug, Clone)]
struct Shape {
    stresses: Vec<f64>,
    proportions: Vec<f64>,
    ln_tau: f64,
}

#[derive(Debug, Clone)]
struct Candidate {
    shape: Shape,
    n: f64,
    objective: f64,
    residual: f64,
    w: WMoments,
}

struct Problem<'a> {
    objective: Objective,
    model: &'a LinkModel,
    risks: &'a RiskSpec,
    cost: Option<&'a CostSpec>,
    fixed: FixedQuantities,
    k: f64,
    sigma0: f64,
    ln_tau_center: f64,
    tol: f64,
}

impl Problem<'_> {
    fn m(&self) -> usize {
        self.fixed.m
    }

    /// Shape from `m − 1` stress logs, `m − 1` allocation logits and `ln τ₀`.
    fn shape(&self, y: &[f64]) -> Shape {
        let m = self.m();
        let mut inc: Vec<f64> = y[..m - 1].iter().map(|u| u.clamp(-30.0, 30.0).exp()).collect();
        inc.push(1.0);
        let total: f64 = inc.iter().sum();
        let mut stresses = Vec::with_capacity(m + 1);
        stresses.push(0.0);
        let mut acc = 0.0;
        for d in &inc[..m - 1] {
            acc += d;
            stresses.push(acc / total);
        }
        stresses.push(1.0);

        let logits = &y[m - 1..2 * m - 2];
        let top = logits.iter().fold(0.0f64, |a, &b| a.max(b));
        let mut w: Vec<f64> = logits.iter().map(|v| (v - top).exp()).collect();
        w.push((-top).exp());
        let ws: f64 = w.iter().sum();
        let pi0 = self.fixed.pi0;
        let mut proportions = vec![pi0];
        proportions.extend(w.iter().map(|v| (1.0 - pi0) * v / ws));
        Shape { stresses, proportions, ln_tau: y[2 * m - 2] }
    }

    fn design(&self, shape: &Shape, n: f64) -> DesignPoint {
        DesignPoint {
            stresses: shape.stresses.clone(),
            proportions: shape.proportions.clone(),
            n,
            censor_time: shape.ln_tau.exp(),
        }
    }

    /// Covariance blocks for a single unit (`n = 1`).
    fn unit_blocks(&self, shape: &Shape) -> Result<CovarianceBlocks> {
        if !shape.stresses.windows(2).all(|w| w[1] > w[0]) || !shape.ln_tau.is_finite() {
            return Err(Error::Numerical("degenerate shape".into()));
        }
        let f = design_information(&self.design(shape, 1.0), self.model)?;
        let (inv, _) = invert_information(&f, &self.model.param_names())?;
        Ok(CovarianceBlocks::from_full(&inv, self.model.mu_len()))
    }

    fn moments(&self, unit: &CovarianceBlocks, n: f64) -> Result<WMoments> {
        w_moments(self.model, &unit.scaled(1.0 / n), self.k)
    }

    fn residual(&self, unit: &CovarianceBlocks, n: f64) -> Result<f64> {
        let w = self.moments(unit, n)?;
        if !(w.variance > 0.0) {
            return Err(Error::Numerical("variance of W vanished".into()));
        }
        risk_constraint_residual(&w, self.sigma0, self.risks)
    }

    fn evaluate(&self, shape: &Shape, unit: &CovarianceBlocks, n: f64) -> Result<Candidate> {
        let w = self.moments(unit, n)?;
        if !(w.variance > 0.0) {
            return Err(Error::Numerical("variance of W vanished".into()));
        }
        let residual = risk_constraint_residual(&w, self.sigma0, self.risks)?;
        let objective = match self.objective {
            Objective::Cost => {
                let cost = self.cost.ok_or_else(|| Error::Config("cost spec required".into()))?;
                total_cost(&self.design(shape, n), self.model, cost, self.k, &w)?
            }
            Objective::Variance => quantile_variance(&w)?,
        };
        if !objective.is_finite() {
            return Err(Error::Numerical("objective is not finite".into()));
        }
        Ok(Candidate { shape: shape.clone(), n, objective, residual, w })
    }

    /// Largest `n ≤ n_max` at which the risk constraint holds with equality.
    fn solve_n(&self, unit: &CovarianceBlocks) -> Result<f64> {
        let n_max = self.fixed.n_max();
        let r_top = self.residual(unit, n_max)?;
        if r_top > 0.0 {
            return Err(Error::Infeasible {
                best_residual: r_top,
                detail: "risk constraint cannot be met within the sample-size bound".into(),
            });
        }
        if r_top == 0.0 {
            return Ok(n_max);
        }
        // Walk down geometrically until the residual turns positive.
        let mut hi = n_max.ln();
        let mut lo = hi;
        let floor = (1e-6 * n_max).ln();
        loop {
            lo -= 0.25;
            if lo < floor {
                return Err(Error::Numerical("no sign change of the risk residual".into()));
            }
            match self.residual(unit, lo.exp()) {
                Ok(r) if r > 0.0 => break,
                Ok(_) => hi = lo,
                Err(e) => return Err(e),
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.residual(unit, mid.exp())? > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // `hi` is on the feasible (residual ≤ 0) side of the root.
        Ok(hi.exp())
    }

    fn feasible(&self, c: &Candidate) -> bool {
        c.residual.abs() <= self.tol && c.n > 0.0 && c.n <= self.fixed.n_max()
    }

    /// Initial full vector `(logit n, shape)`.
    fn start(&self, restart: usize, rng: &mut impl Rng) -> Vec<f64> {
        let m = self.m();
        let mut x = vec![0.0; 2 * m];
        x[2 * m - 1] = self.ln_tau_center;
        if restart > 0 {
            for v in x.iter_mut() {
                let e: f64 = StandardNormal.sample(rng);
                *v += e;
            }
        }
        x
    }

    /// Random shape vector: Gaussian stress logs and logits, `ln τ₀` uniform
    /// within ±4 of the log-life location at the highest stress.
    fn random_shape(&self, rng: &mut impl Rng) -> Vec<f64> {
        let m = self.m();
        let mut y: Vec<f64> = (0..2 * m - 2)
            .map(|_| 1.5 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
            .collect();
        y.push(self.ln_tau_center + rng.random_range(-4.0..4.0));
        y
    }

    fn n_of(&self, z: f64) -> f64 {
        self.fixed.n_max() / (1.0 + (-z).exp())
    }
}

struct Tracker {
    best: Option<Candidate>,
    evaluations: usize,
    feasible: usize,
    best_abs_residual: f64,
}

impl Tracker {
    fn consider(&mut self, p: &Problem<'_>, c: &Candidate) {
        self.evaluations += 1;
        self.best_abs_residual = self.best_abs_residual.min(c.residual.abs());
        if p.feasible(c) {
            self.feasible += 1;
            if self.best.as_ref().is_none_or(|b| c.objective < b.objective) {
                self.best = Some(c.clone());
            }
        }
    }
}

fn run_restart(p: &Problem<'_>, settings: &OptimizerSettings, restart: usize) -> Tracker {
    let mut rng = stream_rng(settings.seed, restart as u64);
    let mut t = Tracker { best: None, evaluations: 0, feasible: 0, best_abs_residual: f64::INFINITY };
    let sentinel = settings.infeasible_sentinel;
    let m = p.m();
    let x0 = p.start(restart, &mut rng);
    let inner = NelderMeadOptions {
        initial_step: vec![0.5],
        max_evals: settings.inner_max_evals,
        xtol_rel: settings.inner_tol,
        ftol_abs: f64::INFINITY,
    };

    let eval_full = |t: &mut Tracker, x: &[f64]| -> Option<Candidate> {
        let shape = p.shape(&x[1..]);
        let n = p.n_of(x[0]);
        let c = p.unit_blocks(&shape).and_then(|u| p.evaluate(&shape, &u, n)).ok()?;
        t.consider(p, &c);
        Some(c)
    };

    // Augmented Lagrangian on the full vector.
    let scale = eval_full(&mut t, &x0).map(|c| c.objective.abs().max(1e-300)).unwrap_or(1.0);
    let (mut lambda, mut rho) = (0.0, settings.penalty_init);
    let mut x = x0;
    let mut prev_r = f64::INFINITY;
    for _ in 0..settings.max_outer_iters {
        let res = minimize(
            |z| match eval_full(&mut t, z) {
                Some(c) => c.objective / scale + lambda * c.residual + 0.5 * rho * c.residual * c.residual,
                None => sentinel,
            },
            &x,
            &inner,
        );
        x = res.x;
        let r = match eval_full(&mut t, &x) {
            Some(c) => c.residual,
            None => break,
        };
        if r.abs() <= settings.equality_tol {
            break;
        }
        lambda += rho * r;
        if r.abs() > 0.25 * prev_r {
            rho *= settings.penalty_growth;
        }
        prev_r = r.abs();
    }

    // Restore feasibility in n, then polish the shape with n eliminated.
    let eval_reduced = |t: &mut Tracker, y: &[f64]| -> Option<Candidate> {
        let shape = p.shape(y);
        let unit = p.unit_blocks(&shape).ok()?;
        let n = p.solve_n(&unit).ok()?;
        let c = p.evaluate(&shape, &unit, n).ok()?;
        t.consider(p, &c);
        Some(c)
    };
    eval_reduced(&mut t, &x[1..]);
    // Random screening of shapes; the best feasible point seen so far seeds
    // the polish, which is restarted once from its own result.
    for _ in 0..settings.screen_points {
        let y = p.random_shape(&mut rng);
        eval_reduced(&mut t, &y);
    }
    let polish = NelderMeadOptions { max_evals: settings.inner_max_evals, ..inner };
    for _ in 0..2 {
        let Some(start) = t.best.as_ref().map(|b| shape_to_y(&b.shape, m)) else { break };
        minimize(|y| eval_reduced(&mut t, y).map(|c| c.objective).unwrap_or(sentinel), &start, &polish);
    }
    t
}

/// Inverse of the shape parameterization (used to warm-start the polish).
fn shape_to_y(shape: &Shape, m: usize) -> Vec<f64> {
    let inc: Vec<f64> = shape.stresses.windows(2).map(|w| w[1] - w[0]).collect();
    let last = inc[m - 1];
    let mut y: Vec<f64> = inc[..m - 1].iter().map(|d| (d / last).ln()).collect();
    let pm = shape.proportions[m];
    y.extend(shape.proportions[1..m].iter().map(|p| (p / pm).ln()));
    y.push(shape.ln_tau);
    y
}

fn build_problem<'a>(
    objective: Objective,
    model: &'a LinkModel,
    risks: &'a RiskSpec,
    cost: Option<&'a CostSpec>,
    fixed: FixedQuantities,
    tol: f64,
) -> Result<Problem<'a>> {
    risks.validate()?;
    fixed.validate()?;
    if objective == Objective::Cost {
        let c = cost.ok_or_else(|| Error::Config("cost spec required".into()))?;
        c.validate()?;
        if c.lot_size != fixed.lot_size {
            return Err(Error::Config(format!(
                "cost lot_size ({}) differs from fixed lot_size ({})",
                c.lot_size, fixed.lot_size
            )));
        }
    }
    Ok(Problem {
        objective,
        model,
        risks,
        cost,
        fixed,
        k: acceptability_constant(risks)?,
        sigma0: model.eval(0.0)?.scale(),
        ln_tau_center: model.eval(1.0)?.location(),
        tol,
    })
}

fn finish(p: &Problem<'_>, best: Candidate, diagnostics: Diagnostics) -> Result<PlanResult> {
    let plan = p.design(&best.shape, best.n);
    plan.validate()?;
    let allocation = allocate_samples(best.n, &best.shape.proportions)?;
    Ok(PlanResult {
        objective_kind: p.objective,
        ln_tau0: best.shape.ln_tau,
        plan,
        objective: best.objective,
        allocation,
        constraint_residual: best.residual,
        k: p.k,
        w: best.w,
        diagnostics,
    })
}

/// Minimizes total cost or quantile variance subject to the risk constraint.
pub fn optimize_plan(
    objective: Objective,
    model: &LinkModel,
    risks: &RiskSpec,
    cost: Option<&CostSpec>,
    fixed: FixedQuantities,
    settings: &OptimizerSettings,
) -> Result<PlanResult> {
    settings.validate()?;
    let p = build_problem(objective, model, risks, cost, fixed, settings.equality_tol)?;
    let trackers = map_indexed(settings.execution, settings.restarts, |r| run_restart(&p, settings, r));

    let mut best: Option<(usize, Candidate)> = None;
    let mut diag = Diagnostics { evaluations: 0, feasible_candidates: 0, restart_objectives: Vec::new(), best_restart: 0 };
    let mut best_residual = f64::INFINITY;
    for (i, t) in trackers.into_iter().enumerate() {
        diag.evaluations += t.evaluations;
        diag.feasible_candidates += t.feasible;
        best_residual = best_residual.min(t.best_abs_residual);
        diag.restart_objectives.push(t.best.as_ref().map(|c| c.objective));
        if let Some(c) = t.best {
            if best.as_ref().is_none_or(|(_, b)| c.objective < b.objective) {
                best = Some((i, c));
            }
        }
    }
    match best {
        Some((i, c)) => {
            diag.best_restart = i;
            finish(&p, c, diag)
        }
        None => Err(Error::Infeasible {
            best_residual,
            detail: format!("{} restarts, {} evaluations", settings.restarts, diag.evaluations),
        }),
    }
}

/// Baseline: random shapes with `n` solved from the risk constraint; returns
/// the best of `points` draws, each drawn from its own RNG stream.
#[allow(clippy::too_many_arguments)]
pub fn random_feasible_search(
    objective: Objective,
    model: &LinkModel,
    risks: &RiskSpec,
    cost: Option<&CostSpec>,
    fixed: FixedQuantities,
    points: usize,
    seed: u64,
    exec: Execution,
) -> Result<Option<PlanResult>> {
    let p = build_problem(objective, model, risks, cost, fixed, 1e-4)?;
    // Offset keeps these streams apart from the optimizer's restart streams.
    const STREAM_OFFSET: u64 = 1 << 40;
    let draws = map_indexed(exec, points, |i| {
        let mut rng = stream_rng(seed, STREAM_OFFSET + i as u64);
        let y = p.random_shape(&mut rng);
        let shape = p.shape(&y);
        let unit = p.unit_blocks(&shape).ok()?;
        let n = p.solve_n(&unit).ok()?;
        p.evaluate(&shape, &unit, n).ok().filter(|c| p.feasible(c))
    });
    let feasible = draws.iter().filter(|d| d.is_some()).count();
    let mut best: Option<Candidate> = None;
    for c in draws.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| c.objective < b.objective) {
            best = Some(c);
        }
    }
    best.map(|c| {
        finish(
            &p,
            c,
            Diagnostics { evaluations: points, feasible_candidates: feasible, restart_objectives: vec![], best_restart: 0 },
        )
    })
    .transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acceptance::oc_probability;
    use crate::link::KnotSet;

    pub(crate) fn model() -> LinkModel {
        let km = KnotSet::new(vec![0.0, 0.5, 1.0]).unwrap();
        let ks = KnotSet::new(vec![0.0, 1.0]).unwrap();
        LinkModel::new(km, vec![-0.2, -0.9, -1.5], ks, vec![-0.7, -0.9]).unwrap()
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(allocate_samples(10.0, &[0.5, 0.3, 0.2]).unwrap(), vec![5, 3, 2]);
        let third = 1.0 / 3.0;
        assert_eq!(allocate_samples(10.0, &[third, third, third]).unwrap(), vec![4, 3, 3]);
        let a = allocate_samples(180.0, &[0.2, 0.06, 0.3, 0.13, 0.31]).unwrap();
        assert_eq!(a.iter().sum::<u64>(), 180);
        assert!(allocate_samples(10.0, &[0.5, 0.6]).is_err());
    }

    #[test]
    fn shape_parameterization_roundtrip() {
        let (m, r) = (model(), RiskSpec::preset("case1").unwrap());
        let p = build_problem(Objective::Variance, &m, &r, None, FixedQuantities::default(), 1e-4).unwrap();
        let y = vec![0.3, -0.5, 1.1, 0.2, -0.4, 0.7, 0.25];
        let s = p.shape(&y);
        assert_eq!(s.stresses.len(), 5);
        assert!(s.stresses.windows(2).all(|w| w[1] > w[0]));
        assert!((s.proportions.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let back = shape_to_y(&s, 4);
        for (a, b) in y.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cost_objective_needs_cost_spec() {
        let r = RiskSpec::preset("case1").unwrap();
        let e = optimize_plan(Objective::Cost, &model(), &r, None, FixedQuantities::default(), &OptimizerSettings::default());
        assert!(matches!(e, Err(Error::Config(msg)) if msg.contains("cost spec required")));
    }

    #[test]
    fn variance_plan_is_feasible_and_deterministic() {
        let r = RiskSpec::preset("case5").unwrap();
        let settings = OptimizerSettings { restarts: 2, inner_max_evals: 400, seed: 11, ..Default::default() };
        let fixed = FixedQuantities::default();
        let a = optimize_plan(Objective::Variance, &model(), &r, None, fixed, &settings).unwrap();
        assert!(a.constraint_residual.abs() <= 1e-4);
        assert!(a.plan.n <= 200.0 + 1e-9);
        assert_eq!(a.allocation.iter().sum::<u64>() as f64, a.plan.n.round());
        let sigma0 = model().eval(0.0).unwrap().scale();
        assert!((oc_probability(r.p_alpha, a.k, &a.w, sigma0) - (1.0 - r.alpha)).abs() < 5e-3);
        assert!((oc_probability(r.p_beta, a.k, &a.w, sigma0) - r.beta).abs() < 5e-3);
        let b = optimize_plan(
            Objective::Variance,
            &model(),
            &r,
            None,
            fixed,
            &OptimizerSettings { execution: Execution::Sequential, ..settings },
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn report_flags_bad_simplex() {
        let plan = DesignPoint {
            stresses: vec![0.0, 0.5, 1.0],
            proportions: vec![0.3, 0.4, 0.4],
            n: 50.0,
            censor_time: 1.0,
        };
        let r = RiskSpec::preset("case1").unwrap();
        let rep = feasibility_report(&plan, &model(), &r, 3.0);
        assert!((rep.simplex_residual - 0.1).abs() < 1e-12);
        assert!(rep.ordering_ok);
        let bad = DesignPoint { stresses: vec![0.0, 0.6, 0.4, 1.0], proportions: vec![0.25; 4], ..plan };
        assert!(!feasibility_report(&bad, &model(), &r, 3.0).ordering_ok);
    }
}
